"""Exact matrix permanents.

``permanent`` uses Ryser's inclusion-exclusion formula walked in Gray-code
order, so each of the ``2**n`` subsets costs one row-sum update (O(n)).
``brute_force_permanent`` is the permutation-sum definition and serves as an
independent oracle for small ``n``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from ._validation import check_square

MAX_N = 30
MAX_BRUTE_FORCE_N = 9
_COMPENSATE_ABOVE = 16


def _ryser(a):
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    comp = 0j
    compensate = n > _COMPENSATE_ABOVE
    in_set = np.zeros(n, dtype=bool)
    # |S| changes by one per Gray step, so (-1)^|S| alternates from -1
    sign = 1.0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        if in_set[j]:
            row_sums -= a[:, j]
        else:
            row_sums += a[:, j]
        in_set[j] = not in_set[j]
        sign = -sign
        term = sign * np.prod(row_sums)
        if compensate:
            y = term - comp
            t = total + y
            comp = (t - total) - y
            total = t
        else:
            total += term
    return total * (-1) ** n


def _glynn(a):
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    col = a.sum(axis=0)
    delta = np.ones(n)
    total = np.prod(col)
    sgn = 1.0
    for k in range(1, 1 << (n - 1)):
        j = (k & -k).bit_length()
        col = col - 2 * delta[j] * a[j]
        delta[j] = -delta[j]
        sgn = -sgn
        total += sgn * np.prod(col)
    return total / 2 ** (n - 1)


def permanent(m, method="ryser"):
    """Exact permanent of a square complex matrix (n <= 30).

    ``method="glynn"`` selects Glynn's formula, kept for cross-validation.
    """
    a = check_square(m)
    n = a.shape[0]
    if n > MAX_N:
        raise ValueError(f"permanent limited to n <= {MAX_N}, got {n}")
    if n == 1:
        return complex(a[0, 0])
    if n == 2:
        return complex(a[0, 0] * a[1, 1] + a[0, 1] * a[1, 0])
    if method == "ryser":
        return complex(_ryser(a))
    if method == "glynn":
        return complex(_glynn(a))
    raise ValueError(f"unknown method {method!r}")


def brute_force_permanent(m):
    """Sum over all permutations; the reference definition."""
    a = check_square(m)
    n = a.shape[0]
    if n > MAX_BRUTE_FORCE_N:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_FORCE_N}")
    if n == 0:
        return 1.0 + 0j
    perms = _permutations(n)
    return complex(np.sum(np.prod(a[np.arange(n), perms], axis=1)))


@lru_cache(maxsize=None)
def _permutations(n):
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


def permanent_abs_squared(m):
    """Permanent of the element-wise ``|m_ij|**2`` matrix (real, >= 0)."""
    a = check_square(m)
    return float(permanent(np.abs(a) ** 2).real)


def permanent_batch(arr):
    """Permanents of a stack of square matrices, shape ``(..., n, n)``.

    Small ``n`` sums permutations directly; larger ``n`` runs Ryser over the
    whole batch at once.
    """
    a = np.asarray(arr)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError("expected a stack of square matrices")
    n = a.shape[-1]
    if n == 1:
        return a[..., 0, 0]
    if n == 2:
        return a[..., 0, 0] * a[..., 1, 1] + a[..., 0, 1] * a[..., 1, 0]
    if n <= 4:
        out = 0
        for s in itertools.permutations(range(n)):
            term = a[..., 0, s[0]]
            for i in range(1, n):
                term = term * a[..., i, s[i]]
            out = out + term
        return out
    row_sums = np.zeros(a.shape[:-1], dtype=np.result_type(a, complex))
    total = np.zeros(a.shape[:-2], dtype=row_sums.dtype)
    in_set = np.zeros(n, dtype=bool)
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        if in_set[j]:
            row_sums -= a[..., :, j]
        else:
            row_sums += a[..., :, j]
        in_set[j] = not in_set[j]
        size = int(in_set.sum())
        total += (-1) ** size * np.prod(row_sums, axis=-1)
    return (-1) ** n * total

"""Linear-optical circuits used in the experiments.

Ordering convention: ``matrix[i, j]`` is the amplitude for a photon entering
input mode ``j`` to leave in output mode ``i`` (row = output, column = input).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import DimensionError, check_pattern, check_unitary


@dataclass(frozen=True, eq=False)
class Interferometer:
    matrix: np.ndarray = field(repr=False)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "matrix", check_unitary(self.matrix, name=self.name or "T"))

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __matmul__(self, other):
        """``self @ other``: light passes through ``other`` first."""
        return Interferometer(self.matrix @ other.matrix, f"{self.name}*{other.name}")


def f4(phi) -> Interferometer:
    """The one-parameter family of 4x4 complex Hadamard matrices (normalized)."""
    e = np.exp(1j * phi)
    m = 0.5 * np.array(
        [
            [1, 1, 1, 1],
            [1, e, -1, -e],
            [1, -1, 1, -1],
            [1, -e, -1, e],
        ],
        dtype=complex,
    )
    return Interferometer(m, f"F4({phi:.4g})")


_BS = np.array([[1, 1j], [1j, 1]], dtype=complex) / np.sqrt(2)


def mzi(theta, phi_ext=0.0) -> Interferometer:
    """Mach-Zehnder: 50:50 coupler, internal phase ``theta``, 50:50 coupler.

    An external phase ``phi_ext`` sits on input mode 0. With this convention
    ``|T00|^2 = sin^2(theta/2)``: ``theta = 0`` fully swaps the modes and
    ``theta = pi/2`` is balanced.
    """
    inner = np.diag([np.exp(1j * theta), 1.0])
    ext = np.diag([np.exp(1j * phi_ext), 1.0])
    return Interferometer(_BS @ inner @ _BS @ ext, f"MZI({theta:.4g})")


def beam_splitter() -> Interferometer:
    """Balanced splitter in the real Hadamard form ``[[1, 1], [1, -1]]/sqrt 2``."""
    return Interferometer(np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2), "BS")


def embed(block, modes, dim) -> Interferometer:
    """Place a small unitary on ``modes`` of a ``dim``-mode identity."""
    block = np.asarray(block.matrix if isinstance(block, Interferometer) else block)
    modes = check_pattern(modes, dim, "modes")
    if block.shape != (len(modes), len(modes)):
        raise DimensionError("block size does not match the number of modes")
    m = np.eye(dim, dtype=complex)
    m[np.ix_(modes, modes)] = block
    return Interferometer(m, "embed")


def three_photon_circuit(mzi_phase=0.9, phi=np.pi / 2) -> Interferometer:
    """F4 preceded by tuned input MZIs on mode pairs (0, 1) and (2, 3).

    Detuning the input MZIs from balanced breaks the uniformity of the
    three-photon F4 distributions.
    """
    first = embed(mzi(mzi_phase), (0, 1), 4).matrix @ embed(mzi(mzi_phase), (2, 3), 4).matrix
    return Interferometer(f4(phi).matrix @ first, f"3ph({mzi_phase:.3g})")


def submatrix(t, inputs, outputs):
    """Rows selected by ``outputs``, columns by ``inputs``, in the given order."""
    m = t.matrix if isinstance(t, Interferometer) else np.asarray(t, dtype=complex)
    inputs = check_pattern(inputs, m.shape[1], "inputs")
    outputs = check_pattern(outputs, m.shape[0], "outputs")
    if len(inputs) != len(outputs):
        raise DimensionError(f"{len(inputs)} inputs vs {len(outputs)} outputs")
    return m[np.ix_(outputs, inputs)]


def bell_state_coefficients(phi):
    """Normalized (Phi-, Psi-) amplitudes heralded by the fusion click pattern."""
    e = np.exp(1j * phi)
    return (1 + e) / 2, (1 - e) / 2


def load_matrix_csv(path) -> Interferometer:
    """Read rows of ``re,im`` pairs (2M numbers per line) and validate unitarity."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            vals = [float(x) for x in rec]
            if len(vals) % 2:
                raise ValueError(f"{path}:{lineno}: odd number of values")
            rows.append(np.array(vals[0::2]) + 1j * np.array(vals[1::2]))
    return Interferometer(np.array(rows), Path(path).stem)


def save_matrix_csv(t, path):
    m = t.matrix if isinstance(t, Interferometer) else np.asarray(t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in m:
            w.writerow([f"{v:.17g}" for z in row for v in (z.real, z.imag)])


PRESETS = {
    "f4": lambda phase=np.pi / 2: f4(phase),
    "mzi": lambda phase=np.pi / 2: mzi(phase),
    "bs": lambda phase=None: beam_splitter(),
    "three-photon-bs": lambda phase=0.9: three_photon_circuit(phase),
}


def preset(name, phase=None) -> Interferometer:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown circuit preset {name!r}") from None
    return factory() if phase is None else factory(phase)

"""Joint spectral/temporal amplitudes of ring-resonator pair sources.

The pair amplitude for spontaneous four-wave mixing in a ring, with phase
matching taken as 1, is

    F(ws, wi) = G(ws + wi) * l(ws) * l(wi)
    G(s)      = integral dwp a(wp) l(wp) a(s - wp) l(s - wp)

where ``a`` is the pump envelope and ``l`` the ring response at the pump,
signal and idler resonances. ``G`` is a self-convolution, evaluated by FFT.
Signal/idler axes are detunings from their nominal (unshifted) resonances, so a
ring shifted by ``c`` puts all three resonances at ``c`` on their own axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve
from sklearn.base import BaseEstimator

from ._validation import check_positive
from .grids import (
    FrequencyGrid,
    PumpSpec,
    TemporalProfile,
    TimeGrid,
    fourier_forward,
    ghz_to_rad_per_ps,
    lorentzian_amplitude,
    lorentzian_photon,
    resample,
    _check_resolved,
)

DEFAULT_TRUNCATION = 0.999
DEFAULT_JSA_POINTS = 512


@dataclass(frozen=True, eq=False)
class JointAmplitude:
    """Two-photon amplitude on a square grid; axis 0 = signal, axis 1 = idler.

    ``grid`` is a :class:`FrequencyGrid` for a JSA or a :class:`TimeGrid` for a
    JTA. Values are densities: ``sum |F|^2 * step**2 == 1``.
    """

    grid: FrequencyGrid | TimeGrid
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        n = self.grid.n_points
        if a.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} amplitude, got {a.shape}")
        object.__setattr__(self, "amplitudes", a)

    @property
    def is_spectral(self):
        return isinstance(self.grid, FrequencyGrid)

    @property
    def step(self):
        return self.grid.d_omega if self.is_spectral else self.grid.dt

    @property
    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)) * self.step)

    def normalized(self):
        if self.norm == 0:
            raise ValueError("joint amplitude is identically zero")
        return JointAmplitude(self.grid, self.amplitudes / self.norm)

    def to_csv(self, path):
        """Write ``|amplitude|`` as a plain CSV matrix (rows = signal)."""
        np.savetxt(path, np.abs(self.amplitudes), delimiter=",", fmt="%.6e")


@dataclass(frozen=True, eq=False)
class MixedPhoton:
    """Single-photon state ``sum_k w_k |zeta_k><zeta_k|`` on one time grid."""

    weights: np.ndarray
    profiles: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.profiles) or len(w) == 0:
            raise ValueError("need one weight per profile")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "weights", w / w.sum())
        object.__setattr__(self, "profiles", tuple(self.profiles))

    @classmethod
    def pure(cls, profile: TemporalProfile):
        return cls(np.array([1.0]), (profile,))

    @property
    def grid(self):
        return self.profiles[0].grid

    @property
    def purity(self):
        return float(np.sum(self.weights**2))

    @property
    def mode_matrix(self):
        """Profiles stacked as rows, shape ``(K, n_points)``."""
        return np.array([p.amplitudes for p in self.profiles])

    @property
    def intensity(self):
        return self.weights @ (np.abs(self.mode_matrix) ** 2)

    def delayed(self, delay_ps):
        return MixedPhoton(self.weights, tuple(p.delayed(delay_ps) for p in self.profiles))

    def resampled(self, grid: TimeGrid):
        return MixedPhoton(self.weights, tuple(resample(p, grid) for p in self.profiles))


def as_mixed(photon) -> MixedPhoton:
    if isinstance(photon, MixedPhoton):
        return photon
    if isinstance(photon, TemporalProfile):
        return MixedPhoton.pure(photon)
    if isinstance(photon, SchmidtDecomposition):
        return photon.idler
    raise TypeError(f"cannot interpret {type(photon).__name__} as a photon state")


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    weights: np.ndarray
    signal_modes: tuple
    idler_modes: tuple

    @property
    def purity(self):
        return purity(self)

    @property
    def signal(self):
        return MixedPhoton(self.weights, self.signal_modes)

    @property
    def idler(self):
        return MixedPhoton(self.weights, self.idler_modes)


def build_jsa(
    pump: PumpSpec,
    ring_linewidth,
    ring_center,
    grid: FrequencyGrid,
    pump_linewidth=None,
    separable=False,
) -> JointAmplitude:
    """Joint spectral amplitude of one ring source.

    ``ring_linewidth`` and ``ring_center`` are in GHz; ``ring_center`` is the
    ring's shift relative to the pump carrier. ``pump_linewidth`` (GHz) sets the
    width of the pump resonance and defaults to ``ring_linewidth``.
    ``separable=True`` replaces the pump factor by 1 (product-state check).
    """
    width = float(ghz_to_rad_per_ps(check_positive(ring_linewidth, "ring_linewidth")))
    pwidth = width if pump_linewidth is None else float(ghz_to_rad_per_ps(pump_linewidth))
    center = float(ghz_to_rad_per_ps(ring_center))
    _check_resolved(width, grid, "ring line")
    _check_resolved(pump.fwhm_rad_per_ps, grid, "pump")

    w = grid.omegas
    l_si = lorentzian_amplitude(w, center, width)
    if separable:
        amp = np.outer(l_si, l_si)
    else:
        sigma = pump.fwhm_rad_per_ps / (2 * np.sqrt(2 * np.log(2)))
        in_ring = np.exp(-(w**2) / (4 * sigma**2)) * lorentzian_amplitude(w, center, pwidth)
        g = fftconvolve(in_ring, in_ring) * grid.d_omega
        n = grid.n_points
        idx = np.arange(n)
        amp = g[idx[:, None] + idx[None, :]] * np.outer(l_si, l_si)
    return JointAmplitude(grid, amp).normalized()


def jsa_to_jta(j: JointAmplitude) -> JointAmplitude:
    """2-D Fourier transform, project sign convention on both axes."""
    if not j.is_spectral:
        raise ValueError("expected a spectral amplitude")
    a = fourier_forward(fourier_forward(j.amplitudes, j.grid, axis=0), j.grid, axis=1)
    return JointAmplitude(j.grid.time_grid, a)


def schmidt_decompose(j: JointAmplitude, truncation=None) -> SchmidtDecomposition:
    """SVD of the joint amplitude.

    Weights are the squared singular values normalized to 1, sorted
    descending. With ``truncation`` set, modes are kept until their cumulative
    weight reaches it and the retained weights are renormalized. Modes are
    returned as temporal profiles (spectral modes are transformed).
    """
    a = j.amplitudes * j.step
    if not np.any(a):
        raise ValueError("joint amplitude is identically zero")
    u, s, vh = np.linalg.svd(a)
    lam = s**2
    lam = lam / lam.sum()
    k = len(lam)
    if truncation is not None:
        k = int(np.searchsorted(np.cumsum(lam), truncation) + 1)
        k = min(k, len(lam))
    lam = lam[:k] / lam[:k].sum()
    sig = u[:, :k].T / np.sqrt(j.step)
    idl = vh[:k] / np.sqrt(j.step)
    if j.is_spectral:
        tg = j.grid.time_grid
        sig = fourier_forward(sig, j.grid, axis=1)
        idl = fourier_forward(idl, j.grid, axis=1)
    else:
        tg = j.grid
    return SchmidtDecomposition(
        lam,
        tuple(TemporalProfile(tg, m) for m in sig),
        tuple(TemporalProfile(tg, m) for m in idl),
    )


def purity(d: SchmidtDecomposition) -> float:
    return float(np.sum(np.asarray(d.weights) ** 2))


def reconstruct(d: SchmidtDecomposition) -> np.ndarray:
    """``sum_k sqrt(w_k) signal_k (x) idler_k`` as a density array."""
    sig = np.array([m.amplitudes for m in d.signal_modes])
    idl = np.array([m.amplitudes for m in d.idler_modes])
    return np.einsum("k,ki,kj->ij", np.sqrt(d.weights), sig, idl)


class SchmidtDecomposer(BaseEstimator):
    """Estimator wrapper around :func:`schmidt_decompose`.

    ``fit`` accepts a :class:`JointAmplitude`. Fitted attributes follow the
    scikit-learn trailing-underscore convention.
    """

    def __init__(self, truncation=DEFAULT_TRUNCATION):
        self.truncation = truncation

    def fit(self, X, y=None):
        if not isinstance(X, JointAmplitude):
            raise TypeError("SchmidtDecomposer.fit expects a JointAmplitude")
        d = schmidt_decompose(X, self.truncation)
        self.decomposition_ = d
        self.weights_ = d.weights
        self.n_modes_ = len(d.weights)
        self.purity_ = purity(d)
        return self

    def transform(self, X):
        """Coefficients of ``X`` in the fitted (signal, idler) mode basis."""
        d = self.decomposition_
        sig = np.array([m.amplitudes for m in d.signal_modes])
        idl = np.array([m.amplitudes for m in d.idler_modes])
        a = X.amplitudes if isinstance(X, JointAmplitude) else np.asarray(X)
        step = d.signal_modes[0].grid.dt
        return sig.conj() @ a @ idl.conj().T * step**2


def ring_photon(
    detuning_ghz,
    linewidth_ghz,
    pump: PumpSpec | None = None,
    time_grid: TimeGrid | None = None,
    jsa_points=DEFAULT_JSA_POINTS,
    truncation=DEFAULT_TRUNCATION,
    pump_linewidth_ghz=None,
) -> MixedPhoton:
    """Heralded idler photon from a ring shifted by ``detuning_ghz``.

    Without a pump spec the photon is the pure Lorentzian wave-packet. With one,
    the JSA is built on a coarse grid of ``jsa_points`` covering the same time
    span (hence the same frequency step) and the retained idler Schmidt modes
    are resampled onto ``time_grid``.
    """
    tg = time_grid or TimeGrid()
    if pump is None:
        return MixedPhoton.pure(lorentzian_photon(detuning_ghz, linewidth_ghz, tg))
    coarse = TimeGrid(tg.t_start, tg.span / jsa_points, jsa_points)
    jsa = build_jsa(
        pump, linewidth_ghz, detuning_ghz, coarse.frequency_grid(), pump_linewidth_ghz
    )
    d = schmidt_decompose(jsa_to_jta(jsa), truncation)
    return d.idler.resampled(tg)

"""Time-resolved coincidence probabilities, fringes, jitter and visibilities.

The N-photon detection density for arrival times ``t`` is ``|Perm(L)|^2`` with
``L[i, j] = T[i, j] * zeta_j(t_i)`` (row = output/detection, column = input
photon). Mixed photons enter as an incoherent sum over Schmidt-mode
combinations weighted by the product of their weights.

For two photons the density integrated over the absolute time ``t0`` splits
into three correlation functions of the relative delay ``tau = t2 - t1``::

    h(tau) = |A|^2 D12(tau) + |B|^2 D21(tau) + 2 Re[A B* X(tau)]

with ``A = T00 T11``, ``B = T01 T10``. :class:`PairCorrelations` holds
``D12, D21, X``; every two-photon fringe in the package is built from it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import fftconvolve
from sklearn.base import BaseEstimator

from ._validation import DimensionError, ResolutionError, check_probability, check_square
from .circuits import beam_splitter
from .grids import TimeGrid, lorentzian_photon
from .jsa import MixedPhoton, as_mixed
from .permanent import permanent_batch

FWHM_PER_SIGMA = 2 * np.sqrt(2 * np.log(2))


# --------------------------------------------------------------------------
# jitter


def combined_jitter_fwhm(detector_fwhms, tagger_fwhms=()):
    """Quadrature sum of Gaussian FWHMs (variances add under convolution)."""
    d = np.asarray(detector_fwhms, dtype=float)
    t = np.asarray(tagger_fwhms, dtype=float)
    if np.any(d < 0) or np.any(t < 0):
        raise ValueError("jitter FWHMs must be >= 0")
    return float(np.sqrt(np.sum(d**2) + np.sum(t**2)))


@dataclass(frozen=True)
class JitterModel:
    """Gaussian timing response per detection channel.

    Each FWHM is either one number for all channels or a ``{channel: fwhm}``
    mapping (missing channels count as 0).
    """

    detector_fwhm_ps: float | dict = 0.0
    tagger_fwhm_ps: float | dict = 0.0

    def __post_init__(self):
        for v in (self.detector_fwhm_ps, self.tagger_fwhm_ps):
            vals = v.values() if isinstance(v, dict) else [v]
            if any(float(x) < 0 for x in vals):
                raise ValueError("jitter FWHMs must be >= 0")

    @staticmethod
    def _lookup(v, ch):
        if isinstance(v, dict):
            return float(v.get(ch, 0.0))
        return float(v)

    def channel_fwhm(self, channel):
        return combined_jitter_fwhm(
            [self._lookup(self.detector_fwhm_ps, channel)],
            [self._lookup(self.tagger_fwhm_ps, channel)],
        )

    def combined_fwhm(self, channels):
        return float(np.sqrt(sum(self.channel_fwhm(c) ** 2 for c in channels)))

    @classmethod
    def total(cls, fwhm_ps, n_channels=2):
        """Split a total relative-delay FWHM evenly over ``n_channels`` detectors."""
        return cls(fwhm_ps / np.sqrt(n_channels), 0.0)


# --------------------------------------------------------------------------
# histograms and fringes


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    """Density over relative delay on uniform bins centred at ``tau``."""

    tau: np.ndarray
    density: np.ndarray
    bin_width: float

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin width must be > 0")
        tau = np.asarray(self.tau, dtype=float)
        dens = np.asarray(self.density)
        if tau.shape != dens.shape:
            raise DimensionError("tau and density differ in shape")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "density", dens)

    @property
    def total(self):
        return float(np.sum(self.density.real) * self.bin_width)

    def value_at(self, tau):
        return float(np.interp(tau, self.tau, self.density.real))

    def to_csv(self, path, header=None, column="density"):
        with open(path, "w") as fh:
            if header:
                fh.write(header.rstrip("\n") + "\n")
            fh.write(f"tau_ps,{column}\n")
            for t, d in zip(self.tau, self.density.real):
                fh.write(f"{t:.6g},{d:.10g}\n")


@dataclass(frozen=True, eq=False)
class FringeScan:
    """Histograms recorded along a swept phase.

    ``harmonic`` is the number of fringe periods per 2 pi of phase (2 for an
    MZI swept in its internal phase).
    """

    phases: np.ndarray
    histograms: tuple = field(repr=False)
    harmonic: int = 1

    def __post_init__(self):
        ph = np.asarray(self.phases, dtype=float)
        if ph.ndim != 1 or np.any(np.diff(ph) <= 0):
            raise ValueError("phases must be strictly increasing")
        if len(self.histograms) != len(ph):
            raise DimensionError("one histogram per phase is required")
        object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "histograms", tuple(self.histograms))

    def counts(self, window_ps):
        return np.array([windowed_counts(h, window_ps) for h in self.histograms])

    def to_csv(self, path, windows, header=None):
        with open(path, "w") as fh:
            if header:
                fh.write(header.rstrip("\n") + "\n")
            fh.write("theta_rad,counts,window_ps\n")
            for w in windows:
                for ph, c in zip(self.phases, self.counts(w)):
                    fh.write(f"{ph:.10g},{c:.10g},{w:g}\n")


# --------------------------------------------------------------------------
# pointwise probabilities


def _profile_values(photon: MixedPhoton, t):
    """Mode amplitudes at times ``t``: shape ``(K,) + t.shape``."""
    return np.array([p(t) for p in photon.profiles])


def coincidence_probability_pure(sub, profiles, times):
    """``|Perm(L)|^2`` with ``L[i, j] = sub[i, j] * zeta_j(t_i)``.

    ``times`` has one entry per detected photon; each entry may be an array
    (all broadcast together) to evaluate many time tuples at once.
    """
    sub = check_square(sub, "submatrix")
    n = sub.shape[0]
    if len(profiles) != n or len(times) != n:
        raise DimensionError(f"need {n} profiles and {n} times")
    t = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in times])
    lam = np.empty(t[0].shape + (n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            lam[..., i, j] = sub[i, j] * profiles[j](t[i])
    out = np.abs(permanent_batch(lam)) ** 2
    return out if out.ndim else float(out)


def coincidence_probability_mixed(sub, photons, times):
    """Incoherent sum over Schmidt-mode combinations of pure probabilities."""
    sub = check_square(sub, "submatrix")
    n = sub.shape[0]
    photons = [as_mixed(p) for p in photons]
    if len(photons) != n or len(times) != n:
        raise DimensionError(f"need {n} photons and {n} times")
    t = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in times])
    # vals[j][k][i] = zeta_{j,k}(t_i)
    vals = [[[p(t[i]) for i in range(n)] for p in ph.profiles] for ph in photons]
    total = np.zeros(t[0].shape)
    for ks in itertools.product(*[range(len(ph.weights)) for ph in photons]):
        w = np.prod([photons[j].weights[k] for j, k in enumerate(ks)])
        lam = np.empty(t[0].shape + (n, n), dtype=complex)
        for j, k in enumerate(ks):
            for i in range(n):
                lam[..., i, j] = sub[i, j] * vals[j][k][i]
        total = total + w * np.abs(permanent_batch(lam)) ** 2
    return total if total.ndim else float(total)


def distinguishable_probability(sub, photons, times):
    """``Perm(|L|^2)`` with mode intensities summed: no cross terms."""
    sub = check_square(sub, "submatrix")
    n = sub.shape[0]
    photons = [as_mixed(p) for p in photons]
    t = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in times])
    lam = np.empty(t[0].shape + (n, n))
    for j, ph in enumerate(photons):
        for i in range(n):
            inten = ph.weights @ (np.abs(_profile_values(ph, t[i])) ** 2)
            lam[..., i, j] = np.abs(sub[i, j]) ** 2 * inten
    out = permanent_batch(lam).real
    return out if out.ndim else float(out)


def hadamard_pair_probability(phi, z1, z2, t0, tau):
    """Closed form for two photons on the F4 pattern in (0, 1) -> out (0, 1)."""
    a = z1(np.asarray(t0) + tau) * z2(t0) + np.exp(1j * phi) * z1(t0) * z2(np.asarray(t0) + tau)
    out = np.abs(a) ** 2 / 16
    return out if np.ndim(out) else float(out)


def relative_time_fringe(prob_fn, t0_grid: TimeGrid, tau_grid: TimeGrid):
    """Integrate ``prob_fn(t0, tau)`` over ``t0`` (trapezoid) for each ``tau``.

    ``prob_fn`` must broadcast over ``t0[:, None]`` and ``tau[None, :]``.
    """
    t0 = t0_grid.times
    tau = tau_grid.times
    if t0_grid.dt > tau_grid.dt * 4:
        raise ResolutionError("t0 grid much coarser than the delay bins")
    vals = np.asarray(prob_fn(t0[:, None], tau[None, :]))
    dens = trapezoid(vals, t0, axis=0)
    return CoincidenceHistogram(tau, np.real(dens), tau_grid.dt)


# --------------------------------------------------------------------------
# fast two-photon path


def _corr(a, b, nfft):
    """``c[lag] = sum_n a[n + lag] * conj(b[n])`` for all lags, batched."""
    fa = np.fft.fft(a, nfft, axis=-1)
    fb = np.fft.fft(b, nfft, axis=-1)
    return np.fft.ifft(fa * fb.conj(), axis=-1)


@dataclass(frozen=True, eq=False)
class PairCorrelations:
    """``D12, D21, X`` on a common delay axis (see module docstring)."""

    tau: np.ndarray
    d12: np.ndarray
    d21: np.ndarray
    x: np.ndarray
    bin_width: float

    @classmethod
    def from_photons(cls, photon1, photon2, tau_max=1500.0):
        p1, p2 = as_mixed(photon1), as_mixed(photon2)
        grid = p1.grid
        if p2.grid != grid:
            raise DimensionError("both photons must live on the same time grid")
        n, dt = grid.n_points, grid.dt
        nfft = 1 << int(np.ceil(np.log2(2 * n)))
        m = min(int(round(tau_max / dt)), n - 1)
        lags = np.arange(-m, m + 1)

        i1 = p1.intensity
        i2 = p2.intensity
        d12_full = _corr(i2, i1, nfft).real * dt
        z1 = p1.mode_matrix
        z2 = p2.mode_matrix
        g = z1[:, None, :] * z2[None, :, :].conj()
        w = np.outer(p1.weights, p2.weights)
        auto = _corr(g, g, nfft)  # sum_n g[n + lag] conj(g[n])
        x_full = np.tensordot(w, auto.conj(), axes=([0, 1], [0, 1])) * dt

        def take(arr):
            return arr[lags % nfft]

        d12 = take(d12_full)
        return cls(lags * dt, d12, d12[::-1].copy(), take(x_full), dt)

    def jittered(self, fwhm_ps):
        if fwhm_ps == 0:
            return self
        tau, kernel = _gaussian_kernel(fwhm_ps, self.bin_width, self.tau)
        conv = lambda a: fftconvolve(a, kernel, mode="full")  # noqa: E731
        x = conv(self.x.real) + 1j * conv(self.x.imag)
        return PairCorrelations(tau, conv(self.d12), conv(self.d21), x, self.bin_width)

    def histogram(self, sub, distinguishable=False):
        sub = check_square(sub, "submatrix")
        if sub.shape != (2, 2):
            raise DimensionError("pair correlations need a 2x2 submatrix")
        a = sub[0, 0] * sub[1, 1]
        b = sub[0, 1] * sub[1, 0]
        dens = abs(a) ** 2 * self.d12 + abs(b) ** 2 * self.d21
        if not distinguishable:
            dens = dens + 2 * np.real(a * np.conj(b) * self.x)
        return CoincidenceHistogram(self.tau, dens, self.bin_width)

    def windowed(self, window_ps):
        """Windowed ``(D12, D21, X)`` as numbers."""
        vals = []
        for arr in (self.d12, self.d21, self.x):
            re = windowed_counts(CoincidenceHistogram(self.tau, arr.real, self.bin_width), window_ps)
            im = windowed_counts(CoincidenceHistogram(self.tau, arr.imag, self.bin_width), window_ps)
            vals.append(re + 1j * im)
        return vals[0].real, vals[1].real, vals[2]


def _gaussian_kernel(fwhm_ps, bin_width, tau):
    if bin_width > fwhm_ps / 4:
        raise ResolutionError(
            f"bin width {bin_width} ps is coarser than a quarter of the jitter FWHM {fwhm_ps} ps"
        )
    sigma = fwhm_ps / FWHM_PER_SIGMA
    half = int(np.ceil(6 * sigma / bin_width))
    k = np.arange(-half, half + 1) * bin_width
    kernel = np.exp(-(k**2) / (2 * sigma**2))
    kernel /= kernel.sum()
    new_tau = tau[0] - half * bin_width + bin_width * np.arange(len(tau) + 2 * half)
    return new_tau, kernel


def apply_jitter(h: CoincidenceHistogram, jitter: JitterModel, channels):
    """Convolve with a Gaussian whose variance sums the involved channels.

    The output axis is padded by 6 sigma on each side so the total integral is
    conserved exactly.
    """
    fwhm = jitter.combined_fwhm(channels)
    return smear(h, fwhm)


def smear(h: CoincidenceHistogram, fwhm_ps):
    if fwhm_ps == 0:
        return CoincidenceHistogram(h.tau.copy(), h.density.copy(), h.bin_width)
    tau, kernel = _gaussian_kernel(fwhm_ps, h.bin_width, h.tau)
    d = h.density
    if np.iscomplexobj(d):
        out = fftconvolve(d.real, kernel, "full") + 1j * fftconvolve(d.imag, kernel, "full")
    else:
        out = fftconvolve(d, kernel, "full")
    return CoincidenceHistogram(tau, out, h.bin_width)


def windowed_counts(h: CoincidenceHistogram, window_ps):
    """Integral of the piecewise-constant density over ``|tau| <= window/2``."""
    if window_ps < h.bin_width * (1 - 1e-9):
        raise ValueError("window narrower than one bin")
    if np.isinf(window_ps):
        return float(np.sum(h.density.real) * h.bin_width)
    half = window_ps / 2
    lo = np.maximum(h.tau - h.bin_width / 2, -half)
    hi = np.minimum(h.tau + h.bin_width / 2, half)
    overlap = np.clip(hi - lo, 0, None)
    return float(np.sum(h.density.real * overlap))


# --------------------------------------------------------------------------
# fringe fitting


class DegenerateFitError(ValueError):
    """The fitted fringe amplitude is not distinguishable from zero."""


class FringeFitter(BaseEstimator):
    """Least-squares fit of ``C = a + b cos(k*theta - theta0)``.

    ``visibility_ = |b| / a`` with standard errors propagated from the fit
    covariance (Poisson-weighted if ``sigma`` is passed to ``fit``).
    """

    def __init__(self, harmonic=1, strict=True):
        self.harmonic = harmonic
        self.strict = strict

    def _design(self, theta):
        k = self.harmonic
        theta = np.asarray(theta, dtype=float)
        return np.column_stack([np.ones_like(theta), np.cos(k * theta), np.sin(k * theta)])

    def fit(self, theta, counts, sigma=None):
        theta = np.asarray(theta, dtype=float)
        y = np.asarray(counts, dtype=float)
        if len(theta) < 8:
            raise ValueError("need at least 8 phase samples")
        if np.ptp(theta) * self.harmonic < 2 * np.pi * (1 - 1 / len(theta)) - 1e-9:
            raise ValueError("phase samples must span at least one fringe period")
        X = self._design(theta)
        if sigma is not None:
            wts = 1 / np.asarray(sigma, dtype=float)
            Xw, yw = X * wts[:, None], y * wts
        else:
            Xw, yw = X, y
        coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
        resid = yw - Xw @ coef
        dof = max(len(y) - 3, 1)
        s2 = 1.0 if sigma is not None else float(resid @ resid) / dof
        cov = s2 * np.linalg.pinv(Xw.T @ Xw)

        a, c, s = coef
        b = float(np.hypot(c, s))
        jac_b = np.array([0.0, c / b, s / b]) if b > 0 else np.zeros(3)
        var_b = float(jac_b @ cov @ jac_b)
        b_err = np.sqrt(max(var_b, 0.0))
        if self.strict and b_err > b:
            raise DegenerateFitError(f"fringe amplitude {b:.3g} below its error {b_err:.3g}")
        v = b / a
        jac_v = np.array([-b / a**2, 0, 0]) + jac_b / a
        self.a_ = float(a)
        self.b_ = b
        self.theta0_ = float(np.arctan2(s, c)) if b > 0 else 0.0
        self.coef_ = coef
        self.covariance_ = cov
        self.b_err_ = b_err
        self.a_err_ = float(np.sqrt(max(cov[0, 0], 0.0)))
        self.visibility_ = float(v)
        self.visibility_err_ = float(np.sqrt(max(jac_v @ cov @ jac_v, 0.0)))
        return self

    def predict(self, theta):
        return self._design(theta) @ self.coef_


def fringe_visibility(scan: FringeScan, window_ps, sigma=None, strict=True):
    """Fitted visibility and its standard error for one timing window."""
    fit = FringeFitter(scan.harmonic, strict).fit(scan.phases, scan.counts(window_ps), sigma)
    return fit.visibility_, fit.visibility_err_


def fusion_fidelity(v):
    """Fusion gate fidelity ``(1 + g)/2`` with ``g = 2V/(1 + V)``."""
    v = check_probability(v, "visibility")
    gamma = 2 * v / (1 + v)
    return (1 + gamma) / 2


# --------------------------------------------------------------------------
# convenience drivers


def pair_fringe(circuit_fn, phases, photon1, photon2, inputs=(0, 1), outputs=(0, 1),
                jitter_fwhm_ps=0.0, tau_max=1500.0, harmonic=1, distinguishable=False):
    """Two-photon fringe: one histogram per phase of ``circuit_fn(phase)``."""
    from .circuits import submatrix

    corr = PairCorrelations.from_photons(photon1, photon2, tau_max).jittered(jitter_fwhm_ps)
    hists = [
        corr.histogram(submatrix(circuit_fn(ph), inputs, outputs), distinguishable)
        for ph in phases
    ]
    return FringeScan(np.asarray(phases, dtype=float), tuple(hists), harmonic)


def projection_visibility(detuning_ghz, linewidth_ghz, jitter: JitterModel, channels=(0, 1),
                          time_grid=None, tau_max=200.0):
    """HOM visibility ``1 - h(0)/h_dist(0)`` of two pure ring photons.

    The photons sit at ``-detuning/2`` and ``+detuning/2``; ``h`` is the
    jitter-convolved delay histogram behind a balanced splitter and ``h_dist``
    the same with the interference term removed.
    """
    if linewidth_ghz <= 0:
        raise ValueError("linewidth must be > 0")
    tg = time_grid or TimeGrid()
    z1 = lorentzian_photon(-detuning_ghz / 2, linewidth_ghz, tg)
    z2 = lorentzian_photon(+detuning_ghz / 2, linewidth_ghz, tg)
    fwhm = jitter.combined_fwhm(channels)
    corr = PairCorrelations.from_photons(z1, z2, tau_max + 8 * fwhm).jittered(fwhm)
    sub = beam_splitter().matrix
    h = corr.histogram(sub)
    hd = corr.histogram(sub, distinguishable=True)
    return 1 - h.value_at(0.0) / hd.value_at(0.0)

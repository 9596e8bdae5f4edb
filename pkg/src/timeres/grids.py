"""Time/frequency grids, photon line shapes and unit conversions.

Units used throughout the package: time in ps, angular frequency in rad/ps
(stored as a detuning from a carrier), linewidths and detunings quoted in GHz
at the API surface.

Fourier convention (fixed project-wide)::

    zeta(t) = 1/sqrt(2 pi) * integral l(w) exp(-i w t) dw

With this sign the ring line shape ``1/(-i(w - w0) + dw/2)`` maps to a
one-sided decay ``exp(-i w0 t - dw t / 2)`` for ``t >= 0``.

Amplitudes are stored as densities: ``sum |zeta|^2 dt == 1`` and
``sum |l|^2 dw == 1``, so coincidence probabilities come out per ps^N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import ResolutionError, check_positive

SPEED_OF_LIGHT = 299_792_458.0  # m/s

DEFAULT_DT_PS = 0.5
DEFAULT_N_POINTS = 8192


def ghz_to_rad_per_ps(f_ghz):
    """Ordinary frequency in GHz to angular frequency in rad/ps."""
    return 2 * np.pi * 1e-3 * np.asarray(f_ghz, dtype=float)


def rad_per_ps_to_ghz(w):
    return np.asarray(w, dtype=float) / (2 * np.pi * 1e-3)


def detuning_pm_to_ghz(delta_lambda_pm, center_lambda_nm):
    """Convert a wavelength offset to a frequency offset, ``c * dl / l**2``.

    The carrier wavelength is a parameter because the conversion depends on it
    (1541 nm pump vs 1546 nm idler differ by ~0.7%).
    """
    if center_lambda_nm <= 0:
        raise ValueError("center wavelength must be positive")
    lam = center_lambda_nm * 1e-9
    return SPEED_OF_LIGHT * (delta_lambda_pm * 1e-12) / lam**2 * 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = t_start + k * dt`` for ``k < n_points``."""

    t_start: float = -DEFAULT_N_POINTS * DEFAULT_DT_PS / 4
    dt: float = DEFAULT_DT_PS
    n_points: int = DEFAULT_N_POINTS

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")

    @property
    def times(self):
        return self.t_start + self.dt * np.arange(self.n_points)

    @property
    def span(self):
        return self.dt * self.n_points

    def frequency_grid(self, carrier=0.0):
        return FrequencyGrid(self, carrier)


@dataclass(frozen=True)
class FrequencyGrid:
    """Fourier dual of a :class:`TimeGrid`.

    ``omegas`` are angular detunings from ``carrier`` (rad/ps), ordered
    ``(k - n/2) * d_omega`` with the zero detuning at index ``n // 2``.
    """

    time_grid: TimeGrid
    carrier: float = 0.0

    @property
    def n_points(self):
        return self.time_grid.n_points

    @property
    def d_omega(self):
        return 2 * np.pi / (self.time_grid.n_points * self.time_grid.dt)

    @property
    def omegas(self):
        n = self.n_points
        return (np.arange(n) - n // 2) * self.d_omega

    @property
    def span(self):
        return self.n_points * self.d_omega


def _l2(amplitudes, step):
    return float(np.sqrt(np.sum(np.abs(amplitudes) ** 2) * step))


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    grid: FrequencyGrid
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.grid.n_points,):
            raise ValueError("amplitude array does not match the grid")
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self):
        return _l2(self.amplitudes, self.grid.d_omega)

    def normalized(self):
        return SpectralProfile(self.grid, self.amplitudes / self.norm)

    @property
    def intensity(self):
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class TemporalProfile:
    grid: TimeGrid
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.grid.n_points,):
            raise ValueError("amplitude array does not match the grid")
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self):
        return _l2(self.amplitudes, self.grid.dt)

    def normalized(self):
        return TemporalProfile(self.grid, self.amplitudes / self.norm)

    @property
    def intensity(self):
        return np.abs(self.amplitudes) ** 2

    def __call__(self, t):
        """Amplitude at arbitrary times (linear interpolation, zero outside)."""
        t = np.asarray(t, dtype=float)
        ts = self.grid.times
        re = np.interp(t, ts, self.amplitudes.real, left=0.0, right=0.0)
        im = np.interp(t, ts, self.amplitudes.imag, left=0.0, right=0.0)
        return re + 1j * im

    def delayed(self, delay_ps):
        """Same wave-packet shifted later by ``delay_ps`` (band-limited shift)."""
        spec = temporal_to_spectral(self)
        shifted = spec.amplitudes * np.exp(1j * spec.grid.omegas * delay_ps)
        return spectral_to_temporal(SpectralProfile(spec.grid, shifted))

    def shifted_frequency(self, delta_omega):
        """Multiply by ``exp(-i delta_omega t)``: moves the carrier by ``delta_omega``."""
        return TemporalProfile(
            self.grid, self.amplitudes * np.exp(-1j * delta_omega * self.grid.times)
        )


@dataclass(frozen=True)
class PumpSpec:
    center_nm: float = 1541.3
    fwhm_pm: float = 100.0
    rep_period_ns: float = 20.0

    def __post_init__(self):
        if not self.fwhm_pm > 0:
            raise ValueError("pump FWHM must be > 0")
        if not self.rep_period_ns > 0:
            raise ValueError("repetition period must be > 0")
        if not self.center_nm > 0:
            raise ValueError("pump wavelength must be > 0")

    @property
    def fwhm_rad_per_ps(self):
        return float(ghz_to_rad_per_ps(detuning_pm_to_ghz(self.fwhm_pm, self.center_nm)))

    @property
    def rep_period_ps(self):
        return self.rep_period_ns * 1e3


def lorentzian_amplitude(omega, center, fwhm):
    """Ring response ``sqrt(fwhm/2pi) / (-i(omega - center) + fwhm/2)``.

    ``|l|^2`` is a unit-area Lorentzian of full width ``fwhm`` (rad/ps).
    """
    omega = np.asarray(omega, dtype=float)
    return np.sqrt(fwhm / (2 * np.pi)) / (-1j * (omega - center) + fwhm / 2)


def _check_resolved(fwhm, grid, what):
    if fwhm / grid.d_omega < 4:
        raise ResolutionError(
            f"{what} FWHM {fwhm:.4g} rad/ps spans {fwhm / grid.d_omega:.2f} bins (< 4)"
        )


def lorentzian_lineshape(center, fwhm, grid):
    """Grid-normalized ring line shape centred at ``center`` (rad/ps detuning)."""
    fwhm = check_positive(fwhm, "fwhm")
    if abs(center) > grid.span / 2:
        raise ValueError(f"center {center} rad/ps lies outside the grid span")
    _check_resolved(fwhm, grid, "Lorentzian")
    if grid.time_grid.span < 10 / fwhm:
        raise ResolutionError("time grid shorter than 10 decay times of the line")
    return SpectralProfile(grid, lorentzian_amplitude(grid.omegas, center, fwhm)).normalized()


def gaussian_lineshape(center, fwhm, grid):
    """Gaussian amplitude whose intensity ``|a|^2`` has full width ``fwhm``."""
    fwhm = check_positive(fwhm, "fwhm")
    _check_resolved(fwhm, grid, "Gaussian")
    sigma = fwhm / (2 * np.sqrt(2 * np.log(2)))
    amp = np.exp(-((grid.omegas - center) ** 2) / (4 * sigma**2))
    return SpectralProfile(grid, amp).normalized()


def gaussian_pump(spec: PumpSpec, grid: FrequencyGrid, center=0.0):
    """Pump spectral envelope; ``center`` is its detuning on ``grid``."""
    return gaussian_lineshape(center, spec.fwhm_rad_per_ps, grid)


def fourier_forward(amplitudes, grid: FrequencyGrid, axis=-1):
    """Spectral densities to temporal densities along ``axis``.

    ``zeta_m = dw/sqrt(2pi) * sum_k l_k exp(-i w_k t_m)``, evaluated with one FFT.
    """
    a = np.moveaxis(np.asarray(amplitudes, dtype=complex), axis, -1)
    tg = grid.time_grid
    n = grid.n_points
    m = np.arange(n)
    pre = a * np.exp(-1j * grid.omegas * tg.t_start)
    # exp(-i w_k m dt) = exp(-2 pi i k m / n) * exp(2 pi i m (n//2) / n)
    out = np.fft.fft(pre, axis=-1) * np.exp(2j * np.pi * m * (n // 2) / n)
    out *= grid.d_omega / np.sqrt(2 * np.pi)
    return np.moveaxis(out, -1, axis)


def fourier_inverse(amplitudes, grid: FrequencyGrid, axis=-1):
    """Inverse of :func:`fourier_forward`."""
    a = np.moveaxis(np.asarray(amplitudes, dtype=complex), axis, -1)
    tg = grid.time_grid
    n = grid.n_points
    m = np.arange(n)
    tmp = a * np.exp(-2j * np.pi * m * (n // 2) / n)
    out = np.fft.ifft(tmp, axis=-1) * n * np.exp(1j * grid.omegas * tg.t_start)
    out *= tg.dt / np.sqrt(2 * np.pi)
    return np.moveaxis(out, -1, axis)


def spectral_to_temporal(s: SpectralProfile) -> TemporalProfile:
    return TemporalProfile(s.grid.time_grid, fourier_forward(s.amplitudes, s.grid))


def temporal_to_spectral(z: TemporalProfile, carrier=0.0) -> SpectralProfile:
    g = FrequencyGrid(z.grid, carrier)
    return SpectralProfile(g, fourier_inverse(z.amplitudes, g))


def lorentzian_photon(detuning_ghz, linewidth_ghz, time_grid=None):
    """Pure single photon emitted by a ring of the given linewidth."""
    tg = time_grid or TimeGrid()
    fg = tg.frequency_grid()
    spec = lorentzian_lineshape(
        float(ghz_to_rad_per_ps(detuning_ghz)), float(ghz_to_rad_per_ps(linewidth_ghz)), fg
    )
    return spectral_to_temporal(spec).normalized()


def resample(profile: TemporalProfile, grid: TimeGrid) -> TemporalProfile:
    """Band-limited (trigonometric) interpolation onto another time grid.

    The target grid must fit inside one period of the source grid.
    """
    if grid.span > profile.grid.span * (1 + 1e-12):
        raise ResolutionError("target grid is longer than the source period")
    spec = temporal_to_spectral(profile)
    w = spec.grid.omegas
    t = grid.times
    chunk = 2048
    out = np.empty(t.size, dtype=complex)
    for i in range(0, t.size, chunk):
        ph = np.exp(-1j * np.outer(t[i : i + chunk], w))
        out[i : i + chunk] = ph @ spec.amplitudes
    out *= spec.grid.d_omega / np.sqrt(2 * np.pi)
    return TemporalProfile(grid, out).normalized()


def measured_fwhm(x, y):
    """FWHM of a sampled single-peaked curve with linear edge interpolation."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    half = y.max() / 2
    above = np.nonzero(y >= half)[0]
    lo, hi = above[0], above[-1]

    def cross(i0, i1):
        if i0 < 0 or i1 >= y.size:
            return x[min(max(i0, 0), y.size - 1)]
        return x[i0] + (half - y[i0]) * (x[i1] - x[i0]) / (y[i1] - y[i0])

    return float(cross(hi, hi + 1) - cross(lo - 1, lo))

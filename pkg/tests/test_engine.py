import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timeres._validation import DimensionError, ResolutionError
from timeres.circuits import beam_splitter, f4, mzi, submatrix
from timeres.engine import (
    CoincidenceHistogram,
    DegenerateFitError,
    FringeFitter,
    FringeScan,
    JitterModel,
    PairCorrelations,
    apply_jitter,
    coincidence_probability_mixed,
    coincidence_probability_pure,
    combined_jitter_fwhm,
    distinguishable_probability,
    fringe_visibility,
    fusion_fidelity,
    hadamard_pair_probability,
    pair_fringe,
    projection_visibility,
    relative_time_fringe,
    smear,
    windowed_counts,
)
from timeres.grids import TemporalProfile, TimeGrid, lorentzian_photon, measured_fwhm
from timeres.jsa import MixedPhoton

COARSE = TimeGrid(-16.0, 2.0, 24)


def random_unitary(r, n):
    q, rr = np.linalg.qr(r.normal(size=(n, n)) + 1j * r.normal(size=(n, n)))
    return q * (np.diag(rr) / np.abs(np.diag(rr)))


def random_mixed(r, grid, k):
    modes = random_unitary(r, grid.n_points)[:k] / np.sqrt(grid.dt)
    w = r.random(k) + 0.1
    return MixedPhoton(w, tuple(TemporalProfile(grid, m) for m in modes))


def density_matrix_oracle(t, photons):
    """Evolve R1 (x) R2 under (T (x) 1_time)^{(x)2} and read the coincidence density."""
    n, dt = COARSE.n_points, COARSE.dt
    u = np.kron(t, np.eye(n))
    evolved = []
    for j, p in enumerate(photons):
        rho_t = np.einsum("k,ki,kj->ij", p.weights, p.mode_matrix, p.mode_matrix.conj()) * dt
        r = np.zeros((2 * n, 2 * n), complex)
        r[j * n:(j + 1) * n, j * n:(j + 1) * n] = rho_t
        evolved.append(u @ r @ u.conj().T)
    r1, r2 = evolved
    out = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            x, y = a, n + b  # photon at output 0 time a, output 1 time b
            val = (r1[x, x] * r2[y, y] + r1[y, y] * r2[x, x]
                   + r1[x, y] * r2[y, x] + r1[y, x] * r2[x, y])
            out[a, b] = val.real / dt**2
    return out


def test_single_photon_is_its_intensity(lorentz_pair, grid):
    z = lorentz_pair[0]
    t = np.linspace(-50, 400, 31)
    assert np.allclose(coincidence_probability_pure(np.array([[1.0]]), [z], [t]), np.abs(z(t)) ** 2)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mixed_matches_density_matrix_evolution(seed):
    r = np.random.default_rng(seed)
    t = random_unitary(r, 2)
    photons = [random_mixed(r, COARSE, 3), random_mixed(r, COARSE, 2)]
    ts = COARSE.times
    ours = coincidence_probability_mixed(t, photons, [ts[:, None], ts[None, :]])
    assert np.allclose(ours, density_matrix_oracle(t, photons), rtol=1e-10, atol=1e-14)


def test_mixed_reduces_to_pure(lorentz_pair):
    sub = submatrix(f4(0.3), (0, 1), (1, 2))
    t1, t2 = np.meshgrid(np.linspace(0, 300, 17), np.linspace(-20, 250, 13))
    pure = coincidence_probability_pure(sub, lorentz_pair, [t1, t2])
    mixed = coincidence_probability_mixed(sub, [MixedPhoton.pure(z) for z in lorentz_pair], [t1, t2])
    assert np.allclose(mixed, pure, rtol=1e-12, atol=0)


def test_hom_suppression_at_equal_times(lorentz_pair, ring_pair):
    bs = beam_splitter().matrix
    t = np.linspace(0, 300, 11)
    z = lorentz_pair[0]
    assert np.max(coincidence_probability_pure(bs, [z, z], [t, t])) < 1e-12
    p = ring_pair[0]
    assert np.max(coincidence_probability_mixed(bs, [p, p], [t, t])) < 1e-12


def test_hadamard_closed_form_special_cases(lorentz_pair):
    z = lorentz_pair[0]
    t0 = np.linspace(0, 200, 9)
    assert np.max(hadamard_pair_probability(np.pi, z, z, t0, 0.0)) < 1e-15
    assert np.allclose(hadamard_pair_probability(0.0, z, z, t0, 0.0), np.abs(z(t0)) ** 4 / 4)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(-100, 300), st.floats(-300, 300))
def test_permanent_form_equals_closed_form(lorentz_pair, phi, t0, tau):
    z1, z2 = lorentz_pair
    sub = submatrix(f4(phi), (0, 1), (0, 1))
    # tau is the output-1 time minus the output-0 time
    a = coincidence_probability_pure(sub, (z1, z2), (t0, t0 + tau))
    b = hadamard_pair_probability(phi, z1, z2, t0, tau)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-300)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_swapping_detections_is_a_symmetry(seed):
    r = np.random.default_rng(seed)
    t = random_unitary(r, 3)
    photons = [random_mixed(r, COARSE, 2) for _ in range(3)]
    times = list(r.uniform(-15, 30, 3))
    perm = r.permutation(3)
    a = coincidence_probability_mixed(t, photons, times)
    b = coincidence_probability_mixed(t[perm], photons, [times[i] for i in perm])
    assert a >= 0
    assert a == pytest.approx(b, rel=1e-10, abs=1e-300)


def test_distinguishable_has_no_cross_terms(lorentz_pair):
    bs = beam_splitter().matrix
    z = lorentz_pair[0]
    t = np.linspace(0, 200, 5)
    d = distinguishable_probability(bs, [z, z], [t, t])
    assert np.allclose(d, 0.5 * np.abs(z(t)) ** 4)


def test_pair_correlations_match_direct_integration(lorentz_pair):
    z1, z2 = lorentz_pair
    sub = submatrix(f4(1.1), (0, 1), (0, 1))
    corr = PairCorrelations.from_photons(z1, z2, tau_max=200.0)
    h = corr.histogram(sub)
    t0 = TimeGrid(-200.0, 0.5, 2400)
    tau = TimeGrid(-200.0, 0.5, 801)
    ref = relative_time_fringe(
        lambda a, b: coincidence_probability_pure(sub, (z1, z2), (a, a + b)), t0, tau)
    assert np.allclose(h.tau, ref.tau)
    assert np.max(np.abs(h.density.real - ref.density)) < 1e-4 * np.max(ref.density)


def test_beat_period_and_first_zero(lorentz_pair):
    """Pure photons 6.8 GHz apart: fringes in tau beat at the detuning."""
    corr = PairCorrelations.from_photons(*lorentz_pair, tau_max=600.0)
    tau = corr.tau
    period = 1 / 6.8e-3
    dist = corr.histogram(beam_splitter().matrix, distinguishable=True).density.real

    # phi = 0: constructive at tau = 0, first zero where the beat phase is pi
    r0 = corr.histogram(submatrix(f4(0.0), (0, 1), (0, 1))).density.real / dist
    search = (tau > 20) & (tau < 120)
    assert tau[search][np.argmin(r0[search])] == pytest.approx(period / 2, abs=1.0)

    # phi = pi (balanced splitter): zeros at 0 and one full period
    r1 = corr.histogram(beam_splitter().matrix).density.real / dist
    search = (tau > 80) & (tau < 220)
    assert tau[search][np.argmin(r1[search])] == pytest.approx(period, abs=20.0)
    assert r1[tau == 0][0] < 1e-12


def test_delayed_photons_lose_interference(lorentz_pair):
    z1 = lorentz_pair[0]
    z2 = z1.delayed(800.0)
    corr = PairCorrelations.from_photons(z1, z2, tau_max=1500.0)
    sub = beam_splitter().matrix
    h, hd = corr.histogram(sub), corr.histogram(sub, distinguishable=True)
    assert np.max(np.abs(h.density - hd.density)) < 1e-6 * np.max(hd.density)


def test_jitter_combination():
    assert combined_jitter_fwhm([75.4, 75.4], [15.7, 15.7]) == pytest.approx(108.9, abs=0.1)
    j = JitterModel(75.4, 15.7)
    assert j.combined_fwhm((0, 1)) == pytest.approx(108.9, abs=0.1)
    jd = JitterModel({0: 75.4, 1: 30.0}, 0.0)
    assert jd.combined_fwhm((0, 1)) == pytest.approx(np.hypot(75.4, 30.0))
    assert JitterModel.total(22.2).combined_fwhm((0, 1)) == pytest.approx(22.2)
    with pytest.raises(ValueError):
        JitterModel(-1.0)
    with pytest.raises(ValueError):
        combined_jitter_fwhm([-1.0])


def test_smear_delta_gives_gaussian_and_conserves_total():
    tau = np.arange(-200, 201) * 1.0
    d = np.zeros_like(tau)
    d[200] = 1.0
    h = CoincidenceHistogram(tau, d, 1.0)
    s = smear(h, 40.0)
    assert s.total == pytest.approx(1.0, abs=1e-12)
    assert measured_fwhm(s.tau, s.density) == pytest.approx(40.0, abs=1.0)
    same = apply_jitter(h, JitterModel(0.0), (0, 1))
    assert np.array_equal(same.density, h.density)
    with pytest.raises(ResolutionError):
        smear(h, 3.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(4.0, 200.0))
def test_smear_conserves_integral(seed, fwhm):
    r = np.random.default_rng(seed)
    h = CoincidenceHistogram(np.arange(-50, 51) * 1.0, r.random(101), 1.0)
    assert smear(h, fwhm).total == pytest.approx(h.total, rel=1e-6)


def test_windowed_counts_edges():
    h = CoincidenceHistogram(np.arange(-10, 11) * 2.0, np.ones(21), 2.0)
    assert windowed_counts(h, np.inf) == pytest.approx(42.0)
    assert windowed_counts(h, 2.0) == pytest.approx(2.0)
    assert windowed_counts(h, 5.0) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        windowed_counts(h, 1.0)
    with pytest.raises(ValueError):
        CoincidenceHistogram(np.zeros(3), np.zeros(3), 0.0)
    with pytest.raises(DimensionError):
        CoincidenceHistogram(np.zeros(3), np.zeros(4), 1.0)


def test_fringe_fitter_synthetic():
    th = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    fit = FringeFitter().fit(th, 2 + np.cos(th - 0.3))
    assert fit.visibility_ == pytest.approx(0.5, abs=1e-12)
    assert fit.theta0_ == pytest.approx(0.3, abs=1e-12)
    assert np.allclose(fit.predict(th), 2 + np.cos(th - 0.3))
    assert fit.get_params() == {"harmonic": 1, "strict": True}
    fit2 = FringeFitter(harmonic=2).fit(th / 2, 2 + np.cos(th))
    assert fit2.visibility_ == pytest.approx(0.5, abs=1e-12)


def test_fringe_fitter_rejects_bad_input():
    th = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    noise = np.random.default_rng(3).normal(0, 1, 24)
    with pytest.raises(DegenerateFitError):
        FringeFitter().fit(th, 100 + noise + 1e-6 * np.cos(th))
    assert FringeFitter(strict=False).fit(th, 100 + noise).visibility_ < 0.05
    with pytest.raises(ValueError):
        FringeFitter().fit(th[:5], np.ones(5))
    with pytest.raises(ValueError):
        FringeFitter().fit(th[:12] / 4, np.ones(12))


def test_fusion_fidelity():
    assert fusion_fidelity(0.6) == pytest.approx(0.875, abs=1e-15)
    assert fusion_fidelity(0.0) == 0.5
    assert fusion_fidelity(1.0) == 1.0
    with pytest.raises(ValueError):
        fusion_fidelity(1.2)


def test_distinguishable_mzi_fringe_is_one_third(lorentz_pair):
    th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    scan = pair_fringe(mzi, th, *lorentz_pair, harmonic=2, distinguishable=True)
    v, _ = fringe_visibility(scan, np.inf)
    assert v == pytest.approx(1 / 3, abs=1e-9)


def test_indistinguishable_mzi_fringe_is_full(lorentz_pair):
    z = lorentz_pair[0]
    th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    scan = pair_fringe(mzi, th, z, z, harmonic=2)
    assert fringe_visibility(scan, np.inf)[0] == pytest.approx(1.0, abs=1e-6)


def test_visibility_grows_as_window_narrows(ring_pair):
    th = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    scan = pair_fringe(mzi, th, *ring_pair, jitter_fwhm_ps=108.9, harmonic=2)
    v = [fringe_visibility(scan, w)[0] for w in (400, 200, 100, 50, 20)]
    assert np.all(np.diff(v) >= -1e-9)
    assert v[-1] > 1 / 3 + 0.1


def test_fringe_scan_csv(tmp_path, lorentz_pair):
    th = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    scan = pair_fringe(mzi, th, *lorentz_pair, harmonic=2)
    scan.to_csv(tmp_path / "f.csv", [np.inf, 50.0], header="# x")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "# x" and lines[1] == "theta_rad,counts,window_ps"
    assert len(lines) == 2 + 16
    with pytest.raises(ValueError):
        FringeScan(th, scan.histograms[:3], 2)


def test_projection_limits():
    assert projection_visibility(0.0, 3.8, JitterModel(0.0)) == pytest.approx(1.0, abs=1e-9)
    far = projection_visibility(50.0, 3.8, JitterModel.total(108.9))
    near = projection_visibility(1.0, 3.8, JitterModel.total(108.9))
    assert 0 <= far < near <= 1
    with pytest.raises(ValueError):
        projection_visibility(1.0, 0.0, JitterModel(0.0))

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timeres.grids import PumpSpec, TimeGrid
from timeres.jsa import (
    JointAmplitude,
    MixedPhoton,
    SchmidtDecomposer,
    as_mixed,
    build_jsa,
    jsa_to_jta,
    reconstruct,
    ring_photon,
    schmidt_decompose,
)

JSA_GRID = TimeGrid(-1024.0, 8.0, 512)
PURITY_100PM = 0.89538  # locked against the double-resolution oracle below


def reduced_density_purity(j: JointAmplitude):
    """Tr(rho^2) of the idler from the explicit reduced density matrix."""
    a, step = j.amplitudes, j.step
    rho = a.T @ a.conj() * step
    return float(np.sum(np.abs(rho) ** 2) * step**2)


@pytest.fixture(scope="module")
def paper_jsa():
    return build_jsa(PumpSpec(1541.3, 100.0, 20.0), 3.8, 3.4, JSA_GRID.frequency_grid())


def test_jsa_is_normalized(paper_jsa):
    assert paper_jsa.norm == pytest.approx(1.0, abs=1e-9)
    assert paper_jsa.is_spectral


def test_separable_source_is_pure():
    j = build_jsa(PumpSpec(), 3.8, 0.0, JSA_GRID.frequency_grid(), separable=True)
    d = schmidt_decompose(j)
    assert d.purity == pytest.approx(1.0, abs=1e-9)
    assert d.weights[1] < 1e-12


def test_purity_locked_value_and_oracles(paper_jsa):
    d = schmidt_decompose(paper_jsa)
    assert d.purity == pytest.approx(reduced_density_purity(paper_jsa), abs=1e-12)
    dense = build_jsa(PumpSpec(), 3.8, 3.4, TimeGrid(-2048.0, 8.0, 1024).frequency_grid())
    assert reduced_density_purity(dense) == pytest.approx(d.purity, abs=1e-4)
    assert d.purity == pytest.approx(PURITY_100PM, abs=1e-4)


def test_purity_falls_with_narrower_pump():
    fg = JSA_GRID.frequency_grid()
    fwhms = np.linspace(20, 200, 10)
    p = [schmidt_decompose(build_jsa(PumpSpec(fwhm_pm=f), 3.8, 0.0, fg)).purity for f in fwhms]
    assert np.all(np.diff(p) > 0)
    assert 0 < p[0] < p[-1] <= 1


def test_jta_preserves_norm_and_schmidt_weights(paper_jsa):
    jta = jsa_to_jta(paper_jsa)
    assert not jta.is_spectral
    assert jta.norm == pytest.approx(1.0, abs=1e-9)
    w1 = schmidt_decompose(paper_jsa).weights
    w2 = schmidt_decompose(jta).weights
    assert np.max(np.abs(w1 - w2)) < 1e-6
    with pytest.raises(ValueError):
        jsa_to_jta(jta)


def test_reconstruction(paper_jsa):
    jta = jsa_to_jta(paper_jsa)
    d = schmidt_decompose(jta)
    err = np.linalg.norm(reconstruct(d) - jta.amplitudes) * jta.step
    assert err < 1e-6


def test_truncation_keeps_cumulative_weight(paper_jsa):
    full = schmidt_decompose(paper_jsa)
    cut = schmidt_decompose(paper_jsa, truncation=0.999)
    k = len(cut.weights)
    assert np.sum(full.weights[:k]) >= 0.999
    assert np.sum(full.weights[: k - 1]) < 0.999
    assert np.sum(cut.weights) == pytest.approx(1.0)


def test_trivial_schmidt_cases():
    g = TimeGrid(0.0, 1.0, 2)
    d = schmidt_decompose(JointAmplitude(g, np.eye(2) / np.sqrt(2)))
    assert np.allclose(d.weights, [0.5, 0.5])
    assert d.purity == pytest.approx(0.5)
    d1 = schmidt_decompose(JointAmplitude(g, np.outer([1, 2], [3, 1j])))
    assert d1.weights[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        schmidt_decompose(JointAmplitude(g, np.zeros((2, 2))))
    with pytest.raises(ValueError):
        JointAmplitude(g, np.zeros((3, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_purity_range_and_rank_one(n, seed):
    r = np.random.default_rng(seed)
    g = TimeGrid(0.0, 1.0, n)
    a = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    d = schmidt_decompose(JointAmplitude(g, a).normalized())
    assert 1 / n - 1e-12 <= d.purity <= 1 + 1e-12
    u = r.normal(size=n) + 1j * r.normal(size=n)
    d1 = schmidt_decompose(JointAmplitude(g, np.outer(u, u.conj())).normalized())
    assert d1.purity == pytest.approx(1.0, abs=1e-9)


def test_decomposer_estimator(paper_jsa):
    est = SchmidtDecomposer(truncation=None).fit(jsa_to_jta(paper_jsa))
    assert est.get_params() == {"truncation": None}
    assert est.purity_ == pytest.approx(PURITY_100PM, abs=1e-4)
    coef = est.transform(jsa_to_jta(paper_jsa))
    k = 5
    assert np.allclose(np.abs(np.diag(coef))[:k], np.sqrt(est.weights_[:k]), atol=1e-6)
    off = coef[:k, :k] - np.diag(np.diag(coef[:k, :k]))
    assert np.max(np.abs(off)) < 1e-6
    with pytest.raises(TypeError):
        SchmidtDecomposer().fit(np.eye(3))


def test_ring_photon(grid, ring_pair):
    pure = ring_photon(3.4, 3.8, None, grid)
    assert pure.purity == 1.0
    assert np.sum(pure.intensity) * grid.dt == pytest.approx(1.0, abs=1e-9)
    p = ring_pair[0]
    assert p.grid == grid
    assert 0.85 < p.purity < 0.95
    modes = p.mode_matrix
    gram = modes.conj() @ modes.T * grid.dt
    assert np.allclose(gram, np.eye(len(p.weights)), atol=2e-2)
    assert np.sum(p.intensity) * grid.dt == pytest.approx(1.0, abs=1e-2)


def test_mixed_photon_validation(lorentz_pair):
    z = lorentz_pair[0]
    with pytest.raises(ValueError):
        MixedPhoton(np.array([1.0, 1.0]), (z,))
    with pytest.raises(ValueError):
        MixedPhoton(np.array([-1.0]), (z,))
    m = MixedPhoton(np.array([2.0, 2.0]), (z, lorentz_pair[1]))
    assert np.allclose(m.weights, 0.5)
    assert as_mixed(z).purity == 1.0
    with pytest.raises(TypeError):
        as_mixed(3)

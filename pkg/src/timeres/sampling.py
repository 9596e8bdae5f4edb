"""Synthetic boson-sampling data with arrival times, and Bayesian validation.

Probabilities for a sample are always conditional on its input pattern and
normalized over collision-free output patterns, since the heralds fix the input
and validation post-selects on N detected photons.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.special import expit
from sklearn.base import BaseEstimator

from ._validation import check_pattern, check_probability, check_square
from .circuits import Interferometer, submatrix
from .engine import FWHM_PER_SIGMA, JitterModel
from .jsa import as_mixed
from .permanent import permanent, permanent_batch

DEFAULT_R = 0.64
DEFAULT_BIN_PS = 10.0
MAX_PHOTONS = 3
MAX_MODES = 8


@dataclass(frozen=True)
class Sample:
    input_pattern: tuple
    output_pattern: tuple
    arrival_times: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "input_pattern", tuple(int(i) for i in self.input_pattern))
        object.__setattr__(self, "output_pattern", tuple(int(i) for i in self.output_pattern))
        object.__setattr__(self, "arrival_times", tuple(float(t) for t in self.arrival_times))
        n = len(self.input_pattern)
        if len(self.output_pattern) != n or (self.arrival_times and len(self.arrival_times) != n):
            raise ValueError("input, output and times must have equal length")

    @property
    def relative_delay(self):
        """``t2 - t1`` for two-photon samples."""
        return self.arrival_times[1] - self.arrival_times[0]

    def to_line(self):
        fmt = lambda xs: ",".join(str(x) for x in xs)  # noqa: E731
        times = ",".join(f"{t:.3f}" for t in self.arrival_times)
        return f"{fmt(self.input_pattern)};{fmt(self.output_pattern)};{times}"

    @classmethod
    def from_line(cls, line):
        parts = line.strip().split(";")
        if len(parts) != 3:
            raise ValueError(f"expected 'in;out;times', got {line!r}")
        ints = lambda s: tuple(int(x) for x in s.split(",") if x)  # noqa: E731
        times = tuple(float(x) for x in parts[2].split(",") if x)
        return cls(ints(parts[0]), ints(parts[1]), times)


def save_samples(samples, path, header=None):
    with open(path, "w") as fh:
        if header:
            fh.write(header.rstrip("\n") + "\n")
        fh.write("input_pattern;output_pattern;arrival_times_ps\n")
        for s in samples:
            fh.write(s.to_line() + "\n")


def load_samples(path):
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#") or line.startswith("input_pattern"):
                continue
            try:
                out.append(Sample.from_line(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


@dataclass(frozen=True)
class ModelSpec:
    """``test``: r * interfering + (1 - r) * distinguishable. ``adversarial``: r ignored."""

    kind: str = "test"
    r: float = DEFAULT_R

    def __post_init__(self):
        if self.kind not in ("test", "adversarial"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        check_probability(self.r, "r")

    @property
    def interference_weight(self):
        return self.r if self.kind == "test" else 0.0


# --------------------------------------------------------------------------
# model probabilities


def test_probability(sub, r=DEFAULT_R):
    """``r |Perm(T_s)|^2 + (1 - r) Perm(|T_s|^2)``."""
    sub = check_square(sub, "submatrix")
    r = check_probability(r, "r")
    return float(r * abs(permanent(sub)) ** 2 + (1 - r) * permanent(np.abs(sub) ** 2).real)


def adversarial_probability(lam):
    """``Perm(|L|^2)``; accepts a stack of matrices."""
    lam = np.asarray(lam)
    out = permanent_batch(np.abs(lam) ** 2).real
    return out if out.ndim else float(out)


def test_probability_time_resolved(lam, r=DEFAULT_R):
    """``r |Perm(L)|^2 + (1 - r) Perm(|L|^2)``; accepts a stack of matrices."""
    r = check_probability(r, "r")
    lam = np.asarray(lam)
    out = r * np.abs(permanent_batch(lam)) ** 2 + (1 - r) * adversarial_probability(lam)
    return out if np.ndim(out) else float(out)


def scattershot_adversary_probability(sub, input_pattern, detunings_ghz, r=1.0, tolerance_ghz=1.0):
    """Interfering formula if all sources in the pattern share a resonance, else distinguishable.

    ``r`` weights the interfering branch as in :func:`test_probability`, so that
    aligned patterns can be given exactly the test model's probability.
    """
    det = np.asarray(detunings_ghz, dtype=float)
    pattern = tuple(int(s) for s in input_pattern)
    if any(s < 0 or s >= len(det) for s in pattern):
        raise ValueError(f"unknown source id in {pattern}")
    aligned = np.ptp(det[list(pattern)]) <= tolerance_ghz
    if aligned:
        return test_probability(sub, r)
    return permanent(np.abs(check_square(sub)) ** 2).real


def pattern_distribution(circuit, input_pattern, prob_fn):
    """``{output: probability}`` over collision-free outputs, normalized."""
    t = circuit.matrix if isinstance(circuit, Interferometer) else np.asarray(circuit)
    outs = list(itertools.combinations(range(t.shape[0]), len(input_pattern)))
    p = np.array([prob_fn(submatrix(t, input_pattern, o)) for o in outs])
    if p.sum() <= 0:
        raise ValueError("distribution is not normalizable")
    return dict(zip(outs, p / p.sum()))


# --------------------------------------------------------------------------
# Bayes


@dataclass(frozen=True)
class BayesTrace:
    """Running log-likelihood ratio ``L`` and posterior after each sample."""

    log_ratio: float = 0.0
    posteriors: tuple = field(default=(), repr=False)

    @property
    def posterior(self):
        return float(expit(self.log_ratio))

    def to_csv(self, path, header=None):
        with open(path, "w") as fh:
            if header:
                fh.write(header.rstrip("\n") + "\n")
            fh.write("n,posterior\n")
            for i, p in enumerate(self.posteriors, 1):
                fh.write(f"{i},{p:.10g}\n")


def _log_ratio_terms(p_test, p_adv):
    p_test = np.atleast_1d(np.asarray(p_test, dtype=float))
    p_adv = np.atleast_1d(np.asarray(p_adv, dtype=float))
    if np.any(p_test < 0) or np.any(p_adv < 0):
        raise ValueError("probabilities must be >= 0")
    if np.any((p_test == 0) & (p_adv == 0)):
        raise ValueError("sample is impossible under both models")
    with np.errstate(divide="ignore"):
        return np.log(p_test) - np.log(p_adv)


def bayes_update(trace: BayesTrace, p_test, p_adv) -> BayesTrace:
    """Fold one sample into the trace."""
    L = trace.log_ratio + float(_log_ratio_terms(p_test, p_adv)[0])
    return BayesTrace(L, trace.posteriors + (float(expit(L)),))


def bayes_trace(p_test, p_adv) -> BayesTrace:
    """Vectorized fold over a whole sample list."""
    cum = np.cumsum(_log_ratio_terms(p_test, p_adv))
    if len(cum) == 0:
        return BayesTrace()
    return BayesTrace(float(cum[-1]), tuple(expit(cum)))


def final_posterior(p_test, p_adv):
    terms = _log_ratio_terms(p_test, p_adv)
    return float(expit(np.sum(terms)))


class BayesValidator(BaseEstimator):
    """Posterior that samples came from the test rather than the adversarial model.

    ``fit`` takes per-sample likelihoods ``(p_test, p_adv)``; ``predict_proba``
    on a subset size returns the average final posterior over random subsets.
    """

    def __init__(self, subset_size=2000, n_repeats=20, seed=0):
        self.subset_size = subset_size
        self.n_repeats = n_repeats
        self.seed = seed

    def fit(self, p_test, p_adv):
        self.terms_ = _log_ratio_terms(p_test, p_adv)
        self.trace_ = bayes_trace(p_test, p_adv)
        self.posterior_ = self.trace_.posterior
        return self

    def predict_proba(self, subset_size=None):
        n = self.subset_size if subset_size is None else subset_size
        if len(self.terms_) <= n:
            return float(expit(self.terms_.sum()))
        rng = np.random.default_rng(self.seed)
        vals = [
            expit(self.terms_[rng.choice(len(self.terms_), n, replace=False)].sum())
            for _ in range(self.n_repeats)
        ]
        return float(np.mean(vals))


# --------------------------------------------------------------------------
# forward sampler


def _density_grid(sub, rhos, intensities, weight):
    """Joint detection density on an N-dimensional grid of absolute times.

    ``rhos[j]`` is photon j's temporal density matrix on the 1-D grid and
    ``intensities[j]`` its diagonal. Expanding ``|Perm|^2`` of a mixed state
    over permutation pairs gives products of density-matrix elements; the
    diagonal pairs (sigma == tau) are the distinguishable part.
    """
    n = sub.shape[0]
    nf = len(intensities[0])
    perms = list(itertools.permutations(range(n)))
    total = np.zeros((nf,) * n)

    def factor(j, a, b):
        shape = [1] * n
        if a == b:
            shape[a] = nf
            return intensities[j].reshape(shape)
        m = rhos[j] if a < b else rhos[j].T
        shape[min(a, b)] = nf
        shape[max(a, b)] = nf
        return m.reshape(shape)

    for sig in perms:
        inv_s = np.argsort(sig)
        for tau in perms:
            same = sig == tau
            w = 1.0 if same else weight
            if w == 0:
                continue
            coef = np.prod([sub[i, sig[i]] * np.conj(sub[i, tau[i]]) for i in range(n)])
            if coef == 0:
                continue
            inv_t = np.argsort(tau)
            term = coef
            for j in range(n):
                term = term * factor(j, inv_s[j], inv_t[j])
            total += w * np.real(term)
    return np.clip(total, 0, None)


class BosonSampler(BaseEstimator):
    """Forward sampler over (input, output, binned arrival times).

    ``fit`` tabulates the jitter-smeared joint density for every input pattern
    and collision-free output pattern on ``bin_ps`` time bins (integrated from a
    grid ``oversample`` times finer). Jitter is applied per absolute time axis
    with the Gaussian of the detecting channel.
    """

    def __init__(self, model=None, bin_ps=DEFAULT_BIN_PS, t_min=-300.0, t_max=900.0,
                 oversample=None, input_weights=None):
        self.model = model
        self.bin_ps = bin_ps
        self.t_min = t_min
        self.t_max = t_max
        self.oversample = oversample
        self.input_weights = input_weights

    def fit(self, circuit, photons, jitter=None, input_patterns=None):
        t = circuit.matrix if isinstance(circuit, Interferometer) else np.asarray(circuit)
        m = t.shape[0]
        if m > MAX_MODES:
            raise ValueError(f"sampler supports at most {MAX_MODES} modes")
        photons = [as_mixed(p) for p in photons]
        if input_patterns is None:
            input_patterns = [tuple(range(len(photons)))]
        input_patterns = [check_pattern(p, m, "input") for p in input_patterns]
        n = len(input_patterns[0])
        if n > MAX_PHOTONS or any(len(p) != n for p in input_patterns):
            raise ValueError(f"all input patterns need the same N <= {MAX_PHOTONS}")
        if any(s >= len(photons) for p in input_patterns for s in p):
            raise ValueError("input pattern refers to a mode without a photon")
        model = self.model or ModelSpec()
        jitter = jitter or JitterModel()
        over = self.oversample or (4 if n <= 2 else 1)
        nb = int(round((self.t_max - self.t_min) / self.bin_ps))
        fine = self.bin_ps / over
        tf = self.t_min + fine * (np.arange(nb * over) + 0.5)

        rhos, intens = [], []
        for ph in photons:
            z = np.array([p(tf) for p in ph.profiles])
            rhos.append((z.T * ph.weights) @ z.conj())
            intens.append(ph.weights @ np.abs(z) ** 2)

        tables = {}
        for inp in input_patterns:
            outs = list(itertools.combinations(range(m), n))
            probs = np.empty((len(outs),) + (nb,) * n)
            for k, out in enumerate(outs):
                sub = submatrix(t, inp, out)
                dens = _density_grid(
                    sub, [rhos[s] for s in inp], [intens[s] for s in inp], model.interference_weight
                )
                for axis, ch in enumerate(out):
                    fwhm = jitter.channel_fwhm(ch)
                    if fwhm > 0:
                        s = fwhm / FWHM_PER_SIGMA / fine
                        dens = gaussian_filter1d(dens, s, axis=axis, mode="constant", truncate=6)
                probs[k] = dens.reshape(sum(((nb, over) for _ in range(n)), ())).sum(
                    axis=tuple(range(1, 2 * n, 2))
                )
            total = probs.sum()
            if not total > 0:
                raise ValueError(f"distribution for input {inp} is not normalizable")
            tables[inp] = (outs, probs / total)
        self.tables_ = tables
        self.n_photons_ = n
        self.n_bins_ = nb
        self.bin_edges_ = self.t_min + self.bin_ps * np.arange(nb + 1)
        self.input_patterns_ = input_patterns
        return self

    def output_distribution(self, input_pattern):
        """Time-integrated ``{output: probability}`` for one input."""
        outs, probs = self.tables_[tuple(input_pattern)]
        p = probs.reshape(len(outs), -1).sum(axis=1)
        return dict(zip(outs, p))

    def sample(self, n_samples, seed=None, input_pattern=None):
        """Draw samples by inverse CDF; times are uniform within their bin.

        Inputs are drawn from ``input_weights`` (uniform by default) unless
        ``input_pattern`` fixes one.
        """
        rng = np.random.default_rng(seed)
        if n_samples == 0:
            return []
        pats = self.input_patterns_
        if input_pattern is not None:
            which = np.full(n_samples, pats.index(tuple(input_pattern)))
        else:
            w = np.ones(len(pats)) if self.input_weights is None else np.asarray(self.input_weights, float)
            w = w / w.sum()
            which = rng.choice(len(pats), size=n_samples, p=w)
        u = rng.random(n_samples)
        jit = rng.random((n_samples, self.n_photons_))
        out = [None] * n_samples
        n, nb = self.n_photons_, self.n_bins_
        for i, inp in enumerate(pats):
            idx = np.flatnonzero(which == i)
            if len(idx) == 0:
                continue
            outs, probs = self.tables_[inp]
            cdf = np.cumsum(probs.ravel())
            flat = np.minimum(np.searchsorted(cdf, u[idx] * cdf[-1], side="right"), len(cdf) - 1)
            k, *bins = np.unravel_index(flat, (len(outs),) + (nb,) * n)
            times = self.t_min + (np.column_stack(bins) + jit[idx]) * self.bin_ps
            for j, s in enumerate(idx):
                out[s] = Sample(inp, outs[k[j]], tuple(times[j]))
        return out

    def probability(self, samples):
        """Bin probability of each sample under this model (conditional on input)."""
        res = np.zeros(len(samples))
        if not samples:
            return res
        nb = self.n_bins_
        times = np.array([s.arrival_times for s in samples], dtype=float)
        bins = np.floor((times - self.t_min) / self.bin_ps).astype(int)
        inside = np.all((bins >= 0) & (bins < nb), axis=1)
        keys = [(s.input_pattern, s.output_pattern) for s in samples]
        lookup = {}
        for inp, (outs, _) in self.tables_.items():
            for k, o in enumerate(outs):
                lookup[(inp, o)] = (inp, k)
        for i, key in enumerate(keys):
            if not inside[i]:
                continue
            if key not in lookup:
                raise ValueError(f"pattern {key} not covered by the fitted model")
            inp, k = lookup[key]
            res[i] = self.tables_[inp][1][(k,) + tuple(bins[i])]
        return res


def draw_samples(model: ModelSpec, circuit, sources, jitter, n, rng_seed, input_patterns=None,
                 **kwargs):
    """Functional front end to :class:`BosonSampler`."""
    if n == 0:
        return []
    sampler = BosonSampler(model, **kwargs).fit(circuit, sources, jitter, input_patterns)
    return sampler.sample(n, rng_seed)


def windowed_model_probabilities(samples, circuit, prob_fns):
    """Per-sample time-integrated probabilities under each model in ``prob_fns``.

    ``prob_fns`` maps a name to ``f(sub, input_pattern) -> unnormalized prob``;
    values are normalized over collision-free outputs for the sample's input.
    """
    cache = {}
    res = {name: np.empty(len(samples)) for name in prob_fns}
    for i, s in enumerate(samples):
        for name, fn in prob_fns.items():
            key = (name, s.input_pattern)
            if key not in cache:
                cache[key] = pattern_distribution(circuit, s.input_pattern, lambda sub: fn(sub, key[1]))
            res[name][i] = cache[key][tuple(sorted(s.output_pattern))]
    return res

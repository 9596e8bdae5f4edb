"""End-to-end scenarios driven by a :class:`ScenarioConfig`.

Each ``run_*`` returns a report object and, when ``write`` is true, writes its
CSV artifacts to ``cfg.out_dir``. Every file starts with a provenance line.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .circuits import bell_state_coefficients, f4, preset, submatrix
from .config import ScenarioConfig, config_hash
from .engine import (
    CoincidenceHistogram,
    JitterModel,
    fringe_visibility,
    fusion_fidelity,
    pair_fringe,
    projection_visibility,
)
from .grids import PumpSpec
from .jsa import ring_photon
from .sampling import (
    BayesValidator,
    BosonSampler,
    ModelSpec,
    bayes_trace,
    save_samples,
    scattershot_adversary_probability,
    test_probability,
    windowed_model_probabilities,
)
from .timetags import StreamAnalysis, analyze_stream, parse_timetags, StreamSpec, export_timetags


def provenance(cfg: ScenarioConfig):
    return f"# timeres {__version__} seed={cfg.seed} config={config_hash(cfg)} scenario={cfg.name}"


def _out(cfg, name):
    d = Path(cfg.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def jitter_model(cfg: ScenarioConfig) -> JitterModel:
    def table(vals):
        vals = list(vals)
        return float(vals[0]) if len(vals) == 1 else {i: float(v) for i, v in enumerate(vals)}

    return JitterModel(table(cfg.detector_fwhm_ps), table(cfg.tagger_fwhm_ps))


@lru_cache(maxsize=32)
def _photon(detuning, linewidth, model, pump, pump_linewidth):
    if model == "lorentzian":
        return ring_photon(detuning, linewidth)
    return ring_photon(detuning, linewidth, pump, pump_linewidth_ghz=pump_linewidth or None)


def source_photons(cfg: ScenarioConfig):
    pump = PumpSpec(cfg.pump_center_nm, cfg.pump_fwhm_pm, cfg.rep_period_ns)
    return [
        _photon(float(d), float(lw), cfg.source_model, pump, cfg.pump_linewidth_ghz)
        for d, lw in zip(cfg.detunings_ghz, cfg.linewidths_ghz)
    ]


def rebin(h: CoincidenceHistogram, width):
    """Integrate a fine histogram into bins of ``width`` centred on multiples of it."""
    edges = np.arange(np.floor(h.tau[0] / width) - 0.5, np.ceil(h.tau[-1] / width) + 1.5) * width
    counts, _ = np.histogram(h.tau, edges, weights=h.density.real * h.bin_width)
    return CoincidenceHistogram(0.5 * (edges[1:] + edges[:-1]), counts / width, width)


# --------------------------------------------------------------------------
# HOM


@dataclass
class FringeReport:
    phases: np.ndarray
    counts: dict  # window -> windowed values per phase
    visibilities: dict  # window -> (V, err)
    fidelities: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(
            {
                "visibilities": {str(w): list(v) for w, v in self.visibilities.items()},
                "fidelities": {str(w): v for w, v in self.fidelities.items()},
            },
            indent=2,
        )


def _phases(cfg):
    return np.linspace(0, 2 * np.pi, cfg.phase_steps, endpoint=False)


def _visibilities(scan, windows, strict=False):
    out = {}
    for w in windows:
        v, e = fringe_visibility(scan, w, strict=strict)
        out[w] = (v, e)
    return out


def run_hom(cfg: ScenarioConfig, write=True) -> FringeReport:
    """MZI fringe of two ring photons versus internal phase, per timing window."""
    if len(cfg.detunings_ghz) < 2:
        raise ValueError("hom needs two sources")
    p1, p2 = source_photons(cfg)[:2]
    fwhm = jitter_model(cfg).combined_fwhm((0, 1))
    phases = _phases(cfg)
    circ = lambda th: preset(cfg.preset, th)  # noqa: E731
    harmonic = 2 if cfg.preset == "mzi" else 1
    scan = pair_fringe(circ, phases, p1, p2, jitter_fwhm_ps=fwhm, tau_max=cfg.tau_max_ps,
                       harmonic=harmonic, distinguishable=cfg.delayed)
    report = FringeReport(phases, {w: scan.counts(w) for w in cfg.windows_ps},
                          _visibilities(scan, cfg.windows_ps))
    if write:
        head = provenance(cfg)
        scan.to_csv(_out(cfg, "hom_fringes.csv"), cfg.windows_ps, head)
        _write_vis(cfg, "hom_visibility.csv", report)
        c = scan.counts(cfg.windows_ps[0])
        for tag, i in (("max", int(np.argmax(c))), ("min", int(np.argmin(c)))):
            rebin(scan.histograms[i], cfg.hist_bin_ps).to_csv(_out(cfg, f"hom_hist_{tag}.csv"), head)
    return report


def _write_vis(cfg, name, report):
    with open(_out(cfg, name), "w") as fh:
        fh.write(provenance(cfg) + "\n")
        cols = "window_ps,visibility,visibility_err" + (",fidelity" if report.fidelities else "")
        fh.write(cols + "\n")
        for w, (v, e) in report.visibilities.items():
            row = f"{w:g},{v:.6f},{e:.6f}"
            if report.fidelities:
                row += f",{report.fidelities[w]:.6f}"
            fh.write(row + "\n")


# --------------------------------------------------------------------------
# fusion


def run_fusion(cfg: ScenarioConfig, write=True) -> FringeReport:
    """F4 fringe in phi for the fusion click pattern, with gate fidelities.

    Counts are normalized by twice the windowed distinguishable baseline, so
    perfectly interfering photons trace (1 + cos phi)/2 and distinguishable
    ones sit flat at 1/2.
    """
    p1, p2 = source_photons(cfg)[:2]
    fwhm = jitter_model(cfg).combined_fwhm((0, 1))
    phases = _phases(cfg)
    circ = lambda ph: f4(ph)  # noqa: E731
    scan = pair_fringe(circ, phases, p1, p2, jitter_fwhm_ps=fwhm, tau_max=cfg.tau_max_ps,
                       distinguishable=cfg.delayed)
    base = pair_fringe(circ, phases[:1], p1, p2, jitter_fwhm_ps=fwhm, tau_max=cfg.tau_max_ps,
                       distinguishable=True)
    counts = {w: scan.counts(w) / (2 * base.counts(w)[0]) for w in cfg.windows_ps}
    vis = _visibilities(scan, cfg.windows_ps)
    fid = {w: fusion_fidelity(min(max(v, 0.0), 1.0)) for w, (v, _) in vis.items()}
    report = FringeReport(phases, counts, vis, fid)
    if write:
        with open(_out(cfg, "fusion_fringes.csv"), "w") as fh:
            fh.write(provenance(cfg) + "\ntheta_rad,counts,window_ps\n")
            for w in cfg.windows_ps:
                for ph, c in zip(phases, counts[w]):
                    fh.write(f"{ph:.10g},{c:.10g},{w:g}\n")
        _write_vis(cfg, "fusion_visibility.csv", report)
        with open(_out(cfg, "fusion_bell.csv"), "w") as fh:
            fh.write(provenance(cfg) + "\nphi_rad,phi_minus_re,phi_minus_im,psi_minus_re,psi_minus_im\n")
            for ph in phases:
                a, b = bell_state_coefficients(ph)
                fh.write(f"{ph:.10g},{a.real:.10g},{a.imag:.10g},{b.real:.10g},{b.imag:.10g}\n")
    return report


# --------------------------------------------------------------------------
# scattershot


@dataclass
class ScattershotReport:
    windows: list
    window_posteriors: list
    crossing_ps: float | None
    time_resolved_posterior: float
    adversarial_posterior: float
    samples: list = field(repr=False, default_factory=list)


def posterior_crossing(windows, posteriors, level=0.5):
    """Largest window below which the posterior first reaches ``level``.

    Windows are scanned from wide to narrow; the crossing is linearly
    interpolated between the bracketing windows.
    """
    w = np.asarray(windows, float)
    p = np.asarray(posteriors, float)
    order = np.argsort(w)[::-1]
    w, p = w[order], p[order]
    for i in range(1, len(w)):
        if p[i - 1] < level <= p[i]:
            f = (level - p[i - 1]) / (p[i] - p[i - 1])
            return float(w[i - 1] + f * (w[i] - w[i - 1]))
    return None


def scattershot_setup(cfg: ScenarioConfig):
    photons = source_photons(cfg)
    circuit = f4(cfg.fixed_phase)
    patterns = list(itertools.combinations(range(len(photons)), 2))
    return photons, circuit, patterns


def window_sweep(samples, circuit, detunings, r, windows, subset_size, n_repeats, seed):
    """Average final posterior of the time-integrated test model per window."""
    probs = windowed_model_probabilities(
        samples,
        circuit,
        {
            "test": lambda sub, inp: test_probability(sub, r),
            "adv": lambda sub, inp: scattershot_adversary_probability(sub, inp, detunings, r),
        },
    )
    tau = np.array([s.relative_delay for s in samples])
    out = []
    for w in windows:
        m = np.abs(tau) <= w / 2
        if not m.any():
            out.append(float("nan"))
            continue
        v = BayesValidator(subset_size, n_repeats, seed).fit(probs["test"][m], probs["adv"][m])
        out.append(v.predict_proba())
    return out


def run_scattershot(cfg: ScenarioConfig, write=True, export_tags=False) -> ScattershotReport:
    photons, circuit, patterns = scattershot_setup(cfg)
    jit = jitter_model(cfg)
    truth = BosonSampler(ModelSpec("test", 1.0)).fit(circuit, photons, jit, patterns)
    samples = truth.sample(cfg.samples, cfg.seed)
    post = window_sweep(samples, circuit, cfg.detunings_ghz, cfg.r, cfg.windows_ps,
                        cfg.subset_size, cfg.n_repeats, cfg.seed)
    crossing = posterior_crossing(cfg.windows_ps, post)

    test = BosonSampler(ModelSpec("test", cfg.r)).fit(circuit, photons, jit, patterns)
    adv = BosonSampler(ModelSpec("adversarial")).fit(circuit, photons, jit, patterns)
    sub = samples[: cfg.subset_size]
    trace = bayes_trace(test.probability(sub), adv.probability(sub))
    adv_samples = adv.sample(cfg.subset_size, cfg.seed + 1)
    adv_trace = bayes_trace(test.probability(adv_samples), adv.probability(adv_samples))

    report = ScattershotReport(list(cfg.windows_ps), post, crossing, trace.posterior,
                               adv_trace.posterior, samples)
    if write:
        head = provenance(cfg)
        save_samples(samples, _out(cfg, "scattershot_samples.csv"), head)
        trace.to_csv(_out(cfg, "scattershot_bayes_time_resolved.csv"), head)
        with open(_out(cfg, "scattershot_window_sweep.csv"), "w") as fh:
            fh.write(head + "\nwindow_ps,posterior\n")
            for w, p in zip(cfg.windows_ps, post):
                fh.write(f"{w:g},{p:.6f}\n")
            fh.write(f"# crossing_ps={crossing}\n")
        _write_distributions(cfg, samples, circuit, patterns)
        if export_tags:
            tags, _ = export_timetags(samples, StreamSpec(rep_period_ps=cfg.rep_period_ps), cfg.seed)
            tags.to_csv(_out(cfg, "scattershot_timetags.csv"), head)
    return report


def _write_distributions(cfg, samples, circuit, patterns):
    tau = np.array([s.relative_delay for s in samples])
    keys = [(i, o) for i in patterns for o in itertools.combinations(range(circuit.dim), 2)]
    with open(_out(cfg, "scattershot_distributions.csv"), "w") as fh:
        fh.write(provenance(cfg) + "\nwindow_ps;input;output;probability\n")
        for w in cfg.windows_ps:
            m = np.abs(tau) <= w / 2
            counts = dict.fromkeys(keys, 0)
            for s, keep in zip(samples, m):
                if keep:
                    counts[(s.input_pattern, s.output_pattern)] += 1
            total = max(sum(counts.values()), 1)
            for (i, o), c in counts.items():
                fh.write(f"{w:g};{_pat(i)};{_pat(o)};{c / total:.8f}\n")
        for name, fn in (
            ("test", lambda sub, inp: test_probability(sub, cfg.r)),
            ("adversarial",
             lambda sub, inp: scattershot_adversary_probability(sub, inp, cfg.detunings_ghz, cfg.r)),
        ):
            for i in patterns:
                ps = {o: fn(submatrix(circuit, i, o), i) for o in itertools.combinations(range(circuit.dim), 2)}
                z = sum(ps.values())
                for o, p in ps.items():
                    fh.write(f"{name};{_pat(i)};{_pat(o)};{p / z / len(patterns):.8f}\n")


def _pat(p):
    return ",".join(str(x) for x in p)


# --------------------------------------------------------------------------
# projections


@dataclass
class ProjectionReport:
    detunings_ghz: np.ndarray
    visibilities: dict  # regime fwhm -> array

    def threshold(self, regime, level):
        """Largest detuning on the grid with V >= level."""
        v = self.visibilities[regime]
        ok = np.flatnonzero(v >= level)
        return float(self.detunings_ghz[ok[-1]]) if len(ok) else None


def run_projections(cfg: ScenarioConfig, write=True) -> ProjectionReport:
    lw = float(cfg.linewidths_ghz[0])
    det = np.concatenate([[0.0], np.geomspace(cfg.detuning_min_ghz, cfg.detuning_max_ghz,
                                              cfg.detuning_points)])
    vis = {}
    for fwhm in cfg.regimes_ps:
        jm = JitterModel.total(fwhm)
        vis[fwhm] = np.array([projection_visibility(d, lw, jm) for d in det])
    report = ProjectionReport(det, vis)
    if write:
        with open(_out(cfg, "projections.csv"), "w") as fh:
            fh.write(provenance(cfg) + "\ndetuning_ghz,jitter_fwhm_ps,visibility\n")
            for fwhm, v in vis.items():
                for d, x in zip(det, v):
                    fh.write(f"{d:.6g},{fwhm:g},{x:.8f}\n")
    return report


# --------------------------------------------------------------------------
# analyze


@dataclass
class AnalyzeReport:
    analysis: StreamAnalysis | None
    posteriors: dict


def run_analyze(path, cfg: ScenarioConfig, write=True) -> AnalyzeReport:
    """Parse a tag file and run the whole correction chain on it."""
    tags = parse_timetags(path)
    n_src = len(cfg.detunings_ghz)
    circuit = preset(cfg.preset, cfg.fixed_phase) if cfg.preset != "bs" else preset("bs")
    eff = cfg.efficiencies or None
    wts = cfg.source_weights or None
    an = analyze_stream(tags, n_src, circuit.dim, cfg.rep_period_ps, cfg.windows_ps, cfg.gate_ps,
                        efficiencies=eff, weights=wts)
    posteriors = {}
    if an.events:
        from .sampling import Sample

        samples = [Sample(i, o, t) for i, o, t in an.events]
        posteriors = dict(zip(cfg.windows_ps, window_sweep(
            samples, circuit, cfg.detunings_ghz, cfg.r, cfg.windows_ps, cfg.subset_size,
            cfg.n_repeats, cfg.seed)))
    if write:
        head = provenance(cfg)
        with open(_out(cfg, "analyze_distributions.csv"), "w") as fh:
            fh.write(head + "\nwindow_ps;input;output;probability\n")
            for w in an.windows:
                for (i, o), p in sorted(an.distributions[w].items()):
                    fh.write(f"{w:g};{_pat(i)};{_pat(o)};{p:.8f}\n")
        with open(_out(cfg, "analyze_histogram.csv"), "w") as fh:
            fh.write(head + "\ntau_ps,count\n")
            allt = np.concatenate([d for d in an.delays.values()]) if an.delays else np.zeros(0)
            half = cfg.tau_max_ps
            edges = np.arange(-half - cfg.hist_bin_ps / 2, half + cfg.hist_bin_ps, cfg.hist_bin_ps)
            c, _ = np.histogram(allt, edges)
            for t, n in zip(0.5 * (edges[1:] + edges[:-1]), c):
                fh.write(f"{t:g},{n}\n")
        with open(_out(cfg, "analyze_bayes.csv"), "w") as fh:
            fh.write(head + "\nwindow_ps,posterior\n")
            for w, p in posteriors.items():
                fh.write(f"{w:g},{p:.6f}\n")
    return AnalyzeReport(an, posteriors)


def report_json(report):
    try:
        d = asdict(report)
    except TypeError:
        d = dict(report.__dict__)
    d.pop("samples", None)
    d.pop("analysis", None)
    return json.dumps(d, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o), indent=2)

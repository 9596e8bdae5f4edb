"""Scenario configuration as sectioned ``key = value`` text (INI)."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .circuits import PRESETS

SCENARIOS = ("hom", "fusion", "scattershot", "projections", "analyze")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


# section -> field names; keys in the file equal the field names
_LAYOUT = {
    "scenario": ("name", "seed", "out_dir", "samples"),
    "sources": ("detunings_ghz", "linewidths_ghz", "source_model", "pump_linewidth_ghz"),
    "pump": ("pump_center_nm", "pump_fwhm_pm", "rep_period_ns"),
    "circuit": ("preset", "phase_steps", "fixed_phase", "r"),
    "jitter": ("detector_fwhm_ps", "tagger_fwhm_ps"),
    "analysis": ("windows_ps", "gate_ps", "hist_bin_ps", "tau_max_ps", "delayed", "efficiencies",
                 "source_weights", "subset_size", "n_repeats"),
    "projections": ("regimes_ps", "detuning_min_ghz", "detuning_max_ghz", "detuning_points"),
}

_LISTS = {"detunings_ghz", "linewidths_ghz", "windows_ps", "efficiencies", "source_weights",
          "regimes_ps", "detector_fwhm_ps", "tagger_fwhm_ps"}


@dataclass
class ScenarioConfig:
    name: str = "hom"
    seed: int = 1
    out_dir: str = "out"
    samples: int = 100_000
    detunings_ghz: list = field(default_factory=lambda: [-3.4, 3.4])
    linewidths_ghz: list = field(default_factory=lambda: [3.8, 3.8])
    source_model: str = "jsa"
    pump_linewidth_ghz: float = 0.0
    pump_center_nm: float = 1541.3
    pump_fwhm_pm: float = 100.0
    rep_period_ns: float = 20.0
    preset: str = "mzi"
    phase_steps: int = 64
    fixed_phase: float = 1.5707963267948966
    r: float = 0.64
    detector_fwhm_ps: list = field(default_factory=lambda: [75.4])
    tagger_fwhm_ps: list = field(default_factory=lambda: [15.7])
    windows_ps: list = field(default_factory=lambda: [200.0, 100.0, 50.0, 20.0])
    gate_ps: float = 1000.0
    hist_bin_ps: float = 20.0
    tau_max_ps: float = 1500.0
    delayed: bool = False
    efficiencies: list = field(default_factory=list)
    source_weights: list = field(default_factory=list)
    subset_size: int = 2000
    n_repeats: int = 50
    regimes_ps: list = field(default_factory=lambda: [109.0, 22.2, 4.2])
    detuning_min_ghz: float = 0.1
    detuning_max_ghz: float = 600.0
    detuning_points: int = 61

    def validate(self):
        if self.name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.name!r}")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown circuit preset {self.preset!r}")
        if self.source_model not in ("jsa", "lorentzian"):
            raise ConfigError("source_model must be 'jsa' or 'lorentzian'")
        if len(self.detunings_ghz) != len(self.linewidths_ghz):
            raise ConfigError("need one linewidth per source")
        if any(lw <= 0 for lw in self.linewidths_ghz):
            raise ConfigError("linewidths must be > 0")
        if list(self.windows_ps) != sorted(self.windows_ps, reverse=True):
            raise ConfigError("windows must be sorted in descending order")
        if any(w <= 0 for w in self.windows_ps):
            raise ConfigError("windows must be > 0")
        if not 0 <= self.r <= 1:
            raise ConfigError("r must lie in [0, 1]")
        if self.phase_steps < 8:
            raise ConfigError("need at least 8 phase steps")
        if self.samples < 0 or self.seed < 0:
            raise ConfigError("samples and seed must be >= 0")
        if any(x < 0 for x in list(self.detector_fwhm_ps) + list(self.tagger_fwhm_ps)):
            raise ConfigError("jitter FWHMs must be >= 0")
        for name in ("efficiencies", "source_weights"):
            vals = getattr(self, name)
            if vals and len(vals) not in (1, self.n_outputs, len(self.detunings_ghz)):
                raise ConfigError(f"{name} has the wrong length")
        return self

    @property
    def n_outputs(self):
        return {"mzi": 2, "bs": 2}.get(self.preset, 4)

    @property
    def rep_period_ps(self):
        return int(round(self.rep_period_ns * 1000))

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw).validate()


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(name, raw, default):
    raw = raw.strip()
    try:
        if name in _LISTS:
            return [float(x) for x in raw.split(",") if x.strip()]
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text: str, defaults: ScenarioConfig | None = None) -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = defaults or ScenarioConfig()
    known = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    updates = {}
    for section in cp.sections():
        if section not in _LAYOUT:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _LAYOUT[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            updates[key] = _coerce(key, raw, known[key])
    return replace(cfg, **updates).validate()


def load_config(path, defaults: ScenarioConfig | None = None) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, defaults)


def serialize_config(cfg: ScenarioConfig) -> str:
    lines = []
    for section, keys in _LAYOUT.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {_format(getattr(cfg, k))}" for k in keys)
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: ScenarioConfig) -> str:
    """Short digest of every setting except the output directory."""
    text = serialize_config(replace(cfg, out_dir=""))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def default_config(name) -> ScenarioConfig:
    """Built-in parameter sets for each scenario."""
    base = ScenarioConfig(name=name)
    if name == "fusion":
        return replace(base, preset="f4")
    if name in ("scattershot", "analyze"):
        return replace(
            base,
            preset="f4",
            detunings_ghz=[-3.35, 3.35, 3.35, -3.35],
            linewidths_ghz=[3.8] * 4,
            windows_ps=[400.0, 300.0, 200.0, 150.0, 100.0, 80.0, 60.0, 50.0, 40.0, 30.0, 20.0],
        )
    return base

"""Time-tag streams: parsing, virtual channels, coincidences, backgrounds.

Timestamps are integer picoseconds. Streams are kept sorted by timestamp with
ties broken by channel id.

Two coincidence counters are provided. ``count_coincidences`` is the reference
greedy scan: starting from the earliest unused tag it looks for one unused tag
per required channel no more than ``window/2`` later and, on success, consumes
them. Windows are full widths throughout, as for delay histograms.
``count_clustered`` first splits the stream into clusters separated by more
than a gate and then matches patterns per cluster with channel bitmasks. The
two agree whenever no cluster holds two tags on one channel, which holds for
pulsed sources with gate < repetition period; the fast path reports the
clusters where that assumption fails.
"""

from __future__ import annotations

import io
import itertools
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuits import Interferometer

DEFAULT_GATE_PS = 1000
HERALD_BASE = 100
VIRTUAL_BASE = 1000


class TimeTagFormatError(ValueError):
    """Malformed or unsorted time-tag input."""


@dataclass(frozen=True)
class TimeTagRecord:
    channel: int
    timestamp: int


@dataclass(frozen=True, eq=False)
class TimeTags:
    channels: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.int64).ravel()
        ts = np.asarray(self.timestamps, dtype=np.int64).ravel()
        if ch.shape != ts.shape:
            raise ValueError("channels and timestamps differ in length")
        order = np.lexsort((ch, ts))
        object.__setattr__(self, "channels", ch[order])
        object.__setattr__(self, "timestamps", ts[order])

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64))

    def __len__(self):
        return len(self.timestamps)

    def __iter__(self):
        for c, t in zip(self.channels, self.timestamps):
            yield TimeTagRecord(int(c), int(t))

    def merged(self, other):
        return TimeTags(
            np.concatenate([self.channels, other.channels]),
            np.concatenate([self.timestamps, other.timestamps]),
        )

    def select(self, channels):
        m = np.isin(self.channels, list(channels))
        return TimeTags(self.channels[m], self.timestamps[m])

    def to_csv(self, path, header=None):
        with open(path, "w") as fh:
            if header:
                fh.write(header.rstrip("\n") + "\n")
            fh.write("# channel,timestamp_ps\n")
            np.savetxt(fh, np.column_stack([self.channels, self.timestamps]), fmt="%d", delimiter=",")


def parse_timetags(source) -> TimeTags:
    """Read ``channel,timestamp_ps`` lines; ``#`` starts a comment.

    Each channel's timestamps must be nondecreasing in file order. Errors
    carry the offending line number.
    """
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            lines = fh.read().splitlines()
    elif isinstance(source, io.IOBase):
        lines = source.read().splitlines()
    else:
        lines = list(source)
    chans, stamps = [], []
    last = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TimeTagFormatError(f"line {lineno}: expected 'channel,timestamp_ps', got {raw!r}")
        try:
            c, t = int(parts[0]), int(parts[1])
        except ValueError:
            raise TimeTagFormatError(f"line {lineno}: non-integer field in {raw!r}") from None
        if t < last.get(c, t):
            raise TimeTagFormatError(f"line {lineno}: channel {c} timestamp {t} goes backwards")
        last[c] = t
        chans.append(c)
        stamps.append(t)
    return TimeTags(np.array(chans, np.int64), np.array(stamps, np.int64))


# --------------------------------------------------------------------------
# virtual channels


@dataclass(frozen=True)
class VirtualChannelSpec:
    """Copy of ``source`` delayed by ``delay_ps``, emitted on ``channel``."""

    source: int
    delay_ps: int
    channel: int | None = None

    def __post_init__(self):
        if self.delay_ps < 0:
            raise ValueError("virtual channel delay must be >= 0")
        if self.channel is None:
            object.__setattr__(self, "channel", VIRTUAL_BASE + self.source)


def virtual_channel(tags: TimeTags, spec: VirtualChannelSpec, rep_period_ps=None, strict=False):
    """Stream with a delayed copy of ``spec.source`` merged in.

    A delay that is not a multiple of ``rep_period_ps`` triggers a warning, or
    a ``ValueError`` when ``strict``.
    """
    if rep_period_ps and spec.delay_ps % rep_period_ps:
        msg = f"delay {spec.delay_ps} ps is not a multiple of the period {rep_period_ps} ps"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, stacklevel=2)
    src = tags.channels == spec.source
    copy = TimeTags(np.full(src.sum(), spec.channel), tags.timestamps[src] + spec.delay_ps)
    return tags.merged(copy)


# --------------------------------------------------------------------------
# coincidences


@dataclass(frozen=True)
class CoincidencePattern:
    """Required channels and a full-width window: all tags within ``window/2``."""

    channels: tuple
    window_ps: float = DEFAULT_GATE_PS

    def __post_init__(self):
        if not self.window_ps > 0:
            raise ValueError("coincidence window must be > 0")
        ch = tuple(int(c) for c in self.channels)
        if len(set(ch)) != len(ch) or not ch:
            raise ValueError("pattern needs distinct channels")
        object.__setattr__(self, "channels", ch)


@dataclass(frozen=True, eq=False)
class CoincidenceResult:
    """``relative_times[e, m] = t(channel m+1) - t(channel 0)`` for event ``e``."""

    count: int
    relative_times: np.ndarray = field(repr=False)
    start_times: np.ndarray = field(repr=False)


def count_coincidences(tags: TimeTags, pattern: CoincidencePattern) -> CoincidenceResult:
    """Greedy earliest-first matching (see module docstring)."""
    req = pattern.channels
    k = len(req)
    sel = np.isin(tags.channels, req)
    ch = tags.channels[sel].tolist()
    ts = tags.timestamps[sel].tolist()
    n = len(ts)
    used = [False] * n
    rel, starts = [], []
    half = pattern.window_ps / 2
    for i in range(n):
        if used[i]:
            continue
        found = {ch[i]: i}
        j = i + 1
        while len(found) < k and j < n and ts[j] - ts[i] <= half:
            if not used[j] and ch[j] not in found:
                found[ch[j]] = j
            j += 1
        if len(found) == k:
            for idx in found.values():
                used[idx] = True
            t = [ts[found[c]] for c in req]
            rel.append([x - t[0] for x in t[1:]])
            starts.append(ts[i])
    return CoincidenceResult(
        len(rel), np.array(rel, dtype=np.int64).reshape(len(rel), k - 1), np.array(starts, np.int64)
    )


@dataclass(frozen=True, eq=False)
class ClusterTable:
    """Per-cluster channel bitmask and first timestamp on every channel."""

    channel_ids: np.ndarray
    masks: np.ndarray
    first_times: np.ndarray = field(repr=False)
    n_ambiguous: int = 0

    def __len__(self):
        return len(self.masks)

    def bit(self, channel):
        idx = np.searchsorted(self.channel_ids, channel)
        if idx >= len(self.channel_ids) or self.channel_ids[idx] != channel:
            return None
        return int(idx)


def cluster_tags(tags: TimeTags, gate_ps=DEFAULT_GATE_PS) -> ClusterTable:
    """Split at gaps larger than ``gate_ps``; at most 63 distinct channels."""
    ids = np.unique(tags.channels)
    if len(ids) > 63:
        raise ValueError("cluster bitmasks support at most 63 channels")
    if len(tags) == 0:
        return ClusterTable(ids, np.zeros(0, np.uint64), np.zeros((0, len(ids)), np.int64))
    cid = np.concatenate([[0], np.cumsum(np.diff(tags.timestamps) > gate_ps)])
    chidx = np.searchsorted(ids, tags.channels)
    key = cid * len(ids) + chidx
    uk, first, counts = np.unique(key, return_index=True, return_counts=True)
    n_cl = int(cid[-1]) + 1
    ft = np.full((n_cl, len(ids)), np.iinfo(np.int64).min, np.int64)
    ft[uk // len(ids), uk % len(ids)] = tags.timestamps[first]
    masks = np.zeros(n_cl, np.uint64)
    np.bitwise_or.at(masks, uk // len(ids), (np.uint64(1) << (uk % len(ids)).astype(np.uint64)))
    ambiguous = len(np.unique((uk // len(ids))[counts > 1]))
    return ClusterTable(ids, masks, ft, ambiguous)


def count_clustered(table: ClusterTable, pattern: CoincidencePattern) -> CoincidenceResult:
    """Pattern counting on a :class:`ClusterTable`."""
    bits = [table.bit(c) for c in pattern.channels]
    k = len(bits)
    if any(b is None for b in bits):
        return CoincidenceResult(0, np.zeros((0, k - 1), np.int64), np.zeros(0, np.int64))
    req = np.uint64(sum(1 << b for b in bits))
    hit = (table.masks & req) == req
    t = table.first_times[hit][:, bits]
    ok = (t.max(axis=1) - t.min(axis=1)) <= pattern.window_ps / 2
    t = t[ok]
    return CoincidenceResult(int(ok.sum()), t[:, 1:] - t[:, :1], t.min(axis=1))


# --------------------------------------------------------------------------
# corrections


def subtract_background(signal, shifted, n_sources):
    """``signal - sum(shifted) / (n_sources - 1)``, clamped at zero.

    ``shifted`` holds the counts with each herald delayed in turn (one entry per
    source); every double emission shows up in ``n_sources - 1`` of them.
    """
    if n_sources < 2:
        raise ValueError("background subtraction needs at least 2 sources")
    signal = np.asarray(signal, dtype=float)
    total = np.sum(np.asarray(shifted, dtype=float), axis=0)
    return np.clip(signal - total / (n_sources - 1), 0, None)


def klyshko_normalize(counts, efficiencies, weights):
    """Divide each outcome's count by its output efficiencies and source weights.

    ``counts`` maps ``(input_pattern, output_pattern)`` to counts. The result
    is renormalized to sum 1.
    """
    eff = np.asarray(efficiencies, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(eff <= 0) or np.any(eff > 1):
        raise ValueError("efficiencies must lie in (0, 1]")
    if np.any(w <= 0):
        raise ValueError("source weights must be > 0")
    out = {}
    for (inp, outp), c in counts.items():
        out[(inp, outp)] = c / (np.prod(eff[list(outp)]) * np.prod(w[list(inp)]))
    total = sum(out.values())
    if total <= 0:
        return {k: 0.0 for k in out}
    return {k: v / total for k, v in out.items()}


def total_variation(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


# --------------------------------------------------------------------------
# synthetic streams


def herald_channel(source):
    return HERALD_BASE + int(source)


@dataclass(frozen=True)
class StreamSpec:
    """Layout and noise of a synthetic pulsed stream.

    Each pulse independently carries a sample with probability
    ``signal_prob``. Per source and pulse, ``herald_only_prob`` adds a lone
    herald click, ``double_prob`` a double emission (herald plus two signal
    photons from the same source) and ``single_prob`` a single heralded pair.
    Signal photons survive with the per-output ``efficiencies``.
    """

    rep_period_ps: int = 20_000
    offset_ps: int = 5_000
    signal_prob: float = 1e-3
    herald_only_prob: float = 0.0
    double_prob: float = 0.0
    single_prob: float = 0.0
    efficiencies: tuple | None = None

    def __post_init__(self):
        for name in ("signal_prob", "herald_only_prob", "double_prob", "single_prob"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 < self.signal_prob:
            raise ValueError("signal_prob must be > 0")


def export_timetags(samples, spec: StreamSpec, seed=None, circuit=None, n_sources=None,
                    single_sampler=None):
    """Place samples (and optional noise) into a pulsed tag stream.

    Returns ``(tags, truth)`` where ``truth`` counts the genuine samples that
    survived loss per ``(input, output)`` pattern. Noise photons need
    ``circuit`` (routing by ``|T|^2``) and take arrival times from
    ``single_sampler`` (a fitted one-photon :class:`BosonSampler`) if given,
    otherwise from the first sample's time spread. Noise events alone in a
    three-pulse neighbourhood are not written, since no herald-signal
    coincidence (direct or one-period delayed) can use them.
    """
    rng = np.random.default_rng(seed)
    n = len(samples)
    if n == 0:
        return TimeTags.empty(), {}
    n_pulses = int(np.ceil(n / spec.signal_prob))
    pulses = np.sort(rng.choice(n_pulses, size=n, replace=False))
    period, off = spec.rep_period_ps, spec.offset_ps

    chans, stamps = [], []
    truth = {}
    eff = None if spec.efficiencies is None else np.asarray(spec.efficiencies, float)
    for pulse, s in zip(pulses, samples):
        base = int(pulse) * period + off
        kept = True
        for o, t in zip(s.output_pattern, s.arrival_times):
            if eff is not None and rng.random() > eff[o]:
                kept = False
                continue
            chans.append(o)
            stamps.append(base + int(round(t)))
        for src in s.input_pattern:
            chans.append(herald_channel(src))
            stamps.append(base)
        if kept:
            key = (s.input_pattern, s.output_pattern)
            truth[key] = truth.get(key, 0) + 1

    noisy = spec.herald_only_prob or spec.double_prob or spec.single_prob
    if noisy:
        if circuit is None or n_sources is None:
            raise ValueError("noise injection needs the circuit and the number of sources")
        t_mat = circuit.matrix if isinstance(circuit, Interferometer) else np.asarray(circuit)
        ev_pulse, ev_src, ev_nph = [], [], []
        for src in range(n_sources):
            for n_ph, p in ((0, spec.herald_only_prob), (2, spec.double_prob), (1, spec.single_prob)):
                if p > 0:
                    k = rng.binomial(n_pulses, p)
                    ev_pulse.append(rng.integers(0, n_pulses, k))
                    ev_src.append(np.full(k, src))
                    ev_nph.append(np.full(k, n_ph))
        ev_pulse = np.concatenate(ev_pulse)
        ev_src = np.concatenate(ev_src)
        ev_nph = np.concatenate(ev_nph)
        occupied, cnt = np.unique(np.concatenate([pulses, ev_pulse]), return_counts=True)
        useful = (
            np.isin(ev_pulse, occupied[cnt > 1])
            | np.isin(ev_pulse - 1, occupied)
            | np.isin(ev_pulse + 1, occupied)
        )
        ev_pulse, ev_src, ev_nph = ev_pulse[useful], ev_src[useful], ev_nph[useful]
        bases = ev_pulse * period + off
        chans.extend((HERALD_BASE + ev_src).tolist())
        stamps.extend(bases.tolist())

        spread = np.array([t for s in samples for t in s.arrival_times]) if samples[0].arrival_times else np.zeros(1)
        for src in range(n_sources):
            # one row per emitted photon
            rows = np.repeat(np.flatnonzero(ev_src == src), ev_nph[ev_src == src])
            if len(rows) == 0:
                continue
            if single_sampler is not None:
                drawn = single_sampler.sample(len(rows), rng, input_pattern=(src,))
                outs = np.array([d.output_pattern[0] for d in drawn])
                dts = np.array([d.arrival_times[0] for d in drawn])
            else:
                probs = np.abs(t_mat[:, src]) ** 2
                outs = rng.choice(len(probs), size=len(rows), p=probs / probs.sum())
                dts = rng.choice(spread, size=len(rows))
            alive = np.ones(len(rows), bool) if eff is None else rng.random(len(rows)) <= eff[outs]
            chans.extend(outs[alive].tolist())
            stamps.extend((bases[rows[alive]] + np.round(dts[alive]).astype(np.int64)).tolist())
    tags = TimeTags(np.array(chans, np.int64), np.array(stamps, np.int64))
    # a non-number-resolving detector fires once per pulse
    key = (tags.timestamps // period) * (1 << 20) + tags.channels
    _, first = np.unique(key, return_index=True)
    first.sort()
    tags = TimeTags(tags.channels[first], tags.timestamps[first])
    return tags, truth


def scattershot_patterns(n_sources, n_modes, n_photons=2):
    """All (input, output) pattern pairs for heralded N-photon scattershot."""
    ins = list(itertools.combinations(range(n_sources), n_photons))
    outs = list(itertools.combinations(range(n_modes), n_photons))
    return [(i, o) for i in ins for o in outs]


# --------------------------------------------------------------------------
# full analysis chain


@dataclass(frozen=True, eq=False)
class StreamAnalysis:
    """Per-pattern counts of a heralded stream.

    ``signal[w][(inp, out)]`` and ``corrected[w][...]`` are counts inside
    window ``w`` (``|t_out2 - t_out1| <= w/2``); ``delays`` holds the raw
    signal relative delays per pattern and ``samples`` the signal events as
    ``(input, output, times relative to the heralds)``.
    """

    windows: tuple
    signal: dict
    shifted: dict
    corrected: dict
    distributions: dict
    delays: dict = field(repr=False)
    events: list = field(repr=False)
    n_ambiguous: int = 0


def _spread(rel_out):
    return rel_out.max(axis=1) - rel_out.min(axis=1) if rel_out.shape[1] else np.zeros(len(rel_out))


def analyze_stream(tags: TimeTags, n_sources, n_modes, rep_period_ps, windows=(np.inf,),
                   gate_ps=DEFAULT_GATE_PS, n_photons=2, efficiencies=None, weights=None,
                   subtract=True):
    """Virtual heralds, pattern counting, background subtraction, normalization."""
    for s in range(n_sources):
        spec = VirtualChannelSpec(herald_channel(s), rep_period_ps)
        tags = virtual_channel(tags, spec, rep_period_ps, strict=True)
    table = cluster_tags(tags, gate_ps)
    eff = np.ones(n_modes) if efficiencies is None else np.broadcast_to(
        np.asarray(efficiencies, float), (n_modes,))
    wts = np.ones(n_sources) if weights is None else np.broadcast_to(
        np.asarray(weights, float), (n_sources,))
    windows = tuple(float(w) for w in windows)

    signal = {w: {} for w in windows}
    shifted = {w: {} for w in windows}
    corrected = {w: {} for w in windows}
    delays, events = {}, []
    for inp in itertools.combinations(range(n_sources), n_photons):
        heralds = [herald_channel(s) for s in inp]
        for out in itertools.combinations(range(n_modes), n_photons):
            res = count_clustered(table, CoincidencePattern(heralds + list(out), gate_ps))
            rel_out = res.relative_times[:, n_photons - 1:]
            spread = _spread(rel_out)
            delays[(inp, out)] = rel_out[:, 1] - rel_out[:, 0] if n_photons == 2 else spread
            events.extend((inp, out, tuple(r)) for r in rel_out.tolist())
            shift_spreads = []
            for k in range(n_photons):
                chans = list(heralds)
                chans[k] = VIRTUAL_BASE + heralds[k]
                rs = count_clustered(table, CoincidencePattern(chans + list(out), gate_ps))
                shift_spreads.append(_spread(rs.relative_times[:, n_photons - 1:]))
            for w in windows:
                sig = int(np.sum(spread <= w / 2))
                sh = [int(np.sum(s <= w / 2)) for s in shift_spreads]
                signal[w][(inp, out)] = sig
                shifted[w][(inp, out)] = sh
                corrected[w][(inp, out)] = (
                    float(subtract_background(sig, sh, n_photons)) if subtract else float(sig)
                )
    dists = {w: klyshko_normalize(corrected[w], eff, wts) for w in windows}
    return StreamAnalysis(windows, signal, shifted, corrected, dists, delays, events,
                          table.n_ambiguous)


def delayed_pair_counts(tags: TimeTags, herald_a, herald_b, outputs, rep_period_ps,
                        windows=(np.inf,), gate_ps=DEFAULT_GATE_PS):
    """Coincidences between photon A of one pulse and photon B of the next.

    Herald A and A's output are copied one period later and matched with
    herald B and a different output in that pulse. The photons were made in
    different pulses, so they cannot interfere. Returns counts per window
    summed over ordered output pairs.
    """
    counts = {float(w): 0 for w in windows}
    for x in outputs:
        for y in outputs:
            if x == y:
                continue
            t = tags
            for ch in (herald_a, x):
                t = virtual_channel(t, VirtualChannelSpec(ch, rep_period_ps), rep_period_ps)
            table = cluster_tags(t, gate_ps)
            pat = CoincidencePattern((VIRTUAL_BASE + herald_a, herald_b, VIRTUAL_BASE + x, y), gate_ps)
            res = count_clustered(table, pat)
            tau = np.abs(res.relative_times[:, 2] - res.relative_times[:, 1])
            for w in counts:
                counts[w] += int(np.sum(tau <= w / 2))
    return counts

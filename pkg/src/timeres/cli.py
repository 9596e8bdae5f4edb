"""Command-line front end: ``timeres {hom,fusion,scattershot,projections,analyze}``."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, default_config, load_config, serialize_config
from .timetags import TimeTagFormatError

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario config file (INI)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--windows", type=_floats, help="timing windows in ps, e.g. 200,100,50,20")
    common.add_argument("--detuning-ghz", type=float, help="detuning between the two sources")
    common.add_argument("--linewidth-ghz", type=float, help="ring linewidth for every source")
    common.add_argument("--jitter-det-ps", type=float, help="detector FWHM per channel")
    common.add_argument("--jitter-tag-ps", type=float, help="tagger FWHM per channel")
    common.add_argument("--samples", type=int)
    common.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")

    p = argparse.ArgumentParser(prog="timeres", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("hom", parents=[common], help="two-photon MZI fringes vs timing window")
    sub.add_parser("fusion", parents=[common], help="F4 fusion fringes and fidelities")
    s = sub.add_parser("scattershot", parents=[common], help="sampling and Bayesian validation")
    s.add_argument("--export-tags", action="store_true", help="also write a synthetic tag stream")
    sub.add_parser("projections", parents=[common], help="projected visibility vs detuning")
    a = sub.add_parser("analyze", parents=[common], help="analyze a time-tag file")
    a.add_argument("timetags", help="CSV of channel,timestamp_ps")
    return p


def resolve_config(args):
    cfg = default_config(args.command)
    if args.config:
        cfg = load_config(args.config, cfg)
    over = {"name": args.command, "seed": args.seed, "out_dir": args.out, "samples": args.samples}
    if args.windows is not None:
        over["windows_ps"] = args.windows
    n = len(cfg.detunings_ghz)
    if args.detuning_ghz is not None:
        if n == 2:
            over["detunings_ghz"] = [-args.detuning_ghz / 2, args.detuning_ghz / 2]
        else:
            # keep the aligned/detuned grouping, rescale the split
            sign = [1 if d >= 0 else -1 for d in cfg.detunings_ghz]
            over["detunings_ghz"] = [s * args.detuning_ghz / 2 for s in sign]
    if args.linewidth_ghz is not None:
        over["linewidths_ghz"] = [args.linewidth_ghz] * n
    if args.jitter_det_ps is not None:
        over["detector_fwhm_ps"] = [args.jitter_det_ps]
    if args.jitter_tag_ps is not None:
        over["tagger_fwhm_ps"] = [args.jitter_tag_ps]
    return cfg.with_overrides(**over)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dump_config:
        print(serialize_config(cfg))
        return EXIT_OK

    from . import scenarios

    try:
        if args.command == "hom":
            rep = scenarios.run_hom(cfg)
        elif args.command == "fusion":
            rep = scenarios.run_fusion(cfg)
        elif args.command == "scattershot":
            rep = scenarios.run_scattershot(cfg, export_tags=args.export_tags)
        elif args.command == "projections":
            rep = scenarios.run_projections(cfg)
        else:
            rep = scenarios.run_analyze(args.timetags, cfg)
    except (TimeTagFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _summarize(args.command, rep)
    return EXIT_OK


def _summarize(command, rep):
    if command in ("hom", "fusion"):
        for w, (v, e) in rep.visibilities.items():
            extra = f"  F={rep.fidelities[w]:.3f}" if rep.fidelities else ""
            print(f"window {w:g} ps: V={v:.3f} +/- {e:.3f}{extra}")
    elif command == "scattershot":
        for w, p in zip(rep.windows, rep.window_posteriors):
            print(f"window {w:g} ps: P(test)={p:.3f}")
        print(f"crossing: {rep.crossing_ps}")
        print(f"time-resolved P(test)={rep.time_resolved_posterior:.4f}")
    elif command == "projections":
        for fwhm in rep.visibilities:
            print(f"jitter {fwhm:g} ps: V>=0.5 up to {rep.threshold(fwhm, 0.5)} GHz, "
                  f"V>=0.95 up to {rep.threshold(fwhm, 0.95)} GHz")
    else:
        an = rep.analysis
        n = sum(an.signal[an.windows[0]].values()) if an.windows else 0
        print(f"signal events in widest window: {n}")
        for w, p in rep.posteriors.items():
            print(f"window {w:g} ps: P(test)={p:.3f}")


if __name__ == "__main__":
    sys.exit(main())

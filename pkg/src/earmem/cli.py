"""Command-line front end.

Every command prints its resolved configuration, including the master
seed, as one JSON line before doing any work.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import __version__
from .data import DEFAULT_BANDS, Segment
from .errors import EarmemError
from .evaluation import cross_validate, load_report
from .io import load_epochs, load_recording, save_epochs
from .pipelines import METHODS, PipelineParams, fit_pipeline, save_pipeline
from .report import compare, spectra_csv, spectra_svg
from .sigproc import preprocess, spectra_difference
from .synth import SynthSpec, generate

SEGMENTS = {"pre": Segment.PRE_STIMULUS, "ongoing": Segment.ON_GOING}


def _echo(command: str, config: Dict[str, Any], seed: Optional[int] = None) -> None:
    print(json.dumps({"command": command, "config": config, "seed": seed, "version": __version__},
                     sort_keys=True))


def _params(args) -> PipelineParams:
    return PipelineParams(m=args.m, gamma=args.gamma, shrinkage=args.shrinkage,
                          epochs=args.epochs, lr=args.lr, batch_size=args.batch_size)


def cmd_synth(args) -> None:
    raw = json.loads(Path(args.spec).read_text())
    if args.seed is not None:
        raw["seed"] = args.seed
    spec = SynthSpec.from_dict(raw)
    _echo("synth", {"spec": spec.to_dict(), "out": args.out}, spec.seed)
    save_epochs(generate(spec), args.out)


def cmd_preprocess(args) -> None:
    _echo("preprocess", {"in": args.inp, "segment": args.segment, "out": args.out,
                         "target_fs": args.target_fs, "strict": not args.lenient})
    rec = load_recording(args.inp)
    epochs = preprocess(rec, SEGMENTS[args.segment], args.target_fs, strict=not args.lenient)
    epochs.provenance = {"source": Path(args.inp).name, "segment": args.segment,
                         "steps": ["decimate", "bandpass 0.5-40 Hz order 5", "epoch 1 s"],
                         "source_fs": rec.fs}
    save_epochs(epochs, args.out)


def cmd_train(args) -> None:
    params = _params(args)
    _echo("train", {"in": args.inp, "method": args.method, "model_out": args.model_out,
                    "params": params.for_method(args.method)}, args.seed)
    epochs = load_epochs(args.inp)
    fitted = fit_pipeline(args.method, epochs, args.seed, params)
    save_pipeline(fitted, args.model_out, params, args.seed)


def cmd_evaluate(args) -> None:
    params = _params(args)
    _echo("evaluate", {"in": args.inp, "method": args.method, "k": args.k, "report": args.report,
                       "params": params.for_method(args.method)}, args.seed)
    report = cross_validate(load_epochs(args.inp), args.method, args.k, args.seed, params)
    report.write(args.report)
    print(f"{args.method}: {100 * report.mean:.2f} ± {100 * report.std:.2f} % "
          f"over {args.k} folds")


def cmd_spectra(args) -> None:
    _echo("spectra", {"in": args.inp, "out": args.out, "svg": args.svg,
                      "bands": [b.to_dict() for b in DEFAULT_BANDS]})
    epochs = load_epochs(args.inp)
    diff = spectra_difference(epochs, DEFAULT_BANDS)
    Path(args.out).write_text(spectra_csv(diff, DEFAULT_BANDS, epochs.channel_names))
    if args.svg:
        Path(args.svg).write_text(spectra_svg(diff, DEFAULT_BANDS, epochs.channel_names))


def cmd_compare(args) -> None:
    _echo("compare", {"reports": args.reports, "out": args.out})
    table = compare([load_report(p) for p in args.reports])
    out = Path(args.out)
    out.write_text(table.to_json() if out.suffix.lower() == ".json" else table.to_csv(),
                   encoding="utf-8")


def _add_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int, default=3, help="CSP filter pairs")
    p.add_argument("--gamma", type=float, default=0.1, help="LDA shrinkage")
    p.add_argument("--shrinkage", type=float, default=0.0, help="CSP covariance shrinkage")
    p.add_argument("--epochs", type=int, default=100, help="CNN training epochs")
    p.add_argument("--lr", type=float, default=1e-3, help="CNN Adam learning rate")
    p.add_argument("--batch-size", type=int, default=32, help="CNN minibatch size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="earmem", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"earmem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic epoch container")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the seed in the synthesis spec file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="decimate, filter and epoch a recording container")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--segment", choices=sorted(SEGMENTS), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target-fs", type=float, default=250.0)
    p.add_argument("--lenient", action="store_true", help="drop events without full margins")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="fit one pipeline on all epochs")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_params(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="k-fold cross-validation report")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True, help="FILE.json or FILE.csv")
    _add_params(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("spectra", help="per-band, per-channel condition difference")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("compare", help="table of methods with rank tests")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (EarmemError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"earmem {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""``kwsbench`` command line: footprint, features, classify, bench, stats, init-weights.

Exit codes: 0 success, 1 usage error, 2 runtime error. Runtime errors print a
single ``error: <category>: <detail>`` line on stderr.
"""
import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import footprint, frontend, powerbench, stats, zoo
from .errors import KwsError

LABELS = ("yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go",
          "silence", "unknown")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _fmt(value):
    return f"{float(value):.8g}"


def _write_or_print(text, out, stdout):
    if out:
        Path(out).write_text(text)
    else:
        stdout.write(text)


def _model(args):
    spec = zoo.load_arch(args.arch)
    if args.weights:
        weights = zoo.load_weights(args.weights, spec)
    else:
        weights = zoo.init_weights(spec, args.seed)
    return zoo.Model(spec, weights)


def cmd_footprint(args, stdout):
    spec = zoo.load_arch(args.arch)
    report = footprint.model_footprint(spec)
    stdout.write(footprint.render_table(spec, report))
    if args.csv:
        Path(args.csv).write_text(footprint.render_csv(report))


def cmd_features(args, stdout):
    mfcc = frontend.extract_mfcc(frontend.load_wav(args.wav))
    text = "".join(",".join(_fmt(v) for v in row) + "\n" for row in mfcc)
    _write_or_print(text, args.out, stdout)


def labels_for(n_labels):
    return LABELS if n_labels == len(LABELS) else tuple(f"class{i}" for i in range(n_labels))


def classify(model: zoo.Model, wav_paths):
    """(path, label, posterior) per file; ties go to the lowest class index."""
    labels = labels_for(model.spec.n_labels)
    results = []
    for path in wav_paths:
        posterior = model(frontend.extract_mfcc(frontend.load_wav(path)))
        results.append((str(path), labels[int(np.argmax(posterior))], posterior))
    return results


def cmd_classify(args, stdout):
    model = _model(args)
    labels = labels_for(model.spec.n_labels)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["file", "label", *labels])
    for path, label, posterior in classify(model, args.wavs):
        writer.writerow([path, label, *(_fmt(p) for p in posterior)])
    stdout.write(buf.getvalue())


def cmd_bench(args, stdout):
    try:
        sampler = powerbench.parse_sampler(args.sampler)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model = None if args.features_only else _model(args)
    result, trace = powerbench.run_bench(model, args.data, sampler, args.idle_watts,
                                         trials=args.trials,
                                         include_features=args.include_features)
    text = result.to_csv()
    stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    if args.trace_out:
        Path(args.trace_out).write_text(trace.to_csv())


def cmd_stats(args, stdout):
    fit, scatter = stats.correlate_table(args.table, args.x, args.y)
    stdout.write(f"x = {args.x}, y = {args.y}\n"
                 f"slope = {_fmt(fit.slope)}\n"
                 f"intercept = {_fmt(fit.intercept)}\n"
                 f"r_squared = {fit.r_squared:.4f}\n"
                 f"p_value = {fit.p_value:.4g}\n"
                 f"n = {fit.n}\n")
    if args.scatter:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([args.x, args.y, "fitted"])
        writer.writerows([_fmt(x), _fmt(y), _fmt(f)] for x, y, f in scatter)
        Path(args.scatter).write_text(buf.getvalue())


def cmd_init_weights(args, stdout):
    spec = zoo.load_arch(args.arch)
    zoo.save_weights(args.out, zoo.init_weights(spec, args.seed))
    stdout.write(f"wrote {args.out} for {spec.name} (seed {args.seed})\n")


def build_parser():
    parser = _Parser(prog="kwsbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("footprint", help="parameter / multiply table for an architecture")
    p.add_argument("--arch", required=True, help="builtin name or .arch file")
    p.add_argument("--csv", help="also write exact integer counts to this CSV")
    p.set_defaults(func=cmd_footprint)

    p = sub.add_parser("features", help="print the 101x40 MFCC matrix of a WAV file as CSV")
    p.add_argument("wav")
    p.add_argument("--out")
    p.set_defaults(func=cmd_features)

    def model_flags(p, required=True):
        p.add_argument("--arch", required=required, help="builtin name or .arch file")
        p.add_argument("--weights", help="KWSW weight file (default: dummy weights from --seed)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("classify", help="label WAV clips")
    model_flags(p)
    p.add_argument("wavs", nargs="+")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("bench", help="latency / energy / peak power over a dataset")
    model_flags(p, required=False)
    p.add_argument("--data", required=True, help="<root>/<class>/*.wav")
    p.add_argument("--sampler", default="synthetic", help="synthetic[:watts] or replay:<file>")
    p.add_argument("--idle-watts", type=float, default=powerbench.DEFAULT_IDLE_WATTS)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--include-features", action="store_true",
                   help="count feature extraction in latency")
    p.add_argument("--features-only", action="store_true",
                   help="run the front-end alone, no model")
    p.add_argument("--out", help="result CSV")
    p.add_argument("--trace-out", help="raw power trace CSV")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="OLS fit between two columns of a results table")
    p.add_argument("--table", help="results CSV (default: bundled table4.csv)")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--scatter", help="write x, y, fitted rows here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("init-weights", help="write deterministic dummy weights")
    p.add_argument("--arch", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_weights)
    return parser


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        if args.command == "bench" and not args.features_only and not args.arch:
            raise UsageError("bench: --arch is required unless --features-only is given")
        args.func(args, stdout)
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return 1
    except KwsError as exc:
        stderr.write(f"error: {exc.category}: {exc}\n")
        return 2
    except OSError as exc:
        stderr.write(f"error: io: {exc}\n")
        return 2
    except ValueError as exc:
        stderr.write(f"error: value: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``odcreg {train,predict,sweep,bench,inspect-model}``.

Exit status is 0 on success, 2 for configuration errors and 3 for data or
model-file errors.
"""

import argparse
import json
import sys
from dataclasses import fields

import numpy as np

from .exceptions import (
    CorruptModelError,
    FormatError,
    IncompatibleVersionError,
    InvalidConfigError,
    OdcError,
)
from .experiment import ExperimentConfig, load_data, resolve_hyper, run_experiment, speedup_bench
from .io import load_model, read_manifest, read_matrix, save_model
from .metrics import mean_error
from .odc import OdcConfig
from .predict import fit_odc, predict_batch

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

_LIST_FIELDS = {"M": int, "p": float, "t": float, "Kprime": int, "modes": str}
_SCALARS = {int: int, float: float, str: str}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _comma_list(cast):
    def parse(text):
        try:
            return [cast(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a list") from None

    return parse


def _bool(text):
    v = str(text).lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _hyper(text):
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise argparse.ArgumentTypeError(f"hyper is not valid JSON: {exc}") from None
    return text


def _add_config_flags(parser):
    parser.add_argument("--config", help="JSON experiment config; flags override its fields")
    for f in fields(ExperimentConfig):
        flag = f"--{f.name}"
        kw = {"default": argparse.SUPPRESS, "dest": f.name}
        if f.name in _LIST_FIELDS:
            kw.update(type=_comma_list(_LIST_FIELDS[f.name]), metavar="V1,V2,...")
        elif f.name == "hyper":
            kw.update(type=_hyper, metavar="PRESET|JSON")
        elif f.type is bool:
            kw.update(type=_bool, nargs="?", const=True, metavar="BOOL")
        else:
            kw.update(type=_SCALARS.get(f.type, str))
        parser.add_argument(flag, **kw)


def _config_from(args):
    base = {}
    if getattr(args, "config", None):
        base = ExperimentConfig.from_json(args.config).to_dict()
    names = {f.name for f in fields(ExperimentConfig)}
    base.update({k: v for k, v in vars(args).items() if k in names})
    return ExperimentConfig.from_dict(base)


def _emit(report, cfg):
    if cfg.report:
        report.write(cfg.report, cfg.format)
    else:
        sys.stdout.write(report.to_json() + "\n" if cfg.format == "json" else report.to_csv())


def cmd_train(args):
    cfg = _config_from(args)
    if not cfg.model:
        raise InvalidConfigError("train needs --model PATH for the archive")
    train, _ = load_data(cfg)
    oc = OdcConfig(M=cfg.M[0], p=cfg.p[0], t=cfg.t[0], Kprime=cfg.Kprime[0],
                   machine_kind=cfg.machine_kind, clustering_kind=cfg.clustering_kind)
    model = fit_odc(train.X, train.Y, oc, resolve_hyper(cfg), seed=cfg.seed, n_jobs=cfg.n_jobs,
                    feature_names=train.feature_names, output_names=train.output_names)
    save_model(model, cfg.model)
    summary = {"model": cfg.model, "K": model.K, "t_c": model.meta["t_c"], "t_p": model.meta["t_p"],
               **oc.to_dict()}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_predict(args):
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise FormatError(f"cannot open model: {exc.strerror}", args.model) from None
    X, _, _ = read_matrix(args.features)
    n_jobs = 1 if args.deterministic else args.n_jobs
    P = predict_batch(model, X, Kprime=args.Kprime, n_jobs=n_jobs)
    names = model.meta.get("output_names") or [f"y{j}" for j in range(P.shape[1])]
    lines = [",".join(names)] + [",".join(repr(float(v)) for v in row) for row in P]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.outputs:
        Y, _, _ = read_matrix(args.outputs)
        if Y.shape != P.shape:
            raise FormatError(f"outputs have shape {Y.shape}, predictions {P.shape}", args.outputs)
        err = mean_error(args.metric, P, Y, args.joints)
        print(json.dumps({"metric": args.metric, "error": err}), file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config_from(args)
    _emit(run_experiment(cfg), cfg)
    return EXIT_OK


def cmd_bench(args):
    cfg = _config_from(args)
    report, slopes = speedup_bench(cfg)
    _emit(report, cfg)
    print(json.dumps({"slope_odc": slopes["odc"], "slope_nn": slopes["nn"]}), file=sys.stderr)
    return EXIT_OK


def cmd_inspect(args):
    manifest = read_manifest(args.model)
    if not args.blocks:
        manifest = {k: v for k, v in manifest.items() if k != "blocks"}
        manifest["subdomains"] = len(manifest["subdomains"])
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = _ArgumentParser(prog="odcreg", description="Overlapping domain cover regression")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = sub.add_parser("train", help="train one ODC model and save it")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict a feature CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--outputs", help="ground truth CSV; prints the error to stderr")
    p.add_argument("--out", help="prediction CSV (default: stdout)")
    p.add_argument("--Kprime", type=int)
    p.add_argument("--metric", default="euclidean", choices=["euclidean", "angle_deg"])
    p.add_argument("--joints", type=int)
    p.add_argument("--n_jobs", type=int, default=1)
    p.add_argument("--deterministic", type=_bool, nargs="?", const=True, default=False)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="run a (M, p, t, K') sweep and write a report")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="time ODC against the per-query NN scheme")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect-model", help="print a model archive's manifest")
    p.add_argument("model")
    p.add_argument("--blocks", action="store_true", help="include the block table")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, CorruptModelError, IncompatibleVersionError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OdcError, np.linalg.LinAlgError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

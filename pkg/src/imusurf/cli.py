"""Command-line entry point: ``imusurf <subcommand> ...``.

Every run first prints ``config=<json>`` with the fully resolved settings.
Failures print a single ``kind=error type=<name> message="..."`` line on
stderr and exit non-zero (2 for usage and configuration errors, 1 otherwise).

Training options may also come from a JSON file (``--config``) holding any
of the ``TrainConfig`` fields plus ``arch``/``hidden``; flags override it.
"""
import argparse
import json
import os
import sys
import warnings
from dataclasses import asdict

from .dataset import Stream, load_manifest
from .errors import ConfigError, ImuSurfError
from .evaluation import (evaluate, evaluation_record, format_accuracy_table, format_class_table)
from .model import ArchSpec, count_parameters, model_load, model_save
from .pipeline import all_windows, fit_on_series, load_split
from .preprocess import preprocessor_load, preprocessor_save
from .stream import format_event, replay, serve, decision_line, alert_line, Decision
from .synth import SynthSpec, gen_synth
from .training import TrainConfig, checkpoint, resume, train_with_state

TRAIN_KEYS = {"batch_size", "epochs", "learning_rate", "beta1", "beta2", "eps", "seed",
              "shuffle", "class_weighting", "clip_norm"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit_config(cfg):
    print("config=" + json.dumps(cfg, sort_keys=True, default=str), flush=True)


def _add_split(p):
    p.add_argument("--manifest", required=True, help="dataset manifest file")
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--split-seed", type=int, default=0)


def _split_settings(args):
    return {"manifest": args.manifest,
            "test_fraction": 0.2 if args.test_fraction is None else args.test_fraction,
            "split_seed": args.split_seed}


def cmd_gen_synth(args):
    spec = SynthSpec(samples_per_class=args.samples, seed=args.seed, stream=Stream(args.stream))
    _emit_config({"command": "gen-synth", "out": args.out, "samples_per_class": args.samples,
                  "seed": args.seed, "stream": args.stream})
    manifest = gen_synth(spec, args.out)
    for e in manifest:
        print(f"wrote {e.path}")
    print(f"wrote {os.path.join(args.out, 'manifest.txt')}")


def cmd_fit_preproc(args):
    cfg = _split_settings(args) | {"command": "fit-preproc", "k": args.k, "out": args.out}
    _emit_config(cfg)
    data = load_split(load_manifest(args.manifest), cfg["test_fraction"], args.split_seed)
    pp = fit_on_series(data.train_series, args.k)
    preprocessor_save(pp, args.out)
    flagged = [c for c, bad in zip("ax ay az gx gy gz".split(), pp.scaler.degenerate) if bad]
    print(f"preprocessor fingerprint={pp.fingerprint} k={pp.k} "
          f"degenerate={','.join(flagged) or 'none'}")


def _resolve_train(args):
    file_cfg = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - TRAIN_KEYS - {"arch", "hidden"}
        if unknown:
            raise ConfigError(f"unknown keys in {args.config}: {sorted(unknown)}")
    flags = {k: getattr(args, k) for k in TRAIN_KEYS | {"arch", "hidden"}
             if getattr(args, k, None) is not None}
    if "arch" in flags and "hidden" in flags:
        raise ConfigError("--arch and --hidden are mutually exclusive")
    merged = file_cfg | flags
    if "hidden" in flags:
        merged.pop("arch", None)
    elif "arch" in flags:
        merged.pop("hidden", None)
    train_cfg = TrainConfig(**{k: v for k, v in merged.items() if k in TRAIN_KEYS})
    return merged, train_cfg


def cmd_train(args):
    merged, train_cfg = _resolve_train(args)
    pp = preprocessor_load(args.preproc) if args.preproc else None
    k = pp.k if pp else 6
    if "hidden" in merged:
        spec = ArchSpec(input_dim=k, hidden=int(merged["hidden"]))
    else:
        spec = ArchSpec.named(merged.get("arch", "small"), input_dim=k)
    ckpt = resume(args.resume) if args.resume else None

    cfg = _split_settings(args) | {
        "command": "train", "arch": merged.get("arch"), "spec": asdict(spec),
        "parameters": count_parameters(spec), "train": asdict(train_cfg),
        "preproc": args.preproc, "out": args.out, "resume": args.resume,
        "checkpoint": args.checkpoint}
    _emit_config(cfg)
    print(f"parameters={count_parameters(spec)} hidden={spec.hidden}", flush=True)

    data = load_split(load_manifest(args.manifest), cfg["test_fraction"], args.split_seed)
    if pp is None:
        pp = fit_on_series(data.train_series)
        pp_path = os.path.splitext(args.out)[0] + ".preproc.json"
        preprocessor_save(pp, pp_path)
        print(f"fitted preprocessor {pp.fingerprint} -> {pp_path}")
    model, history, state = train_with_state(
        data.train_windows(), data.test_windows(), pp, spec, train_cfg,
        resume_from=ckpt, log_path=args.log)
    for rec in history:
        print(rec.format())
    model_save(model, args.out)
    if args.checkpoint:
        checkpoint(model, state.optimizer, history, args.checkpoint, train_cfg)
    print(f"saved model -> {args.out}")


def cmd_eval(args):
    if args.no_split and args.test_fraction is not None:
        raise ConfigError("--no-split conflicts with --test-fraction")
    cfg = _split_settings(args) | {"command": "eval", "model": args.model,
                                   "preproc": args.preproc, "no_split": args.no_split}
    _emit_config(cfg)
    model, pp = _load_pair(args)
    manifest = load_manifest(args.manifest)
    if args.no_split:
        series = manifest.load()
    else:
        series = load_split(manifest, cfg["test_fraction"], args.split_seed).test_series
    ev = evaluate(model, pp, all_windows(series))
    size = "large" if model.spec.hidden >= 20 else "small"
    streams = {s.stream.value[:3] for s in series}
    title = f"{count_parameters(model.spec)}p/{'+'.join(sorted(streams))}"
    print(f"Accuracy ({size}, windows={ev.confusion.total})")
    print(format_accuracy_table({title: ev}))
    print()
    print(format_class_table(ev.metrics))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(evaluation_record(ev, model=args.model, manifest=args.manifest), fh, indent=1)


def _load_pair(args):
    pp = preprocessor_load(args.preproc)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = model_load(args.model, pp)
    for w in caught:
        print(format_event("warning", message=str(w.message)), flush=True)
    return model, pp


def cmd_stream(args):
    _emit_config({"command": "stream", "model": args.model, "preproc": args.preproc})
    model, pp = _load_pair(args)
    serve(sys.stdin, lambda line: print(line, flush=True), model, pp)


def cmd_replay(args):
    _emit_config({"command": "replay", "csv": args.csv, "model": args.model,
                  "preproc": args.preproc, "realtime": args.realtime})
    model, pp = _load_pair(args)
    consecutive = 0
    for ev in replay(args.csv, model, pp, realtime=args.realtime):
        if isinstance(ev, Decision):
            consecutive = min(consecutive + 1, 3) if ev.slippery else 0
            print(decision_line(ev, consecutive))
        else:
            print(alert_line(ev))


def cmd_inspect(args):
    _emit_config({"command": "inspect", "model": args.model, "preproc": args.preproc})
    pp = preprocessor_load(args.preproc) if args.preproc else None
    model = model_load(args.model)
    print(f"spec={json.dumps(asdict(model.spec), sort_keys=True)}")
    print(f"parameters={count_parameters(model.spec)}")
    print(f"preprocessor_fingerprint={model.preprocessor_fingerprint}")
    if pp is not None:
        match = pp.fingerprint == model.preprocessor_fingerprint
        print(f"preproc_file_fingerprint={pp.fingerprint} match={int(match)}")


def build_parser():
    parser = _Parser(prog="imusurf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=4000, help="samples per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", choices=[s.value for s in Stream], default="external")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("fit-preproc", help="fit scaler + PCA on the training split")
    _add_split(p)
    p.add_argument("--k", type=int, default=6, help="PCA components kept")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_preproc)

    p = sub.add_parser("train", help="train a GRU classifier")
    _add_split(p)
    p.add_argument("--preproc", help="fitted preprocessor (fit on the train split if absent)")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--config", help="JSON file with training options")
    p.add_argument("--arch", choices=["small", "large"])
    p.add_argument("--hidden", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    p.add_argument("--class-weighting", dest="class_weighting", action="store_true", default=None)
    p.add_argument("--no-shuffle", dest="shuffle", action="store_false", default=None)
    p.add_argument("--checkpoint", help="write a resumable checkpoint here")
    p.add_argument("--resume", help="continue from a checkpoint")
    p.add_argument("--log", help="append one key=value line per epoch")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy and per-class metrics")
    _add_split(p)
    p.add_argument("--model", required=True)
    p.add_argument("--preproc", required=True)
    p.add_argument("--no-split", action="store_true", help="evaluate every manifest entry")
    p.add_argument("--json", help="also write a machine-readable record")
    p.set_defaults(func=cmd_eval)

    for name, func, helptext in (("stream", cmd_stream, "detector over stdin lines"),
                                 ("replay", cmd_replay, "detector over a CSV file")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--model", required=True)
        p.add_argument("--preproc", required=True)
        if name == "replay":
            p.add_argument("--csv", required=True)
            p.add_argument("--realtime", action="store_true", help="pace at 50 Hz")
        p.set_defaults(func=func)

    p = sub.add_parser("inspect", help="print model metadata")
    p.add_argument("--model", required=True)
    p.add_argument("--preproc")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except UsageError as exc:
        print(format_event("error", type="usage", message=str(exc)), file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(format_event("error", type="config", message=str(exc)), file=sys.stderr)
        return 2
    except (ImuSurfError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(format_event("error", type=type(exc).__name__, message=str(exc)), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""``toriclab`` command line.

Every run resolves its settings from built-in defaults, then an optional
``--config`` file, then explicit flags, and writes a JSON manifest next to its
outputs.  ``--replay MANIFEST`` re-runs a manifest's resolved settings.

Errors print one JSON line to stderr and exit with a code per error family:
2 usage, 3 config, 4 missing file, 5 bad file contents, 6 no threshold
crossing or failed check, 7 training divergence, 1 anything else.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import platform
import sys

import numpy as np

from .. import __version__
from ..errors import ConfigError, FormatError, IncompatibleModel, NoCrossing, TrainingDiverged
from ..noise import NoiseSpec, parse_eta
from . import config as cfgmod

OUT_DIR_ENV = "TORICLAB_OUT_DIR"

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_CONFIG, EXIT_MISSING, EXIT_FORMAT, EXIT_CHECK, EXIT_DIVERGED = range(8)


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    pass


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_str(v):
    return None if v in (None, "", "none", "None") else str(v)


def _grid(v):
    return cfgmod.parse_grid(v)


def _ints(v):
    return cfgmod.parse_list(v, int)


def _etas(v):
    return cfgmod.parse_list(v, parse_eta)


def _strs(v):
    return cfgmod.parse_list(v, str)


# name -> (type, default, help)
_NOISE = {
    "noise": (str, "bitflip", "bitflip | phaseflip | depolarizing | bitphaseflip | biased"),
    "eta": (parse_eta, None, "bias for --noise biased (number or inf)"),
    "measurement_noise": (_bool, False, "flip each syndrome bit with probability p"),
}
_MODELS = {
    "low_model": (_opt_str, None, "low-level model file (first round)"),
    "low_model_2": (_opt_str, None, "low-level model for later rounds (default: --low-model)"),
    "high_model": (_opt_str, None, "high-level model file"),
    "oracle_high": (_bool, False, "use the ground-truth high-level oracle"),
    "n_max": (int, 6, "maximum low-level rounds"),
    "threshold_t": (float, 0.5, "logical confidence threshold"),
    "mwpm_policy": (str, "fail", "odd-parity handling: fail | leave"),
}
_NET = {
    "channels": (_opt_str, None, "comma list of U-Net channels (default by d)"),
    "fusion_channels": (int, 32, "3-D fusion channels"),
    "fusion_blocks": (int, 2, "3-D fusion blocks"),
    "attention": (_bool, True, "enable attention blocks"),
}

COMMANDS = {
    "gen-data": {
        "d": (int, 5, "code distance"), "p": (float, 0.05, "physical error rate"), **_NOISE,
        "n": (int, 20000, "samples"), "seed": (int, 0, "RNG seed"),
        "kind": (str, "low", "low | high"), "low_model": (_opt_str, None, "model producing high-level recoveries"),
        "strict": (_bool, True, "strict '<' in the labeling rule"), "out": (str, "dataset.tqec", "output file"),
    },
    "train": {
        "data": (str, None, "training dataset file"), "val_data": (_opt_str, None, "validation dataset file"),
        "kind": (_opt_str, None, "low | high (default: dataset kind)"), **_NET,
        "init": (_opt_str, None, "initialize from this model file (transfer)"),
        "epochs": (int, 10, "epochs"), "batch_size": (int, 64, "minibatch size"), "lr": (float, 0.01, "learning rate"),
        "weight_decay": (float, 1e-4, "decoupled weight decay"), "milestones": (_ints, [30, 40], "LR decay epochs"),
        "augment": (_bool, True, "random toroidal shifts"), "seed": (int, 0, "RNG seed"),
        "checkpoints": (str, "none", "none | all | last"), "out": (str, "model.tqnn", "output model file"),
    },
    "eval": {
        "decoder": (str, "mwpm", "mwpm | sunetqd | enhanced_mwpm"), "d": (int, 5, "code distance"),
        "p": (_grid, [0.05], "error rates: list or start:stop:step"), **_NOISE,
        "n": (int, 20000, "samples per point"), "seed": (int, 0, "RNG seed"), **_MODELS,
        "workers": (int, 1, "worker processes"),
    },
    "threshold": {
        "input": (_opt_str, None, "CSV with columns p, ler, d (skip sampling)"),
        "decoder": (str, "mwpm", "decoder to sample when no --input"), "ds": (_ints, [5, 7, 9], "distances"),
        "p": (_grid, [0.07, 0.08, 0.09, 0.1, 0.11, 0.12, 0.13], "p grid"), **_NOISE,
        "n": (int, 5000, "samples per point"), "seed": (int, 0, "RNG seed"), **_MODELS,
        "workers": (int, 1, "worker processes"),
    },
    "sweep-eta": {
        "decoders": (_strs, ["mwpm"], "comma list of decoders"), "etas": (_etas, [0.5, 5, 50, math.inf], "bias values"),
        "ds": (_ints, [5, 7, 9], "distances"), "p": (_grid, [0.05, 0.07, 0.09, 0.11, 0.13, 0.15, 0.17], "p grid"),
        "measurement_noise": (_bool, False, "measurement noise"), "n": (int, 2000, "samples per point"),
        "seed": (int, 0, "RNG seed"), **_MODELS, "workers": (int, 1, "worker processes"),
    },
    "enhance-mwpm": {
        "d": (int, 5, "code distance"), "p": (_grid, [0.05], "error rates"), **_NOISE,
        "n": (int, 20000, "samples per point"), "seed": (int, 0, "RNG seed"),
        "high_model": (_opt_str, None, "high-level model file"), "oracle_high": (_bool, False, "ground-truth oracle"),
        "threshold_t": (float, 0.5, "logical confidence threshold"), "mwpm_policy": (str, "fail", "fail | leave"),
    },
    "gradcheck": {
        "seed": (int, 0, "RNG seed"), "shapes": (int, 5, "random shapes per op"),
        "networks": (_bool, True, "include the assembled networks"),
    },
    "transfer": {
        "source": (str, None, "source model file"), "d": (int, 7, "target distance"),
        "data": (_opt_str, None, "optional dataset at the target d for the initial loss"),
        "seed": (int, 0, "seed for the random-init comparison"), "out": (str, "transferred.tqnn", "output model"),
    },
}

_REQUIRED = {"train": ("data",), "transfer": ("source",)}


# -- argument handling -------------------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toriclab", description="Toric-code decoding experiments.")
    parser.add_argument("--version", action="version", version=f"toriclab {__version__}")
    sub = parser.add_subparsers(dest="command")
    for name, params in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value settings file")
        sp.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or .)")
        sp.add_argument("--name", help="output file stem (default: command name)")
        sp.add_argument("--deterministic", action="store_true", help="single-threaded, bit-reproducible")
        sp.add_argument("--replay", help="re-run the settings of a manifest")
        for key, (_, _, helptext) in params.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=helptext)
    return parser


def resolve_settings(command: str, config: dict, flags: dict) -> dict:
    params = COMMANDS[command]
    unknown = sorted(set(config) - set(params))
    if unknown:
        raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    settings = {}
    for key, (cast, default, _) in params.items():
        raw = flags.get(key)
        if raw is None:
            raw = config.get(key)
        try:
            settings[key] = default if raw is None else cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    for key in _REQUIRED.get(command, ()):
        if settings.get(key) is None:
            raise ConfigError(f"{command} needs --{key.replace('_', '-')}")
    return settings


def _jsonable(settings: dict) -> dict:
    def conv(v):
        if isinstance(v, float) and math.isinf(v):
            return "inf"
        if isinstance(v, list):
            return [conv(x) for x in v]
        return v
    return {k: conv(v) for k, v in settings.items()}


# -- helpers -----------------------------------------------------------------------------------
class Run:
    """Output bookkeeping for one command invocation."""

    def __init__(self, command, settings, out_dir, stem, deterministic):
        self.command = command
        self.settings = settings
        self.out_dir = out_dir
        self.stem = stem
        self.deterministic = deterministic
        self.outputs = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        return name if os.path.isabs(name) else os.path.join(self.out_dir, name)

    def record(self, name):
        self.outputs.append(os.path.basename(name))
        return self.path(name)

    def write_csv(self, name, rows, columns):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k)) for k in columns})
        with open(self.record(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())

    def manifest(self) -> dict:
        settings = _jsonable(self.settings)
        return {
            "command": self.command,
            "settings": settings,
            "config_hash": cfgmod.config_hash({"command": self.command, **settings}),
            "seed": self.settings.get("seed"),
            "deterministic": self.deterministic,
            "versions": {"toriclab": __version__, "numpy": np.__version__,
                         "python": platform.python_version()},
            "outputs": self.outputs,
        }

    def write_manifest(self):
        with open(self.path(f"{self.stem}.manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "inf" if math.isinf(v) else f"{float(v):.10g}"
    return "" if v is None else v


def _noise(s, p=None) -> NoiseSpec:
    p = s["p"][0] if p is None and isinstance(s["p"], list) else (s["p"] if p is None else p)
    name = s.get("noise", "biased")
    if s.get("eta") is not None and name != "biased":
        raise ConfigError("--eta only applies to --noise biased")
    try:
        return NoiseSpec.preset(name, p, s.get("eta"), s.get("measurement_noise", False))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _check_file(path):
    if path is not None and not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")


def _load_model(path):
    from ..sunet import load_model

    _check_file(path)
    return load_model(path)


def _decoders(s):
    from ..pipeline import GroundTruthHighModel
    from .evaluate import Decoders

    low = _load_model(s["low_model"]) if s.get("low_model") else None
    low2 = _load_model(s["low_model_2"]) if s.get("low_model_2") else None
    if s.get("oracle_high"):
        high = GroundTruthHighModel()
    else:
        high = _load_model(s["high_model"]) if s.get("high_model") else None
    if s.get("mwpm_policy", "fail") not in ("fail", "leave"):
        raise ConfigError("mwpm_policy must be fail or leave")
    return Decoders(low, low2, high, s.get("n_max", 6), s.get("threshold_t", 0.5), s.get("mwpm_policy", "fail"))


def _workers(s, run):
    return 1 if run.deterministic else max(1, s.get("workers", 1))


def _curves(decoder, ds, spec, grid, n, seed, models, workers):
    from .evaluate import evaluate_ler

    return {d: evaluate_ler(decoder, d, spec, grid, n, seed, models, workers=workers) for d in ds}


LER_COLUMNS = ["p", "ler", "stderr", "n", "d", "decoder"]


# -- commands ----------------------------------------------------------------------------------
def cmd_gen_data(s, run, out):
    from .dataset import generate_dataset, save_dataset

    low = _load_model(s["low_model"]) if s["low_model"] else None
    if s["kind"] not in ("low", "high"):
        raise ConfigError("kind must be low or high")
    ds = generate_dataset(s["d"], _noise(s), s["n"], s["seed"], kind=s["kind"], low_model=low, strict=s["strict"])
    save_dataset(ds, run.record(s["out"]))
    print(json.dumps({"samples": len(ds), "file": s["out"]}), file=out)


def cmd_train(s, run, out):
    from ..sunet import SuNetConfig, build_model, transfer_weights
    from .dataset import load_dataset
    from .train import TrainConfig, train

    _check_file(s["data"])
    ds = load_dataset(s["data"])
    val = None
    if s["val_data"]:
        _check_file(s["val_data"])
        val = load_dataset(s["val_data"])
    kind = s["kind"] or ds.kind
    chans = tuple(cfgmod.parse_list(s["channels"], int)) if s["channels"] else ()
    try:
        netcfg = SuNetConfig(d=ds.d, down_channels=chans, kind=kind, fusion_channels=s["fusion_channels"],
                             fusion_blocks=s["fusion_blocks"], attention=s["attention"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if s["init"]:
        model = transfer_weights(_load_model(s["init"]), netcfg, seed=s["seed"])
    else:
        model = build_model(netcfg, seed=s["seed"])
    ckpt = None if s["checkpoints"] == "none" else os.path.join(run.out_dir, f"{run.stem}_checkpoints")
    tcfg = TrainConfig(epochs=s["epochs"], batch_size=s["batch_size"], lr=s["lr"], weight_decay=s["weight_decay"],
                       milestones=tuple(s["milestones"]), augment=s["augment"], seed=s["seed"],
                       checkpoint_dir=ckpt, keep_checkpoints="last" if s["checkpoints"] == "last" else "all")
    rows = []

    def log(entry):
        rows.append(entry)
        print(json.dumps({k: _fmt(v) for k, v in entry.items()}), file=out)

    train(model, ds, tcfg, val=val, log=log)
    from ..sunet import save_model

    save_model(model, run.record(s["out"]))
    run.write_csv(f"{run.stem}_loss.csv", rows, ["epoch", "lr", "loss", "val_loss"])


def cmd_eval(s, run, out):
    models = _decoders(s)
    curve = _curves(s["decoder"], [s["d"]], _noise(s), s["p"], s["n"], s["seed"], models, _workers(s, run))[s["d"]]
    rows = list(curve.rows())
    run.write_csv(f"{run.stem}.csv", rows, LER_COLUMNS)
    for r in rows:
        print(json.dumps({k: _fmt(v) for k, v in r.items()}), file=out)


def _read_curves(path):
    from .evaluate import LerCurve, LerPoint

    _check_file(path)
    by_d = {}
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"p", "ler", "d"} - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"{path}: missing column(s) {sorted(missing)}")
        for row in reader:
            try:
                d, p, ler = int(row["d"]), float(row["p"]), float(row["ler"])
                n = int(row["n"]) if row.get("n") else 0
            except ValueError as exc:
                raise FormatError(f"{path}: bad row {row}: {exc}") from None
            by_d.setdefault(d, []).append(LerPoint(p, ler, n))
    return {d: LerCurve(d, "input", sorted(pts, key=lambda q: q.p)) for d, pts in by_d.items()}


def cmd_threshold(s, run, out):
    from .threshold import estimate_threshold

    if s["input"]:
        curves = _read_curves(s["input"])
    else:
        curves = _curves(s["decoder"], s["ds"], _noise(s), s["p"], s["n"], s["seed"], _decoders(s),
                         _workers(s, run))
        run.write_csv(f"{run.stem}_curves.csv", [r for d in sorted(curves) for r in curves[d].rows()],
                      LER_COLUMNS)
    est = estimate_threshold(curves)
    rows = [{"d_small": a, "d_large": b, "p_cross": x} for a, b, x in est.crossings]
    rows.append({"d_small": "mean", "d_large": "", "p_cross": est.p_c, "spread": est.spread})
    run.write_csv(f"{run.stem}.csv", rows, ["d_small", "d_large", "p_cross", "spread"])
    print(f"p_c={_fmt(est.p_c)} spread={_fmt(est.spread)}", file=out)


def cmd_sweep_eta(s, run, out):
    from .threshold import estimate_threshold

    models = _decoders(s)
    for decoder in s["decoders"]:
        rows = []
        for eta in s["etas"]:
            spec = NoiseSpec(s["p"][0], eta, s["measurement_noise"])
            curves = _curves(decoder, s["ds"], spec, s["p"], s["n"], s["seed"], models, _workers(s, run))
            try:
                est = estimate_threshold(curves)
                rows.append({"eta": eta, "p_c": est.p_c, "spread": est.spread})
            except NoCrossing as exc:
                rows.append({"eta": eta, "p_c": "", "spread": "", "note": str(exc)})
            print(json.dumps({k: _fmt(v) for k, v in rows[-1].items()}), file=out)
        run.write_csv(f"{run.stem}_{decoder}.csv", rows, ["eta", "p_c", "spread", "note"])


def cmd_enhance_mwpm(s, run, out):
    from .evaluate import evaluate_ler

    if not (s["oracle_high"] or s["high_model"]):
        raise ConfigError("enhance-mwpm needs --high-model or --oracle-high true")
    models = _decoders({**s, "low_model": None, "low_model_2": None})
    spec = _noise(s)
    rows = []
    for decoder in ("mwpm", "enhanced_mwpm"):
        rows += list(evaluate_ler(decoder, s["d"], spec, s["p"], s["n"], s["seed"], models).rows())
    run.write_csv(f"{run.stem}.csv", rows, LER_COLUMNS)
    for r in rows:
        print(json.dumps({k: _fmt(v) for k, v in r.items()}), file=out)


def cmd_gradcheck(s, run, out):
    from .gradsuite import run_suite

    results = run_suite(seed=s["seed"], shapes=s["shapes"], networks=s["networks"])
    rows = [{"case": r.name, "shapes": r.shapes, "max_rel_error": r.max_error, "pass": r.passed} for r in results]
    run.write_csv(f"{run.stem}.csv", rows, ["case", "shapes", "max_rel_error", "pass"])
    for r in rows:
        print(json.dumps({k: _fmt(v) for k, v in r.items()}), file=out)
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CheckFailed(f"gradient check failed for: {', '.join(failed)}")


def cmd_transfer(s, run, out):
    from ..sunet import build_model, save_model, transfer_weights
    from .dataset import load_dataset
    from .train import evaluate_loss

    source = _load_model(s["source"])
    target = transfer_weights(source, source.config.with_d(s["d"]), seed=s["seed"])
    save_model(target, run.record(s["out"]))
    row = {"source_d": source.config.d, "target_d": s["d"], "unmatched": 0,
           "parameters": target.num_parameters()}
    if s["data"]:
        _check_file(s["data"])
        ds = load_dataset(s["data"])
        row["loss_transferred"] = evaluate_loss(target, ds)
        row["loss_random"] = evaluate_loss(build_model(target.config, seed=s["seed"]), ds)
    cols = ["source_d", "target_d", "unmatched", "parameters", "loss_transferred", "loss_random"]
    run.write_csv(f"{run.stem}.csv", [row], cols)
    print(json.dumps({k: _fmt(v) for k, v in row.items()}), file=out)


HANDLERS = {
    "gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval, "threshold": cmd_threshold,
    "sweep-eta": cmd_sweep_eta, "enhance-mwpm": cmd_enhance_mwpm, "gradcheck": cmd_gradcheck,
    "transfer": cmd_transfer,
}


# -- entry point -------------------------------------------------------------------------------
def _error_line(kind, code, message, err):
    print(json.dumps({"error": kind, "exit": code, "message": str(message)}), file=err)
    return code


@contextlib.contextmanager
def _single_thread(enabled):
    if not enabled:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=1):
        yield


def run_command(argv, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError("missing subcommand; choose from " + ", ".join(COMMANDS))
        flags = {k: v for k, v in vars(args).items() if k in COMMANDS[args.command]}
        config = {}
        if args.replay:
            _check_file(args.replay)
            with open(args.replay, encoding="utf-8") as fh:
                try:
                    manifest = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{args.replay}: not a manifest ({exc})") from None
            if manifest.get("command") != args.command:
                raise ConfigError(f"manifest is for {manifest.get('command')!r}, not {args.command!r}")
            config = {k: (",".join(map(str, v)) if isinstance(v, list) else v)
                      for k, v in manifest.get("settings", {}).items() if v is not None}
            deterministic = args.deterministic or bool(manifest.get("deterministic"))
        else:
            if args.config:
                _check_file(args.config)
                config = cfgmod.load_config(args.config)
            deterministic = args.deterministic
        settings = resolve_settings(args.command, config, flags)
        out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
        run = Run(args.command, settings, out_dir, args.name or args.command.replace("-", "_"), deterministic)
        with _single_thread(deterministic):
            HANDLERS[args.command](settings, run, out)
        run.write_manifest()
        return EXIT_OK
    except UsageError as exc:
        return _error_line("usage", EXIT_USAGE, exc, err)
    except ConfigError as exc:
        return _error_line("config", EXIT_CONFIG, exc, err)
    except FileNotFoundError as exc:
        return _error_line("missing_file", EXIT_MISSING, exc, err)
    except (FormatError, IncompatibleModel) as exc:
        return _error_line("bad_file", EXIT_FORMAT, exc, err)
    except (NoCrossing, CheckFailed) as exc:
        return _error_line("check_failed" if isinstance(exc, CheckFailed) else "no_crossing", EXIT_CHECK, exc, err)
    except TrainingDiverged as exc:
        return _error_line("diverged", EXIT_DIVERGED, exc, err)
    except ValueError as exc:
        return _error_line("config", EXIT_CONFIG, exc, err)
    except Exception as exc:  # noqa: BLE001 - the CLI must always end with one parseable line
        return _error_line("internal", EXIT_INTERNAL, f"{type(exc).__name__}: {exc}", err)


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())

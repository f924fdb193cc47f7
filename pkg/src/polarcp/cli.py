"""Command-line interface: ``polarcp {synth,train,calibrate,evaluate,heatmap}``.

Parameters come from built-in defaults, then an optional ``--config`` JSON file,
then command-line flags. Every command writes ``<output stem>.manifest.json``
with the effective parameters next to its outputs.

Exit codes: 0 success, 1 invalid input, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from polarcp import __version__
from polarcp.conformal import CORRECTIONS, METHODS, Correction, calibrate, save_calibrator
from polarcp.evaluation import format_table, reports_to_csv, run_protocol
from polarcp.geometry import MotionVector, from_polar
from polarcp.heatmap import DEFAULT_LADDER, emit, ladder_intervals, rasterize
from polarcp.quantreg import QuantileHeads, TrainConfig, train
from polarcp.synthdata import DatasetFormatError, GeneratorConfig, generate, read_csv, split, write_csv

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _float_list(v):
    if isinstance(v, (int, float)):
        return [float(v)]
    if isinstance(v, str):
        v = [p for p in v.split(",") if p.strip()]
    return [float(x) for x in v]


def _int_list(v):
    if isinstance(v, int):
        return [v]
    if isinstance(v, str):
        v = [p for p in v.split(",") if p.strip()]
    return [int(x) for x in v]


def _str_list(v):
    if isinstance(v, str):
        v = v.split(",")
    return [str(x).strip().lower() for x in v if str(x).strip()]


def _bool(v):
    if isinstance(v, str):
        return v.lower() in ("1", "true", "yes")
    return bool(v)


def _opt_str(v):
    return None if v is None else str(v)


def _opt_int(v):
    return None if v is None else int(v)


# name -> (converter, default, help); defaults are per command below
_OPTIONS = {
    "data": (_opt_str, "dataset CSV"),
    "n": (int, "number of samples"),
    "feature_dim": (int, "feature vector length"),
    "alpha": (_float_list, "miscoverage level(s), comma separated"),
    "method": (_str_list, "cp or cqr (evaluate accepts a comma list)"),
    "correction": (_str_list, "none, bonferroni, sidak or maxrank"),
    "n_cal": (_opt_int, "calibration set size"),
    "n_test": (_opt_int, "test set size per trial (default: all remaining)"),
    "n_trials": (int, "number of shuffled repetitions"),
    "n_train": (int, "rows carved off for head training when --train-data is absent"),
    "train_data": (_opt_str, "separate dataset CSV for training quantile heads"),
    "heads": (_opt_str, "trained heads JSON (from 'train')"),
    "epochs": (int, "training epochs"),
    "learning_rate": (float, "SGD learning rate"),
    "batch_size": (int, "minibatch size"),
    "hidden_sizes": (_int_list, "hidden layer widths, comma separated"),
    "sample_id": (_opt_int, "dataset id of the sample to draw"),
    "levels": (_float_list, "target coverage ladder, comma separated"),
    "size": (int, "heatmap width and height in pixels"),
    "origin": (_float_list, "instrument position x,y in normalized coordinates"),
    "angle_only": (_bool, "ignore the magnitude interval"),
    "seed": (int, "random seed"),
    "out": (str, "output directory"),
}

_COMMANDS = {
    "synth": {"n": 3000, "feature_dim": 8, "seed": 7, "out": "."},
    "train": {
        "data": None, "alpha": [0.3], "epochs": 500, "learning_rate": 1e-2, "batch_size": 64,
        "hidden_sizes": [32, 32], "seed": 0, "out": ".",
    },
    "calibrate": {
        "data": None, "method": ["cp"], "correction": ["none"], "alpha": [0.3], "n_cal": None,
        "heads": None, "seed": 0, "out": ".",
    },
    "evaluate": {
        "data": None, "method": list(METHODS), "correction": list(CORRECTIONS), "alpha": [0.3, 0.4],
        "n_cal": 500, "n_test": None, "n_trials": 20, "train_data": None, "n_train": 1000,
        "epochs": 500, "seed": 0, "out": ".",
    },
    "heatmap": {
        "data": None, "sample_id": None, "method": ["cp"], "correction": ["sidak"],
        "levels": list(DEFAULT_LADDER), "n_cal": 500, "heads": None, "train_data": None,
        "n_train": 1000, "epochs": 500, "size": 256, "origin": [0.5, 0.5], "angle_only": False,
        "seed": 0, "out": ".",
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polarcp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"polarcp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, defaults in _COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON file of parameters; flags override it")
        for key, default in defaults.items():
            flag = "--" + key.replace("_", "-")
            help_ = f"{_OPTIONS[key][1]} (default: {default})"
            if key == "angle_only":
                p.add_argument(flag, action="store_true", default=argparse.SUPPRESS, help=help_)
            else:
                p.add_argument(flag, default=argparse.SUPPRESS, help=help_)
    return parser


def resolve(command: str, flags: dict, config_path: str | None) -> dict:
    """Merge defaults, config file and flags, converting every value."""
    defaults = _COMMANDS[command]
    merged = dict(defaults)
    if config_path is not None:
        try:
            file_cfg = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config: invalid JSON in {config_path}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ValidationError("config: top level must be an object")
        for key, value in file_cfg.items():
            key = key.replace("-", "_")
            if key not in defaults:
                raise ValidationError(f"config: unknown field {key!r} for command {command!r}")
            merged[key] = value
    merged.update(flags)
    out = {}
    for key, value in merged.items():
        try:
            out[key] = _OPTIONS[key][0](value)
        except (TypeError, ValueError):
            raise ValidationError(f"{key}: cannot parse {value!r}") from None
    _validate(command, out)
    return out


def _validate(command: str, cfg: dict) -> None:
    def need(cond, field, msg):
        if not cond:
            raise ValidationError(f"{field}: {msg}")

    if "data" in cfg:
        need(cfg["data"] is not None, "data", "a dataset CSV is required")
    if "alpha" in cfg:
        need(len(cfg["alpha"]) >= 1, "alpha", "at least one value required")
        need(all(0 < a < 1 for a in cfg["alpha"]), "alpha", "values must lie in (0, 1)")
        if command in ("train", "calibrate"):
            need(len(cfg["alpha"]) == 1, "alpha", f"'{command}' takes a single value")
    if "method" in cfg:
        need(len(cfg["method"]) >= 1, "method", "at least one value required")
        need(all(m in METHODS for m in cfg["method"]), "method", f"choose from {', '.join(METHODS)}")
        if command != "evaluate":
            need(len(cfg["method"]) == 1, "method", f"'{command}' takes a single value")
    if "correction" in cfg:
        need(len(cfg["correction"]) >= 1, "correction", "at least one value required")
        for c in cfg["correction"]:
            try:
                Correction(c)
            except ValueError as exc:
                raise ValidationError(f"correction: {exc}") from None
        if command != "evaluate":
            need(len(cfg["correction"]) == 1, "correction", f"'{command}' takes a single value")
    for key in ("n", "feature_dim", "n_trials", "n_train", "epochs", "batch_size", "size"):
        if key in cfg:
            need(cfg[key] >= 1, key, "must be >= 1")
    for key in ("n_cal", "n_test"):
        if cfg.get(key) is not None:
            need(cfg[key] >= 1, key, "must be >= 1")
    if "learning_rate" in cfg:
        need(cfg["learning_rate"] > 0, "learning_rate", "must be > 0")
    if "hidden_sizes" in cfg:
        need(all(h >= 1 for h in cfg["hidden_sizes"]), "hidden_sizes", "widths must be >= 1")
    if "levels" in cfg:
        lv = cfg["levels"]
        need(len(lv) >= 1 and all(0 < c < 1 for c in lv), "levels", "coverages must lie in (0, 1)")
        need(len(set(lv)) == len(lv), "levels", "duplicate coverage level")
    if "origin" in cfg:
        need(len(cfg["origin"]) == 2, "origin", "expected x,y")
    if command == "heatmap":
        need(cfg["sample_id"] is not None, "sample_id", "required")
    if command == "calibrate" and cfg["method"] == ["cqr"]:
        need(cfg["heads"] is not None, "heads", "method 'cqr' needs --heads")


def _load_data(path):
    try:
        return read_csv(path)
    except DatasetFormatError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _write_manifest(out: Path, command: str, cfg: dict, outputs: list[Path]) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "parameters": cfg,
        "outputs": [p.name for p in outputs],
    }
    (out / f"{outputs[0].stem}.manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _train_cfg(cfg: dict) -> TrainConfig:
    return TrainConfig(
        epochs=cfg["epochs"],
        learning_rate=cfg.get("learning_rate", 1e-2),
        batch_size=cfg.get("batch_size", 64),
        seed=cfg["seed"],
        hidden_sizes=tuple(cfg.get("hidden_sizes", (32, 32))),
    )


def _heads_source(cfg: dict, data):
    """Training rows and the remaining pool, honoring --train-data / --n-train."""
    if cfg.get("train_data") is not None:
        return _load_data(cfg["train_data"]), data
    if cfg["n_train"] >= len(data):
        raise ValidationError(f"n_train: must be smaller than the dataset ({len(data)} rows)")
    return split(data, cfg["n_train"], cfg["seed"])


def cmd_synth(cfg: dict, out: Path) -> list[Path]:
    data = generate(GeneratorConfig(n=cfg["n"], seed=cfg["seed"], feature_dim=cfg["feature_dim"]))
    path = out / "data.csv"
    write_csv(data, path)
    print(f"wrote {len(data)} samples to {path}")
    return [path]


def cmd_train(cfg: dict, out: Path) -> list[Path]:
    data = _load_data(cfg["data"])
    try:
        heads = train(data.features, data.gt_angle, data.gt_mag, cfg["alpha"][0], _train_cfg(cfg))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    path = out / "heads.json"
    heads.save(path)
    print(f"trained heads (loss {heads.history[0]:.4f} -> {heads.history[-1]:.4f}); wrote {path}")
    return [path]


def cmd_calibrate(cfg: dict, out: Path) -> list[Path]:
    data = _load_data(cfg["data"])
    if cfg["n_cal"] is not None:
        if cfg["n_cal"] >= len(data):
            raise ValidationError(f"n_cal: must be smaller than the dataset ({len(data)} rows)")
        data, _ = split(data, cfg["n_cal"], cfg["seed"])
    method = cfg["method"][0]
    heads = QuantileHeads.load(cfg["heads"]) if method == "cqr" else None
    try:
        c = calibrate(method, data, cfg["alpha"][0], cfg["correction"][0], heads)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    path = out / "calibrator.json"
    save_calibrator(c, path)
    print(f"{method} thresholds: angle {np.degrees(c.q_angle):.2f} deg, magnitude {c.q_mag:.4f}; wrote {path}")
    return [path]


def cmd_evaluate(cfg: dict, out: Path) -> list[Path]:
    data = _load_data(cfg["data"])
    train_data = None
    if "cqr" in cfg["method"]:
        train_data, data = _heads_source(cfg, data)
    limit = len(data) - (cfg["n_test"] or 1)
    if cfg["n_cal"] > limit:
        raise ValidationError(f"n_cal: too large for {len(data)} evaluation rows")
    reports = run_protocol(
        data,
        methods=cfg["method"],
        corrections=cfg["correction"],
        alphas=cfg["alpha"],
        n_trials=cfg["n_trials"],
        n_cal=cfg["n_cal"],
        n_test=cfg["n_test"],
        seed=cfg["seed"],
        train_data=train_data,
        train_cfg=_train_cfg(cfg) if train_data is not None else None,
    )
    path = out / "results.csv"
    path.write_text(reports_to_csv(reports))
    sys.stdout.write(format_table(reports))
    return [path]


def cmd_heatmap(cfg: dict, out: Path) -> list[Path]:
    data = _load_data(cfg["data"])
    try:
        row = data.index_of(cfg["sample_id"])
    except KeyError as exc:
        raise ValidationError(f"sample_id: {exc.args[0]}") from None
    sample = data.subset([row])
    pool = data.subset(np.flatnonzero(np.arange(len(data)) != row))
    method, correction = cfg["method"][0], cfg["correction"][0]
    levels = sorted(cfg["levels"])
    heads = None
    if method == "cqr":
        if cfg["heads"] is not None:
            heads = QuantileHeads.load(cfg["heads"])
        else:
            train_data, pool = _heads_source(cfg, pool)
            heads = train(
                train_data.features, train_data.gt_angle, train_data.gt_mag, 1.0 - levels[0], _train_cfg(cfg)
            )
    if cfg["n_cal"] < len(pool):
        cal, _ = split(pool, cfg["n_cal"], cfg["seed"])
    else:
        cal = pool
    try:
        intervals = ladder_intervals(method, cal, sample, levels, correction, heads, cfg["angle_only"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    grid = rasterize(intervals, tuple(cfg["origin"]), cfg["size"], cfg["size"])
    gt: MotionVector = from_polar(float(sample.gt_angle[0]), float(sample.gt_mag[0]))
    tag = "angle" if cfg["angle_only"] else correction
    stem = out / f"heatmap_{method}_{tag}_{cfg['sample_id']}"
    pgm, js = emit(grid, stem, gt)
    print(f"wrote {pgm} and {js}")
    return [pgm, js]


_HANDLERS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "calibrate": cmd_calibrate,
    "evaluate": cmd_evaluate,
    "heatmap": cmd_heatmap,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = vars(parser.parse_args(argv))
        command = ns.pop("command")
        config_path = ns.pop("config")
        cfg = resolve(command, ns, config_path)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        outputs = _HANDLERS[command](cfg, out)
        _write_manifest(out, command, cfg, outputs)
    except ValidationError as exc:
        print(f"polarcp: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"polarcp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

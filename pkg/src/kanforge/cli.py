"""Command-line entry point.

Subcommands:

* ``fit-function``  train a small regressor on a synthetic target and
  report test RMSE plus a plot-ready prediction table
* ``ablate``        run a grid of placement codes and report macro-F1
  with relative gain over the all-linear baseline
* ``scaling``       sweep KAN grid size and MLP hidden width, reporting
  parameters, FLOPs and macro-F1 per configuration
* ``train``         one multi-seed experiment; writes a checkpoint and a
  per-seed report

Every command takes ``--config`` (flat key=value file), ``--seed``,
``--out``, ``--force`` and ``--workers`` (default: KANFORGE_WORKERS or the
machine's CPU count), echoes the resolved configuration into the output
directory, and is byte-for-byte deterministic under a fixed configuration.
Exit codes: 0 success, 1 runtime/training failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig, resolve
from .data import (
    CsvFormatError,
    FUNCTION_GENERATORS,
    HarDataset,
    SplitData,
    gen_synth_har,
    load_windowed_csv,
    make_holdout_split,
    split_function_dataset,
)
from .layers import GridSpec, LayerSpec, canonical_kind, make_stack, param_count
from .model import ModelSpec, WindowShape, build_model, save_checkpoint
from .training import (
    RunReport,
    TrainConfig,
    TrainingError,
    evaluate_regressor,
    run_experiment,
    train,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

MODEL_CHOICES = ("linear", "mlp", "kan", "efficientkan", "fastkan", "wavkan", "fourierkan", "larctankan")


class UsageError(Exception):
    """CLI-level usage problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# shared plumbing


def _default_workers() -> int:
    env = os.environ.get("KANFORGE_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"KANFORGE_WORKERS must be an integer, got {env!r}") from None
        if value < 1:
            raise UsageError(f"KANFORGE_WORKERS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def _prepare_out_dir(path: str, force: bool) -> str:
    if os.path.exists(path) and not force:
        raise UsageError(f"output directory {path} exists; pass --force to overwrite")
    os.makedirs(path, exist_ok=True)
    return path


def _write(path: str, text: str) -> None:
    with open(path, "w") as f:
        f.write(text)


def _resolve_config(args, extra_overrides: dict) -> RunConfig:
    overrides = dict(extra_overrides)
    if args.seed is not None:
        overrides["data.seed"] = args.seed
        overrides["fit.seed"] = args.seed
    return resolve(args.config, overrides)


def _window_from(rc: RunConfig) -> WindowShape:
    return WindowShape(L=rc["window.L"], C=rc["window.C"], T=rc["window.T"], tau=rc["window.tau"])


def _grid_from(rc: RunConfig) -> GridSpec | None:
    if not rc["model.grid_override"]:
        return None
    return GridSpec(rc["model.grid_lo"], rc["model.grid_hi"], rc["model.grid_size"], rc["model.grid_degree"])


def _model_spec_from(rc: RunConfig, classes: int, placement: str | None = None, grid: GridSpec | None = None) -> ModelSpec:
    spec = ModelSpec.from_placement(
        placement or rc["model.placement"],
        _window_from(rc),
        classes,
        variant=rc["model.variant"],
        hidden=rc["model.hidden"],
        mixer_depth=rc["model.mixer_depth"],
        use_fft=rc["model.use_fft"],
        grid=grid if grid is not None else _grid_from(rc),
    )
    slot_overrides = {
        slot: rc[f"model.{slot}"] for slot in ("embedding", "mixer", "classifier") if rc[f"model.{slot}"]
    }
    if slot_overrides and placement is None:
        spec = dataclasses.replace(spec, **slot_overrides)
    return spec


def _dataset_from(rc: RunConfig) -> tuple[HarDataset, int]:
    window = _window_from(rc)
    if rc["data.source"] == "synth":
        ds = gen_synth_har(
            classes=rc["data.classes"],
            subjects=rc["data.subjects"],
            windows_per_subject=rc["data.windows_per_subject"],
            shape=window,
            noise_sigma=rc["data.noise_sigma"],
            seed=rc["data.seed"],
            base_amplitude=rc["data.base_amplitude"],
        )
        return ds, rc["data.classes"]
    if rc["data.source"] == "csv":
        path = rc["data.path"]
        if not path:
            raise UsageError("data.source=csv requires data.path (--csv PATH)")
        if not os.path.exists(path):
            raise UsageError(f"CSV dataset not found: {path}")
        ds = load_windowed_csv(
            path,
            window,
            label_column=rc["data.label_column"],
            subject_column=rc["data.subject_column"],
            mixed_labels=rc["data.mixed_labels"],
        )
        return ds, ds.n_classes
    raise UsageError(f"data.source must be synth or csv, got {rc['data.source']!r}")


def _split_from(rc: RunConfig, ds: HarDataset) -> SplitData:
    return make_holdout_split(ds, val_frac=rc["data.val_frac"], seed=rc["data.split_seed"])


def _train_config_from(rc: RunConfig) -> TrainConfig:
    return TrainConfig(
        lr=rc["train.lr"],
        max_epochs=rc["train.max_epochs"],
        patience=rc["train.patience"],
        batch_size=rc["train.batch_size"],
        seeds=tuple(rc["train.seeds"]),
    )


# ---------------------------------------------------------------------------
# fit-function


def _stack_params(kind: str, dims: list[int]) -> int:
    total = 0
    for i, (fi, fo) in enumerate(zip(dims[:-1], dims[1:])):
        if i == len(dims) - 2:
            total += param_count(LayerSpec("linear", fi, fo))
        else:
            total += param_count(LayerSpec(kind, fi, fo))
    return total


def pick_width(kind: str, target_params: int, depth: int) -> int:
    """Smallest width whose stack parameter count is nearest target_params."""
    best_w, best_gap = 1, None
    for w in range(1, 513):
        gap = abs(_stack_params(kind, [1] + [w] * depth + [1]) - target_params)
        if best_gap is None or gap < best_gap:
            best_w, best_gap = w, gap
    return best_w


def run_fit(rc: RunConfig) -> dict:
    """Train one regressor per the fit.* configuration; pure function of rc."""
    target = rc["fit.target"]
    if target not in FUNCTION_GENERATORS:
        raise UsageError(f"unknown target {target!r}; valid targets: {', '.join(sorted(FUNCTION_GENERATORS))}")
    kind = canonical_kind(rc["fit.model"])
    seed = rc["fit.seed"]
    width = rc["fit.width"]
    if rc["fit.match_params"] > 0:
        width = pick_width(kind, rc["fit.match_params"], rc["fit.depth"])
    dims = [1] + [width] * rc["fit.depth"] + [1]

    ds = FUNCTION_GENERATORS[target](rc["fit.samples"], seed=seed)
    (x_train, y_train), (x_test, y_test) = split_function_dataset(ds, 0.8, seed=seed)
    cut = int(round(0.8 * x_train.shape[0]))
    train_part = (x_train[:cut], y_train[:cut])
    val_part = (x_train[cut:], y_train[cut:])

    model = make_stack(kind, dims, seed=seed)
    cfg = TrainConfig(
        lr=rc["fit.lr"],
        max_epochs=rc["fit.epochs"],
        patience=rc["fit.patience"],
        batch_size=rc["fit.batch_size"],
        seeds=(seed,),
        monitor="rmse",
    )
    model, trace = train(model, train_part, val_part, cfg, seed, task="regression")
    test_rmse = evaluate_regressor(model, x_test, y_test)

    order = np.argsort(x_test[:, 0])
    preds = model.forward(x_test[order]).data[:, 0]
    return {
        "target": target,
        "model": kind,
        "dims": dims,
        "params": model.total_params,
        "rmse": test_rmse,
        "best_epoch": trace["best_epoch"],
        "epochs_run": len(trace["epochs"]),
        "x": x_test[order, 0],
        "y_pred": preds,
        "trained": model,
    }


def cmd_fit_function(args) -> int:
    rc = _resolve_config(
        args,
        {
            key: value
            for key, value in {
                "fit.target": args.target,
                "fit.model": args.model,
                "fit.width": args.width,
                "fit.depth": args.depth,
                "fit.match_params": args.match_params,
                "fit.samples": args.samples,
                "fit.epochs": args.epochs,
                "fit.patience": args.patience,
                "fit.lr": args.lr,
            }.items()
            if value is not None
        },
    )
    out = _prepare_out_dir(args.out or "runs/fit-function", args.force)
    _write(os.path.join(out, "config.txt"), rc.resolved_text())
    result = run_fit(rc)

    report = [
        "target,model,width,depth,params,rmse,best_epoch,epochs_run",
        f"{result['target']},{result['model']},{result['dims'][1]},{len(result['dims']) - 2},"
        f"{result['params']},{result['rmse']:.6f},{result['best_epoch']},{result['epochs_run']}",
    ]
    _write(os.path.join(out, "report.csv"), "\n".join(report) + "\n")
    pred_lines = ["x,y_pred"] + [
        f"{x:.17g},{y:.17g}" for x, y in zip(result["x"], result["y_pred"])
    ]
    _write(os.path.join(out, "predictions.csv"), "\n".join(pred_lines) + "\n")
    print(f"RMSE {result['rmse']:.6f} ({result['model']} on {result['target']}, {result['params']} params)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ablate


def run_ablation(rc: RunConfig, workers: int) -> tuple[list[dict], str]:
    ds, classes = _dataset_from(rc)
    split = _split_from(rc, ds)
    cfg = _train_config_from(rc)
    placements = list(rc["ablate.placements"])
    if "M-M-M" not in placements:
        placements.append("M-M-M")  # gain needs the all-linear reference

    reports: dict[str, RunReport] = {}
    for code in placements:
        spec = _model_spec_from(rc, classes, placement=code)
        reports[code] = run_experiment(spec, split, cfg, label=code, workers=workers)
    base = reports["M-M-M"].mean
    rows = []
    for code in placements:
        rep = reports[code]
        gain = 0.0 if base == 0 else 100.0 * (rep.mean - base) / base
        rows.append(
            {
                "placement": code,
                "variant": rc["model.variant"] if "K" in code.upper() or code == "hybrid" else "-",
                "mean": rep.mean,
                "std": rep.std,
                "gain": gain,
                "params": rep.total_params,
                "flops": rep.flops,
            }
        )
    summary = "".join(reports[code].summary_text() for code in placements)
    return rows, summary


def cmd_ablate(args) -> int:
    overrides = {}
    if args.placements is not None:
        overrides["ablate.placements"] = args.placements
    if args.variant is not None:
        overrides["model.variant"] = args.variant
    _apply_data_flags(args, overrides)
    rc = _resolve_config(args, overrides)
    workers = args.workers or _default_workers()
    out = _prepare_out_dir(args.out or "runs/ablate", args.force)
    _write(os.path.join(out, "config.txt"), rc.resolved_text())

    rows, summary = run_ablation(rc, workers)
    lines = ["placement,variant,macro_f1,std,gain_pct,params,flops"]
    for r in rows:
        lines.append(
            f"{r['placement']},{r['variant']},{r['mean']:.6f},{r['std']:.6f},"
            f"{r['gain']:.2f},{r['params']},{r['flops']}"
        )
    _write(os.path.join(out, "ablation.csv"), "\n".join(lines) + "\n")
    _write(os.path.join(out, "summary.txt"), summary)
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# scaling


def run_scaling(rc: RunConfig, workers: int) -> list[dict]:
    ds, classes = _dataset_from(rc)
    split = _split_from(rc, ds)
    cfg = _train_config_from(rc)
    rows = []
    for g in rc["scaling.grid_sizes"]:
        spec = _model_spec_from(rc, classes, placement="hybrid", grid=GridSpec(-1.0, 1.0, g, 3))
        rep = run_experiment(spec, split, cfg, label=f"hybrid G={g}", workers=workers)
        rows.append({"family": "hybrid", "setting": f"G={g}", "params": rep.total_params,
                     "flops": rep.flops, "mean": rep.mean, "std": rep.std})
    for hidden in rc["scaling.hiddens"]:
        spec = dataclasses.replace(
            _model_spec_from(rc, classes, placement="M-M-M"), hidden=hidden
        )
        rep = run_experiment(spec, split, cfg, label=f"mlp hidden={hidden}", workers=workers)
        rows.append({"family": "mlp", "setting": f"hidden={hidden}", "params": rep.total_params,
                     "flops": rep.flops, "mean": rep.mean, "std": rep.std})
    return rows


def cmd_scaling(args) -> int:
    overrides = {}
    if args.grid_sizes is not None:
        overrides["scaling.grid_sizes"] = args.grid_sizes
    if args.hiddens is not None:
        overrides["scaling.hiddens"] = args.hiddens
    _apply_data_flags(args, overrides)
    rc = _resolve_config(args, overrides)
    workers = args.workers or _default_workers()
    out = _prepare_out_dir(args.out or "runs/scaling", args.force)
    _write(os.path.join(out, "config.txt"), rc.resolved_text())

    rows = run_scaling(rc, workers)
    lines = ["family,setting,params,flops,macro_f1,std"]
    for r in rows:
        lines.append(f"{r['family']},{r['setting']},{r['params']},{r['flops']},{r['mean']:.6f},{r['std']:.6f}")
    _write(os.path.join(out, "scaling.csv"), "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    overrides = {}
    if args.placement is not None:
        overrides["model.placement"] = args.placement
    if args.variant is not None:
        overrides["model.variant"] = args.variant
    if args.seeds is not None:
        overrides["train.seeds"] = args.seeds
    _apply_data_flags(args, overrides)
    rc = _resolve_config(args, overrides)
    workers = args.workers or _default_workers()
    out = _prepare_out_dir(args.out or "runs/train", args.force)
    _write(os.path.join(out, "config.txt"), rc.resolved_text())

    ds, classes = _dataset_from(rc)
    split = _split_from(rc, ds)
    cfg = _train_config_from(rc)
    spec = _model_spec_from(rc, classes)
    report = run_experiment(spec, split, cfg, label=spec.placement, workers=workers, keep_state=True)

    _write(os.path.join(out, "report.csv"), report.to_csv_text())
    _write(os.path.join(out, "summary.txt"), report.summary_text())

    best = max(report.runs, key=lambda r: (r.metric, -r.seed))
    model = build_model(spec, best.seed)
    model.load_state(best.state)
    save_checkpoint(os.path.join(out, "checkpoint.kfc"), model)
    print(report.summary_text(), end="")
    return EXIT_OK


def _apply_data_flags(args, overrides: dict) -> None:
    if getattr(args, "data", None) is not None:
        overrides["data.source"] = args.data
    if getattr(args, "csv", None) is not None:
        overrides["data.source"] = "csv"
        overrides["data.path"] = args.csv


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kanforge", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--seed", type=int, help="master seed (synthetic data and fitting runs)")
        p.add_argument("--out", help="output directory (default runs/<command>)")
        p.add_argument("--force", action="store_true", help="allow writing into an existing output directory")
        p.add_argument("--workers", type=int, help="worker pool size (default: KANFORGE_WORKERS or CPU count)")

    p = sub.add_parser("fit-function", help="fit a synthetic 1-d target and report RMSE")
    common(p)
    p.add_argument("--target", choices=sorted(FUNCTION_GENERATORS))
    p.add_argument("--model", choices=MODEL_CHOICES)
    p.add_argument("--width", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--match-params", type=int, dest="match_params",
                   help="pick the width whose parameter total is closest to this")
    p.add_argument("--samples", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--lr", type=float)
    p.set_defaults(func=cmd_fit_function)

    p = sub.add_parser("ablate", help="placement-code ablation grid")
    common(p)
    p.add_argument("--placements", help="comma list of codes (K-M-M, M-K-M, ..., hybrid)")
    p.add_argument("--variant", choices=MODEL_CHOICES, help="KAN family used for K slots")
    p.add_argument("--data", choices=("synth", "csv"))
    p.add_argument("--csv", help="windowed CSV dataset path (implies --data csv)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("scaling", help="parameter/FLOP scaling sweep")
    common(p)
    p.add_argument("--grid-sizes", dest="grid_sizes", help="comma list of KAN grid sizes")
    p.add_argument("--hiddens", help="comma list of MLP hidden widths")
    p.add_argument("--data", choices=("synth", "csv"))
    p.add_argument("--csv", help="windowed CSV dataset path (implies --data csv)")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("train", help="train one configuration across seeds")
    common(p)
    p.add_argument("--placement", help="placement code or 'hybrid'")
    p.add_argument("--variant", choices=MODEL_CHOICES)
    p.add_argument("--seeds", help="comma list of training seeds")
    p.add_argument("--data", choices=("synth", "csv"))
    p.add_argument("--csv", help="windowed CSV dataset path (implies --data csv)")
    p.set_defaults(func=cmd_train)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ConfigError, CsvFormatError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as err:
        print(f"training failed: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as err:
        print(f"i/o failure: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``elastinv {generate,train,calibrate,evaluate,plot}``.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import kernels
from .calibration import CalibrationError, calibrate, load_calibration, save_calibration
from .config import ConfigError, RunConfig, defaults_help, dump_config, load_config
from .container import ContainerError, read_container
from .dataset import Dataset, DatasetError, load_dataset, save_dataset
from .fields import FieldError, ScalarGrid
from .forward import PhantomError, SolverError, generate_dataset
from .metrics import export_heatmap, export_report, mae
from .training import (
    TrainingError,
    load_predictions,
    predict_fields,
    save_checkpoint,
    save_predictions,
    train,
    write_history_csv,
)

log = logging.getLogger("elastinv")

VALIDATION_ERRORS = (ConfigError, DatasetError, FieldError, ContainerError, CalibrationError, PhantomError,
                     FileNotFoundError, ValueError)

DATASET_FILE = "dataset.efd"
CONFIG_FILE = "config.txt"
CHECKPOINT_FILE = "checkpoint.npk"
HISTORY_FILE = "loss_history.csv"
PREDICTION_FILE = "predicted.efd"
CALIBRATION_FILE = "calibration.efd"


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.desk_scale is not None:
        cfg = replace(cfg, desk_scale_factor=args.desk_scale)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need(path: Path, what: str) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"missing {what}: {path}")
    return path


def cmd_generate(args) -> None:
    cfg = _resolve(args)
    seed = cfg.require_seed()
    out = _out_dir(args)
    ds = generate_dataset(cfg.phantom_spec(), cfg.ny, cfg.nx, cfg.boundary(),
                          snr=cfg.snr if cfg.snr > 0 else None, seed=seed, h=cfg.h, t=cfg.t)
    (out / CONFIG_FILE).write_text(dump_config(cfg))
    save_dataset(ds, out / DATASET_FILE)
    log.info("wrote %s (applied force %.6g)", out / DATASET_FILE, ds.applied_force)


def cmd_train(args) -> None:
    cfg = _resolve(args)
    cfg.require_seed()
    out = _out_dir(args)
    ds = load_dataset(_need(Path(args.dataset), "dataset"))
    (out / CONFIG_FILE).write_text(dump_config(cfg))
    model = cfg.model()
    try:
        state = train(ds, cfg.schedule(), cfg.weights(), cfg.E_c, model,
                      checkpoint_path=out / CHECKPOINT_FILE, log_every=args.log_every)
    except TrainingError as exc:
        save_checkpoint(exc.state, model, out / "aborted.npk")
        write_history_csv(exc.state.history, out / HISTORY_FILE)
        raise
    write_history_csv(state.history, out / HISTORY_FILE)
    save_predictions(predict_fields(state, ds, model), out / PREDICTION_FILE)
    log.info("trained %d iterations, final total loss %.6g", state.iteration, state.history[-1].losses.total)


def cmd_calibrate(args) -> None:
    run = Path(args.run_dir)
    ds = load_dataset(_need(Path(args.dataset), "dataset"))
    pred = load_predictions(_need(run / PREDICTION_FILE, "predicted fields"))
    if ds.applied_force is None:
        raise CalibrationError(f"{args.dataset} carries no applied_force")
    result = calibrate(pred.elasticity.E, pred.stress, ds.applied_force, ds.h)
    save_calibration(result, run / CALIBRATION_FILE)
    log.info("c_hat = %.12g", result.c_hat)


def truth_fields(ds: Dataset) -> dict[str, ScalarGrid]:
    out = {}
    if ds.truth_elasticity is not None:
        out["E"] = ds.truth_elasticity.E
        out["nu"] = ds.truth_elasticity.nu
    if ds.truth_displacement is not None:
        u = ds.truth_displacement
        out["ux"], out["uy"] = u.ux, u.uy
        eps = kernels.strain_from_displacement(u)
        out["exx"], out["eyy"], out["gxy"] = eps.exx, eps.eyy, eps.gxy
        if ds.truth_elasticity is not None:
            sig = kernels.stress_from_strain(eps, ds.truth_elasticity)
            out["sxx"], out["syy"], out["txy"] = sig.sxx, sig.syy, sig.txy
    return out


def predicted_fields_for(run: Path, predictions: Path | None) -> dict[str, ScalarGrid]:
    path = predictions if predictions is not None else _need(run / PREDICTION_FILE, "predicted fields")
    header, _ = read_container(_need(path, "predictions"))
    if header.get("format") == "efd-dataset":
        # self-comparison path: a dataset's truth fields serve as the prediction
        return truth_fields(load_dataset(path))
    pred = load_predictions(path)
    scale = 1.0
    E = pred.elasticity.E
    calib = run / CALIBRATION_FILE
    if calib.is_file():
        result = load_calibration(calib)
        scale, E = result.c_hat, result.E_absolute
    sig = pred.stress.scaled(scale)
    return {
        "E": E, "nu": pred.elasticity.nu,
        "ux": pred.displacement.ux, "uy": pred.displacement.uy,
        "exx": pred.strain.exx, "eyy": pred.strain.eyy, "gxy": pred.strain.gxy,
        "sxx": sig.sxx, "syy": sig.syy, "txy": sig.txy,
    }


def cmd_evaluate(args) -> None:
    run = Path(args.run_dir)
    run.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(_need(Path(args.dataset), "dataset"))
    pred = predicted_fields_for(run, Path(args.predictions) if args.predictions else None)
    truth = truth_fields(ds)
    pairs = {k: (pred[k], truth[k]) for k in pred if k in truth}
    if not pairs:
        raise DatasetError(f"{args.dataset} has no truth fields to evaluate against")
    export_report(run, pairs)
    for name, (p, t) in pairs.items():
        log.info("%-4s mae %.6g", name, mae(p, t))


def cmd_plot(args) -> None:
    run = Path(args.run_dir)
    pred = load_predictions(_need(run / PREDICTION_FILE, "predicted fields"))
    out = run / "plots"
    out.mkdir(exist_ok=True)
    grids = {
        "E": pred.elasticity.E, "nu": pred.elasticity.nu,
        "ux": pred.displacement.ux, "uy": pred.displacement.uy,
        "exx": pred.strain.exx, "eyy": pred.strain.eyy, "gxy": pred.strain.gxy,
        "sxx": pred.stress.sxx, "syy": pred.stress.syy, "txy": pred.stress.txy,
        "rx": pred.residual.rx, "ry": pred.residual.ry,
    }
    calib = run / CALIBRATION_FILE
    if calib.is_file():
        grids["E_absolute"] = load_calibration(calib).E_absolute
    for name, grid in grids.items():
        export_heatmap(grid, out / f"{name}.png", title=name)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out-dir", default="run", help="run directory (default: run)")
    common.add_argument("--seed", type=int, help="overrides 'seed' from the config")
    common.add_argument("--desk-scale", type=float, help="overrides 'desk_scale_factor'")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(
        prog="elastinv",
        description="Reconstruct Young's modulus and Poisson's ratio maps from 2-D displacement data.",
        epilog=defaults_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="phantom + forward solve (+ noise) -> dataset.efd",
                       epilog=defaults_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", parents=[common], help="phase-1 training -> checkpoint, history, predictions",
                       epilog=defaults_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    t.add_argument("--dataset", required=True)
    t.add_argument("--log-every", type=int, default=0, help="log the loss every N iterations (0: off)")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("calibrate", parents=[common], help="phase-2 absolute modulus calibration")
    c.add_argument("run_dir")
    c.add_argument("dataset")
    c.set_defaults(func=cmd_calibrate)

    e = sub.add_parser("evaluate", parents=[common], help="metrics.csv and heatmap report against truth")
    e.add_argument("run_dir")
    e.add_argument("dataset")
    e.add_argument("--predictions", help="prediction file (default: RUN_DIR/predicted.efd); "
                                         "a dataset file compares its truth against itself")
    e.set_defaults(func=cmd_evaluate)

    pl = sub.add_parser("plot", parents=[common], help="heatmaps of every predicted field")
    pl.add_argument("run_dir")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (TrainingError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

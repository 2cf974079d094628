"""Command-line entry point.

Subcommands: gen, normals, boundary, train, segment, eval, bench.
Exit codes: 1 usage error, 2 I/O or format error, 3 numeric failure.
Stdout is line-oriented "key value" pairs; errors go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pcio, trainer
from .boundary import BoundaryThresholds, classify_boundary
from .errors import Error, FormatError, NumericError, SpecError
from .spatial import build_index, estimate_normals, neighborhood_stats

_DEF = trainer.TrainConfig()
_THR = BoundaryThresholds()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="boundseg",
                     description="Boundary-aware point cloud semantic segmentation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("gen", help="generate a labeled synthetic cloud", formatter_class=fmt)
    p.add_argument("--shape", required=True, choices=pcio.SHAPE_KINDS)
    p.add_argument("--points", required=True, type=int)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("normals", help="estimate per-point normals", formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--k", type=int, default=_DEF.k_est)
    p.add_argument("--out", required=True)

    p = sub.add_parser("boundary", help="write a 0/1 boundary mask", formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--k", type=int, default=_DEF.k_est)
    p.add_argument("--theta", type=float, default=_THR.theta_angle,
                   help="mean normal-angle threshold (radians)")
    p.add_argument("--rho", type=float, default=_THR.tau_offset,
                   help="centroid offset ratio threshold")
    p.add_argument("--rule", choices=("or", "and"), default=_THR.combine)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train on every labeled XYZ in a directory",
                       formatter_class=fmt)
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", required=True, type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=_DEF.k_layer, help="attention-graph neighbor count")
    p.add_argument("--k-est", type=int, default=_DEF.k_est, help="boundary-estimation neighbor count")
    p.add_argument("--k-pool", type=int, default=_DEF.k_pool, help="pooling neighbor count")
    p.add_argument("--dim", type=int, default=_DEF.feat_dim, help="feature width D")
    p.add_argument("--batch", type=int, default=_DEF.batch_size)
    p.add_argument("--lr", type=float, default=_DEF.lr0)
    p.add_argument("--lr-floor", type=float, default=_DEF.lr_floor)
    p.add_argument("--halve-every", type=int, default=_DEF.halve_every)
    p.add_argument("--theta", type=float, default=_THR.theta_angle)
    p.add_argument("--rho", type=float, default=_THR.tau_offset)
    p.add_argument("--rule", choices=("or", "and"), default=_THR.combine)
    p.add_argument("--out", required=True)

    p = sub.add_parser("segment", help="predict labels for a cloud", formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate on every labeled XYZ in a directory",
                       formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True)

    p = sub.add_parser("bench", help="time boundary-aware vs all-graph routing",
                       formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--repeat", type=int, default=5)
    return parser


def _emit(key: str, value) -> None:
    if isinstance(value, float):
        value = repr(value)
    print(f"{key} {value}")


def _load_dir(path: str) -> list[pcio.PointCloud]:
    files = sorted(Path(path).glob("*.xyz"))
    if not files:
        raise FormatError(f"no .xyz files in {path}")
    return [pcio.read_xyz(f) for f in files]


def _cmd_gen(args) -> None:
    spec = pcio.ShapeSpec(kind=args.shape, n_points=args.points,
                          noise_sigma=args.noise, seed=args.seed)
    cloud = pcio.gen_shape(spec)
    pcio.write_xyz(args.out, cloud)
    _emit("points", cloud.n)
    _emit("num_classes", cloud.num_classes)


def _cmd_normals(args) -> None:
    cloud = pcio.read_xyz(args.input)
    index = build_index(cloud)
    field = estimate_normals(cloud, index, args.k)
    with open(args.out, "w", encoding="ascii") as fh:
        for nx, ny, nz in field.normals.tolist():
            fh.write(f"{nx!r} {ny!r} {nz!r}\n")
    _emit("points", cloud.n)
    _emit("degenerate", int(field.degenerate.sum()))


def _cmd_boundary(args) -> None:
    thr = BoundaryThresholds(theta_angle=args.theta, tau_offset=args.rho, combine=args.rule)
    cloud = pcio.read_xyz(args.input)
    index = build_index(cloud)
    field = estimate_normals(cloud, index, args.k)
    stats = neighborhood_stats(cloud, index, field, args.k)
    mask = classify_boundary(stats, thr)
    with open(args.out, "w", encoding="ascii") as fh:
        for flag in mask.flags.tolist():
            fh.write(f"{int(flag)}\n")
    _emit("boundary_fraction", mask.boundary_fraction)


def _train_config(args) -> trainer.TrainConfig:
    thr = BoundaryThresholds(theta_angle=args.theta, tau_offset=args.rho, combine=args.rule)
    return trainer.TrainConfig(
        epochs=args.epochs,
        seed=args.seed,
        lr0=args.lr,
        halve_every=args.halve_every,
        lr_floor=args.lr_floor,
        batch_size=args.batch,
        k_layer=args.k,
        k_est=args.k_est,
        k_pool=args.k_pool,
        feat_dim=args.dim,
        thresholds=thr,
    )


def _cmd_train(args) -> None:
    cfg = _train_config(args)
    clouds = _load_dir(args.data)
    ckpt, history = trainer.train(clouds, cfg)
    for epoch, loss in enumerate(history):
        print(f"epoch {epoch} loss {loss!r} lr {trainer.lr_at(cfg, epoch)!r}")
    trainer.save_checkpoint(ckpt, args.out)
    _emit("clouds", len(clouds))
    _emit("saved", args.out)


def _cmd_segment(args) -> None:
    ckpt = trainer.load_checkpoint(args.model)
    cloud = pcio.read_xyz(args.input)
    pred = trainer.predict_labels(ckpt, cloud)
    pcio.write_labels(args.out, pred.tolist())
    _emit("points", cloud.n)


def _cmd_eval(args) -> None:
    ckpt = trainer.load_checkpoint(args.model)
    clouds = _load_dir(args.data)
    report = trainer.evaluate(ckpt, clouds)
    with open(args.report, "w", encoding="ascii") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    _emit("miou", report["miou"])
    _emit("oa", report["oa"])
    _emit("mean_infer_ms", report["mean_infer_ms"])


def _cmd_bench(args) -> None:
    ckpt = trainer.load_checkpoint(args.model)
    cloud = pcio.read_xyz(args.input)
    report = trainer.bench_boundary_speedup(ckpt, cloud, args.repeat)
    for key in ("boundary_fraction", "t_boundary_aware_ms", "t_all_graph_ms",
                "speedup", "max_boundary_logit_diff"):
        _emit(key, report[key])


_COMMANDS = {
    "gen": _cmd_gen,
    "normals": _cmd_normals,
    "boundary": _cmd_boundary,
    "train": _cmd_train,
    "segment": _cmd_segment,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "k", None) is not None and args.k < 1:
            raise ValueError("--k must be >= 1")
        if getattr(args, "repeat", None) is not None and args.repeat < 3:
            raise ValueError("--repeat must be >= 3")
        _COMMANDS[args.command](args)
    except (ValueError, SpecError) as exc:
        print(f"boundseg {args.command}: invalid value: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"boundseg {args.command}: numeric failure: {exc}", file=sys.stderr)
        return 3
    except (Error, OSError) as exc:
        print(f"boundseg {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: train, decompose, fuse, eval, bench.

Exit codes: 0 success, 2 argument error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .bench import STRIDE_LEVELS, STRIDES, level_sweep, stride_sweep
from .decompose import mdlatlrr
from .errors import ArgumentError, DataError, NumericalError
from .fusion import NORMS, FusionConfig, fuse_images
from .imgio import find_pairs, list_images, list_images_recursive, read_image, rescale_for_display, write_image, write_raw
from .latlrr import LatLrrParams, ProjectionMatrix, train_projection
from .metrics import aggregate, evaluate

log = logging.getLogger("mdlatlrr")

EXIT_OK, EXIT_ARGS, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    return path


def _require_dir(path: Path) -> Path:
    if not path.is_dir():
        raise DataError(f"{path}: no such directory")
    return path


def _output_path(path: Path) -> Path:
    parent = path.parent if str(path.parent) else Path(".")
    if parent.exists() and not parent.is_dir():
        raise DataError(f"{parent}: not a directory")
    return path


def _emit(records: list[dict], fmt: str, out: Path | None) -> None:
    if fmt == "csv":
        buf = io.StringIO()
        keys: list[str] = []
        for r in records:
            keys += [k for k in r if k not in keys]
        writer = csv.DictWriter(buf, fieldnames=keys)
        writer.writeheader()
        writer.writerows(records)
        text = buf.getvalue()
    else:
        text = "".join(json.dumps(r) + "\n" for r in records)
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


# --- subcommands -----------------------------------------------------------------

def cmd_train(args) -> int:
    data = _require_dir(args.data)
    out = _output_path(args.out)
    files = list_images_recursive(data)
    images = [read_image(p) for p in files]
    params = LatLrrParams(lam=args.lam, mu0=args.mu0, rho=args.rho, mu_max=args.mu_max,
                          tol=args.tol, max_iters=args.max_iters)
    t0 = time.perf_counter()
    proj, ts, sol = train_projection(images, args.patch_size, args.stride, args.detail, args.smooth,
                                     args.threshold, args.seed, params)
    print(f"images: {len(images)}")
    print(f"pools: detail={ts.detail_pool} smooth={ts.smooth_pool}")
    print(f"training matrix: {ts.X.shape[0]}x{ts.X.shape[1]} "
          f"({ts.detail_count} detail, {ts.smooth_count} smooth)")
    print(f"solver: iterations={sol.iterations} residual={sol.final_residual:.3e} "
          f"converged={sol.converged} time={time.perf_counter() - t0:.1f}s")
    if not sol.converged and not args.allow_unconverged:
        raise NumericalError(f"LatLRR did not reach tol={params.tol} within {params.max_iters} iterations")
    out.parent.mkdir(parents=True, exist_ok=True)
    proj.save(out)
    print(f"wrote {out} ({proj.mat.shape[0]}x{proj.mat.shape[1]})")
    return EXIT_OK


def cmd_decompose(args) -> int:
    image = read_image(_require_file(args.image))
    proj = ProjectionMatrix.load(_require_file(args.proj))
    out_dir = args.out_dir
    dec = mdlatlrr(image, proj, args.levels, args.stride)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, d in enumerate(dec.detail_images, start=1):
        write_image(out_dir / f"detail_{i}.png", rescale_for_display(d))
    write_image(out_dir / "base.png", dec.base)
    if args.raw:
        write_raw(args.raw, base=dec.base, **{f"detail_{i}": d for i, d in enumerate(dec.detail_images, 1)})
    print(f"wrote {dec.levels} detail images and base to {out_dir}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    cfg = FusionConfig(levels=args.levels, stride=args.stride, detail_norm=args.norm,
                       base_weights=tuple(args.base_weights))
    a = read_image(_require_file(args.a))
    b = read_image(_require_file(args.b))
    proj = ProjectionMatrix.load(_require_file(args.proj))
    out = _output_path(args.out)
    if a.shape != b.shape:
        raise ArgumentError(f"source sizes differ: {args.a} is {a.shape}, {args.b} is {b.shape}")
    fused = fuse_images(a, b, proj, cfg, clamp=False)
    write_image(out, fused)
    if args.raw:
        write_raw(args.raw, fused=fused)
    print(f"wrote {out}")
    return EXIT_OK


def _eval_triples(args) -> list[tuple[str, Path, Path, Path]]:
    if args.dataset is not None:
        if args.fused_dir is None:
            raise ArgumentError("--dataset needs --fused-dir")
        fused = {p.stem: p for p in list_images(_require_dir(args.fused_dir))}
        triples = []
        for stem, ir, vis in find_pairs(_require_dir(args.dataset)):
            if stem not in fused:
                raise DataError(f"{args.fused_dir}: no fused image for pair {stem!r}")
            triples.append((stem, ir, vis, fused[stem]))
        return triples
    if args.a is None or args.b is None or args.fused is None:
        raise ArgumentError("give --a, --b and --fused, or --dataset with --fused-dir")
    pid = args.pair_id or args.fused.stem
    return [(pid, _require_file(args.a), _require_file(args.b), _require_file(args.fused))]


def cmd_eval(args) -> int:
    triples = _eval_triples(args)
    reports = []
    for pid, pa, pb, pf in triples:
        a, b, f = read_image(pa), read_image(pb), read_image(pf)
        if not (a.shape == b.shape == f.shape):
            raise DataError(f"pair {pid}: image sizes differ ({a.shape}, {b.shape}, {f.shape})")
        reports.append(evaluate(a, b, f, pid))
    records = [r.to_record() for r in reports]
    if len(reports) > 1:
        agg = aggregate(reports, "mean").to_record()
        agg["count"] = len(reports)
        records.append(agg)
    _emit(records, args.format, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    proj = ProjectionMatrix.load(_require_file(args.proj))
    pairs = [(stem, read_image(a), read_image(b)) for stem, a, b in find_pairs(_require_dir(args.dataset))]
    cells = []
    if args.sweep in ("levels", "all"):
        cells += level_sweep(pairs, proj, stride=args.stride, levels=8)
    if args.sweep in ("strides", "all"):
        cells += stride_sweep(pairs, proj, strides=STRIDES, levels=max(STRIDE_LEVELS))
    for c in cells:
        print(f"[{c.sweep}] norm={c.norm} stride={c.stride} level={c.level} "
              f"time={c.seconds:.2f}s", file=sys.stderr)
    records = [dict(c.to_record(), seed=args.seed) for c in cells]
    _emit(records, args.format, args.out)
    return EXIT_OK


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdlatlrr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn a projection matrix from a directory of images")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--patch-size", type=int, default=16)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--detail", type=int, default=1000)
    p.add_argument("--smooth", type=int, default=1000)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=0.4)
    p.add_argument("--mu0", type=float, default=1e-6)
    p.add_argument("--rho", type=float, default=1.1)
    p.add_argument("--mu-max", type=float, default=1e6)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--allow-unconverged", action="store_true")
    p.add_argument("--seed", dest="train_seed", type=int, default=None, help="overrides the global --seed")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decompose", help="split one image into detail images and a base")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--proj", type=Path, required=True)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--raw", type=Path, help="also dump unscaled float parts to this .npz")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("fuse", help="fuse a registered infrared/visible pair")
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.add_argument("--proj", type=Path, required=True)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--norm", choices=NORMS, default="nuclear")
    p.add_argument("--base-weights", type=float, nargs=2, default=(0.5, 0.5), metavar=("W1", "W2"))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--raw", type=Path, help="also dump the unclamped float image to this .npz")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="compute fusion metrics")
    p.add_argument("--a", type=Path)
    p.add_argument("--b", type=Path)
    p.add_argument("--fused", type=Path)
    p.add_argument("--pair-id")
    p.add_argument("--dataset", type=Path, help="directory with ir/ and vis/ subdirectories")
    p.add_argument("--fused-dir", type=Path)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="level/norm and stride ablation sweeps")
    p.add_argument("--dataset", type=Path, required=True, help="directory with ir/ and vis/ subdirectories")
    p.add_argument("--proj", type=Path, required=True)
    p.add_argument("--sweep", choices=("levels", "strides", "all"), default="all")
    p.add_argument("--stride", type=int, default=1, help="stride used by the level sweep")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "train_seed", None) is not None:
        args.seed = args.train_seed
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

    sparsity-cs reconstruct --image a.pgm b.ppm --rate 0.75 --solver bp --out results/
    sparsity-cs sparsity 2 1e-16 1e-16 1e-16 0
    sparsity-cs bound --n 1024 --i-star 1000 --p-star 0.5 --i0 10 --s 700

Settings come from ``RunConfig`` defaults, then an optional ``--config``
file of ``key = value`` lines, then command-line flags (which win).
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, load_config_file
from .errors import DomainError, GenerationError, InvalidInputError
from .metrics import psnr_bound_closed_form, psnr_lower_bound, sparsity_index
from .pipeline import (
    aggregate_scatter,
    report_to_json,
    run_experiment,
    write_block_maps,
    write_scatter_csv,
)
from .pnm import read_luminance, write_pgm
from .sensing import gen_measurement_ensemble, partition_blocks
from .sparsity import sparsity_s

# flag dest -> RunConfig field
_RUN_FLAGS = {
    "block_size": "block_size",
    "rate": "rate",
    "seed": "seed",
    "solver": "solver",
    "alpha": "alpha",
    "beta": "beta",
    "eps": "eps",
    "t0": "t0",
    "r0": "r0",
    "max_value": "max_value",
    "max_iters": "max_iters",
    "workers": "workers",
    "image": "images",
    "out": "out",
}


def _add_run_flags(p):
    g = p.add_argument_group("run settings (default: built-in, then --config)")
    g.add_argument("--config", help="file of key = value lines; flags override it")
    g.add_argument("--block-size", type=int, help="block side l (default 32)")
    g.add_argument("--rate", type=float, help="measurements per pixel, K = round(rate l^2) (default 0.75)")
    g.add_argument("--seed", type=int, help="seed of the measurement masks (default 0)")
    g.add_argument("--solver", choices=["omp", "bp"], help="reconstruction method (default bp)")
    g.add_argument("--alpha", type=float, help="line search sufficient-decrease constant (default 0.001)")
    g.add_argument("--beta", type=float, help="line search step shrink factor (default 0.75)")
    g.add_argument("--eps", type=float, help="OMP residual threshold (default 1e-6)")
    g.add_argument("--t0", type=float, help="sparsity index threshold (default 0.734166)")
    g.add_argument("--r0", type=float, help="PSNR threshold in dB (default 31.970006)")
    g.add_argument("--max-value", type=float, help="peak pixel value for PSNR/SSIM (default 255)")
    g.add_argument("--max-iters", type=int, help="basis pursuit iteration cap (default 5000)")
    g.add_argument("--workers", type=int, help="threads solving blocks in parallel (default 1)")


def build_config(args):
    """Merge defaults, the config file and explicit flags into a RunConfig."""
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for dest, name in _RUN_FLAGS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[name] = tuple(v) if name == "images" else v
    return RunConfig(**values)


def _image_name(path):
    return os.path.splitext(os.path.basename(path))[0]


def cmd_reconstruct(args):
    cfg = build_config(args)
    if not cfg.images:
        raise InvalidInputError("no input images (use --image or 'images = ...' in the config file)")
    names = [_image_name(p) for p in cfg.images]
    if len(set(names)) != len(names):
        raise InvalidInputError("input images must have distinct file names")
    loaded = [read_luminance(p) for p in cfg.images]
    os.makedirs(cfg.out, exist_ok=True)
    ensemble = gen_measurement_ensemble(cfg.block_size, cfg.rate, cfg.seed)
    if ensemble.seed != ensemble.requested_seed:
        print(f"note: masks redrawn with seed {ensemble.seed}", file=sys.stderr)
    reports = []
    print(f"{'image':<20} {'type I':>7} {'type II':>7} {'errors':>7} {'%':>6} {'PSNR':>8} {'MSSIM':>7}")
    for name, (image, _) in zip(names, loaded):
        report, recon = run_experiment(image, cfg, name, ensemble)
        reports.append(report)
        base = os.path.join(cfg.out, name)
        write_pgm(base + "_recon.pgm", recon, maxval=int(cfg.max_value) if cfg.max_value > 255 else 255)
        with open(base + "_report.json", "w", encoding="utf-8") as fh:
            fh.write(report_to_json(report))
        write_block_maps(report, base)
        c = report.confusion.as_dict()
        ms = "n/a" if report.mssim is None else f"{report.mssim:.4f}"
        print(
            f"{name:<20} {c['type_I']:>7} {c['type_II']:>7} {c['errors']:>7} "
            f"{c['errors_pct']:>6.2f} {report.psnr_db:>8.3f} {ms:>7}"
        )
    write_scatter_csv(aggregate_scatter(reports), os.path.join(cfg.out, "scatter.csv"))
    return 0


def _read_numbers(tokens):
    vals = []
    for tok in tokens:
        for t in tok.replace(",", " ").split():
            try:
                vals.append(float(t))
            except ValueError:
                raise InvalidInputError(f"cannot parse {t!r} as a number") from None
    return np.array(vals)


def cmd_sparsity(args):
    if args.image:
        image, _ = read_luminance(args.image)
        l = args.block_size or RunConfig().block_size
        grid, blocks = partition_blocks(image, l)
        E = np.array([sparsity_index(B) for B in blocks]).reshape(grid.rows, grid.cols)
        print(f"E map, {grid.rows} x {grid.cols} blocks of {l} x {l}:")
        for row in E:
            print(" ".join(f"{e:.6f}" for e in row))
        print(f"mean E = {E.mean():.6f}")
        return 0
    if args.file:
        try:
            with open(args.file, encoding="utf-8") as fh:
                tokens = fh.read().split()
        except OSError as err:
            raise InvalidInputError(f"cannot read {args.file}: {err.strerror}") from None
    elif args.values == ["-"]:
        tokens = sys.stdin.read().split()
    else:
        tokens = args.values
    x = _read_numbers(tokens)
    if x.size == 0:
        raise InvalidInputError("no numbers given")
    prof = sparsity_s(x)
    print(f"s = {prof.s:.10g}")
    print(f"p_star = {prof.p_star:.10g}")
    print(f"i_star = {prof.i_star}")
    print(f"zero_norm = {prof.zero_norm}")
    return 0


def cmd_bound(args):
    b = psnr_lower_bound(args.s, args.p_star, args.i_star, args.i0, args.n, args.max)
    for k, v in enumerate(b.terms(), 1):
        print(f"sigma{k} = {v:.10g}")
    print(f"total = {b.total:.10g}")
    closed = psnr_bound_closed_form(args.s, args.p_star, args.i_star, args.i0, args.n, args.max)
    print(f"closed form = {closed:.10g}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparsity-cs",
        description="Compressed-sensing block reconstruction and sparsity-based quality prediction.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="sense and reconstruct PGM/PPM images block by block")
    p.add_argument("--image", nargs="+", help="input PGM (P5) or PPM (P6) files")
    p.add_argument("--out", help="output directory (default ./out)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sparsity", help="sparsity s of a vector, or the E map of an image")
    p.add_argument("values", nargs="*", help="numbers (quoted lists allowed; '-' reads stdin)")
    p.add_argument("--file", help="text file of whitespace-separated numbers")
    p.add_argument("--image", help="PGM/PPM image; prints the per-block sparsity index")
    p.add_argument("--block-size", type=int, help="block side for --image (default 32)")
    p.set_defaults(func=cmd_sparsity)

    p = sub.add_parser("bound", help="PSNR lower bound for truncating i0 transform coefficients")
    p.add_argument("--n", type=int, required=True, help="vector length")
    p.add_argument("--i-star", type=int, required=True)
    p.add_argument("--p-star", type=float, required=True)
    p.add_argument("--i0", type=int, required=True, help="number of zeroed coefficients")
    p.add_argument("--s", type=float, required=True, help="sparsity s of the transform")
    p.add_argument("--max", type=float, default=255.0, help="peak signal value (default 255)")
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (GenerationError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

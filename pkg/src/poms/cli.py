"""Command line front end.

Exit codes: 0 success, 1 solve or verify failure, 2 bad configuration,
3 I/O problem.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import io as pio
from .bms import BmsConfig
from .extract import ExtractConfig, extract_tileset
from .model import CellSelector, SetupRestriction
from .oracle import verify_realization
from .poms import BLOCK_CHOICES, PomsConfig, run_poms
from .render import load_sheet, taccl_heatmap, write_png, write_render
from .taccl import compute_taccl, default_scratch

log = logging.getLogger("poms")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _dims(text: str, name: str) -> tuple[int, int, int]:
    try:
        parts = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise ConfigError(f"--{name} must look like NxM or NxMxK, got {text!r}") from None
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3 or any(p < 1 for p in parts):
        raise ConfigError(f"--{name} must look like NxM or NxMxK, got {text!r}")
    return tuple(parts)


def _seed_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            return [int(lo)]
        a, b = int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"--seeds must look like S0..S1, got {text!r}") from None
    if b < a:
        raise ConfigError("--seeds upper bound is below the lower bound")
    return list(range(a, b + 1))


def _load_tileset(path: str):
    try:
        return pio.load_tileset(path)
    except FileNotFoundError:
        raise
    except pio.FormatError as e:
        raise ConfigError(str(e)) from e
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def cmd_extract(args) -> int:
    try:
        cfg = ExtractConfig(
            tile_pixels=args.tile_px,
            window=args.window,
            boundary=args.boundary,
            representative=args.representative,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    try:
        with Image.open(args.image) as im:
            pixels = np.asarray(im.convert("RGBA"))
    except UnidentifiedImageError as e:
        raise ConfigError(f"{args.image}: not an image") from e
    out = Path(args.out)
    sheet_path = Path(args.sheet) if args.sheet else out.with_name(out.stem + "_sheet.png")
    try:
        rel = os.path.relpath(sheet_path, out.parent)
    except ValueError:
        rel = str(sheet_path.resolve())
    try:
        ext = extract_tileset(pixels, cfg, name=args.name or Path(args.image).stem, sheet_name=rel)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    write_png(sheet_path, ext.sheet)
    pio.save_tileset(out, ext.tileset, {"representative": cfg.representative})
    if args.provenance:
        pio.atomic_write_text(args.provenance, pio.dumps(ext.provenance()))
    print(f"tiles={ext.tileset.tile_count} rules={len(pio.tileset_to_dict(ext.tileset)['rules'])}")
    return EXIT_OK


def cmd_taccl(args) -> int:
    ts = _load_tileset(args.tileset)
    if args.scratch:
        s = args.scratch
        scratch = (s, s, s if ts.dim == 3 else 1)
    else:
        scratch = default_scratch(ts)
    try:
        report = compute_taccl(ts, scratch)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    pio.atomic_write_text(args.out, pio.dumps(report.to_dict()))
    csv_path = args.csv or str(Path(args.out).with_suffix(".csv"))
    pio.atomic_write_text(csv_path, report.to_csv())
    if args.heatmap:
        write_png(args.heatmap, taccl_heatmap([t.length for t in report.tiles]))
    L = report.length
    print("L=inf" if L == float("inf") else f"L={L}")
    return EXIT_OK


def _solve_config(args, ts) -> tuple[tuple[int, int, int], PomsConfig]:
    size = _dims(args.size, "size")
    block = _dims(args.block, "block")
    if ts.dim == 2 and (size[2] != 1 or block[2] != 1):
        raise ConfigError("2D tile set needs 2D --size and --block")
    if any(b > s for b, s in zip(block, size)):
        raise ConfigError("--block must fit inside --size")
    restrictions = []
    if args.pin_frame:
        restrictions.append(SetupRestriction.pin_frame(ts, args.pin_frame))
    soften = args.soften if args.soften else 8
    try:
        cfg = PomsConfig(
            block_size=block,
            block_choice=args.bcs,
            block_lambda=args.bcs_lambda,
            erosion_p0=args.erosion_p0,
            erosion_pmax=args.erosion_pmax,
            max_rounds=args.max_rounds,
            snapshot_interval=args.snapshot_every,
            seed=args.seed,
            restrictions=restrictions,
            check_soundness=args.check_soundness,
            bms=BmsConfig(
                max_iterations=args.max_iterations,
                soften_size=(soften, soften, soften if ts.dim == 3 else 1),
                tile_choice=args.tile_choice,
                backend=args.backend,
            ),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return size, cfg


def _digest(args, seed: int) -> str:
    keys = ("size", "block", "bcs", "bcs_lambda", "erosion_p0", "erosion_pmax", "soften",
            "max_rounds", "max_iterations", "tile_choice", "pin_frame", "resume", "backend")
    doc = {k: getattr(args, k) for k in keys}
    doc["seed"] = seed
    with open(args.tileset, "rb") as f:
        doc["tileset"] = pio.hashlib.sha256(f.read()).hexdigest()
    return pio.config_digest(doc)


def _solve_one(args, seed: int, out: Path, render: Path | None) -> int:
    ts = _load_tileset(args.tileset)
    args.seed = seed
    size, cfg = _solve_config(args, ts)
    digest = _digest(args, seed)
    sheet = None
    if render is not None or args.snapshot_every:
        if ts.render is not None:
            sheet = load_sheet(ts, Path(args.tileset).parent)
        elif render is not None:
            raise ConfigError("tile set has no render table; cannot --render")

    frames_dir = out.with_name(out.stem + "_frames")

    def on_round(grid, report):
        every = args.snapshot_every
        if every and grid.round % every == 0:
            stem = frames_dir / f"round_{grid.round:06d}"
            pio.save_grid(stem.with_suffix(".json"), grid, seed=seed, digest=digest)
            if sheet is not None:
                write_render(stem.with_suffix(".png"), grid, ts, sheet)

    initial = None
    if args.resume:
        try:
            initial = pio.load_grid(args.resume)
        except pio.FormatError as e:
            raise ConfigError(str(e)) from e
        if tuple(initial.dims) != size:
            raise ConfigError(f"--resume grid dims {initial.dims} do not match --size {size}")
    try:
        result = run_poms(ts, size, cfg, on_round=on_round, initial=initial)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    pio.save_grid(out, result.grid, seed=seed, digest=digest)
    if args.report:
        rep = out.with_name(out.stem + "_rounds.json")
        pio.atomic_write_text(rep, pio.dumps([r.to_dict() for r in result.reports]))
    if render is not None:
        write_render(render, result.grid, ts, sheet)
    log.info("seed %d: %s after %d rounds", seed, result.status.value, len(result.reports))
    line = f"seed={seed} status={result.status.value} rounds={len(result.reports)}"
    if args.check_soundness:
        line += f" soundness_failures={result.stats.soundness_failures}"
    print(line)
    return EXIT_OK if result.resolved else EXIT_FAIL


def _solve_worker(job) -> int:
    args, seed, out, render = job
    try:
        return _solve_one(args, seed, out, render)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


def cmd_solve(args) -> int:
    if args.seeds:
        seeds = _seed_range(args.seeds)
        base = Path(args.out)
        jobs = []
        for s in seeds:
            d = base / f"seed_{s}"
            render = d / "render.png" if args.render else None
            jobs.append((args, s, d / "grid.json", render))
        workers = args.jobs or min(len(jobs), os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            codes = list(pool.map(_solve_worker, jobs))
        return max(codes)
    seed = args.seed
    if seed is None:
        seed = random.SystemRandom().randrange(2**31)
        log.warning("no --seed given, using %d", seed)
        print(f"seed={seed}", file=sys.stderr)
    return _solve_one(args, seed, Path(args.out), Path(args.render) if args.render else None)


def cmd_verify(args) -> int:
    ts = _load_tileset(args.tileset)
    try:
        grid = pio.load_grid(args.grid)
    except pio.FormatError as e:
        raise ConfigError(str(e)) from e
    if ts.dim == 2 and grid.dims[2] != 1:
        raise ConfigError(f"grid dims {grid.dims} do not match a 2D tile set")
    skip = None
    if args.skip_frame:
        skip = CellSelector("frame", width=args.skip_frame).grid_mask(grid.dims)
    report = verify_realization(grid, ts, skip=skip)
    for v in report.violations:
        print(v.describe())
    if report.passed:
        print("ok")
        return EXIT_OK
    print(f"{len(report.violations)} violation(s)", file=sys.stderr)
    return EXIT_FAIL


def cmd_render(args) -> int:
    ts = _load_tileset(args.tileset)
    if ts.render is None:
        raise ConfigError("tile set has no render table")
    try:
        grid = pio.load_grid(args.grid)
    except pio.FormatError as e:
        raise ConfigError(str(e)) from e
    sheet = load_sheet(ts, Path(args.tileset).parent)
    for p in write_render(args.out, grid, ts, sheet):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="poms", description="Punch Out Model Synthesis tiling generator")
    p.add_argument("--log-level", default=os.environ.get("POMS_LOG_LEVEL", "WARNING"))
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract", help="infer a tile set from an exemplar image")
    e.add_argument("--image", required=True)
    e.add_argument("--tile-px", type=int, required=True)
    e.add_argument("--window", type=int, default=2)
    e.add_argument("--boundary", choices=("zero", "wrap"), default="zero")
    e.add_argument("--representative", choices=("upper-left", "middle"), default="upper-left")
    e.add_argument("--name", default="")
    e.add_argument("--out", required=True)
    e.add_argument("--sheet")
    e.add_argument("--provenance")
    e.set_defaults(func=cmd_extract)

    t = sub.add_parser("taccl", help="estimate the tile arc consistent correlation length")
    t.add_argument("--tileset", required=True)
    t.add_argument("--scratch", type=int)
    t.add_argument("--out", required=True)
    t.add_argument("--csv")
    t.add_argument("--heatmap")
    t.set_defaults(func=cmd_taccl)

    s = sub.add_parser("solve", help="run POMS on a grid")
    s.add_argument("--tileset", required=True)
    s.add_argument("--size", required=True)
    s.add_argument("--block", required=True)
    s.add_argument("--bcs", choices=BLOCK_CHOICES, default="uniform")
    s.add_argument("--bcs-lambda", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--seeds", help="S0..S1: run each seed into OUT/seed_<s>/")
    s.add_argument("--jobs", type=int)
    s.add_argument("--erosion-p0", type=float, default=PomsConfig.erosion_p0)
    s.add_argument("--erosion-pmax", type=float, default=PomsConfig.erosion_pmax)
    s.add_argument("--soften", type=int)
    s.add_argument("--max-rounds", type=int)
    s.add_argument("--max-iterations", type=int)
    s.add_argument("--tile-choice", choices=("min-entropy", "uniform-cell"), default="min-entropy")
    s.add_argument("--backend", choices=("auto", "python", "compiled"), default="auto",
                   help="block solver implementation (compiled needs numba and at most 64 tiles)")
    s.add_argument("--check-soundness", action="store_true",
                   help="count rounds that leave a clashing pair of resolved cells")
    s.add_argument("--pin-frame", type=int, default=0, metavar="WIDTH",
                   help="pin the outer frame of the grid to an unresolved state")
    s.add_argument("--snapshot-every", type=int)
    s.add_argument("--report", action="store_true", help="also write per-round reports")
    s.add_argument("--resume", metavar="GRID", help="continue from a saved grid snapshot")
    s.add_argument("--out", required=True)
    s.add_argument("--render")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a grid against a tile set")
    v.add_argument("--tileset", required=True)
    v.add_argument("--grid", required=True)
    v.add_argument("--skip-frame", type=int, default=0, metavar="WIDTH")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("render", help="render a grid to PNG")
    r.add_argument("--tileset", required=True)
    r.add_argument("--grid", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

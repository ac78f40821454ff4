"""Command-line entry point: synth | index | query | eval | bench.

Tunables can come from a TOML config file (``--config``); explicit flags
win over file values, which win over defaults. Exit codes: 0 success,
2 usage/config error, 3 data error (unreadable or inconsistent inputs),
4 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import evaluation, imgproc, synth
from .features import KNOWN_PROFILES, FeatureFileError
from .index import (
    MANIFEST_NAME,
    IndexBuildError,
    build_index,
    load_index,
    storage_report,
    write_manifest,
)
from .proposals import FilterParams
from .search import MODES, PostProcessParams, postprocess_union, query

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class Config:
    """Every tunable of the pipeline, with the documented defaults."""

    alpha: float = 0.06
    min_side: int = 10
    max_side_frac: float = 0.9
    seg_k: float = 200.0
    seg_min_size: int = 50
    seg_sigma: float = 0.8
    edge_low: float = 0.1
    edge_high: float = 0.2
    normalize: bool = True
    mode: str = "euclidean"
    n: int = 100
    pool_size: int = 3000
    union_iou: float = 0.85
    seed: int = 0
    workers: int = 0  # 0 -> available parallelism

    def validate(self) -> None:
        checks = {
            "alpha": 0.0 < self.alpha < 1.0,
            "min_side": self.min_side >= 1,
            "max_side_frac": 0.0 < self.max_side_frac <= 1.0,
            "seg_k": self.seg_k > 0,
            "seg_min_size": self.seg_min_size >= 1,
            "seg_sigma": self.seg_sigma >= 0,
            "edge_low": 0.0 <= self.edge_low <= self.edge_high,
            "edge_high": self.edge_high <= 1.0,
            "mode": self.mode in MODES,
            "n": self.n >= 1,
            "pool_size": self.pool_size >= 1,
            "union_iou": 0.0 < self.union_iou < 1.0,
            "workers": self.workers >= 0,
        }
        for key, ok in checks.items():
            if not ok:
                raise UsageError(f"invalid config value for {key!r}: {getattr(self, key)!r}")

    @property
    def effective_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


def _load_config(args: argparse.Namespace) -> Config:
    cfg = Config()
    valid_keys = {f.name: f.type for f in fields(Config)}
    if getattr(args, "config", None):
        try:
            with open(args.config, "rb") as fh:
                file_values = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise UsageError(f"cannot parse config file {args.config}: {e}") from e
        except OSError as e:
            raise UsageError(f"cannot read config file {args.config}: {e}") from e
        for key, value in file_values.items():
            if key not in valid_keys:
                raise UsageError(f"unknown config key {key!r} in {args.config}")
            setattr(cfg, key, value)
    for key in valid_keys:
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, flag)
    cfg.validate()
    return cfg


def _add_config_flags(parser: argparse.ArgumentParser, *keys: str) -> None:
    typed = {f.name: f for f in fields(Config)}
    for key in keys:
        f = typed[key]
        flag = "--" + key.replace("_", "-")
        if f.type == "bool" or f.type is bool:
            group = parser.add_mutually_exclusive_group()
            group.add_argument(flag, dest=key, action="store_true", default=None)
            group.add_argument(
                "--no-" + key.replace("_", "-"), dest=key, action="store_false", default=None
            )
        else:
            caster = float if "float" in str(f.type) else (int if "int" in str(f.type) else str)
            parser.add_argument(flag, dest=key, type=caster, default=None)


def _load_pages(pages_dir: str) -> tuple[list[tuple[str, np.ndarray]], dict[str, str]]:
    root = Path(pages_dir)
    if not root.is_dir():
        raise DataError(f"pages directory not found: {pages_dir}")
    paths = sorted(
        p for p in root.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not paths:
        raise DataError(f"no PNG/JPEG pages in {pages_dir}")
    pages = []
    page_paths = {}
    for p in paths:
        try:
            pages.append((p.stem, imgproc.load_image(p)))
        except OSError as e:
            raise DataError(f"cannot decode page image {p}: {e}") from e
        page_paths[p.stem] = str(p)
    return pages, page_paths


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        w, h = (int(v) for v in args.page_size.lower().split("x"))
    except ValueError as e:
        raise UsageError(f"--page-size must look like 320x240, got {args.page_size!r}") from e
    spec = synth.SynthSpec(
        page_count=args.pages,
        page_w=w,
        page_h=h,
        glyph_classes=args.classes,
        plants_per_page=args.plants,
        noise=args.noise,
        seed=args.seed if args.seed is not None else 0,
    )
    corpus = synth.generate(spec)
    synth.write_corpus(corpus, args.out)
    print(
        json.dumps(
            {
                "pages": len(corpus.pages),
                "queries": len(corpus.queries),
                "occurrences": sum(len(q.occurrences) for q in corpus.ground_truth.queries),
                "out": str(args.out),
            }
        )
    )
    return EXIT_OK


def cmd_index(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    pages, page_paths = _load_pages(args.pages)
    params = FilterParams(
        alpha=cfg.alpha, min_side=cfg.min_side, max_side_frac=cfg.max_side_frac
    )
    external = None
    if args.external_features:
        if not args.profile:
            raise UsageError("--external-features requires --profile")
        if args.profile not in KNOWN_PROFILES:
            raise UsageError(
                f"unknown profile {args.profile!r}; known: {sorted(KNOWN_PROFILES)}"
            )
        external = (args.external_features, KNOWN_PROFILES[args.profile])

    report: list[dict] = []
    idx = build_index(
        pages,
        params,
        normalize=cfg.normalize,
        external=external,
        propose_kwargs={
            "seg_k": cfg.seg_k,
            "seg_min_size": cfg.seg_min_size,
            "seg_sigma": cfg.seg_sigma,
            "edge_low": cfg.edge_low,
            "edge_high": cfg.edge_high,
        },
        report=report,
        workers=cfg.effective_workers,
    )
    idx.save(args.out)
    write_manifest(idx, page_paths, Path(args.out) / MANIFEST_NAME)
    for line in report:
        print(json.dumps(line, sort_keys=True))
    raw = sum(r["raw"] for r in report)
    kept = sum(r["after_invalid_filter"] for r in report)
    reduction = 100.0 * (1.0 - kept / raw) if raw else 0.0
    print(
        json.dumps(
            {
                "pages": len(pages),
                "raw_regions": raw,
                "indexed_regions": kept,
                "reduction_pct": round(reduction, 1),
                "out": str(args.out),
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def _overlay(page_img: np.ndarray, boxes: list, out_path: Path) -> None:
    from PIL import Image, ImageDraw

    data = np.round(imgproc.ensure_rgb(page_img) * 255.0).astype(np.uint8)
    im = Image.fromarray(data, mode="RGB")
    draw = ImageDraw.Draw(im)
    for b in boxes:
        draw.rectangle([b.x, b.y, b.x + b.w - 1, b.y + b.h - 1], outline=(230, 30, 30), width=2)
    im.save(out_path, format="PNG")


def cmd_query(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    idx = load_index(args.index)
    page_images = None
    if args.overlay_dir:
        if not args.pages:
            raise UsageError("--overlay-dir requires --pages to load page images")
        pages, _ = _load_pages(args.pages)
        page_images = dict(pages)
        Path(args.overlay_dir).mkdir(parents=True, exist_ok=True)

    out_fh = open(args.out, "w") if args.out else sys.stdout
    try:
        for qpath in args.query:
            try:
                img = imgproc.load_image(qpath)
            except OSError as e:
                raise DataError(f"cannot decode query image {qpath}: {e}") from e
            qid = Path(qpath).stem
            if args.pp:
                results = query(idx, query_img=img, mode=cfg.mode, n=cfg.pool_size)
                pp = PostProcessParams(pool_size=cfg.pool_size, union_iou=cfg.union_iou)
                results = postprocess_union(results, pp)[: cfg.n]
            else:
                results = query(idx, query_img=img, mode=cfg.mode, n=cfg.n)
            for r in results:
                out_fh.write(
                    json.dumps(
                        {
                            "query_id": qid,
                            "rank": r.rank,
                            "page_id": r.page_id,
                            "x": r.bbox.x,
                            "y": r.bbox.y,
                            "w": r.bbox.w,
                            "h": r.bbox.h,
                            "distance": r.distance,
                            "mode": cfg.mode,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
            if page_images is not None:
                by_page: dict[str, list] = {}
                for r in results[: min(len(results), 20)]:
                    by_page.setdefault(r.page_id, []).append(r.bbox)
                for page_id, boxes in by_page.items():
                    _overlay(
                        page_images[page_id],
                        boxes,
                        Path(args.overlay_dir) / f"{qid}__{page_id}.png",
                    )
    finally:
        if args.out:
            out_fh.close()
    return EXIT_OK


def _query_results_for_eval(idx, cfg: Config, gt, queries_dir: str, n_max: int, pp: bool):
    results = {}
    qdir = Path(queries_dir)
    for truth in gt.queries:
        qpath = qdir / f"{truth.query_id}.png"
        if not qpath.exists():
            raise DataError(f"query image not found: {qpath}")
        img = imgproc.load_image(qpath)
        if pp:
            res = query(idx, query_img=img, mode=cfg.mode, n=cfg.pool_size)
            res = postprocess_union(
                res, PostProcessParams(pool_size=cfg.pool_size, union_iou=cfg.union_iou)
            )[:n_max]
        else:
            res = query(idx, query_img=img, mode=cfg.mode, n=n_max)
        results[truth.query_id] = res
    return results


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if args.task not in ("ir", "ps"):
        raise UsageError(f"--task must be 'ir' or 'ps', got {args.task!r}")
    try:
        n_values = tuple(int(v) for v in args.n_list.split(","))
    except ValueError as e:
        raise UsageError(f"--n-list must be comma-separated integers: {args.n_list!r}") from e
    idx = load_index(args.index)
    try:
        gt = evaluation.load_ground_truth(args.gt)
    except (OSError, KeyError, ValueError) as e:
        raise DataError(f"cannot load ground truth {args.gt}: {e}") from e
    if not gt.queries:
        raise DataError(f"ground truth {args.gt} contains no queries")

    results = _query_results_for_eval(idx, cfg, gt, args.queries, max(n_values), args.pp)
    if args.task == "ir":
        report = evaluation.eval_ir(results, gt, n_values)
    else:
        report = evaluation.eval_ps(results, gt, n_values)
    print(report.to_json())
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    idx = load_index(args.index)
    modes = args.modes.split(",")
    for m in modes:
        if m not in MODES:
            raise UsageError(f"unknown mode {m!r} in --modes")
    qdir = Path(args.queries)
    if not qdir.is_dir():
        raise DataError(f"queries directory not found: {args.queries}")
    images = [imgproc.load_image(p) for p in sorted(qdir.glob("*.png"))]
    if not images:
        raise DataError(f"no query PNGs in {args.queries}")

    store = storage_report(len(idx), idx.profile.dims)
    fp_gib, bin_gib = store.gib()
    rows = []
    for m in modes:
        stats = evaluation.benchmark(idx, images, m, n=cfg.n)
        rows.append(
            {
                "mode": m,
                "queries": stats.query_count,
                "scan_mean_s": round(stats.scan_mean_s, 6),
                "scan_std_s": round(stats.scan_std_s, 6),
                "extract_mean_s": round(stats.extract_mean_s, 6),
            }
        )
    print(
        json.dumps(
            {
                "candidates": len(idx),
                "dims": idx.profile.dims,
                "float_gib": round(fp_gib, 6),
                "binary_gib": round(bin_gib, 6),
                "ratio": round(store.ratio, 4),
                "timings": rows,
            },
            sort_keys=True,
            indent=2,
        )
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pagespot",
        description="Pattern spotting and image retrieval over scanned document pages.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--pages", type=int, default=20)
    p.add_argument("--page-size", default="320x240")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--plants", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("index", help="build a search index from a directory of pages")
    p.add_argument("--pages", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--external-features", help="PSFEAT01 file to ingest instead of extracting")
    p.add_argument("--profile", help="profile name for --external-features")
    _add_config_flags(
        p,
        "alpha",
        "min_side",
        "max_side_frac",
        "seg_k",
        "seg_min_size",
        "seg_sigma",
        "edge_low",
        "edge_high",
        "normalize",
        "workers",
    )
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="rank index candidates against query images")
    p.add_argument("--index", required=True)
    p.add_argument("--query", nargs="+", required=True)
    p.add_argument("--pp", action="store_true", help="apply union post-processing")
    p.add_argument("--out", help="write JSONL here instead of stdout")
    p.add_argument("--overlay-dir", help="write overlay PNGs of the top boxes")
    p.add_argument("--pages", help="pages directory (for --overlay-dir)")
    p.add_argument("--config")
    _add_config_flags(p, "mode", "n", "pool_size", "union_iou")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="score a built index against ground truth")
    p.add_argument("--index", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--queries", required=True, help="directory of <query_id>.png crops")
    p.add_argument("--task", required=True)
    p.add_argument("--n-list", default="100,300,500,700,1000")
    p.add_argument("--pp", action="store_true")
    p.add_argument("--config")
    _add_config_flags(p, "mode", "pool_size", "union_iou")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time scans and report storage cost")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--modes", default="euclidean,hamming")
    p.add_argument("--config")
    _add_config_flags(p, "n")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FeatureFileError, IndexBuildError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

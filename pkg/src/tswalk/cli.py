"""Command line entry point.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from .errors import ValidationError
from .graphlets import census_summary
from .pipeline import DEFAULT_GRID, PRESETS, PipelineConfig, StageError, alpha_sweep, default_threads, run_pipeline


def parse_grid(text: str) -> list[float]:
    """``default``, a comma list ``0,0.5,1`` or a range ``start:stop:step`` (inclusive)."""
    if text == "default":
        return list(DEFAULT_GRID)
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        n = int(round((stop - start) / step))
        return [round(start + i * step, 10) for i in range(n + 1)]
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tswalk",
        description="Dynamic-graphlet similarity + temporal-structural random walk node embeddings.",
    )
    p.add_argument("--input", required=True, help="edge list with 'src dst t' lines")
    p.add_argument("--labels", help="'node class' lines; enables evaluation")
    p.add_argument("--preset", choices=sorted(PRESETS), help="dataset preset (flags given explicitly win)")
    p.add_argument("--directed", action="store_true")
    p.add_argument("--dims", type=int)
    p.add_argument("--walk-length", type=int)
    walks = p.add_mutually_exclusive_group()
    walks.add_argument("--num-walks", type=int, help="total walks (default 10 per node)")
    walks.add_argument("--walks-per-node", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--alpha-sweep", nargs="?", const="default", metavar="GRID",
                   help="sweep alpha: 'default' (0..1 step 0.025), 'a,b,c' or 'start:stop:step'")
    p.add_argument("--sweep-seeds", type=int, default=1, help="seeds averaged per sweep point")
    p.add_argument("--graphlet-nodes", type=int)
    p.add_argument("--graphlet-events", type=int)
    p.add_argument("--delta-t", type=int)
    p.add_argument("--topk", type=int)
    p.add_argument("--variance-target", type=float)
    p.add_argument("--standardize-pca", action="store_true", default=None)
    p.add_argument("--symmetrize", action="store_true", default=None,
                   help="add reciprocal similarity edges")
    p.add_argument("--negatives", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--strict-time", action="store_true", default=None,
                   help="temporal steps need t' > t instead of t' >= t")
    p.add_argument("--start", choices=["uniform", "earliest"])
    p.add_argument("--folds", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads (env TSWALK_THREADS; default 1)")
    p.add_argument("--out-dir")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> PipelineConfig:
    base = dict(PRESETS[args.preset]) if args.preset else {}
    fields = {f.name for f in dataclasses.fields(PipelineConfig)}
    for name in fields:
        val = getattr(args, name, None)
        if val is not None:
            base[name] = val
    if args.threads is None:
        base["threads"] = default_threads()
    return PipelineConfig(**base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.alpha_sweep is not None:
            grid = parse_grid(args.alpha_sweep)
            if any(not 0 <= a <= 1 for a in grid):
                raise ValidationError("alpha grid values must lie in [0, 1]")
            rows = alpha_sweep(cfg, grid, seeds=list(range(cfg.seed, cfg.seed + args.sweep_seeds)))
            print(f"{'alpha':>7} {'AP':>8} {'±':>7} {'AUROC':>8} {'±':>7}")
            for r in rows:
                print(f"{r.alpha:>7.3f} {r.ap_mean:>8.4f} {r.ap_std:>7.4f} {r.auroc_mean:>8.4f} {r.auroc_std:>7.4f}")
            best = max(rows, key=lambda r: r.ap_mean)
            print(f"best alpha={best.alpha:g} AP={best.ap_mean:.4f} AUROC={best.auroc_mean:.4f}")
        else:
            res = run_pipeline(cfg)
            print(res.graph.summary())
            print(census_summary(res.dgdv))
            print(f"pca_components={res.pca.num_components} "
                  f"variance={float(np.sum(res.pca.explained_variance_ratio)):.4f}")
            c = res.corpus
            print(f"walks={len(c)} temporal_steps={c.temporal_steps} structural_steps={c.structural_steps} "
                  f"early_terminations={c.early_terminations}")
            if res.report is not None:
                print(res.report.table(), end="")
            print(f"artifacts in {cfg.out_dir}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        if isinstance(exc.cause, ValidationError):
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

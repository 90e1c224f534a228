"""Ablation sweeps over decomposition level, detail norm and stride."""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fusion import FusionConfig, iter_fused_levels
from .latlrr import ProjectionMatrix
from .metrics import METRIC_NAMES, evaluate, quantize

log = logging.getLogger(__name__)

LEVELS = tuple(range(1, 9))
NORMS = ("l1", "nuclear")
STRIDES = (1, 2, 4, 6, 8, 10, 12, 14)
STRIDE_LEVELS = (1, 2, 3, 4)

Pair = tuple[str, np.ndarray, np.ndarray]


@dataclass
class Cell:
    sweep: str
    norm: str
    stride: int
    level: int
    pairs: int = 0
    seconds: float = 0.0
    means: dict[str, float] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "sweep": self.sweep,
            "norm": self.norm,
            "stride": self.stride,
            "level": self.level,
            "pairs": self.pairs,
            "seconds": round(self.seconds, 3),
            **self.means,
        }


def exported(img: np.ndarray) -> np.ndarray:
    """What a reader of the written 8-bit file would see, back on [0, 1]."""
    return quantize(img) / 255.0


def run_grid(
    pairs: Sequence[Pair],
    proj: ProjectionMatrix,
    sweep: str,
    norms: Iterable[str],
    strides: Iterable[int],
    max_level: int,
) -> list[Cell]:
    """Evaluate every (norm, stride, level<=max_level) cell averaged over ``pairs``.

    One fusion pass per (pair, norm, stride) yields all levels. A cell's wall
    time is the incremental fusion time of its level plus its evaluation.
    """
    cells: dict[tuple[str, int, int], Cell] = {}
    scores: dict[tuple[str, int, int], list[dict]] = defaultdict(list)
    for norm in norms:
        for stride in strides:
            cfg = FusionConfig(levels=max_level, stride=stride, detail_norm=norm)
            for pair_id, a, b in pairs:
                t0 = time.perf_counter()
                for level, fused in enumerate(iter_fused_levels(a, b, proj, cfg), start=1):
                    report = evaluate(a, b, exported(fused), pair_id)
                    key = (norm, stride, level)
                    cell = cells.setdefault(key, Cell(sweep, norm, stride, level))
                    t1 = time.perf_counter()
                    cell.seconds += t1 - t0
                    t0 = t1
                    scores[key].append(report.values)
                log.info("%s norm=%s stride=%d pair=%s done", sweep, norm, stride, pair_id)
    for key, cell in cells.items():
        rows = scores[key]
        cell.pairs = len(rows)
        cell.means = {m: float(np.mean([r[m] for r in rows])) for m in METRIC_NAMES}
    return [cells[k] for k in sorted(cells)]


def level_sweep(pairs: Sequence[Pair], proj: ProjectionMatrix, stride: int = 1,
                levels: int = 8, norms: Iterable[str] = NORMS) -> list[Cell]:
    return run_grid(pairs, proj, "levels", norms, [stride], levels)


def stride_sweep(pairs: Sequence[Pair], proj: ProjectionMatrix, strides: Iterable[int] = STRIDES,
                 levels: int = 4, norm: str = "nuclear") -> list[Cell]:
    return run_grid(pairs, proj, "strides", [norm], strides, levels)


def cell_table(cells: Sequence[Cell], metric: str, row: str, col: str) -> dict:
    """Nested ``{row_value: {col_value: mean}}`` view of one metric, for plotting."""
    table: dict = defaultdict(dict)
    for c in cells:
        table[getattr(c, row)][getattr(c, col)] = c.means[metric]
    return dict(table)

"""Scalability harness: a write/read grid over the sharded store.

Each grid cell spawns `writers` insert operations (tweet insert plus
topic-collection update) and `readers` count queries on a cold store,
repeated `runs` times; cells report mean and stdev wall-clock seconds.
Workers are tasks on a bounded thread pool, so cells in the tens of
thousands stay runnable on a desk machine.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

from .gateway import bench_once
from .relay import DocumentStore

__all__ = ["BenchReport", "run_grid", "write_csv", "DEFAULT_GRID"]

DEFAULT_GRID = (100, 1000, 10_000, 100_000)


@dataclass(frozen=True)
class BenchReport:
    writers: int
    readers: int
    runs: int
    mean_s: float
    stdev_s: float
    samples: tuple[float, ...]

    def __post_init__(self):
        if self.runs != len(self.samples):
            raise ValueError("runs must equal number of samples")


def run_grid(
    sizes: Sequence[int] | None = None,
    runs: int = 10,
    pool_size: int = 8,
    shard_count: int = 4,
    cells: Iterable[tuple[int, int]] | None = None,
) -> list[BenchReport]:
    """All (writers, readers) combinations of `sizes` (or explicit
    cells), each on a fresh store per run to avoid cache bleed."""
    if cells is None:
        sizes = tuple(sizes or DEFAULT_GRID)
        cells = [(w, r) for w in sizes for r in sizes]
    reports = []
    for writers, readers in cells:
        # one untimed warmup on a throwaway store settles thread caches
        bench_once(DocumentStore(shard_count=shard_count),
                   min(writers, 2000), min(readers, 2000), pool_size=pool_size)
        samples = []
        for run in range(runs):
            store = DocumentStore(shard_count=shard_count)
            elapsed = bench_once(store, writers, readers,
                                 pool_size=pool_size, seed=run)
            if store.count("tweets") != writers:
                raise AssertionError(
                    f"durability violated: {store.count('tweets')} != {writers}"
                )
            samples.append(elapsed)
        mean = statistics.fmean(samples)
        stdev = statistics.stdev(samples) if len(samples) > 1 else 0.0
        reports.append(BenchReport(
            writers=writers, readers=readers, runs=runs,
            mean_s=mean, stdev_s=stdev, samples=tuple(samples),
        ))
    return reports


def write_csv(reports: Iterable[BenchReport], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["writers", "readers", "mean_s", "stdev_s"])
        for r in reports:
            writer.writerow([r.writers, r.readers, f"{r.mean_s:.6f}", f"{r.stdev_s:.6f}"])


def format_table(reports: Sequence[BenchReport]) -> str:
    """Readers across, writers down, `mean +/- stdev` cells."""
    readers = sorted({r.readers for r in reports})
    writers = sorted({r.writers for r in reports})
    by_cell = {(r.writers, r.readers): r for r in reports}
    lines = ["writers\\readers\t" + "\t".join(str(r) for r in readers)]
    for w in writers:
        row = [str(w)]
        for r in readers:
            rep = by_cell.get((w, r))
            row.append(f"{rep.mean_s:.2f}+/-{rep.stdev_s:.2f}" if rep else "-")
        lines.append("\t".join(row))
    return "\n".join(lines)

"""Strong-scaling and mode-comparison benchmark harness.

Times the three-hop query end to end (multiHopReasoning) and per stage
(computeScorePerPerson, computeScoreBasedOnWorksInDL,
computeAffiliationScore), plus the generic path engine (genericMHR),
for each requested mode and worker count. Warmup runs are discarded and
the median of the remaining repetitions is reported, with speedup
relative to the same mode and stage at one worker.

Before any timing, the harness runs all three three-hop implementations
(optimized, simple, oracle) plus the generic engine against its oracle
once on the generated dataset and aborts if they disagree, so a timing
run can never report numbers for divergent code paths.
"""

from __future__ import annotations

import csv
import os
import statistics
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

from .errors import ArgumentError, BenchError
from .generator import GeneratorSpec, generate
from .generic import multihop_reasoning_generic
from .oracle import oracle_beam_paths, oracle_three_hop
from .pipeline import (
    STAGE_HOP1,
    STAGE_HOP2,
    STAGE_HOP3,
    STAGE_TOTAL,
    AffiliationResult,
    ThreeHopQuery,
    three_hop_query,
)

STAGE_GENERIC = "genericMHR"

CSV_HEADER = ["stage", "mode", "workers", "runtime_ms", "speedup"]


@dataclass(frozen=True)
class BenchSpec:
    """Dataset parameters plus the benchmark grid."""

    entities: int = 12000
    persons: int = 2000
    universities: int = 5000
    edges: int = 12000
    relations: int = 3
    dim: int = 8
    seed: int = 42
    noise: float = 0.01
    plants: int = 10
    k: int = 50
    gamma: float = 1.0
    modes: tuple[str, ...] = ("simple", "optimized")
    workers: tuple[int, ...] = (1, 2, 4, 8)
    repetitions: int = 5
    warmups: int = 1
    generic_hops: int = 3

    def __post_init__(self):
        if self.repetitions < 3:
            raise ArgumentError("repetitions must be >= 3 for a meaningful median")
        if self.warmups < 0:
            raise ArgumentError("warmups must be >= 0")
        if not self.workers or list(self.workers) != sorted(set(self.workers)):
            raise ArgumentError("worker counts must be ascending and unique")
        if self.workers[0] != 1:
            raise ArgumentError("worker counts must start at 1 (speedup baseline)")
        bad = [m for m in self.modes if m not in ("simple", "optimized", "oracle")]
        if bad:
            raise ArgumentError(f"unknown modes {bad}")

    def generator_spec(self) -> GeneratorSpec:
        return GeneratorSpec(
            num_entities=self.entities,
            num_persons=self.persons,
            num_universities=self.universities,
            num_edges=self.edges,
            num_relations=self.relations,
            dim=self.dim,
            seed=self.seed,
            noise=self.noise,
            plants=self.plants,
        )


@dataclass
class BenchRecord:
    stage: str
    mode: str
    workers: int
    runtime_ms: float
    speedup: float


def _results_match(a: AffiliationResult, b: AffiliationResult, tol: float = 1e-9) -> bool:
    if [p.entity for p in a.ranked_persons] != [p.entity for p in b.ranked_persons]:
        return False
    if any(abs(x.score - y.score) > tol for x, y in zip(a.ranked_persons, b.ranked_persons)):
        return False
    if list(a.affiliations.keys()) != list(b.affiliations.keys()):
        return False
    for pid in a.affiliations:
        ua, ub = a.affiliations[pid], b.affiliations[pid]
        if [u.entity for u in ua] != [u.entity for u in ub]:
            return False
        if any(abs(x.score - y.score) > tol for x, y in zip(ua, ub)):
            return False
    return True


def _cross_check(store, query, source, target, hops, k, gamma, check_workers) -> None:
    reference = oracle_three_hop(store, query)
    for mode in ("optimized", "simple"):
        got = three_hop_query(store, query, mode=mode, workers=check_workers)
        if not _results_match(reference, got):
            raise BenchError(f"correctness cross-check failed: {mode} != oracle")
    engine_paths = multihop_reasoning_generic(
        store, source, target, hops, k, workers=check_workers, gamma=gamma
    )
    oracle_paths = oracle_beam_paths(store, source, target, hops, k, gamma=gamma)
    if engine_paths != oracle_paths:
        raise BenchError("correctness cross-check failed: generic engine != oracle")


def run_bench(
    spec: BenchSpec, csv_path: str | Path | None = None, echo: bool = False
) -> list[BenchRecord]:
    """Run the benchmark grid; returns records and optionally appends CSV."""
    hw = os.cpu_count() or 1
    if max(spec.workers) > hw:
        warnings.warn(
            f"requested {max(spec.workers)} workers on {hw} CPUs; "
            "running oversubscribed",
            stacklevel=2,
        )

    dataset = generate(spec.generator_spec())
    store = dataset.build_store()
    query = ThreeHopQuery(
        anchor1=dataset.award_anchor,
        rel1=0,
        anchor2=dataset.field_anchor,
        rel2=1,
        rel3=2,
        k=spec.k,
        gamma=spec.gamma,
    )
    source = dataset.award_anchor
    target = int(dataset.university_ids[0])
    check_workers = min(4, max(spec.workers))
    _cross_check(
        store, query, source, target, spec.generic_hops, spec.k, spec.gamma, check_workers
    )

    records: list[BenchRecord] = []
    base_ms: dict[tuple[str, str], float] = {}

    for mode in spec.modes:
        worker_counts = (1,) if mode == "oracle" else spec.workers
        for w in worker_counts:
            samples: dict[str, list[float]] = {}

            def run_once(collect: bool) -> None:
                timings: dict = {}
                start = time.perf_counter()
                if mode == "oracle":
                    oracle_three_hop(store, query, timings=timings)
                else:
                    three_hop_query(store, query, mode=mode, workers=w, timings=timings)
                total = time.perf_counter() - start
                if collect:
                    samples.setdefault(STAGE_TOTAL, []).append(total)
                    for key in (STAGE_HOP1, STAGE_HOP2, STAGE_HOP3):
                        samples.setdefault(key, []).append(timings[key])

            def run_generic_once(collect: bool) -> None:
                start = time.perf_counter()
                if mode == "oracle":
                    oracle_beam_paths(
                        store, source, target, spec.generic_hops, spec.k, gamma=spec.gamma
                    )
                else:
                    multihop_reasoning_generic(
                        store, source, target, spec.generic_hops, spec.k,
                        workers=w, gamma=spec.gamma,
                    )
                if collect:
                    samples.setdefault(STAGE_GENERIC, []).append(time.perf_counter() - start)

            for _ in range(spec.warmups):
                run_once(collect=False)
            for _ in range(spec.repetitions):
                run_once(collect=True)
            if mode != "simple":
                for _ in range(spec.warmups):
                    run_generic_once(collect=False)
                for _ in range(spec.repetitions):
                    run_generic_once(collect=True)

            for stage, values in samples.items():
                ms = statistics.median(values) * 1000.0
                key = (mode, stage)
                if w == 1:
                    base_ms[key] = ms
                speedup = base_ms[key] / ms if ms > 0 else float("inf")
                records.append(BenchRecord(stage, mode, w, ms, speedup))

    if csv_path is not None:
        write_csv(records, csv_path)
    if echo:
        print(format_table(records))
    return records


def write_csv(records: list[BenchRecord], path: str | Path) -> None:
    """Append records; the header is written only when the file is new/empty."""
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.stage, r.mode, r.workers, f"{r.runtime_ms:.6f}", f"{r.speedup:.6f}"]
            )


def read_csv(path: str | Path) -> list[BenchRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            BenchRecord(
                row["stage"], row["mode"], int(row["workers"]),
                float(row["runtime_ms"]), float(row["speedup"]),
            )
            for row in reader
        ]


def format_table(records: list[BenchRecord]) -> str:
    lines = [f"{'stage':<34} {'mode':<10} {'workers':>7} {'runtime_ms':>14} {'speedup':>9}"]
    for r in records:
        lines.append(
            f"{r.stage:<34} {r.mode:<10} {r.workers:>7d} {r.runtime_ms:>14.3f} {r.speedup:>9.2f}"
        )
    return "\n".join(lines)

"""The three-hop affiliation query, in two interchangeable implementations.

`optimized` uses thread-private bounded selectors plus a tree (or locked)
reduction. `simple` is the naive baseline a first implementation would
use: every worker appends each (entity, score) pair to one shared list
under a mutex, and the coordinator fully sorts the list per stage. Both
modes share the scoring kernels and return identical results; they exist
so benchmarks can quantify the data-structure difference honestly.

Hop semantics:
  hop 1  score every person (tails of rel1) against emb(anchor1)+emb(rel1),
         keep the top k.
  hop 2  re-score exactly those k persons against emb(anchor2)+emb(rel2)
         and re-rank; hop-1 scores are replaced, not combined, and remain
         available in AffiliationResult.hop1_persons for diagnostics.
  hop 3  for each ranked person, score every university (tails of rel3)
         against emb(person)+emb(rel3), keep the top k per person.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

from .errors import ArgumentError, QueryError
from .kgstore import EntitySet, KGStore, extract_entities
from .parallel import WorkerGang, block_bounds
from .scoring import (
    ScoringConfig,
    embedding_aggregation,
    score_candidates_topk,
    score_candidates_topk_many,
    transe_score,
)
from .topk import NEG_INF, ScoredEntity

import numpy as np

STAGE_HOP1 = "computeScorePerPerson"
STAGE_HOP2 = "computeScoreBasedOnWorksInDL"
STAGE_HOP3 = "computeAffiliationScore"
STAGE_TOTAL = "multiHopReasoning"

MODES = ("simple", "optimized")


@dataclass(frozen=True)
class ThreeHopQuery:
    anchor1: int
    rel1: int
    anchor2: int
    rel2: int
    rel3: int
    k: int = 50
    gamma: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ArgumentError(f"k must be >= 1, got {self.k}")
        if not math.isfinite(self.gamma):
            raise ArgumentError(f"gamma must be finite, got {self.gamma}")


@dataclass
class AffiliationResult:
    """Ranked persons after hop 2 plus per-person ranked universities.

    hop1_persons carries the hop-1 ranking (diagnostic; hop-2 scores
    replace hop-1 scores in ranked_persons).
    """

    ranked_persons: list[ScoredEntity]
    affiliations: dict[int, list[ScoredEntity]]
    hop1_persons: list[ScoredEntity] = field(default_factory=list)

    def machine_lines(self) -> list[str]:
        """Stable machine-readable rendering.

        Person lines:      person_id<TAB>person_score<TAB>rank
        Affiliation lines: person_id<TAB>university_id<TAB>score<TAB>rank
        """
        lines = []
        for rank, p in enumerate(self.ranked_persons, 1):
            lines.append(f"{p.entity}\t{p.score!r}\t{rank}")
        for pid, unis in self.affiliations.items():
            for rank, u in enumerate(unis, 1):
                lines.append(f"{pid}\t{u.entity}\t{u.score!r}\t{rank}")
        return lines

    def table(self) -> str:
        """Human-readable rendering."""
        out = ["rank  person        score"]
        for rank, p in enumerate(self.ranked_persons, 1):
            out.append(f"{rank:<5d} {p.entity:<13d} {p.score:.6g}")
        for pid, unis in self.affiliations.items():
            out.append(f"affiliations of person {pid}:")
            for rank, u in enumerate(unis, 1):
                out.append(f"  {rank:<4d} university {u.entity:<13d} {u.score:.6g}")
        return "\n".join(out)


def _require_relation(store: KGStore, rid: int, name: str) -> None:
    if not (0 <= rid < store.num_relations):
        raise QueryError(f"{name}={rid} is not a relation of this store (have {store.num_relations})")


def _require_anchor(store: KGStore, eid: int, name: str):
    emb = store.entity_embedding(eid)
    if emb is None:
        raise QueryError(f"{name}={eid} has no embedding")
    return emb


def _simple_topk_scan(
    composite,
    candidates: EntitySet,
    store: KGStore,
    k: int,
    workers: int,
    gamma: float,
    stats: dict | None = None,
) -> list[ScoredEntity]:
    """Naive baseline scan: shared locked list, then one full sort.

    Deliberately preserves the baseline's cost profile: one mutex
    acquisition per scored candidate and an O(n log n) sort per stage.
    """
    comp_list = composite.tolist() if isinstance(composite, np.ndarray) else list(composite)
    ids = candidates.ids.tolist()
    shared: list[ScoredEntity] = []
    lock = threading.Lock()

    def work(wid: int) -> None:
        lo, hi = block_bounds(len(ids), workers, wid)
        for eid in ids[lo:hi]:
            emb = store.entity_embedding(eid)
            if emb is None:
                item = ScoredEntity(eid, NEG_INF)
            else:
                item = ScoredEntity(eid, transe_score(comp_list, emb, gamma))
            with lock:
                shared.append(item)

    WorkerGang(workers).run(work)
    if stats is not None:
        stats["score_evals"] = stats.get("score_evals", 0) + len(ids)
    shared.sort(key=lambda it: it.order_key())
    return shared[:k]


def _scan(mode: str):
    if mode == "optimized":
        return score_candidates_topk
    return _simple_topk_scan


def rescore_with_relation(
    persons: list[ScoredEntity],
    anchor: int,
    rel: int,
    store: KGStore,
    k: int,
    workers: int = 1,
    mode: str = "optimized",
    merge: str = "tree",
    gamma: float = 1.0,
    stats: dict | None = None,
) -> list[ScoredEntity]:
    """Re-score the given persons against emb(anchor)+emb(rel) and re-rank.

    Prior scores are discarded; the returned list holds the same entities
    in the new score order (ties by ascending id).
    """
    if len(persons) > k:
        raise ArgumentError(f"rescore got {len(persons)} persons for k={k}")
    _require_relation(store, rel, "rel")
    emb = _require_anchor(store, anchor, "anchor")
    composite = embedding_aggregation(emb, store.relation_embedding(rel))
    candidates = EntitySet(
        ids=np.array([p.entity for p in persons], dtype=np.uint64), role="person"
    )
    if mode == "optimized":
        return score_candidates_topk(
            composite, candidates, store, k, workers, gamma, merge, stats
        )
    return _simple_topk_scan(composite, candidates, store, k, workers, gamma, stats)


def three_hop_query(
    store: KGStore,
    q: ThreeHopQuery,
    mode: str = "optimized",
    workers: int = 1,
    merge: str = "tree",
    timings: dict | None = None,
    stats: dict | None = None,
) -> AffiliationResult:
    """Run the three-hop query. `simple` and `optimized` return identical results.

    When given, `timings` receives per-stage wall seconds keyed by
    STAGE_HOP1/STAGE_HOP2/STAGE_HOP3, and `stats` receives
    hop{1,2,3}_evals score-evaluation counts.
    """
    store.require_sealed()
    if mode not in MODES:
        raise ArgumentError(f"mode must be one of {MODES}, got {mode!r}")
    if workers < 1:
        raise ArgumentError(f"workers must be >= 1, got {workers}")
    for rid, name in ((q.rel1, "rel1"), (q.rel2, "rel2"), (q.rel3, "rel3")):
        _require_relation(store, rid, name)
    emb1 = _require_anchor(store, q.anchor1, "anchor1")
    _require_anchor(store, q.anchor2, "anchor2")
    config = ScoringConfig(gamma=q.gamma, dim=store.dim)

    persons = extract_entities(store.edge_table(q.rel1), "tail", role="person")
    comp1 = embedding_aggregation(emb1, store.relation_embedding(q.rel1))

    def staged(key):
        start = time.perf_counter()

        def done():
            if timings is not None:
                timings[key] = time.perf_counter() - start

        return done

    hop_stats: dict = {}

    done = staged(STAGE_HOP1)
    hop1 = _scan(mode)(comp1, persons, store, q.k, workers, config.gamma, stats=hop_stats)
    done()
    if stats is not None:
        stats["hop1_evals"] = hop_stats.pop("score_evals", 0)

    done = staged(STAGE_HOP2)
    hop2 = rescore_with_relation(
        hop1, q.anchor2, q.rel2, store, q.k, workers, mode, merge, config.gamma, hop_stats
    )
    done()
    if stats is not None:
        stats["hop2_evals"] = hop_stats.pop("score_evals", 0)

    universities = extract_entities(store.edge_table(q.rel3), "tail", role="university")
    rel3_emb = store.relation_embedding(q.rel3)

    done = staged(STAGE_HOP3)
    affiliations: dict[int, list[ScoredEntity]] = {}
    if mode == "optimized":
        composites = []
        for p in hop2:
            pe = store.entity_embedding(p.entity)
            composites.append(None if pe is None else embedding_aggregation(pe, rel3_emb))
        per_person = score_candidates_topk_many(
            composites, universities, store, q.k, workers, config.gamma, merge, hop_stats
        )
        for p, unis in zip(hop2, per_person):
            affiliations[p.entity] = unis if unis is not None else []
    else:
        for p in hop2:
            pe = store.entity_embedding(p.entity)
            if pe is None:
                affiliations[p.entity] = []
                continue
            comp = embedding_aggregation(pe, rel3_emb)
            affiliations[p.entity] = _simple_topk_scan(
                comp, universities, store, q.k, workers, config.gamma, hop_stats
            )
    done()
    if stats is not None:
        stats["hop3_evals"] = hop_stats.pop("score_evals", 0)

    return AffiliationResult(
        ranked_persons=hop2, affiliations=affiliations, hop1_persons=hop1
    )

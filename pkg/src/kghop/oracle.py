"""Slow, obviously-correct sequential references.

Everything here is single-threaded, list-based, and free of bounded
heaps: scores for a stage are computed into a plain list, fully sorted,
and truncated. These functions back the test suite and the CLI's
`--mode oracle`; any divergence between an engine and its oracle is an
engine bug by construction.

Scoring uses explicit Python loops in ascending index order, which is
bit-identical to the engines' kernels, so comparisons are exact.
"""

from __future__ import annotations

import time

from .errors import ArgumentError, QueryError
from .kgstore import KGStore
from .generic import Path, ScoredPath, total_frontier_capacity
from .pipeline import (
    STAGE_HOP1,
    STAGE_HOP2,
    STAGE_HOP3,
    AffiliationResult,
    ThreeHopQuery,
)
from .topk import NEG_INF, ScoredEntity


def oracle_topk(items, k: int) -> list[ScoredEntity]:
    """Sort everything by (score desc, id asc), truncate to k."""
    if k < 0:
        raise ArgumentError(f"k must be >= 0, got {k}")
    ranked = sorted(items, key=lambda it: (-it.score, it.entity))
    return ranked[:k]


def _tail_ids(store: KGStore, rel: int) -> list[int]:
    seen: set[int] = set()
    for _, tails in store.edge_table(rel).items():
        seen.update(tails.tolist())
    return sorted(seen)


def _score_against(store: KGStore, composite: list[float], eid: int, gamma: float) -> float:
    emb = store.entity_embedding(eid)
    if emb is None:
        return NEG_INF
    total = 0.0
    for a, b in zip(composite, emb.tolist()):
        total += abs(a - b)
    return gamma - total


def _composite(store: KGStore, eid: int, rel: int, what: str) -> list[float]:
    emb = store.entity_embedding(eid)
    if emb is None:
        raise QueryError(f"{what}={eid} has no embedding")
    rel_emb = store.relation_embedding(rel)
    return [a + b for a, b in zip(emb.tolist(), rel_emb.tolist())]


def oracle_three_hop(
    store: KGStore, q: ThreeHopQuery, timings: dict | None = None
) -> AffiliationResult:
    """Sequential restatement of the three-hop query semantics."""
    store.require_sealed()
    for rid, name in ((q.rel1, "rel1"), (q.rel2, "rel2"), (q.rel3, "rel3")):
        if not (0 <= rid < store.num_relations):
            raise QueryError(f"{name}={rid} is not a relation of this store")

    def timed(key):
        start = time.perf_counter()

        def done():
            if timings is not None:
                timings[key] = time.perf_counter() - start

        return done

    persons = _tail_ids(store, q.rel1)
    comp1 = _composite(store, q.anchor1, q.rel1, "anchor1")

    done = timed(STAGE_HOP1)
    scored = [ScoredEntity(pid, _score_against(store, comp1, pid, q.gamma)) for pid in persons]
    hop1 = oracle_topk(scored, q.k)
    done()

    comp2 = _composite(store, q.anchor2, q.rel2, "anchor2")
    done = timed(STAGE_HOP2)
    rescored = [ScoredEntity(p.entity, _score_against(store, comp2, p.entity, q.gamma)) for p in hop1]
    hop2 = oracle_topk(rescored, q.k)
    done()

    universities = _tail_ids(store, q.rel3)
    rel3_emb = store.relation_embedding(q.rel3).tolist()
    done = timed(STAGE_HOP3)
    affiliations: dict[int, list[ScoredEntity]] = {}
    for p in hop2:
        pemb = store.entity_embedding(p.entity)
        if pemb is None:
            affiliations[p.entity] = []
            continue
        comp = [a + b for a, b in zip(pemb.tolist(), rel3_emb)]
        scored_unis = [
            ScoredEntity(uid, _score_against(store, comp, uid, q.gamma)) for uid in universities
        ]
        affiliations[p.entity] = oracle_topk(scored_unis, q.k)
    done()

    return AffiliationResult(ranked_persons=hop2, affiliations=affiliations, hop1_persons=hop1)


def oracle_beam_paths(
    store: KGStore,
    source: int,
    target: int,
    num_hops: int,
    k: int,
    gamma: float = 1.0,
) -> list[ScoredPath]:
    """Depth-first single-threaded replay of the per-parent beam rule.

    Expands every surviving path recursively: children are enumerated in
    ascending (relation, tail) order, scored, and truncated to the k best
    per parent under (score desc, relation asc, tail asc). Completed
    paths collect in a plain list, sorted and truncated only at the end.
    """
    store.require_sealed()
    if num_hops < 1:
        raise ArgumentError(f"num_hops must be >= 1, got {num_hops}")
    total_frontier_capacity(k, num_hops)
    if source == target:
        return []
    src = store.entity_embedding(source)
    if src is None:
        raise QueryError(f"source entity {source} has no embedding")

    rel_embs = [store.relation_embedding(r).tolist() for r in range(store.num_relations)]
    completed: list[ScoredPath] = []

    def expand(nodes: tuple, rels: tuple, comp: list[float], level: int) -> None:
        if level == num_hops:
            return
        horizon = nodes[-1]
        children = []
        for rel in range(store.num_relations):
            tails = store.edge_tables[rel].tails(horizon)
            if len(tails) == 0:
                continue
            ext = [a + b for a, b in zip(comp, rel_embs[rel])]
            for tail in tails.tolist():
                if tail in nodes:
                    continue
                temb = store.entity_embedding(tail)
                if temb is None:
                    continue
                total = 0.0
                for a, b in zip(ext, temb.tolist()):
                    total += abs(a - b)
                score = gamma - total
                if tail == target:
                    completed.append(
                        ScoredPath(Path(nodes + (tail,), rels + (rel,)), score)
                    )
                else:
                    children.append((score, rel, tail, ext))
        children.sort(key=lambda c: (-c[0], c[1], c[2]))
        for score, rel, tail, ext in children[:k]:
            expand(nodes + (tail,), rels + (rel,), ext, level + 1)

    expand((source,), (), src.tolist(), 0)
    completed.sort(key=lambda sp: (-sp.score, sp.path.interleaved()))
    return completed[:k]

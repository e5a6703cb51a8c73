"""Knowledge-graph storage: edge tables, embedding tables, and loaders.

The store has two phases. During the build phase, edge tables and the
entity-embedding map accept concurrent inserts guarded by striped
(per-bucket-group) locks. After an explicit seal() the store is
immutable: reads take no locks, edge tails are canonically sorted
numpy arrays, and entity embeddings are additionally exposed as one
id-sorted dense matrix for vectorized gathers.

File formats (UTF-8, LF, no header):
  edge list:  head<TAB>relation<TAB>tail        unsigned decimal integers
  embeddings: id<TAB>v0 v1 ... v{dim-1}          components space-separated floats
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    ArgumentError,
    CompletenessError,
    DimensionError,
    DuplicateIdError,
    EmbeddingValueError,
    ParseError,
    RelationRangeError,
    SealError,
)
from .parallel import WorkerGang, block_bounds

U64_MAX = 2**64 - 1
_EMPTY_U64 = np.empty(0, dtype=np.uint64)


class StripedMap:
    """Insert-only hash map with striped locks for the build phase.

    Inserts are atomic per key: each key hashes to one stripe whose lock
    serializes writers. Duplicate keys are rejected (silent overwrite
    would make ingestion nondeterministic). After seal(), inserts raise
    and finds are plain dict reads with no synchronization.
    """

    def __init__(self, num_stripes: int = 64):
        if num_stripes < 1:
            raise ArgumentError("num_stripes must be >= 1")
        self._stripes: list[dict] = [{} for _ in range(num_stripes)]
        self._locks = [threading.Lock() for _ in range(num_stripes)]
        self._n = num_stripes
        self._sealed = False

    def _stripe(self, key) -> int:
        return hash(key) % self._n

    def insert(self, key, value) -> None:
        if self._sealed:
            raise SealError("insert after seal")
        idx = self._stripe(key)
        with self._locks[idx]:
            stripe = self._stripes[idx]
            if key in stripe:
                raise DuplicateIdError(f"duplicate id {key}")
            stripe[key] = value

    def get(self, key):
        """Value for key, or None. Lock-free; contractual only after seal."""
        return self._stripes[self._stripe(key)].get(key)

    def seal(self) -> None:
        self._sealed = True

    @property
    def sealed(self) -> bool:
        return self._sealed

    def __len__(self) -> int:
        return sum(len(s) for s in self._stripes)

    def keys(self) -> Iterator:
        for stripe in self._stripes:
            yield from stripe.keys()

    def items(self) -> Iterator:
        for stripe in self._stripes:
            yield from stripe.items()


class EdgeTable:
    """Multi-map head -> tails for a single relation.

    Build phase appends under striped locks; duplicates are kept (the
    graph is a multigraph). seal() merges the stripes and sorts every
    tail list ascending, so the sealed table is canonical no matter how
    concurrent inserts interleaved.
    """

    def __init__(self, relation: int, num_stripes: int = 16):
        self.relation = relation
        self._stripes: list[dict[int, list[int]]] = [{} for _ in range(num_stripes)]
        self._locks = [threading.Lock() for _ in range(num_stripes)]
        self._n = num_stripes
        self._adj: dict[int, np.ndarray] | None = None

    @classmethod
    def from_sorted_arrays(cls, relation: int, adj: dict[int, np.ndarray]) -> "EdgeTable":
        """Pre-sealed table from head -> sorted uint64 tails (generator fast path)."""
        table = cls(relation)
        table._adj = adj
        return table

    @property
    def sealed(self) -> bool:
        return self._adj is not None

    def insert(self, head: int, tail: int) -> None:
        if self._adj is not None:
            raise SealError("insert after seal")
        idx = hash(head) % self._n
        with self._locks[idx]:
            self._stripes[idx].setdefault(head, []).append(tail)

    def seal(self) -> None:
        if self._adj is not None:
            return
        adj: dict[int, np.ndarray] = {}
        for stripe in self._stripes:
            for head, tails in stripe.items():
                adj[head] = np.sort(np.array(tails, dtype=np.uint64))
        self._adj = adj
        self._stripes = []

    def _require_sealed(self) -> dict[int, np.ndarray]:
        if self._adj is None:
            raise SealError("edge table not sealed")
        return self._adj

    def tails(self, head: int) -> np.ndarray:
        """Sorted tails for head; an absent head yields an empty array."""
        return self._require_sealed().get(head, _EMPTY_U64)

    def heads(self) -> Iterator[int]:
        return iter(self._require_sealed().keys())

    def items(self) -> Iterator[tuple[int, np.ndarray]]:
        return iter(self._require_sealed().items())

    @property
    def num_edges(self) -> int:
        if self._adj is not None:
            return sum(len(t) for t in self._adj.values())
        return sum(len(t) for stripe in self._stripes for t in stripe.values())


@dataclass(frozen=True)
class EntitySet:
    """Deduplicated, ascending-sorted entity ids with a role label."""

    ids: np.ndarray
    role: str = ""

    def __post_init__(self):
        norm = np.unique(np.asarray(self.ids, dtype=np.uint64))
        object.__setattr__(self, "ids", norm)

    def __len__(self) -> int:
        return len(self.ids)

    def tolist(self) -> list[int]:
        return self.ids.tolist()


def _parse_uint(text: str, line_no: int, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ParseError(line_no, f"invalid {what} {text!r}") from None
    if value < 0 or value > U64_MAX:
        raise ParseError(line_no, f"{what} {value} outside unsigned 64-bit range")
    return value


def _materialize(lines: Iterable[str]) -> list[str]:
    return lines if isinstance(lines, list) else list(lines)


def ingest_edges(
    edge_stream: Iterable[str], num_relations: int, workers: int = 1
) -> list[EdgeTable]:
    """Parse edge lines into per-relation tables, optionally with many inserters.

    The returned tables are still in the build phase (not sealed); the
    caller seals them, usually via KGStore.seal(). Blank lines are
    tolerated (trailing newline). Malformed lines raise ParseError with
    the 1-based line number; relation ids outside 0..num_relations-1
    raise RelationRangeError.
    """
    if num_relations < 0:
        raise ArgumentError("num_relations must be >= 0")
    lines = _materialize(edge_stream)
    tables = [EdgeTable(r) for r in range(num_relations)]

    def work(wid: int) -> None:
        lo, hi = block_bounds(len(lines), workers, wid)
        for i in range(lo, hi):
            line = lines[i].rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(i + 1, f"expected head<TAB>relation<TAB>tail, got {line!r}")
            head = _parse_uint(parts[0], i + 1, "head id")
            rel = _parse_uint(parts[1], i + 1, "relation id")
            tail = _parse_uint(parts[2], i + 1, "tail id")
            if rel >= num_relations:
                raise RelationRangeError(
                    f"line {i + 1}: relation {rel} out of range [0, {num_relations})"
                )
            tables[rel].insert(head, tail)

    WorkerGang(workers).run(work)
    return tables


def _parse_embedding_line(line: str, line_no: int, dim: int) -> tuple[int, np.ndarray]:
    parts = line.split("\t")
    if len(parts) != 2:
        raise ParseError(line_no, f"expected id<TAB>components, got {line!r}")
    eid = _parse_uint(parts[0], line_no, "id")
    comps = parts[1].split()
    if len(comps) != dim:
        raise DimensionError(f"line {line_no}: expected {dim} components, got {len(comps)}")
    try:
        values = [float(c) for c in comps]
    except ValueError:
        raise ParseError(line_no, "invalid float component") from None
    for v in values:
        if not math.isfinite(v):
            raise EmbeddingValueError(f"line {line_no}: non-finite component {v!r}")
    return eid, np.array(values, dtype=np.float64)


def load_entity_embeddings(
    stream: Iterable[str], dim: int, workers: int = 1
) -> StripedMap:
    """Load entity embeddings into a striped concurrent map (one entry per id)."""
    if dim < 1:
        raise ArgumentError("dim must be >= 1")
    lines = _materialize(stream)
    table = StripedMap()

    def work(wid: int) -> None:
        lo, hi = block_bounds(len(lines), workers, wid)
        for i in range(lo, hi):
            line = lines[i].rstrip("\n")
            if not line:
                continue
            eid, vec = _parse_embedding_line(line, i + 1, dim)
            try:
                table.insert(eid, vec)
            except DuplicateIdError:
                raise DuplicateIdError(f"line {i + 1}: duplicate entity id {eid}") from None

    WorkerGang(workers).run(work)
    return table


def load_relation_embeddings(
    stream: Iterable[str], dim: int, num_relations: int
) -> np.ndarray:
    """Load the dense relation-embedding array; ids must cover 0..num_relations-1 exactly once."""
    if dim < 1:
        raise ArgumentError("dim must be >= 1")
    if num_relations < 0:
        raise ArgumentError("num_relations must be >= 0")
    out = np.zeros((num_relations, dim), dtype=np.float64)
    seen = np.zeros(num_relations, dtype=bool)
    for i, raw in enumerate(_materialize(stream)):
        line = raw.rstrip("\n")
        if not line:
            continue
        rid, vec = _parse_embedding_line(line, i + 1, dim)
        if rid >= num_relations:
            raise CompletenessError(
                f"line {i + 1}: relation id {rid} out of range [0, {num_relations})"
            )
        if seen[rid]:
            raise CompletenessError(f"line {i + 1}: relation id {rid} repeated")
        seen[rid] = True
        out[rid] = vec
    if not seen.all():
        missing = np.flatnonzero(~seen)[:8].tolist()
        raise CompletenessError(f"missing relation ids {missing}")
    return out


def extract_entities(table: EdgeTable, side: str, role: str = "") -> EntitySet:
    """Deduplicated sorted ids of one side of a sealed edge table."""
    if side not in ("head", "tail"):
        raise ArgumentError(f"side must be 'head' or 'tail', got {side!r}")
    if not table.sealed:
        raise SealError("extract_entities requires a sealed table")
    if side == "head":
        ids = np.fromiter(table.heads(), dtype=np.uint64)
    else:
        chunks = [tails for _, tails in table.items()]
        ids = np.concatenate(chunks) if chunks else _EMPTY_U64
    return EntitySet(ids=ids, role=role or side)


class KGStore:
    """Relation-grouped edge tables plus entity/relation embedding tables.

    Build with the module loaders (or the synthetic generator's fast
    path), then seal() exactly once. Query code must only see sealed
    stores; seal() also builds the id-sorted embedding matrix backing
    gather_entity_embeddings().
    """

    def __init__(
        self,
        dim: int,
        edge_tables: list[EdgeTable],
        entity_embeddings: StripedMap,
        relation_embeddings: np.ndarray,
    ):
        if dim < 1:
            raise ArgumentError("dim must be >= 1")
        if relation_embeddings.ndim != 2 or relation_embeddings.shape[1] != dim:
            raise DimensionError(
                f"relation embeddings must be (num_relations, {dim}), got {relation_embeddings.shape}"
            )
        if len(edge_tables) != relation_embeddings.shape[0]:
            raise ArgumentError(
                f"{len(edge_tables)} edge tables but {relation_embeddings.shape[0]} relation embeddings"
            )
        self.dim = dim
        self.edge_tables = edge_tables
        self.entity_embeddings = entity_embeddings
        self.relation_embeddings = relation_embeddings
        self._sealed = False
        self._ent_ids: np.ndarray = _EMPTY_U64
        self._ent_matrix: np.ndarray = np.empty((0, dim), dtype=np.float64)

    @property
    def num_relations(self) -> int:
        return len(self.edge_tables)

    @property
    def sealed(self) -> bool:
        return self._sealed

    def require_sealed(self) -> None:
        if not self._sealed:
            raise SealError("operation requires a sealed store")

    def seal(self) -> None:
        """Freeze the store: no further inserts, lock-free reads, dense gather index."""
        if self._sealed:
            return
        for table in self.edge_tables:
            table.seal()
        self.entity_embeddings.seal()
        ids = sorted(self.entity_embeddings.keys())
        matrix = np.empty((len(ids), self.dim), dtype=np.float64)
        for row, eid in enumerate(ids):
            vec = self.entity_embeddings.get(eid)
            if vec.shape != (self.dim,):
                raise DimensionError(f"entity {eid}: embedding length {vec.shape} != dim {self.dim}")
            matrix[row] = vec
        self._ent_ids = np.array(ids, dtype=np.uint64)
        self._ent_matrix = matrix
        self._sealed = True

    def entity_embedding(self, entity_id: int) -> np.ndarray | None:
        return self.entity_embeddings.get(entity_id)

    def relation_embedding(self, relation_id: int) -> np.ndarray:
        if not (0 <= relation_id < self.num_relations):
            raise RelationRangeError(
                f"relation {relation_id} out of range [0, {self.num_relations})"
            )
        return self.relation_embeddings[relation_id]

    def edge_table(self, relation_id: int) -> EdgeTable:
        if not (0 <= relation_id < self.num_relations):
            raise RelationRangeError(
                f"relation {relation_id} out of range [0, {self.num_relations})"
            )
        return self.edge_tables[relation_id]

    def gather_entity_embeddings(self, ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized embedding fetch for sorted-or-not uint64 ids.

        Returns (emb_t, found): emb_t is a C-contiguous (dim, n) transposed
        block (missing ids get a zero row, masked out by found).
        """
        self.require_sealed()
        ids = np.asarray(ids, dtype=np.uint64)
        n = len(ids)
        if self._ent_ids.size == 0 or n == 0:
            return (
                np.zeros((self.dim, n), dtype=np.float64),
                np.zeros(n, dtype=bool),
            )
        idx = np.searchsorted(self._ent_ids, ids)
        idx_c = np.minimum(idx, len(self._ent_ids) - 1)
        found = self._ent_ids[idx_c] == ids
        rows = self._ent_matrix[np.where(found, idx_c, 0)]
        return np.ascontiguousarray(rows.T), found

    @classmethod
    def from_files(
        cls,
        edges_path: str | Path,
        entities_path: str | Path,
        relations_path: str | Path,
        workers: int = 1,
    ) -> "KGStore":
        """Load and seal a store from the three text files.

        dim and num_relations are inferred from the relation-embedding
        file (line count and component count of the first line).
        """
        rel_lines = Path(relations_path).read_text(encoding="utf-8").splitlines()
        content = [ln for ln in rel_lines if ln.strip()]
        if not content:
            raise CompletenessError("relation embedding file is empty")
        first = content[0].split("\t")
        if len(first) != 2:
            raise ParseError(1, f"expected id<TAB>components, got {content[0]!r}")
        dim = len(first[1].split())
        num_relations = len(content)
        relation_embeddings = load_relation_embeddings(rel_lines, dim, num_relations)
        with open(entities_path, encoding="utf-8") as fh:
            entity_embeddings = load_entity_embeddings(fh, dim, workers=workers)
        with open(edges_path, encoding="utf-8") as fh:
            edge_tables = ingest_edges(fh, num_relations, workers=workers)
        store = cls(dim, edge_tables, entity_embeddings, relation_embeddings)
        store.seal()
        return store

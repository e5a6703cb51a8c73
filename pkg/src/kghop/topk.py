"""Bounded top-K selection and cross-worker reduction.

A TopKSelector keeps the K best items seen so far under one total order:
score descending, then entity id ascending, then path key ascending (for
path items). The order is total, so the retained set is unique and the
final contents never depend on offer order, worker count, or merge shape.

Two reduction strategies combine per-worker selectors into one global
selector: a tree reduction (pairwise merges in log-depth rounds separated
by barriers) and a locked baseline where every worker merges into a single
shared selector under one mutex. Both are collectives: every participating
worker calls them with its own worker id.
"""

from __future__ import annotations

import threading
from bisect import insort
from typing import NamedTuple

from .errors import ArgumentError
from .parallel import WorkerGang

NEG_INF = float("-inf")


class ScoredEntity(NamedTuple):
    """An entity id with its score. Score is finite or -inf (missing embedding)."""

    entity: int
    score: float

    def order_key(self):
        """Ascending sort by this key ranks best first."""
        return (-self.score, self.entity)


class TopKSelector:
    """Bounded container retaining the K best items offered.

    Internally a sorted list of (order_key, item) pairs, best first.
    K is at most a few dozen in practice, so ordered insertion beats a
    heap: offers are O(K) memmoves in C, and merges are a single sort
    of at most 2K pre-sorted runs.

    Not thread-safe: a selector has exactly one owner worker. Ownership
    transfers only at reduction barriers.
    """

    __slots__ = ("capacity", "_entries")

    def __init__(self, k: int):
        if k < 1:
            raise ArgumentError(f"selector capacity must be >= 1, got {k}")
        self.capacity = k
        self._entries: list[tuple] = []

    @classmethod
    def _from_entries(cls, k: int, entries: list[tuple]) -> "TopKSelector":
        """Wrap pre-sorted (key, item) entries; entries must be ascending and len <= k."""
        sel = cls(k)
        sel._entries = entries
        return sel

    def __len__(self) -> int:
        return len(self._entries)

    def offer(self, item) -> None:
        """Consider one item; keep it only if it ranks among the K best so far."""
        entry = (item.order_key(), item)
        if len(self._entries) < self.capacity:
            insort(self._entries, entry)
        elif entry[0] < self._entries[-1][0]:
            insort(self._entries, entry)
            self._entries.pop()

    def offer_all(self, items) -> None:
        for item in items:
            self.offer(item)

    def sorted_items(self) -> list:
        """Current contents, best first, without consuming the selector."""
        return [item for _, item in self._entries]

    def into_sorted_desc(self) -> list:
        """Drain the selector, returning items best first. Selector ends empty."""
        out = [item for _, item in self._entries]
        self._entries = []
        return out


def selector_new(k: int) -> TopKSelector:
    return TopKSelector(k)


def selector_merge(a: TopKSelector, b: TopKSelector) -> TopKSelector:
    """K best of the multiset union of a and b. Inputs are left intact."""
    if a.capacity != b.capacity:
        raise ArgumentError(
            f"cannot merge selectors of capacity {a.capacity} and {b.capacity}"
        )
    merged = sorted(a._entries + b._entries)[: a.capacity]
    return TopKSelector._from_entries(a.capacity, merged)


def selector_into_sorted_desc(sel: TopKSelector) -> list:
    return sel.into_sorted_desc()


def reduce_topk_tree(
    locals_: list,
    num_workers: int,
    worker_id: int,
    barrier: threading.Barrier | None = None,
) -> TopKSelector | None:
    """Tree reduction of per-worker selectors. Collective call.

    Every worker 0..num_workers-1 must call this with the shared locals_
    list and the shared barrier. Rounds double the stride; in each round
    the lower-indexed worker of a pair merges its partner's selector into
    its own slot, guarded by `worker_id + stride < num_workers` so odd
    worker counts leave the unpaired slot untouched. All workers hit the
    barrier every round, merging or not.

    Worker 0 returns the global selector (locals_[0] after the last
    round); other workers return None.
    """
    if worker_id >= num_workers or worker_id < 0:
        raise ArgumentError(f"worker_id {worker_id} out of range for {num_workers} workers")
    if num_workers > 1 and barrier is None:
        raise ArgumentError("tree reduction with more than one worker needs a barrier")
    stride = 1
    while stride < num_workers:
        if worker_id % (2 * stride) == 0 and worker_id + stride < num_workers:
            locals_[worker_id] = selector_merge(locals_[worker_id], locals_[worker_id + stride])
        barrier.wait()
        stride *= 2
    return locals_[worker_id] if worker_id == 0 else None


class LockedTopK:
    """Shared selector guarded by one mutex: the merge baseline.

    Each worker folds its whole local selector in under a single lock
    acquisition, so the critical section is one merge, not one offer.
    """

    def __init__(self, k: int):
        self._lock = threading.Lock()
        self._selector = TopKSelector(k)

    def merge_from(self, local: TopKSelector) -> None:
        with self._lock:
            self._selector = selector_merge(self._selector, local)

    def take(self) -> TopKSelector:
        """Hand out the merged selector and reset to empty."""
        with self._lock:
            out = self._selector
            self._selector = TopKSelector(out.capacity)
            return out


def locked_merge_reduce(
    locals_: list,
    num_workers: int,
    worker_id: int,
    shared: LockedTopK,
    barrier: threading.Barrier | None = None,
) -> TopKSelector | None:
    """Locked-merge reduction. Collective call; same result contract as the tree.

    Worker 0 returns the global selector; others None. A second barrier
    after the take keeps workers from merging a subsequent round's
    contribution into the shared selector before it has been drained.
    """
    if worker_id >= num_workers or worker_id < 0:
        raise ArgumentError(f"worker_id {worker_id} out of range for {num_workers} workers")
    if num_workers > 1 and barrier is None:
        raise ArgumentError("locked reduction with more than one worker needs a barrier")
    shared.merge_from(locals_[worker_id])
    if barrier is not None:
        barrier.wait()
    result = shared.take() if worker_id == 0 else None
    if barrier is not None:
        barrier.wait()
    return result


def reduce_selectors(selectors: list, strategy: str = "tree") -> TopKSelector:
    """Run a full reduction over the given selectors with real threads.

    Convenience driver: spawns len(selectors) workers, runs the chosen
    collective, and returns the global selector. The input list is not
    mutated (the tree works on a copy).
    """
    num_workers = len(selectors)
    if num_workers == 0:
        raise ArgumentError("need at least one selector to reduce")
    if strategy not in ("tree", "locked"):
        raise ArgumentError(f"unknown reduction strategy {strategy!r}")
    locals_ = list(selectors)
    gang = WorkerGang(num_workers)
    out: list = [None]
    if strategy == "tree":
        def work(wid: int) -> None:
            res = reduce_topk_tree(locals_, num_workers, wid, gang.barrier)
            if wid == 0:
                out[0] = res
    else:
        shared = LockedTopK(selectors[0].capacity)

        def work(wid: int) -> None:
            res = locked_merge_reduce(locals_, num_workers, wid, shared, gang.barrier)
            if wid == 0:
                out[0] = res

    gang.run(work)
    return out[0]

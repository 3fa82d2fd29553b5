"""Exact maximin-share values by branch and bound, with a brute-force reference.

`mms` certifies the exact optimum of max-over-partitions min-bundle-value
with a depth-first search over bundle assignments; `mms_exhaustive` checks it
by enumerating every assignment vector. Both are deterministic functions of
their inputs, and both are exact: values are scaled to integers through the
least common denominator, searched in arbitrary-precision arithmetic, and
scaled back.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import numpy as np

from .core import Bundle, Instance, Partition
from .errors import BoundsError, DomainError, OracleBudgetExceeded

DEFAULT_NODE_BUDGET = 50_000_000
EXHAUSTIVE_SUBSET_CAP = 12
_EXHAUSTIVE_VECTOR_CAP = 50_000_000
_NUMPY_CHUNK = 1 << 17

# Results memoized on the (scaled weight multiset, d) key; MMS depends only on
# the value multiset, so ordered/unordered variants of a row share one entry.
_CACHE: dict[tuple, tuple[int, tuple[tuple[int, ...], ...]]] = {}
_CACHE_MAX = 100_000


@dataclass(frozen=True)
class MmsResult:
    """Exact optimum plus one witness partition attaining it."""

    value: Fraction
    witness: Partition


def clear_cache() -> None:
    _CACHE.clear()


def _resolve_subset(inst: Instance, subset: Bundle | None) -> list[int]:
    if subset is None:
        return list(range(1, inst.m + 1))
    ids = sorted(set(subset))
    for g in ids:
        if not 1 <= g <= inst.m:
            raise BoundsError(f"good {g} out of range [1, {inst.m}]")
    return ids


def _scale_to_ints(vals: list[Fraction]) -> tuple[list[int], int]:
    denom = lcm(*(v.denominator for v in vals)) if vals else 1
    return [int(v * denom) for v in vals], denom


def _lpt_choice(weights: list[int], d: int) -> tuple[int, list[int]]:
    """Largest-first greedy seed: each good to the lightest bundle (lowest index)."""
    loads = [0] * d
    choice = [0] * len(weights)
    for t, w in enumerate(weights):
        j = loads.index(min(loads))
        loads[j] += w
        choice[t] = j
    return min(loads), choice


class _Budget:
    __slots__ = ("nodes", "limit")

    def __init__(self, limit: int):
        self.nodes = 0
        self.limit = limit

    def spend(self) -> None:
        self.nodes += 1
        if self.nodes > self.limit:
            raise OracleBudgetExceeded(self.nodes, self.limit)


_MEMO_CAP = 300_000


def _cover_assignment(nz: list[int], d: int, target: int, budget: _Budget) -> list[int] | None:
    """Assignment giving every bundle load >= target, or None (proven impossible).

    Depth-first over the goods in the given (descending) order. A good may
    only enter a bundle still short of the target; once every bundle is
    covered the remaining goods are leftovers (marked -1). Pruning: the total
    shortfall must not exceed the remaining weight; every short bundle needs
    ceil(deficit / next-weight) more goods, which must fit in what remains;
    equal-load bundles and previously-failed load multisets (closed bundles
    capped at the target) repeat subtrees and are skipped. When a good can
    top a bundle up to exactly the target, that placement is tried alone: any
    completion routing the good elsewhere can be rerouted through the exact
    fill, so the branch is exhaustive.
    """
    s = len(nz)
    suffix = [0] * (s + 1)
    for t in range(s - 1, -1, -1):
        suffix[t] = suffix[t + 1] + nz[t]

    loads = [0] * d
    choice = [-1] * s
    failed: set[tuple[int, ...]] = set()

    def dfs(t: int) -> bool:
        shortfall = 0
        needed = 0
        w = nz[t] if t < s else 1
        for l in loads:
            if l < target:
                deficit = target - l
                shortfall += deficit
                needed += -(-deficit // w)
        if shortfall == 0:
            return True
        if t == s or shortfall > suffix[t] or needed > s - t:
            return False
        key = (t, *sorted(l for l in loads if l < target))
        if key in failed:
            return False

        order = sorted((j for j in range(d) if loads[j] < target), key=lambda j: (-loads[j], j))
        exact = next((j for j in order if loads[j] + w == target), -1)
        candidates: list[int]
        if exact >= 0:
            candidates = [exact]
        else:
            candidates = []
            tried: list[int] = []
            for j in order:
                if loads[j] in tried:
                    continue
                tried.append(loads[j])
                candidates.append(j)
        for j in candidates:
            budget.spend()
            loads[j] += w
            choice[t] = j
            if dfs(t + 1):
                return True
            loads[j] -= w
        choice[t] = -1
        if len(failed) < _MEMO_CAP:
            failed.add(key)
        return False

    return choice if dfs(0) else None


def _search(weights: list[int], d: int, node_budget: int) -> tuple[int, list[list[int]]]:
    """Certified max-min over partitions of `weights` (descending ints) into d parts.

    Returns the optimal scaled value and per-bundle position lists. Binary
    search over the answer: the largest-first greedy seed is a feasible lower
    bound, total//d an upper bound, and each probe runs the covering search
    to completion, so the final value is certified from both sides.
    """
    positions_nz = [t for t, w in enumerate(weights) if w > 0]
    positions_z = [t for t, w in enumerate(weights) if w == 0]
    nz = [weights[t] for t in positions_nz]
    s = len(nz)

    best_val, best_choice = _lpt_choice(nz, d)

    if s >= d and d > 1:
        budget = _Budget(node_budget)
        lo = best_val
        hi = sum(nz) // d
        while lo < hi:
            mid = (lo + hi + 1) // 2
            found = _cover_assignment(nz, d, mid, budget)
            if found is None:
                hi = mid - 1
            else:
                loads = [0] * d
                for t, j in enumerate(found):
                    if j >= 0:
                        loads[j] += nz[t]
                loads[0] += sum(nz[t] for t, j in enumerate(found) if j < 0)
                best_val = min(loads)
                best_choice = [j if j >= 0 else 0 for j in found]
                lo = best_val

    bundles: list[list[int]] = [[] for _ in range(d)]
    for t, j in enumerate(best_choice):
        bundles[j].append(positions_nz[t])
    bundles[0].extend(positions_z)
    return best_val, bundles


def mms(
    inst: Instance,
    agent: int,
    d: int,
    subset: Bundle | None = None,
    *,
    node_budget: int | None = None,
) -> MmsResult:
    """Exact d-bundle maximin share of `subset` for one agent, with witness.

    The witness is deterministic: goods are considered in non-increasing value
    order (ties by good id), bundles are tried lowest index first, and the
    first partition attaining the optimum is kept. Raises
    OracleBudgetExceeded rather than ever returning an uncertified value.
    """
    if d <= 0:
        raise DomainError(f"d must be a positive integer, got {d}")
    budget = DEFAULT_NODE_BUDGET if node_budget is None else node_budget
    ids = _resolve_subset(inst, subset)
    row = inst.row(agent)

    ordered_ids = sorted(ids, key=lambda g: (-row[g - 1], g))
    vals = [row[g - 1] for g in ordered_ids]
    weights, denom = _scale_to_ints(vals)

    key = (tuple(weights), d)
    hit = _CACHE.get(key)
    if hit is None:
        scaled_best, bundles = _search(weights, d, budget)
        frozen = tuple(tuple(b) for b in bundles)
        if len(_CACHE) >= _CACHE_MAX:
            _CACHE.clear()
        _CACHE[key] = (scaled_best, frozen)
    else:
        scaled_best, frozen = hit

    witness = Partition(tuple(Bundle.of(ordered_ids[p] for p in b) for b in frozen))
    return MmsResult(value=Fraction(scaled_best, denom), witness=witness)


def mms_exhaustive(
    inst: Instance,
    agent: int,
    d: int,
    subset: Bundle | None = None,
    *,
    cap: int = EXHAUSTIVE_SUBSET_CAP,
) -> MmsResult:
    """Reference oracle: full enumeration of all d^|subset| assignment vectors.

    Enumeration index k encodes the vector base-d with the lowest good id as
    the most significant digit; the first maximizing vector is the witness.
    Shares no search code with `mms`.
    """
    if d <= 0:
        raise DomainError(f"d must be a positive integer, got {d}")
    ids = _resolve_subset(inst, subset)
    s = len(ids)
    if s > cap:
        raise DomainError(f"subset size {s} exceeds the exhaustive enumeration cap {cap}")
    row = inst.row(agent)
    vals = [row[g - 1] for g in ids]
    weights, denom = _scale_to_ints(vals)

    if s == 0:
        return MmsResult(Fraction(0), Partition(tuple(Bundle() for _ in range(d))))

    total_vecs = d**s
    if total_vecs > _EXHAUSTIVE_VECTOR_CAP:
        raise DomainError(f"enumeration of {total_vecs} assignment vectors exceeds the cap")

    if sum(weights) < 2**62 and total_vecs > 1:
        best, best_k = _enumerate_numpy(weights, d, total_vecs)
    else:
        best, best_k = _enumerate_python(weights, d, total_vecs)

    bundles: list[list[int]] = [[] for _ in range(d)]
    k = best_k
    for t in range(s - 1, -1, -1):
        bundles[k % d].append(ids[t])
        k //= d
    witness = Partition(tuple(Bundle.of(b) for b in bundles))
    return MmsResult(value=Fraction(best, denom), witness=witness)


def _enumerate_numpy(weights: list[int], d: int, total: int) -> tuple[int, int]:
    s = len(weights)
    w = np.asarray(weights, dtype=np.int64)
    best = -1
    best_k = 0
    place = [d ** (s - 1 - t) for t in range(s)]
    for lo in range(0, total, _NUMPY_CHUNK):
        hi = min(lo + _NUMPY_CHUNK, total)
        idx = np.arange(lo, hi, dtype=np.int64)
        loads = np.zeros((hi - lo, d), dtype=np.int64)
        rows = np.arange(hi - lo)
        for t in range(s):
            dig = (idx // place[t]) % d
            loads[rows, dig] += w[t]
        mins = loads.min(axis=1)
        k = int(np.argmax(mins))
        if int(mins[k]) > best:
            best = int(mins[k])
            best_k = lo + k
    return best, best_k


def _enumerate_python(weights: list[int], d: int, total: int) -> tuple[int, int]:
    s = len(weights)
    best = -1
    best_k = 0
    for k in range(total):
        loads = [0] * d
        x = k
        for t in range(s - 1, -1, -1):
            loads[x % d] += weights[t]
            x //= d
        v = min(loads)
        if v > best:
            best = v
            best_k = k
    return best, best_k

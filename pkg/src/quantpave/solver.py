"""Branch-and-prune solving of quantified constraints on boxes.

The evaluator assigns each box a truth value in {T, F, U}: T and F are
certified by outward-rounded interval arithmetic, U means undecided at
the current subdivision scale.  Bounded quantifiers are handled by
adaptive bisection of the quantifier domain down to a width floor.
Function inversion quantifiers are answered from per-node memo caches:
the image box of the transition is computed by interval evaluation and
looked up in an approximate solution set of the node's body, which is
refined on demand wherever queries land.

All widths here are relative: `min_width` and `quantifier_min_width`
scale the axis widths of the box being subdivided (the paving domain, a
cache root, or a quantifier domain respectively), so one configuration
works across the differently-sized boxes of a staged problem.
"""

from __future__ import annotations

import heapq
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

from .approxset import ApproximateSet, _Split, _Node
from .constraints import (
    AtomLE,
    Conj,
    Constraint,
    Exists,
    ForAll,
    FuncInv,
    Truth,
    truth_and,
)
from .errors import QuantpaveError
from .expr import range_over
from .intervals import Box, Interval, mul_up


@dataclass
class SolverConfig:
    """Tuning knobs for the paver.

    target_err          absolute undecided volume at which paving stops
    min_width           bisection floor as a fraction of the root axis width
    cache_rel_eps       a cache query stops refining once the undecided
                        fraction of the queried region drops below this
    quantifier_min_width  subdivision floor for quantifier domains, as a
                        fraction of the domain axis width
    mode                "pave" or "single_true" (used by the CLI)
    memo_bypass         answer every cache query from a fresh throwaway
                        set instead of the memo (for measuring what the
                        memoization saves)
    refine_depth_factor cache refinement depth budget per call is this
                        many bisections per cache dimension
    """

    target_err: float = 0.2
    min_width: float = 2.0**-10
    cache_rel_eps: float = 0.25
    quantifier_min_width: float = 2.0**-6
    mode: str = "pave"
    memo_bypass: bool = False
    refine_depth_factor: int = 2
    quantifier_search_budget: int = 8

    def __post_init__(self) -> None:
        for name in ("target_err", "min_width", "cache_rel_eps", "quantifier_min_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cache_rel_eps >= 1:
            raise ValueError("cache_rel_eps must be below 1")
        if self.mode not in ("pave", "single_true"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.refine_depth_factor < 1:
            raise ValueError("refine_depth_factor must be at least 1")
        if self.quantifier_search_budget < 0:
            raise ValueError("quantifier_search_budget must be non-negative")


@dataclass
class SolveStats:
    """Counters accumulated over one solve."""

    atom_evals: int = 0
    bisections: int = 0
    cache_queries: dict[str, int] = field(default_factory=dict)
    memo_hits: dict[str, int] = field(default_factory=dict)
    refine_calls: dict[str, int] = field(default_factory=dict)
    wall_time: float = 0.0

    def _bump(self, counter: dict[str, int], cache_id: str, by: int = 1) -> None:
        counter[cache_id] = counter.get(cache_id, 0) + by


class CacheEntry:
    """Memo cache for one function inversion node."""

    __slots__ = ("root", "set", "floors", "depth_boost", "exhausted")

    def __init__(self, root: Box, min_width: float):
        self.root = root
        self.set = ApproximateSet.unknown(root)
        self.floors = tuple(min_width * w for w in root.widths_upper())
        # Boxes whose refinement returned all-unknown: retried with a
        # deeper budget, then written off once the width floor is reached.
        self.depth_boost: dict[tuple, int] = {}
        self.exhausted: set[tuple] = set()


class CacheStore:
    """All memo caches of one solve, plus the shared statistics."""

    def __init__(self) -> None:
        self.entries: dict[str, CacheEntry] = {}
        self.stats = SolveStats()

    def entry_for(self, node: FuncInv, cfg: SolverConfig) -> CacheEntry:
        entry = self.entries.get(node.cache_id)
        if entry is None:
            entry = CacheEntry(node.z_root, cfg.min_width)
            self.entries[node.cache_id] = entry
        return entry


def _box_key(box: Box) -> tuple:
    return tuple((iv.lo, iv.hi) for iv in box.intervals)


def _fat_axes(box: Box) -> tuple[int, ...]:
    return tuple(i for i, iv in enumerate(box.intervals) if iv.lo < iv.hi)


def _measure(box: Box, axes: tuple[int, ...]) -> float:
    """Product of widths over the given axes (1 if none), rounded up."""
    v = 1.0
    for i in axes:
        v = mul_up(v, box.intervals[i].width_upper())
    return v


def _splittable_axis(box: Box, floors: tuple[float, ...]) -> int | None:
    """Widest axis above its width floor with a representable midpoint;
    ties go to the lowest index.  None if every axis is at the floor."""
    best = None
    best_w = 0.0
    for i, iv in enumerate(box.intervals):
        w = iv.width_upper()
        if w > floors[i] and w > best_w and iv.midpoint() is not None:
            best, best_w = i, w
    return best


def eval_atom(atom: AtomLE, env: Mapping[str, Interval], stats: SolveStats) -> Truth:
    """Three-valued comparison: T if the difference is certainly <= 0,
    F if certainly > 0, U otherwise."""
    stats.atom_evals += 1
    diff = atom.lhs.eval_interval(env) - atom.rhs.eval_interval(env)
    if diff.is_empty:
        return Truth.UNKNOWN
    if diff.hi <= 0.0:
        return Truth.TRUE
    if diff.lo > 0.0:
        return Truth.FALSE
    return Truth.UNKNOWN


def eval_constraint(
    c: Constraint,
    env: Mapping[str, Interval],
    cfg: SolverConfig,
    caches: CacheStore,
) -> Truth:
    """Evaluate a constraint over a box environment.

    T and F results hold for every point of the environment; U means the
    evaluation could not decide at the configured subdivision floors."""
    if isinstance(c, AtomLE):
        return eval_atom(c, env, caches.stats)
    if isinstance(c, Conj):
        result = Truth.TRUE
        for part in c.parts:
            t = eval_constraint(part, env, cfg, caches)
            if t is Truth.FALSE:
                return Truth.FALSE
            result = truth_and(result, t)
        return result
    if isinstance(c, Exists):
        return _eval_quantifier(c, env, cfg, caches, existential=True)
    if isinstance(c, ForAll):
        return _eval_quantifier(c, env, cfg, caches, existential=False)
    if isinstance(c, FuncInv):
        z = range_over(c.f, env)
        if not z.subset_of(c.z_root):
            # The portion outside the cache root counts as undecided.
            return Truth.UNKNOWN
        if not cfg.memo_bypass:
            # Decisive cached answers skip the refinement loop entirely
            # (the loop would find nothing undecided under z anyway).
            entry = caches.entries.get(c.cache_id)
            if entry is not None:
                t = prop_funcinv(entry.set, z)
                if t is not Truth.UNKNOWN:
                    stats = caches.stats
                    stats._bump(stats.cache_queries, c.cache_id)
                    stats._bump(stats.memo_hits, c.cache_id)
                    return t
        s = refine_memo(c.cache_id, c.body, z, cfg, caches, root=c.z_root)
        return prop_funcinv(s, z)
    raise QuantpaveError(f"unsupported constraint node {type(c).__name__}")


def _point_box(box: Box, corner: int) -> Box | None:
    """Degenerate sub-box at the midpoint (corner=0), all-lower corner
    (-1) or all-upper corner (+1); None if it coincides with `box`."""
    points = []
    for iv in box.intervals:
        if corner < 0:
            points.append(iv.lo)
        elif corner > 0:
            points.append(iv.hi)
        else:
            m = iv.midpoint()
            points.append(iv.lo if m is None else m)
    result = Box(box.names, tuple(Interval.point(p) for p in points))
    return None if result == box else result


def _eval_quantifier(
    node: Exists | ForAll,
    env: Mapping[str, Interval],
    cfg: SolverConfig,
    caches: CacheStore,
    existential: bool,
) -> Truth:
    """Adaptive subdivision of the quantifier domain.

    Existential: T as soon as the body holds on the whole environment
    times some sub-box (then every environment point has witnesses
    throughout it); F only once the body is false on every piece of a
    full subdivision; U if pieces bottom out undecided.  Universal is
    the dual.  Zero-width domain axes are never split (point
    instantiation).

    Degenerate sub-boxes are first-class certificates, so the midpoint
    and corners are probed before any subdivision: a T point decides an
    existential immediately (one witness serving the whole environment)
    and an F point decides a universal.  The midpoint probe also bounds
    the refutation direction: once any probed point evaluates U, its
    enclosing floor box can never take the refuting value (evaluation is
    inclusion-monotone), so a full refuting subdivision is impossible
    and further splitting serves only witness hunting, which is capped
    by `quantifier_search_budget` body evaluations."""
    domain = node.domain
    body = node.body
    want = Truth.TRUE if existential else Truth.FALSE
    refute = Truth.FALSE if existential else Truth.TRUE

    def ev(box: Box) -> Truth:
        return eval_constraint(body, {**env, **box.env()}, cfg, caches)

    t = ev(domain)
    if t is not Truth.UNKNOWN:
        return t
    undecided = False
    for corner in (0, -1, 1):
        probe = _point_box(domain, corner)
        if probe is None:
            continue
        tp = ev(probe)
        if tp is want:
            return want
        if tp is not refute:
            undecided = True

    floors = tuple(cfg.quantifier_min_width * w for w in domain.widths_upper())
    axis = _splittable_axis(domain, floors)
    if axis is None:
        return Truth.UNKNOWN
    caches.stats.bisections += 1
    queue = deque(domain.bisect(axis))
    spent = 0
    while queue:
        if undecided and spent >= cfg.quantifier_search_budget:
            return Truth.UNKNOWN
        d = queue.popleft()
        t = ev(d)
        spent += 1
        if t is want:
            return want
        if t is refute:
            continue
        probe = _point_box(d, 0)
        if probe is not None:
            tp = ev(probe)
            spent += 1
            if tp is want:
                return want
            if tp is not refute:
                undecided = True
        axis = _splittable_axis(d, floors)
        if axis is None:
            undecided = True
            continue
        lo, hi = d.bisect(axis)
        caches.stats.bisections += 1
        queue.append(lo)
        queue.append(hi)
    return Truth.UNKNOWN if undecided else refute


def prop_funcinv(s: ApproximateSet, z_region: Box) -> Truth:
    """Constant truth of a function inversion query: T (F) if every leaf
    of `s` intersecting `z_region` is T (F), else U.  Regions reaching
    beyond the set's root are undecided (conservative).

    Leaves that touch `z_region` only in a face (zero overlap on one of
    the region's non-degenerate axes) are skipped: every point of such a
    face also belongs to the closed leaf on the other side, which does
    contribute, so the certificate still covers all of `z_region`."""
    if not z_region.subset_of(s.root):
        return Truth.UNKNOWN
    return s.uniform_truth(z_region, _fat_axes(z_region))


def refine(
    c: Constraint,
    box: Box,
    cfg: SolverConfig,
    caches: CacheStore,
    floors: tuple[float, ...] | None = None,
    max_depth: int | None = None,
) -> ApproximateSet:
    """Approximate the solution set of `c` on `box` by bounded
    branch-and-prune: evaluate, bisect the widest axis while undecided,
    stop at the depth budget or the width floor.  Every T (F) leaf is
    certified inside (outside) the solution set."""
    return _refine(c, box, cfg, caches, floors, max_depth)[0]


def _refine(
    c: Constraint,
    box: Box,
    cfg: SolverConfig,
    caches: CacheStore,
    floors: tuple[float, ...] | None = None,
    max_depth: int | None = None,
) -> tuple[ApproximateSet, bool]:
    """As :func:`refine`, also reporting whether any undecided leaf was
    cut off by the depth budget rather than the width floor."""
    if floors is None:
        floors = tuple(cfg.min_width * w for w in box.widths_upper())
    if max_depth is None:
        max_depth = cfg.refine_depth_factor * box.dim
    truncated = False

    def build(b: Box, depth: int) -> _Node:
        nonlocal truncated
        t = eval_constraint(c, b.env(), cfg, caches)
        if t is not Truth.UNKNOWN:
            return t
        axis = _splittable_axis(b, floors)
        if axis is None:
            return Truth.UNKNOWN
        if depth >= max_depth:
            truncated = True
            return Truth.UNKNOWN
        lo, hi = b.bisect(axis)
        caches.stats.bisections += 1
        left = build(lo, depth + 1)
        right = build(hi, depth + 1)
        if isinstance(left, Truth) and left is right:
            return left
        return _Split(axis, left, right)

    result = ApproximateSet.unknown(box)
    result._tree = build(box, 0)
    return result, truncated


def refine_memo(
    cache_id: str,
    body: Constraint,
    z: Box,
    cfg: SolverConfig,
    caches: CacheStore,
    root: Box,
) -> ApproximateSet:
    """Answer a cache query, refining the memoized solution set of `body`
    on demand until the undecided fraction of `z` drops below
    `cache_rel_eps` or no chosen box can be split further.

    The undecided fraction is measured on the non-degenerate axes of `z`
    so that thin and point queries (which have zero volume) still drive
    refinement.  A query that triggers no refinement counts as a memo
    hit."""
    stats = caches.stats
    entry = caches.entries.get(cache_id)
    if entry is None:
        entry = CacheEntry(root, cfg.min_width)
        caches.entries[cache_id] = entry
    stats._bump(stats.cache_queries, cache_id)

    target = ApproximateSet.unknown(entry.root) if cfg.memo_bypass else entry.set
    zc = z.intersect(entry.root)
    if zc.is_empty:
        stats._bump(stats.memo_hits, cache_id)
        return target

    fat = _fat_axes(zc)
    threshold = cfg.cache_rel_eps * _measure(zc, fat)
    base_depth = cfg.refine_depth_factor * entry.root.dim
    refined_any = False

    while target.measure(Truth.UNKNOWN, within=zc, axes=fat) > threshold:
        chosen = target.choose(zc)
        if chosen is None:
            break
        if _splittable_axis(chosen, entry.floors) is None:
            break
        key = _box_key(chosen)
        if key in entry.exhausted:
            break
        depth = base_depth + entry.depth_boost.get(key, 0)
        sub, truncated = _refine(
            body, chosen, cfg, caches, floors=entry.floors, max_depth=depth
        )
        stats._bump(stats.refine_calls, cache_id)
        refined_any = True
        if isinstance(sub._tree, Truth) and sub._tree is Truth.UNKNOWN:
            # No progress on this box: deepen the budget next time, or
            # write the box off once even the floor-depth pass learns
            # nothing (the chosen box would otherwise be re-chosen forever).
            if truncated:
                entry.depth_boost[key] = entry.depth_boost.get(key, 0) + base_depth
            else:
                entry.exhausted.add(key)
            continue
        target.embed(chosen, sub)

    if not refined_any:
        stats._bump(stats.memo_hits, cache_id)
    return target


@dataclass
class Paving:
    """A finite partition of a domain box into truth-labeled boxes."""

    domain: Box
    boxes: list[tuple[Box, Truth]]

    def err(self) -> float:
        """Total volume of undecided boxes, rounded up."""
        return sum(b.volume_upper() for b, t in self.boxes if t is Truth.UNKNOWN)

    def volume(self, truth: Truth) -> float:
        return sum(b.volume_upper() for b, t in self.boxes if t is truth)

    def counts(self) -> dict[Truth, int]:
        out = {Truth.TRUE: 0, Truth.FALSE: 0, Truth.UNKNOWN: 0}
        for _, t in self.boxes:
            out[t] += 1
        return out

    def truths_at(self, point: tuple[float, ...]) -> set[Truth]:
        """Truths of the (closed) leaf boxes containing `point`; boundary
        points belong to every adjacent box."""
        return {t for b, t in self.boxes if b.contains_point(point)}


def _check_free_vars(c: Constraint, domain: Box) -> None:
    free = c.free_vars()
    if free != frozenset(domain.names):
        raise QuantpaveError(
            f"constraint free variables {sorted(free)} do not match "
            f"domain dimensions {list(domain.names)}"
        )


def pave(
    c: Constraint,
    x0: Box,
    cfg: SolverConfig,
    caches: CacheStore,
) -> tuple[Paving, SolveStats]:
    """Pave `x0` with certified T/F boxes until the undecided measure is
    at most `cfg.target_err` or every undecided box is at the width
    floor.  Deterministic: a breadth-first worklist splitting the widest
    axis (ties to the lowest index).

    Degenerate axes of `x0` are legal; the undecided measure is then
    taken over the non-degenerate axes (a slice paving)."""
    _check_free_vars(c, x0)
    start = time.perf_counter()
    floors = tuple(cfg.min_width * w for w in x0.widths_upper())
    fat = _fat_axes(x0)
    queue: deque[Box] = deque([x0])
    resolved: list[tuple[Box, Truth]] = []
    stuck: list[Box] = []
    pending = _measure(x0, fat) if fat else 0.0

    while queue and pending > cfg.target_err:
        box = queue.popleft()
        m = _measure(box, fat)
        t = eval_constraint(c, box.env(), cfg, caches)
        if t is not Truth.UNKNOWN:
            resolved.append((box, t))
            pending = max(0.0, pending - m)
            continue
        axis = _splittable_axis(box, floors)
        if axis is None:
            stuck.append(box)
            continue
        lo, hi = box.bisect(axis)
        caches.stats.bisections += 1
        pending = max(0.0, pending - m) + _measure(lo, fat) + _measure(hi, fat)
        queue.append(lo)
        queue.append(hi)

    boxes = resolved + [(b, Truth.UNKNOWN) for b in stuck]
    boxes += [(b, Truth.UNKNOWN) for b in queue]
    caches.stats.wall_time += time.perf_counter() - start
    return Paving(x0, boxes), caches.stats


def find_single_true(
    c: Constraint,
    x0: Box,
    cfg: SolverConfig,
    caches: CacheStore,
) -> Box | None:
    """Best-first search for one certified-T box inside `x0`: larger
    boxes are tried first (ties by insertion order), undecided boxes are
    bisected along the widest axis, F boxes are dropped.  None once the
    whole domain is exhausted down to the width floor."""
    _check_free_vars(c, x0)
    start = time.perf_counter()
    floors = tuple(cfg.min_width * w for w in x0.widths_upper())
    fat = _fat_axes(x0)
    counter = 0
    heap: list[tuple[float, int, Box]] = [(-_measure(x0, fat), counter, x0)]
    try:
        while heap:
            _, _, box = heapq.heappop(heap)
            t = eval_constraint(c, box.env(), cfg, caches)
            if t is Truth.TRUE:
                return box
            if t is Truth.FALSE:
                continue
            axis = _splittable_axis(box, floors)
            if axis is None:
                continue
            lo, hi = box.bisect(axis)
            caches.stats.bisections += 1
            for child in (lo, hi):
                counter += 1
                heapq.heappush(heap, (-_measure(child, fat), counter, child))
        return None
    finally:
        caches.stats.wall_time += time.perf_counter() - start

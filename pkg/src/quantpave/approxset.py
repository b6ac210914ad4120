"""Tri-valued approximate sets represented as bisection trees of boxes.

An approximate set maps a root box to {T, F, U}, constant on finitely
many sub-boxes.  The sub-boxes are exactly the leaves of a bisection
tree: every split halves one axis at the same midpoint rule used by
:meth:`Box.bisect`, so leaf boxes partition the root and any leaf box is
reachable again later by replaying bisections.  T and F leaves are
certified classifications; U leaves are undecided and carry the error
measure.

The tree is kept canonical: a split whose children are leaves of equal
truth is coalesced.  Sets are mutated in place by :meth:`embed` (they act
as memo caches during solving); single-writer, no concurrent mutation.
"""

from __future__ import annotations

from typing import Iterator, Sequence

from .constraints import Truth
from .errors import NonDyadicRegion, OutsideDomain, UnsplittableAxis
from .intervals import Box, Interval, midpoint, mul_up, sub_up


# Bit per truth value, aggregated over subtrees for pruned traversal.
_TRUTH_BIT = {Truth.TRUE: 1, Truth.FALSE: 2, Truth.UNKNOWN: 4}
_BIT_TRUTH = {1: Truth.TRUE, 2: Truth.FALSE, 4: Truth.UNKNOWN}


class _Split:
    __slots__ = ("axis", "lo", "hi", "mask")

    def __init__(self, axis: int, lo, hi):
        self.axis = axis
        self.lo = lo
        self.hi = hi
        self.mask = _mask_of(lo) | _mask_of(hi)


# A tree node is either a Truth (leaf) or a _Split.
_Node = Truth | _Split


def _mask_of(node: "_Node") -> int:
    if isinstance(node, Truth):
        return _TRUTH_BIT[node]
    return node.mask


def _clone(node: _Node) -> _Node:
    if isinstance(node, Truth):
        return node
    return _Split(node.axis, _clone(node.lo), _clone(node.hi))


def _coalesce(node: _Split) -> _Node:
    if isinstance(node.lo, Truth) and node.lo is node.hi:
        return node.lo
    node.mask = _mask_of(node.lo) | _mask_of(node.hi)
    return node


def _split_tree(node: _Node, box: Box, axis: int) -> tuple[_Node, _Node]:
    """Cut a tree on `box` at the bisection plane of `axis`, returning the
    trees for the two halves.  Splits on other axes are pushed through."""
    if isinstance(node, Truth):
        return node, node
    if node.axis == axis:
        return node.lo, node.hi
    other = node.axis
    lo_box, hi_box = box.bisect(other)
    lo_lo, lo_hi = _split_tree(node.lo, lo_box, axis)
    hi_lo, hi_hi = _split_tree(node.hi, hi_box, axis)
    return (
        _coalesce(_Split(other, lo_lo, hi_lo)),
        _coalesce(_Split(other, lo_hi, hi_hi)),
    )


class ApproximateSet:
    """Bisection tree of T/F/U boxes over a fixed root box."""

    __slots__ = ("root", "_tree")

    def __init__(self, root: Box, truth: Truth = Truth.UNKNOWN):
        if root.is_empty or any(iv.lo == iv.hi for iv in root.intervals):
            raise ValueError(f"degenerate root box {root}")
        self.root = root
        self._tree: _Node = truth

    @classmethod
    def unknown(cls, root: Box) -> "ApproximateSet":
        """The everywhere-undecided set on `root`."""
        return cls(root, Truth.UNKNOWN)

    @classmethod
    def constant(cls, root: Box, truth: Truth) -> "ApproximateSet":
        return cls(root, truth)

    # -- queries ----------------------------------------------------------

    def leaves(self) -> Iterator[tuple[Box, Truth]]:
        """All (box, truth) leaves, lower halves first."""

        def walk(node: _Node, box: Box) -> Iterator[tuple[Box, Truth]]:
            if isinstance(node, Truth):
                yield box, node
            else:
                lo_box, hi_box = box.bisect(node.axis)
                yield from walk(node.lo, lo_box)
                yield from walk(node.hi, hi_box)

        return walk(self._tree, self.root)

    def value_at(self, point: Sequence[float]) -> Truth:
        """Truth of the leaf containing `point`; points on a split plane
        belong to the lower-coordinate child."""
        if not self.root.contains_point(point):
            raise OutsideDomain(f"point {point} outside root {self.root}")
        node = self._tree
        lo = [iv.lo for iv in self.root.intervals]
        hi = [iv.hi for iv in self.root.intervals]
        while not isinstance(node, Truth):
            axis = node.axis
            m = midpoint(lo[axis], hi[axis])
            assert m is not None
            if point[axis] <= m:
                hi[axis] = m
                node = node.lo
            else:
                lo[axis] = m
                node = node.hi
        return node

    def _bounds_within(self, within: Box | None) -> tuple[list, list, list, list] | None:
        """Root and clip bounds as mutable float lists, or None if the
        clip region misses the root."""
        lo = [iv.lo for iv in self.root.intervals]
        hi = [iv.hi for iv in self.root.intervals]
        if within is None:
            return lo, hi, list(lo), list(hi)
        if within.names != self.root.names:
            raise NonDyadicRegion(
                f"query names {within.names} differ from root {self.root.names}"
            )
        wlo = [max(a, iv.lo) for a, iv in zip(lo, within.intervals)]
        whi = [min(b, iv.hi) for b, iv in zip(hi, within.intervals)]
        if any(a > b for a, b in zip(wlo, whi)):
            return None
        return lo, hi, wlo, whi

    def measure(
        self, truth: Truth, within: Box | None = None, axes: Sequence[int] | None = None
    ) -> float:
        """Total measure of leaves with the given truth clipped to
        `within`, rounded up.

        `axes` restricts the width product to the given axis indices (used
        for slice queries whose remaining axes are degenerate); by default
        all axes contribute, which is the plain volume."""
        bounds = self._bounds_within(within)
        if bounds is None:
            return 0.0
        lo, hi, wlo, whi = bounds
        axis_list = tuple(range(self.root.dim)) if axes is None else tuple(axes)
        want_bit = _TRUTH_BIT[truth]

        def walk(node: _Node) -> float:
            if isinstance(node, Truth):
                if node is not truth:
                    return 0.0
                v = 1.0
                for i in axis_list:
                    a = max(lo[i], wlo[i])
                    b = min(hi[i], whi[i])
                    if b <= a:
                        return 0.0
                    v = mul_up(v, sub_up(b, a))
                return v
            if not (node.mask & want_bit):
                return 0.0
            axis = node.axis
            la, ha = lo[axis], hi[axis]
            m = 0.5 * (la + ha)
            if not (la < m < ha):
                m = midpoint(la, ha)
                if m is None:
                    return 0.0
            total = 0.0
            if wlo[axis] <= m:
                save = hi[axis]
                hi[axis] = m
                total += walk(node.lo)
                hi[axis] = save
            if whi[axis] >= m:
                save = lo[axis]
                lo[axis] = m
                total += walk(node.hi)
                lo[axis] = save
            return total

        return walk(self._tree)

    def err(self, within: Box | None = None) -> float:
        """Volume of the undecided region clipped to `within` (the whole
        root by default), overestimated under rounding."""
        return self.measure(Truth.UNKNOWN, within)

    def uniform_truth(self, region: Box, fat_axes: Sequence[int]) -> Truth:
        """T (F) if every leaf overlapping `region` is T (F), else U.
        Leaves touching only in a face (zero width along one of
        `fat_axes`) do not count: their shared points also belong to a
        positively-overlapping neighbor leaf."""
        bounds = self._bounds_within(region)
        if bounds is None:
            return Truth.UNKNOWN
        lo, hi, wlo, whi = bounds
        fat = tuple(fat_axes)
        seen: Truth | None = None

        def absorb(truth: Truth) -> bool:
            nonlocal seen
            for i in fat:
                if min(hi[i], whi[i]) <= max(lo[i], wlo[i]):
                    return True
            if truth is Truth.UNKNOWN:
                seen = Truth.UNKNOWN
                return False
            if seen is None:
                seen = truth
                return True
            if seen is not truth:
                seen = Truth.UNKNOWN
                return False
            return True

        def walk(node: _Node) -> bool:
            if isinstance(node, Truth):
                return absorb(node)
            mask = node.mask
            if mask in _BIT_TRUTH:
                # Uniform subtree: contributes a single truth value.
                return absorb(_BIT_TRUTH[mask])
            axis = node.axis
            la, ha = lo[axis], hi[axis]
            m = 0.5 * (la + ha)
            if not (la < m < ha):
                m = midpoint(la, ha)
                if m is None:
                    return True
            if wlo[axis] <= m:
                save = hi[axis]
                hi[axis] = m
                ok = walk(node.lo)
                hi[axis] = save
                if not ok:
                    return False
            if whi[axis] >= m:
                save = lo[axis]
                lo[axis] = m
                ok = walk(node.hi)
                lo[axis] = save
                if not ok:
                    return False
            return True

        walk(self._tree)
        return Truth.UNKNOWN if seen is None else seen

    def choose(self, within: Box | None = None) -> Box | None:
        """An undecided leaf box intersecting `within`: the one with the
        largest overlap measure, ties broken by lexicographically smallest
        lower corner.  None if no undecided leaf intersects `within`.

        Overlap is measured on the non-degenerate axes of `within` so that
        slice queries still rank leaves usefully."""
        bounds = self._bounds_within(within)
        if bounds is None:
            return None
        lo, hi, wlo, whi = bounds
        fat_axes = tuple(i for i in range(len(wlo)) if wlo[i] < whi[i])
        best: tuple[float, tuple[float, ...], Box] | None = None

        def walk(node: _Node) -> None:
            nonlocal best
            if isinstance(node, Truth):
                if node is not Truth.UNKNOWN:
                    return
                overlap = 1.0
                for i in fat_axes:
                    overlap = mul_up(
                        overlap, sub_up(min(hi[i], whi[i]), max(lo[i], wlo[i]))
                    )
                corner = tuple(lo)
                if (
                    best is None
                    or overlap > best[0]
                    or (overlap == best[0] and corner < best[1])
                ):
                    box = Box(
                        self.root.names,
                        tuple(Interval(a, b) for a, b in zip(lo, hi)),
                    )
                    best = (overlap, corner, box)
                return
            if not (node.mask & 4):
                return
            axis = node.axis
            la, ha = lo[axis], hi[axis]
            m = 0.5 * (la + ha)
            if not (la < m < ha):
                m = midpoint(la, ha)
                if m is None:
                    return
            if wlo[axis] <= m:
                save = hi[axis]
                hi[axis] = m
                walk(node.lo)
                hi[axis] = save
            if whi[axis] >= m:
                save = lo[axis]
                lo[axis] = m
                walk(node.hi)
                lo[axis] = save

        walk(self._tree)
        return None if best is None else best[2]

    def is_canonical(self) -> bool:
        def walk(node: _Node) -> bool:
            if isinstance(node, Truth):
                return True
            if isinstance(node.lo, Truth) and node.lo is node.hi:
                return False
            return walk(node.lo) and walk(node.hi)

        return walk(self._tree)

    # -- mutation ---------------------------------------------------------

    def embed(self, region: Box, refined: "ApproximateSet") -> None:
        """Overwrite this set on `region` with `refined` (in place).

        `region` must equal `refined.root` and be reachable from this
        set's root by bisection; values outside `region` are untouched.
        Raises NonDyadicRegion if `region` is not bisection-aligned."""
        if refined.root != region:
            raise ValueError(
                f"refined set root {refined.root} does not match region {region}"
            )
        if region.names != self.root.names:
            raise NonDyadicRegion(
                f"region names {region.names} differ from root {self.root.names}"
            )
        if not region.subset_of(self.root):
            raise NonDyadicRegion(f"region {region} outside root {self.root}")
        self._tree = self._place(self._tree, self.root, region, _clone(refined._tree))

    def _place(self, node: _Node, box: Box, region: Box, rtree: _Node) -> _Node:
        if box == region:
            return rtree
        if isinstance(node, Truth):
            # Open a split on the lowest axis along which the region fits
            # one half of this box; the region's own generation order does
            # not matter because a dyadic product is reachable axis by axis.
            for axis in range(box.dim):
                try:
                    lo_box, hi_box = box.bisect(axis)
                except UnsplittableAxis:
                    continue
                if region.subset_of(lo_box) or region.subset_of(hi_box):
                    return self._place(_Split(axis, node, node), box, region, rtree)
                ra = region.intervals[axis]
                if ra != box.intervals[axis] and not (
                    ra.subset_of(lo_box.intervals[axis])
                    or ra.subset_of(hi_box.intervals[axis])
                ):
                    raise NonDyadicRegion(
                        f"region {region} is not bisection-aligned within {box}"
                    )
            raise NonDyadicRegion(
                f"region {region} is not bisection-aligned within {box}"
            )
        axis = node.axis
        lo_box, hi_box = box.bisect(axis)
        if region.subset_of(lo_box):
            node.lo = self._place(node.lo, lo_box, region, rtree)
        elif region.subset_of(hi_box):
            node.hi = self._place(node.hi, hi_box, region, rtree)
        else:
            # The region spans this split plane: cut both the region and
            # the refinement tree at the plane and push each half down.
            if region.intervals[axis] != box.intervals[axis]:
                raise NonDyadicRegion(
                    f"region {region} straddles a split of {box} non-dyadically"
                )
            region_lo, region_hi = region.bisect(axis)
            rt_lo, rt_hi = _split_tree(rtree, region, axis)
            node.lo = self._place(node.lo, lo_box, region_lo, rt_lo)
            node.hi = self._place(node.hi, hi_box, region_hi, rt_hi)
        return _coalesce(node)

    def __repr__(self) -> str:
        counts = {Truth.TRUE: 0, Truth.FALSE: 0, Truth.UNKNOWN: 0}
        for _, t in self.leaves():
            counts[t] += 1
        return (
            f"ApproximateSet(root={self.root}, leaves T={counts[Truth.TRUE]} "
            f"F={counts[Truth.FALSE]} U={counts[Truth.UNKNOWN]})"
        )

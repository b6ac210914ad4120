"""Outward-rounded interval arithmetic and axis-aligned boxes.

Every arithmetic result is guaranteed to contain the exact real-arithmetic
image of its operands.  Instead of switching the FPU rounding mode (not
portable from Python) we post-correct round-to-nearest results using
error-free transformations: TwoSum for addition/subtraction and Dekker's
TwoProduct for multiplication, with an exact-rational fallback outside
Dekker's safe exponent range.  This keeps exactly representable results
exact ([1,2]+[3,4] is [4,6], not a widened enclosure) while still rounding
inexact endpoints outward.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .errors import DimensionMismatch, UnsplittableAxis

_INF = math.inf
_MAX = sys.float_info.max
_TINY = 5e-324  # smallest positive subnormal

# Dekker's splitting constant (2**27 + 1) and the exponent range in which
# the split and all partial products stay exact.
_SPLIT = 134217729.0
_DEKKER_HI = 2.0**510
_DEKKER_LO = 2.0**-510
_DEKKER_P_LO = 2.0**-900


def _next_up(x: float) -> float:
    return math.nextafter(x, _INF)


def _next_down(x: float) -> float:
    return math.nextafter(x, -_INF)


def add_down(x: float, y: float) -> float:
    """Largest float <= the exact sum x + y."""
    s = x + y
    if -_INF < s < _INF:
        # s finite implies both operands finite.
        b = s - x
        return s if (x - (s - b)) + (y - b) >= 0.0 else _next_down(s)
    if math.isinf(x) or math.isinf(y):
        return -_INF if math.isnan(s) else s
    return _MAX if s > 0 else -_INF


def add_up(x: float, y: float) -> float:
    """Smallest float >= the exact sum x + y."""
    s = x + y
    if -_INF < s < _INF:
        b = s - x
        return s if (x - (s - b)) + (y - b) <= 0.0 else _next_up(s)
    if math.isinf(x) or math.isinf(y):
        return _INF if math.isnan(s) else s
    return _INF if s > 0 else -_MAX


def sub_down(x: float, y: float) -> float:
    return add_down(x, -y)


def sub_up(x: float, y: float) -> float:
    return add_up(x, -y)


def mul_pair(x: float, y: float) -> tuple[float, float]:
    """(largest float <= x*y, smallest float >= x*y) in one pass.

    Dekker's TwoProduct recovers the exact rounding error inside its safe
    exponent range; zeros, infinities and extreme magnitudes take the
    exact-rational slow path."""
    ax = x if x >= 0.0 else -x
    ay = y if y >= 0.0 else -y
    if _DEKKER_LO < ax < _DEKKER_HI and _DEKKER_LO < ay < _DEKKER_HI:
        p = x * y
        ap = p if p >= 0.0 else -p
        if ap > _DEKKER_P_LO:
            cx = _SPLIT * x
            hx = cx - (cx - x)
            lx = x - hx
            cy = _SPLIT * y
            hy = cy - (cy - y)
            ly = y - hy
            e = ((hx * hy - p) + hx * ly + lx * hy) + lx * ly
            if e > 0.0:
                return p, _next_up(p)
            if e < 0.0:
                return _next_down(p), p
            return p, p
    return _mul_pair_slow(x, y)


def _mul_pair_slow(x: float, y: float) -> tuple[float, float]:
    if x == 0.0 or y == 0.0:
        # Interval endpoint convention: 0 * inf = 0.
        return 0.0, 0.0
    if math.isinf(x) or math.isinf(y):
        p = x * y
        return p, p
    p = x * y
    if math.isinf(p):
        if p > 0:
            return _MAX, _INF
        return -_INF, -_MAX
    if p == 0.0:
        # Underflow: the true product is tiny but nonzero.
        if (x > 0) == (y > 0):
            return 0.0, _TINY
        return -_TINY, 0.0
    exact = Fraction(x) * Fraction(y)
    fp = Fraction(p)
    if exact > fp:
        return p, _next_up(p)
    if exact < fp:
        return _next_down(p), p
    return p, p


def mul_down(x: float, y: float) -> float:
    """Largest float <= the exact product x * y."""
    return mul_pair(x, y)[0]


def mul_up(x: float, y: float) -> float:
    """Smallest float >= the exact product x * y."""
    return mul_pair(x, y)[1]


def midpoint(lo: float, hi: float) -> float | None:
    """A representable value strictly inside [lo, hi], or None."""
    if lo == -_INF and hi == _INF:
        return 0.0
    if lo == -_INF:
        m = hi - max(1.0, abs(hi))
    elif hi == _INF:
        m = lo + max(1.0, abs(lo))
    else:
        m = 0.5 * (lo + hi)
        if not math.isfinite(m):
            m = lo + 0.5 * (hi - lo)
    if lo < m < hi:
        return m
    return None


@dataclass(frozen=True, slots=True)
class Interval:
    """Closed interval [lo, hi] with extended-real endpoints.

    The empty interval is a distinct canonical value (`Interval.empty()`),
    not NaN-encoded; every constructor call with lo > hi other than the
    canonical empty encoding is rejected.
    """

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not isinstance(self.lo, float):
            object.__setattr__(self, "lo", float(self.lo))
        if not isinstance(self.hi, float):
            object.__setattr__(self, "hi", float(self.hi))
        lo, hi = self.lo, self.hi
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo > hi and not (lo == _INF and hi == -_INF):
            raise ValueError(f"invalid interval endpoints [{lo}, {hi}]")

    @staticmethod
    def empty() -> Interval:
        return _EMPTY

    @staticmethod
    def point(v: float) -> Interval:
        return Interval(v, v)

    @staticmethod
    def _raw(lo: float, hi: float) -> Interval:
        """Construction without validation, for arithmetic results whose
        invariants hold by construction (hot path)."""
        iv = object.__new__(Interval)
        object.__setattr__(iv, "lo", lo)
        object.__setattr__(iv, "hi", hi)
        return iv

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    @property
    def is_bounded(self) -> bool:
        return not self.is_empty and math.isfinite(self.lo) and math.isfinite(self.hi)

    def width_upper(self) -> float:
        """Width hi - lo rounded up (0 for the empty interval)."""
        if self.is_empty:
            return 0.0
        return sub_up(self.hi, self.lo)

    def __add__(self, other: Interval) -> Interval:
        if self.is_empty or other.is_empty:
            return _EMPTY
        return Interval._raw(add_down(self.lo, other.lo), add_up(self.hi, other.hi))

    def __sub__(self, other: Interval) -> Interval:
        if self.is_empty or other.is_empty:
            return _EMPTY
        return Interval._raw(sub_down(self.lo, other.hi), sub_up(self.hi, other.lo))

    def __neg__(self) -> Interval:
        if self.is_empty:
            return _EMPTY
        return Interval._raw(-self.hi, -self.lo)

    def __mul__(self, other: Interval) -> Interval:
        if self.is_empty or other.is_empty:
            return _EMPTY
        a, b = self.lo, self.hi
        c, d = other.lo, other.hi
        if a == b:
            # Degenerate operand: two endpoint products suffice.
            d1, u1 = mul_pair(a, c)
            d2, u2 = mul_pair(a, d)
            return Interval._raw(min(d1, d2), max(u1, u2))
        if c == d:
            d1, u1 = mul_pair(a, c)
            d2, u2 = mul_pair(b, c)
            return Interval._raw(min(d1, d2), max(u1, u2))
        d1, u1 = mul_pair(a, c)
        d2, u2 = mul_pair(a, d)
        d3, u3 = mul_pair(b, c)
        d4, u4 = mul_pair(b, d)
        return Interval._raw(min(d1, d2, d3, d4), max(u1, u2, u3, u4))

    def contains(self, v: float) -> bool:
        return not self.is_empty and self.lo <= v <= self.hi

    def subset_of(self, other: Interval) -> bool:
        if self.is_empty:
            return True
        if other.is_empty:
            return False
        return other.lo <= self.lo and self.hi <= other.hi

    def intersect(self, other: Interval) -> Interval:
        if self.is_empty or other.is_empty:
            return _EMPTY
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else _EMPTY

    def hull(self, other: Interval) -> Interval:
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def midpoint(self) -> float | None:
        """A representable value strictly inside, or None if no such value
        exists (degenerate or one-ulp-wide interval)."""
        if self.is_empty:
            return None
        return midpoint(self.lo, self.hi)

    def __repr__(self) -> str:
        if self.is_empty:
            return "Interval.empty()"
        return f"Interval({self.lo!r}, {self.hi!r})"


_EMPTY = Interval(_INF, -_INF)


class Box:
    """Axis-aligned product of intervals with named dimensions."""

    __slots__ = ("names", "intervals")

    def __init__(self, names: Sequence[str], intervals: Sequence[Interval]):
        names = tuple(names)
        intervals = tuple(intervals)
        if not names:
            raise ValueError("box must have at least one dimension")
        if len(names) != len(intervals):
            raise DimensionMismatch(
                f"{len(names)} names for {len(intervals)} intervals"
            )
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate dimension names in {names}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "intervals", intervals)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Box is immutable")

    @staticmethod
    def from_bounds(bounds: dict[str, tuple[float, float]]) -> Box:
        return Box(tuple(bounds), tuple(Interval(lo, hi) for lo, hi in bounds.values()))

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def is_empty(self) -> bool:
        return any(iv.is_empty for iv in self.intervals)

    def interval(self, name: str) -> Interval:
        try:
            return self.intervals[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def env(self) -> dict[str, Interval]:
        return dict(zip(self.names, self.intervals))

    def renamed(self, names: Sequence[str]) -> Box:
        return Box(names, self.intervals)

    def widths_upper(self) -> tuple[float, ...]:
        return tuple(iv.width_upper() for iv in self.intervals)

    def volume_upper(self) -> float:
        """Product of widths, rounded up.  Returns 0 if any width is 0 and
        inf (flagged) if any endpoint is infinite."""
        if self.is_empty:
            return 0.0
        if not all(iv.is_bounded for iv in self.intervals):
            return _INF
        v = 1.0
        for iv in self.intervals:
            w = iv.width_upper()
            if w == 0.0:
                return 0.0
            v = mul_up(v, w)
        return v

    def bisect(self, axis: int) -> tuple[Box, Box]:
        """Split at a representable midpoint strictly inside the axis.

        Raises UnsplittableAxis if the axis has no interior float."""
        iv = self.intervals[axis]
        m = iv.midpoint()
        if m is None:
            raise UnsplittableAxis(
                f"axis {axis} ({self.names[axis]}) of {self} cannot be split"
            )
        left = list(self.intervals)
        right = list(self.intervals)
        left[axis] = Interval(iv.lo, m)
        right[axis] = Interval(m, iv.hi)
        return Box(self.names, left), Box(self.names, right)

    def _check_names(self, other: Box) -> None:
        if self.names != other.names:
            raise DimensionMismatch(f"{self.names} vs {other.names}")

    def intersect(self, other: Box) -> Box:
        self._check_names(other)
        return Box(
            self.names,
            tuple(a.intersect(b) for a, b in zip(self.intervals, other.intervals)),
        )

    def hull(self, other: Box) -> Box:
        self._check_names(other)
        return Box(
            self.names,
            tuple(a.hull(b) for a, b in zip(self.intervals, other.intervals)),
        )

    def subset_of(self, other: Box) -> bool:
        self._check_names(other)
        return all(a.subset_of(b) for a, b in zip(self.intervals, other.intervals))

    def intersects(self, other: Box) -> bool:
        return not self.intersect(other).is_empty

    def contains_point(self, point: Sequence[float]) -> bool:
        if len(point) != self.dim:
            raise DimensionMismatch(f"point of dim {len(point)} in box of dim {self.dim}")
        return all(iv.contains(v) for iv, v in zip(self.intervals, point))

    def center(self) -> tuple[float, ...]:
        out = []
        for iv in self.intervals:
            m = iv.midpoint()
            out.append(iv.lo if m is None else m)
        return tuple(out)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return self.names == other.names and self.intervals == other.intervals

    def __hash__(self) -> int:
        return hash((self.names, self.intervals))

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.intervals)

    def __repr__(self) -> str:
        parts = ", ".join(
            f"{n}=[{iv.lo!r}, {iv.hi!r}]" for n, iv in zip(self.names, self.intervals)
        )
        return f"Box({parts})"


def widest_axis(widths: Iterable[float]) -> int:
    """Index of the largest width; ties go to the lowest index."""
    best = -1
    best_w = -1.0
    for i, w in enumerate(widths):
        if w > best_w:
            best, best_w = i, w
    return best

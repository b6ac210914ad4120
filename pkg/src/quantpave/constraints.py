"""Constraint trees and the three-valued truth algebra.

A constraint is built from ``lhs <= rhs`` atoms, conjunction, bounded
existential and universal quantifiers over box domains, and function
inversion quantifiers.  A function inversion node binds a fresh state
vector ``z`` to the image of a vector expression and asserts its body on
``z``; it is solved against a memoized approximation of the body's
solution set rather than by syntactic substitution.

Truth values follow Kleene conjunction: T and T is T, F absorbs, anything
else is U.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator

from .expr import Expr, VecExpr
from .intervals import Box


class Truth(enum.Enum):
    TRUE = "T"
    FALSE = "F"
    UNKNOWN = "U"

    def __str__(self) -> str:
        return self.value


def truth_and(a: Truth, b: Truth) -> Truth:
    """Kleene conjunction."""
    if a is Truth.FALSE or b is Truth.FALSE:
        return Truth.FALSE
    if a is Truth.TRUE and b is Truth.TRUE:
        return Truth.TRUE
    return Truth.UNKNOWN


class Constraint:
    """Base class for constraint nodes.  Immutable after construction."""

    __slots__ = ()

    def free_vars(self) -> frozenset[str]:
        raise NotImplementedError


@dataclass(frozen=True, slots=True)
class AtomLE(Constraint):
    """Atomic comparison ``lhs <= rhs``.

    Equalities and two-sided bounds are encoded as conjunctions of atoms;
    thin equalities generically evaluate U on boxes of positive width."""

    lhs: Expr
    rhs: Expr

    def free_vars(self) -> frozenset[str]:
        return self.lhs.free_vars() | self.rhs.free_vars()


@dataclass(frozen=True, slots=True)
class Conj(Constraint):
    parts: tuple[Constraint, ...]

    def __init__(self, parts: tuple[Constraint, ...] | list[Constraint]):
        object.__setattr__(self, "parts", tuple(parts))

    def free_vars(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for p in self.parts:
            out |= p.free_vars()
        return out


@dataclass(frozen=True, slots=True)
class Exists(Constraint):
    """Bounded existential quantifier over a box domain."""

    vars: tuple[str, ...]
    domain: Box
    body: Constraint

    def __init__(self, vars: tuple[str, ...] | list[str], domain: Box, body: Constraint):
        vars = tuple(vars)
        if tuple(domain.names) != vars:
            raise ValueError(
                f"quantifier domain names {domain.names} differ from bound vars {vars}"
            )
        object.__setattr__(self, "vars", vars)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "body", body)

    def free_vars(self) -> frozenset[str]:
        return self.body.free_vars() - frozenset(self.vars)


@dataclass(frozen=True, slots=True)
class ForAll(Constraint):
    """Bounded universal quantifier over a box domain."""

    vars: tuple[str, ...]
    domain: Box
    body: Constraint

    def __init__(self, vars: tuple[str, ...] | list[str], domain: Box, body: Constraint):
        vars = tuple(vars)
        if tuple(domain.names) != vars:
            raise ValueError(
                f"quantifier domain names {domain.names} differ from bound vars {vars}"
            )
        object.__setattr__(self, "vars", vars)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "body", body)

    def free_vars(self) -> frozenset[str]:
        return self.body.free_vars() - frozenset(self.vars)


@dataclass(frozen=True, slots=True)
class FuncInv(Constraint):
    """Function inversion quantifier: bind ``bound_vars`` to the image of
    ``f`` and assert ``body`` there.

    ``z_root`` is the box on which the memo cache for this node lives; it
    must contain the image of ``f`` over every environment the node is
    evaluated in (for unrolled systems it is the forward reachable hull).
    ``cache_id`` names the cache and must be unique within a tree."""

    f: VecExpr
    bound_vars: tuple[str, ...]
    body: Constraint
    cache_id: str
    z_root: Box

    def __init__(
        self,
        f: VecExpr,
        bound_vars: tuple[str, ...] | list[str],
        body: Constraint,
        cache_id: str,
        z_root: Box,
    ):
        bound_vars = tuple(bound_vars)
        if f.dim != len(bound_vars):
            raise ValueError(
                f"function has {f.dim} components but binds {len(bound_vars)} variables"
            )
        extra = body.free_vars() - frozenset(bound_vars)
        if extra:
            raise ValueError(
                f"function inversion body not closed over bound vars; leaks {sorted(extra)}"
            )
        if tuple(z_root.names) != bound_vars:
            raise ValueError(
                f"z_root names {z_root.names} differ from bound vars {bound_vars}"
            )
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "bound_vars", bound_vars)
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "cache_id", cache_id)
        object.__setattr__(self, "z_root", z_root)

    def free_vars(self) -> frozenset[str]:
        return self.f.free_vars()


def free_vars(c: Constraint) -> frozenset[str]:
    return c.free_vars()


def iter_nodes(c: Constraint) -> Iterator[Constraint]:
    """All nodes of the tree, preorder."""
    yield c
    if isinstance(c, Conj):
        for p in c.parts:
            yield from iter_nodes(p)
    elif isinstance(c, (Exists, ForAll)):
        yield from iter_nodes(c.body)
    elif isinstance(c, FuncInv):
        yield from iter_nodes(c.body)


def well_formed(c: Constraint) -> list[str]:
    """Check tree-level invariants.  Returns a list of problems (empty
    means well formed): no binder shadows an outer name, function
    inversion bodies are closed over their bound vars, cache ids are
    unique, and function dimensions match their binders."""
    problems: list[str] = []
    cache_ids: set[str] = set()

    def walk(node: Constraint, scope: frozenset[str]) -> None:
        if isinstance(node, Conj):
            for p in node.parts:
                walk(p, scope)
            return
        if isinstance(node, (Exists, ForAll)):
            shadows = frozenset(node.vars) & scope
            if shadows:
                problems.append(f"quantifier rebinds outer names {sorted(shadows)}")
            walk(node.body, scope | frozenset(node.vars))
            return
        if isinstance(node, FuncInv):
            if node.cache_id in cache_ids:
                problems.append(f"duplicate cache_id {node.cache_id!r}")
            cache_ids.add(node.cache_id)
            shadows = frozenset(node.bound_vars) & scope
            if shadows:
                problems.append(
                    f"function inversion rebinds outer names {sorted(shadows)}"
                )
            extra = node.body.free_vars() - frozenset(node.bound_vars)
            if extra:
                problems.append(
                    f"funcinv body not closed over bound vars; leaks {sorted(extra)}"
                )
            if node.f.dim != len(node.bound_vars):
                problems.append(
                    f"funcinv dimension mismatch: {node.f.dim} components, "
                    f"{len(node.bound_vars)} bound vars"
                )
            walk(node.body, frozenset(node.bound_vars))
            return

    walk(c, c.free_vars())
    return problems

"""Discrete-time systems with control and perturbation, and their
unrolling into quantified constraints.

A system is a transition map applied `horizon` times from an initial
state; at every stage a control vector is picked from its stage domain
and an adversarial perturbation vector ranges over its stage domain.
The query solved downstream is: from which initial states can controls
always be chosen so that, whatever the perturbations do, the state stays
allowed at every stage.

Two equivalent unrollings are provided.  The composed form keeps one
constraint per stage, glued by function inversion nodes so each stage is
solved against a memoized solution set of the next.  The naive form
substitutes the transition map syntactically, which makes the atom
expressions grow with the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .constraints import AtomLE, Conj, Constraint, Exists, ForAll, FuncInv
from .errors import SystemValidationError
from .expr import Expr, VecExpr, Var, range_over
from .intervals import Box, Interval


def _stage_name(base: str, stage: int) -> str:
    return base if stage == 0 else f"{base}@{stage}"


def _subst_constraint(c: Constraint, mapping: Mapping[str, Expr]) -> Constraint:
    """Substitute variables inside a conjunction-of-atoms constraint."""
    if isinstance(c, AtomLE):
        return AtomLE(c.lhs.substitute(mapping), c.rhs.substitute(mapping))
    if isinstance(c, Conj):
        return Conj(tuple(_subst_constraint(p, mapping) for p in c.parts))
    raise SystemValidationError(
        [f"allowed-state predicates may only use atoms and conjunction, got {type(c).__name__}"]
    )


def _broadcast(entries: Sequence, needed: int, what: str) -> tuple:
    entries = tuple(entries)
    if len(entries) == needed:
        return entries
    if len(entries) == 1:
        return entries * needed
    raise SystemValidationError(
        [f"{what}: expected {needed} per-stage entries (or 1 to broadcast), got {len(entries)}"]
    )


@dataclass(frozen=True)
class DiscreteSystem:
    """The tuple (transition, horizon, allowed, control, perturbation)
    plus the initial search box.

    Per-stage lists accept a single entry as a stage-constant shorthand;
    `allowed` has horizon+1 entries (stages 0..horizon), the two domain
    lists have `horizon` entries.  The '@' character is reserved for
    stage-suffixed names generated during unrolling and is rejected in
    user variable names."""

    state_vars: tuple[str, ...]
    control_vars: tuple[str, ...]
    perturbation_vars: tuple[str, ...]
    horizon: int
    transition: VecExpr
    allowed: tuple[Constraint, ...]
    control_domain: tuple[Box, ...]
    perturbation_domain: tuple[Box, ...]
    initial_box: Box

    def __post_init__(self) -> None:
        object.__setattr__(self, "state_vars", tuple(self.state_vars))
        object.__setattr__(self, "control_vars", tuple(self.control_vars))
        object.__setattr__(self, "perturbation_vars", tuple(self.perturbation_vars))
        object.__setattr__(
            self, "allowed", _broadcast(self.allowed, self.horizon + 1, "allowed")
        )
        object.__setattr__(
            self,
            "control_domain",
            _broadcast(self.control_domain, self.horizon, "control_domain"),
        )
        object.__setattr__(
            self,
            "perturbation_domain",
            _broadcast(self.perturbation_domain, self.horizon, "perturbation_domain"),
        )

    def validate(self) -> list[str]:
        """All structural problems with this system (empty means valid)."""
        problems: list[str] = []
        names = self.state_vars + self.control_vars + self.perturbation_vars
        if not self.state_vars:
            problems.append("at least one state variable is required")
        if not self.control_vars:
            problems.append("at least one control variable is required")
        if not self.perturbation_vars:
            problems.append("at least one perturbation variable is required")
        if len(set(names)) != len(names):
            problems.append(f"variable names are not disjoint: {names}")
        for name in names:
            if "@" in name:
                problems.append(f"variable name {name!r} contains reserved character '@'")
        if self.horizon < 0:
            problems.append(f"horizon must be non-negative, got {self.horizon}")
        if self.transition.dim != len(self.state_vars):
            problems.append(
                f"transition has {self.transition.dim} components for "
                f"{len(self.state_vars)} state variables"
            )
        declared = frozenset(names)
        undeclared = self.transition.free_vars() - declared
        if undeclared:
            problems.append(f"transition uses undeclared variables {sorted(undeclared)}")
        if len(self.allowed) != self.horizon + 1:
            problems.append(
                f"allowed: expected {self.horizon + 1} entries, got {len(self.allowed)}"
            )
        state_set = frozenset(self.state_vars)
        for k, a in enumerate(self.allowed):
            extra = a.free_vars() - state_set
            if extra:
                problems.append(
                    f"allowed[{k}] mentions non-state variables {sorted(extra)}"
                )
            try:
                _subst_constraint(a, {})
            except SystemValidationError as exc:
                problems.extend(f"allowed[{k}]: {p}" for p in exc.problems)
        if len(self.control_domain) != self.horizon:
            problems.append(
                f"control_domain: expected {self.horizon} entries, got {len(self.control_domain)}"
            )
        if len(self.perturbation_domain) != self.horizon:
            problems.append(
                f"perturbation_domain: expected {self.horizon} entries, "
                f"got {len(self.perturbation_domain)}"
            )
        for what, boxes, vars_ in (
            ("control_domain", self.control_domain, self.control_vars),
            ("perturbation_domain", self.perturbation_domain, self.perturbation_vars),
        ):
            for k, b in enumerate(boxes):
                if tuple(b.names) != vars_:
                    problems.append(
                        f"{what}[{k}] names {b.names} do not match variables {vars_}"
                    )
                elif b.is_empty or not all(iv.is_bounded for iv in b.intervals):
                    problems.append(f"{what}[{k}] must be a non-empty bounded box")
        if tuple(self.initial_box.names) != self.state_vars:
            problems.append(
                f"initial_box names {self.initial_box.names} do not match "
                f"state variables {self.state_vars}"
            )
        elif self.initial_box.is_empty or not all(
            iv.is_bounded for iv in self.initial_box.intervals
        ):
            problems.append("initial_box must be a non-empty bounded box")
        return problems

    def check(self) -> "DiscreteSystem":
        problems = self.validate()
        if problems:
            raise SystemValidationError(problems)
        return self

    def stage_roots(self) -> list[Box]:
        """Forward reachable hulls: roots[k] bounds every state reachable
        at stage k from the initial box (under full control and
        perturbation ranges).  roots[k+1] is the interval image of the
        transition over roots[k] and the stage domains."""
        roots = [self.initial_box]
        for k in range(self.horizon):
            env = dict(zip(self.state_vars, roots[k].intervals))
            env.update(self.control_domain[k].env())
            env.update(self.perturbation_domain[k].env())
            roots.append(range_over(self.transition, env))
        return roots


def _stage_transition(s: DiscreteSystem, k: int) -> VecExpr:
    """The transition map written in stage-k input names with stage-(k+1)
    output names."""
    mapping: dict[str, Expr] = {
        v: Var(_stage_name(v, k)) for v in s.state_vars
    }
    mapping.update({v: Var(f"{v}@{k}") for v in s.control_vars})
    mapping.update({v: Var(f"{v}@{k}") for v in s.perturbation_vars})
    renamed = s.transition.substitute(mapping)
    return VecExpr(
        renamed.components, tuple(_stage_name(v, k + 1) for v in s.state_vars)
    )


def _stage_allowed(s: DiscreteSystem, k: int) -> Constraint:
    mapping = {v: Var(_stage_name(v, k)) for v in s.state_vars}
    return _subst_constraint(s.allowed[k], mapping)


def _fatten(box: Box) -> Box:
    """Widen zero-width axes by one ulp each way so the box can serve as
    a cache root (which must be non-degenerate)."""
    out = []
    for iv in box.intervals:
        if iv.lo == iv.hi:
            out.append(
                Interval(math.nextafter(iv.lo, -math.inf), math.nextafter(iv.hi, math.inf))
            )
        else:
            out.append(iv)
    return Box(box.names, out)


def unroll_composed(s: DiscreteSystem) -> Constraint:
    """Unroll into one constraint per stage glued by function inversion
    nodes.  Free variables are the stage-0 state variables; stage k >= 1
    binds fresh names `x@k`, and the node for the k-th transition carries
    cache id ``stage{k}`` with the forward reachable hull as its root."""
    s.check()
    roots = s.stage_roots()
    n = s.horizon
    constraint = _stage_allowed(s, n)
    for k in range(n - 1, -1, -1):
        bound = tuple(_stage_name(v, k + 1) for v in s.state_vars)
        inner: Constraint = FuncInv(
            _stage_transition(s, k),
            bound,
            constraint,
            cache_id=f"stage{k + 1}",
            z_root=_fatten(roots[k + 1]).renamed(bound),
        )
        w_names = tuple(f"{v}@{k}" for v in s.perturbation_vars)
        inner = ForAll(w_names, s.perturbation_domain[k].renamed(w_names), inner)
        u_names = tuple(f"{v}@{k}" for v in s.control_vars)
        inner = Exists(u_names, s.control_domain[k].renamed(u_names), inner)
        constraint = Conj((_stage_allowed(s, k), inner))
    return constraint


def unroll_naive(s: DiscreteSystem) -> Constraint:
    """Unroll by substituting the transition map into the allowed-state
    atoms.  Semantically equal to the composed unrolling but with no
    function inversion nodes; atom expressions grow with the horizon."""
    s.check()
    n = s.horizon

    def build(k: int, state_exprs: dict[str, Expr]) -> Constraint:
        atoms = _subst_constraint(s.allowed[k], state_exprs)
        if k == n:
            return atoms
        u_names = tuple(f"{v}@{k}" for v in s.control_vars)
        w_names = tuple(f"{v}@{k}" for v in s.perturbation_vars)
        mapping: dict[str, Expr] = dict(state_exprs)
        mapping.update({v: Var(f"{v}@{k}") for v in s.control_vars})
        mapping.update({v: Var(f"{v}@{k}") for v in s.perturbation_vars})
        next_exprs = {
            v: comp.substitute(mapping)
            for v, comp in zip(s.state_vars, s.transition.components)
        }
        inner: Constraint = ForAll(
            w_names,
            s.perturbation_domain[k].renamed(w_names),
            build(k + 1, next_exprs),
        )
        inner = Exists(u_names, s.control_domain[k].renamed(u_names), inner)
        return Conj((atoms, inner))

    return build(0, {v: Var(v) for v in s.state_vars})

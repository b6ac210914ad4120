"""Shared fixtures: the 2-state bilinear benchmark system."""

import pytest

from quantpave import (
    AtomLE,
    Box,
    Conj,
    Const,
    DiscreteSystem,
    Interval,
    VecExpr,
    Var,
    parse_expr,
)

STATE_VARS = ("x1", "x2")
ALL_VARS = ["x1", "x2", "u", "w"]


def bench_system(horizon: int) -> DiscreteSystem:
    """Benchmark system: bilinear first coordinate with a control-scaled
    perturbation term, affine second coordinate; unit state box, control
    in [-0.5, 0.5], perturbation in [-0.1, 0.1]."""
    transition = VecExpr(
        (
            parse_expr("3*x1*x2 + w*u", ALL_VARS),
            parse_expr("2*x2 + x1", ALL_VARS),
        ),
        STATE_VARS,
    )
    allowed = Conj(
        (
            AtomLE(Const(-1), Var("x1")),
            AtomLE(Var("x1"), Const(1)),
            AtomLE(Const(-1), Var("x2")),
            AtomLE(Var("x2"), Const(1)),
        )
    )
    return DiscreteSystem(
        state_vars=STATE_VARS,
        control_vars=("u",),
        perturbation_vars=("w",),
        horizon=horizon,
        transition=transition,
        allowed=(allowed,),
        control_domain=(Box(("u",), (Interval(-0.5, 0.5),)),),
        perturbation_domain=(Box(("w",), (Interval(-0.1, 0.1),)),),
        initial_box=Box(STATE_VARS, (Interval(-1, 1), Interval(-1, 1))),
    )


@pytest.fixture
def system_n0():
    return bench_system(0)


@pytest.fixture
def system_n1():
    return bench_system(1)


@pytest.fixture
def system_n2():
    return bench_system(2)

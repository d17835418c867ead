"""Shared generators: random expression trees and points."""
import numpy as np
import pytest

from holocurves.numerics import EntireExpr


def random_expr(rng: np.random.Generator, depth: int, arity: int = 1) -> EntireExpr:
    """Random tree of bounded depth; constants stay small so nothing overflows
    on the disc of radius 2."""
    if depth == 0 or rng.uniform() < 0.2:
        if rng.uniform() < 0.5:
            return EntireExpr.var(int(rng.integers(arity)), arity)
        return EntireExpr.const(complex(*rng.normal(size=2)) * 0.5, arity)
    kind = rng.choice(["add", "mul", "neg", "exp", "poly"])
    a = random_expr(rng, depth - 1, arity)
    if kind == "add":
        return a + random_expr(rng, depth - 1, arity)
    if kind == "mul":
        return a * random_expr(rng, depth - 1, arity)
    if kind == "neg":
        return -a
    if kind == "exp":
        return (a * 0.3).exp()
    coeffs = (rng.normal(size=3) + 1j * rng.normal(size=3)) * 0.5
    return EntireExpr.poly(coeffs, a)


def random_points(rng, count: int, radius: float, n: int = 1) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(size=(count, n)))
    return r * np.exp(2j * np.pi * rng.uniform(size=(count, n)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])

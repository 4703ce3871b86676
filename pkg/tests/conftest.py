"""Shared fixtures: canonical specs and random parameter draws."""

from fractions import Fraction
import random

import pytest

from polyterm import build_family


def random_rational(rng, lo=1, hi=200, den=100):
    """A positive rational in roughly (lo/den, hi/den]."""
    return Fraction(rng.randint(lo, hi), den)


def draw_family_params(name, rng):
    """One valid random parameter set for the named family."""
    if name == "rate-family-1":
        return dict(alpha=random_rational(rng), beta=random_rational(rng),
                    k=random_rational(rng))
    if name == "rate-family-2":
        return dict(alpha=random_rational(rng), beta=random_rational(rng))
    if name == "rate-family-3":
        beta = random_rational(rng, 1, 50)
        k = beta + random_rational(rng, 1, 50)
        return dict(alpha=random_rational(rng), beta=beta, k=k,
                    l=k + Fraction(rng.randint(0, 50), 100))
    if name == "rate-family-4":
        return dict(alpha=random_rational(rng, 1, 100), k=random_rational(rng, 1, 100))
    if name == "vol-example-6":
        a1 = random_rational(rng, 1, 40, 1000)
        gamma = a1 + random_rational(rng, 1, 40, 1000)
        return dict(N=rng.randint(2, 8), h0=random_rational(rng, 0, 10, 1000),
                    alpha1=a1, alpha2=gamma + random_rational(rng, 1, 40, 1000),
                    beta=random_rational(rng), gamma=gamma)
    if name == "vol-example-7":
        a1 = random_rational(rng, 1, 40, 1000)
        gamma = a1 + random_rational(rng, 1, 40, 1000)
        return dict(N=rng.randint(2, 12), c=random_rational(rng, 1, 100, 10000),
                    h0=random_rational(rng, 0, 10, 1000),
                    alpha1=a1, alpha2=gamma + random_rational(rng, 1, 40, 1000),
                    beta=random_rational(rng, 0, 20, 1000), gamma=gamma)
    raise ValueError(name)


ALL_FAMILIES = [
    "rate-family-1", "rate-family-2", "rate-family-3", "rate-family-4",
    "vol-example-6", "vol-example-7",
]

# one PASS/FAIL line per acceptance criterion, echoed after the test run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return random.Random(20260826)


@pytest.fixture
def family2():
    return build_family("rate-family-2", alpha="0.1", beta="0.05")


@pytest.fixture
def vol7():
    """The N=100 mean-reverting volatility model used throughout."""
    return build_family(
        "vol-example-7", N=100, c="0.0001", h0="0",
        alpha1="0.02", alpha2="0.06", beta="0", gamma="0.05",
    )


@pytest.fixture
def vol6_small():
    return build_family(
        "vol-example-6", N=4, h0="0.01",
        alpha1="0.02", alpha2="0.06", beta="1", gamma="0.05",
    )

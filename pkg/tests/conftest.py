from __future__ import annotations

import functools

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")

GOLDEN = (1 + 5 ** 0.5) / 2

# (number, description, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE_LOG: list = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, ok, detail in sorted(ACCEPTANCE_LOG, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {desc}: {detail}")


@functools.lru_cache(maxsize=None)
def problem(name: str):
    """(xi, f0, constants) of a bundled straightening fixture."""
    from tamekam import cli

    cfg = cli.load_config(name)
    c = cli.constants_from(cfg)
    xi = np.asarray(cfg["problem"]["xi"], float)
    f0 = cli.field_from_terms(cfg["problem"]["f0"], c.N, c.N)
    return xi, f0, c


@functools.lru_cache(maxsize=None)
def straightened(name: str):
    from tamekam import kam

    xi, f0, c = problem(name)
    return kam.kam_iterate(xi, f0, c)


@functools.lru_cache(maxsize=None)
def transport_problem(name: str):
    """(operator, constants, cfg) of a bundled transport fixture."""
    from tamekam import cli

    cfg = cli.load_config(name)
    return cli._operator(cfg), cli.constants_from(cfg), cfg


@functools.lru_cache(maxsize=None)
def reduced(name: str):
    from tamekam import transport as tp

    op, c, _ = transport_problem(name)
    return tp.reduce(op, c)

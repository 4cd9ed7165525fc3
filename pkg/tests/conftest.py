"""Shared fixtures: the stock knowledge base and small simulated runs."""

from __future__ import annotations

import pytest

from pdmpipe import SimConfig, default_kb, simulate


@pytest.fixture(scope="session")
def kb():
    return default_kb()


@pytest.fixture(scope="session")
def sim_small(kb):
    """Six cycles, one scheduled fault of every kind, everything logged."""
    config = SimConfig(
        seed=4242, cycles=6, logging_probability=1.0,
        schedule=((2, "needle"), (2, "door"), (3, "heating_temp"),
                  (4, "sample"), (5, "heating_pressure"), (6, "angle")))
    return simulate(config, kb)


@pytest.fixture(scope="session")
def sim_mid(kb):
    """Eight cycles with faults spread across all future split parts."""
    config = SimConfig(
        seed=515151, cycles=8, logging_probability=1.0,
        schedule=((2, "needle"), (3, "heating_temp"), (3, "door"),
                  (5, "needle"), (6, "sample"), (7, "angle"),
                  (8, "needle")))
    return simulate(config, kb)

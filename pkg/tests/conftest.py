"""Shared, session-cached simulation runs (several tests read the same data)."""

import dataclasses
import functools

import pytest

from hybrid_lattice.lattice import build_chain, preset_params
from hybrid_lattice.mps import TruncationPolicy
from hybrid_lattice.tebd import SimulationConfig, run


@functools.lru_cache(maxsize=None)
def preset_run(name, lambda_C_scale=1.0):
    """Full default-parameter TEBD run of a preset; ``lambda_C_scale`` rescales the interface bond."""
    chain, d = preset_params(name)
    if lambda_C_scale != 1.0:
        chain = dataclasses.replace(chain, lambda_C=lambda_C_scale * chain.lambda_C)
    lattice = build_chain(chain)
    config = SimulationConfig(
        d.tau, d.t_final, d.measure_stride, TruncationPolicy(d.chi_max, d.epsilon0)
    )
    return lattice, d, run(lattice, d.initial_state, config)


@functools.lru_cache(maxsize=None)
def fig2_short_run(L, t_final_v, tau_v, epsilon0):
    """fig2 parameters on a shorter chain; times given in units of 1/v."""
    chain, d = preset_params("fig2")
    chain = dataclasses.replace(chain, L=L)
    v = chain.v_left
    lattice = build_chain(chain)
    stride = max(1, round(0.5 / tau_v))
    config = SimulationConfig(
        tau_v / v, t_final_v / v, stride, TruncationPolicy(d.chi_max, epsilon0)
    )
    return lattice, run(lattice, "activation-excited", config)


@pytest.fixture(scope="session")
def presets():
    return preset_run


@pytest.fixture(scope="session")
def fig2_short():
    return fig2_short_run


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Record one pass/fail line per acceptance criterion."""

    def record(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

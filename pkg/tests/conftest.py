import time

import numpy as np
import pytest

from romwalk.pipeline import config_from_dict, run
from romwalk.planner import GaitSpec, plan_periodic_aslip
from romwalk.rom import RomParams, SpringLaw

ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str):
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def default_gait():
    """The v = 0.5 m/s gait on the default model (z in [0.9, 1.1])."""
    t0 = time.perf_counter()
    g = plan_periodic_aslip(GaitSpec(speed=0.5), RomParams(), SpringLaw())
    return g, time.perf_counter() - t0


@pytest.fixture(scope="session")
def pipeline_runs(tmp_path_factory):
    """Two full runs of the default pipeline in separate directories."""
    out = []
    for name in ("run_a", "run_b"):
        d = tmp_path_factory.mktemp(name)
        t0 = time.perf_counter()
        man = run(config_from_dict({}), d)
        out.append((d, man, time.perf_counter() - t0))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

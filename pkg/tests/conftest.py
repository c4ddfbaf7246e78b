import os
import sys
from functools import lru_cache

import pytest

from aennm.network import build_trial
from aennm.parsing import parse_network, parse_pde
from aennm.system import build_system
from aennm.textio import read_families

DATA = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")

# family file -> (pde, network) it belongs to
FAMILY_SETUP = {
    "evolution_s1": ("evolution", "2221_phi_phi2"),
    "kdv_burgers_s1": ("kdv_burgers", "2221_phi_phi"),
    "kdv_burgers_s2": ("kdv_burgers", "2221_phi_phi"),
    "kdv_burgers_s2_corrected": ("kdv_burgers", "2221_phi_phi"),
    "kdv_burgers_s3": ("kdv_burgers", "2221_phi_phi"),
    "kdv_burgers_s4": ("kdv_burgers", "2221_phi_phi"),
    "boussinesq_s1": ("boussinesq_2d", "3221_squares"),
    "boussinesq_s1_b3zero": ("boussinesq_2d", "3221_squares"),
    "boussinesq_s2": ("boussinesq_2d", "3221_squares"),
    "evolution_2221_s1": ("evolution", "2221_phi_phi"),
    "evolution_2221_s2": ("evolution", "2221_phi_phi"),
    "evolution_2221_s3": ("evolution", "2221_phi_phi"),
}


def data_path(*parts):
    return os.path.join(DATA, *parts)


@lru_cache(maxsize=None)
def load_pde(name):
    with open(data_path("pde", f"{name}.pde"), encoding="utf-8") as fh:
        return parse_pde(fh.read())


@lru_cache(maxsize=None)
def load_network(name):
    with open(data_path("networks", f"{name}.net"), encoding="utf-8") as fh:
        return parse_network(fh.read())


@lru_cache(maxsize=None)
def load_trial(name):
    return build_trial(load_network(name))


@lru_cache(maxsize=None)
def load_system(pde, net):
    return build_system(load_pde(pde), load_trial(net))


def load_family(name):
    return read_families(data_path("families", f"{name}.fam"))[0]


def setup_for(family):
    pde, net = FAMILY_SETUP[family]
    return load_pde(pde), load_trial(net), load_system(pde, net)


@pytest.fixture(scope="session")
def ex1_system():
    return load_system("evolution", "2221_phi_phi2")


# worked examples: (pde, network, reference family, reference solution)
EXAMPLES = {
    "evolution": ("evolution", "2221_phi_phi2", "evolution_s1", "evolution_sech2"),
    "kdv_burgers": ("kdv_burgers", "2221_phi_phi", "kdv_burgers_s4", "kdv_burgers_tanh_coth"),
    "boussinesq": ("boussinesq_2d", "3221_squares", "boussinesq_s2", "boussinesq_tanh_pair"),
}


@lru_cache(maxsize=None)
def derived(example):
    """Default-budget derivation for a worked example (cached across test modules)."""
    import time
    from aennm.pipeline import derive
    pde, net = EXAMPLES[example][:2]
    start = time.monotonic()
    d = derive(load_pde(pde), load_network(net))
    return d, time.monotonic() - start


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)

from pathlib import Path

import pytest

from bsvmodes.config import GridSpec, PumpBeam, Segment, Setup, load_config
from bsvmodes.pipeline import solve_modes

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# populated by test_acceptance; printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def config_setup(name: str) -> Setup:
    return load_config(CONFIGS / name)[0]


def crystal_setup(length_um=3000.0, fwhm_um=119.9711, n_points=64, n_max=12, gain=1.0) -> Setup:
    pump = PumpBeam(0.3547, fwhm_um)
    return Setup(pump, (Segment("crystal", length_um),), gain, GridSpec(n_points, n_max))


@pytest.fixture(scope="session")
def small_setup():
    return crystal_setup()


@pytest.fixture(scope="session")
def small_modes(small_setup):
    return solve_modes(small_setup, harmonic_loss_tol=1.0)


@pytest.fixture(scope="session")
def single_setup():
    return config_setup("single_crystal.toml")


@pytest.fixture(scope="session")
def single_modes(single_setup):
    return solve_modes(single_setup)


@pytest.fixture(scope="session")
def fig1_setup():
    return config_setup("fig1_two_3mm.toml")


@pytest.fixture(scope="session")
def fig1_modes(fig1_setup):
    return solve_modes(fig1_setup)


@pytest.fixture(scope="session")
def fig2_setup():
    return config_setup("fig2_two_1mm.toml")


@pytest.fixture(scope="session")
def fig2_modes(fig2_setup):
    return solve_modes(fig2_setup)


@pytest.fixture(scope="session")
def fig4_parallel_setup():
    return config_setup("fig4_parallel.toml")


@pytest.fixture(scope="session")
def fig4_parallel_modes(fig4_parallel_setup):
    return solve_modes(fig4_parallel_setup)


@pytest.fixture(scope="session")
def fig4_compensated_setup():
    return config_setup("fig4_compensated.toml")


@pytest.fixture(scope="session")
def fig4_compensated_modes(fig4_compensated_setup):
    return solve_modes(fig4_compensated_setup)

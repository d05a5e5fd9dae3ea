"""Shared fixtures: preset runs reused across test modules.

The propagation bundles are expensive (tens of seconds to minutes each), so
they are produced once per session and shared by the module tests and the
acceptance gate.  Every fixture returns plain paths/dicts; tests re-read the
artifacts they need.
"""

import numpy as np
import pytest

from ciscat import parse_config, run_scenario

BETA_BY_ROW = {"row1": 1.0, "row2": 0.5, "row3": 0.125}


def preset_config(name: str, extra: str = ""):
    return parse_config(f"[run]\nscenario = {name}\n{extra}")


def run_preset(name: str, outdir, extra: str = ""):
    return run_scenario(preset_config(name, extra), outdir)


@pytest.fixture(scope="session")
def runs_root(tmp_path_factory):
    return tmp_path_factory.mktemp("runs")


@pytest.fixture(scope="session")
def fig6_bundle(runs_root):
    """All six capped-cone runs: {(row, side): summary dict}.

    Summaries carry ``outdir`` so tests can read diagnostics, snapshots,
    and the dislocation/charge tables.
    """
    bundle = {}
    for row in ("row1", "row2", "row3"):
        for side in ("left", "right"):
            name = f"fig6_{row}_{side}"
            bundle[(row, side)] = run_preset(name, runs_root / name)
    return bundle


@pytest.fixture(scope="session")
def fig7_run(runs_root):
    """Two-crossing scattering run with the core barrier."""
    return run_preset("fig7_scatter", runs_root / "fig7_scatter")


@pytest.fixture(scope="session")
def leakage_run(runs_root):
    """Full-size default propagation (the nonadiabatic-leakage benchmark)."""
    return run_preset(
        "custom", runs_root / "leakage",
        extra="action = propagate\n")


@pytest.fixture(scope="session")
def disk_flux_field():
    """Sampled scattered wave for a hard disk plus half-quantum flux line.

    A dense analytic field (k = 1, a = 1) on a modest grid; the phase
    dislocation along the upstream ray is the calibration target for the
    detector tests.
    """
    from ciscat import Grid2D, RadialPotential, SpinorField, psi_total, solve

    grid = Grid2D(256, 256, (-10.0, 10.0), (-10.0, 10.0))
    xx, yy = grid.meshgrid()
    rho = np.hypot(xx, yy)
    phi = np.arctan2(yy, xx)
    solution = solve(RadialPotential.hard_disk(1.0), 1.0, alpha=0.5,
                     m_max=48)
    psi = np.zeros_like(rho, dtype=np.complex128)
    outside = rho > 1.0
    psi[outside] = psi_total(rho[outside], phi[outside], solution)
    field = SpinorField(grid=grid, g1=psi,
                        g2=np.zeros_like(psi), tau=0.0)
    return field


@pytest.fixture(scope="session")
def disk_flux_dislocations(disk_flux_field):
    from ciscat import dislocation_lines

    return dislocation_lines(disk_flux_field.g1, disk_flux_field.grid)


# ---------------------------------------------------------------------------
# Acceptance-gate reporting: one summary line per criterion.
# ---------------------------------------------------------------------------

_ACCEPTANCE_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    if item.get_closest_marker("acceptance") is not None:
        _ACCEPTANCE_RESULTS[item.name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        outcome = _ACCEPTANCE_RESULTS[name]
        flag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{flag}  {name}")

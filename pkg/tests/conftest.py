import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kgnr.spectral import Field, make_grid

settings.register_profile(
    "kgnr", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("kgnr")


@pytest.fixture
def grid2pi():
    return make_grid(32, 2 * math.pi)


@pytest.fixture
def gauss_grid():
    return make_grid(64, 16 * math.pi)


def gaussian(grid, amp=1.0, width=1.0):
    return Field.from_function(grid, lambda x, y: amp * np.exp(-(x**2 + y**2) / width**2))


def band_limited(grid, rng, kmax, kind="real"):
    """Random field whose modes satisfy max(|k1|, |k2|) <= kmax."""
    idx = np.abs(grid.index)
    mask = (idx[:, None] <= kmax) & (idx[None, :] <= kmax)
    c = (rng.standard_normal((grid.n, grid.n)) + 1j * rng.standard_normal((grid.n, grid.n))) * mask
    f = Field.from_spectrum(grid, c, kind="complex")
    return f.real if kind == "real" else f


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Print and record one ``A<n> PASS|FAIL|REPORT: detail`` line."""

    def emit(label: str, ok: bool | None, detail: str) -> None:
        status = "REPORT" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{label} {status}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

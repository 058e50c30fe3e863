import time
import warnings

import numpy as np
import pytest

from plkit.maps import Disk, build_proper_map

warnings.filterwarnings("ignore", message=".*TBB.*")


@pytest.fixture(scope="session")
def pm_z2():
    return build_proper_map("z^2", Disk(4.0))


@pytest.fixture(scope="session")
def pm_basilica():
    return build_proper_map("z^2-1", Disk(4.0))


@pytest.fixture(scope="session")
def pm_cheb():
    return build_proper_map("z^2-2", Disk(6.0))


@pytest.fixture(scope="session")
def pm_attract():
    return build_proper_map("z^2+0.5z", Disk(4.0))


@pytest.fixture(scope="session")
def pm_half():
    return build_proper_map("z^2-0.5", Disk(4.0))


@pytest.fixture(scope="session")
def pm_cantor():
    return build_proper_map("z^2-3", Disk(6.0))


@pytest.fixture(scope="session")
def k_z2(pm_z2):
    from plkit.invariants import nonescaping_set
    return nonescaping_set(pm_z2, resolution=1024)


@pytest.fixture(scope="session")
def k_basilica(pm_basilica):
    from plkit.invariants import nonescaping_set
    return nonescaping_set(pm_basilica, resolution=1024)


def unit_circle(n=256):
    return np.exp(2j * np.pi * np.arange(n) / n)


# acceptance criteria: one line per criterion in the terminal summary
_ACCEPTANCE_LINES = []


class _Criterion:
    def __init__(self, number, title, limit_s):
        self.number, self.title, self.limit_s = number, title, limit_s

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, typ, exc, tb):
        dt = time.perf_counter() - self.t0
        ok = typ is None and dt < self.limit_s
        why = "" if ok else (f"  ({typ.__name__}: {exc})" if typ else f"  (over {self.limit_s:g} s)")
        line = f"[{'PASS' if ok else 'FAIL'}] {self.number:>2}. {self.title}: {dt:.2f} s / {self.limit_s:g} s{why}"
        _ACCEPTANCE_LINES.append((self.number, line))
        print(line)
        if typ is None and not ok:
            raise AssertionError(f"criterion {self.number} exceeded {self.limit_s} s ({dt:.2f} s)")
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

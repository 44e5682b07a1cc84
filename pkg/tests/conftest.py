import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wavekin.collision_general import build_kernel
from wavekin.dispersion import make_dispersion
from wavekin.grid import make_grid


@pytest.fixture(scope="session")
def schr():
    return make_dispersion("schrodinger")


@pytest.fixture(scope="session")
def bog():
    return make_dispersion("bogoliubov", (1.0, 1.0))


@pytest.fixture(scope="session")
def grid64():
    return make_grid("gauss-composite", 64, 8.0)


@pytest.fixture(scope="session")
def grid128():
    return make_grid("gauss-composite", 128, 8.0)


@pytest.fixture(scope="session")
def kernel_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("kernels")


@pytest.fixture(scope="session")
def kernels(kernel_cache):
    """Kernel factory shared by the whole session; builds are cached on disk and in memory."""
    memo = {}

    def get(grid, disp, quad=None):
        from wavekin.quadrature import QuadOrders
        quad = quad or QuadOrders()
        key = (grid.key(), disp.key(), quad)
        if key not in memo:
            memo[key] = build_kernel(grid, disp, quad, cache_dir=kernel_cache)
        return memo[key]
    return get


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[k])

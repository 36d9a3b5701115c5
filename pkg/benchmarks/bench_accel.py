"""Compare the numba and pure-numpy paths of the hot kernels.

Usage: python3 benchmarks/bench_accel.py [--repeats N] [--grid N]
"""

import argparse
import os
import time

import numpy as np

from rkhs_fusion import _accel
from rkhs_fusion.agent import AgentSpace, agent_operator_norm_profile
from rkhs_fusion.domain import Domain
from rkhs_fusion.rkhs import AnchorSet, FeatureKernel, constant, monomial


def cases(grid_points, rng):
    k = FeatureKernel([constant(), monomial(1), monomial(2)])
    agent = AgentSpace(1, k, AnchorSet([0.0, 2.0, 4.0, -2.0, -4.0], "H1"),
                       Domain(((-5.0, 5.0),)))
    grid = np.linspace(-5, 5, grid_points)
    m = rng.standard_normal((8, 8))
    a = m @ m.T + np.eye(8)
    b = rng.standard_normal(8)
    q = np.linalg.qr(rng.standard_normal((10, 10)))[0]
    p = q @ np.diag(np.linspace(1.0, 0.1, 10)) @ q.T
    v0 = rng.standard_normal(10)
    step = 0.5 / np.linalg.eigvalsh(a)[-1]
    return {
        "agent_norm_sweep": lambda: agent_operator_norm_profile(agent, 10.0, grid),
        "projected_gradient_descent": lambda: _accel.projected_gradient_descent(
            a, b, np.eye(8), np.zeros(8), step, 10_000),
        "power_iteration": lambda: _accel.power_iteration(p, v0, 10_000, 1e-12),
    }


def best_time(func, repeats):
    func()  # warm-up, includes compilation on the numba path
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        func()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--grid", type=int, default=2048, help="grid points for the sweep")
    args = parser.parse_args(argv)
    if _accel.numba is None:
        print("numba is not installed; only the numpy path is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, func in cases(args.grid, rng).items():
        os.environ[_accel.ENV_FLAG] = "1"
        slow = best_time(func, args.repeats)
        fast = float("nan")
        if _accel.numba is not None:
            os.environ[_accel.ENV_FLAG] = "0"
            fast = best_time(func, args.repeats)
        print(f"{name:<28}{1e3 * slow:>12.3f}{1e3 * fast:>12.3f}{slow / fast:>10.2f}")
    os.environ.pop(_accel.ENV_FLAG, None)


if __name__ == "__main__":
    main()

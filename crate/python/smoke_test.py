"""Smoke test for the cogwpt Python module.

Build the module first with ``python/build_module.sh``, then run
``python3 python/smoke_test.py``.
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import cogwpt  # noqa: E402


def main():
    lam, p = cogwpt.waterfill([0.0, 1e-9, 4e-9], [1e-3, 2e-3, 5e-4], 1e-9, 1.0)
    assert math.isclose(sum(p), 1.0, rel_tol=1e-9), p

    s = cogwpt.Scenario.generate(n_subcarriers=8, n_antennas=3, seed=1)
    assert (s.n_subcarriers, s.n_antennas) == (8, 3)
    assert len(s.g) == 8 and len(s.g[0]) == 3

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "s.json")
        s.save(path)
        again = cogwpt.Scenario.load(path)
        assert again.to_json() == s.to_json()

    lo, hi = cogwpt.water_level_range(s)
    assert lo < hi and cogwpt.level_feasible(s, lo)

    totals = {}
    for scheme in ("proposed", "zf", "mrt", "conventional"):
        sol = cogwpt.solve(s, scheme, lambda_grid=10)
        assert sol.feasible, scheme
        total, direct, reactive = cogwpt.received_power(s, sol.omegas)
        assert math.isclose(total, sol.total, rel_tol=1e-12)
        totals[scheme] = sol.total
    assert totals["proposed"] >= max(totals.values()) - 1e-9, totals

    small = cogwpt.Scenario.generate(n_subcarriers=1, n_antennas=2, seed=4)
    best, _ = cogwpt.brute_force(small, 60)
    assert cogwpt.solve(small).total >= best * 0.98

    rows = cogwpt.sweep("gamma", values=[1e-6, 2e-6], seeds=[0], schemes=["zf"],
                        overrides=["n_subcarriers=4"])
    assert [r["axis_value"] for r in rows] == [1e-6, 2e-6]
    assert rows[0]["total_W"] == rows[1]["total_W"]

    try:
        cogwpt.solve(s, "nonsense")
    except cogwpt.CogwptError:
        pass
    else:
        raise AssertionError("unknown scheme accepted")

    print("smoke test passed:", {k: f"{v:.4e}" for k, v in totals.items()})


if __name__ == "__main__":
    main()

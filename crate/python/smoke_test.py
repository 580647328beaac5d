"""Smoke test for the Python bindings.

Build and install first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/weylstrat-*.whl
    python python/smoke_test.py
"""

import math
import tempfile

import weylstrat as ws


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok   {msg}")


sphere = ws.Metric.catalog("sphere2")
check(sphere.dim == 2, "sphere2 is two-dimensional")
check(abs(sphere.scalar_curvature([1.0, 2.0]) - 2.0) < 1e-12, "unit sphere has scal = 2")

big = ws.Metric.catalog("sphere2", {"scale": 2.0})
check(abs(big.scalar_curvature([1.0, 2.0]) - 0.5) < 1e-12, "radius 2 sphere has scal = 1/2")

plane = ws.Metric(["x", "y"], ["1/y^2", "0", "1/y^2"], [(-1, 1), (0.5, 2)], label="half-plane")
g = plane.metric_at([0.0, 2.0])
check(g == [[0.25, 0.0], [0.0, 0.25]], "metric_at evaluates components")
values = plane.invariants([0.3, 1.2])
check(abs(values["scal"] + 2.0) < 1e-10, "half-plane has scal = -2")

h = plane.homogeneity(density=12)
check(h.verdict == "locally homogeneous", f"half-plane verdict: {h.verdict}")

rev = ws.Metric.catalog("revolution", {"profile": "2+sin(3*t)"})
check(rev.homogeneity(density=12).verdict == "not locally homogeneous", "revolution surface is not homogeneous")

specs = ws.enumerate_invariants(3, 3, 2)
check(len(specs) == 17, f"{len(specs)} invariants for n = 3")
check(all(isinstance(s.scaling_exponent, int) for s in specs), "scaling exponents exposed")
check(ws.singer_bound(4) == 6, "singer bound for n = 4")
check(any(name == "sphere2" for name, _ in ws.list_geometries()), "catalog lists sphere2")

with tempfile.TemporaryDirectory() as out:
    code, report = ws.run_scenario('[geometry]\ncatalog = "sphere2"\n', out, ["grid.density=10"])
    check(code == 0, "scenario exits 0")
    check(report["verdict"] == "locally homogeneous", "scenario report verdict")

    try:
        ws.run_scenario('[geometry]\ncatalog = "sphere2"\n', out, ["grid.density=2"])
        check(False, "undersized grid rejected")
    except ValueError as e:
        check("grid.density" in str(e), "undersized grid rejected")

rows = ws.verify()
check(all(passed for _, passed, _ in rows), f"{len(rows)} verify properties pass")
check(math.isfinite(h.max_spread), "max spread is finite")
print("all smoke checks passed")

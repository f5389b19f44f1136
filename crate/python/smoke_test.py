"""Smoke test for the pygofit extension module.

Build and install first, e.g.
    pip install maturin && maturin develop -m crates/python/Cargo.toml
then run
    python python/smoke_test.py
"""

import math
import random

import pygofit


def close(a, b, tol=1e-10):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    rng = random.Random(7)
    z = [rng.random() for _ in range(200)]

    stats = pygofit.edf(z)
    assert stats["d"] == max(stats["d_plus"], stats["d_minus"])
    assert close(stats["v"], stats["d_plus"] + stats["d_minus"])
    try:
        from scipy import stats as sps
    except ImportError:
        sps = None
    if sps is not None:
        assert close(stats["d"], sps.kstest(z, "uniform").statistic)
        assert close(stats["w2"], sps.cramervonmises(z, "uniform").statistic)

    # single point at the median: pi_1 = 0, pi_2 = -sqrt(5)/2
    assert close(pygofit.neyman([0.5], 2), 1.25)
    value, cuts, counts = pygofit.region([0.5])
    assert value == 1.5 and sum(counts) == 1 and len(cuts) == 2

    test = pygofit.Test("ks", "uniform01", len(z), seed=3)
    null = test.calibrate(999, seed=11)
    assert len(null) == 999 and null.values == sorted(null.values)
    out = test.run(z, null, alpha=0.05)
    assert out["value"] == stats["d"]
    assert 1 / 1000 <= out["p_value"] <= 1.0
    again = pygofit.NullDistribution.from_text(null.to_text())
    assert again.values == null.values

    points = [[rng.gauss(0, 1), rng.gauss(0, 1)] for _ in range(100)]
    b1, b2 = pygofit.mardia(points)
    assert b1 >= 0 and math.isfinite(b2)
    energy = pygofit.Test("energy:kernel=log", "gauss2d", len(points), seed=1)
    enull = energy.calibrate(99, seed=2)
    res = energy.run(points, enull)
    print("energy", res)

    row = pygofit.power("ks", "uniform01", "A", 0.3, 100, trials=400, replicas=199, seed=5)
    assert 0.0 <= row["power"] <= 1.0
    print("power", row)

    try:
        pygofit.Test("nope", "uniform01", 10)
    except ValueError as e:
        assert "available" in str(e)
    else:
        raise AssertionError("unknown statistic accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()

"""Smoke test for the Python bindings: simulate, fit, read intensities,
score, save and reload."""

import math
import os
import sys
import tempfile

import app_python as app


def main() -> int:
    streams, truth = app.simulate("mixture", seed=3, duration=20.0, bins=40, dims=2, components=5, count=2000)
    assert len(streams) == 2 and all(len(s) == 2000 for s in streams)
    assert sorted(truth) == ["1", "1,2", "2"]

    m1 = app.fit(streams, 20.0, order=1, bins=40, bandwidth=0.5)
    m2 = app.fit(streams, 20.0, order=2, bins=40, bandwidth=0.5)
    assert m2.converged, m2
    total = sum(m2.probabilities())
    assert abs(total - 1.0) < 1e-12, total

    for model in (m1, m2):
        lam = model.intensity([1, 2])
        integral = sum(lam) * 20.0 / 40
        n = model.count([1, 2])
        assert abs(integral - n) < 1e-9 * max(n, 1), (integral, n)
        kl = app.kl_to_truth(model.intensity([1]), truth["1"])
        assert math.isfinite(kl) and kl >= 0.0

    # constant intensity closed form: cT - N log c
    nll = app.negative_test_loglik([2.5] * 4, [0.5, 3.25, 7.9], 8.0)
    assert abs(nll - (2.5 * 8 - 3 * math.log(2.5))) < 1e-12

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.json")
        m2.save(path, "json")
        back = app.Model.load(path)
        diff = max(abs(a - b) for a, b in zip(back.probabilities(), m2.probabilities()))
        assert diff < 1e-12, diff

    h, bins, table = app.grid_search(streams, 20.0, [0.25, 0.5, 1.0], [20, 40], order=1)
    assert len(table) == 6 and (h, bins) in [(r[0], r[1]) for r in table]

    try:
        app.fit(streams, 20.0, order=3, bins=10)
    except ValueError:
        pass
    else:
        raise AssertionError("order above the process count should fail")

    print(f"smoke ok: {m2!r}, final KL {m2.final_kl:.3e}, best h={h} M={bins}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Smoke test for the zigzag_trng extension module.

Build first:  pip install --no-build-isolation -e crates/py
Then run:     python python/smoke_test.py
"""

import json
import math
import os
import tempfile

import zigzag_trng as zt


def main():
    z = zt.Map.zigzag()
    assert z.kind == "zigzag" and z.domain == (-1.0, 1.0)
    assert math.isclose(z(0.25), -0.5) and math.isclose(z(0.75), -0.5)
    assert all(abs(x) <= 1.01 for x in z.orbit(0.1, 10_000, noise_std=1e-3, seed=1))

    try:
        zt.Map.tent().orbit(0.3, 1_000_000, noise_std=1e-3, seed=3)
    except zt.OrbitEscapeError:
        pass
    else:
        raise AssertionError("perturbed tent orbit should escape")

    try:
        zt.Map.generalized_zigzag(3.5)
    except ValueError:
        pass
    else:
        raise AssertionError("m outside (-3, 3) should be rejected")

    # Same seed, same bits.
    maps = zt.varied_maps(0.02, 4, 2)
    a = zt.generate(maps, 1_000_000, seed=2, discard=20)
    b = zt.generate(maps, 1_000_000, seed=2, discard=20)
    assert a.to_bits() == b.to_bits() and len(a) == 1_000_000
    assert json.loads(a.meta_json())["seed"] == 2

    raw = zt.run_battery(a)
    assert "frequency" in raw.failures(), raw.to_table()

    post, (l, l2) = zt.postprocess_auto(a, stages=4)
    assert l % 2 == 1 and l2 is not None and l2 != l
    report = zt.run_battery(post)
    print(report.to_table())
    p_values, status = report.result("frequency")
    assert status == "pass", p_values

    m = zt.MarkovModel.analytic(0.02, 0.0)
    assert math.isclose(m.p, 0.53) and math.isclose(m.q, 0.5)
    exact, closed = m.bias()
    assert exact > 0 and closed > 0
    assert abs(zt.MarkovModel.numeric(0.02, 0.0).p - m.p) < 0.02
    assert zt.choose_l(m, 1e-6, 4) >= 2

    assert zt.warmup_discard(16.0, 1e12) == 10
    assert len(zt.autocorrelation(post, 20)) == 20
    vn = zt.von_neumann(zt.BitStream([0, 1, 1, 0, 1, 1]))
    assert vn.to_bits() == bytes([0, 1])

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "s.bin")
        post.write(path)
        assert zt.BitStream.read(path).to_bits() == post.to_bits()

    print("smoke test passed")


if __name__ == "__main__":
    main()

"""Smoke test for the pyncw extension module.

Build it first:
    cargo build -p pyncw --release --features extension-module
    cp target/release/libpyncw.so python/pyncw.so
"""

import json
import math
from fractions import Fraction

import pyncw


def main():
    ok, reason, citation = pyncw.exists_m(1.0, 2, 3)
    assert not ok and "rank w <= n" in citation, (ok, reason, citation)
    assert pyncw.exists_m(4.5, 5, 5)[0]
    assert pyncw.exists_ncw(2.0, [[1, 0, 0], [0, 1, 0], [0, 0, 0]])[0]

    v = pyncw.laplace_m(1.0, 2, [[2, 0], [0, 2]])
    assert abs(v - math.e / 2) < 1e-14, v

    s, w, sig, p = 0.7, 0.4, 1.5, 1.5
    want = (1 + 2 * sig * s) ** -p * math.exp(-2 * s * w / (1 + 2 * sig * s))
    got = pyncw.laplace_ncw(3.0, [[w]], [[s]], [[sig]])
    assert abs(got / want - 1) < 1e-14, (got, want)

    eigs = [0.3, 1.1, 2.0]
    total = sum(pyncw.zonal_c(eigs, k) for k in ([2], [1, 1]))
    assert abs(total - sum(eigs) ** 2) < 1e-12
    assert Fraction(pyncw.zonal_c_identity([1, 1], 2)) == Fraction(4, 3)

    draws = pyncw.sample("singular-r", 2, 200, seed=3)
    for m, wt in draws:
        assert abs(m[0][0] * m[1][1] - m[0][1] ** 2) < 1e-10 * max(m[0][0] * m[1][1], 1.0)
        assert wt > 0
    assert draws == pyncw.sample("singular-r", 2, 200, seed=3)
    try:
        pyncw.sample("m", 3, 10, two_p=1.0, k=2)
    except ValueError as e:
        assert "does not exist" in str(e)
    else:
        raise AssertionError("nonexistent measure sampled")

    rep = json.loads(pyncw.verify("d2", seed=7))
    assert rep["schema"] == 1 and rep["pass"], [r for r in rep["results"] if not r["pass"]]
    print("pyncw smoke test: ok")


if __name__ == "__main__":
    main()

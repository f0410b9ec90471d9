"""Smoke test of the `nett` extension module.

Build and install first:  maturin develop -m crates/python/Cargo.toml --release
Then run:                 python python/smoke_test.py
"""

import math
import tempfile
from pathlib import Path

import nett


def main():
    n = 16
    op = nett.Operator.pat(n, sensors=24, times=32)
    rows, cols = op.shape
    assert cols == n * n and rows == 24 * 32
    assert 0 < op.rank <= cols
    assert all(a >= b for a, b in zip(op.sigma, op.sigma[1:]))

    x = nett.ring_phantom(n, 3)
    assert len(x) == n * n and 0.0 <= min(x) and max(x) <= 1.0
    y = nett.simulate_data(op, x, 0.0, 3)
    again = op.apply(op.pinv(y))
    assert max(abs(a - b) for a, b in zip(again, y)) < 1e-8

    reg = nett.Regularizer(n)
    assert reg.phi(x) == x
    image, objective = nett.reconstruct(op, y, reg, alpha=0.015, n_iter=5)
    assert len(image) == n * n and len(objective) == 6
    assert all(math.isfinite(v) for v in objective)
    assert nett.postprocess(op, y, reg) == op.pinv(y)

    slope = nett.rate_slope([1e-1, 1e-2, 1e-3, 1e-4], trials=5)
    assert 0.4 <= slope <= 0.6, slope

    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "run.cfg"
        cfg.write_text("[grid]\nn = 16\nsensors = 24\ntimes = 32\n")
        nett.run_command("build-operator", str(cfg), tmp)
        assert (Path(tmp) / "operator.bin").is_file()
        try:
            nett.run_command("noise-sweep", str(cfg), tmp)
        except FileNotFoundError as err:
            assert "gen-phantoms" in str(err) or "train" in str(err)
        else:
            raise AssertionError("noise-sweep without artifacts must fail")
        try:
            cfg.write_text("[grid]\nn = abc\n")
            nett.run_command("build-operator", str(cfg), tmp)
        except ValueError as err:
            assert "line 2" in str(err)
        else:
            raise AssertionError("bad config must fail")

    print("python smoke test passed")


if __name__ == "__main__":
    main()

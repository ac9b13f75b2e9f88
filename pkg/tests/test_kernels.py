"""Cross-backend agreement: the compiled kernels must match the pure-Python
reference on random inputs, and the selector must honor the override flag."""
import math
import subprocess
import sys

import numpy as np
import pytest

from trajaudit._kernels import BACKEND, backends

HAS_NATIVE = "native" in backends()

pytestmark = pytest.mark.skipif(
    not HAS_NATIVE, reason="compiled kernel extension not built"
)


def random_track(rng, n):
    x = rng.normal(scale=0.5, size=n).cumsum() + rng.uniform(-50, 50)
    y = rng.normal(scale=0.5, size=n).cumsum() + rng.uniform(-50, 50)
    yaw = rng.uniform(-math.pi, math.pi, size=n)
    gaps = np.ones(n, dtype=np.int64)
    gaps[1:] = rng.integers(1, 4, size=n - 1)
    return x, y, yaw, gaps


class TestCrossBackend:
    def test_moving_average(self):
        rng = np.random.default_rng(0)
        b = backends()
        for n in (1, 2, 5, 9, 50, 500):
            v = rng.normal(scale=10.0, size=n)
            outs = [mod.moving_average(v, 9) for mod in b.values()]
            np.testing.assert_allclose(outs[0], outs[1], rtol=1e-12, atol=1e-12)

    def test_circular_moving_mean(self):
        rng = np.random.default_rng(1)
        b = backends()
        for n in (1, 4, 33, 200):
            a = rng.uniform(-math.pi, math.pi, size=n)
            (m1, d1), (m2, d2) = (mod.circular_moving_mean(a, 9) for mod in b.values())
            np.testing.assert_array_equal(d1, d2)
            ok = ~d1
            np.testing.assert_allclose(m1[ok], m2[ok], rtol=0, atol=1e-12)

    def test_smooth_positions(self):
        rng = np.random.default_rng(2)
        b = backends()
        for _ in range(5):
            x, y, _, gaps = random_track(rng, int(rng.integers(3, 200)))
            outs = [
                mod.smooth_positions(x, y, gaps, 9, 0.3, 0.1) for mod in b.values()
            ]
            for k in range(4):
                np.testing.assert_allclose(outs[0][k], outs[1][k], atol=1e-10)

    def test_motion_heading(self):
        rng = np.random.default_rng(3)
        b = backends()
        for _ in range(5):
            x, y, _, gaps = random_track(rng, int(rng.integers(2, 200)))
            outs = [
                mod.motion_heading(x, y, gaps, 0.1, 0.75, 0.35, 0.08)
                for mod in b.values()
            ]
            for k in range(4):
                np.testing.assert_allclose(outs[0][k], outs[1][k], atol=1e-12)

    def test_stabilize_headings(self):
        rng = np.random.default_rng(4)
        b = backends()
        for _ in range(5):
            n = int(rng.integers(1, 200))
            x, y, yaw, gaps = random_track(rng, n)
            motion = rng.uniform(-math.pi, math.pi, size=n)
            alpha = rng.uniform(0.05, 0.4, size=n)
            outs = [
                mod.stabilize_headings(
                    yaw, motion, alpha, gaps, 9, math.radians(20), math.radians(2.5)
                )
                for mod in b.values()
            ]
            for k in range(3):
                np.testing.assert_allclose(outs[0][k], outs[1][k], atol=1e-10)

    def test_pair_metric_arrays(self):
        rng = np.random.default_rng(5)
        b = backends()
        n = 300
        args = [rng.normal(scale=5.0, size=n) for _ in range(4)]
        args.append(np.abs(rng.normal(scale=2.0, size=n)) + 0.3)
        args += [rng.normal(scale=5.0, size=n) for _ in range(4)]
        args.append(np.abs(rng.normal(scale=2.0, size=n)) + 0.3)
        for heavy_first in (True, False):
            outs = [mod.pair_metric_arrays(*args, heavy_first) for mod in b.values()]
            assert outs[0][3] == outs[1][3]
            for k in range(3):
                a, c = outs[0][k], outs[1][k]
                np.testing.assert_array_equal(np.isinf(a), np.isinf(c))
                finite = np.isfinite(a)
                np.testing.assert_allclose(a[finite], c[finite], atol=1e-10)

    def test_backpropagate_heading(self):
        b = backends()
        psi = np.array([0.1, 0.2, 0.3, 0.4])
        r = np.array([0.0, 0.0, 0.5, 0.6])
        outs = [mod.backpropagate_heading(psi, r) for mod in b.values()]
        np.testing.assert_array_equal(outs[0], outs[1])


class TestSelector:
    def test_default_prefers_native(self):
        import os

        if os.environ.get("TRAJAUDIT_PURE_PYTHON"):
            assert BACKEND == "python"
        else:
            assert BACKEND == "native"

    def test_env_forces_pure_python(self):
        code = (
            "import trajaudit; print(trajaudit.KERNEL_BACKEND)"
        )
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            env={"PATH": "/usr/bin:/bin", "TRAJAUDIT_PURE_PYTHON": "1"},
        )
        assert out.stdout.strip() == "python"

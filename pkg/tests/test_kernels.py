import math

import numpy as np
import pytest


def test_sum_squares_matches_exact_sum(kernels, rng):
    x = rng.standard_normal(100_003) * 0.3
    exact = math.fsum(v * v for v in x.tolist())
    assert kernels.sum_squares(x) == pytest.approx(exact, rel=1e-15)


def test_sum_squares_ill_conditioned(kernels):
    # one huge sample followed by many tiny ones; naive summation loses the tail
    x = np.concatenate([[1e8], np.full(1_000_000, 1e-4)])
    exact = 1e16 + 1_000_000 * 1e-8
    assert kernels.sum_squares(x) == pytest.approx(exact, rel=1e-15)


def test_sum_squares_empty(kernels):
    assert kernels.sum_squares(np.empty(0)) == 0.0


@pytest.mark.parametrize("n, frame, hop", [(1000, 400, 160), (400, 400, 160), (399, 400, 160), (17, 5, 5), (50, 7, 3)])
def test_frame_mean_squares_against_loop(kernels, rng, n, frame, hop):
    x = rng.uniform(-1, 1, n)
    expected = []
    start = 0
    while start + frame <= n:
        expected.append(math.fsum(v * v for v in x[start:start + frame]) / frame)
        start += hop
    got = kernels.frame_mean_squares(x, frame, hop)
    assert got.shape == (len(expected),)
    np.testing.assert_allclose(got, expected, rtol=1e-13)


def test_backends_agree(rng):
    _ckernels = pytest.importorskip("crossnoise._ckernels")
    from crossnoise import _pykernels

    x = rng.standard_normal(48_000)
    assert _ckernels.sum_squares(x) == pytest.approx(_pykernels.sum_squares(x), rel=1e-15)
    np.testing.assert_allclose(
        _ckernels.frame_mean_squares(x, 400, 160), _pykernels.frame_mean_squares(x, 400, 160), rtol=1e-13
    )


def test_backend_env_override(monkeypatch):
    import importlib

    import crossnoise._backend as backend

    monkeypatch.setenv("CROSSNOISE_PURE_PYTHON", "1")
    try:
        importlib.reload(backend)
        assert backend.BACKEND == "python"
    finally:
        monkeypatch.delenv("CROSSNOISE_PURE_PYTHON")
        importlib.reload(backend)

import os
import subprocess
import sys

import numpy as np
import pytest

from grdr import _backend, covmodel, estimator, factor, payoffs, schedule
from grdr.rng import RngStream

needs_ext = pytest.mark.skipif(not _backend.HAVE_EXTENSION, reason="compiled kernel not built")


def _setup(kind):
    spec = covmodel.make_eigen_decay(24, -2.0, 1.0, covmodel.RANDOM_ROTATION, 1)
    fac = factor.pca_factor(spec)
    g = {
        "constant": payoffs.constant(24, 1.5),
        "linear": payoffs.linear(np.linspace(-1, 1, 24)),
        "basket": payoffs.basket_call(np.full(24, 0.3), 0.02, 1.0, 0.97),
    }[kind]
    return fac, g, schedule.from_factor(fac)


@needs_ext
@pytest.mark.parametrize("kind", ["constant", "linear", "basket"])
def test_backends_agree(kind):
    fac, g, sched = _setup(kind)
    a = estimator.replicate_grdr(g, fac, sched, 200, 5, backend="cython")
    b = estimator.replicate_grdr(g, fac, sched, 200, 5, backend="python")
    np.testing.assert_allclose(a.values, b.values, rtol=1e-12, atol=1e-13)
    assert a.total_ops == b.total_ops


@needs_ext
def test_single_chain_paths_agree():
    fac, g, sched = _setup("basket")
    x = estimator.grdr_chain(g, fac, sched, RngStream(3, 3), backend="cython")
    y = estimator.grdr_chain(g, fac, sched, RngStream(3, 3), backend="python")
    assert x[0] == pytest.approx(y[0], rel=1e-13)
    assert x[1:] == y[1:]


@needs_ext
def test_compiled_verify_mode():
    fac, g, _ = _setup("linear")
    sched = schedule.QSchedule(schedule.harmonic(24).q, n_override=500)
    estimator.replicate_grdr(g, fac, sched, 5, 0, backend="cython", verify=True)


def test_fallback_forced_by_env():
    code = "from grdr import _backend; print(_backend.default_backend())"
    env = dict(os.environ, GRDR_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get_run_chains("fortran")


def test_python_backend_always_available():
    assert "python" in _backend.available()

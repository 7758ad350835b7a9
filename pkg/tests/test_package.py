"""Package-level surface checks."""

import numpy as np

import perdyn
from perdyn import PerConfig, StateVector, benchmark_chain, integrate


def test_all_exports_resolve():
    for name in perdyn.__all__:
        assert getattr(perdyn, name, None) is not None, name


def test_trajectory_state_accessors():
    model = benchmark_chain(0.1).with_initial_state(
        np.linspace(0.01, 0.05, 12), np.zeros(12))
    traj = integrate(model, PerConfig(dt=0.02), 0.1)
    first = traj.state(0)
    assert isinstance(first, StateVector)
    np.testing.assert_array_equal(first.displacement, model.u0)
    states = list(traj.states())
    assert len(states) == traj.n_steps + 1
    np.testing.assert_array_equal(states[-1].velocity, traj.velocities[-1])


def test_scheme_matrices_read_only():
    import pytest
    from perdyn import build_scheme
    model = benchmark_chain(0.1)
    scheme = build_scheme(model, PerConfig(dt=0.02))
    with pytest.raises(ValueError):
        scheme.a[0, 0] = 1.0

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcatn.analysis import powerlaw_fit
from qcatn.gates import GateParams, build_G
from qcatn.meanfield import (
    EMPTY_STATE,
    FULL_STATE,
    mf_contour,
    mf_critical_gamma_linear,
    mf_linear_gain,
    mf_phase_boundary,
    mf_stationary_density,
    mf_step_five_site,
    mf_step_plaquette,
    mf_trajectory,
    validate_state,
)


def random_state(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def embed(gate, sites, n):
    """Oracle: dense operator of a 3-qubit gate on ``sites`` of ``n`` qubits."""
    g = gate.reshape((2,) * 6)
    rest = [k for k in range(n) if k not in sites]
    order = list(sites) + rest
    eye = np.eye(1 << len(rest)).reshape((2,) * (2 * len(rest)))
    full = np.multiply.outer(g, eye)  # axes: out(sites) in(sites) out(rest) in(rest)
    k = len(rest)
    outs = [0, 1, 2] + [6 + i for i in range(k)]
    ins = [3, 4, 5] + [6 + k + i for i in range(k)]
    full = np.transpose(full, outs + ins)
    inv = np.argsort(order)
    full = np.transpose(full, list(inv) + [n + i for i in inv])
    return full.reshape(1 << n, 1 << n)


def keep_last(rho, n):
    """Partial trace onto the last qubit."""
    return np.trace(rho.reshape(1 << (n - 1), 2, 1 << (n - 1), 2), axis1=0, axis2=2)


def five_site_oracle(phi, p):
    e = EMPTY_STATE
    rho = np.kron(np.kron(np.kron(np.kron(phi, phi), e), phi), e)
    g = build_G(p)
    w = embed(g, (1, 3, 4), 5) @ embed(g, (0, 1, 2), 5)
    return keep_last(w @ rho @ w.conj().T, 5)


def plaquette_oracle(phi, p):
    rho = np.kron(np.kron(phi, phi), EMPTY_STATE)
    g = build_G(p)
    return keep_last(g @ rho @ g.conj().T, 3)


def fixed_point_zero_omega(gamma):
    """Active fixed point of n -> p (2n - n^2), p = sin^2 gamma."""
    p = math.sin(gamma) ** 2
    return max(0.0, 2.0 - 1.0 / p)


@pytest.mark.parametrize("step", [mf_step_plaquette, mf_step_five_site])
def test_absorbing_fixed_point(step):
    out = step(EMPTY_STATE, GateParams(1.3, 0.4))
    assert np.max(np.abs(out - EMPTY_STATE)) < 1e-15


def test_plaquette_zero_gamma_empties():
    for seed in range(5):
        out = mf_step_plaquette(random_state(seed), GateParams(0.0, 0.8))
        assert np.max(np.abs(out - EMPTY_STATE)) < 1e-14


def test_plaquette_matches_dense_oracle():
    phi, p = random_state(3), GateParams(1.1, 0.6)
    assert np.max(np.abs(mf_step_plaquette(phi, p) - plaquette_oracle(phi, p))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 2), st.floats(0, 1.6))
def test_plaquette_density_independent_of_omega(seed, gamma, omega):
    # only the occupation is omega-free; coherences of the output are not
    phi = random_state(seed)
    a = mf_step_plaquette(phi, GateParams(gamma, 0.0))
    b = mf_step_plaquette(phi, GateParams(gamma, omega))
    assert abs(a[1, 1] - b[1, 1]) < 1e-12


@pytest.mark.parametrize("gamma", [0.6, 1.0, 1.4])
def test_plaquette_trajectory_independent_of_omega(gamma):
    ref = mf_trajectory(GateParams(gamma, 0.0), 200, scheme="plaquette").n
    for omega in (0.4, 1.1, 1.5):
        n = mf_trajectory(GateParams(gamma, omega), 200, scheme="plaquette").n
        assert np.max(np.abs(n - ref)) < 1e-12


@pytest.mark.parametrize("omega", [0.0, 0.5, 1.2])
def test_five_site_matches_dense_oracle(omega):
    for seed in range(3):
        phi, p = random_state(seed), GateParams(0.9, omega)
        assert np.max(np.abs(mf_step_five_site(phi, p) - five_site_oracle(phi, p))) < 1e-12


def test_five_site_depends_on_omega():
    a = mf_step_five_site(FULL_STATE, GateParams(1.0, 0.0))
    b = mf_step_five_site(FULL_STATE, GateParams(1.0, 0.5))
    assert np.max(np.abs(a - b)) > 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 2), st.floats(0, 1.6))
def test_steps_return_valid_states(seed, gamma, omega):
    phi = random_state(seed)
    p = GateParams(gamma, omega)
    for out in (mf_step_plaquette(phi, p), mf_step_five_site(phi, p)):
        validate_state(out)


def test_validate_state_rejects():
    with pytest.raises(ValueError):
        validate_state(np.eye(2))
    with pytest.raises(ValueError):
        validate_state(np.array([[1, 1], [0, 0]]))
    with pytest.raises(ValueError):
        validate_state(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        validate_state(np.eye(3) / 3)


def test_trajectory_zero_gamma():
    s = mf_trajectory(GateParams(0.0, 0.3), 5)
    assert s.n[0] == 1.0 and np.all(s.n[1:] == 0.0)
    assert s.phi.shape == (6, 2, 2)


def test_trajectory_phases():
    active = mf_trajectory(GateParams(2.0, 0.0), 500)
    assert abs(active.n[-1] - fixed_point_zero_omega(2.0)) < 1e-12
    assert abs(active.n[-1] - active.n[-2]) < 1e-14
    dead = mf_trajectory(GateParams(0.3, 0.0), 500)
    assert dead.n[-1] < 1e-100
    assert np.all((dead.n >= 0) & (dead.n <= 1 + 1e-10))


def test_trajectory_validation():
    with pytest.raises(ValueError):
        mf_trajectory(GateParams(1.0), 0)


@pytest.mark.parametrize("gamma", [0.9, 1.2, 2.0])
def test_stationary_density_zero_omega(gamma):
    res = mf_stationary_density(GateParams(gamma, 0.0), tol=1e-13)
    assert res.converged
    assert abs(res.density - fixed_point_zero_omega(gamma)) < 1e-10


def test_stationary_density_trivial_and_critical():
    assert mf_stationary_density(GateParams(0.0, 0.0)).density == 0.0
    near = mf_stationary_density(GateParams(math.pi / 4, 0.0), t_max=10_000)
    assert not near.converged and near.steps == 10_000
    with pytest.raises(ValueError):
        mf_stationary_density(GateParams(1.0), tol=0.0)


def test_stationary_density_monotone_in_gamma():
    # n_ss is periodic in gamma through sin^2, so sample up to pi/2
    for omega in (0.0, 0.8):
        ns = [mf_stationary_density(GateParams(g, omega), t_max=5000).density
              for g in np.linspace(0.5, np.pi / 2, 7)]
        assert np.all(np.diff(ns) >= -1e-12)


def test_linear_gain_is_omega_independent():
    for gamma in (0.8, 1.0, 1.7):
        for omega in (0.0, 0.7, 1.5):
            assert abs(mf_linear_gain(GateParams(gamma, omega)) - 2 * math.sin(gamma) ** 2) < 1e-12
    g = mf_critical_gamma_linear()
    assert abs(mf_linear_gain(GateParams(g, 0.3)) - 1) < 1e-12


@pytest.mark.slow
def test_phase_boundary_bracket_independent():
    a = mf_phase_boundary([0.5], (0.5, 1.2), tol=1e-6)[0][1]
    b = mf_phase_boundary([0.5], (0.7, 0.9), tol=1e-6)[0][1]
    assert abs(a - b) < 1e-4
    assert abs(a - mf_critical_gamma_linear()) < 1e-3


def test_phase_boundary_bad_bracket():
    with pytest.raises(ValueError):
        mf_phase_boundary([0.0], (1.0, 0.5))
    with pytest.raises(ValueError):
        mf_phase_boundary([0.0], (1.0, 1.5), t_max=2000)


@pytest.mark.slow
def test_critical_exponent_near_one():
    s = mf_trajectory(GateParams(mf_critical_gamma_linear(), 0.7), 500)
    fit = powerlaw_fit(s, (50, 500))
    assert 0.8 <= fit.alpha <= 1.2


def test_contour_rows():
    rows = mf_contour([0.0, 2.0], [0.0, 1.0], t_max=2000)
    assert [r[:2] for r in rows] == [(0.0, 0.0), (0.0, 2.0), (1.0, 0.0), (1.0, 2.0)]
    assert rows[0][2] == 0.0 and rows[1][2] > 0.5

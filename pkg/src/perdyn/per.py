"""Damping-perturbation explicit time integrator.

The one-step map U_{k+1} = a U_k + b_k is obtained by summing the
perturbation series of the damped response.  ``a`` is computed by the
2^p doubling algorithm from its increment at the reduced step
dt0 = dt/2^p; the nonhomogeneous factor combines a truncated Neumann
sum of the series matrix beta with the force-interpolation operator L.
The explicit double iteration (time steps x series terms) is kept as
``integrate_asymptotic`` and serves as an internal cross-check of the
summed scheme.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import factorial
from typing import Iterator

import numpy as np

from .linalg import DivergenceError, neumann_sum, spd_solver, spectral_radius
from .model import StateVector, SystemModel

MAX_SERIES_ORDER = 60  # higher truncations are numerically unreliable

_DIVERGENCE_FACTOR = 1e12


@dataclass(frozen=True)
class PerConfig:
    """Tunables of the scheme.

    dt    time step (s)
    p     number of halvings, reduced step dt0 = dt/2^p
    m_a   series truncation for the matrices entering a(dt)
    r_a   Neumann truncation for (I - beta_a)^-1
    m_b   series truncation for beta_b and L_b (full step)
    r_b   Neumann truncation for (I - beta_b)^-1
    """

    dt: float
    p: int = 20
    m_a: int = 2
    r_a: int = 2
    m_b: int = 4
    r_b: int = 2

    def __post_init__(self):
        if self.dt < 0.0:
            raise ValueError("dt must be >= 0")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        for name in ("m_a", "r_a", "m_b", "r_b"):
            val = getattr(self, name)
            if val < 2 or val % 2 != 0:
                raise ValueError(f"{name} must be an even integer >= 2, got {val}")
        for name in ("m_a", "m_b"):
            if getattr(self, name) > MAX_SERIES_ORDER:
                raise ValueError(f"{name} exceeds the series cap {MAX_SERIES_ORDER}")

    @property
    def dt0(self) -> float:
        return self.dt / 2.0 ** self.p


@dataclass(frozen=True)
class SchemeMatrices:
    """Precomputed one-step operators.

    a          2N x 2N transition matrix
    neumann_b  truncated Neumann sum of beta_b
    l_b        2N x 4N force-interpolation operator
    rho_beta_b spectral radius of beta_b (convergence diagnostic)
    rho_beta_a spectral radius of beta_a at the reduced step
    """

    a: np.ndarray | None
    neumann_b: np.ndarray
    l_b: np.ndarray
    rho_beta_b: float
    rho_beta_a: float | None = None

    def __post_init__(self):
        # shareable across concurrent runs: freeze the operator arrays
        for arr in (self.a, self.neumann_b, self.l_b):
            if arr is not None:
                arr.setflags(write=False)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled state history.

    ``displacements`` and ``velocities`` have one row per time sample.
    ``diverged`` marks a run aborted by the divergence guard; the arrays
    then hold the computed prefix and ``info`` carries diagnostics.
    """

    times: np.ndarray
    displacements: np.ndarray
    velocities: np.ndarray
    diverged: bool = False
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        if len(times) > 2:
            steps = np.diff(times)
            # 1e-12 relative to the step, floored by the ulp of the end time
            tol = max(1e-12 * abs(steps[0]),
                      8.0 * np.finfo(float).eps * abs(times[-1]), 1e-300)
            if np.abs(steps - steps[0]).max() > tol:
                raise ValueError("trajectory time grid is not uniform")

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def state(self, k: int) -> StateVector:
        return StateVector(self.displacements[k].copy(), self.velocities[k].copy())

    def states(self) -> Iterator[StateVector]:
        for k in range(len(self.times)):
            yield self.state(k)


# ---------------------------------------------------------------------------
# Coefficient families (2x2 and 2x4 blocks of the series expansions).

def coeff_t(j: int, dt: float) -> np.ndarray:
    """j-th 2x2 coefficient of the homogeneous transfer series."""
    if j < 0:
        raise ValueError("j must be >= 0")
    c = (-1.0) ** j / factorial(2 * j)
    lower = 0.0 if j == 0 else c * 2 * j * dt ** (2 * j - 1)
    return np.array([
        [c * dt ** (2 * j), c * dt ** (2 * j + 1) / (2 * j + 1)],
        [lower, c * dt ** (2 * j)],
    ])


def coeff_l(j: int, dt: float) -> np.ndarray:
    """j-th 2x4 coefficient of the force-interpolation series."""
    if j < 0:
        raise ValueError("j must be >= 0")
    c = (-1.0) ** j * dt ** (2 * j + 1) / factorial(2 * j + 4)
    row_u = [
        (j + 1) * (8 * j * j + 18 * j + 13) * dt / (2 * j + 5),
        36 * (j + 1) ** 2 * dt / (2 * j + 5),
        -9 * (2 * j * j + j - 1) * dt / (2 * j + 5),
        2 * (1 + 2 * j * j) * dt / (2 * j + 5),
    ]
    row_v = [
        (2 * j + 1) * (4 * j * j + 5 * j + 3),
        9 * (2 * j + 1) ** 2,
        -9 * (j - 1) * (2 * j + 1),
        4 * j * j - 4 * j + 3,
    ]
    return c * np.array([row_u, row_v])


def coeff_alpha(j: int, dt: float) -> np.ndarray:
    """j-th 2x2 coefficient of the damping series acting on the old state."""
    if j < 0:
        raise ValueError("j must be >= 0")
    c = (-1.0) ** j * dt ** (2 * j) / factorial(2 * j + 4)
    return c * np.array([
        [12 * (j + 1) * dt, -2 * (2 * j + 1) * (j + 1) * dt * dt],
        [12 * (2 * j + 1) * (j + 2), -4 * j * (2 * j + 1) * (j + 2) * dt],
    ])


def coeff_beta(j: int, dt: float) -> np.ndarray:
    """j-th 2x2 coefficient of the damping series acting on the new state."""
    if j < 0:
        raise ValueError("j must be >= 0")
    c = (-1.0) ** j * dt ** (2 * j) / factorial(2 * j + 4)
    return c * np.array([
        [-12 * (j + 1) * dt, 2 * (2 * j + 1) * dt * dt],
        [-12 * (2 * j + 1) * (j + 2), 8 * j * (j + 2) * dt],
    ])


_COEFF_FUNCTIONS = {
    "T": coeff_t,
    "L": coeff_l,
    "alpha": coeff_alpha,
    "beta": coeff_beta,
}


def _check_order(m: int):
    if m < 0 or m % 2 != 0:
        raise ValueError(f"truncation order must be a nonnegative even integer, got {m}")
    if m > MAX_SERIES_ORDER:
        raise ValueError(f"truncation order {m} exceeds the cap {MAX_SERIES_ORDER}")


def system_operators(model: SystemModel):
    """(solve_mass, A, minv_c) with A = M^-1 K and minv_c = M^-1 C.

    M is factorized once; its inverse is never formed.
    """
    solve_mass = spd_solver(model.mass)
    a_mat = solve_mass(model.stiffness)
    minv_c = solve_mass(model.damping)
    return solve_mass, a_mat, minv_c


def _block_sum(coeffs, powers, n):
    """sum_j coeffs[j] (x) powers[j] assembled blockwise."""
    rows, cols = coeffs[0].shape
    out = np.zeros((rows * n, cols * n))
    for c2, pw in zip(coeffs, powers):
        for r in range(rows):
            for c in range(cols):
                if c2[r, c] != 0.0:
                    out[r * n:(r + 1) * n, c * n:(c + 1) * n] += c2[r, c] * pw
    return out


def assemble_series(model: SystemModel, dt: float, m: int, which: str) -> np.ndarray:
    """Truncated series sum_{j=0}^{m/2} coeff_j(dt) (x) A^j (for T, L) or
    coeff_j(dt) (x) (A^j M^-1 C) (for alpha, beta)."""
    if which not in _COEFF_FUNCTIONS:
        raise ValueError(f"unknown series {which!r}; expected T, L, alpha or beta")
    _check_order(m)
    _, a_mat, minv_c = system_operators(model)
    n = model.n_dof
    j_max = m // 2
    powers = [np.eye(n)]
    for _ in range(j_max):
        powers.append(powers[-1] @ a_mat)
    if which in ("alpha", "beta"):
        powers = [pw @ minv_c for pw in powers]
    coeff = _COEFF_FUNCTIONS[which]
    return _block_sum([coeff(j, dt) for j in range(j_max + 1)], powers, n)


def undamped_step_increment(a_mat: np.ndarray, dt: float, m: int) -> np.ndarray:
    """Increment dT of the truncated undamped transfer matrix.

    Built from the truncated cosine/sine series of sqrt(A)*dt; the
    lower-left block is -A H so it carries one extra power of A.
    """
    _check_order(m)
    n = a_mat.shape[0]
    b_mat = (dt * dt) * a_mat
    j_max = m // 2
    delta_g = np.zeros((n, n))
    h_mat = np.eye(n)
    b_pow = np.eye(n)
    for j in range(1, j_max + 1):
        b_pow = b_pow @ b_mat
        delta_g += (-1.0) ** j / factorial(2 * j) * b_pow
        h_mat += (-1.0) ** j / factorial(2 * j + 1) * b_pow
    h_mat *= dt
    return np.block([[delta_g, h_mat], [-a_mat @ h_mat, delta_g]])


def _damping_series(a_mat, minv_c, dt, m, coeff):
    n = a_mat.shape[0]
    j_max = m // 2
    powers = [minv_c.copy()]
    for _ in range(j_max):
        powers.append(a_mat @ powers[-1])
    return _block_sum([coeff(j, dt) for j in range(j_max + 1)], powers, n)


def compute_a(model: SystemModel, config: PerConfig) -> np.ndarray:
    """Transition matrix a(dt) by the 2^p doubling algorithm.

    The increment da(dt0) is assembled from the truncated series at the
    reduced step and doubled p times: da <- 2 da + da*da.
    """
    a_mat, minv_c = system_operators(model)[1:]
    delta_a, _ = _doubled_increment(a_mat, minv_c, config)
    return np.eye(2 * model.n_dof) + delta_a


def _doubled_increment(a_mat, minv_c, config):
    """da(dt) after the p doublings, plus rho(beta_a) as diagnostic."""
    delta_a, rho_beta_a = _increment_at_reduced_step(a_mat, minv_c, config)
    for _ in range(config.p):
        delta_a = 2.0 * delta_a + delta_a @ delta_a
    if not np.isfinite(delta_a).all():
        raise DivergenceError(
            "non-finite entries while doubling the transition increment "
            f"(rho(beta_a) = {rho_beta_a:.3e})")
    return delta_a, rho_beta_a


def _increment_at_reduced_step(a_mat, minv_c, config):
    """da(dt0) and rho(beta_a) for the doubling start."""
    dt0 = config.dt0
    n = a_mat.shape[0]
    delta_t = undamped_step_increment(a_mat, dt0, config.m_a)
    alpha_a = _damping_series(a_mat, minv_c, dt0, config.m_a, coeff_alpha)
    beta_a = _damping_series(a_mat, minv_c, dt0, config.m_a, coeff_beta)
    rho_beta_a = spectral_radius(beta_a)
    delta_beta = neumann_sum(beta_a, config.r_a) - np.eye(2 * n)
    delta_a = (delta_t + alpha_a + delta_beta
               + delta_beta @ delta_t + delta_beta @ alpha_a)
    return delta_a, rho_beta_a


def compute_b_factors(model: SystemModel, config: PerConfig) -> SchemeMatrices:
    """Nonhomogeneous factors at the full step: the truncated Neumann sum
    of beta_b, the operator L_b, and rho(beta_b).

    Emits a warning when rho(beta_b) >= 1: the Neumann truncation then no
    longer approximates (I - beta_b)^-1 and the scheme will diverge.
    """
    _, a_mat, minv_c = system_operators(model)
    beta_b = _damping_series(a_mat, minv_c, config.dt, config.m_b, coeff_beta)
    l_b = assemble_series(model, config.dt, config.m_b, "L")
    rho = spectral_radius(beta_b)
    if rho >= 1.0:
        warnings.warn(
            f"rho(beta_b) = {rho:.4f} >= 1: the damping series does not "
            "converge at this time step", RuntimeWarning, stacklevel=2)
    return SchemeMatrices(a=None, neumann_b=neumann_sum(beta_b, config.r_b),
                          l_b=l_b, rho_beta_b=rho)


def build_scheme(model: SystemModel, config: PerConfig) -> SchemeMatrices:
    """All one-step operators of the scheme."""
    _, a_mat, minv_c = system_operators(model)
    delta_a, rho_beta_a = _doubled_increment(a_mat, minv_c, config)
    a = np.eye(2 * model.n_dof) + delta_a
    partial = compute_b_factors(model, config)
    return SchemeMatrices(a=a, neumann_b=partial.neumann_b, l_b=partial.l_b,
                          rho_beta_b=partial.rho_beta_b, rho_beta_a=rho_beta_a)


def force_samples(model: SystemModel, k: int, dt: float) -> np.ndarray:
    """g_k: M^-1 f at the four interpolation abscissae of step k."""
    solve_mass = spd_solver(model.mass)
    return _sample_forces(model, solve_mass, k * dt, dt)


def _sample_forces(model, solve_mass, t_k, dt):
    g = np.concatenate([
        solve_mass(model.force_at(t_k)),
        solve_mass(model.force_at(t_k + dt / 3.0)),
        solve_mass(model.force_at(t_k + 2.0 * dt / 3.0)),
        solve_mass(model.force_at(t_k + dt)),
    ])
    if not np.isfinite(g).all():
        raise ValueError(f"non-finite force sample in step starting at t = {t_k}")
    return g


def _divergence_info(model, config, rho_beta_b, step):
    info = {"diverged_at_step": step, "rho_beta_b": rho_beta_b}
    from .analysis import dt_bound  # deferred: analysis imports this module
    try:
        bound = dt_bound(model, config.m_b)
        info["dt_max_bound"] = bound.dt_max
    except ValueError:
        info["dt_max_bound"] = float("nan")
    return info


def integrate(model: SystemModel, config: PerConfig, t_max: float) -> Trajectory:
    """Run the explicit scheme from the model's initial state to t_max.

    The step count is round(t_max/dt), so the final sample may overshoot
    t_max by less than one step.  On divergence the computed prefix is
    returned with ``diverged=True`` and diagnostics in ``info``.
    """
    if config.dt <= 0.0:
        raise ValueError("integration requires dt > 0")
    if t_max < config.dt:
        raise ValueError("t_max must be at least one time step")
    scheme = build_scheme(model, config)
    return _step_loop(model, scheme, config, t_max)


def _step_loop(model, scheme, config, t_max):
    n = model.n_dof
    dt = config.dt
    n_steps = max(1, int(round(t_max / dt)))
    solve_mass = spd_solver(model.mass)
    forced = model.force is not None
    b_op = scheme.neumann_b @ scheme.l_b if forced else None
    # reference scale for the divergence guard: the raw forcing operator,
    # deliberately without the Neumann factor so its blow-up is detected
    l_norm = np.linalg.norm(scheme.l_b, 2) if forced else 0.0

    states = np.zeros((n_steps + 1, 2 * n))
    states[0, :n] = model.u0
    states[0, n:] = model.v0
    ref_norm = np.linalg.norm(states[0])

    diverged = False
    completed = n_steps
    for k in range(n_steps):
        nxt = scheme.a @ states[k]
        if forced:
            g_k = _sample_forces(model, solve_mass, k * dt, dt)
            nxt = nxt + b_op @ g_k
            ref_norm += l_norm * np.linalg.norm(g_k)
        states[k + 1] = nxt
        norm = np.linalg.norm(nxt)
        if not np.isfinite(norm) or norm > _DIVERGENCE_FACTOR * max(ref_norm, 1e-30):
            diverged = True
            completed = k + 1
            break

    times = np.arange(completed + 1) * dt
    info = {"rho_beta_b": scheme.rho_beta_b}
    if diverged:
        info = _divergence_info(model, config, scheme.rho_beta_b, completed)
    return Trajectory(times=times, displacements=states[:completed + 1, :n],
                      velocities=states[:completed + 1, n:],
                      diverged=diverged, info=info)


def integrate_asymptotic(model: SystemModel, config: PerConfig, t_max: float,
                         n_terms: int) -> Trajectory:
    """Partial sum of the explicit double iteration.

    Term 0 is the undamped response driven by L g_k; every further term
    is driven by the previous one through the alpha/beta operators.  All
    series matrices are truncated at m_b on the full step.  The returned
    trajectory is sum of the first n_terms+1 terms; per-term norms are
    reported in ``info["term_norms"]`` and sustained growth over the
    last 10 terms flags divergence.
    """
    if config.dt <= 0.0:
        raise ValueError("integration requires dt > 0")
    if t_max < config.dt:
        raise ValueError("t_max must be at least one time step")
    if n_terms < 0:
        raise ValueError("n_terms must be >= 0")
    n = model.n_dof
    dt = config.dt
    n_steps = max(1, int(round(t_max / dt)))
    m = config.m_b

    t_mat = assemble_series(model, dt, m, "T")
    l_mat = assemble_series(model, dt, m, "L")
    alpha = assemble_series(model, dt, m, "alpha")
    beta = assemble_series(model, dt, m, "beta")

    solve_mass = spd_solver(model.mass)
    forced = model.force is not None

    term = np.zeros((n_steps + 1, 2 * n))
    term[0, :n] = model.u0
    term[0, n:] = model.v0
    for k in range(n_steps):
        term[k + 1] = t_mat @ term[k]
        if forced:
            term[k + 1] += l_mat @ _sample_forces(model, solve_mass, k * dt, dt)

    total = term.copy()
    term_norms = [float(np.abs(term).max())]
    for _ in range(n_terms):
        prev = term
        term = np.zeros_like(prev)
        for k in range(n_steps):
            term[k + 1] = t_mat @ term[k] + alpha @ prev[k] + beta @ prev[k + 1]
        total += term
        term_norms.append(float(np.abs(term).max()))
        if not np.isfinite(term_norms[-1]):
            break

    norms = np.array(term_norms[1:])  # growth of the damping corrections
    if len(norms) and not np.isfinite(norms[-1]):
        grew = True
    else:
        # sustained growth: net increase across the last 10 terms and
        # overall (tolerates the oscillation of a complex dominant mode)
        grew = (len(norms) >= 11
                and norms[-1] > norms[-11] > 0.0
                and norms[-1] > norms[0])
    info = {"term_norms": term_norms, "n_terms": n_terms}
    times = np.arange(n_steps + 1) * dt
    return Trajectory(times=times, displacements=total[:, :n],
                      velocities=total[:, n:], diverged=grew, info=info)

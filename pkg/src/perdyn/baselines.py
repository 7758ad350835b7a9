"""Reference time integrators for comparison runs.

Implicit: Newmark (average acceleration), Wilson-theta, and the
two-sub-step composite scheme (trapezoidal rule + 3-point backward
Euler).  Explicit: classical RK4 on the state-space form, and the
modified precise integration method (MPIM) whose matrix exponential is
built by the same 2^p doubling idea with a 4th-order Taylor seed and
whose forcing integral uses Gauss-Legendre quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .linalg import spd_solver
from .model import SystemModel
from .per import Trajectory

_DIVERGENCE_FACTOR = 1e12


@dataclass(frozen=True)
class StateSpaceSystem:
    """First-order form dU/dt = W U + h(t) with U = [u; v]."""

    w: np.ndarray
    h: Callable[[float], np.ndarray] | None = None

    @property
    def n_dof(self) -> int:
        return self.w.shape[0] // 2


@dataclass(frozen=True)
class IntegratorParams:
    """Method selection plus the tunables every baseline accepts."""

    method: str
    newmark_gamma: float = 0.5
    newmark_beta: float = 0.25
    wilson_theta: float = 1.4
    bathe_gamma: float = 0.5
    mpim_g: int = 4
    mpim_p: int = 20


def state_space(model: SystemModel) -> StateSpaceSystem:
    """Companion form of a second-order model; M is factorized once."""
    n = model.n_dof
    solve_mass = spd_solver(model.mass)
    w = np.block([
        [np.zeros((n, n)), np.eye(n)],
        [-solve_mass(model.stiffness), -solve_mass(model.damping)],
    ])
    if model.force is None:
        return StateSpaceSystem(w=w, h=None)

    def h(t, _n=n):
        out = np.zeros(2 * _n)
        out[_n:] = solve_mass(model.force_at(t))
        return out

    return StateSpaceSystem(w=w, h=h)


def _steps(t_max, dt):
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if t_max < dt:
        raise ValueError("t_max must be at least one time step")
    return max(1, int(round(t_max / dt)))


def _second_order_trajectory(times, u_hist, v_hist, diverged=False, info=None):
    return Trajectory(times=times, displacements=np.array(u_hist),
                      velocities=np.array(v_hist), diverged=diverged,
                      info=info or {})


def _initial_acceleration(model, solve_mass):
    return solve_mass(model.force_at(0.0) - model.damping @ model.v0
                      - model.stiffness @ model.u0)


# ---------------------------------------------------------------------------
# Newmark

def _newmark_ops(model, dt, gamma, beta):
    a0 = 1.0 / (beta * dt * dt)
    a1 = gamma / (beta * dt)
    k_eff = model.stiffness + a0 * model.mass + a1 * model.damping
    return cho_factor(k_eff)


def newmark(model: SystemModel, dt: float, t_max: float,
            gamma: float = 0.5, beta: float = 0.25) -> Trajectory:
    """Newmark recursion; defaults are the average-acceleration pair."""
    if beta <= 0.0:
        raise ValueError("newmark beta must be positive")
    n_steps = _steps(t_max, dt)
    solve_mass = spd_solver(model.mass)
    factor = _newmark_ops(model, dt, gamma, beta)
    a0 = 1.0 / (beta * dt * dt)
    a1 = gamma / (beta * dt)
    a2 = 1.0 / (beta * dt)
    a3 = 1.0 / (2.0 * beta) - 1.0
    a4 = gamma / beta - 1.0
    a5 = dt / 2.0 * (gamma / beta - 2.0)

    u = model.u0.copy()
    v = model.v0.copy()
    acc = _initial_acceleration(model, solve_mass)
    us, vs = [u.copy()], [v.copy()]
    for k in range(n_steps):
        f_next = model.force_at((k + 1) * dt)
        rhs = (f_next + model.mass @ (a0 * u + a2 * v + a3 * acc)
               + model.damping @ (a1 * u + a4 * v + a5 * acc))
        u_next = cho_solve(factor, rhs)
        acc_next = a0 * (u_next - u) - a2 * v - a3 * acc
        v_next = v + dt * ((1.0 - gamma) * acc + gamma * acc_next)
        u, v, acc = u_next, v_next, acc_next
        us.append(u.copy())
        vs.append(v.copy())
    times = np.arange(n_steps + 1) * dt
    return _second_order_trajectory(times, us, vs)


# ---------------------------------------------------------------------------
# Wilson-theta

def wilson(model: SystemModel, dt: float, t_max: float,
           theta: float = 1.4) -> Trajectory:
    """Wilson recursion: linear acceleration over the extended step
    theta*dt, force linearly extrapolated to t + theta*dt."""
    if theta < 1.0:
        raise ValueError("theta must be >= 1")
    n_steps = _steps(t_max, dt)
    solve_mass = spd_solver(model.mass)
    td = theta * dt
    k_eff = model.stiffness + 6.0 / td**2 * model.mass + 3.0 / td * model.damping
    factor = cho_factor(k_eff)

    u = model.u0.copy()
    v = model.v0.copy()
    acc = _initial_acceleration(model, solve_mass)
    us, vs = [u.copy()], [v.copy()]
    for k in range(n_steps):
        t = k * dt
        f_now = model.force_at(t)
        f_theta = f_now + theta * (model.force_at(t + dt) - f_now)
        rhs = (f_theta + model.mass @ (6.0 / td**2 * u + 6.0 / td * v + 2.0 * acc)
               + model.damping @ (3.0 / td * u + 2.0 * v + td / 2.0 * acc))
        u_theta = cho_solve(factor, rhs)
        acc_next = (6.0 / (theta**3 * dt * dt) * (u_theta - u)
                    - 6.0 / (theta**2 * dt) * v + (1.0 - 3.0 / theta) * acc)
        v_next = v + dt / 2.0 * (acc_next + acc)
        u_next = u + dt * v + dt * dt / 6.0 * (acc_next + 2.0 * acc)
        u, v, acc = u_next, v_next, acc_next
        us.append(u.copy())
        vs.append(v.copy())
    times = np.arange(n_steps + 1) * dt
    return _second_order_trajectory(times, us, vs)


# ---------------------------------------------------------------------------
# Composite two-sub-step scheme

def bathe(model: SystemModel, dt: float, t_max: float,
          gamma: float = 0.5) -> Trajectory:
    """Composite scheme: trapezoidal rule on [t, t+gamma*dt], 3-point
    backward differences on the full step.  Both effective matrices are
    factorized once."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    n_steps = _steps(t_max, dt)
    solve_mass = spd_solver(model.mass)
    dt1 = gamma * dt
    b0 = 4.0 / (dt1 * dt1)
    b1 = 2.0 / dt1
    factor1 = cho_factor(model.stiffness + b0 * model.mass + b1 * model.damping)
    c1 = (1.0 - gamma) / (gamma * dt)
    c2 = -1.0 / ((1.0 - gamma) * gamma * dt)
    c3 = (2.0 - gamma) / ((1.0 - gamma) * dt)
    factor2 = cho_factor(model.stiffness + c3 * c3 * model.mass + c3 * model.damping)

    u = model.u0.copy()
    v = model.v0.copy()
    acc = _initial_acceleration(model, solve_mass)
    us, vs = [u.copy()], [v.copy()]
    for k in range(n_steps):
        t = k * dt
        # sub-step 1: trapezoidal to t + gamma*dt
        f_mid = model.force_at(t + dt1)
        rhs = (f_mid + model.mass @ (b0 * u + 4.0 / dt1 * v + acc)
               + model.damping @ (b1 * u + v))
        u_mid = cho_solve(factor1, rhs)
        v_mid = b1 * (u_mid - u) - v
        # sub-step 2: backward differences over (t, t+gamma*dt, t+dt)
        f_next = model.force_at(t + dt)
        rhs = (f_next - model.mass @ (c1 * v + c2 * v_mid + c3 * (c1 * u + c2 * u_mid))
               - model.damping @ (c1 * u + c2 * u_mid))
        u_next = cho_solve(factor2, rhs)
        v_next = c1 * u + c2 * u_mid + c3 * u_next
        acc = c1 * v + c2 * v_mid + c3 * v_next
        u, v = u_next, v_next
        us.append(u.copy())
        vs.append(v.copy())
    times = np.arange(n_steps + 1) * dt
    return _second_order_trajectory(times, us, vs)


# ---------------------------------------------------------------------------
# RK4

def rk4(system: StateSpaceSystem, u0: np.ndarray, dt: float,
        t_max: float) -> Trajectory:
    """Classical fourth-order Runge-Kutta on dU/dt = W U + h(t).

    ``u0`` is the 2N initial state [u; v].  Divergence (non-finite or
    unbounded growth) truncates the run and sets the flag.
    """
    n_steps = _steps(t_max, dt)
    w = system.w
    h = system.h
    n2 = w.shape[0]
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (n2,):
        raise ValueError(f"initial state must have length {n2}")

    def rate(t, y):
        out = w @ y
        if h is not None:
            out = out + h(t)
        return out

    states = np.zeros((n_steps + 1, n2))
    states[0] = u0
    ref_norm = max(np.linalg.norm(u0), 1e-30)
    diverged = False
    completed = n_steps
    for k in range(n_steps):
        t = k * dt
        y = states[k]
        k1 = rate(t, y)
        k2 = rate(t + dt / 2.0, y + dt / 2.0 * k1)
        k3 = rate(t + dt / 2.0, y + dt / 2.0 * k2)
        k4 = rate(t + dt, y + dt * k3)
        states[k + 1] = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        norm = np.linalg.norm(states[k + 1])
        if h is not None:
            ref_norm += dt * max(np.linalg.norm(h(t)),
                                 np.linalg.norm(h(t + dt)))
        if not np.isfinite(norm) or norm > _DIVERGENCE_FACTOR * ref_norm:
            diverged = True
            completed = k + 1
            break
    n = n2 // 2
    times = np.arange(completed + 1) * dt
    info = {"diverged_at_step": completed} if diverged else {}
    return Trajectory(times=times, displacements=states[:completed + 1, :n],
                      velocities=states[:completed + 1, n:],
                      diverged=diverged, info=info)


# ---------------------------------------------------------------------------
# MPIM

#: Gauss-Legendre nodes/weights on [-1, 1], hardcoded to 1e-15.
GAUSS_NODES = {
    2: ((-0.5773502691896257, 0.5773502691896257),
        (1.0, 1.0)),
    3: ((-0.7745966692414834, 0.0, 0.7745966692414834),
        (0.5555555555555556, 0.8888888888888888, 0.5555555555555556)),
    4: ((-0.8611363115940526, -0.3399810435848563,
         0.3399810435848563, 0.8611363115940526),
        (0.3478548451374538, 0.6521451548625461,
         0.6521451548625461, 0.3478548451374538)),
    5: ((-0.9061798459386640, -0.5384693101056831, 0.0,
         0.5384693101056831, 0.9061798459386640),
        (0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
         0.4786286704993665, 0.2369268850561891)),
    6: ((-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
         0.2386191860831969, 0.6612093864662645, 0.9324695142031521),
        (0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
         0.4679139345726910, 0.3607615730481386, 0.1713244923791704)),
}


def expm_2p(w: np.ndarray, t: float, p: int = 20) -> np.ndarray:
    """exp(W t) via a 4th-order Taylor increment at t/2^p doubled p times."""
    n2 = w.shape[0]
    if t == 0.0:
        return np.eye(n2)
    x = w * (t / 2.0 ** p)
    x2 = x @ x
    delta = x + x2 / 2.0 + x2 @ x / 6.0 + x2 @ x2 / 24.0
    for _ in range(p):
        delta = 2.0 * delta + delta @ delta
    return np.eye(n2) + delta


def mpim_operators(system: StateSpaceSystem, dt: float, g: int = 4, p: int = 20):
    """(full-step exponential, per-node weighted exponentials, node times).

    Each Gauss node i needs exp(W dt (1 - eta_i)/2); the force is then
    sampled at t_k + dt(1 + eta_i)/2 so that the exponential acts over
    the remainder of the step.
    """
    if g not in GAUSS_NODES:
        raise ValueError(f"g must be one of {sorted(GAUSS_NODES)}, got {g}")
    big_h = expm_2p(system.w, dt, p)
    nodes, weights = GAUSS_NODES[g]
    exps = [dt / 2.0 * wt * expm_2p(system.w, dt / 2.0 * (1.0 - eta), p)
            for eta, wt in zip(nodes, weights)]
    offsets = [dt / 2.0 * (1.0 + eta) for eta in nodes]
    return big_h, exps, offsets


def _mpim_loop(system, big_h, exps, offsets, u0, dt, t_max):
    n_steps = _steps(t_max, dt)
    n2 = system.w.shape[0]
    states = np.zeros((n_steps + 1, n2))
    states[0] = np.asarray(u0, dtype=float)
    h = system.h
    ref_norm = max(np.linalg.norm(states[0]), 1e-30)
    diverged = False
    completed = n_steps
    for k in range(n_steps):
        nxt = big_h @ states[k]
        if h is not None:
            t = k * dt
            w_k = np.zeros(n2)
            for ex, off in zip(exps, offsets):
                w_k += ex @ h(t + off)
            nxt = nxt + w_k
            ref_norm += np.linalg.norm(w_k)
        states[k + 1] = nxt
        norm = np.linalg.norm(nxt)
        if not np.isfinite(norm) or norm > _DIVERGENCE_FACTOR * ref_norm:
            diverged = True
            completed = k + 1
            break
    n = n2 // 2
    times = np.arange(completed + 1) * dt
    return Trajectory(times=times, displacements=states[:completed + 1, :n],
                      velocities=states[:completed + 1, n:], diverged=diverged)


def mpim(system: StateSpaceSystem, u0: np.ndarray, dt: float, t_max: float,
         g: int = 4, p: int = 20) -> Trajectory:
    """Modified precise integration: exact-to-roundoff homogeneous
    propagation plus Gauss quadrature of the forcing convolution."""
    big_h, exps, offsets = mpim_operators(system, dt, g, p)
    return _mpim_loop(system, big_h, exps, offsets, u0, dt, t_max)

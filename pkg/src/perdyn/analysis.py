"""Convergence and stability analysis of the perturbation scheme.

Provides the scalar 2x2 series matrix sigma_m(tau) and its eigenvalues,
the admissible-step limit tau_L(m), the combined time-step bound, the
single-dof stability map of the reduced-step transition matrix, and the
spectral radius of beta_b over a time-step grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.linalg import eigh

from . import per
from .linalg import neumann_sum, spectral_radius
from .model import SystemModel, modal_analysis

#: Modulus of the sigma eigenvalues at tau = 0: 1/(2*sqrt(3)).
SIGMA_THRESHOLD = 1.0 / (2.0 * np.sqrt(3.0))


@dataclass(frozen=True)
class SigmaEigen:
    m: int
    tau: float
    mu1: complex
    mu2: complex
    modulus_max: float


@dataclass(frozen=True)
class StabilityRecord:
    """Single-dof stability map of a(dt0) on a grid of dt0/T.

    ``grid`` rows are (dt0_over_T, max_abs_eigenvalue); ``boundaries``
    lists the (lower, upper) intervals where max|lambda| <= 1.
    """

    zeta: float
    m_a: int
    r_a: int
    p: int
    grid: np.ndarray
    boundaries: list[tuple[float, float]]


@dataclass(frozen=True)
class DtBound:
    """Admissible time-step bound.

    damping_bound     2*sqrt(3)/rho(M^-1 C) (inf for undamped systems)
    truncation_bound  tau_L(m) / omega_max
    dt_max            min of the two
    """

    damping_bound: float
    truncation_bound: float
    dt_max: float


def sigma_matrix(m: int, tau: float, dt: float = 1.0) -> np.ndarray:
    """Scalar 2x2 series matrix sigma_m(tau).

    The dt factors on the off-diagonal cancel from the eigenvalue moduli
    (diagonal similarity), so dt = 1 is used unless stated otherwise.
    """
    per._check_order(m)
    out = np.zeros((2, 2))
    for j in range(m // 2 + 1):
        c = (-1.0) ** j * tau ** (2 * j) / factorial(2 * j + 4)
        out += c * np.array([
            [-12.0 * (j + 1), 2.0 * (2 * j + 1) * dt],
            [-12.0 * (2 * j + 1) * (j + 2) / dt, 8.0 * j * (j + 2)],
        ])
    return out


def sigma_eigenvalues(m: int, tau: float) -> SigmaEigen:
    """Both eigenvalues of sigma_m(tau) and their largest modulus."""
    if tau < 0.0:
        raise ValueError("tau must be >= 0")
    mu = np.linalg.eigvals(sigma_matrix(m, tau))
    return SigmaEigen(m=m, tau=tau, mu1=complex(mu[0]), mu2=complex(mu[1]),
                      modulus_max=float(np.abs(mu).max()))


def _sigma_excess(m: int, tau: float) -> float:
    return float(np.abs(np.linalg.eigvals(sigma_matrix(m, tau))).max()) - SIGMA_THRESHOLD


def tau_limit(m: int, scan_step: float = 0.01, tau_max: float = 100.0,
              tol: float = 1e-8) -> float:
    """Smallest tau > 0 where the spectral radius of sigma_m(tau) climbs
    back to its tau = 0 value 1/(2*sqrt(3)).

    The curve starts exactly at the threshold, dips below it, and the
    first upward crossing bounds the admissible nondimensional step
    omega*dt.  Found by a bracketing scan followed by bisection; returns
    inf when no crossing exists below tau_max.  m = 0 is rejected: the
    m = 0 eigenvalue moduli are constant so no crossing is defined.
    """
    per._check_order(m)
    if m == 0:
        raise ValueError("tau limit is undefined for m = 0 (constant spectral radius)")
    prev_tau, prev_f = 0.0, 0.0
    tau = scan_step
    while tau <= tau_max:
        f = _sigma_excess(m, tau)
        if f > 0.0 and prev_f <= 0.0:
            lo, hi = prev_tau, tau
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if _sigma_excess(m, mid) > 0.0:
                    hi = mid
                else:
                    lo = mid
            return 0.5 * (lo + hi)
        prev_tau, prev_f = tau, f
        tau += scan_step
    return float("inf")


def dt_bound(model: SystemModel, m: int) -> DtBound:
    """Combined admissible-step bound from the damping intensity and the
    series truncation order."""
    modal = modal_analysis(model)
    w_max = float(modal.frequencies[-1])
    if w_max <= 0.0:
        raise ValueError("model has zero stiffness: no maximum frequency")
    rho_c = float(np.abs(eigh(model.damping, model.mass, eigvals_only=True)).max())
    damping_bound = float("inf") if rho_c == 0.0 else 2.0 * np.sqrt(3.0) / rho_c
    truncation_bound = tau_limit(m) / w_max
    return DtBound(damping_bound=damping_bound, truncation_bound=truncation_bound,
                   dt_max=min(damping_bound, truncation_bound))


def _sdof_amplification(x: float, zeta: float, m_a: int, r_a: int) -> np.ndarray:
    """a(dt0) of the unit-period single-dof oscillator, x = dt0/T."""
    omega = 2.0 * np.pi
    dt0 = x  # T = 1
    a_mat = np.array([[omega * omega]])
    minv_c = np.array([[2.0 * omega * zeta]])
    t_a = np.eye(2) + per.undamped_step_increment(a_mat, dt0, m_a)
    alpha_a = per._damping_series(a_mat, minv_c, dt0, m_a, per.coeff_alpha)
    beta_a = per._damping_series(a_mat, minv_c, dt0, m_a, per.coeff_beta)
    return neumann_sum(beta_a, r_a) @ (t_a + alpha_a)


def _max_abs_eig(x, zeta, m_a, r_a):
    return float(np.abs(np.linalg.eigvals(_sdof_amplification(x, zeta, m_a, r_a))).max())


#: |lambda| classification threshold: unity plus a roundoff allowance
#: (near dt0 -> 0 the true excess sits below machine precision).
_STABLE_LIMIT = 1.0 + 64.0 * np.finfo(float).eps


def sdof_stability_map(zeta: float, m_a: int, r_a: int = 2, p: int = 20,
                       grid_max: float = 0.9, grid_step: float = 2e-3,
                       tol: float = 1e-6) -> StabilityRecord:
    """Stability intervals of the reduced-step transition matrix.

    Scans max|lambda(a(dt0))| over dt0/T, refines every stability
    boundary by bisection, and reports the |lambda| <= 1 intervals.
    Intervals narrower than 3 grid steps are discarded: near dt0 -> 0
    the excess over 1 sits below machine precision and produces
    sub-resolution noise.  ``p`` is carried as metadata (the map lives at
    the reduced step; multiply by 2^p for full-step values).
    """
    if grid_max <= 0.0 or grid_step <= 0.0:
        raise ValueError("grid parameters must be positive")
    if zeta < 0.0:
        raise ValueError("zeta must be >= 0")
    xs = np.arange(grid_step, grid_max + 0.5 * grid_step, grid_step)
    lams = np.array([_max_abs_eig(x, zeta, m_a, r_a) for x in xs])
    grid = np.column_stack([xs, lams])

    def refine(lo, hi):
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _max_abs_eig(mid, zeta, m_a, r_a) <= _STABLE_LIMIT:
                lo = mid
            else:
                hi = mid
        return lo, hi

    boundaries = []
    stable = lams <= _STABLE_LIMIT
    i = 0
    while i < len(xs):
        if not stable[i]:
            i += 1
            continue
        if i == 0:
            lower = 0.0
        else:
            lo, hi = refine_unstable_side(xs[i - 1], xs[i], zeta, m_a, r_a, tol)
            lower = 0.5 * (lo + hi)
        j = i
        while j < len(xs) and stable[j]:
            j += 1
        if j < len(xs):
            lo, hi = refine(xs[j - 1], xs[j])
            upper = 0.5 * (lo + hi)
        else:
            upper = float(xs[-1])
        if upper - lower >= 3.0 * grid_step:
            boundaries.append((float(lower), float(upper)))
        i = j
    return StabilityRecord(zeta=zeta, m_a=m_a, r_a=r_a, p=p,
                           grid=grid, boundaries=boundaries)


def refine_unstable_side(lo, hi, zeta, m_a, r_a, tol):
    """Bisect a boundary where the stable side is the upper end."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _max_abs_eig(mid, zeta, m_a, r_a) <= _STABLE_LIMIT:
            hi = mid
        else:
            lo = mid
    return lo, hi


def beta_radius_map(model: SystemModel, dt_values, m_b: int) -> list[tuple[float, float]]:
    """rho(beta_b(dt)) for each time step in dt_values."""
    out = []
    for dt in dt_values:
        if dt <= 0.0:
            raise ValueError("time steps must be positive")
        beta = per.assemble_series(model, dt, m_b, "beta")
        out.append((float(dt), spectral_radius(beta)))
    return out

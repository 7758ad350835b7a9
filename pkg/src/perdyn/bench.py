"""Benchmark harness: error norms, parameter sweeps, operation-count
cost models and reference-solution generation."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import baselines, per
from .model import SystemModel, modal_analysis

METHODS = ("per", "newmark", "wilson", "bathe", "rk4", "mpim")

#: RK4 stability margin on omega_max * dt used by reference_solution.
RK4_STABLE_PRODUCT = 2.5
MAX_REFINE = 8000


@dataclass(frozen=True)
class ErrorReport:
    """Global discrete-l2 errors of one dof plus per-step error series.

    The per-step series are |difference| scaled by the peak reference
    amplitude of the same quantity.
    """

    dof: int
    e_disp: float
    e_vel: float
    step_errors_disp: np.ndarray
    step_errors_vel: np.ndarray


@dataclass(frozen=True)
class CostModel:
    """Operation count n3*N^3 + n2*N^2 + n1*N of one method run."""

    method: str
    params: dict
    n3_coeff: int
    n2_coeff: int
    n1_coeff: int
    total_ops: int


@dataclass(frozen=True)
class SweepRow:
    dt: float
    dt_over_t: float
    e_disp: float
    e_vel: float
    diverged: bool
    extra: dict = field(default_factory=dict)


def trajectory_norm(values: np.ndarray) -> float:
    """Discrete l2 norm sqrt(sum_k y(t_k)^2) over the whole grid."""
    return float(np.sqrt(np.sum(np.asarray(values, dtype=float) ** 2)))


def global_error(test: per.Trajectory, reference: per.Trajectory,
                 dof: int) -> ErrorReport:
    """Relative global error of one dof's displacement and velocity."""
    if len(test.times) != len(reference.times):
        raise ValueError("trajectories have different lengths")
    if np.abs(test.times - reference.times).max() > 1e-12 * max(test.times[-1], 1e-300):
        raise ValueError("trajectories are sampled on different time grids")
    u_t = test.displacements[:, dof]
    u_r = reference.displacements[:, dof]
    v_t = test.velocities[:, dof]
    v_r = reference.velocities[:, dof]
    nu, nv = trajectory_norm(u_r), trajectory_norm(v_r)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("reference trajectory has zero norm: error undefined")
    peak_u = max(np.abs(u_r).max(), 1e-300)
    peak_v = max(np.abs(v_r).max(), 1e-300)
    return ErrorReport(
        dof=dof,
        e_disp=trajectory_norm(u_t - u_r) / nu,
        e_vel=trajectory_norm(v_t - v_r) / nv,
        step_errors_disp=np.abs(u_t - u_r) / peak_u,
        step_errors_vel=np.abs(v_t - v_r) / peak_v,
    )


def mechanical_energy(model: SystemModel, traj: per.Trajectory) -> np.ndarray:
    """Discrete mechanical energy 0.5 u'Ku + 0.5 v'Mv at every sample."""
    u = traj.displacements
    v = traj.velocities
    return 0.5 * (np.einsum("ki,ij,kj->k", u, model.stiffness, u)
                  + np.einsum("ki,ij,kj->k", v, model.mass, v))


def reference_solution(model: SystemModel, dt: float, t_max: float,
                       refine: int = 500) -> per.Trajectory:
    """RK4 reference at dt/refine subsampled onto the coarse grid.

    The refinement doubles automatically (up to 8000) until
    omega_max * dt_fine clears the RK4 stability margin; the refine
    value actually used is reported in ``info``.
    """
    if refine < 1:
        raise ValueError("refine must be >= 1")
    w_max = modal_analysis(model).frequencies[-1]
    used = refine
    while w_max * dt / used >= RK4_STABLE_PRODUCT:
        used *= 2
        if used > MAX_REFINE:
            raise ValueError(
                f"cannot reach RK4 stability below refine={MAX_REFINE} "
                f"(omega_max*dt = {w_max * dt:.3e})")
    system = baselines.state_space(model)
    u0 = np.concatenate([model.u0, model.v0])
    n_coarse = max(1, int(round(t_max / dt)))
    fine = baselines.rk4(system, u0, dt / used, n_coarse * used * (dt / used))
    if fine.diverged:
        raise ValueError("reference RK4 run diverged")
    sl = slice(None, None, used)
    traj = per.Trajectory(times=np.arange(n_coarse + 1) * dt,
                          displacements=fine.displacements[sl].copy(),
                          velocities=fine.velocities[sl].copy(),
                          info={"refine": used})
    return traj


def run_method(model: SystemModel, method: str, dt: float, t_max: float,
               per_config: per.PerConfig | None = None,
               params: baselines.IntegratorParams | None = None) -> per.Trajectory:
    """Dispatch a single integration run by method name."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    params = params or baselines.IntegratorParams(method=method)
    if method == "per":
        config = per_config or per.PerConfig(dt=dt)
        if config.dt != dt:
            config = per.PerConfig(dt=dt, p=config.p, m_a=config.m_a,
                                   r_a=config.r_a, m_b=config.m_b, r_b=config.r_b)
        return per.integrate(model, config, t_max)
    if method == "newmark":
        return baselines.newmark(model, dt, t_max, params.newmark_gamma,
                                 params.newmark_beta)
    if method == "wilson":
        return baselines.wilson(model, dt, t_max, params.wilson_theta)
    if method == "bathe":
        return baselines.bathe(model, dt, t_max, params.bathe_gamma)
    system = baselines.state_space(model)
    u0 = np.concatenate([model.u0, model.v0])
    if method == "rk4":
        return baselines.rk4(system, u0, dt, t_max)
    return baselines.mpim(system, u0, dt, t_max, params.mpim_g, params.mpim_p)


def _per_rho(model, config, dt):
    """rho(beta_b) at this dt, warnings silenced (divergence is sweep data)."""
    sized = per.PerConfig(dt=dt, p=config.p, m_a=config.m_a, r_a=config.r_a,
                          m_b=config.m_b, r_b=config.r_b)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return per.compute_b_factors(model, sized).rho_beta_b


def sweep_dt(model: SystemModel, method: str, dt_list, t_max: float, dof: int,
             per_config: per.PerConfig | None = None,
             params: baselines.IntegratorParams | None = None,
             refine: int = 500) -> list[SweepRow]:
    """Global error against the RK4 reference for each time step.

    Runs where the trajectory blows up, or (for the perturbation scheme)
    where rho(beta_b) >= 1 so the underlying series does not converge,
    are recorded with the diverged flag instead of numbers.
    """
    t_min = modal_analysis(model).min_period
    rows = []
    for dt in dt_list:
        extra = {}
        ref = reference_solution(model, dt, t_max, refine=refine)
        bad = False
        if method == "per":
            rho = _per_rho(model, per_config or per.PerConfig(dt=dt), dt)
            extra["rho_beta_b"] = rho
            bad = rho >= 1.0
        traj = None
        if not bad:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    traj = run_method(model, method, dt, t_max,
                                      per_config=per_config, params=params)
            except per.DivergenceError:
                traj = None
        if traj is None or traj.diverged or len(traj.times) != len(ref.times):
            rows.append(SweepRow(dt=dt, dt_over_t=dt / t_min, e_disp=float("nan"),
                                 e_vel=float("nan"), diverged=True, extra=extra))
            continue
        rep = global_error(traj, ref, dof)
        rows.append(SweepRow(dt=dt, dt_over_t=dt / t_min, e_disp=rep.e_disp,
                             e_vel=rep.e_vel, diverged=False, extra=extra))
    return rows


def sweep_damping(model: SystemModel, zeta_list, dt: float, t_max: float,
                  dof: int, method: str = "per",
                  per_config: per.PerConfig | None = None,
                  params: baselines.IntegratorParams | None = None,
                  refine: int = 500) -> list[SweepRow]:
    """Scale the template's damping matrix by each zeta and record the
    global errors plus rho(beta_b).

    The template model's damping matrix is the zeta = 1 layout.
    """
    from .model import damping_level
    config = per_config or per.PerConfig(dt=dt)
    rows = []
    for zeta in zeta_list:
        if zeta < 0.0:
            raise ValueError("zeta must be >= 0")
        scaled = model.with_damping(zeta * model.damping)
        rho = _per_rho(scaled, config, dt)
        level = damping_level(scaled) if zeta > 0.0 else 0.0
        extra = {"rho_beta_b": rho, "damping_level": level}
        ref = reference_solution(scaled, dt, t_max, refine=refine)
        bad = method == "per" and rho >= 1.0
        traj = None
        if not bad:
            try:
                traj = run_method(scaled, method, dt, t_max,
                                  per_config=config, params=params)
            except per.DivergenceError:
                traj = None
        if traj is None or traj.diverged or len(traj.times) != len(ref.times):
            rows.append(SweepRow(dt=dt, dt_over_t=zeta, e_disp=float("nan"),
                                 e_vel=float("nan"), diverged=True, extra=extra))
            continue
        rep = global_error(traj, ref, dof)
        rows.append(SweepRow(dt=dt, dt_over_t=zeta, e_disp=rep.e_disp,
                             e_vel=rep.e_vel, diverged=False, extra=extra))
    return rows


def fit_order(dts, errors, floor_factor: float = 10.0) -> float:
    """Least-squares slope of log10(error) vs log10(dt).

    Non-finite entries and floor-dominated points (below floor_factor
    times the smallest error) are discarded before fitting.
    """
    dts = np.asarray(list(dts), dtype=float)
    errors = np.asarray(list(errors), dtype=float)
    ok = np.isfinite(errors) & (errors > 0.0)
    if ok.sum() < 2:
        raise ValueError("not enough valid points for a slope fit")
    floor = errors[ok].min()
    keep = ok & (errors > floor_factor * floor)
    if keep.sum() < 2:
        keep = ok
    return float(np.polyfit(np.log10(dts[keep]), np.log10(errors[keep]), 1)[0])


# ---------------------------------------------------------------------------
# Operation-count cost models.

def _cost(method, params, n3, n2, n1, n):
    total = n3 * n**3 + n2 * n**2 + n1 * n
    return CostModel(method=method, params=params, n3_coeff=n3,
                     n2_coeff=n2, n1_coeff=n1, total_ops=total)


def cost_per(n_dof: int, p: int = 20, m_a: int = 2, m_b: int = 4,
             r_a: int = 2, r_b: int = 2, steps: int = 0) -> CostModel:
    """Operation count of the perturbation scheme."""
    n3 = 33 + 4 * (r_a + r_b) + 8 * p + m_b
    n2 = 11 * m_a // 2 + 8 * m_b + 24 + 4 * steps
    n1 = 8 * steps
    return _cost("per", dict(N=n_dof, p=p, m_a=m_a, m_b=m_b, r_a=r_a,
                             r_b=r_b, steps=steps), n3, n2, n1, n_dof)


def cost_mpim(n_dof: int, p: int = 20, g: int = 4, steps: int = 0) -> CostModel:
    """Operation count of the modified precise integration method."""
    n3 = 18 + 8 * p * (1 + g)
    n2 = 4 * g + 4 * steps
    return _cost("mpim", dict(N=n_dof, p=p, g=g, steps=steps), n3, n2, 0, n_dof)


def cost_rk4(n_dof: int, steps: int = 0) -> CostModel:
    """Operation count of classical RK4."""
    return _cost("rk4", dict(N=n_dof, steps=steps), 2, 16 * steps,
                 8 * steps, n_dof)


def per_mpim_setup_ratio(p: int = 20, m_a: int = 2, m_b: int = 4,
                         r_a: int = 2, r_b: int = 2, g: int = 4) -> float:
    """Large-N limit of the setup-cost ratio per/mpim (N^3 coefficients)."""
    return cost_per(1, p, m_a, m_b, r_a, r_b).n3_coeff / cost_mpim(1, p, g).n3_coeff


# ---------------------------------------------------------------------------
# Wall-clock timing (plot data only, never asserted against literature).

def timing_run(model: SystemModel, method: str, dt: float, t_max: float,
               per_config: per.PerConfig | None = None,
               params: baselines.IntegratorParams | None = None,
               repeats: int = 3) -> tuple[float, float]:
    """(setup_seconds, loop_seconds), best of ``repeats`` runs.

    Setup covers operator preparation (scheme matrices, exponentials,
    factorizations); the loop phase covers time stepping.  t_max below
    one step means a setup-only measurement.
    """
    params = params or baselines.IntegratorParams(method=method)
    best_setup = best_loop = float("inf")
    for _ in range(max(1, repeats)):
        setup_s, loop_s = _timed_once(model, method, dt, t_max, per_config, params)
        best_setup = min(best_setup, setup_s)
        best_loop = min(best_loop, loop_s)
    return best_setup, best_loop


def _timed_once(model, method, dt, t_max, per_config, params):
    u0 = np.concatenate([model.u0, model.v0])
    run_loop = t_max >= dt
    if method == "per":
        config = per_config or per.PerConfig(dt=dt)
        t0 = time.perf_counter()
        scheme = per.build_scheme(model, config)
        t1 = time.perf_counter()
        if run_loop:
            per._step_loop(model, scheme, config, t_max)
        return t1 - t0, time.perf_counter() - t1
    if method == "mpim":
        t0 = time.perf_counter()
        system = baselines.state_space(model)
        ops = baselines.mpim_operators(system, dt, params.mpim_g, params.mpim_p)
        t1 = time.perf_counter()
        if run_loop:
            baselines._mpim_loop(system, *ops, u0, dt, t_max)
        return t1 - t0, time.perf_counter() - t1
    if method == "rk4":
        t0 = time.perf_counter()
        system = baselines.state_space(model)
        t1 = time.perf_counter()
        if run_loop:
            baselines.rk4(system, u0, dt, t_max)
        return t1 - t0, time.perf_counter() - t1
    # implicit methods: setup = factorization of the effective matrices,
    # measured by a one-step run; loop = the remaining steps
    t0 = time.perf_counter()
    run_method(model, method, dt, dt, params=params)
    t1 = time.perf_counter()
    if run_loop:
        run_method(model, method, dt, t_max, params=params)
    return t1 - t0, time.perf_counter() - t1

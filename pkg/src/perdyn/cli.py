"""Configuration-driven command-line front end.

Subcommands: simulate, stability-map, tau-limit, sweep-dt,
sweep-damping, cost-model, compare.  Run configurations are JSON
documents (schema version 1); every command emits CSV with a header
row, 17-significant-digit numbers, comma separators and LF endings.

Exit codes: 0 success, 2 validation error, 3 divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import analysis, baselines, bench, per
from .linalg import DivergenceError
from .model import (SystemModel, benchmark_beam, benchmark_chain, build_beam,
                    build_chain, constant_step_force,
                    gaussian_multiharmonic_force)

CONFIG_VERSION = 1
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3

#: Fixed seed of the power-iteration fallback inside spectral_radius,
#: echoed in run summaries for reproducibility.
POWER_ITERATION_SEED = 12345


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# CSV helpers

def format_number(x) -> str:
    return f"{float(x):.17g}"


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fields = []
            for item in row:
                if isinstance(item, bool):
                    fields.append("true" if item else "false")
                elif isinstance(item, str):
                    fields.append(item)
                else:
                    fields.append(format_number(item))
            fh.write(",".join(fields) + "\n")


# ---------------------------------------------------------------------------
# Run configuration

@dataclass
class RunConfig:
    """Parsed run configuration (JSON schema version 1)."""

    model_spec: dict
    force_spec: dict
    method_spec: dict
    dt: float
    t_max: float
    out: str | None = None
    reference: dict = field(default_factory=lambda: {"refine": 500})
    u0: list | None = None
    v0: list | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if doc.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {doc.get('version')}")
        for key in ("model", "dt", "t_max"):
            if key not in doc:
                raise ConfigError(f"config is missing the required key {key!r}")
        dt = float(doc["dt"])
        t_max = float(doc["t_max"])
        if dt <= 0.0:
            raise ConfigError("dt must be positive")
        if t_max < dt:
            raise ConfigError("t_max must be at least one time step")
        return cls(model_spec=dict(doc["model"]),
                   force_spec=dict(doc.get("force", {"kind": "zero"})),
                   method_spec=dict(doc.get("method", {"name": "per"})),
                   dt=dt, t_max=t_max, out=doc.get("out"),
                   reference=dict(doc.get("reference", {"refine": 500})),
                   u0=doc.get("u0"), v0=doc.get("v0"))

    def to_dict(self) -> dict:
        doc = {
            "version": CONFIG_VERSION,
            "model": self.model_spec,
            "force": self.force_spec,
            "method": self.method_spec,
            "dt": self.dt,
            "t_max": self.t_max,
            "reference": self.reference,
        }
        if self.out is not None:
            doc["out"] = self.out
        if self.u0 is not None:
            doc["u0"] = self.u0
        if self.v0 is not None:
            doc["v0"] = self.v0
        return doc

    def build_model(self) -> SystemModel:
        model = _build_bare_model(self.model_spec)
        n = model.n_dof
        force = _build_force(self.force_spec, n)
        if force is not None:
            model = model.with_force(force)
        if self.u0 is not None or self.v0 is not None:
            u0 = np.array(self.u0, dtype=float) if self.u0 is not None else np.zeros(n)
            v0 = np.array(self.v0, dtype=float) if self.v0 is not None else np.zeros(n)
            model = model.with_initial_state(u0, v0)
        return model

    def method_name(self) -> str:
        return self.method_spec.get("name", "per")

    def per_config(self) -> per.PerConfig:
        ms = self.method_spec
        return per.PerConfig(dt=self.dt,
                             p=int(ms.get("p", 20)),
                             m_a=int(ms.get("ma", 2)), r_a=int(ms.get("ra", 2)),
                             m_b=int(ms.get("mb", 4)), r_b=int(ms.get("rb", 2)))

    def integrator_params(self) -> baselines.IntegratorParams:
        ms = self.method_spec
        return baselines.IntegratorParams(
            method=self.method_name(),
            newmark_gamma=float(ms.get("gamma", 0.5)),
            newmark_beta=float(ms.get("beta", 0.25)),
            wilson_theta=float(ms.get("theta", 1.4)),
            bathe_gamma=float(ms.get("gamma", 0.5)),
            mpim_g=int(ms.get("g", 4)),
            mpim_p=int(ms.get("p", 20)))


def _build_bare_model(spec: dict) -> SystemModel:
    kind = spec.get("kind")
    if kind == "chain":
        if "zeta" in spec:
            return benchmark_chain(float(spec["zeta"]),
                                   n_dof=int(spec.get("n_dof", 12)),
                                   mass_coeff=float(spec.get("mass", 1.0)),
                                   stiffness_coeff=float(spec.get("stiffness", 100.0)))
        dampers = [(int(d["i"]), None if d.get("j") is None else int(d["j"]),
                    float(d["c"])) for d in spec.get("dampers", [])]
        return build_chain(int(spec["n_dof"]), float(spec.get("mass", 1.0)),
                           float(spec.get("stiffness", 100.0)), dampers)
    if kind == "beam":
        if "supports" in spec:
            supports = [(int(s["node"]), float(s.get("spring", 0.0)),
                         float(s.get("damper", 0.0))) for s in spec["supports"]]
            loads = []
            for ld in spec.get("point_loads", []):
                t_c = float(ld.get("t_c", 0.0))
                f0 = float(ld.get("f0", 0.0))
                from .model import step_function
                loads.append((int(ld["node"]), float(ld.get("direction", 1.0)),
                              step_function(t_c, f0)))
            return build_beam(float(spec["length"]), float(spec["ei"]),
                              float(spec["total_mass"]), int(spec["n_elements"]),
                              supports=supports, point_loads=loads)
        return benchmark_beam(zeta_a=float(spec.get("zeta_a", 0.5)),
                              zeta_b=float(spec.get("zeta_b", 0.5)),
                              n_elements=int(spec.get("n_elements", 24)),
                              length=float(spec.get("length", 3.0)),
                              bending_stiffness=float(spec.get("ei", 437.5e3)),
                              total_mass=float(spec.get("total_mass", 235.5)))
    if kind == "matrices":
        return SystemModel(np.array(spec["mass"], dtype=float),
                           np.array(spec["damping"], dtype=float),
                           np.array(spec["stiffness"], dtype=float))
    raise ConfigError(f"unknown model kind {kind!r}")


def _build_force(spec: dict, n_dof: int):
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return None
    if kind == "constant-step":
        return constant_step_force(n_dof, int(spec["dof"]),
                                   float(spec.get("t_c", 0.0)), float(spec["f0"]))
    if kind == "gaussian-multiharmonic":
        comps = [(float(c["a"]), float(c["omega"])) for c in spec["components"]]
        return gaussian_multiharmonic_force(n_dof, int(spec["dof"]),
                                            float(spec["t0"]), float(spec["s"]),
                                            comps)
    raise ConfigError(f"unknown force kind {kind!r}")


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh))


def dump_config(config: RunConfig, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands

def _summary(model, config: RunConfig, traj) -> dict:
    pc = config.per_config()
    factors = per.compute_b_factors(model, pc)
    try:
        bound = analysis.dt_bound(model, pc.m_b).dt_max
    except ValueError:
        bound = float("nan")
    return {
        "rho_beta_b": factors.rho_beta_b,
        "dt_max_bound": bound,
        "diverged": traj.diverged,
        "power_iteration_seed": POWER_ITERATION_SEED,
    }


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    model = config.build_model()
    out = args.out or config.out
    if out is None:
        raise ConfigError("no output path: pass --out or set 'out' in the config")
    method = config.method_name()
    traj = bench.run_method(model, method, config.dt, config.t_max,
                            per_config=config.per_config(),
                            params=config.integrator_params())
    n = model.n_dof
    header = (["t"] + [f"u_{i+1}" for i in range(n)]
              + [f"v_{i+1}" for i in range(n)])
    rows = [[traj.times[k], *traj.displacements[k], *traj.velocities[k]]
            for k in range(len(traj.times))]
    write_csv(out, header, rows)
    for key, val in _summary(model, config, traj).items():
        print(f"{key}: {val}")
    return EXIT_DIVERGENCE if traj.diverged else 0


def cmd_stability_map(args) -> int:
    record = analysis.sdof_stability_map(args.zeta, args.ma, r_a=args.ra,
                                         p=args.p, grid_max=args.grid_max,
                                         grid_step=args.grid_step)
    write_csv(args.out, ["dt0_over_T", "max_abs_lambda"],
              [list(row) for row in record.grid])
    for lo, hi in record.boundaries:
        print(f"stable: {lo:.4f} < dt0/T < {hi:.4f}")
    return 0


def cmd_tau_limit(args) -> int:
    orders = _parse_int_list(args.m)
    rows = []
    for m in orders:
        tl = analysis.tau_limit(m)
        rows.append([m, tl, tl / (2.0 * np.pi)])
        print(f"m={m}: tau_limit={tl:.5f}  tau_limit/2pi={tl / (2 * np.pi):.5f}")
    if args.out:
        write_csv(args.out, ["m", "tau_limit", "tau_limit_over_2pi"], rows)
    if args.curve_out:
        curve = []
        taus = np.arange(0.0, args.curve_max + 0.5 * args.curve_step,
                         args.curve_step)
        for m in orders:
            for tau in taus:
                res = analysis.sigma_eigenvalues(m, float(tau))
                curve.append([m, tau, abs(res.mu1), abs(res.mu2)])
        write_csv(args.curve_out, ["m", "tau", "abs_mu1", "abs_mu2"], curve)
    return 0


def cmd_sweep_dt(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    model = config.build_model()
    dts = _parse_float_list(args.dts)
    rows = bench.sweep_dt(model, config.method_name(), dts, config.t_max,
                          args.dof, per_config=config.per_config(),
                          params=config.integrator_params(),
                          refine=int(config.reference.get("refine", 500)))
    write_csv(args.out, ["dt", "dt_over_T", "e_disp", "e_vel", "diverged"],
              [[r.dt, r.dt_over_t, r.e_disp, r.e_vel, r.diverged] for r in rows])
    return 0


def cmd_sweep_damping(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    model = config.build_model()
    zetas = _parse_float_list(args.zetas)
    rows = bench.sweep_damping(model, zetas, config.dt, config.t_max, args.dof,
                               method=config.method_name(),
                               per_config=config.per_config(),
                               params=config.integrator_params(),
                               refine=int(config.reference.get("refine", 500)))
    write_csv(args.out,
              ["zeta", "damping_level", "e_disp", "e_vel", "rho_beta_b", "diverged"],
              [[r.dt_over_t, r.extra["damping_level"], r.e_disp, r.e_vel,
                r.extra["rho_beta_b"], r.diverged] for r in rows])
    return 0


def cmd_cost_model(args) -> int:
    steps = args.steps
    if args.method == "per":
        cm = bench.cost_per(args.n, p=args.p, m_a=args.ma, m_b=args.mb,
                            r_a=args.ra, r_b=args.rb, steps=steps)
    elif args.method == "mpim":
        cm = bench.cost_mpim(args.n, p=args.p, g=args.g, steps=steps)
    elif args.method == "rk4":
        cm = bench.cost_rk4(args.n, steps=steps)
    else:
        raise ConfigError(f"cost model not defined for method {args.method!r}")
    print(f"method={cm.method} N={args.n} n3={cm.n3_coeff} n2={cm.n2_coeff} "
          f"n1={cm.n1_coeff} total={cm.total_ops}")
    if args.out:
        write_csv(args.out,
                  ["method", "N", "n3_coeff", "n2_coeff", "n1_coeff", "total_ops"],
                  [[cm.method, args.n, cm.n3_coeff, cm.n2_coeff, cm.n1_coeff,
                    cm.total_ops]])
    return 0


def cmd_compare(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, args)
    model = config.build_model()
    methods = args.methods.split(",") if args.methods else list(bench.METHODS)
    ref = bench.reference_solution(model, config.dt, config.t_max,
                                   refine=int(config.reference.get("refine", 500)))
    rows = []
    for method in methods:
        method = method.strip()
        try:
            traj = bench.run_method(model, method, config.dt, config.t_max,
                                    per_config=config.per_config(),
                                    params=config.integrator_params())
        except DivergenceError:
            traj = None
        if traj is None or traj.diverged or len(traj.times) != len(ref.times):
            rows.append([method, float("nan"), float("nan"), True])
            continue
        rep = bench.global_error(traj, ref, args.dof)
        rows.append([method, rep.e_disp, rep.e_vel, False])
    write_csv(args.out, ["method", "e_disp", "e_vel", "diverged"], rows)
    return 0


def _apply_overrides(config: RunConfig, args) -> None:
    if getattr(args, "method", None):
        config.method_spec["name"] = args.method
    if getattr(args, "dt", None) is not None:
        config.dt = args.dt
    if getattr(args, "t_max", None) is not None:
        config.t_max = args.t_max
    for flag in ("mb", "rb", "ma", "ra", "p", "g"):
        val = getattr(args, flag, None)
        if val is not None:
            config.method_spec[flag] = val
    if config.t_max < config.dt:
        raise ConfigError("t_max must be at least one time step")


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _add_override_flags(sub):
    sub.add_argument("--method", help="integrator name override")
    sub.add_argument("--dt", type=float, help="time step override")
    sub.add_argument("--t-max", dest="t_max", type=float, help="end time override")
    sub.add_argument("--mb", type=int, help="series truncation for the forcing factors")
    sub.add_argument("--rb", type=int, help="Neumann truncation for the forcing factors")
    sub.add_argument("--ma", type=int, help="series truncation for the transition matrix")
    sub.add_argument("--ra", type=int, help="Neumann truncation for the transition matrix")
    sub.add_argument("--p", type=int, help="number of step halvings")
    sub.add_argument("--g", type=int, help="Gauss points (mpim)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perdyn",
        description="Transient structural dynamics toolkit: perturbation "
                    "integrator, stability analysis and benchmarks")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="integrate one configuration, emit a trajectory CSV")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", help="CSV output path (overrides config)")
    _add_override_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    smap = subs.add_parser("stability-map", help="single-dof stability map of a(dt0)")
    smap.add_argument("--zeta", type=float, required=True)
    smap.add_argument("--ma", type=int, required=True)
    smap.add_argument("--ra", type=int, default=2)
    smap.add_argument("--p", type=int, default=20)
    smap.add_argument("--grid-max", dest="grid_max", type=float, default=0.9)
    smap.add_argument("--grid-step", dest="grid_step", type=float, default=2e-3)
    smap.add_argument("--out", required=True)
    smap.set_defaults(func=cmd_stability_map)

    tl = subs.add_parser("tau-limit", help="admissible nondimensional step limits")
    tl.add_argument("--m", required=True, help="comma-separated even truncation orders")
    tl.add_argument("--out")
    tl.add_argument("--curve-out", dest="curve_out",
                    help="also emit the eigenvalue-modulus curves (m, tau, |mu1|, |mu2|)")
    tl.add_argument("--curve-max", dest="curve_max", type=float, default=12.0)
    tl.add_argument("--curve-step", dest="curve_step", type=float, default=0.05)
    tl.set_defaults(func=cmd_tau_limit)

    swd = subs.add_parser("sweep-dt", help="global error vs time step")
    swd.add_argument("--config", required=True)
    swd.add_argument("--dts", required=True, help="comma-separated time steps")
    swd.add_argument("--dof", type=int, default=0)
    swd.add_argument("--out", required=True)
    _add_override_flags(swd)
    swd.set_defaults(func=cmd_sweep_dt)

    swz = subs.add_parser("sweep-damping", help="global error vs damping scale")
    swz.add_argument("--config", required=True)
    swz.add_argument("--zetas", required=True, help="comma-separated damping scales")
    swz.add_argument("--dof", type=int, default=0)
    swz.add_argument("--out", required=True)
    _add_override_flags(swz)
    swz.set_defaults(func=cmd_sweep_damping)

    cost = subs.add_parser("cost-model", help="operation-count polynomials")
    cost.add_argument("--method", choices=["per", "mpim", "rk4"], required=True)
    cost.add_argument("--n", type=int, default=1)
    cost.add_argument("--steps", type=int, default=0)
    cost.add_argument("--p", type=int, default=20)
    cost.add_argument("--ma", type=int, default=2)
    cost.add_argument("--mb", type=int, default=4)
    cost.add_argument("--ra", type=int, default=2)
    cost.add_argument("--rb", type=int, default=2)
    cost.add_argument("--g", type=int, default=4)
    cost.add_argument("--out")
    cost.set_defaults(func=cmd_cost_model)

    cmp_ = subs.add_parser("compare", help="run several methods, joined error CSV")
    cmp_.add_argument("--config", required=True)
    cmp_.add_argument("--methods", help="comma-separated subset (default: all)")
    cmp_.add_argument("--dof", type=int, default=0)
    cmp_.add_argument("--out", required=True)
    _add_override_flags(cmp_)
    cmp_.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())

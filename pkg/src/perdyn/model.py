"""Linear second-order system definitions and builders.

Covers the problem data M u'' + C u' + K u = f(t) with initial state
(u0, v0): discrete spring-mass chains, an Euler-Bernoulli cantilever
beam discretized with cubic Hermite elements, modal analysis, and a
scalar damping-level metric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import eigh

ForceFunction = Callable[[float], np.ndarray]

_SYM_RTOL = 1e-12
_PSD_RTOL = 1e-10


def _check_symmetric(mat, name):
    dev = np.abs(mat - mat.T).max()
    scale = max(np.abs(mat).max(), 1.0)
    if dev > _SYM_RTOL * scale:
        raise ValueError(f"{name} matrix is not symmetric (deviation {dev:.3e})")


def _as_square(mat, name):
    arr = np.array(mat, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} matrix must be square, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SystemModel:
    """A linear structural system: mass, damping and stiffness matrices,
    the external force function and the initial state.

    mass must be symmetric positive definite; damping and stiffness
    symmetric positive semidefinite.  ``force`` maps time (s) to an
    N-vector of nodal forces (N); None means no external forcing.
    """

    mass: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray
    force: ForceFunction | None = None
    u0: np.ndarray = None
    v0: np.ndarray = None

    def __post_init__(self):
        mass = _as_square(self.mass, "mass")
        damping = _as_square(self.damping, "damping")
        stiffness = _as_square(self.stiffness, "stiffness")
        n = mass.shape[0]
        if damping.shape[0] != n or stiffness.shape[0] != n:
            raise ValueError("mass, damping and stiffness dimensions disagree")
        _check_symmetric(mass, "mass")
        _check_symmetric(damping, "damping")
        _check_symmetric(stiffness, "stiffness")
        if np.linalg.eigvalsh(mass).min() <= 0.0:
            raise ValueError("mass matrix must be positive definite")
        for mat, name in ((damping, "damping"), (stiffness, "stiffness")):
            floor = -_PSD_RTOL * max(np.abs(mat).max(), 1.0)
            if np.linalg.eigvalsh(mat).min() < floor:
                raise ValueError(f"{name} matrix must be positive semidefinite")
        u0 = np.zeros(n) if self.u0 is None else np.array(self.u0, dtype=float)
        v0 = np.zeros(n) if self.v0 is None else np.array(self.v0, dtype=float)
        if u0.shape != (n,) or v0.shape != (n,):
            raise ValueError("initial state dimensions disagree with the matrices")
        for arr in (mass, damping, stiffness, u0, v0):
            arr.setflags(write=False)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "damping", damping)
        object.__setattr__(self, "stiffness", stiffness)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "v0", v0)

    @property
    def n_dof(self) -> int:
        return self.mass.shape[0]

    def force_at(self, t: float) -> np.ndarray:
        if self.force is None:
            return np.zeros(self.n_dof)
        return np.asarray(self.force(t), dtype=float)

    def with_damping(self, damping) -> "SystemModel":
        """Same system with the damping matrix replaced."""
        return SystemModel(self.mass, damping, self.stiffness,
                           force=self.force, u0=self.u0, v0=self.v0)

    def with_initial_state(self, u0, v0) -> "SystemModel":
        return SystemModel(self.mass, self.damping, self.stiffness,
                           force=self.force, u0=u0, v0=v0)

    def with_force(self, force: ForceFunction | None) -> "SystemModel":
        return SystemModel(self.mass, self.damping, self.stiffness,
                           force=force, u0=self.u0, v0=self.v0)


@dataclass(frozen=True)
class ModalData:
    """Undamped modal quantities: frequencies (rad/s, ascending),
    mass-normalized mode shapes (columns) and the projected damping
    matrix Phi^T C Phi."""

    frequencies: np.ndarray
    mode_shapes: np.ndarray
    modal_damping: np.ndarray

    @property
    def min_period(self) -> float:
        """Shortest natural period 2*pi/omega_max (s)."""
        w_max = self.frequencies[-1]
        if w_max <= 0.0:
            raise ValueError("model has no positive natural frequency")
        return 2.0 * np.pi / w_max


@dataclass(frozen=True)
class StateVector:
    displacement: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        if len(self.displacement) != len(self.velocity):
            raise ValueError("displacement and velocity lengths differ")


DamperSpec = Iterable[tuple[int, int | None, float]]


def build_chain(n_dof: int, mass_coeff: float, stiffness_coeff: float,
                damper_spec: DamperSpec = ()) -> SystemModel:
    """Fixed-base spring-mass chain.

    Every mass is ``mass_coeff`` kg; each of the n_dof springs has
    stiffness ``stiffness_coeff`` N/m, the first one anchoring mass 0 to
    ground.  ``damper_spec`` entries are (i, j, c): a viscous damper of
    coefficient c between dofs i and j, or from dof i to ground when j
    is None.
    """
    if n_dof < 1:
        raise ValueError("n_dof must be >= 1")
    if mass_coeff <= 0.0 or stiffness_coeff <= 0.0:
        raise ValueError("mass and stiffness coefficients must be positive")
    mass = mass_coeff * np.eye(n_dof)
    stiff = np.zeros((n_dof, n_dof))
    for i in range(n_dof):
        stiff[i, i] += stiffness_coeff          # spring below mass i
        if i + 1 < n_dof:
            stiff[i, i] += stiffness_coeff
            stiff[i, i + 1] -= stiffness_coeff
            stiff[i + 1, i] -= stiffness_coeff
    damp = np.zeros((n_dof, n_dof))
    for i, j, c in damper_spec:
        if c < 0.0:
            raise ValueError(f"damper coefficient must be >= 0, got {c}")
        if not 0 <= i < n_dof:
            raise ValueError(f"damper dof {i} out of range")
        if j is None:
            damp[i, i] += c
        else:
            if not 0 <= j < n_dof:
                raise ValueError(f"damper dof {j} out of range")
            damp[i, i] += c
            damp[j, j] += c
            damp[i, j] -= c
            damp[j, i] -= c
    return SystemModel(mass, damp, stiff)


# Damper layout of the 12-dof benchmark chain: a mix of ground and
# inter-mass dampers so the damping matrix is non-proportional.
_CHAIN_GROUND_DAMPERS = (0, 3, 7, 11)
_CHAIN_PAIR_DAMPERS = ((1, 2), (5, 6), (9, 10))


def benchmark_chain(zeta: float, n_dof: int = 12, mass_coeff: float = 1.0,
                    stiffness_coeff: float = 100.0) -> SystemModel:
    """The toolkit's standard lumped-mass benchmark chain.

    All dampers carry the coefficient 2*sqrt(K*M)*zeta, placed on ground
    connections at masses {0, 3, 7, 11} and between mass pairs
    {(1,2), (5,6), (9,10)} (indices clipped to the chain size), giving a
    non-proportional damping matrix that scales linearly with zeta.
    """
    spec: list[tuple[int, int | None, float]] = []
    c = 2.0 * np.sqrt(stiffness_coeff * mass_coeff) * zeta
    for i in _CHAIN_GROUND_DAMPERS:
        if i < n_dof:
            spec.append((i, None, c))
    for i, j in _CHAIN_PAIR_DAMPERS:
        if j < n_dof:
            spec.append((i, j, c))
    return build_chain(n_dof, mass_coeff, stiffness_coeff, spec)


def beam_element_matrices(el_length: float, bending_stiffness: float,
                          mass_per_length: float):
    """4x4 cubic-Hermite element stiffness and consistent mass matrices.

    Dof order per element: (w_i, theta_i, w_j, theta_j).
    """
    h = el_length
    k = bending_stiffness / h**3 * np.array([
        [12.0, 6.0 * h, -12.0, 6.0 * h],
        [6.0 * h, 4.0 * h**2, -6.0 * h, 2.0 * h**2],
        [-12.0, -6.0 * h, 12.0, -6.0 * h],
        [6.0 * h, 2.0 * h**2, -6.0 * h, 4.0 * h**2],
    ])
    m = mass_per_length * h / 420.0 * np.array([
        [156.0, 22.0 * h, 54.0, -13.0 * h],
        [22.0 * h, 4.0 * h**2, 13.0 * h, -3.0 * h**2],
        [54.0, 13.0 * h, 156.0, -22.0 * h],
        [-13.0 * h, -3.0 * h**2, -22.0 * h, 4.0 * h**2],
    ])
    return k, m


def beam_matrices(length: float, bending_stiffness: float, total_mass: float,
                  n_elements: int):
    """Assembled free-free beam matrices (no constraints applied).

    Returns (mass, stiffness) of size 2*(n_elements+1); dof i*2 is the
    transverse deflection of node i, dof i*2+1 its rotation.
    """
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    h = length / n_elements
    rho_a = total_mass / length
    ke, me = beam_element_matrices(h, bending_stiffness, rho_a)
    n_nodes = n_elements + 1
    size = 2 * n_nodes
    stiff = np.zeros((size, size))
    mass = np.zeros((size, size))
    for e in range(n_elements):
        sl = slice(2 * e, 2 * e + 4)
        stiff[sl, sl] += ke
        mass[sl, sl] += me
    return mass, stiff


def build_beam(length: float, bending_stiffness: float, total_mass: float,
               n_elements: int,
               supports: Sequence[tuple[int, float, float]] = (),
               point_loads: Sequence[tuple[int, float, Callable[[float], float]]] = ()
               ) -> SystemModel:
    """Cantilever Euler-Bernoulli beam clamped at node 0.

    Free dofs: deflection + rotation at nodes 1..n_elements, so
    N = 2*n_elements.  ``supports`` entries are (node, spring N/m,
    damper N*s/m) acting on the node's deflection dof; ``point_loads``
    entries are (node, direction, force(t)) with direction a sign
    multiplier (+1 along positive deflection) applied to the deflection
    dof.
    """
    mass_full, stiff_full = beam_matrices(length, bending_stiffness,
                                          total_mass, n_elements)
    free = slice(2, None)  # clamp node 0 (deflection + rotation)
    mass = mass_full[free, free].copy()
    stiff = stiff_full[free, free].copy()
    n = mass.shape[0]
    if n == 0:
        raise ValueError("model is fully constrained")
    damp = np.zeros((n, n))

    def deflection_dof(node):
        if not 1 <= node <= n_elements:
            raise ValueError(f"node {node} out of range (1..{n_elements})")
        return 2 * (node - 1)

    for node, spring, damper in supports:
        i = deflection_dof(node)
        if spring < 0.0 or damper < 0.0:
            raise ValueError("support coefficients must be >= 0")
        stiff[i, i] += spring
        damp[i, i] += damper

    loads = [(deflection_dof(node), float(direction), fn)
             for node, direction, fn in point_loads]
    force = None
    if loads:
        def force(t, _loads=tuple(loads), _n=n):
            out = np.zeros(_n)
            for dof, sign, fn in _loads:
                out[dof] += sign * fn(t)
            return out

    return SystemModel(mass, damp, stiff, force=force)


def benchmark_beam(zeta_a: float = 0.5, zeta_b: float = 0.5,
                   n_elements: int = 24, length: float = 3.0,
                   bending_stiffness: float = 437.5e3,
                   total_mass: float = 235.5,
                   t_c: float = 0.01, f0: float = 1.0e3) -> SystemModel:
    """Cantilever benchmark beam with two sprung/damped supports and a
    step force at the free end.

    Supports sit at the interior third-point nodes with stiffness
    20*EI/l^3 and 10*EI/l^3; damper coefficients are 2*m0*w_r*zeta with
    the reference frequency w_r = sqrt(EI/(m0*l^3)).  The step load
    (0 for t < t_c, f0 after) acts downward at the tip.
    """
    ei = bending_stiffness
    w_r = np.sqrt(ei / (total_mass * length**3))
    k_a = 20.0 * ei / length**3
    k_b = 10.0 * ei / length**3
    c_a = 2.0 * total_mass * w_r * zeta_a
    c_b = 2.0 * total_mass * w_r * zeta_b
    node_a = max(1, round(n_elements / 3))
    node_b = max(1, round(2 * n_elements / 3))
    step = step_function(t_c, f0)
    return build_beam(length, ei, total_mass, n_elements,
                      supports=[(node_a, k_a, c_a), (node_b, k_b, c_b)],
                      point_loads=[(n_elements, -1.0, step)])


def modal_analysis(model: SystemModel) -> ModalData:
    """Solve K phi = w^2 M phi; mass-normalized modes, ascending frequencies."""
    vals, vecs = eigh(model.stiffness, model.mass)
    freqs = np.sqrt(np.clip(vals, 0.0, None))
    modal_damping = vecs.T @ model.damping @ vecs
    return ModalData(frequencies=freqs, mode_shapes=vecs,
                     modal_damping=modal_damping)


def damping_level(model: SystemModel) -> float:
    """Dimensionless damping measure rho(M^-1 C) / rho(sqrt(M^-1 K))."""
    stiff_vals = eigh(model.stiffness, model.mass, eigvals_only=True)
    w_max = np.sqrt(max(stiff_vals.max(), 0.0))
    if w_max == 0.0:
        raise ValueError("stiffness matrix is identically zero")
    damp_vals = eigh(model.damping, model.mass, eigvals_only=True)
    return float(np.abs(damp_vals).max() / w_max)


# ---------------------------------------------------------------------------
# Force builders shared by the library, the tests and the CLI config loader.

def step_function(t_c: float, f0: float) -> Callable[[float], float]:
    """Scalar step: 0 for t < t_c, f0 for t >= t_c."""
    def step(t):
        return f0 if t >= t_c else 0.0
    return step


def constant_step_force(n_dof: int, dof: int, t_c: float, f0: float) -> ForceFunction:
    """Step force f0 applied at a single dof from time t_c on."""
    if not 0 <= dof < n_dof:
        raise ValueError(f"force dof {dof} out of range")
    def force(t):
        out = np.zeros(n_dof)
        if t >= t_c:
            out[dof] = f0
        return out
    return force


def gaussian_multiharmonic_force(n_dof: int, dof: int, t0: float, s: float,
                                 components: Sequence[tuple[float, float]]) -> ForceFunction:
    """Sum of harmonics weighted by a Gaussian envelope at a single dof:

        exp(-(t - t0)^2 / (2 s^2)) * sum_i a_i sin(w_i t)
    """
    if not 0 <= dof < n_dof:
        raise ValueError(f"force dof {dof} out of range")
    if s <= 0.0:
        raise ValueError("Gaussian width s must be positive")
    comps = tuple((float(a), float(w)) for a, w in components)
    def force(t):
        out = np.zeros(n_dof)
        env = np.exp(-(t - t0) ** 2 / (2.0 * s * s))
        out[dof] = env * sum(a * np.sin(w * t) for a, w in comps)
        return out
    return force

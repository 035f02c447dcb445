"""Domain types, uniform grids, discrete invariants, and DFT helpers.

Everything downstream (spectral and finite-element operators, the time
steppers, and the experiment runners) builds on the types defined here.
States are stored as a single complex vector; the finite-element code views
the same data as interleaved real/imaginary pairs via :func:`as_real_pairs`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

PERIODIC = "periodic"
NATURAL = "natural"
BOUNDARY_KINDS = (PERIODIC, NATURAL)


class ConfigurationError(ValueError):
    """Invalid problem, grid, or experiment configuration."""


class DimensionMismatchError(ValueError):
    """Vector length does not match the grid it is used with."""


class UnsupportedBoundaryError(ValueError):
    """Operation requires the other boundary variant."""


class NumericalFailureError(RuntimeError):
    """Non-finite state or failed linear algebra during a run."""


@dataclass(frozen=True)
class Tolerances:
    """Fixed numerical tolerances, one source of truth for code and tests."""

    dft_roundtrip: float = 1e-13
    linearity: float = 1e-12
    gradient_fd: float = 1e-6
    stage_residual: float = 1e-11
    conservation: float = 1e-12
    tableau_order: float = 1e-12
    boundary_decay: float = 1e-14


DEFAULT_TOLERANCES = Tolerances()


def exact_sum(values) -> float:
    """Exactly rounded float sum (math.fsum).

    Invariant drifts are asserted near machine precision, so plain pairwise
    summation noise would dominate the quantities being measured.
    """
    if isinstance(values, np.ndarray):
        values = values.tolist()
    return math.fsum(values)


def exact_dot(x: np.ndarray, y: np.ndarray) -> float:
    """Exactly rounded dot product of two real vectors."""
    return math.fsum((np.asarray(x) * np.asarray(y)).tolist())


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D grid.

    Periodic grids exclude the duplicate right endpoint, so ``dx = L/m``;
    natural-boundary grids include both endpoints, ``dx = L/(m-1)``.
    """

    m: int
    nodes: np.ndarray
    dx: float
    bc: str = PERIODIC

    @property
    def length(self) -> float:
        if self.bc == PERIODIC:
            return self.dx * self.m
        return self.dx * (self.m - 1)

    @property
    def x_left(self) -> float:
        return float(self.nodes[0])


def make_grid(x_left: float, x_right: float, m: int, bc: str = PERIODIC) -> Grid:
    """Build a uniform grid on [x_left, x_right] for the given boundary kind."""
    if m < 4:
        raise ConfigurationError(f"grid needs at least 4 points, got m={m}")
    if not x_left < x_right:
        raise ConfigurationError(f"degenerate domain [{x_left}, {x_right}]")
    if bc not in BOUNDARY_KINDS:
        raise ConfigurationError(f"unknown boundary kind {bc!r}")
    length = x_right - x_left
    if bc == PERIODIC:
        dx = length / m
        nodes = x_left + dx * np.arange(m)
    else:
        dx = length / (m - 1)
        nodes = np.linspace(x_left, x_right, m)
    nodes.setflags(write=False)
    return Grid(m=m, nodes=nodes, dx=dx, bc=bc)


@dataclass(frozen=True)
class Problem:
    """Continuous problem instance: i*u_t + a_coef*u_xx scaled dynamics.

    The evolution solved throughout is u_t = i*a*u_xx + i*b*|u|^2*u.  The
    classic focusing equation has a = 1 and b > 0; the semiclassical scaling
    uses a = eps/2 with b the nonlinear coefficient after dividing through
    by eps (see :func:`nlslab.oracles.semiclassical_problem`).
    """

    x_left: float
    x_right: float
    a: float
    b: float
    ic: str
    bc: str = PERIODIC
    ic_params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if not self.x_left < self.x_right:
            raise ConfigurationError(
                f"degenerate domain [{self.x_left}, {self.x_right}]"
            )
        if self.bc not in BOUNDARY_KINDS:
            raise ConfigurationError(f"unknown boundary kind {self.bc!r}")

    def grid(self, m: int) -> Grid:
        return make_grid(self.x_left, self.x_right, m, self.bc)


@dataclass
class GridState:
    """Spatial grid, complex solution vector, and current time."""

    grid: Grid
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.complex128)
        if self.u.ndim != 1 or self.u.shape[0] != self.grid.m:
            raise DimensionMismatchError(
                f"state has {self.u.shape} entries for a grid of m={self.grid.m}"
            )
        if not np.all(np.isfinite(self.u.view(np.float64))):
            raise NumericalFailureError("state contains NaN or Inf entries")

    def with_u(self, u: np.ndarray, t: float | None = None) -> "GridState":
        return GridState(self.grid, u, self.t if t is None else t)


def as_real_pairs(u: np.ndarray) -> np.ndarray:
    """Complex vector -> interleaved [v1, w1, v2, w2, ...] real vector."""
    u = np.asarray(u, dtype=np.complex128)
    out = np.empty(2 * u.shape[0])
    out[0::2] = u.real
    out[1::2] = u.imag
    return out


def from_real_pairs(z: np.ndarray) -> np.ndarray:
    """Inverse of :func:`as_real_pairs` (lossless)."""
    z = np.asarray(z, dtype=np.float64)
    return z[0::2] + 1j * z[1::2]


def dft_forward(u: np.ndarray) -> np.ndarray:
    """Forward DFT.  Unnormalized; pairs with :func:`dft_inverse`."""
    u = np.asarray(u)
    if u.ndim != 1 or u.shape[0] == 0:
        raise DimensionMismatchError("DFT input must be a nonempty 1-D vector")
    return np.fft.fft(u)


def dft_inverse(uhat: np.ndarray) -> np.ndarray:
    """Inverse DFT; ``dft_inverse(dft_forward(u)) == u`` to rounding."""
    uhat = np.asarray(uhat)
    if uhat.ndim != 1 or uhat.shape[0] == 0:
        raise DimensionMismatchError("DFT input must be a nonempty 1-D vector")
    return np.fft.ifft(uhat)


def discrete_mass(s: GridState) -> float:
    """dx * sum_j |u_j|^2."""
    u = s.u
    return s.grid.dx * exact_sum(u.real**2 + u.imag**2)


def _forward_differences(u: np.ndarray, bc: str) -> np.ndarray:
    """u_{j+1} - u_j, wrapping for periodic grids, stopping at m-1 otherwise."""
    if bc == PERIODIC:
        d = np.empty_like(u)
        d[:-1] = u[1:] - u[:-1]
        d[-1] = u[0] - u[-1]
        return d
    return u[1:] - u[:-1]


def discrete_energy(s: GridState, beta: float, a: float = 1.0) -> float:
    """dx * sum_j ( a*|(u_{j+1}-u_j)/dx|^2 - (beta/2)*|u_j|^4 ).

    The difference quotient wraps around for periodic grids and stops at
    node m-1 for natural boundaries.  ``a`` generalizes the gradient-term
    weight for rescaled problems; the classic equation has a = 1.
    """
    u = s.u
    dx = s.grid.dx
    d = _forward_differences(u, s.grid.bc)
    grad_terms = (a / dx**2) * (d.real**2 + d.imag**2)
    quart_terms = -(beta / 2.0) * (u.real**2 + u.imag**2) ** 2
    return dx * exact_sum(np.concatenate([grad_terms, quart_terms]))


@dataclass(frozen=True)
class InvariantFunctional:
    """A conserved functional with its gradient in the real-pairs view.

    ``gradient`` returns a vector of length 2m ordered like
    :func:`as_real_pairs`, consistent with central finite differences of
    ``evaluate``.
    """

    kind: str
    evaluate: Callable[[GridState], float]
    gradient: Callable[[GridState], np.ndarray]


def mass_functional() -> InvariantFunctional:
    """Discrete mass and its gradient 2*dx*[v1, w1, ...]."""

    def _grad(s: GridState) -> np.ndarray:
        return 2.0 * s.grid.dx * as_real_pairs(s.u)

    return InvariantFunctional("mass", discrete_mass, _grad)


def _second_difference(v: np.ndarray, bc: str) -> np.ndarray:
    """v_{j-1} - 2 v_j + v_{j+1} with the boundary rows matching the
    quadratic form of :func:`discrete_energy` (one-sided at natural ends)."""
    if bc == PERIODIC:
        return np.roll(v, 1) - 2.0 * v + np.roll(v, -1)
    out = np.empty_like(v)
    out[1:-1] = v[:-2] - 2.0 * v[1:-1] + v[2:]
    out[0] = v[1] - v[0]
    out[-1] = v[-2] - v[-1]
    return out


def energy_functional(beta: float, a: float = 1.0) -> InvariantFunctional:
    """Discrete energy matching :func:`discrete_energy` with its gradient."""

    def _eval(s: GridState) -> float:
        return discrete_energy(s, beta, a)

    def _grad(s: GridState) -> np.ndarray:
        v = s.u.real
        w = s.u.imag
        dx = s.grid.dx
        mod2 = v**2 + w**2
        gv = -(2.0 * a / dx) * _second_difference(v, s.grid.bc) - 2.0 * beta * dx * mod2 * v
        gw = -(2.0 * a / dx) * _second_difference(w, s.grid.bc) - 2.0 * beta * dx * mod2 * w
        out = np.empty(2 * s.grid.m)
        out[0::2] = gv
        out[1::2] = gw
        return out

    return InvariantFunctional("energy", _eval, _grad)


def gradient_finite_difference(
    functional: InvariantFunctional, s: GridState, step: float = 1e-7
) -> np.ndarray:
    """Central-difference gradient of ``functional.evaluate``, for checks."""
    z = as_real_pairs(s.u)
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        zp = z.copy()
        zp[i] += step
        zm = z.copy()
        zm[i] -= step
        fp = functional.evaluate(s.with_u(from_real_pairs(zp)))
        fm = functional.evaluate(s.with_u(from_real_pairs(zm)))
        out[i] = (fp - fm) / (2.0 * step)
    return out


# Per-step run logging shared by every integrator: the harness serializes
# these records, and the acceptance checks read the summaries.

ACCEPTED = "accepted"
EPS_REJECTED = "eps-rejected"
CONSERVATION_REJECTED = "conservation-rejected"


@dataclass(frozen=True)
class StepRow:
    t: float
    dt: float
    eps: float | None
    gamma_total: float
    residual: float | None
    disposition: str


@dataclass
class RunRecord:
    """Per-step log plus final-state diagnostics for one integration run."""

    steps: list[StepRow] = field(default_factory=list)
    final_t: float = 0.0
    final_error: float | None = None
    max_mass_drift: float | None = None
    max_energy_drift: float | None = None
    runtime_seconds: float = 0.0
    accepted: int = 0
    eps_rejections: int = 0
    conservation_rejections: int = 0
    warnings: list[str] = field(default_factory=list)

    def log(self, row: StepRow) -> None:
        self.steps.append(row)
        if row.disposition == ACCEPTED:
            self.accepted += 1
        elif row.disposition == EPS_REJECTED:
            self.eps_rejections += 1
        elif row.disposition == CONSERVATION_REJECTED:
            self.conservation_rejections += 1

    def summary(self) -> dict:
        return {
            "final_t": self.final_t,
            "final_error": self.final_error,
            "max_mass_drift": self.max_mass_drift,
            "max_energy_drift": self.max_energy_drift,
            "runtime_seconds": self.runtime_seconds,
            "accepted": self.accepted,
            "eps_rejections": self.eps_rejections,
            "conservation_rejections": self.conservation_rejections,
            "warnings": list(self.warnings),
        }


class InvariantTracker:
    """Tracks max drift of a set of invariants against their initial values."""

    def __init__(self, functionals: list[InvariantFunctional], s0: GridState):
        self.functionals = functionals
        self.initial = [f.evaluate(s0) for f in functionals]
        self.max_drift = [0.0 for _ in functionals]

    def update(self, s: GridState) -> float:
        worst = 0.0
        for i, f in enumerate(self.functionals):
            drift = abs(f.evaluate(s) - self.initial[i])
            if drift > self.max_drift[i]:
                self.max_drift[i] = drift
            worst = max(worst, drift)
        return worst

    def drift_by_kind(self) -> dict[str, float]:
        return {f.kind: d for f, d in zip(self.functionals, self.max_drift)}

"""Conservative finite-element semi-discretization over real solution pairs.

The state is viewed as interleaved real/imaginary pairs [v1, w1, v2, w2, ...].
The stiff term is -(a/dx^2) * Itilde^{-1} S with S block tridiagonal, every
block an integer multiple of the rotation block [[0, 1], [-1, 0]]; S is
exactly skew-symmetric, which is what makes the semi-discretization conserve
the discrete mass and energy simultaneously.

Two boundary variants exist.  The natural variant carries trapezoid weights
(1/2 at the end nodes) in Itilde and in the conserved functionals; the
periodic variant wraps the end rows and has unit weights.  Each variant's
gradients are matched to its own operator so the semi-discrete conservation
identities hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .core import (
    NATURAL,
    PERIODIC,
    ConfigurationError,
    DimensionMismatchError,
    GridState,
    InvariantFunctional,
    NumericalFailureError,
    as_real_pairs,
    discrete_energy,
    discrete_mass,
    energy_functional,
    exact_dot,
    exact_sum,
    from_real_pairs,
    mass_functional,
)

_ROTATION = np.array([[0, 1], [-1, 0]], dtype=np.int64)


def _second_difference_stencil(m: int, bc: str) -> sp.csr_matrix:
    main = -2 * np.ones(m, dtype=np.int64)
    if bc == NATURAL:
        main[0] = main[-1] = -1
    L = sp.diags(
        [np.ones(m - 1, dtype=np.int64), main, np.ones(m - 1, dtype=np.int64)],
        offsets=[-1, 0, 1],
        format="lil",
        dtype=np.int64,
    )
    if bc == PERIODIC:
        L[0, m - 1] = 1
        L[m - 1, 0] = 1
    return L.tocsr()


@dataclass
class FemOperator:
    """Assembled finite-element operator for one (m, dx, bc, beta, a)."""

    m: int
    dx: float
    bc: str
    beta: float
    a: float
    s_matrix: sp.csr_matrix
    itilde: np.ndarray
    factorization_count: int = 0

    def rhs_pairs(self, z: np.ndarray) -> np.ndarray:
        """Semi-discrete right-hand side in the real-pairs view."""
        if z.shape[0] != 2 * self.m:
            raise DimensionMismatchError(
                f"pairs vector of length {z.shape[0]} for m={self.m}"
            )
        out = -(self.a / self.dx**2) * (self.s_matrix @ z) / self.itilde
        v = z[0::2]
        w = z[1::2]
        mod2 = v**2 + w**2
        out[0::2] -= self.beta * mod2 * w
        out[1::2] += self.beta * mod2 * v
        return out


def assemble(m: int, dx: float, bc: str, beta: float, a: float = 1.0) -> FemOperator:
    """Build the block matrices for the chosen boundary variant."""
    if m < 4:
        raise ConfigurationError(f"FEM operator needs at least 4 nodes, got m={m}")
    if dx <= 0:
        raise ConfigurationError(f"dx must be positive, got {dx}")
    if bc not in (PERIODIC, NATURAL):
        raise ConfigurationError(f"unknown boundary kind {bc!r}")
    L = _second_difference_stencil(m, bc)
    s_matrix = sp.kron(L, sp.csr_matrix(_ROTATION), format="csr")
    weights = np.ones(2 * m)
    if bc == NATURAL:
        weights[0] = weights[1] = 0.5
        weights[-2] = weights[-1] = 0.5
    return FemOperator(m=m, dx=dx, bc=bc, beta=beta, a=a, s_matrix=s_matrix, itilde=weights)


def fem_rhs(op: FemOperator, s: GridState) -> np.ndarray:
    """Right-hand side of the semi-discretization, length 2m."""
    return op.rhs_pairs(as_real_pairs(s.u))


@dataclass
class StageFactorization:
    """Factored shifted system (Itilde + (mu*a/dx^2) S), reusable across stages."""

    op: FemOperator
    mu: float
    lu: object | None  # SuperLU; None for the mu = 0 identity shortcut


def stage_factorize(op: FemOperator, mu: float) -> StageFactorization:
    """Factor (Itilde + (mu*a/dx^2) S) once; stages with equal mu reuse it."""
    if mu < 0:
        raise ConfigurationError(f"stage coefficient mu must be nonnegative, got {mu}")
    if mu == 0.0:
        return StageFactorization(op, 0.0, None)
    shifted = sp.diags(op.itilde) + (mu * op.a / op.dx**2) * op.s_matrix
    try:
        lu = splu(shifted.tocsc())
    except RuntimeError as exc:
        raise NumericalFailureError(f"stage factorization failed: {exc}") from exc
    op.factorization_count += 1
    return StageFactorization(op, mu, lu)


def stage_solve(fac: StageFactorization, rhs: np.ndarray) -> np.ndarray:
    """g solving (Itilde + (mu*a/dx^2) S) g = Itilde * rhs."""
    if rhs.shape[0] != 2 * fac.op.m:
        raise DimensionMismatchError(
            f"pairs vector of length {rhs.shape[0]} for m={fac.op.m}"
        )
    if fac.lu is None:
        return rhs.copy()
    return fac.lu.solve(fac.op.itilde * rhs)


def grad_mass(op: FemOperator, s: GridState) -> np.ndarray:
    """Gradient of the conserved mass matched to this operator's variant."""
    z = as_real_pairs(s.u)
    return 2.0 * op.dx * op.itilde * z


def grad_energy(op: FemOperator, s: GridState) -> np.ndarray:
    """Gradient of the conserved energy matched to this operator's variant."""
    z = as_real_pairs(s.u)
    v = z[0::2]
    w = z[1::2]
    m = op.m
    out = np.empty(2 * m)
    if op.bc == PERIODIC:
        lap_v = np.roll(v, 1) - 2.0 * v + np.roll(v, -1)
        lap_w = np.roll(w, 1) - 2.0 * w + np.roll(w, -1)
    else:
        lap_v = np.empty(m)
        lap_w = np.empty(m)
        lap_v[1:-1] = v[:-2] - 2.0 * v[1:-1] + v[2:]
        lap_w[1:-1] = w[:-2] - 2.0 * w[1:-1] + w[2:]
        lap_v[0] = v[1] - v[0]
        lap_w[0] = w[1] - w[0]
        lap_v[-1] = v[-2] - v[-1]
        lap_w[-1] = w[-2] - w[-1]
    mod2 = v**2 + w**2
    node_weights = op.itilde[0::2]
    out[0::2] = -(2.0 * op.a / op.dx) * lap_v - 2.0 * op.beta * op.dx * node_weights * mod2 * v
    out[1::2] = -(2.0 * op.a / op.dx) * lap_w - 2.0 * op.beta * op.dx * node_weights * mod2 * w
    return out


def conserved_mass(op: FemOperator, s: GridState) -> float:
    """Discrete mass conserved by this operator (trapezoid-weighted if natural)."""
    if op.bc == PERIODIC:
        return discrete_mass(s)
    u = s.u
    w = op.itilde[0::2]
    return op.dx * exact_sum(w * (u.real**2 + u.imag**2))


def conserved_energy(op: FemOperator, s: GridState) -> float:
    """Discrete energy conserved by this operator."""
    if op.bc == PERIODIC:
        return discrete_energy(s, op.beta, op.a)
    u = s.u
    d = u[1:] - u[:-1]
    w = op.itilde[0::2]
    grad_terms = (op.a / op.dx**2) * (d.real**2 + d.imag**2)
    quart_terms = -(op.beta / 2.0) * w * (u.real**2 + u.imag**2) ** 2
    return op.dx * exact_sum(np.concatenate([grad_terms, quart_terms]))


def conserved_functionals(op: FemOperator) -> tuple[InvariantFunctional, InvariantFunctional]:
    """(mass, energy) functionals whose gradients match this operator.

    These are the pair relaxation enforces; on the periodic variant they
    coincide with the plain forms in :mod:`nlslab.core`.
    """
    if op.bc == PERIODIC:
        return mass_functional(), energy_functional(op.beta, op.a)
    mass = InvariantFunctional(
        "mass", lambda s: conserved_mass(op, s), lambda s: grad_mass(op, s)
    )
    energy = InvariantFunctional(
        "energy", lambda s: conserved_energy(op, s), lambda s: grad_energy(op, s)
    )
    return mass, energy


def invariant_drift_rate(op: FemOperator, s: GridState) -> tuple[float, float]:
    """Instantaneous (d mass/dt, d energy/dt) along the semi-discrete flow.

    Both vanish to rounding for any state: the mass rate by skew-symmetry of
    S, the energy rate by the discrete product structure of the gradient.
    """
    f = fem_rhs(op, s)
    return exact_dot(grad_mass(op, s), f), exact_dot(grad_energy(op, s), f)


class FemStiffPart:
    """Adapter exposing the stiff FEM term to the ImEx stepper.

    Keeps a small cache of stage factorizations keyed by the shift mu, so an
    ESDIRK step performs one factorization per distinct time step size.
    """

    def __init__(self, op: FemOperator, cache_size: int = 8):
        self.op = op
        self._cache: dict[float, StageFactorization] = {}
        self._cache_size = cache_size

    def _factorization(self, mu: float) -> StageFactorization:
        fac = self._cache.get(mu)
        if fac is None:
            fac = stage_factorize(self.op, mu)
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[mu] = fac
        return fac

    def apply(self, u: np.ndarray) -> np.ndarray:
        z = as_real_pairs(u)
        out = -(self.op.a / self.op.dx**2) * (self.op.s_matrix @ z) / self.op.itilde
        return from_real_pairs(out)

    def solve(self, rhs: np.ndarray, mu: float) -> np.ndarray:
        return from_real_pairs(stage_solve(self._factorization(mu), as_real_pairs(rhs)))


def fem_parts(op: FemOperator):
    """(stiff, explicit nonlinear) pair for ImEx stepping, complex view.

    In the complex view the nonlinear FEM term coincides with the pointwise
    cubic i*beta*|u|^2*u, since the rotation block acts as multiplication
    by -i.
    """

    def nonstiff(u: np.ndarray) -> np.ndarray:
        return 1j * op.beta * (u.real**2 + u.imag**2) * u

    return FemStiffPart(op), nonstiff

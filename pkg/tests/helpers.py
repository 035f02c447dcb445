"""Shared independent oracles for the test suite."""

from nlslab.oracles import soliton_beta, soliton_exact


def pde_residual(n: int, x: float, t: float, h: float = 1e-4) -> float:
    """|i u_t + u_xx + beta |u|^2 u| via fourth-order finite differences.

    Independent check that the closed-form soliton expressions solve the
    equation; this is the transcription oracle for the long three-soliton
    formula, where a single mistyped exponent would otherwise be invisible.
    """
    beta = soliton_beta(n)
    u = soliton_exact(n, x, t)
    ut = (
        -soliton_exact(n, x, t + 2 * h)
        + 8 * soliton_exact(n, x, t + h)
        - 8 * soliton_exact(n, x, t - h)
        + soliton_exact(n, x, t - 2 * h)
    ) / (12 * h)
    uxx = (
        -soliton_exact(n, x + 2 * h, t)
        + 16 * soliton_exact(n, x + h, t)
        - 30 * u
        + 16 * soliton_exact(n, x - h, t)
        - soliton_exact(n, x - 2 * h, t)
    ) / (12 * h**2)
    return abs(1j * ut + uxx + beta * abs(u) ** 2 * u)

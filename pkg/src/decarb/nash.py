"""Feedback equilibrium of the two-firm game without incentive payments.

Each firm controls the drift of its own state (dX = a1 dt + sigma1 dW1,
dY = a2 dt + sigma2 dW2) and has CARA utility over an accumulated flow.  The
value functions are exponential-quadratic,

    V1 = -exp(eta1 * W1(t,x,y)),   V2 = -exp(eta2 * W2(t,x,y)),

with W1 = 0.5*A x^2 + 0.5*B y^2 + C xy + D x + E y + F and W2 built from the
mirrored coefficients At..Ft.  Matching powers of (x, y) in the two
Hamilton-Jacobi-Bellman equations turns each PDE into six coupled scalar ODEs
with zero terminal data:

firm 1 against a deterministic opponent flow a2(t)::

    A' + s1*e1*A^2 + s2*e1*C^2 - 2*p1 - g1*A^2                  = 0
    B' + s1*e1*C^2 + s2*e1*B^2 - g1*C^2                         = 0
    C' + s1*e1*A*C + s2*e1*B*C - p2 - g1*A*C                    = 0
    D' + s1*e1*A*D + s2*e1*C*E + a2*C - g1*A*D                  = 0
    E' + s1*e1*C*D + s2*e1*B*E + a2*B - g1*C*D                  = 0
    F' + 0.5*s1*(e1*D^2 + A) + 0.5*s2*(e1*E^2 + B) + a2*E + p0
       - 0.5*g1*D^2                                             = 0

(s_i = sigma_i^2, e_i = eta_i, g_i = gamma_i; firm 2's system mirrors it with
x and y swapped).  In equilibrium the opponent flows are the feedback rules

    a1(t,x,y) = -gamma1 * (A x + C y + D),
    a2(t,x,y) = -gamma2 * (At x + Bt y + Et),

and substituting them couples the two systems into twelve ODEs, integrated
jointly here.  Backward blow-up is reported as a first-class outcome: the
equilibrium characterization is conditional on existence over the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUp, WrongKind
from .model import Kind, ModelParams
from .riccati import TimeGrid, rk4_backward

BR_COLUMNS = ("A", "B", "C", "D", "E", "F")
NASH_COLUMNS = ("A", "B", "C", "D", "E", "F", "At", "Bt", "Ct", "Dt", "Et", "Ft")


@dataclass(frozen=True)
class BestResponseCoeffs:
    """Solved coefficients of one firm's value function against a known opponent flow."""

    grid: TimeGrid
    values: np.ndarray  # (n_nodes, 6), columns BR_COLUMNS
    firm: int
    opponent: np.ndarray  # opponent flow sampled on the grid nodes

    def column(self, name: str) -> np.ndarray:
        return self.values[:, BR_COLUMNS.index(name)]


@dataclass(frozen=True)
class NashCoeffs:
    """Solved coefficients of both equilibrium value functions."""

    grid: TimeGrid
    values: np.ndarray  # (n_nodes, 12), columns NASH_COLUMNS

    def column(self, name: str) -> np.ndarray:
        return self.values[:, NASH_COLUMNS.index(name)]

    def firm_block(self, firm: int) -> np.ndarray:
        """Six own-value columns of one firm, in BR_COLUMNS order."""
        return self.values[:, :6] if firm == 1 else self.values[:, 6:]


@dataclass(frozen=True)
class FeedbackStrategy:
    """Affine feedback rule a(t,x,y) = -gamma * (kx(t)*x + ky(t)*y + k0(t))."""

    firm: int
    gamma: float
    nodes: np.ndarray
    kx: np.ndarray
    ky: np.ndarray
    k0: np.ndarray

    def coeffs_at(self, t: float) -> tuple[float, float, float]:
        return (
            float(np.interp(t, self.nodes, self.kx)),
            float(np.interp(t, self.nodes, self.ky)),
            float(np.interp(t, self.nodes, self.k0)),
        )

    def __call__(self, t: float, x, y):
        cx, cy, c0 = self.coeffs_at(t)
        return -self.gamma * (cx * np.asarray(x) + cy * np.asarray(y) + c0)


def _require_nash(params: ModelParams) -> None:
    if params.kind is not Kind.TWO_FIRM_NASH:
        raise WrongKind(f"operation requires the no-incentive game, got {params.kind.value}")


def _best_response_rhs_firm1(params: ModelParams, a2: float, u: np.ndarray) -> np.ndarray:
    s1, s2 = params.sigma1 ** 2, params.sigma2 ** 2
    e1, g1, p0, p1, p2 = params.eta1, params.gamma1, params.p0, params.p1, params.p2
    A, B, C, D, E, _F = u
    return np.array([
        2.0 * p1 + (g1 - s1 * e1) * A * A - s2 * e1 * C * C,
        (g1 - s1 * e1) * C * C - s2 * e1 * B * B,
        p2 + (g1 - s1 * e1) * A * C - s2 * e1 * B * C,
        (g1 - s1 * e1) * A * D - s2 * e1 * C * E - a2 * C,
        (g1 - s1 * e1) * C * D - s2 * e1 * B * E - a2 * B,
        0.5 * g1 * D * D - 0.5 * s1 * (e1 * D * D + A) - 0.5 * s2 * (e1 * E * E + B)
        - a2 * E - p0,
    ])


def _best_response_rhs_firm2(params: ModelParams, a1: float, u: np.ndarray) -> np.ndarray:
    s1, s2 = params.sigma1 ** 2, params.sigma2 ** 2
    e2, g2, p0, p1, p2 = params.eta2, params.gamma2, params.p0, params.p1, params.p2
    At, Bt, Ct, Dt, Et, _Ft = u
    return np.array([
        g2 * Ct * Ct - s1 * e2 * At * At - s2 * e2 * Ct * Ct,
        2.0 * p2 + (g2 - s2 * e2) * Bt * Bt - s1 * e2 * Ct * Ct,
        p1 + (g2 - s2 * e2) * Bt * Ct - s1 * e2 * At * Ct,
        (g2 - s2 * e2) * Ct * Et - s1 * e2 * At * Dt - a1 * At,
        (g2 - s2 * e2) * Bt * Et - s1 * e2 * Ct * Dt - a1 * Ct,
        0.5 * g2 * Et * Et - 0.5 * s1 * (e2 * Dt * Dt + At) - 0.5 * s2 * (e2 * Et * Et + Bt)
        - a1 * Dt - p0,
    ])


def _nash_rhs(params: ModelParams, u: np.ndarray) -> np.ndarray:
    s1, s2 = params.sigma1 ** 2, params.sigma2 ** 2
    e1, e2 = params.eta1, params.eta2
    g1, g2 = params.gamma1, params.gamma2
    p0, p1, p2 = params.p0, params.p1, params.p2
    A, B, C, D, E, _F, At, Bt, Ct, Dt, Et, _Ft = u
    return np.array([
        2.0 * p1 + (g1 - s1 * e1) * A * A - s2 * e1 * C * C + 2.0 * g2 * Ct * C,
        (g1 - s1 * e1) * C * C - s2 * e1 * B * B + 2.0 * g2 * Bt * B,
        p2 + (g1 - s1 * e1) * A * C - s2 * e1 * B * C + g2 * (Bt * C + Ct * B),
        (g1 - s1 * e1) * A * D - s2 * e1 * C * E + g2 * (Ct * E + Et * C),
        (g1 - s1 * e1) * C * D - s2 * e1 * B * E + g2 * (Bt * E + Et * B),
        0.5 * g1 * D * D - 0.5 * s1 * (e1 * D * D + A) - 0.5 * s2 * (e1 * E * E + B)
        + g2 * Et * E - p0,
        g2 * Ct * Ct - s1 * e2 * At * At - s2 * e2 * Ct * Ct + 2.0 * g1 * A * At,
        2.0 * p2 + (g2 - s2 * e2) * Bt * Bt - s1 * e2 * Ct * Ct + 2.0 * g1 * C * Ct,
        p1 + (g2 - s2 * e2) * Bt * Ct - s1 * e2 * At * Ct + g1 * (A * Ct + C * At),
        (g2 - s2 * e2) * Ct * Et - s1 * e2 * At * Dt + g1 * (A * Dt + D * At),
        (g2 - s2 * e2) * Bt * Et - s1 * e2 * Ct * Dt + g1 * (C * Dt + D * Ct),
        0.5 * g2 * Et * Et - 0.5 * s1 * (e2 * Dt * Dt + At) - 0.5 * s2 * (e2 * Et * Et + Bt)
        + g1 * D * Dt - p0,
    ])


def sample_opponent(opponent, grid: TimeGrid) -> np.ndarray:
    """Opponent flow as node samples: accepts a scalar, callable, or array."""
    if np.isscalar(opponent):
        return np.full(grid.n_nodes, float(opponent))
    if callable(opponent):
        return np.array([float(opponent(t)) for t in grid.nodes])
    arr = np.asarray(opponent, dtype=float)
    if arr.shape != (grid.n_nodes,):
        raise ValueError(f"opponent samples must have shape ({grid.n_nodes},), got {arr.shape}")
    return arr


def best_response(
    params: ModelParams,
    firm: int,
    opponent,
    n_nodes: int = 1001,
) -> BestResponseCoeffs:
    """Solve one firm's six value coefficients against a deterministic opponent flow.

    ``opponent`` is the other firm's effort as a function of time: a scalar,
    a callable, or node samples on the grid; samples interpolate linearly at
    integration stage times.
    """
    _require_nash(params)
    if firm not in (1, 2):
        raise ValueError(f"firm index must be 1 or 2, got {firm}")
    grid = TimeGrid(params.horizon, n_nodes)
    samples = sample_opponent(opponent, grid)
    nodes = grid.nodes
    rhs_one = _best_response_rhs_firm1 if firm == 1 else _best_response_rhs_firm2

    def rhs(t: float, u: np.ndarray) -> np.ndarray:
        a_opp = float(np.interp(t, nodes, samples))
        return rhs_one(params, a_opp, u)

    values = rk4_backward(rhs, np.zeros(6), grid)
    return BestResponseCoeffs(grid=grid, values=values, firm=firm, opponent=samples)


def solve_nash(params: ModelParams, n_nodes: int = 1001) -> NashCoeffs:
    """Integrate the coupled twelve-ODE equilibrium system backward from zero data."""
    _require_nash(params)
    grid = TimeGrid(params.horizon, n_nodes)

    def rhs(_t: float, u: np.ndarray) -> np.ndarray:
        return _nash_rhs(params, u)

    try:
        values = rk4_backward(rhs, np.zeros(12), grid)
    except BlowUp as exc:
        raise BlowUp(
            exc.t_escape,
            f"equilibrium coefficients escaped at t = {exc.t_escape:.6g}; "
            "no equilibrium on this horizon is certified",
        ) from exc
    return NashCoeffs(grid=grid, values=values)


def feedback_strategies(coeffs: NashCoeffs, params: ModelParams) -> tuple[FeedbackStrategy, FeedbackStrategy]:
    """Equilibrium feedback rules of both firms.

    a1(t,x,y) = -gamma1*(A x + C y + D); a2(t,x,y) = -gamma2*(At x + Bt y + Et).
    """
    _require_nash(params)
    nodes = coeffs.grid.nodes
    s1 = FeedbackStrategy(
        firm=1, gamma=params.gamma1, nodes=nodes,
        kx=coeffs.column("A"), ky=coeffs.column("C"), k0=coeffs.column("D"),
    )
    s2 = FeedbackStrategy(
        firm=2, gamma=params.gamma2, nodes=nodes,
        kx=coeffs.column("Ct"), ky=coeffs.column("Bt"), k0=coeffs.column("Et"),
    )
    return s1, s2


def certainty_surface(coeffs: BestResponseCoeffs | NashCoeffs, firm: int, t: float, x, y):
    """W_firm(t, x, y) rebuilt from solved coefficients (linear in t between nodes).

    The firm's value is -exp(eta_firm * W_firm).
    """
    if isinstance(coeffs, BestResponseCoeffs):
        if firm != coeffs.firm:
            raise ValueError(f"coefficients belong to firm {coeffs.firm}, not {firm}")
        block = coeffs.values
    else:
        block = coeffs.firm_block(firm)
    nodes = coeffs.grid.nodes
    a, b, c, d, e, f = (np.interp(t, nodes, block[:, j]) for j in range(6))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 0.5 * a * x * x + 0.5 * b * y * y + c * x * y + d * x + e * y + f


def payoff_rate(params: ModelParams, firm: int, x, y, a):
    """Running payoff flow priced by the equilibrium value functions.

    The solved W_i measure the CARA certainty equivalent of exactly this flow:
    simulated estimates of E[-exp(-eta_i * integral)] converge to
    -exp(eta_i * W_i(0, x0, y0)).
    """
    _require_nash(params)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    if firm == 1:
        return params.p1 * x * x + params.p2 * x * y - params.p0 - a * a / (2.0 * params.gamma1)
    if firm == 2:
        return params.p2 * y * y + params.p1 * x * y - params.p0 - a * a / (2.0 * params.gamma2)
    raise ValueError(f"firm index must be 1 or 2, got {firm}")


def _stencil_derivative(values: np.ndarray, dt: float, k: int) -> np.ndarray:
    """Fourth-order central difference of a sampled trajectory at node k."""
    return (values[k - 2] - 8.0 * values[k - 1] + 8.0 * values[k + 1] - values[k + 2]) / (12.0 * dt)


def ode_residual(
    coeffs: BestResponseCoeffs | NashCoeffs,
    params: ModelParams,
    opponent=None,
) -> float:
    """Maximum violation of the coefficient ODEs along a solved trajectory.

    Derivatives are estimated by fourth-order central differences at interior
    nodes and compared against the system right-hand sides, so the check never
    reuses the integrator's stepping.
    """
    _require_nash(params)
    grid = coeffs.grid
    dt = grid.dt
    nodes = grid.nodes
    worst = 0.0
    if isinstance(coeffs, NashCoeffs):
        for k in range(2, grid.n_nodes - 2):
            est = _stencil_derivative(coeffs.values, dt, k)
            worst = max(worst, float(np.max(np.abs(est - _nash_rhs(params, coeffs.values[k])))))
        return worst

    samples = coeffs.opponent if opponent is None else sample_opponent(opponent, grid)
    rhs_one = _best_response_rhs_firm1 if coeffs.firm == 1 else _best_response_rhs_firm2
    for k in range(2, grid.n_nodes - 2):
        est = _stencil_derivative(coeffs.values, dt, k)
        rhs = rhs_one(params, float(np.interp(nodes[k], nodes, samples)), coeffs.values[k])
        worst = max(worst, float(np.max(np.abs(est - rhs))))
    return worst

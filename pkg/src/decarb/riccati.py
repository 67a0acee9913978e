"""Backward integration of the principal's matrix Riccati system.

With v(t,x) = 0.5 x.A(t)x + B(t).x + C(t) and zero terminal data, the reduced
PDE collapses to

    dA/dt = -Q - A M A,                A(T) = 0,
    dB/dt = -L - A M B,                B(T) = 0,
    dC/dt = -0.5 Tr(Sigma Sigma^T A) - 0.5 B.M B - q0,   C(T) = 0.

The constant equation carries the flow constant q0 so that v solves the PDE
exactly, which the Monte Carlo value-matching tests rely on.  Integration is
fixed-step classic Runge-Kutta marching from T down to 0; a Riccati escape
(any coefficient beyond 1e12) raises :class:`decarb.errors.BlowUp` with the
time it was detected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .contract import ContractLQG, assemble_lqg, rates_single, rates_two, IncentiveRates
from .errors import BlowUp, OutOfHorizon
from .model import Kind, ModelParams

BLOWUP_LIMIT = 1e12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes on [0, t_end], endpoints included."""

    t_end: float
    n_nodes: int = 1001

    def __post_init__(self):
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be at least 2")

    @property
    def dt(self) -> float:
        return self.t_end / (self.n_nodes - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_nodes)


def rk4_backward(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    terminal: np.ndarray,
    grid: TimeGrid,
) -> np.ndarray:
    """March du/dt = rhs(t, u) from u(T) = terminal back to t = 0.

    Returns the trajectory on all grid nodes, shape (n_nodes, len(terminal)),
    row k holding u(t_k).  The terminal row is the terminal data bit for bit.
    """
    terminal = np.asarray(terminal, dtype=float)
    n = grid.n_nodes
    nodes = grid.nodes
    h = -grid.dt
    out = np.empty((n, terminal.size))
    out[-1] = terminal
    u = terminal
    for k in range(n - 1, 0, -1):
        t = nodes[k]
        k1 = rhs(t, u)
        k2 = rhs(t + 0.5 * h, u + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, u + 0.5 * h * k2)
        k4 = rhs(t + h, u + h * k3)
        u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > BLOWUP_LIMIT:
            raise BlowUp(nodes[k - 1])
        out[k - 1] = u
    return out


@dataclass(frozen=True)
class QuadraticValueFn:
    """Time-sampled quadratic value function of a principal model.

    A has shape (n_nodes, 2, 2) and stays symmetric; B is (n_nodes, 2); C is
    (n_nodes,).  Evaluation interpolates coefficients linearly between nodes
    (O(dt^2), far below the solver's accuracy needs at the default grid).
    """

    grid: TimeGrid
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    kind: Kind | None = None

    def _locate(self, t: float) -> tuple[int, int, float]:
        T = self.grid.t_end
        if t < -1e-12 or t > T + 1e-12:
            raise OutOfHorizon(f"t = {t:.6g} outside [0, {T:.6g}]")
        s = min(max(t, 0.0), T) / self.grid.dt
        k = min(int(s), self.grid.n_nodes - 2)
        return k, k + 1, s - k

    def coeffs_at(self, t: float) -> tuple[np.ndarray, np.ndarray, float]:
        """Interpolated (A(t), B(t), C(t))."""
        k0, k1, w = self._locate(t)
        return (
            (1.0 - w) * self.A[k0] + w * self.A[k1],
            (1.0 - w) * self.B[k0] + w * self.B[k1],
            (1.0 - w) * self.C[k0] + w * self.C[k1],
        )

    def value_and_gradient(self, t: float, x) -> tuple[float, np.ndarray]:
        A, B, C = self.coeffs_at(t)
        x = np.asarray(x, dtype=float)
        grad = A @ x + B
        return 0.5 * float(x @ A @ x) + float(B @ x) + C, grad

    def value(self, t: float, x) -> float:
        return self.value_and_gradient(t, x)[0]

    def gradient(self, t: float, x) -> np.ndarray:
        return self.value_and_gradient(t, x)[1]

    def hessian(self, t: float) -> np.ndarray:
        return self.coeffs_at(t)[0]


def _pack(A: np.ndarray, B: np.ndarray, C: float) -> np.ndarray:
    return np.concatenate([A.reshape(4), B, [C]])


def _unpack(u: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    return u[:4].reshape(2, 2), u[4:6], u[6]


def solve_lqg(
    lqg: ContractLQG,
    horizon: float,
    n_nodes: int = 1001,
    kind: Kind | None = None,
) -> QuadraticValueFn:
    """Integrate the Riccati system for given quadratic PDE data."""
    Q, L, q0, M, Sigma = lqg.Q, lqg.L, lqg.q0, lqg.M, lqg.Sigma
    diff = Sigma @ Sigma.T
    grid = TimeGrid(horizon, n_nodes)

    def rhs(_t: float, u: np.ndarray) -> np.ndarray:
        A, B, _c = _unpack(u)
        A = 0.5 * (A + A.T)  # keep every stage symmetric
        dA = -Q - A @ M @ A
        dB = -L - A @ M @ B
        dC = -0.5 * float(np.trace(diff @ A)) - 0.5 * float(B @ M @ B) - q0
        return _pack(0.5 * (dA + dA.T), dB, dC)

    traj = rk4_backward(rhs, np.zeros(7), grid)
    A = traj[:, :4].reshape(-1, 2, 2)
    A = 0.5 * (A + np.transpose(A, (0, 2, 1)))
    return QuadraticValueFn(grid=grid, A=A, B=traj[:, 4:6], C=traj[:, 6], kind=kind)


def solve_principal(params: ModelParams, n_nodes: int = 1001) -> QuadraticValueFn:
    """Solve the principal's value function for a single- or two-firm model."""
    return solve_lqg(assemble_lqg(params), params.horizon, n_nodes, kind=params.kind)


def rate_profile(params: ModelParams, v: QuadraticValueFn, t: float, x) -> IncentiveRates:
    """Optimal incentive rates at (t, x): the closed forms applied to Dv(t,x)."""
    grad = v.gradient(t, x)
    if params.kind is Kind.SINGLE_FIRM:
        return rates_single(params, grad)
    return rates_two(params, grad)


def coefficient_table(v: QuadraticValueFn) -> np.ndarray:
    """Trajectory as rows (t, A11, A12, A22, B1, B2, C) for CSV export."""
    return np.column_stack([
        v.grid.nodes,
        v.A[:, 0, 0], v.A[:, 0, 1], v.A[:, 1, 1],
        v.B[:, 0], v.B[:, 1], v.C,
    ])

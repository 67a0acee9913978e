"""Independent numerical verification of solved value functions.

Residual evaluation recomputes every ingredient it can by a route the solvers
never use: time derivatives of coefficient trajectories come from fourth-order
difference stencils on the stored samples (not from the integrator's
right-hand sides), spatial terms from the economic primitives in
:mod:`decarb.model`, and the drift maximum from the brute-force oracle in
:mod:`decarb.contract`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import model
from .contract import gradient_couplings, oracle_rates
from .model import ModelParams
from .nash import NashCoeffs
from .riccati import QuadraticValueFn


@dataclass(frozen=True)
class GridSpec:
    """Space-time verification grid: a square state grid at a few time slices."""

    x_min: float = -2.0
    x_max: float = 2.0
    n_points: int = 21
    n_time_slices: int = 5

    def axis(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    def slice_times(self, horizon: float) -> np.ndarray:
        return np.linspace(0.0, horizon, self.n_time_slices)

    def describe(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "n_points": self.n_points,
            "n_time_slices": self.n_time_slices,
        }


@dataclass(frozen=True)
class ResidualReport:
    label: str
    max_residual: float
    argmax_t: float
    argmax_x: tuple[float, ...]
    grid: dict = field(default_factory=dict)
    per_slice: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "max_residual": self.max_residual,
            "argmax_t": self.argmax_t,
            "argmax_x": list(self.argmax_x),
            "grid": dict(self.grid),
            "per_slice": {f"{t:.12g}": m for t, m in self.per_slice.items()},
        }


def sampled_time_derivative(values: np.ndarray, dt: float, k: int) -> np.ndarray:
    """Fourth-order derivative estimate of a node-sampled trajectory at node k.

    Centered stencil where it fits, one-sided at the ends, so the estimate is
    available at every node including t = 0 and t = T.
    """
    n = len(values)
    if 2 <= k <= n - 3:
        return (values[k - 2] - 8.0 * values[k - 1] + 8.0 * values[k + 1] - values[k + 2]) / (12.0 * dt)
    if k < 2:
        f0, f1, f2, f3, f4 = values[k], values[k + 1], values[k + 2], values[k + 3], values[k + 4]
        return (-25.0 * f0 + 48.0 * f1 - 36.0 * f2 + 16.0 * f3 - 3.0 * f4) / (12.0 * dt)
    f0, f1, f2, f3, f4 = values[k], values[k - 1], values[k - 2], values[k - 3], values[k - 4]
    return (25.0 * f0 - 48.0 * f1 + 36.0 * f2 - 16.0 * f3 + 3.0 * f4) / (12.0 * dt)


def _slice_nodes(v_grid, times: np.ndarray) -> list[int]:
    dt = v_grid.dt
    return [int(round(t / dt)) for t in times]


def hjb_residual_principal(
    v: QuadraticValueFn,
    params: ModelParams,
    grid: GridSpec | None = None,
) -> ResidualReport:
    """Max residual of the principal's reduced PDE on the verification grid.

    Evaluates f(x) - g(x) + dv/dt + 0.5*(sigma1^2 v11 + sigma2^2 v22)
    + 0.5*(m1 v1^2 + m2 v2^2) slice by slice, with dv/dt rebuilt from stencil
    derivatives of the stored coefficient trajectories.
    """
    grid = grid or GridSpec()
    m1, m2 = gradient_couplings(params)
    s1, s2 = params.sigma1 ** 2, params.sigma2 ** 2

    ax = grid.axis()
    X1, X2 = np.meshgrid(ax, ax, indexing="ij")
    states = np.stack([X1, X2], axis=-1)
    flow = model.revenue_f(params, states) - model.social_cost_g(params, states)

    worst = -1.0
    arg_t, arg_x = 0.0, (0.0, 0.0)
    per_slice: dict[float, float] = {}
    times = grid.slice_times(params.horizon)
    for t, k in zip(times, _slice_nodes(v.grid, times)):
        A, B = v.A[k], v.B[k]
        Ad = sampled_time_derivative(v.A, v.grid.dt, k)
        Bd = sampled_time_derivative(v.B, v.grid.dt, k)
        Cd = sampled_time_derivative(v.C, v.grid.dt, k)
        dv_dt = (0.5 * (Ad[0, 0] * X1 * X1 + 2.0 * Ad[0, 1] * X1 * X2 + Ad[1, 1] * X2 * X2)
                 + Bd[0] * X1 + Bd[1] * X2 + Cd)
        v1 = A[0, 0] * X1 + A[0, 1] * X2 + B[0]
        v2 = A[0, 1] * X1 + A[1, 1] * X2 + B[1]
        res = np.abs(
            flow + dv_dt
            + 0.5 * (s1 * A[0, 0] + s2 * A[1, 1])
            + 0.5 * (m1 * v1 * v1 + m2 * v2 * v2)
        )
        j = np.unravel_index(int(np.argmax(res)), res.shape)
        per_slice[float(t)] = float(res[j])
        if res[j] > worst:
            worst = float(res[j])
            arg_t, arg_x = float(t), (float(X1[j]), float(X2[j]))
    return ResidualReport(
        label="principal_hjb",
        max_residual=worst,
        argmax_t=arg_t,
        argmax_x=arg_x,
        grid=grid.describe(),
        per_slice=per_slice,
    )


def hjb_residual_nash(
    coeffs: NashCoeffs,
    params: ModelParams,
    grid: GridSpec | None = None,
) -> tuple[ResidualReport, ResidualReport]:
    """Residuals of both firms' value PDEs with the opponent feedback injected."""
    grid = grid or GridSpec()
    s1, s2 = params.sigma1 ** 2, params.sigma2 ** 2
    e1, e2 = params.eta1, params.eta2
    g1, g2 = params.gamma1, params.gamma2
    p0, p1, p2 = params.p0, params.p1, params.p2

    ax = grid.axis()
    X, Y = np.meshgrid(ax, ax, indexing="ij")

    reports = []
    times = grid.slice_times(params.horizon)
    ks = _slice_nodes(coeffs.grid, times)
    dt = coeffs.grid.dt
    for firm in (1, 2):
        worst = -1.0
        arg_t, arg_x = 0.0, (0.0, 0.0)
        per_slice: dict[float, float] = {}
        for t, k in zip(times, ks):
            A, B, C, D, E, _F, At, Bt, Ct, Dt, Et, _Ft = coeffs.values[k]
            der = sampled_time_derivative(coeffs.values, dt, k)
            a1 = -g1 * (A * X + C * Y + D)
            a2 = -g2 * (Ct * X + Bt * Y + Et)
            if firm == 1:
                w_dot = (0.5 * der[0] * X * X + 0.5 * der[1] * Y * Y + der[2] * X * Y
                         + der[3] * X + der[4] * Y + der[5])
                wx = A * X + C * Y + D
                wy = B * Y + C * X + E
                res = np.abs(
                    w_dot
                    + 0.5 * s1 * (e1 * wx * wx + A)
                    + 0.5 * s2 * (e1 * wy * wy + B)
                    + a2 * wy
                    + (p0 - p1 * X * X - p2 * X * Y)
                    - 0.5 * g1 * wx * wx
                )
            else:
                w_dot = (0.5 * der[6] * X * X + 0.5 * der[7] * Y * Y + der[8] * X * Y
                         + der[9] * X + der[10] * Y + der[11])
                wx = At * X + Ct * Y + Dt
                wy = Bt * Y + Ct * X + Et
                res = np.abs(
                    w_dot
                    + 0.5 * s1 * (e2 * wx * wx + At)
                    + 0.5 * s2 * (e2 * wy * wy + Bt)
                    + a1 * wx
                    + (p0 - p2 * Y * Y - p1 * X * Y)
                    - 0.5 * g2 * wy * wy
                )
            j = np.unravel_index(int(np.argmax(res)), res.shape)
            per_slice[float(t)] = float(res[j])
            if res[j] > worst:
                worst = float(res[j])
                arg_t, arg_x = float(t), (float(X[j]), float(Y[j]))
        reports.append(ResidualReport(
            label=f"nash_hjb_firm{firm}",
            max_residual=worst,
            argmax_t=arg_t,
            argmax_x=arg_x,
            grid=grid.describe(),
            per_slice=per_slice,
        ))
    return reports[0], reports[1]


def finite_diff_check(
    value: Callable[[float, np.ndarray], float],
    t: float,
    x,
    h: float = 1e-5,
    gradient: Callable[[float, np.ndarray], np.ndarray] | None = None,
    hessian: Callable[[float, np.ndarray], np.ndarray] | None = None,
    time_derivative: Callable[[float, np.ndarray], float] | None = None,
) -> float:
    """Worst relative error between analytic derivatives and central differences.

    The gradient and time derivative difference the value; the Hessian
    differences the analytic gradient (second differences of the value would
    drown in rounding at small h).  At least one analytic callable is required.
    """
    if gradient is None and hessian is None and time_derivative is None:
        raise ValueError("supply at least one analytic derivative to check")
    x = np.asarray(x, dtype=float)
    dim = x.size
    worst = 0.0

    def rel(err: float, ref: float) -> float:
        return abs(err) / max(1.0, abs(ref))

    if gradient is not None:
        g = np.asarray(gradient(t, x), dtype=float)
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = h
            fd = (value(t, x + e) - value(t, x - e)) / (2.0 * h)
            worst = max(worst, rel(fd - g[i], g[i]))
    if hessian is not None:
        if gradient is None:
            raise ValueError("hessian check needs the analytic gradient")
        H = np.asarray(hessian(t, x), dtype=float)
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = h
            fd_row = (np.asarray(gradient(t, x + e)) - np.asarray(gradient(t, x - e))) / (2.0 * h)
            for j in range(dim):
                worst = max(worst, rel(fd_row[j] - H[i, j], H[i, j]))
    if time_derivative is not None:
        ref = time_derivative(t, x)
        fd = (value(t + h, x) - value(t - h, x)) / (2.0 * h)
        worst = max(worst, rel(fd - ref, ref))
    return worst


def sup_consistency(
    params: ModelParams,
    grad_v: Sequence[float],
    m: tuple[float, float] | None = None,
) -> float:
    """Gap between the brute-force maximum of h and its closed form.

    The closed form is 0.5*(m1 + eta_p*sigma1^2)*v1^2 + 0.5*(m2 + eta_p*sigma2^2)*v2^2.
    ``m`` overrides the derived couplings, which lets callers demonstrate that
    an alternative sign choice fails this gate.
    """
    v = np.asarray(grad_v, dtype=float)
    if m is None:
        m = gradient_couplings(params)
    s1, s2 = params.sigma1 ** 2, params.sigma2 ** 2
    closed = 0.5 * ((m[0] + params.eta_p * s1) * v[0] ** 2 + (m[1] + params.eta_p * s2) * v[1] ** 2)
    _z, value = oracle_rates(params, v)
    return abs(value - closed)

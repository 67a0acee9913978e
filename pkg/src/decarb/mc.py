"""Monte Carlo simulation of the state, payment and payoff dynamics.

Every path owns an independent counter-based RNG substream keyed by
``(seed, substream index)``, so results are bit-identical for a fixed
configuration no matter how paths are chunked or distributed.  With antithetic
sampling (the default) even-numbered paths consume their substream's draws and
odd-numbered paths the negated draws; statistics then treat pair averages as
the independent samples.

Two stepping schemes are available.  ``scheme="pc"`` (default) is an
Euler-Maruyama step with a drift predictor-corrector and trapezoidal
quadrature of all running flows; the state noise is additive, so this is
weak order 2 and its bias is negligible against the Monte Carlo error at the
default resolution.  ``scheme="euler"`` is the classic left-point scheme
(weak order 1); under it the agents' utility estimates are exactly unbiased
(the payment compensators telescope against the Gaussian increments step by
step), which the indifference tests exploit.

The simulators verify solved value functions against the dynamics they price:

* :func:`simulate_principal` evolves the state under the optimal incentive
  rates, accumulates the payment and social-cost flows, and estimates the
  principal's and agents' expected CARA utilities.  The principal's estimate
  converges to ``-exp(-eta_p*(v(0,x0) - sum(y0)))`` and each agent's to
  ``-exp(-eta_i*y0_i)`` (the contract leaves agents indifferent to the rates).
* :func:`simulate_nash` evolves both firms' states under feedback strategies
  (optionally with one firm deviating) and estimates each firm's utility over
  its accumulated payoff flow; in equilibrium the estimate converges to
  ``-exp(eta_i*W_i(0, x0, y0))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import model
from .contract import effective_aversions, lambda_pair, single_rate_factors
from .errors import ConfigMismatch, Empty, NonFinitePath, OutOfRange
from .model import Kind, ModelParams, Scope
from .nash import FeedbackStrategy, payoff_rate
from .riccati import QuadraticValueFn

_CHUNK = 4096
_SCHEMES = ("pc", "euler")


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings shared by all models.

    ``x0`` is the 2-dimensional initial state; ``y0`` the initial payment
    level per agent (a scalar applies to every agent; ignored by the Nash
    game).  ``n_paths`` counts simulated paths, antithetic mirrors included.
    """

    n_paths: int = 100_000
    dt: float = 1e-3
    seed: int = 0
    x0: tuple[float, float] = (0.0, 0.0)
    y0: float | tuple[float, ...] = 0.0
    antithetic: bool = True


@dataclass(frozen=True)
class UtilityEstimate:
    label: str
    mean: float
    std_err: float
    n_paths: int
    seed: int
    dt: float | None = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "mean": self.mean,
            "std_err": self.std_err,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "dt": self.dt,
        }


@dataclass(frozen=True)
class Deviation:
    """Unilateral strategy perturbation: a -> scale*a + shift for one firm."""

    firm: int
    scale: float = 1.0
    shift: float = 0.0

    def apply(self, firm: int, a):
        if firm != self.firm:
            return a
        return self.scale * a + self.shift


def _n_steps(horizon: float, dt: float) -> int:
    if dt <= 0.0:
        raise OutOfRange("dt", f"dt must be > 0, got {dt}")
    n = round(horizon / dt)
    if n < 1 or abs(horizon - n * dt) > 1e-9:
        raise ConfigMismatch(f"horizon {horizon} is not an integer multiple of dt {dt}")
    return n


def _check_cfg(cfg: SimConfig) -> int:
    """Number of RNG substreams the configuration consumes."""
    if cfg.n_paths < 2:
        raise OutOfRange("n_paths", f"n_paths must be >= 2, got {cfg.n_paths}")
    if cfg.antithetic and cfg.n_paths % 2:
        raise OutOfRange("n_paths", "antithetic sampling needs an even n_paths")
    return cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths


def _check_x0(cfg: SimConfig) -> np.ndarray:
    x0 = np.asarray(cfg.x0, dtype=float)
    if x0.shape != (2,) or not np.all(np.isfinite(x0)):
        raise OutOfRange("x0", f"x0 must be a finite 2-vector, got {cfg.x0!r}")
    return x0


def _check_scheme(scheme: str) -> str:
    if scheme not in _SCHEMES:
        raise OutOfRange("scheme", f"scheme must be one of {_SCHEMES}, got {scheme!r}")
    return scheme


def path_increments(seed: int, substream: int, n_draws: int) -> np.ndarray:
    """Standard-normal draws (n_draws, 2) of one path's RNG substream.

    The substream is a counter-based generator keyed by the 64-bit seed and
    the substream index, so any path's draws are well defined in isolation.
    """
    key = ((int(seed) & 0xFFFFFFFFFFFFFFFF) << 64) | (int(substream) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal((n_draws, 2))


def _chunk_increments(seed: int, start: int, count: int, n_steps: int, refinement: int) -> np.ndarray:
    """Per-step normals (count, n_steps, 2) for substreams start..start+count-1.

    ``refinement`` draws that many sub-normals per step and aggregates them,
    which keeps the underlying Brownian path fixed across a ladder of step
    sizes with constant dt*refinement, for weak-convergence studies.
    """
    out = np.empty((count, n_steps, 2))
    for j in range(count):
        z = path_increments(seed, start + j, n_steps * refinement)
        if refinement == 1:
            out[j] = z
        else:
            out[j] = z.reshape(n_steps, refinement, 2).sum(axis=1) / math.sqrt(refinement)
    return out


def _canonical_index(start: int, local: int, block: int, antithetic: bool) -> int:
    if not antithetic:
        return start + local
    if local < block:
        return 2 * (start + local)
    return 2 * (start + local - block) + 1


def _interleave(base: np.ndarray, mirror: np.ndarray) -> np.ndarray:
    out = np.empty(base.size + mirror.size)
    out[0::2] = base
    out[1::2] = mirror
    return out


def _collect(chunks: list[np.ndarray]) -> np.ndarray:
    return np.concatenate(chunks)


def _stats(utilities: np.ndarray, antithetic: bool) -> tuple[float, float]:
    samples = 0.5 * (utilities[0::2] + utilities[1::2]) if antithetic else utilities
    mean = float(np.mean(samples))
    if samples.size < 2:
        return mean, 0.0
    return mean, float(np.std(samples, ddof=1) / math.sqrt(samples.size))


def estimate_utility(samples: Sequence[float], eta: float, label: str = "", seed: int = 0) -> UtilityEstimate:
    """Mean and standard error of -exp(-eta*Z) over per-path payoffs Z."""
    z = np.asarray(samples, dtype=float)
    if z.size == 0:
        raise Empty("no payoff samples")
    u = -np.exp(-eta * z)
    mean = float(np.mean(u))
    se = 0.0 if u.size < 2 else float(np.std(u, ddof=1) / math.sqrt(u.size))
    return UtilityEstimate(label=label, mean=mean, std_err=se, n_paths=int(z.size), seed=seed)


def _agent_y0(params: ModelParams, cfg: SimConfig) -> tuple[float, ...]:
    n_agents = 1 if params.kind is Kind.SINGLE_FIRM else 2
    if np.isscalar(cfg.y0):
        return (float(cfg.y0),) * n_agents
    y0 = tuple(float(v) for v in cfg.y0)
    if len(y0) != n_agents:
        raise ConfigMismatch(f"y0 must have {n_agents} entries for {params.kind.value}, got {len(y0)}")
    return y0


def _interp_coeffs(v: QuadraticValueFn, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nodes = v.grid.nodes
    A = np.empty((ts.size, 2, 2))
    B = np.empty((ts.size, 2))
    for i, j in ((0, 0), (0, 1), (1, 1)):
        A[:, i, j] = np.interp(ts, nodes, v.A[:, i, j])
    A[:, 1, 0] = A[:, 0, 1]
    B[:, 0] = np.interp(ts, nodes, v.B[:, 0])
    B[:, 1] = np.interp(ts, nodes, v.B[:, 1])
    return A, B


class _PrincipalStepper:
    """Per-step flow evaluation for one principal model."""

    def __init__(self, params: ModelParams):
        self.p = params
        self.single = params.kind is Kind.SINGLE_FIRM
        self.s1, self.s2 = params.sigma1 ** 2, params.sigma2 ** 2
        if self.single:
            self.r1, self.r2 = single_rate_factors(params)
        else:
            self.lam12, self.lam21 = lambda_pair(params)
            self.av = effective_aversions(params)

    def rates(self, X: np.ndarray, A: np.ndarray, B: np.ndarray):
        grad = X @ A + B
        if self.single:
            return self.r1 * grad[:, 0], self.r2 * grad[:, 1]
        z11 = self.lam12 * grad[:, 0]
        z22 = self.lam21 * grad[:, 1]
        z12 = self.av.eta_1p * (grad[:, 1] - z22)
        z21 = self.av.eta_2p * (grad[:, 0] - z11)
        return z11, z12, z21, z22

    def drift(self, z) -> np.ndarray:
        if self.single:
            return np.column_stack([self.p.gamma1 * z[0], self.p.gamma2 * z[1]])
        return np.column_stack([self.p.gamma1 * z[0], self.p.gamma2 * z[3]])

    def flows(self, X: np.ndarray, z):
        """(payment drifts per agent, revenue-less-cost flows per agent, social cost)."""
        p = self.p
        g = model.social_cost_g(p, X)
        if self.single:
            z1, z2 = z
            f = model.revenue_f(p, X, Scope.TOTAL)
            c = 0.5 * (p.gamma1 * z1 * z1 + p.gamma2 * z2 * z2)
            risk = 0.5 * p.eta_a * (self.s1 * z1 * z1 + self.s2 * z2 * z2)
            return (risk + c - f,), (f - c,), g
        z11, z12, z21, z22 = z
        f1 = model.revenue_f(p, X, Scope.FIRM1)
        f2 = model.revenue_f(p, X, Scope.FIRM2)
        c1 = 0.5 * p.gamma1 * z11 * z11
        c2 = 0.5 * p.gamma2 * z22 * z22
        d1 = c1 - f1 + 0.5 * p.eta1 * (self.s1 * z11 * z11 + self.s2 * z12 * z12)
        d2 = c2 - f2 + 0.5 * p.eta2 * (self.s2 * z22 * z22 + self.s1 * z21 * z21)
        return (d1, d2), (f1 - c1, f2 - c2), g

    def payment_noise(self, z, dW: np.ndarray):
        p = self.p
        if self.single:
            z1, z2 = z
            return (p.sigma1 * z1 * dW[:, 0] + p.sigma2 * z2 * dW[:, 1],)
        z11, z12, z21, z22 = z
        return (
            p.sigma1 * z11 * dW[:, 0] + p.sigma2 * z12 * dW[:, 1],
            p.sigma2 * z22 * dW[:, 1] + p.sigma1 * z21 * dW[:, 0],
        )


def principal_path_payoffs(
    params: ModelParams,
    v: QuadraticValueFn,
    cfg: SimConfig,
    scheme: str = "pc",
    chunk_size: int | None = None,
    brownian_refinement: int = 1,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Per-path principal payoff -Y_T - int g dt and agent payoffs Y^i_T + int (f_i - c_i) dt.

    Paths are returned in canonical order (pair-interleaved under antithetic
    sampling); chunking only bounds memory and cannot change the result.
    """
    if not params.has_principal:
        raise ConfigMismatch(f"simulate_principal needs a principal model, got {params.kind.value}")
    if v.kind is not None and v.kind is not params.kind:
        raise ConfigMismatch(f"value function solved for {v.kind.value}, params are {params.kind.value}")
    if abs(v.grid.t_end - params.horizon) > 1e-9:
        raise ConfigMismatch(f"value function horizon {v.grid.t_end} != params horizon {params.horizon}")
    scheme = _check_scheme(scheme)
    n_sub = _check_cfg(cfg)
    n_steps = _n_steps(params.horizon, cfg.dt)
    y0 = _agent_y0(params, cfg)
    x0 = _check_x0(cfg)

    dt = cfg.dt
    sqdt = math.sqrt(dt)
    ts = np.arange(n_steps + 1) * dt
    A_t, B_t = _interp_coeffs(v, ts)
    stepper = _PrincipalStepper(params)
    n_agents = len(y0)
    sig = np.array([params.sigma1, params.sigma2])

    chunk = chunk_size or _CHUNK
    principal_out: list[np.ndarray] = []
    agents_out: list[list[np.ndarray]] = [[] for _ in range(n_agents)]
    for start in range(0, n_sub, chunk):
        m = min(chunk, n_sub - start)
        inc = _chunk_increments(cfg.seed, start, m, n_steps, brownian_refinement)
        if cfg.antithetic:
            inc = np.concatenate([inc, -inc], axis=0)
        rows = inc.shape[0]

        X = np.tile(x0, (rows, 1))
        Y = [np.full(rows, y) for y in y0]
        F = [np.zeros(rows) for _ in range(n_agents)]
        G = np.zeros(rows)

        for k in range(n_steps):
            z = stepper.rates(X, A_t[k], B_t[k])
            pay_drift, agent_flow, g_flow = stepper.flows(X, z)
            dW = sqdt * inc[:, k, :]
            noise = dW * sig
            X_pred = X + stepper.drift(z) * dt + noise
            if scheme == "pc":
                z_pred = stepper.rates(X_pred, A_t[k + 1], B_t[k + 1])
                X_next = X + 0.5 * (stepper.drift(z) + stepper.drift(z_pred)) * dt + noise
                z_next = stepper.rates(X_next, A_t[k + 1], B_t[k + 1])
                pay_next, flow_next, g_next = stepper.flows(X_next, z_next)
                pay_drift = tuple(0.5 * (a + b) for a, b in zip(pay_drift, pay_next))
                agent_flow = tuple(0.5 * (a + b) for a, b in zip(agent_flow, flow_next))
                g_flow = 0.5 * (g_flow + g_next)
            else:
                X_next = X_pred
            pay_noise = stepper.payment_noise(z, dW)
            for i in range(n_agents):
                Y[i] += pay_drift[i] * dt + pay_noise[i]
                F[i] += agent_flow[i] * dt
            G += g_flow * dt
            X = X_next
            finite = np.isfinite(X).all(axis=1)
            for i in range(n_agents):
                finite &= np.isfinite(Y[i])
            if not finite.all():
                local = int(np.argmax(~finite))
                raise NonFinitePath(_canonical_index(start, local, m, cfg.antithetic), (k + 1) * dt)

        pay_p = -sum(Y) - G
        pays_a = [Y[i] + F[i] for i in range(n_agents)]
        if cfg.antithetic:
            principal_out.append(_interleave(pay_p[:m], pay_p[m:]))
            for i in range(n_agents):
                agents_out[i].append(_interleave(pays_a[i][:m], pays_a[i][m:]))
        else:
            principal_out.append(pay_p)
            for i in range(n_agents):
                agents_out[i].append(pays_a[i])

    return _collect(principal_out), [_collect(agents_out[i]) for i in range(n_agents)]


def agent_labels(params: ModelParams) -> tuple[str, ...]:
    return ("agent",) if params.kind is Kind.SINGLE_FIRM else ("firm1", "firm2")


def principal_estimates_from_payoffs(
    params: ModelParams,
    cfg: SimConfig,
    pay_p: np.ndarray,
    pays_a: Sequence[np.ndarray],
) -> tuple[UtilityEstimate, tuple[UtilityEstimate, ...]]:
    """Utility estimates from per-path payoffs in canonical order."""
    u_p = -np.exp(-params.eta_p * pay_p)
    mean, se = _stats(u_p, cfg.antithetic)
    principal = UtilityEstimate("principal", mean, se, cfg.n_paths, cfg.seed, cfg.dt)
    agents = []
    for label, eta, pay in zip(agent_labels(params), params.agent_aversions(), pays_a):
        u = -np.exp(-eta * pay)
        mean, se = _stats(u, cfg.antithetic)
        agents.append(UtilityEstimate(label, mean, se, cfg.n_paths, cfg.seed, cfg.dt))
    return principal, tuple(agents)


def simulate_principal(
    params: ModelParams,
    v: QuadraticValueFn,
    cfg: SimConfig,
    scheme: str = "pc",
    chunk_size: int | None = None,
    brownian_refinement: int = 1,
) -> tuple[UtilityEstimate, tuple[UtilityEstimate, ...]]:
    """Monte Carlo estimates of the principal's and the agents' expected utilities."""
    pay_p, pays_a = principal_path_payoffs(params, v, cfg, scheme, chunk_size, brownian_refinement)
    return principal_estimates_from_payoffs(params, cfg, pay_p, pays_a)


def nash_path_payoffs(
    params: ModelParams,
    strategies: tuple[FeedbackStrategy, FeedbackStrategy],
    cfg: SimConfig,
    deviation: Deviation | None = None,
    scheme: str = "pc",
    chunk_size: int | None = None,
    brownian_refinement: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-path accumulated payoff flows (Z1, Z2) of both firms, canonical order."""
    if params.kind is not Kind.TWO_FIRM_NASH:
        raise ConfigMismatch(f"simulate_nash needs the no-incentive game, got {params.kind.value}")
    if deviation is not None and deviation.firm not in (1, 2):
        raise OutOfRange("firm", f"deviation firm must be 1 or 2, got {deviation.firm}")
    scheme = _check_scheme(scheme)
    n_sub = _check_cfg(cfg)
    n_steps = _n_steps(params.horizon, cfg.dt)
    x0 = _check_x0(cfg)

    dt = cfg.dt
    sqdt = math.sqrt(dt)
    ts = np.arange(n_steps + 1) * dt
    sa, sb = strategies
    ka = np.array([sa.coeffs_at(t) for t in ts])
    kb = np.array([sb.coeffs_at(t) for t in ts])

    def controls(k: int, X, Y):
        a1 = -sa.gamma * (ka[k, 0] * X + ka[k, 1] * Y + ka[k, 2])
        a2 = -sb.gamma * (kb[k, 0] * X + kb[k, 1] * Y + kb[k, 2])
        if deviation is not None:
            a1 = deviation.apply(1, a1)
            a2 = deviation.apply(2, a2)
        return a1, a2

    chunk = chunk_size or _CHUNK
    z1_out: list[np.ndarray] = []
    z2_out: list[np.ndarray] = []
    for start in range(0, n_sub, chunk):
        m = min(chunk, n_sub - start)
        inc = _chunk_increments(cfg.seed, start, m, n_steps, brownian_refinement)
        if cfg.antithetic:
            inc = np.concatenate([inc, -inc], axis=0)
        rows = inc.shape[0]

        X = np.full(rows, x0[0])
        Y = np.full(rows, x0[1])
        Z1 = np.zeros(rows)
        Z2 = np.zeros(rows)
        for k in range(n_steps):
            a1, a2 = controls(k, X, Y)
            pi1 = payoff_rate(params, 1, X, Y, a1)
            pi2 = payoff_rate(params, 2, X, Y, a2)
            dW = sqdt * inc[:, k, :]
            X_pred = X + a1 * dt + params.sigma1 * dW[:, 0]
            Y_pred = Y + a2 * dt + params.sigma2 * dW[:, 1]
            if scheme == "pc":
                a1p, a2p = controls(k + 1, X_pred, Y_pred)
                X_next = X + 0.5 * (a1 + a1p) * dt + params.sigma1 * dW[:, 0]
                Y_next = Y + 0.5 * (a2 + a2p) * dt + params.sigma2 * dW[:, 1]
                a1n, a2n = controls(k + 1, X_next, Y_next)
                pi1 = 0.5 * (pi1 + payoff_rate(params, 1, X_next, Y_next, a1n))
                pi2 = 0.5 * (pi2 + payoff_rate(params, 2, X_next, Y_next, a2n))
            else:
                X_next, Y_next = X_pred, Y_pred
            Z1 += pi1 * dt
            Z2 += pi2 * dt
            X, Y = X_next, Y_next
            finite = np.isfinite(X) & np.isfinite(Y) & np.isfinite(Z1) & np.isfinite(Z2)
            if not finite.all():
                local = int(np.argmax(~finite))
                raise NonFinitePath(_canonical_index(start, local, m, cfg.antithetic), (k + 1) * dt)

        if cfg.antithetic:
            z1_out.append(_interleave(Z1[:m], Z1[m:]))
            z2_out.append(_interleave(Z2[:m], Z2[m:]))
        else:
            z1_out.append(Z1)
            z2_out.append(Z2)
    return _collect(z1_out), _collect(z2_out)


def nash_estimates_from_payoffs(
    params: ModelParams,
    cfg: SimConfig,
    z1: np.ndarray,
    z2: np.ndarray,
) -> tuple[UtilityEstimate, UtilityEstimate]:
    """Utility estimates from per-path payoff flows in canonical order."""
    out = []
    for label, eta, z in (("firm1", params.eta1, z1), ("firm2", params.eta2, z2)):
        u = -np.exp(-eta * z)
        mean, se = _stats(u, cfg.antithetic)
        out.append(UtilityEstimate(label, mean, se, cfg.n_paths, cfg.seed, cfg.dt))
    return out[0], out[1]


def simulate_nash(
    params: ModelParams,
    strategies: tuple[FeedbackStrategy, FeedbackStrategy],
    cfg: SimConfig,
    deviation: Deviation | None = None,
    scheme: str = "pc",
    chunk_size: int | None = None,
    brownian_refinement: int = 1,
) -> tuple[UtilityEstimate, UtilityEstimate]:
    """Monte Carlo estimates of both firms' expected utilities under the strategies."""
    z1, z2 = nash_path_payoffs(params, strategies, cfg, deviation, scheme,
                               chunk_size, brownian_refinement)
    return nash_estimates_from_payoffs(params, cfg, z1, z2)


def paired_difference(u_new: np.ndarray, u_base: np.ndarray, antithetic: bool) -> tuple[float, float]:
    """Mean and standard error of a common-random-number utility difference."""
    d = np.asarray(u_new, dtype=float) - np.asarray(u_base, dtype=float)
    return _stats(d, antithetic)

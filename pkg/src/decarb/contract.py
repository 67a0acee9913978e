"""Optimal incentive rates and the linear-quadratic reduction of the principal's problem.

The principal pays each agent a flow whose sensitivities to the observed state
increments are the incentive rates z.  Substituting the induced efforts
``a_i = gamma_i * z_ii`` into the principal's dynamic program leaves a
pointwise concave-quadratic drift objective h(z; Dv) to maximize:

single-firm (one agent, rates z1, z2)::

    h = sum_i [ (gamma_i + sigma_i^2*eta_p) * v_i * z_i
                - 0.5*(sigma_i^2*eta_p + gamma_i + eta_a*sigma_i^2) * z_i^2 ]

two-firm (rates z11, z12, z21, z22; firm i is paid z_ij per unit of dX^j)::

    h = gamma_1*z11*v1 + gamma_2*z22*v2
        - 0.5*(gamma_1*z11^2 + gamma_2*z22^2)
        - 0.5*(eta_1*sigma_1^2*z11^2 + eta_1*sigma_2^2*z12^2
               + eta_2*sigma_2^2*z22^2 + eta_2*sigma_1^2*z21^2)
        - 0.5*eta_p*(sigma_1^2*(z11+z21)^2 + sigma_2^2*(z22+z12)^2)
        + eta_p*sigma_1^2*(z11+z21)*v1 + eta_p*sigma_2^2*(z22+z12)*v2

Completing squares in h gives the closed-form maximizers implemented here;
:func:`argmax_oracle` maximizes h numerically so every closed form can be
checked against a path that never uses calculus.  The maximum of h, written as
``0.5*(m_i + eta_p*sigma_i^2)*v_i^2`` per coordinate, defines the gradient
coupling matrix M = diag(m1, m2) of the reduced PDE

    0 = 0.5 x.Qx + L.x + q0 + dv/dt + 0.5 Tr(Sigma Sigma^T D^2 v) + 0.5 Dv.M Dv

whose quadratic data (Q, L, q0) expand the net flow f(x) - g(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import MaximizerOnBoundary, WrongKind
from .model import Kind, ModelParams

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EffectiveRiskAversion:
    """Harmonic risk-aversion combinations of agents with the principal.

    eta_bar_i = eta_p*eta_i / (eta_p + eta_i) and
    eta_ip = eta_p / (eta_i + eta_p); both vanish as eta_p -> 0.
    """

    eta_bar_1: float
    eta_bar_2: float
    eta_1p: float
    eta_2p: float


@dataclass(frozen=True)
class SingleFirmRates:
    z1: float
    z2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.z1, self.z2])


@dataclass(frozen=True)
class TwoFirmRates:
    z11: float
    z12: float
    z21: float
    z22: float

    def as_array(self) -> np.ndarray:
        return np.array([self.z11, self.z12, self.z21, self.z22])


IncentiveRates = SingleFirmRates | TwoFirmRates


@dataclass(frozen=True)
class ContractLQG:
    """Quadratic data of the principal's reduced PDE.

    Q (symmetric 2x2), L (2-vector) and q0 expand f(x) - g(x); M and Sigma are
    diagonal 2x2 matrices holding the gradient couplings m_i and volatilities.
    """

    Q: np.ndarray
    L: np.ndarray
    q0: float
    M: np.ndarray
    Sigma: np.ndarray


def _require_kind(params: ModelParams, *kinds: Kind) -> None:
    if params.kind not in kinds:
        allowed = ", ".join(k.value for k in kinds)
        raise WrongKind(f"operation requires model kind in {{{allowed}}}, got {params.kind.value}")


def effective_aversions(params: ModelParams) -> EffectiveRiskAversion:
    _require_kind(params, Kind.TWO_FIRM_REGULATED)
    ep, e1, e2 = params.eta_p, params.eta1, params.eta2
    return EffectiveRiskAversion(
        eta_bar_1=ep * e1 / (ep + e1),
        eta_bar_2=ep * e2 / (ep + e2),
        eta_1p=ep / (e1 + ep),
        eta_2p=ep / (e2 + ep),
    )


def lambda_pair(params: ModelParams) -> tuple[float, float]:
    """Risk-sharing ratios (Lambda_12, Lambda_21), each in (0, 1] for sigma >= 0.

    Lambda_12 = (gamma_1 + eta_bar_2*sigma_1^2) / (gamma_1 + (eta_1 + eta_bar_2)*sigma_1^2)
    and symmetrically for Lambda_21.
    """
    _require_kind(params, Kind.TWO_FIRM_REGULATED)
    av = effective_aversions(params)
    s1, s2 = params.sigma1 ** 2, params.sigma2 ** 2
    lam12 = (params.gamma1 + av.eta_bar_2 * s1) / (params.gamma1 + (params.eta1 + av.eta_bar_2) * s1)
    lam21 = (params.gamma2 + av.eta_bar_1 * s2) / (params.gamma2 + (params.eta2 + av.eta_bar_1) * s2)
    return lam12, lam21


def single_rate_factors(params: ModelParams) -> tuple[float, float]:
    """Per-technology ratios r_i with z_i* = r_i * v_i in the single-firm model."""
    _require_kind(params, Kind.SINGLE_FIRM)
    out = []
    for gamma, sigma in ((params.gamma1, params.sigma1), (params.gamma2, params.sigma2)):
        s = sigma * sigma
        out.append((gamma + s * params.eta_p) / (s * params.eta_p + gamma + params.eta_a * s))
    return tuple(out)


def rates_single(params: ModelParams, grad_v: Sequence[float]) -> SingleFirmRates:
    """Optimal single-firm rates z_i* = (gamma_i + sigma_i^2*eta_p) v_i / (sigma_i^2*eta_p + gamma_i + eta_a*sigma_i^2)."""
    r1, r2 = single_rate_factors(params)
    v = np.asarray(grad_v, dtype=float)
    return SingleFirmRates(z1=r1 * v[0], z2=r2 * v[1])


def rates_two(params: ModelParams, grad_v: Sequence[float]) -> TwoFirmRates:
    """Optimal two-firm rates.

    Own rates z_ii* = Lambda_ij * v_i; cross rates z_ij* = eta_ip * (v_j - z_jj*),
    the amount of the other firm's residual exposure the principal shifts onto
    firm i.
    """
    lam12, lam21 = lambda_pair(params)
    av = effective_aversions(params)
    v = np.asarray(grad_v, dtype=float)
    z11 = lam12 * v[0]
    z22 = lam21 * v[1]
    return TwoFirmRates(
        z11=z11,
        z12=av.eta_1p * (v[1] - z22),
        z21=av.eta_2p * (v[0] - z11),
        z22=z22,
    )


def hamiltonian_h(params: ModelParams, z, grad_v: Sequence[float]) -> float:
    """Drift objective h(z; Dv) of the principal, before maximization.

    ``z`` is an :class:`IncentiveRates` instance or a flat sequence ((z1, z2)
    for the single-firm model, (z11, z12, z21, z22) for the two-firm model).
    The state does not enter: every x-dependent term of the principal's drift
    cancels against the payment flow.
    """
    _require_kind(params, Kind.SINGLE_FIRM, Kind.TWO_FIRM_REGULATED)
    v1, v2 = float(grad_v[0]), float(grad_v[1])
    za = z.as_array() if isinstance(z, (SingleFirmRates, TwoFirmRates)) else z
    s1, s2 = params.sigma1 ** 2, params.sigma2 ** 2
    ep = params.eta_p

    if params.kind is Kind.SINGLE_FIRM:
        z1, z2 = float(za[0]), float(za[1])
        quad1 = s1 * z1 * z1
        quad2 = s2 * z2 * z2
        return (
            params.gamma1 * z1 * v1 + params.gamma2 * z2 * v2
            + ep * (s1 * z1 * v1 + s2 * z2 * v2)
            - 0.5 * ep * (quad1 + quad2)
            - 0.5 * (params.gamma1 * z1 * z1 + params.gamma2 * z2 * z2)
            - 0.5 * params.eta_a * (quad1 + quad2)
        )

    z11, z12, z21, z22 = (float(za[0]), float(za[1]), float(za[2]), float(za[3]))
    e1, e2 = params.eta1, params.eta2
    pooled1 = z11 + z21
    pooled2 = z22 + z12
    return (
        params.gamma1 * z11 * v1 + params.gamma2 * z22 * v2
        - 0.5 * (params.gamma1 * z11 * z11 + params.gamma2 * z22 * z22)
        - 0.5 * (e1 * s1 * z11 * z11 + e1 * s2 * z12 * z12
                 + e2 * s2 * z22 * z22 + e2 * s1 * z21 * z21)
        - 0.5 * ep * (s1 * pooled1 * pooled1 + s2 * pooled2 * pooled2)
        + ep * (s1 * pooled1 * v1 + s2 * pooled2 * v2)
    )


def _golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Location of the maximum of a unimodal f on [lo, hi]."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def argmax_oracle(
    objective: Callable[[Sequence[float]], float],
    box: Sequence[tuple[float, float]] | None = None,
    coarse_n: int = 201,
    dim: int | None = None,
    expand: bool = True,
    tol: float = 1e-10,
) -> tuple[np.ndarray, float]:
    """Brute-force maximizer of a strictly concave quadratic on a box.

    Cyclic coordinate ascent.  The first pass over a coordinate scans a coarse
    grid (``coarse_n`` points across the box) and golden-sections the best
    bracket down to ``tol``; later passes golden-section a window around the
    current point, falling back to a full scan whenever the maximizer tries to
    leave the window.  A maximizer against the box boundary raises
    :class:`MaximizerOnBoundary`; with ``expand`` the box doubles and the
    search restarts, capped at half-width 1e4.

    Returns ``(z_hat, value)``.  Never differentiates the objective and never
    consults any closed form, so it serves as an independent check of them.
    """
    if box is None:
        if dim is None:
            raise ValueError("either box or dim is required")
        box = [(-10.0, 10.0)] * dim
    bounds = [(float(lo), float(hi)) for lo, hi in box]
    ndim = len(bounds)

    while True:
        z = [0.5 * (lo + hi) for lo, hi in bounds]
        try:
            for cycle in range(200):
                z_start = list(z)
                moved = 0.0
                for k in range(ndim):
                    lo, hi = bounds[k]
                    span = hi - lo
                    step = span / (coarse_n - 1)

                    def along(t: float, k=k) -> float:
                        zz = list(z)
                        zz[k] = t
                        return objective(zz)

                    if cycle == 0:
                        a, b = _scan_bracket(along, lo, hi, coarse_n)
                    else:
                        a = max(lo, z[k] - 2.0 * step)
                        b = min(hi, z[k] + 2.0 * step)
                    t_star = _golden_section_max(along, a, b, tol)
                    # window too tight: the true maximizer sits outside it
                    while cycle > 0 and min(t_star - a, b - t_star) < 1e-3 * (b - a) \
                            and (a > lo or b < hi):
                        a, b = _scan_bracket(along, lo, hi, coarse_n)
                        t_star = _golden_section_max(along, a, b, tol)
                    if min(t_star - lo, hi - t_star) < 1e-6 * span:
                        raise MaximizerOnBoundary(
                            f"coordinate {k} refined onto the box edge {t_star:g}")
                    moved = max(moved, abs(t_star - z[k]))
                    z[k] = t_star
                if moved < 10.0 * tol:
                    break
                # line search along the cycle displacement: collapses the slow
                # geometric tail of coordinate ascent under cross-coupling
                direction = [zi - zs for zi, zs in zip(z, z_start)]
                alpha_hi = 8.0
                for k in range(ndim):
                    lo, hi = bounds[k]
                    if direction[k] > 0.0:
                        alpha_hi = min(alpha_hi, (hi - z[k]) / direction[k])
                    elif direction[k] < 0.0:
                        alpha_hi = min(alpha_hi, (lo - z[k]) / direction[k])
                if alpha_hi > 1e-12:
                    alpha = _golden_section_max(
                        lambda a: objective([zi + a * di for zi, di in zip(z, direction)]),
                        -1.0, alpha_hi, tol / max(moved, tol))
                    z = [zi + alpha * di for zi, di in zip(z, direction)]
            return np.array(z), objective(z)
        except MaximizerOnBoundary:
            if not expand:
                raise
            if any(hi - lo >= 2e4 for lo, hi in bounds):
                raise
            bounds = [(2.0 * lo, 2.0 * hi) if lo < 0 <= hi else (lo - (hi - lo) / 2, hi + (hi - lo) / 2)
                      for lo, hi in bounds]


def _scan_bracket(along: Callable[[float], float], lo: float, hi: float, coarse_n: int) -> tuple[float, float]:
    """Bracket the 1-D maximizer between the neighbors of the best grid point."""
    step = (hi - lo) / (coarse_n - 1)
    best_j, best_val = 0, -math.inf
    for j in range(coarse_n):
        val = along(lo + j * step)
        if val > best_val:
            best_j, best_val = j, val
    if best_j == 0 or best_j == coarse_n - 1:
        raise MaximizerOnBoundary(
            f"grid maximum at the box edge {lo + best_j * step:g}")
    return lo + (best_j - 1) * step, lo + (best_j + 1) * step


def oracle_rates(params: ModelParams, grad_v: Sequence[float], **kwargs) -> tuple[np.ndarray, float]:
    """Maximize the model's drift objective numerically; returns (rates, max value)."""
    dim = 2 if params.kind is Kind.SINGLE_FIRM else 4
    return argmax_oracle(lambda z: hamiltonian_h(params, z, grad_v), dim=dim, **kwargs)


def gradient_couplings(params: ModelParams) -> tuple[float, float]:
    """Coefficients m_i with sup_z h = 0.5*sum_i (m_i + eta_p*sigma_i^2) v_i^2.

    Derived by completing the square in h; the subtraction of the effective
    aversion term (eta_bar_j for the two-firm model) is the sign that survives
    the brute-force check in :func:`decarb.verify.sup_consistency`.
    """
    _require_kind(params, Kind.SINGLE_FIRM, Kind.TWO_FIRM_REGULATED)
    s1, s2 = params.sigma1 ** 2, params.sigma2 ** 2
    ep = params.eta_p
    if params.kind is Kind.SINGLE_FIRM:
        ea = params.eta_a
        m1 = (params.gamma1 + s1 * ep) ** 2 / (s1 * ep + params.gamma1 + ea * s1) - ep * s1
        m2 = (params.gamma2 + s2 * ep) ** 2 / (s2 * ep + params.gamma2 + ea * s2) - ep * s2
        return m1, m2
    av = effective_aversions(params)
    m1 = (params.gamma1 + av.eta_bar_2 * s1) ** 2 / (params.gamma1 + (params.eta1 + av.eta_bar_2) * s1) \
        - av.eta_bar_2 * s1
    m2 = (params.gamma2 + av.eta_bar_1 * s2) ** 2 / (params.gamma2 + (params.eta2 + av.eta_bar_1) * s2) \
        - av.eta_bar_1 * s2
    return m1, m2


def quadratic_flow_coefficients(params: ModelParams) -> tuple[np.ndarray, np.ndarray, float]:
    """Expand f(x) - g(x) as 0.5*x.Qx + L.x + q0 for the active sign convention."""
    _require_kind(params, Kind.SINGLE_FIRM, Kind.TWO_FIRM_REGULATED)
    p0, p1, p2 = params.p0, params.p1, params.p2
    kap, lam, dlt = params.kappa, params.lambda_, params.delta

    if params.kind is Kind.SINGLE_FIRM and params.literal_signs:
        # f = (p0 - p1 x1 + p2 x2)(x1 + x2), g = 0.5*kap*x1^2 + lam*(x1+x2-dlt)^2
        Q = np.array([
            [-2.0 * p1 - kap - 2.0 * lam, -p1 + p2 - 2.0 * lam],
            [-p1 + p2 - 2.0 * lam, 2.0 * p2 - 2.0 * lam],
        ])
        L = np.array([p0 + 2.0 * lam * dlt, p0 + 2.0 * lam * dlt])
        q0 = -lam * dlt * dlt
    elif params.kind is Kind.SINGLE_FIRM:
        # f = (p0 - p1 x1 - p2 x2)(x1 + x2), g = 0.5*kap*x1^2 + 0.5*lam*(x1+x2-dlt)^2
        Q = np.array([
            [-2.0 * p1 - kap - lam, -(p1 + p2) - lam],
            [-(p1 + p2) - lam, -2.0 * p2 - lam],
        ])
        L = np.array([p0 + lam * dlt, p0 + lam * dlt])
        q0 = -0.5 * lam * dlt * dlt
    else:
        # penalized coordinate is x2 in the two-firm model
        Q = np.array([
            [-2.0 * p1 - lam, -(p1 + p2) - lam],
            [-(p1 + p2) - lam, -2.0 * p2 - kap - lam],
        ])
        L = np.array([p0 + lam * dlt, p0 + lam * dlt])
        q0 = -0.5 * lam * dlt * dlt
    return Q, L, q0


def assemble_lqg(params: ModelParams) -> ContractLQG:
    """Assemble the reduced PDE data (Q, L, q0, M, Sigma) for a principal model."""
    Q, L, q0 = quadratic_flow_coefficients(params)
    m1, m2 = gradient_couplings(params)
    return ContractLQG(
        Q=Q,
        L=L,
        q0=q0,
        M=np.diag([m1, m2]),
        Sigma=np.diag([params.sigma1, params.sigma2]),
    )

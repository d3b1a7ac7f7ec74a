"""Structural transformations: the norm-preserving dilation Phi_lambda, the
radial power substitution r -> r^l, and lambda-normalization of the two norms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, RegimeMismatch, ZeroDenominator
from .functionals import norms_first_order
from .model import TestFunction
from .numerics import DEFAULT_SPEC, QuadratureSpec
from .params import CknParams, Regime, reduced_params


class TransformKind(str, enum.Enum):
    PhiScale = "PhiScale"
    Horiuchi = "Horiuchi"
    LambdaNormalize = "LambdaNormalize"


@dataclass(frozen=True)
class TransformRecord:
    kind: TransformKind
    parameter: float
    params_in: CknParams
    params_out: CknParams


def dilate(u: TestFunction, s: float, amp: float = 1.0, label: str | None = None) -> TestFunction:
    """w(x) = amp * u(s x)."""
    if not (math.isfinite(s) and s > 0):
        raise InvalidInput("dilation factor must be positive")
    lo, hi = u.support_hint
    support = (lo / s, hi / s)
    decay = None if u.decay_rate is None else (u.decay_rate[0] * s ** u.decay_rate[1],
                                               u.decay_rate[1])
    label = label if label is not None else f"{amp:g}*({u.label})({s:g}x)"
    if u.is_radial:
        d2 = None
        if u.d2u is not None:
            def d2(r):
                return amp * s * s * u.d2u(s * np.asarray(r, dtype=float))
        return TestFunction(
            "radial",
            lambda r: amp * u.u(s * np.asarray(r, dtype=float)),
            lambda r: amp * s * u.du(s * np.asarray(r, dtype=float)),
            d2, support, decay, label)

    def du(rho, z):
        gr, gz = u.du(s * rho, s * z)
        return amp * s * gr, amp * s * gz

    return TestFunction("axisymmetric", lambda rho, z: amp * u.u(s * rho, s * z), du, None,
                        support, decay, label)


def scale_phi(u: TestFunction, lam: float, params: CknParams) -> TestFunction:
    """Phi_lambda u(x) = lambda^{N/p - c} u(lambda x)."""
    if not (math.isfinite(lam) and lam > 0):
        raise InvalidInput("lambda must be positive")
    amp = lam ** (params.N / params.p - params.c)
    return dilate(u, lam, amp, label=f"Phi_{lam:g}({u.label})")


def horiuchi_reduce(u: TestFunction, params: CknParams):
    """Radial power substitution to the canonical parameters (N, p, -1/(p-1), 0).

    u1(r) = u(rho(r)) with rho(r) = (l^{(p-1)/p} r)^{1/l}.
    """
    if params.regime not in (Regime.P2Case1, Regime.PGt2) or not params.N > params.p:
        raise RegimeMismatch("the power substitution needs N > p and a case-1 type regime")
    if not u.is_radial:
        raise RegimeMismatch("the power substitution is implemented for radial functions")
    l = params.l
    p = params.p
    kap = l ** ((p - 1.0) / p)

    def rho(r):
        return (kap * np.asarray(r, dtype=float)) ** (1.0 / l)

    def u1(r):
        return u.u(rho(r))

    def du1(r):
        r = np.asarray(r, dtype=float)
        q = rho(r)
        return u.du(q) * q / (l * r)

    d2 = None
    if u.d2u is not None:
        def d2(r):
            r = np.asarray(r, dtype=float)
            q = rho(r)
            q1 = q / (l * r)
            q2 = q / (l * r * r) * (1.0 / l - 1.0)
            return u.d2u(q) * q1 * q1 + u.du(q) * q2

    lo, hi = u.support_hint
    support = (lo ** l / kap, hi ** l / kap if math.isfinite(hi) else math.inf)
    decay = None
    if u.decay_rate is not None:
        q0, g0 = u.decay_rate
        decay = (q0 * kap ** (g0 / l), g0 / l)
    u_red = TestFunction("radial", u1, du1, d2, support, decay, f"reduced({u.label})")
    return u_red, reduced_params(params)


def horiuchi_record(params: CknParams) -> TransformRecord:
    return TransformRecord(TransformKind.Horiuchi, params.l, params, reduced_params(params))


def normalize_lambda(u: TestFunction, params: CknParams, spec: QuadratureSpec = DEFAULT_SPEC):
    """Dilate u so that its H_b and L_a norms coincide; returns (u_tilde, lambda)."""
    n = norms_first_order(u, params, spec)
    if not (n.H_b > 0 and n.L_a > 0):
        raise ZeroDenominator("both norms must be positive to balance them")
    lam = n.H_b / n.L_a
    s = lam ** (-1.0 / params.gamma1)
    return dilate(u, s, 1.0, label=f"balanced({u.label})"), lam

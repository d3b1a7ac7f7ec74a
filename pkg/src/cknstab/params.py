"""Parameter validation, regime classification and closed-form constants.

First-order family (p, a, b) with c = ((p-1)a + b + 1)/p and
second-order family with c2 = (b + (p-1)a + 1)/p.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

from .errors import InvalidInput, UnsupportedRegime
from .numerics import gamma_moment, sphere_area

TOL = 1e-10


class Regime(str, enum.Enum):
    P2Case1 = "P2Case1"
    P2Case2 = "P2Case2"
    PGt2 = "PGt2"
    SecondOrder = "SecondOrder"
    Unsupported = "Unsupported"


@dataclass(frozen=True)
class CknParams:
    N: int
    p: float
    a: float
    b: float
    c: float
    S: float
    alpha: float
    C1: float
    gamma1: float
    l: float | None
    regime: Regime

    @property
    def e0(self) -> float:
        """Power of r multiplying the exponential in the minimizer profile."""
        return 2.0 * self.b + 2.0 - self.N if self.regime is Regime.P2Case2 else 0.0

    @property
    def key(self) -> tuple:
        return (self.N, self.p, self.a, self.b)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


@dataclass(frozen=True)
class Ckn2Params:
    N: int
    p: float
    a: float
    b: float
    c2: float
    K: float
    beta: float
    C3: float
    gamma2: float
    eps: int
    regime: Regime = Regime.SecondOrder

    @property
    def key(self) -> tuple:
        return (self.N, self.p, self.a, self.b)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


def _check_inputs(N, p, a, b):
    for name, val in (("N", N), ("p", p), ("a", a), ("b", b)):
        try:
            fv = float(val)
        except (TypeError, ValueError):
            raise InvalidInput(f"{name} must be numeric, got {val!r}") from None
        if not math.isfinite(fv):
            raise InvalidInput(f"{name} must be finite")
    if float(N) != int(N) or int(N) < 1:
        raise InvalidInput("N must be a positive integer")
    if float(p) <= 1.0:
        raise InvalidInput("p must exceed 1")
    return int(N), float(p), float(a), float(b)


def _first_order_regime(N, p, a, b) -> Regime:
    if abs(p - 2.0) <= TOL:
        if N > 2:
            case1 = (0.0 <= b < (N - 2) / 2 and a < N * b / (N - 2)
                     and abs(a + b + 1.0 - 2.0 * b * N / (N - 2)) <= TOL)
            if case1:
                return Regime.P2Case1
        case2 = ((N - 2) / 2 < b <= N - 2 + TOL
                 and abs(N * (b - a + 3.0) - 2.0 * (3.0 * b - a + 3.0)) <= TOL)
        if case2 and b + 1.0 - a > 0 and (3 * b - a - N + 3) / 2 > 0:
            return Regime.P2Case2
        return Regime.Unsupported
    if p > 2.0 and N > p:
        ok = (0.0 <= b < (N - p) / p and a < N * b / (N - p)
              and abs((p - 1) * a + b + 1.0 - p * b * N / (N - p)) <= TOL)
        if ok:
            return Regime.PGt2
    return Regime.Unsupported


def _second_order_ok(N, p, a, b) -> bool:
    if not (2.0 - TOL <= p < N):
        return False
    if not (1.0 - N <= b < N * (1.0 - p) / p):
        return False
    if not b - a + 1.0 > 0:
        return False
    target = N * p * b / (N - p) + p * p * (N - 1) / (N - p)
    if abs(b + (p - 1) * a + 1.0 - target) > TOL:
        return False
    return (-b - (p - 1) * a - (p - 1) * (N - 1)) / p > 0


def classify_regime(N, p, a, b, order: str = "first") -> Regime:
    """Return the matching regime tag, or Unsupported; never raises."""
    try:
        N, p, a, b = _check_inputs(N, p, a, b)
    except InvalidInput:
        return Regime.Unsupported
    if order == "first":
        return _first_order_regime(N, p, a, b)
    if order == "second":
        return Regime.SecondOrder if _second_order_ok(N, p, a, b) else Regime.Unsupported
    return Regime.Unsupported


def _normalizer(N, p, s, gam):
    """(|S^{N-1}| int_0^inf r^s exp(-p r^gam / gam) dr)^{-1/p}."""
    if s <= -1.0:
        raise UnsupportedRegime("profile is not integrable at the origin")
    return (sphere_area(N) * gamma_moment(s, p / gam, gam)) ** (-1.0 / p)


def derive_first_order(N, p, a, b) -> CknParams:
    N, p, a, b = _check_inputs(N, p, a, b)
    regime = _first_order_regime(N, p, a, b)
    if regime is Regime.Unsupported:
        raise UnsupportedRegime(f"(N,p,a,b)=({N},{p},{a},{b}) fits no first-order regime")
    if abs(p - 2.0) <= TOL:
        p = 2.0
    c = ((p - 1) * a + b + 1) / p
    gamma1 = b + 1 - a
    if regime is Regime.P2Case2:
        S = (3 * b - a - N + 3) / 2
        e0 = 2 * b + 2 - N
    else:
        S = (N - 1 - (p - 1) * a - b) / p
        e0 = 0.0
    alpha = S / gamma1
    C1 = _normalizer(N, p, p * e0 + N - 1 - p * c, gamma1)
    l = None
    if N > p:
        lv = (N - p - p * b) / (N - p)
        if 0.0 < lv <= 1.0 and regime is not Regime.P2Case2:
            l = lv
    return CknParams(N, p, a, b, c, S, alpha, C1, gamma1, l, regime)


def derive_second_order(N, p, a, b) -> Ckn2Params:
    N, p, a, b = _check_inputs(N, p, a, b)
    if not _second_order_ok(N, p, a, b):
        raise UnsupportedRegime(f"(N,p,a,b)=({N},{p},{a},{b}) fits no second-order regime")
    c2 = (b + (p - 1) * a + 1) / p
    K = (-b - (p - 1) * a - (p - 1) * (N - 1)) / p
    gamma2 = b - a + 1
    beta = K / gamma2
    eps = 1 if p * b + (p - 1) * N > 0 else -1
    C3 = _normalizer(N, p, p * (1 - N) + N - 1 - p * c2, gamma2)
    return Ckn2Params(N, p, a, b, c2, K, beta, C3, gamma2, eps)


def reduced_params(params: CknParams) -> CknParams:
    """Canonical parameters (N, p, -1/(p-1), 0) reached by the radial power substitution."""
    return derive_first_order(params.N, params.p, -1.0 / (params.p - 1.0), 0.0)

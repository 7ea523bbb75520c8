"""Convex Orlicz functions, their inverses, and a small text grammar for them.

Descriptor grammar (used by the CLI and for round-tripping)::

    pow:<p>                 x ** p, p >= 1
    exp:<beta>              exp(x / beta) - 1
    exppow:<beta>           exp(x ** beta) - 1, beta > 1
    sup(<spec>,<spec>)      pointwise maximum
    mix:<alpha>(<spec>,<spec>)  alpha * first + (1 - alpha) * second
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

FLOAT_MAX = float(np.finfo(float).max)
LOG_FLOAT_MAX = math.log(FLOAT_MAX)

# Upper end of the exp_power exponent range used by the Hellinger-comparison
# theory; outside it the function is still a valid Orlicz function.
EXPPOW_THEORY_BETA_MAX = 16.0 / 15.0


def _as_nonnegative(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("Orlicz functions are defined on [0, inf)")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


class Phi:
    """Base class: a convex, nondecreasing f on [0, inf) with f(0) = 0.

    Subclasses implement ``_log_value`` (log f, -inf at 0) and ``_value``;
    ``__call__`` saturates overflow to the largest finite double.
    """

    # analytic form of the "f(x)/x -> 0 at 0" requirement
    sublinear_at_origin: bool = True

    def __call__(self, x):
        arr = _as_nonnegative(x)
        with np.errstate(over="ignore"):
            val = self._value(arr)
        val = np.where(np.isinf(val), FLOAT_MAX, val)
        return _out(val, x)

    def log_value(self, x):
        arr = _as_nonnegative(x)
        with np.errstate(divide="ignore", over="ignore"):
            val = self._log_value(arr)
        return _out(val, x)

    def overflows(self, x):
        """True where the exact value exceeds the double range."""
        return np.asarray(self.log_value(x)) > LOG_FLOAT_MAX

    def inverse(self, y):
        arr = _as_nonnegative(y)
        val = self._inverse(arr)
        return _out(val, y)

    def _inverse(self, y):
        with np.errstate(over="ignore"):
            return np.vectorize(self._bisect_inverse, otypes=[float])(y)

    def _bisect_inverse(self, y: float) -> float:
        if y == 0:
            return 0.0
        hi = 1.0
        while self._value(np.float64(hi)) < y:
            hi *= 2.0
        lo = 0.0
        while True:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            if self._value(np.float64(mid)) < y:
                lo = mid
            else:
                hi = mid
        return hi

    @property
    def spec(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.spec


@dataclass(frozen=True)
class Power(Phi):
    p: float

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"power Orlicz function needs p >= 1, got {self.p}")

    @property
    def sublinear_at_origin(self) -> bool:  # type: ignore[override]
        return self.p > 1

    def _value(self, x):
        return x**self.p

    def _log_value(self, x):
        return self.p * np.log(x)

    def _inverse(self, y):
        return y ** (1.0 / self.p)

    @property
    def spec(self) -> str:
        return f"pow:{self.p!r}"


@dataclass(frozen=True)
class ExpLinear(Phi):
    """exp(x / beta) - 1; behaves like x / beta at 0, so not sublinear there."""

    beta: float
    sublinear_at_origin = False

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"exp Orlicz function needs beta > 0, got {self.beta}")

    def _value(self, x):
        return np.expm1(x / self.beta)

    def _log_value(self, x):
        t = x / self.beta
        return t + np.log(-np.expm1(-t))

    def _inverse(self, y):
        return self.beta * np.log1p(y)

    @property
    def spec(self) -> str:
        return f"exp:{self.beta!r}"


@dataclass(frozen=True)
class ExpPower(Phi):
    beta: float

    def __post_init__(self):
        if not self.beta > 1:
            raise ValueError(f"exppow Orlicz function needs beta > 1, got {self.beta}")

    @property
    def in_theory_regime(self) -> bool:
        return self.beta < EXPPOW_THEORY_BETA_MAX

    def _value(self, x):
        return np.expm1(x**self.beta)

    def _log_value(self, x):
        t = x**self.beta
        return t + np.log(-np.expm1(-t))

    def _inverse(self, y):
        return np.log1p(y) ** (1.0 / self.beta)

    @property
    def spec(self) -> str:
        return f"exppow:{self.beta!r}"


@dataclass(frozen=True)
class Sup(Phi):
    first: Phi
    second: Phi

    @property
    def sublinear_at_origin(self) -> bool:  # type: ignore[override]
        return self.first.sublinear_at_origin and self.second.sublinear_at_origin

    def _value(self, x):
        return np.maximum(self.first._value(x), self.second._value(x))

    def _log_value(self, x):
        return np.maximum(self.first._log_value(x), self.second._log_value(x))

    def _inverse(self, y):
        # the max crosses level y where the faster branch does
        return np.minimum(self.first._inverse(y), self.second._inverse(y))

    @property
    def spec(self) -> str:
        return f"sup({self.first.spec},{self.second.spec})"


@dataclass(frozen=True)
class Mixture(Phi):
    alpha: float
    first: Phi
    second: Phi

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"mixture weight must lie in [0, 1], got {self.alpha}")

    @property
    def sublinear_at_origin(self) -> bool:  # type: ignore[override]
        return self.first.sublinear_at_origin and self.second.sublinear_at_origin

    def _value(self, x):
        # skip zero-weight terms so 0 * inf never appears
        out = np.zeros_like(x, dtype=float)
        if self.alpha > 0:
            out = out + self.alpha * self.first._value(x)
        if self.alpha < 1:
            out = out + (1 - self.alpha) * self.second._value(x)
        return out

    def _log_value(self, x):
        with np.errstate(divide="ignore"):
            la = np.log(self.alpha) + self.first._log_value(x)
            lb = np.log1p(-self.alpha) + self.second._log_value(x)
        return np.logaddexp(la, lb)

    @property
    def spec(self) -> str:
        return f"mix:{self.alpha!r}({self.first.spec},{self.second.spec})"


def sup_phi(a: Phi, b: Phi) -> Sup:
    return Sup(a, b)


def mix_phi(alpha: float, a: Phi, b: Phi) -> Mixture:
    return Mixture(alpha, a, b)


class OrliczReport(NamedTuple):
    condition_i: bool  # f(x)/x -> inf as x -> inf
    condition_ii: bool  # f(x)/x -> 0 as x -> 0


def check_orlicz_conditions(phi: Phi) -> OrliczReport:
    """Numerical probe of the two growth conditions on f(x)/x.

    Ratios are compared in log space so exponential kinds do not saturate.
    """

    def log_ratio(x):
        return phi.log_value(x) - math.log(x)

    # far-out probes so slow rates such as x ** 1.05 are still resolved
    big = [log_ratio(1e50), log_ratio(1e100)]
    small = [log_ratio(1e-100), log_ratio(1e-200)]
    cond_i = big[1] == math.inf or (big[1] > big[0] and big[1] > math.log(1e3))
    cond_ii = small[1] < small[0] and small[1] < math.log(1e-3)
    return OrliczReport(bool(cond_i), bool(cond_ii))


# ---------------------------------------------------------------- descriptors


def parse_phi(text: str) -> Phi:
    text = text.strip()
    try:
        phi, rest = _parse(text.replace(" ", ""))
    except (ValueError, IndexError) as exc:
        raise ValueError(f"bad Orlicz descriptor {text!r}: {exc}") from None
    if rest:
        raise ValueError(f"bad Orlicz descriptor {text!r}: trailing {rest!r}")
    return phi


def _parse(s: str) -> tuple[Phi, str]:
    if s.startswith("sup("):
        a, s = _parse(s[4:])
        s = _expect(s, ",")
        b, s = _parse(s)
        return Sup(a, b), _expect(s, ")")
    if s.startswith("mix:"):
        num, s = s[4:].split("(", 1)
        a, s = _parse(s)
        s = _expect(s, ",")
        b, s = _parse(s)
        return Mixture(float(num), a, b), _expect(s, ")")
    for prefix, cls in (("pow:", Power), ("exppow:", ExpPower), ("exp:", ExpLinear)):
        if s.startswith(prefix):
            body = s[len(prefix):]
            end = len(body)
            for stop in ",)":
                pos = body.find(stop)
                if pos != -1:
                    end = min(end, pos)
            return cls(float(body[:end])), body[end:]
    raise ValueError(f"unknown kind at {s!r}")


def _expect(s: str, token: str) -> str:
    if not s.startswith(token):
        raise ValueError(f"expected {token!r} at {s!r}")
    return s[len(token):]

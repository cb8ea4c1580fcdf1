"""Covariance eigenvalue sequences and their tail sums.

Spectra are immutable. Eigenvalues are indexed from 1 as ``lambda_1 >=
lambda_2 >= ...``; tail sums ``sum_{i>k} lambda_i**power`` are returned as a
:class:`TailSum` bracket, exact for finite spectra and closed-form families and
bracketed by integral tests otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar

import mpmath
import numpy as np
from scipy import special

from .errors import (
    BracketTooWide,
    ConfigError,
    InvalidRankSequence,
    NegativeEigenvalue,
)
from .rates import RateRule, as_rule

DEFAULT_TOL = 1e-10
MAX_TERMS = 10**6
# finite spectra longer than this use closed forms instead of direct sums
DIRECT_SUM_LIMIT = 2 * 10**6


@dataclass(frozen=True)
class TailSum:
    value: float
    lower: float
    upper: float
    exact: bool
    infinite: bool = False

    @classmethod
    def exact_value(cls, v: float) -> "TailSum":
        return cls(v, v, v, True)

    @classmethod
    def divergent(cls) -> "TailSum":
        return cls(math.inf, math.inf, math.inf, False, True)

    def shifted(self, s: float) -> "TailSum":
        """The bracket plus an exactly known amount ``s``."""
        if self.infinite:
            return self
        return TailSum(self.value + s, self.lower + s, self.upper + s, self.exact)

    @property
    def rel_width(self) -> float:
        if self.infinite or self.value == 0:
            return 0.0
        return (self.upper - self.lower) / self.value


def _check_power(power: int) -> None:
    if power not in (1, 2):
        raise ConfigError(f"tail power must be 1 or 2, got {power!r}")


class Spectrum:
    """Base class; subclasses define ``eigenvalues`` and ``length``."""

    kind: ClassVar[str] = "family"
    variant: ClassVar[str] = ""

    @property
    def length(self) -> int | None:
        """Number of (possibly zero) listed eigenvalues, None if infinite."""
        raise NotImplementedError

    @property
    def is_finite(self) -> bool:
        return self.length is not None

    def eigenvalues(self, start: int, stop: int) -> np.ndarray:
        """lambda_start, ..., lambda_stop (1-based, inclusive), zero past the end."""
        idx = np.arange(start, stop + 1, dtype=np.float64)
        out = self._values_at(idx) if len(idx) else idx
        if self.length is not None:
            out = np.where(idx <= self.length, out, 0.0)
        return out

    def _values_at(self, idx: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eigenvalue(self, i: int) -> float:
        if i < 1:
            raise ConfigError(f"eigenvalue index must be >= 1, got {i}")
        return float(self.eigenvalues(i, i)[0])

    @property
    def norm(self) -> float:
        return self.eigenvalue(1)

    def tail_sum(self, k: int, power: int = 1, tol: float = DEFAULT_TOL,
                 max_terms: int = MAX_TERMS) -> TailSum:
        _check_power(power)
        if k < 0:
            raise ConfigError(f"tail index must be >= 0, got {k}")
        if tol <= 0:
            raise ConfigError("tol must be positive")
        if self.length is not None and k >= self.length:
            return TailSum.exact_value(0.0)
        return self._tail(k, power, tol, max_terms)

    def _tail(self, k: int, power: int, tol: float, max_terms: int) -> TailSum:
        n = self.length
        if n is None:
            raise NotImplementedError
        if n - k > DIRECT_SUM_LIMIT:
            return self._closed_tail(k, power)
        vals = self.eigenvalues(k + 1, n)
        # reversed order adds the small tail entries first
        return TailSum.exact_value(float(np.sum(vals[::-1] ** power)))

    def _closed_tail(self, k: int, power: int) -> TailSum:
        raise NotImplementedError(f"{self.variant} has no closed-form tail")

    @property
    def rank(self) -> int | None:
        """Number of strictly positive eigenvalues (None if infinite)."""
        return self.length

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "variant": self.variant, "params": self.params()}


@dataclass(frozen=True, eq=False)
class ExplicitSpectrum(Spectrum):
    """A finite list of eigenvalues.

    ``remainder`` is the known mass ``sum_{i>len} lambda_i`` of an implicit
    continuation (used by :func:`spectrum_from_ranks`); zero for a genuinely
    finite spectrum.
    """

    values: np.ndarray
    reordered: bool = False
    remainder: float = 0.0

    kind: ClassVar[str] = "explicit"
    variant: ClassVar[str] = "explicit"

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def length(self) -> int:
        return len(self.values)

    def _values_at(self, idx: np.ndarray) -> np.ndarray:
        pos = np.clip(idx.astype(np.int64) - 1, 0, len(self.values) - 1)
        return self.values[pos]

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.values))

    def tail_sum(self, k, power=1, tol=DEFAULT_TOL, max_terms=MAX_TERMS):
        _check_power(power)
        if k < 0:
            raise ConfigError(f"tail index must be >= 0, got {k}")
        body = float(np.sum(self.values[k:][::-1] ** power)) if k < self.length else 0.0
        if self.remainder == 0.0:
            return TailSum.exact_value(body)
        if power == 1:
            return TailSum.exact_value(body + self.remainder)
        # every continuation eigenvalue is at most the last listed one
        hi = self.values[-1] * self.remainder
        ts = TailSum((body + body + hi) / 2, body, body + hi, False)
        if ts.rel_width > tol:
            raise BracketTooWide(ts.lower, ts.upper, self.length, tol)
        return ts

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["values"] = [repr(float(v)) for v in self.values]
        if self.remainder:
            d["params"] = {"remainder": repr(float(self.remainder))}
        return d


@dataclass(frozen=True)
class Geometric(Spectrum):
    """lambda_i = q**i."""

    q: float
    variant: ClassVar[str] = "geometric"

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ConfigError(f"geometric ratio must lie in (0, 1), got {self.q}")

    @property
    def length(self):
        return None

    def _values_at(self, idx):
        return self.q**idx

    def _tail(self, k, power, tol, max_terms):
        qp = self.q**power
        return TailSum.exact_value(qp ** (k + 1) / (1.0 - qp))

    def params(self):
        return {"q": self.q}


@dataclass(frozen=True)
class Constant(Spectrum):
    """p unit eigenvalues (the identity covariance on R^p)."""

    p: int
    variant: ClassVar[str] = "constant"

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError(f"constant spectrum needs p >= 1, got {self.p}")

    @property
    def length(self):
        return self.p

    def _values_at(self, idx):
        return np.ones_like(idx)

    def _tail(self, k, power, tol, max_terms):
        return TailSum.exact_value(float(self.p - k))

    def params(self):
        return {"p": self.p}


def _hurwitz_range(s: float, lo: int, hi: int) -> float:
    """sum_{i=lo}^{hi} i**-s via Hurwitz zeta differences (any real s)."""
    with mpmath.workdps(40):
        if s == 1:
            v = mpmath.digamma(hi + 1) - mpmath.digamma(lo)
        else:
            v = mpmath.zeta(s, lo) - mpmath.zeta(s, hi + 1)
        return float(v)


def _poly_log_integral(a: float, b: float, x: float) -> float:
    """int_x^inf t**-a * log(t+1)**-b dt, for a > 1 or (a == 1 and b > 1).

    With u = log(t+1) the integrand is exp(-(a-1)u) u**-b (1 - e**-u)**-a;
    the part without the last factor is an incomplete gamma function and the
    correction decays like exp(-a u).
    """
    with mpmath.workdps(30):
        U = mpmath.log1p(x)
        c = mpmath.mpf(a) - 1
        if c == 0:
            main = U ** (1 - b) / (b - 1)
        else:
            main = c ** (b - 1) * mpmath.gammainc(1 - b, c * U)

        def corr(u):
            return mpmath.exp(-c * u) * u ** (-b) * ((-mpmath.expm1(-u)) ** (-a) - 1)

        return float(main + mpmath.quad(corr, [U, U + 1, U + 10, mpmath.inf]))


def _convex_beyond(a: float, b: float, x0: float) -> bool:
    """Whether t**-a log(t+1)**-b is convex on [x0, 1e15] (checked on a grid)."""
    if b >= 0:
        return True
    xs = x0 * 2.0 ** np.arange(0, max(1, int(math.log2(1e15 / x0)) + 1))
    L = np.log1p(xs)
    g = -a / xs - b / ((xs + 1) * L)
    gp = a / xs**2 + b * (L + 1) / ((xs + 1) ** 2 * L**2)
    return bool(np.all(g * g + gp >= 0))


@dataclass(frozen=True)
class PolyLog(Spectrum):
    """lambda_k = k**-alpha * log(k+1)**-beta."""

    alpha: float
    beta: float = 0.0
    variant: ClassVar[str] = "polylog"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError(f"polylog needs alpha > 0, got {self.alpha}")
        # nonincreasing from k=1 on needs alpha * 2 log 2 >= -beta
        if self.beta < 0 and self.alpha * 2 * math.log(2) < -self.beta:
            raise ConfigError(
                f"polylog(alpha={self.alpha}, beta={self.beta}) is not nonincreasing"
            )

    @property
    def length(self):
        return None

    def _values_at(self, idx):
        out = idx ** (-self.alpha)
        if self.beta:
            out = out * np.log1p(idx) ** (-self.beta)
        return out

    def diverges(self, power: int) -> bool:
        a, b = self.alpha * power, self.beta * power
        return a < 1 or (a == 1 and b <= 1)

    def _tail(self, k, power, tol, max_terms):
        if self.diverges(power):
            return TailSum.divergent()
        a, b = self.alpha * power, self.beta * power
        if b == 0:
            return TailSum.exact_value(float(special.zeta(a, k + 1)))
        return _bracketed_tail(a, b, k, tol, max_terms)

    def params(self):
        return {"alpha": self.alpha, "beta": self.beta}


def _bracketed_tail(a: float, b: float, k: int, tol: float, max_terms: int) -> TailSum:
    """Partial sum plus convexity-sharpened integral-test bracket.

    For f convex and decreasing on [N, inf):
    I(N+1) + f(N+1)/2 <= sum_{i>N} f(i) <= I(N+1/2).
    """

    def f(x):
        return x ** (-a) * np.log1p(x) ** (-b)

    start = k + 1
    N = k + 256
    while not _convex_beyond(a, b, N):
        N *= 2
    cap = k + max_terms
    partial = 0.0
    summed_to = k
    while True:
        N = min(N, cap)
        if N > summed_to:
            idx = np.arange(summed_to + 1, N + 1, dtype=np.float64)
            partial += float(np.sum(f(idx)[::-1]))
            summed_to = N
        fN1 = float(f(np.float64(N + 1)))
        lo = partial + _poly_log_integral(a, b, N + 1) + fN1 / 2
        hi = partial + _poly_log_integral(a, b, N + 0.5)
        hi = max(hi, lo)
        ts = TailSum((lo + hi) / 2, lo, hi, False)
        if ts.rel_width <= tol:
            return ts
        if N >= cap:
            raise BracketTooWide(lo, hi, N - start + 1, tol)
        N *= 4


@dataclass(frozen=True)
class Exponent(PolyLog):
    """lambda_k = k**-(1 + alpha_n) for a fixed n."""

    variant: ClassVar[str] = "exponent"

    def __init__(self, alpha: float):
        if alpha <= 0:
            raise ConfigError(f"exponent family needs alpha > 0, got {alpha}")
        object.__setattr__(self, "alpha", 1.0 + alpha)
        object.__setattr__(self, "beta", 0.0)

    @property
    def excess(self) -> float:
        return self.alpha - 1.0

    def params(self):
        return {"alpha": self.excess}


@dataclass(frozen=True)
class TruncatedPoly(Spectrum):
    """lambda_k = k**-alpha for k <= p, zero beyond."""

    alpha: float
    p: int
    variant: ClassVar[str] = "truncpoly"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError(f"truncpoly needs alpha > 0, got {self.alpha}")
        if self.p < 1:
            raise ConfigError(f"truncpoly needs p >= 1, got {self.p}")

    @property
    def length(self):
        return self.p

    def _values_at(self, idx):
        return idx ** (-self.alpha)

    def _closed_tail(self, k, power):
        return TailSum.exact_value(_hurwitz_range(self.alpha * power, k + 1, self.p))

    def params(self):
        return {"alpha": self.alpha, "p": self.p}


@dataclass(frozen=True)
class ExpPlusIso(Spectrum):
    """lambda_k = exp(-(k-1)/tau) + eps for k <= p, zero beyond."""

    tau: float
    eps: float
    p: int
    variant: ClassVar[str] = "expiso"

    def __post_init__(self):
        if self.tau <= 0 or self.eps <= 0 or self.p < 1:
            raise ConfigError(
                f"expiso needs tau > 0, eps > 0, p >= 1 (got {self.tau}, {self.eps}, {self.p})"
            )

    @property
    def length(self):
        return self.p

    def _values_at(self, idx):
        return np.exp(-(idx - 1) / self.tau) + self.eps

    def _closed_tail(self, k, power):
        m = self.p - k

        def geo(rate):
            # sum_{i=k+1}^{p} exp(-rate (i-1))
            return math.exp(-rate * k) * math.expm1(-rate * m) / math.expm1(-rate)

        g1 = geo(1 / self.tau)
        if power == 1:
            return TailSum.exact_value(g1 + m * self.eps)
        return TailSum.exact_value(geo(2 / self.tau) + 2 * self.eps * g1 + m * self.eps**2)

    def params(self):
        return {"tau": self.tau, "eps": self.eps, "p": self.p}


# ---------------------------------------------------------------------------
# families indexed by n


_VARIANT_KEYS = {
    "polylog": ("alpha", "beta"),
    "exponent": ("alpha",),
    "truncpoly": ("alpha", "p"),
    "expiso": ("tau", "eps", "epsp", "p"),
    "geometric": ("q",),
    "constant": ("p",),
}


@dataclass(frozen=True)
class FamilySpec:
    """A sequence of spectra Sigma_n whose parameters may be rules of n.

    For ``expiso`` exactly one of ``eps`` (the isotropic level) or ``epsp``
    (the total isotropic mass eps_n * p_n) is given.
    """

    variant: str
    params: tuple[tuple[str, RateRule], ...] = field(default_factory=tuple)

    @classmethod
    def make(cls, variant: str, **params) -> "FamilySpec":
        variant = variant.lower()
        if variant not in _VARIANT_KEYS:
            raise ConfigError(f"unknown family variant {variant!r}")
        allowed = _VARIANT_KEYS[variant]
        bad = set(params) - set(allowed)
        if bad:
            raise ConfigError(f"{variant} does not take parameters {sorted(bad)}")
        rules = tuple((k, as_rule(params[k])) for k in allowed if k in params)
        spec = cls(variant, rules)
        spec._validate()
        return spec

    def _validate(self) -> None:
        p = self.param_dict
        required = {
            "polylog": ("alpha",),
            "exponent": ("alpha",),
            "truncpoly": ("alpha", "p"),
            "expiso": ("tau", "p"),
            "geometric": ("q",),
            "constant": ("p",),
        }[self.variant]
        missing = [k for k in required if k not in p]
        if missing:
            raise ConfigError(f"{self.variant} is missing parameters {missing}")
        if self.variant == "expiso" and ("eps" in p) == ("epsp" in p):
            raise ConfigError("expiso needs exactly one of eps or epsp")
        for name in ("alpha", "beta", "q", "tau"):
            if name in p and self.variant != "exponent" and not p[name].is_constant:
                raise ConfigError(f"{self.variant} parameter {name} must be a constant")

    @property
    def param_dict(self) -> dict[str, RateRule]:
        return dict(self.params)

    @property
    def depends_on_n(self) -> bool:
        return any(not r.is_constant for _, r in self.params)

    @property
    def finite_dimensional(self) -> bool:
        return self.variant in ("truncpoly", "expiso", "constant")

    def at(self, n: int) -> Spectrum:
        p = self.param_dict
        v = self.variant
        if v == "polylog":
            return PolyLog(p["alpha"](n), p["beta"](n) if "beta" in p else 0.0)
        if v == "exponent":
            return Exponent(p["alpha"](n))
        if v == "truncpoly":
            return TruncatedPoly(p["alpha"](n), p["p"].int_at(n))
        if v == "expiso":
            dim = p["p"].int_at(n)
            eps = p["eps"](n) if "eps" in p else p["epsp"](n) / dim
            return ExpPlusIso(p["tau"](n), eps, dim)
        if v == "geometric":
            return Geometric(p["q"](n))
        return Constant(p["p"].int_at(n))

    def to_dict(self) -> dict:
        return {
            "kind": "family",
            "variant": self.variant,
            "params": {k: str(r) for k, r in self.params},
        }

    def __str__(self) -> str:
        inner = ",".join(f"{k}={r}" for k, r in self.params)
        return f"{self.variant}:{inner}"


# ---------------------------------------------------------------------------
# module-level operations


def make_explicit(values) -> ExplicitSpectrum:
    vals = [float(v) for v in values]
    if not vals:
        raise ConfigError("explicit spectrum needs at least one value")
    for i, v in enumerate(vals, start=1):
        if not v >= 0:
            raise NegativeEigenvalue(i, v)
    ordered = sorted(vals, reverse=True)
    return ExplicitSpectrum(np.array(ordered), reordered=ordered != vals)


def eigenvalue(spec: Spectrum, i: int) -> float:
    return spec.eigenvalue(i)


def tail_sum(spec: Spectrum, k: int, power: int = 1, tol: float = DEFAULT_TOL,
             max_terms: int = MAX_TERMS) -> TailSum:
    return spec.tail_sum(k, power, tol, max_terms)


def spectrum_from_ranks(u, m: int | None = None, scale: float = 1.0) -> ExplicitSpectrum:
    """Eigenvalues whose effective ranks r_0, r_1, ... equal ``u``.

    lambda_k = scale * u_{k-1}**-1 * prod_{i<k-1} (1 - 1/u_i), accumulated in
    log space. The returned spectrum lists lambda_1..lambda_m and carries the
    remaining mass ``scale * prod_{i<m} (1 - 1/u_i)`` as its ``remainder``.
    The unscaled sequence sums to 1; any positive ``scale`` gives the same ranks.
    """
    u = np.asarray(u, dtype=np.float64)
    if m is None:
        m = len(u)
    if m < 1:
        raise ConfigError("m must be >= 1")
    if len(u) < m:
        raise ConfigError(f"need at least m={m} rank values, got {len(u)}")
    u = u[:m]
    for i, ui in enumerate(u, start=1):
        if not ui > 1:
            raise InvalidRankSequence(i, float(ui))
    if scale <= 0:
        raise ConfigError("scale must be positive")
    log_keep = np.log1p(-1.0 / u)
    log_prefix = np.concatenate(([0.0], np.cumsum(log_keep)))
    lam = np.exp(log_prefix[:m] - np.log(u))
    remainder = math.exp(log_prefix[m])
    return ExplicitSpectrum(scale * lam, remainder=scale * remainder)


def truncate(spec: Spectrum, p: int, tol: float = DEFAULT_TOL) -> tuple[ExplicitSpectrum, float]:
    """First p eigenvalues (zero-padded) and the discarded mass sum_{i>p} lambda_i."""
    if p < 1:
        raise ConfigError(f"truncation dimension must be >= 1, got {p}")
    vals = spec.eigenvalues(1, p)
    discarded = spec.tail_sum(p, 1, tol)
    return ExplicitSpectrum(vals), discarded.value


def spectrum_from_dict(d: dict) -> Spectrum | FamilySpec:
    """Inverse of ``to_dict`` for explicit spectra, concrete families and FamilySpecs."""
    kind, variant = d.get("kind"), d.get("variant")
    params = d.get("params") or {}
    if kind == "explicit":
        vals = [float(v) for v in d["values"]]
        return ExplicitSpectrum(np.array(vals), remainder=float(params.get("remainder", 0.0)))
    if kind != "family":
        raise ConfigError(f"unknown spectrum kind {kind!r}")
    if any(isinstance(v, str) for v in params.values()):
        return FamilySpec.make(variant, **params)
    ctor = {
        "polylog": lambda: PolyLog(params["alpha"], params.get("beta", 0.0)),
        "exponent": lambda: Exponent(params["alpha"]),
        "truncpoly": lambda: TruncatedPoly(params["alpha"], int(params["p"])),
        "expiso": lambda: ExpPlusIso(params["tau"], params["eps"], int(params["p"])),
        "geometric": lambda: Geometric(params["q"]),
        "constant": lambda: Constant(int(params["p"])),
    }
    if variant not in ctor:
        raise ConfigError(f"unknown family variant {variant!r}")
    return ctor[variant]()

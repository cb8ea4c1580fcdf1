"""Rate rules ``n -> value`` with symbolic asymptotic comparisons.

A rule has the closed form::

    coef * n**power * log(n)**log_power * exp(exp_coef * n**exp_power)

optionally wrapped in ``ceil``. Its logarithm is a linear combination of
the growth scales ``n**e`` (e > 0), ``log n``, ``log log n`` and 1, so
little-o / little-omega questions between rules reduce to the sign of the
leading coefficient of a difference of such combinations.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import ConfigError

_CONST = (0, 0.0)
_LOGLOG = (1, 0.0)
_LOG = (2, 0.0)


def _pow_key(e: float) -> tuple[int, float]:
    return (3, float(e))


@dataclass(frozen=True)
class LogGrowth:
    """A finite sum ``sum_j c_j * basis_j(n)`` ordered by growth of the basis."""

    terms: tuple[tuple[tuple[int, float], float], ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "LogGrowth":
        return cls(tuple(sorted((k, v) for k, v in d.items() if v != 0.0)))

    def as_dict(self) -> dict:
        return dict(self.terms)

    def __add__(self, other: "LogGrowth") -> "LogGrowth":
        d = self.as_dict()
        for k, v in other.terms:
            d[k] = d.get(k, 0.0) + v
        return LogGrowth.from_dict(d)

    def __neg__(self) -> "LogGrowth":
        return LogGrowth(tuple((k, -v) for k, v in self.terms))

    def __sub__(self, other: "LogGrowth") -> "LogGrowth":
        return self + (-other)

    def scale(self, c: float) -> "LogGrowth":
        return LogGrowth.from_dict({k: c * v for k, v in self.terms})

    def leading(self) -> tuple[tuple[int, float], float] | None:
        """Leading non-constant term, or None if the expression is bounded."""
        growing = [(k, v) for k, v in self.terms if k != _CONST]
        return max(growing) if growing else None

    def to_plus_infinity(self) -> bool:
        lead = self.leading()
        return lead is not None and lead[1] > 0

    def to_minus_infinity(self) -> bool:
        lead = self.leading()
        return lead is not None and lead[1] < 0

    def is_little_o_of_power(self, e: float) -> bool:
        """|expr| = o(n**e)."""
        lead = self.leading()
        return lead is None or lead[0] < _pow_key(e)

    def is_omega_of_power(self, e: float) -> bool:
        """expr = omega(n**e) and positive."""
        lead = self.leading()
        return lead is not None and lead[0] > _pow_key(e) and lead[1] > 0


def log_n() -> LogGrowth:
    return LogGrowth.from_dict({_LOG: 1.0})


@dataclass(frozen=True)
class RateRule:
    coef: float = 1.0
    power: float = 0.0
    log_power: float = 0.0
    exp_coef: float = 0.0
    exp_power: float = 0.0
    ceil: bool = False
    text: str = field(default="", compare=False)

    @classmethod
    def constant(cls, value: float) -> "RateRule":
        return cls(coef=float(value), text=repr(float(value)))

    def __call__(self, n: float) -> float:
        n = float(n)
        v = self.coef * n**self.power
        if self.log_power:
            v *= math.log(n) ** self.log_power
        if self.exp_coef:
            v *= math.exp(self.exp_coef * n**self.exp_power)
        if self.ceil:
            v = float(math.ceil(v - 1e-9 * abs(v)))
        return v

    def int_at(self, n: int) -> int:
        v = self(n)
        return int(math.ceil(v - 1e-9 * abs(v))) if not self.ceil else int(v)

    @property
    def is_constant(self) -> bool:
        return self.power == 0 and self.log_power == 0 and self.exp_coef == 0

    def log_growth(self) -> LogGrowth:
        if self.coef <= 0:
            raise ConfigError(f"rate rule {self} must be positive for asymptotics")
        d: dict = {_CONST: math.log(self.coef)}
        d[_LOG] = self.power
        d[_LOGLOG] = self.log_power
        if self.exp_coef:
            if self.exp_power > 0:
                d[_pow_key(self.exp_power)] = self.exp_coef
            elif self.exp_power == 0:
                d[_CONST] += self.exp_coef
        g = LogGrowth.from_dict(d)
        if self.ceil and not g.to_plus_infinity():
            # ceil of a bounded or vanishing rule is eventually a bounded integer
            return LogGrowth.from_dict({_CONST: max(math.log(self.coef), 0.0)})
        return g

    def __str__(self) -> str:
        return self.text or _format_rule(self)


def _format_rule(r: RateRule) -> str:
    parts = []
    if r.coef != 1.0 or r.is_constant:
        parts.append(repr(r.coef))
    if r.power:
        parts.append("n" if r.power == 1 else f"n^{r.power!r}")
    if r.log_power:
        parts.append(f"log(n)^{r.log_power!r}")
    if r.exp_coef:
        parts.append(f"exp({r.exp_coef!r}*n^{r.exp_power!r})")
    body = "*".join(parts)
    return f"ceil({body})" if r.ceil else body


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_FACTOR_RE = {
    "num": re.compile(rf"^{_NUM}$"),
    "pow": re.compile(rf"^n(?:\^\(?({_NUM})\)?)?$"),
    "log": re.compile(rf"^log\(n\)(?:\^\(?({_NUM})\)?)?$"),
    "exp": re.compile(rf"^exp\((?:({_NUM})\*?)?(-)?n(?:\^\(?({_NUM})\)?)?\)$"),
}


def _split_factors(body: str) -> list[tuple[str, str]]:
    """Split on top-level ``*`` and ``/``, keeping the operator."""
    out, depth, cur, op = [], 0, "", "*"
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch in "*/" and depth == 0:
            # ``1e-3*...``: a '*' never follows an exponent marker, so this is safe
            out.append((op, cur))
            cur, op = "", ch
        else:
            cur += ch
    out.append((op, cur))
    return out


def parse_rule(text: str) -> RateRule:
    """Parse strings such as ``ceil(n^1.5)``, ``0.5*n``, ``n^-0.5*log(n)^2``.

    Also accepted: ``exp(n^0.75)``, ``exp(-2*n^0.5)`` and ``n/2``.
    """
    src = str(text).strip().replace(" ", "").replace("**", "^")
    body = src
    ceil = False
    m = re.fullmatch(r"ceil\((.*)\)", body)
    if m:
        ceil, body = True, m.group(1)
    if not body:
        raise ConfigError(f"empty rate rule {text!r}")
    coef, power, log_power, exp_coef, exp_power = 1.0, 0.0, 0.0, 0.0, 0.0
    for op, factor in _split_factors(body):
        sign = -1.0 if op == "/" else 1.0
        if _FACTOR_RE["num"].match(factor):
            v = float(factor)
            if op == "/" and v == 0:
                raise ConfigError(f"division by zero in rule {text!r}")
            coef *= v if op == "*" else 1.0 / v
        elif m := _FACTOR_RE["pow"].match(factor):
            power += sign * float(m.group(1) or 1.0)
        elif m := _FACTOR_RE["log"].match(factor):
            log_power += sign * float(m.group(1) or 1.0)
        elif (m := _FACTOR_RE["exp"].match(factor)) and exp_coef == 0.0:
            c = float(m.group(1) or 1.0) * (-1.0 if m.group(2) else 1.0)
            exp_coef, exp_power = sign * c, float(m.group(3) or 1.0)
        else:
            raise ConfigError(f"cannot parse factor {factor!r} in rate rule {text!r}")
    return RateRule(coef, power, log_power, exp_coef, exp_power, ceil, text=src)


def as_rule(value) -> RateRule:
    if isinstance(value, RateRule):
        return value
    if isinstance(value, (int, float)):
        return RateRule.constant(value)
    return parse_rule(value)

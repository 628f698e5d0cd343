"""Fermi-Dirac occupations, Fermi-Dirac integrals, polylogarithms and the
one-dimensional model integrals I_{p,c}.

Every exponential with a potentially large argument goes through the
logistic helpers (``expit`` / ``log_expit``) so that beta * (r - mu) of
order 1e6 neither overflows nor rounds the small branch to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy import integrate
from scipy.special import expit, gamma, gammaincc, gammaln, log_expit, zeta

from .model_params import NormValue, japanese


@dataclass(frozen=True)
class OccupationFn:
    """F(r) = 1 / (1 + exp(beta (r - mu))); the indicator of r <= mu at beta = inf."""

    beta: float
    mu: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)


def _scalar_or_array(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def occupation(f: OccupationFn, r):
    r = np.asarray(r, dtype=float)
    if f.zero_temperature:
        out = (r <= f.mu).astype(float)
    else:
        out = expit(-f.beta * (r - f.mu))
    return _scalar_or_array(out)


def log_occupation(f: OccupationFn, r):
    """log F(r); -inf above the Fermi level at zero temperature."""
    r = np.asarray(r, dtype=float)
    if f.zero_temperature:
        out = np.where(r <= f.mu, 0.0, -np.inf)
    else:
        out = log_expit(-f.beta * (r - f.mu))
    return _scalar_or_array(out)


def log_vacancy(f: OccupationFn, r):
    """log(1 - F(r))."""
    r = np.asarray(r, dtype=float)
    if f.zero_temperature:
        out = np.where(r <= f.mu, -np.inf, 0.0)
    else:
        out = log_expit(f.beta * (r - f.mu))
    return _scalar_or_array(out)


def occupation_derivative(f: OccupationFn, r):
    """F'(r) = -beta F (1 - F), written with |r - mu| so it never overflows."""
    if f.zero_temperature:
        raise ValueError("the occupation derivative is not defined at beta = inf")
    x = f.beta * np.abs(np.asarray(r, dtype=float) - f.mu)
    e = np.exp(-x)
    return _scalar_or_array(-f.beta * e / (1.0 + e) ** 2)


def log_abs_occupation_difference(f: OccupationFn, r1, r2):
    """log |F(r1) - F(r2)|, -inf where the difference vanishes.

    For r_hi > r_lo the difference factors as
    (1 - exp(-beta (r_hi - r_lo))) * (1 - F(r_hi)) * F(r_lo),
    a product of three terms that are each computed to full relative precision.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    hi = np.maximum(r1, r2)
    lo = np.minimum(r1, r2)
    if f.zero_temperature:
        out = np.where((lo <= f.mu) & (hi > f.mu), 0.0, -np.inf)
        return _scalar_or_array(out)
    gap = f.beta * (hi - lo)
    with np.errstate(divide="ignore"):
        log_gap = np.log(-np.expm1(-gap))
    out = log_gap + log_expit(f.beta * (hi - f.mu)) + log_expit(-f.beta * (lo - f.mu))
    return _scalar_or_array(out)


def occupation_difference(f: OccupationFn, r1, r2):
    """F(r1) - F(r2) without cancellation."""
    r1a = np.asarray(r1, dtype=float)
    r2a = np.asarray(r2, dtype=float)
    sign = np.sign(r2a - r1a)
    mag = np.exp(np.asarray(log_abs_occupation_difference(f, r1a, r2a)))
    return _scalar_or_array(sign * mag)


# --------------------------------------------------------------------------
# integrals on the half line


def _quad(fun, upper: float, peak: float):
    points = [peak] if 0.0 < peak < upper else None
    val, err = integrate.quad(fun, 0.0, upper, points=points, limit=500,
                              epsabs=0.0, epsrel=1e-13)
    return val, err


def _log_upper_gamma(a: float, x: float) -> float:
    """log Gamma(a, x) (not regularized); for a >= 1 and x > a - 1 falls back to
    the bound Gamma(a, x) <= x^{a-1} e^{-x} / (1 - (a-1)/x) when scipy underflows."""
    q = gammaincc(a, x)
    if q > 0:
        return math.log(q) + gammaln(a)
    return (a - 1.0) * math.log(x) - x - math.log1p(-(a - 1.0) / x)


def fermi_dirac_integral(alpha: float, nu: float) -> NormValue:
    """F_alpha(nu) = Gamma(alpha+1)^{-1} int_0^inf t^alpha / (1 + e^{t - nu}) dt.

    The integral is truncated at nu_+ + 40; the discarded piece is bounded
    by e^nu Gamma(alpha+1, T) / Gamma(alpha+1).  ``tail_bound`` holds that
    bound plus the quadrature error estimate.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    upper = max(nu, 0.0) + 40.0
    # factor e^{nu} out when the whole integrand is exponentially small
    shift = min(nu, 0.0)

    def integrand(t):
        return t ** alpha * math.exp(-math.log1p(math.exp(-abs(t - nu))) - max(t - nu, 0.0) - shift)

    val, err = _quad(integrand, upper, nu)
    norm = math.exp(gammaln(alpha + 1.0))
    scaled = val / norm
    log_tail = nu + _log_upper_gamma(alpha + 1.0, upper) - gammaln(alpha + 1.0)
    log_value = math.log(scaled) + shift
    tail = math.exp(log_tail) + err / norm * math.exp(shift)
    return NormValue(math.exp(log_value), tail, log_value)


def model_integral_I(p: float, c: float, nu: float) -> NormValue:
    """I_{p,c}(nu) = Gamma(c)^{-1} int_0^inf t^{c-1} e^{p(t-nu)} (1 + e^{t-nu})^{-2p} dt."""
    p = float(getattr(p, "p", p))
    if not (1 <= p < math.inf) or c < 1:
        raise ValueError("need finite p >= 1 and c >= 1")
    upper = max(nu, 0.0) + 40.0 * max(1.0, 1.0 / p)
    shift = p * min(nu, 0.0)

    def integrand(t):
        y = abs(t - nu)
        # e^{y}/(1+e^{y})^2 = e^{-|y|}/(1+e^{-|y|})^2
        log_w = p * (-y - 2.0 * math.log1p(math.exp(-y)))
        lt = (c - 1.0) * math.log(t) if t > 0 else (0.0 if c == 1 else -math.inf)
        return math.exp(lt + log_w - shift)

    val, err = _quad(integrand, upper, nu)
    norm = math.exp(gammaln(c))
    # beyond the cutoff the integrand is at most t^{c-1} e^{-p(t - nu)}
    log_tail = p * nu - c * math.log(p) + _log_upper_gamma(c, p * upper) - gammaln(c)
    log_value = math.log(val / norm) + shift
    tail = math.exp(log_tail) + err / norm * math.exp(shift)
    return NormValue(math.exp(log_value), tail, log_value)


def model_integral_bracket(p: float, c: float, nu: float) -> tuple[float, float]:
    """Explicit lower/upper constants for I_{p,c}(nu) from the bracketing argument.

    For nu <= 0 these are 2^{-2p} p^{-c} e^{p nu} and p^{-c} e^{p nu}; for
    nu > 0 they are 2^{-2p-1} and 2^c times p^{-c} + nu^{c-1} / (p Gamma(c)).
    """
    if nu <= 0:
        base = p ** (-c) * math.exp(p * nu)
        return 2.0 ** (-2 * p) * base, base
    base = p ** (-c) + nu ** (c - 1) / (p * gamma(c))
    return 2.0 ** (-2 * p - 1) * base, 2.0 ** c * base


def model_envelope_I(p: float, c: float, nu: float) -> float:
    """<nu>^{c-1} for nu >= 0 and e^{p nu} for nu < 0 (no constants)."""
    if nu >= 0:
        return japanese(nu) ** (c - 1)
    return math.exp(p * nu)


# --------------------------------------------------------------------------
# polylogarithm


def polylog(s: float, x: float, rtol: float = 1e-14) -> float:
    """Li_s(x) = sum_{n>=1} x^n n^{-s} for 0 < x < 1."""
    if not 0 < x < 1:
        raise ValueError(f"polylog needs 0 < x < 1, got {x}")
    if s == 0:
        return x / (1 - x)
    if s == 1:
        return -math.log1p(-x)
    if s == -1:
        return x / (1 - x) ** 2
    if s == -2:
        return x * (1 + x) / (1 - x) ** 3
    return _polylog_series(s, math.log(x), rtol)


def _polylog_series(s: float, log_x: float, rtol: float = 1e-14) -> float:
    """Direct summation of sum_n e^{n log_x} n^{-s} with a geometric tail test."""
    x = math.exp(log_x)
    parts = []
    start = 1
    chunk = 4096
    while True:
        n = np.arange(start, start + chunk, dtype=float)
        parts.append(math.fsum(np.exp(n * log_x - s * np.log(n))))
        total = math.fsum(parts)
        last = n[-1]
        ratio = x * ((last + 2) / (last + 1)) ** (-s) if s < 0 else x
        nxt = math.exp((last + 1) * log_x - s * math.log(last + 1))
        if ratio < 1:
            tail = nxt / (1 - ratio)
            if tail <= rtol * total:
                return total
        start += chunk
        chunk = min(chunk * 2, 1 << 20)


def polylog_exp(s: float, t: float) -> float:
    """Li_s(e^{-t}) for t > 0; the closed forms use expm1 so small t keeps precision."""
    if not t > 0:
        raise ValueError(f"polylog_exp needs t > 0, got {t}")
    x = math.exp(-t)
    q = -math.expm1(-t)  # 1 - x
    if s == 0:
        return x / q
    if s == 1:
        return -math.log(q)
    if s == -1:
        return x / q ** 2
    if s == -2:
        return x * (1 + x) / q ** 3
    if t < 1e-3:
        # direct summation needs about 40 / t terms; mpmath expands around x = 1
        return float(mp.polylog(s, mp.exp(-mp.mpf(t))))
    return _polylog_series(s, -t)


def polylog_tail_bound(s: float, x: float, n0: int) -> float:
    """Bound on sum_{n>n0} x^n n^{-s} (geometric majorant)."""
    ratio = x * ((n0 + 2) / (n0 + 1)) ** (-s) if s < 0 else x
    first = math.exp((n0 + 1) * math.log(x) - s * math.log(n0 + 1))
    return math.inf if ratio >= 1 else first / (1 - ratio)


@dataclass(frozen=True)
class AbelPlanaCheck:
    lhs: float
    rhs: float
    holds: bool


def abel_plana_remainder_check(c: float, p, eta: float) -> AbelPlanaCheck:
    """Compare eta^c Li_{1-c}(e^{-eta p}) with its integral limit Gamma(c)/p^c."""
    p = float(getattr(p, "p", p))
    if not c > 1 or not eta > 0:
        raise ValueError("need c > 1 and eta > 0")
    # lhs is a difference of two numbers that agree to about c log10(1/eta)
    # digits, so it is evaluated in extended precision
    digits = 30 + int(max(0.0, -c * math.log10(eta * p)))
    with mp.workdps(digits):
        e, pm, cm = mp.mpf(eta), mp.mpf(p), mp.mpf(c)
        li = mp.polylog(1 - cm, mp.exp(-e * pm))
        lhs = abs(e ** cm * li - mp.gamma(cm) / pm ** cm)
        rhs = mp.zeta(cm) * mp.gamma(cm) * e ** cm / (2 ** (cm - 1) * mp.pi ** cm)
        holds = bool(lhs <= rhs * (1 + mp.mpf("1e-9")))
    return AbelPlanaCheck(float(lhs), float(rhs), holds)


__all__ = [
    "OccupationFn", "occupation", "log_occupation", "log_vacancy",
    "occupation_derivative", "occupation_difference", "log_abs_occupation_difference",
    "fermi_dirac_integral", "model_integral_I", "model_integral_bracket",
    "model_envelope_I", "polylog", "polylog_exp", "polylog_tail_bound", "abel_plana_remainder_check",
    "AbelPlanaCheck",
]

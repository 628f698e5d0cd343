"""Exact spectral sums for the isotropic harmonic oscillator |p|^2 + |x|^2.

Eigenvalues are lambda_n = (2n + d) hbar with multiplicity C(n+d-1, d-1).
The commutator [a, F(H)] is diagonal in the shell index, so its Schatten
norm is a one-dimensional sum over shells.  Sums are accumulated in log
space so that exponentially small norms (large beta, mu below the ground
state) keep their relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .fermi_dirac import OccupationFn, log_abs_occupation_difference, log_occupation, log_vacancy
from .model_params import EnvelopeValue, NormValue, PhysicalParams, SchattenOrder

# relative slack (in units of hbar) used when deciding whether a level sits
# exactly on the Fermi level at zero temperature
ZERO_T_TOL = 1e-12
TAIL_RTOL = 1e-12


def multiplicity(d: int, n: int) -> int:
    """C(n+d-1, d-1), the number of multi-indices of length d summing to n."""
    if d < 1 or n < 0:
        raise ValueError("need d >= 1 and n >= 0")
    value = math.comb(n + d - 1, d - 1)
    if value > 2 ** 1023:
        raise OverflowError(f"multiplicity C({n + d - 1}, {d - 1}) exceeds double range")
    return value


def log_multiplicity(d: int, n):
    n = np.asarray(n, dtype=float)
    return gammaln(n + d) - gammaln(n + 1.0) - gammaln(float(d))


def multiplicity_bracket(d: int, n: int) -> tuple[float, float]:
    """(n+1)^{d-1}/(d-1)! <= N_n <= (n+d/2)^{d-1}/(d-1)!."""
    fact = math.factorial(d - 1)
    return (n + 1) ** (d - 1) / fact, (n + d / 2) ** (d - 1) / fact


@dataclass(frozen=True)
class HarmonicSpectrum:
    params: PhysicalParams

    def __post_init__(self):
        if self.params.magnetic:
            raise ValueError("use magnetic_spectral for b != None")

    @property
    def d(self) -> int:
        return self.params.dim

    def eigenvalue(self, n):
        """lambda_n = (2n + d) hbar, with lambda_{-1} = (d - 2) hbar."""
        return (2.0 * np.asarray(n, dtype=float) + self.d) * self.params.hbar

    def multiplicity(self, n: int) -> int:
        return multiplicity(self.d, n)

    @property
    def occupation_fn(self) -> OccupationFn:
        return OccupationFn(self.params.beta, self.params.mu)

    def highest_occupied_shell(self) -> int:
        """Largest n with lambda_n <= mu at zero temperature (-1 if none)."""
        hb = self.params.hbar
        return math.floor((self.params.mu - self.d * hb + ZERO_T_TOL * hb) / (2.0 * hb))


def _as_order(p) -> SchattenOrder:
    return p if isinstance(p, SchattenOrder) else SchattenOrder(float(p))


def _initial_cutoff(spec: HarmonicSpectrum, p: float) -> int:
    """Smallest n with beta (lambda_n - mu) >= 40 p + (d + p/2) ln(n + 2)."""
    prm = spec.params
    beta, hb, d = prm.beta, prm.hbar, spec.d
    n = max(1, math.ceil((prm.mu - d * hb) / (2 * hb)))
    for _ in range(60):
        need = 40.0 * p + (d + 0.5 * p) * math.log(n + 2)
        target = math.ceil((need / beta + prm.mu - d * hb) / (2 * hb))
        if target <= n:
            break
        n = target
    while beta * (spec.eigenvalue(n) - prm.mu) < 40.0 * p + (d + 0.5 * p) * math.log(n + 2):
        n += 1
    return n


def _shell_sum(log_terms_fn, log_majorant_fn, ratio_fn, n_start: int, n_cut: int):
    """log of sum_{n >= n_start} terms, truncated at n_cut with a geometric tail bound.

    Returns (log_sum, log_tail).  The cutoff is raised until the majorant
    ratio is below one and the tail is below TAIL_RTOL relative.
    """
    while True:
        while ratio_fn(n_cut + 1) >= 1.0:
            n_cut = 2 * n_cut + 1
        n = np.arange(n_start, n_cut + 1)
        log_sum = logsumexp(log_terms_fn(n)) if n.size else -math.inf
        q = ratio_fn(n_cut + 1)
        log_tail = log_majorant_fn(n_cut + 1) - math.log1p(-q)
        if not np.isfinite(log_sum) or log_tail - log_sum <= math.log(TAIL_RTOL):
            return log_sum, log_tail
        n_cut = 2 * n_cut + 1


def schatten_commutator_sum(spec: HarmonicSpectrum, p) -> NormValue:
    """S_p = ||[a, F(H)]||_{L^p} / hbar as an exact shell sum.

    ``tail_bound`` bounds the omitted part of S_p^p (finite p).
    """
    order = _as_order(p)
    prm = spec.params
    d, hb, beta, mu = spec.d, prm.hbar, prm.beta, prm.mu
    log_h = math.log(prm.h)
    occ = spec.occupation_fn

    if prm.zero_temperature:
        n_top = spec.highest_occupied_shell()
        if n_top < 0:
            return NormValue(0.0, 0.0, -math.inf)
        n_star = n_top + 1
        log_shell = math.log(multiplicity(d, n_star)) if order.finite else 0.0
        log_weight = 0.5 * math.log(2 * n_star * hb)
        if not order.finite:
            lv = log_weight - math.log(hb)
            return NormValue(math.exp(lv), 0.0, lv)
        pp = order.p
        log_pp = d * log_h - pp * math.log(hb) + log_shell + pp * log_weight
        return NormValue(math.exp(log_pp / pp), 0.0, log_pp / pp)

    def log_dF(n):
        return log_abs_occupation_difference(occ, spec.eigenvalue(n), spec.eigenvalue(n - 1))

    def log_major_dF(n):
        # |F(l_n) - F(l_{n-1})| <= F(l_{n-1}) <= exp(-beta (l_{n-1} - mu))
        return -beta * (spec.eigenvalue(n - 1) - mu)

    if not order.finite:
        n_cut = _initial_cutoff(spec, 1.0)
        n = np.arange(1, n_cut + 1)
        vals = log_dF(n) + 0.5 * np.log(2 * n * hb)
        lv = float(np.max(vals)) - math.log(hb)
        nxt = log_major_dF(n_cut + 1) + 0.5 * math.log(2 * (n_cut + 1) * hb) - math.log(hb)
        tail = 0.0 if nxt <= lv else math.exp(nxt)
        return NormValue(math.exp(lv), tail, lv)

    pp = order.p

    def log_terms(n):
        return log_multiplicity(d, n) + pp * log_dF(n) + 0.5 * pp * np.log(2 * n * hb)

    def log_majorant(n):
        return float(log_multiplicity(d, n)) + pp * log_major_dF(n) + 0.5 * pp * math.log(2 * n * hb)

    def ratio(n):
        return (n + d) / (n + 1) * ((n + 1) / n) ** (0.5 * pp) * math.exp(-2 * pp * beta * hb)

    log_sum, log_tail = _shell_sum(log_terms, log_majorant, ratio, 1, _initial_cutoff(spec, pp))
    log_pref = d * log_h - pp * math.log(hb)
    log_pp = log_pref + log_sum
    return NormValue(math.exp(log_pp / pp), math.exp(log_pref + log_tail), log_pp / pp)


def purity_defect_quantum(spec: HarmonicSpectrum, p) -> NormValue:
    """K_p = ||gamma (1 - gamma)||_{L^p}, zero at beta = inf."""
    order = _as_order(p)
    if not order.finite:
        raise ValueError("purity defect is computed for finite p")
    prm = spec.params
    if prm.zero_temperature:
        return NormValue(0.0, 0.0, -math.inf)
    d, hb, beta, mu, pp = spec.d, prm.hbar, prm.beta, prm.mu, order.p
    occ = spec.occupation_fn

    def log_terms(n):
        lam = spec.eigenvalue(n)
        return log_multiplicity(d, n) + pp * (log_occupation(occ, lam) + log_vacancy(occ, lam))

    def log_majorant(n):
        return float(log_multiplicity(d, n)) - pp * beta * (float(spec.eigenvalue(n)) - mu)

    def ratio(n):
        return (n + d) / (n + 1) * math.exp(-2 * pp * beta * hb)

    log_sum, log_tail = _shell_sum(log_terms, log_majorant, ratio, 0, _initial_cutoff(spec, pp))
    log_pref = d * math.log(prm.h)
    log_pp = log_pref + log_sum
    return NormValue(math.exp(log_pp / pp), math.exp(log_pref + log_tail), log_pp / pp)


def discrete_model_sum(p: float, c: float, eta: float, nu: float) -> NormValue:
    """S_{p,c}(eta, nu) = sum_{n>=1} e^{p(eta n - nu)} (1+e^{eta n - nu})^{-p}
    (1+e^{eta(n-1) - nu})^{-p} (eta n)^{c-1} eta."""
    p = float(getattr(p, "p", p))
    if not (1 <= p < math.inf) or c < 1 or not eta > 0:
        raise ValueError("need finite p >= 1, c >= 1, eta > 0")

    def log_terms(n):
        y = eta * n - nu
        y_prev = eta * (n - 1) - nu
        # e^{y}/(1+e^{y}) = expit(y); the remaining factor is expit(-y_prev)
        return (-p * np.logaddexp(0.0, -y) - p * np.logaddexp(0.0, y_prev)
                + (c - 1) * np.log(eta * n) + math.log(eta))

    def log_majorant(n):
        return -p * (eta * (n - 1) - nu) + (c - 1) * math.log(eta * n) + math.log(eta)

    def ratio(n):
        return math.exp(-p * eta) * ((n + 1) / n) ** (c - 1)

    n0 = max(1, math.ceil((nu + (40.0 * p + (c + 1) * 10) / p) / eta))
    log_sum, log_tail = _shell_sum(log_terms, log_majorant, ratio, 1, n0)
    return NormValue(math.exp(log_sum), math.exp(log_tail), log_sum)


def quantum_envelope(params: PhysicalParams, p, allow_large_hbar: bool = False,
                     low_t_below: str = "corrected") -> EnvelopeValue:
    """Two-regime envelope for ||grad_z gamma||_{L^p} of the harmonic equilibrium.

    For beta hbar > 1 and mu < d hbar the n = 1 term |F(lam_1) - F(lam_0)|
    is about F(lam_0) = e^{beta(mu - d hbar)}, so ``low_t_below="corrected"``
    uses that exponent.  ``"displayed"`` uses e^{beta(mu - (d+2) hbar)},
    which is smaller by e^{2 beta hbar}.
    """
    order = _as_order(p)
    if low_t_below not in ("corrected", "displayed"):
        raise ValueError("low_t_below must be 'corrected' or 'displayed'")
    hb, beta, mu, d = params.hbar, params.beta, params.mu, params.dim
    if hb > 1 and not allow_large_hbar:
        raise ValueError("the envelope is stated for hbar <= 1")
    inv_p, inv_pc = order.inv, order.inv_conj
    above = mu >= d * hb
    if params.zero_temperature:
        eta_small = False
    else:
        eta_small = beta * hb <= 1
    if eta_small:
        base = (0.5 - d * inv_p) * math.log(beta)
        if not above:
            return EnvelopeValue.from_log(base + beta * (mu - d * hb), "high-T below")
        x = beta * (mu - d * hb + hb)
        return EnvelopeValue.from_log(
            base + math.log(x ** (0.5 + (d - 1) * inv_p) + 1.0), "high-T above")
    if not above:
        if params.zero_temperature:
            return EnvelopeValue(0.0, -math.inf, "low-T below")
        gap = d * hb if low_t_below == "corrected" else (d + 2) * hb
        lv = (d * inv_p - 0.5) * math.log(hb) + beta * (mu - gap)
        return EnvelopeValue.from_log(lv, "low-T below")
    lv = (0.5 + (d - 1) * inv_p) * math.log(mu - d * hb + hb) - inv_pc * math.log(hb)
    return EnvelopeValue.from_log(lv, "low-T above")

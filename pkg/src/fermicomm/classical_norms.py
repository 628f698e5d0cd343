"""Phase-space norms of the classical equilibrium f(z) = F(|z|^2) on R^{2d}.

All radial integrals reduce to ``fermi_dirac_integral`` and ``model_integral_I``.
A uniform magnetic field only enters through the sphere integral I_p(b).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .fermi_dirac import fermi_dirac_integral, model_integral_I
from .model_params import NormValue, PhysicalParams, japanese, sphere_measure


def _require_finite_beta(params: PhysicalParams):
    if params.zero_temperature:
        raise ValueError("classical norms need a finite beta")


def _as_p(p) -> float:
    p = float(getattr(p, "p", p))
    if not 1 <= p < math.inf:
        raise ValueError(f"need a finite p >= 1, got {p}")
    return p


def classical_mass(params: PhysicalParams) -> NormValue:
    """Total mass (pi/beta)^d F_{d-1}(beta mu).  A uniform field does not change it."""
    _require_finite_beta(params)
    d, beta = params.dim, params.beta
    fd = fermi_dirac_integral(d - 1, beta * params.mu)
    scale = d * math.log(math.pi / beta)
    return NormValue(math.exp(scale + fd.log_value), fd.tail_bound * math.exp(scale),
                     scale + fd.log_value)


def classical_mass_envelope(params: PhysicalParams) -> float:
    """(mu^d + beta^{-d}) for mu >= 0, beta^{-d} e^{beta mu} otherwise."""
    d, beta, mu = params.dim, params.beta, params.mu
    if mu >= 0:
        return mu ** d + beta ** (-d)
    return beta ** (-d) * math.exp(beta * mu)


def _pth_power_norm(log_prefactor: float, integral: NormValue, p: float) -> NormValue:
    log_pp = log_prefactor + integral.log_value
    return NormValue(math.exp(log_pp / p), integral.tail_bound * math.exp(log_prefactor),
                     log_pp / p)


def classical_grad_norm(params: PhysicalParams, p) -> NormValue:
    """||grad_z f||_{L^p}; ``tail_bound`` refers to the p-th power."""
    _require_finite_beta(params)
    p = _as_p(p)
    d, beta = params.dim, params.beta
    c = d + 0.5 * p
    integral = model_integral_I(p, c, beta * params.mu)
    log_pref = (p * math.log(2.0) + d * math.log(math.pi) + (0.5 * p - d) * math.log(beta)
                + gammaln(c) - gammaln(d))
    return _pth_power_norm(log_pref, integral, p)


def classical_grad_envelope(params: PhysicalParams, p) -> float:
    p = _as_p(p)
    d, beta, mu = params.dim, params.beta, params.mu
    base = beta ** (0.5 - d / p)
    if mu >= 0:
        return base * japanese(beta * mu) ** ((d - 1) / p + 0.5)
    return base * math.exp(beta * mu)


def classical_purity_defect(params: PhysicalParams, p) -> NormValue:
    """||f (1 - f)||_{L^p} = ((pi/beta)^d I_{p,d}(beta mu))^{1/p}."""
    _require_finite_beta(params)
    p = _as_p(p)
    d, beta = params.dim, params.beta
    integral = model_integral_I(p, d, beta * params.mu)
    return _pth_power_norm(d * math.log(math.pi / beta), integral, p)


def classical_purity_envelope(params: PhysicalParams, p) -> float:
    p = _as_p(p)
    d, beta, mu = params.dim, params.beta, params.mu
    base = beta ** (-d / p)
    if mu >= 0:
        return base * japanese(beta * mu) ** ((d - 1) / p)
    return base * math.exp(beta * mu)


def partial_gradient_constant(d: int, p) -> float:
    """C_{d,p} with ||grad_x f|| = ||grad_xi f|| = C_{d,p} ||grad_z f||."""
    p = _as_p(p)
    ratio = (sphere_measure(d) * sphere_measure(2 * d + p)
             / (sphere_measure(2 * d) * sphere_measure(d + p)))
    return ratio ** (1.0 / p)


def magnetic_sphere_integral(b: float, p) -> float:
    """I_p(b) = int_{S^5} ((b^2+1)(y1^2+y2^2) + y3^2)^{p/2} dsigma.

    On the unit sphere of R^6 the squared coordinate groups
    (y1^2+y2^2, y3^2, rest) are Dirichlet(1, 1/2, 3/2) distributed, which
    turns the sphere integral into a two-dimensional one.
    """
    p = _as_p(p)
    omega6 = math.pi ** 3
    k = b * b + 1.0
    if p == 2:
        return (3.0 + 2.0 * b * b) / 6.0 * omega6

    # v = s^2 removes the v^{-1/2} singularity; the (1-u-s^2)^{1/2} endpoint
    # factor is handled by the algebraic weight of QUADPACK.
    def inner(s):
        top = 1.0 - s * s
        if top <= 0:
            return 0.0
        val, _ = integrate.quad(lambda u: (k * u + s * s) ** (0.5 * p), 0.0, top,
                                weight="alg", wvar=(0.0, 0.5), epsabs=0.0, epsrel=1e-12,
                                limit=200)
        return val

    outer, _ = integrate.quad(inner, 0.0, 1.0, epsabs=0.0, epsrel=1e-11, limit=200)
    return 8.0 / math.pi * outer * omega6


def magnetic_sphere_integral_mc(b: float, p, samples: int = 10**6, seed: int = 0,
                                batch: int = 10**6) -> tuple[float, float]:
    """Monte-Carlo estimate of I_p(b) and its 3-sigma half width."""
    p = _as_p(p)
    rng = np.random.default_rng(seed)
    k = b * b + 1.0
    total = total_sq = 0.0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        y = rng.standard_normal((m, 6))
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        vals = (k * (y[:, 0] ** 2 + y[:, 1] ** 2) + y[:, 2] ** 2) ** (0.5 * p)
        total += vals.sum()
        total_sq += (vals ** 2).sum()
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    omega6 = math.pi ** 3
    return mean * omega6, 3.0 * math.sqrt(var / samples) * omega6


def magnetic_grad_x_norm(params: PhysicalParams, p) -> NormValue:
    """||grad_x f^A||_{L^p} for the uniform field A = b(-x2, x1, 0) in d = 3."""
    if params.dim != 3:
        raise ValueError("the magnetic classical norm is defined for d = 3")
    p = _as_p(p)
    grad = classical_grad_norm(params, p)
    factor = magnetic_sphere_integral(params.b or 0.0, p) / math.pi ** 3
    log_pp = math.log(factor) + p * grad.log_value
    return NormValue(math.exp(log_pp / p), grad.tail_bound * factor, log_pp / p)

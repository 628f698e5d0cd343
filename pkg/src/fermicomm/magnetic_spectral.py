"""Three-dimensional oscillator in a uniform magnetic field (Fock-Darwin model).

The Hamiltonian |p - A|^2 + |x|^2 with A = b(-x2, x1, 0) splits into three
independent ladders a_1, a_2, a_3 with level spacings lambda_j and
[a_j, a_j^*] = alpha_j.  Eigenvalues are Lambda_n = lambda . n + Lambda_0 on
the lattice N_0^3, and commutator Schatten norms become lattice sums.

Lattice sums are enumerated inside the simplex lambda . n <= R with an
explicit point budget; everything outside is covered by a product of
geometric/polylog majorants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .fermi_dirac import OccupationFn, log_abs_occupation_difference, polylog, polylog_exp
from .model_params import EnvelopeValue, NormValue, PhysicalParams, SchattenOrder, japanese

DEFAULT_BUDGET = 20_000_000
ZERO_T_TOL = 1e-12
EXPLICIT_C = 15.0 * (2.0 * math.pi) ** 3
THETAS = (0.5, 0.75, 0.9, 0.97)


class LatticeBudgetError(RuntimeError):
    """The lattice region needed for the requested accuracy exceeds the point budget."""


@dataclass(frozen=True)
class MagneticSpectrum:
    """Ladder data of the Fock-Darwin Hamiltonian.

    ``axial_scale`` sets lambda_3 = alpha_3 = axial_scale * hbar.  The ladder
    a_3 = x_3 + i p_3 gives [a_3, a_3^*] = 2 hbar, hence the default 2.
    """

    params: PhysicalParams
    axial_scale: float = 2.0

    def __post_init__(self):
        if not self.params.magnetic:
            raise ValueError("MagneticSpectrum needs params.b set")

    @property
    def hbar(self) -> float:
        return self.params.hbar

    @property
    def b(self) -> float:
        return float(self.params.b)

    @property
    def bb(self) -> float:
        """<b> = sqrt(1 + b^2)."""
        return self.params.b_bracket

    @property
    def omega(self) -> float:
        return self.params.omega

    @property
    def lambdas(self) -> np.ndarray:
        hb, b, bb = self.hbar, self.b, self.bb
        # <b> - b = 1 / (<b> + b) avoids cancellation for large b
        return np.array([2.0 * hb / (bb + b), 2.0 * (bb + b) * hb, self.axial_scale * hb])

    @property
    def alphas(self) -> np.ndarray:
        hb = self.hbar
        return np.array([4.0 * self.bb * hb, 4.0 * self.bb * hb, self.axial_scale * hb])

    @property
    def ground(self) -> float:
        """Lambda_0 = (2<b> + 1) hbar."""
        return (2.0 * self.bb + 1.0) * self.hbar

    @property
    def mu_tilde0(self) -> float:
        return self.params.mu - self.ground

    def level(self, n) -> np.ndarray:
        return np.asarray(n, dtype=float) @ self.lambdas + self.ground

    @property
    def occupation_fn(self) -> OccupationFn:
        return OccupationFn(self.params.beta, self.params.mu)

    @property
    def tol(self) -> float:
        return ZERO_T_TOL * self.hbar


def _check_j(j: int) -> int:
    if j not in (1, 2, 3):
        raise ValueError(f"j must be 1, 2 or 3, got {j}")
    return j - 1


def _as_order(p) -> SchattenOrder:
    return p if isinstance(p, SchattenOrder) else SchattenOrder(float(p))


# --------------------------------------------------------------------------
# lattice enumeration


def _axis_order(lam) -> list[int]:
    """Axes sorted from coarsest to finest spacing."""
    return sorted(range(3), key=lambda i: -lam[i])


def _fine_ranges(lam, radius: float, tol: float, lower):
    """Per (coarse, mid) pair, the admissible range of the finest index.

    Yields (c, m, f, nc, nm, start, stop) with fine indices in [start, stop).
    """
    c, m, f = _axis_order(lam)
    for nc in range(int(math.floor((radius + tol) / lam[c])) + 1):
        rest = radius + tol - lam[c] * nc
        nm = np.arange(int(math.floor(rest / lam[m])) + 1)
        used = lam[c] * nc + lam[m] * nm
        stop = np.floor((radius + tol - used) / lam[f]).astype(np.int64) + 1
        if lower is None:
            start = np.zeros_like(stop)
        else:
            start = np.maximum(np.ceil((lower - used) / lam[f]), 0).astype(np.int64)
        yield c, m, f, nc, nm, start, np.maximum(stop, start)


def lattice_point_count(lam, radius: float, tol: float = 0.0, lower=None) -> int:
    """Number of n in N_0^3 with lower <= lam . n <= radius (+ tol)."""
    if radius + tol < 0:
        return 0
    return int(sum(int(np.sum(stop - start))
                   for *_, start, stop in _fine_ranges(lam, radius, tol, lower)))


def _simplex_chunks(lam, radius: float, tol: float = 0.0, chunk: int = 2_000_000, lower=None):
    """Yield integer arrays (k, 3) covering {n : lower <= lam . n <= radius + tol}."""
    if radius + tol < 0:
        return
    buf, size = [], 0
    for c, m, f, nc, nm, start, stop in _fine_ranges(lam, radius, tol, lower):
        lengths = stop - start
        total = int(lengths.sum())
        if total == 0:
            continue
        mid = np.repeat(nm, lengths)
        offs = np.repeat(np.cumsum(lengths) - lengths - start, lengths)
        fine = np.arange(total) - offs
        pts = np.empty((total, 3), dtype=np.int64)
        pts[:, c] = nc
        pts[:, m] = mid
        pts[:, f] = fine
        buf.append(pts)
        size += total
        if size >= chunk:
            yield np.concatenate(buf)
            buf, size = [], 0
    if buf:
        yield np.concatenate(buf)


def magnetic_levels(spec: MagneticSpectrum, cutoff: float):
    """All lattice points with Lambda_n <= cutoff, sorted by energy.

    Returns (levels, n) where n has shape (k, 3); degenerate levels appear
    once per lattice point.
    """
    if cutoff < spec.ground - spec.tol:
        raise ValueError("cutoff must be at least Lambda_0")
    lam = spec.lambdas
    pts = [chunk for chunk in _simplex_chunks(lam, cutoff - spec.ground, spec.tol)]
    n = np.concatenate(pts) if pts else np.zeros((0, 3), dtype=np.int64)
    levels = spec.level(n)
    order = np.lexsort((n[:, 2], n[:, 1], n[:, 0], levels))
    return levels[order], n[order]


def _sum_power_exp_bound(s: float, a: float) -> float:
    """Upper bound on sum_{n>=0} n^s e^{-a n} (unimodal sum <= integral + max)."""
    if s == 0:
        return 1.0 / -math.expm1(-a)
    return math.exp(gammaln(s + 1.0) - (s + 1.0) * math.log(a)) + (s / (math.e * a)) ** s


def _log_product_tail(sig, j: int, s: float, cut: float) -> float:
    """log bound on sum_{sig . n > cut} e^{-sig . n} n_j^s, minimised over theta.

    Besides THETAS, theta = 1 - k/cut is tried, which is near optimal when
    cut is large.
    """
    best = math.inf
    thetas = list(THETAS)
    if cut > 1.0:
        thetas += [1.0 - k / cut for k in (1.0, 2.0, 3.0, 3.0 + s, 5.0 + s, 10.0 + s) if k < cut]
    for th in thetas:
        a = (1.0 - th) * np.asarray(sig)
        val = -th * cut + math.log(_sum_power_exp_bound(s, a[j]))
        for i in range(3):
            if i != j:
                val -= math.log(-math.expm1(-a[i]))
        best = min(best, val)
    return best


# --------------------------------------------------------------------------
# commutator sums


def zero_temp_shell_sum(spec: MagneticSpectrum, j: int, p) -> NormValue:
    """S_{p,j} at beta = inf: h^3 sum over mu~0 < lam . n <= mu~0 + lam_j of (alpha_j n_j)^{p/2}."""
    ji = _check_j(j)
    order = _as_order(p)
    lam, alpha = spec.lambdas, spec.alphas
    mt0 = spec.mu_tilde0
    tol = spec.tol
    if mt0 < -tol:
        return NormValue(0.0, 0.0, -math.inf)
    mtj = mt0 + lam[ji]
    if not order.finite:
        nmax = math.floor((mtj + tol) / lam[ji])
        lv = 0.5 * math.log(alpha[ji] * nmax) if nmax > 0 else -math.inf
        return NormValue(math.exp(lv), 0.0, lv)
    pp = order.p
    others = [i for i in range(3) if i != ji]
    l = min(others, key=lambda i: lam[i])
    k = others[0] if others[1] == l else others[1]
    total = 0.0
    for nj in range(1, math.floor((mtj + tol) / lam[ji]) + 1):
        rest = mtj - lam[ji] * nj
        nk = np.arange(math.floor((rest + tol) / lam[k]) + 1)
        s = lam[ji] * nj + lam[k] * nk
        hi = np.floor((mtj - s + tol) / lam[l])
        lo_arg = mt0 - s + tol
        lo = np.where(lo_arg >= 0, np.floor(lo_arg / lam[l]), -1.0)
        total += float(np.sum(hi - lo)) * (alpha[ji] * nj) ** (0.5 * pp)
    if total == 0:
        return NormValue(0.0, 0.0, -math.inf)
    log_pp = 3.0 * math.log(spec.params.h) + math.log(total)
    return NormValue(math.exp(log_pp / pp), 0.0, log_pp / pp)


def magnetic_commutator_sum(spec: MagneticSpectrum, j: int, p, rtol: float = 1e-10,
                            budget: int = DEFAULT_BUDGET) -> NormValue:
    """S_{p,j} = ||[a_j, F(H_A)]||_{L^p}.

    ``tail_bound`` bounds the omitted part of S_{p,j}^p (finite p) or the
    supremum outside the enumerated region (p = inf).
    """
    ji = _check_j(j)
    order = _as_order(p)
    prm = spec.params
    if prm.zero_temperature:
        return zero_temp_shell_sum(spec, j, order)
    lam, alpha = spec.lambdas, spec.alphas
    beta, mu, lam_j = prm.beta, prm.mu, lam[ji]
    occ = spec.occupation_fn
    pp = order.p if order.finite else 1.0
    sig = pp * beta * lam
    # log of the majorant prefactor e^{-p beta (Lambda_0 - lam_j - mu)} alpha_j^{p/2}
    log_pref = -pp * beta * (spec.ground - lam_j - mu) + 0.5 * pp * math.log(alpha[ji])
    radius = max(spec.mu_tilde0, 0.0) + (40.0 + 3.0 * math.log(1.0 + pp)) / (pp * beta)

    depth = (40.0 + 3.0 * math.log(1.0 + pp)) / (pp * beta)
    while True:
        # only n_j >= 1 contributes: enumerate n = m + e_j with lam . m <= radius - lam_j
        inner = radius - lam_j
        # states far below mu are covered by the interior bound instead
        lower = max(spec.mu_tilde0 - lam_j - depth, 0.0) if order.finite else None
        if lower is not None and lower <= 0:
            lower = None
        npts = lattice_point_count(lam, inner, lower=lower)
        if npts > budget:
            raise LatticeBudgetError(
                f"{npts} lattice points needed for j={j} (budget {budget})")
        acc = []
        for m in _simplex_chunks(lam, inner, lower=lower):
            n = m.copy()
            n[:, ji] += 1
            nj = n[:, ji]
            levels = spec.level(n)
            ldf = np.asarray(log_abs_occupation_difference(occ, levels, levels - lam_j),
                             dtype=float)
            if order.finite:
                acc.append(logsumexp(pp * ldf + 0.5 * pp * np.log(alpha[ji] * nj)))
            else:
                acc.append(np.max(ldf + 0.5 * np.log(alpha[ji] * nj)))
        if not acc or not np.isfinite(max(acc)):
            radius = max(2.0 * radius, lam_j + 40.0 / (pp * beta))
            continue
        log_inner = -math.inf
        if lower is not None:
            # |dF| <= 1 - F(Lambda_n) <= e^{beta (Lambda_n - mu)} below the shell
            count = 1.0
            for lk in lam:
                count *= lower / lk + 1.0
            log_inner = (pp * beta * (spec.ground + lower + lam_j - mu) + math.log(count)
                         + 0.5 * pp * math.log(alpha[ji] * (lower / lam_j + 1.0)))

        if not order.finite:
            lv = float(max(acc))
            # beyond the radius the majorant decreases in the energy once
            # beta * energy > 1/2, so its value at the radius bounds the sup
            e = max(radius, 0.5 / beta)
            out = (-beta * (spec.ground + e - lam_j - mu)
                   + 0.5 * math.log(alpha[ji] * (e / lam_j + 1.0)))
            if out <= lv:
                return NormValue(math.exp(lv), 0.0, lv)
            if radius > 1e6 / beta + spec.mu_tilde0:
                return NormValue(math.exp(lv), math.exp(out), lv)
            radius = 2.0 * radius
            continue

        log_sum = float(logsumexp(acc))
        log_tail = float(np.logaddexp(
            log_pref + _log_product_tail(sig, ji, 0.5 * pp, pp * beta * radius), log_inner))
        if log_inner - log_sum > math.log(rtol):
            depth *= 2.0
            continue
        if log_tail - log_sum <= math.log(rtol):
            log_h3 = 3.0 * math.log(prm.h)
            log_pp = log_h3 + log_sum
            return NormValue(math.exp(log_pp / pp), math.exp(log_h3 + log_tail), log_pp / pp)
        radius += (log_tail - log_sum - math.log(rtol)) / (0.9 * pp * beta) + 1.0 / (pp * beta)


# --------------------------------------------------------------------------
# zero-temperature explicit bounds


def indicator_commutator_bounds(spec: MagneticSpectrum, p) -> dict[int, float]:
    """The three explicit-constant upper bounds for ||[a_j, 1(H_A <= mu)]||_{L^p}."""
    order = _as_order(p)
    if not order.finite:
        raise ValueError("the explicit bounds are stated for finite p")
    if spec.mu_tilde0 < -spec.tol:
        raise ValueError("the explicit bounds need mu >= Lambda_0")
    pp = order.p
    hb, bb, mu = spec.hbar, spec.bb, spec.params.mu
    mt0 = max(spec.mu_tilde0, 0.0)
    c = EXPLICIT_C ** (1.0 / pp)
    b1 = (2.0 * c * math.sqrt(mt0 + 2.0 * hb / bb) * (mt0 + hb) ** (1.0 / pp)
          * mu ** (1.0 / pp) * bb ** (1.0 - 1.0 / pp) * hb ** (1.0 / pp))
    b2 = 2.0 * c * mu ** (0.5 + 2.0 / pp) * bb ** (1.0 / pp) * hb ** (1.0 / pp)
    b3 = c * (mt0 + hb) ** (0.5 + 1.0 / pp) * mu ** (1.0 / pp) * hb ** (1.0 / pp)
    return {1: b1, 2: b2, 3: b3}


def zero_temp_particle_count(spec: MagneticSpectrum) -> int:
    """Number of eigenvalues of H_A below mu."""
    return lattice_point_count(spec.lambdas, spec.mu_tilde0, spec.tol)


def particle_count_order(spec: MagneticSpectrum) -> float:
    """mu (mu~0 + hbar/<b>) (mu~0 + hbar): order of magnitude of N h^3."""
    mt0 = max(spec.mu_tilde0, 0.0)
    return spec.params.mu * (mt0 + spec.hbar / spec.bb) * (mt0 + spec.hbar)


# --------------------------------------------------------------------------
# exponential lattice sums and the decomposition


def _pairs(sj: float, sk: float, top: float, chunk: int = 2_000_000):
    """Yield (n_j, n_k) arrays with n_j >= 1 and sj n_j + sk n_k <= top."""
    nj_all = np.arange(1, math.floor(top / sj) + 1)
    if nj_all.size == 0:
        return
    lengths = np.floor((top - sj * nj_all) / sk).astype(np.int64) + 1
    lengths = np.maximum(lengths, 0)
    ends = np.cumsum(lengths)
    start = 0
    while start < nj_all.size:
        stop = int(np.searchsorted(ends, ends[start] - lengths[start] + chunk, side="right"))
        stop = max(stop, start + 1)
        ln = lengths[start:stop]
        nj = np.repeat(nj_all[start:stop], ln)
        offs = np.repeat(np.cumsum(ln) - ln, ln)
        nk = np.arange(int(ln.sum())) - offs
        yield nj, nk
        start = stop


def _pair_count(sj: float, sk: float, top: float) -> int:
    nj = np.arange(1, math.floor(top / sj) + 1)
    return int(np.sum(np.floor((top - sj * nj) / sk) + 1))


def _exp_lattice_sum(sig, j: int, s: float, delta: float, region: str,
                     rtol: float = 1e-10, budget: int = DEFAULT_BUDGET) -> float:
    """log of a weighted exponential lattice sum.

    region "above":   sum_{sig.n >  delta} e^{-(sig.n - delta)} n_j^s
    region "above=":  sum_{sig.n >= delta} e^{-(sig.n - delta)} n_j^s
    region "below":   sum_{sig.n <= delta} e^{ (sig.n - delta)} n_j^s
    The finest axis other than j is summed in closed form, leaving a
    two-dimensional sum over (n_j, n_k).
    """
    sig = np.asarray(sig, dtype=float)
    others = [i for i in range(3) if i != j]
    l = min(others, key=lambda i: sig[i])
    k = others[0] if others[1] == l else others[1]
    sl, sj, sk = sig[l], sig[j], sig[k]
    log_geo = -math.log(-math.expm1(-sl))

    if region == "below":
        if delta < 0:
            return -math.inf
        top = delta
    else:
        top = max(delta, 0.0) + 40.0

    while True:
        if top / sj > 1e9 or _pair_count(sj, sk, top) > budget:
            if region != "below":
                return _exp_lattice_sum_complement(sig, j, s, delta, region, budget)
            raise LatticeBudgetError(f"two-axis sum up to {top:.3g} exceeds budget {budget}")
        parts = []
        for nj, nk in _pairs(sj, sk, top):
            ssum = sj * nj + sk * nk
            gap = delta - ssum
            wj = s * np.log(nj)
            if region == "below":
                mm = np.floor(gap / sl)
                ok = mm >= 0
                if not np.any(ok):
                    continue
                mm, ss, w = mm[ok], ssum[ok], wj[ok]
                # sum_{m=0}^{M} e^{ss + sl m - delta}
                parts.append(logsumexp(w + ss + sl * mm - delta
                                       + np.log(-np.expm1(-sl * (mm + 1)))) + log_geo)
            else:
                if region == "above":
                    m0 = np.where(gap < 0, 0.0, np.floor(gap / sl) + 1.0)
                else:
                    m0 = np.where(gap <= 0, 0.0, np.ceil(gap / sl))
                parts.append(logsumexp(wj + gap - sl * m0) + log_geo)
        log_sum = float(logsumexp(parts)) if parts else -math.inf
        if region == "below":
            return log_sum
        # pairs with sig_j n_j + sig_k n_k > top keep every m
        log_tail = delta + log_geo + _log_two_axis_tail(sj, sk, s, top)
        if log_tail - log_sum <= math.log(rtol):
            return log_sum
        if not np.isfinite(log_sum):
            # no lattice point with n_j >= 1 fits below top yet
            top += sj + 40.0
            continue
        top += log_tail - log_sum - math.log(rtol) + 5.0


def _exp_lattice_sum_complement(sig, j: int, s: float, delta: float, region: str,
                                budget: int) -> float:
    """The "above" sums as the full lattice sum minus the few points below delta.

    sum_n e^{-(sig.n - delta)} n_j^s = e^delta Li_{-s}(e^{-sig_j}) prod_{i != j} (1 - e^{-sig_i})^{-1}.
    Used when delta is small compared with the spread of the summand, so the
    subtraction loses little precision.
    """
    others = [i for i in range(3) if i != j]
    l = min(others, key=lambda i: sig[i])
    k = others[0] if others[1] == l else others[1]
    sl, sj, sk = sig[l], sig[j], sig[k]
    log_full = (delta + math.log(polylog_exp(-s, sj))
                - math.log(-math.expm1(-sl)) - math.log(-math.expm1(-sk)))
    if delta <= 0:
        comp = -math.inf
    else:
        # pairs on the boundary are admitted here and sorted by the gap test
        reach = delta * (1.0 + 1e-12)
        if reach / sj > 1e9 or _pair_count(sj, sk, reach) > budget:
            raise LatticeBudgetError(f"complement up to {delta:.3g} exceeds budget {budget}")
        parts = []
        for nj, nk in _pairs(sj, sk, reach):
            gap = delta - (sj * nj + sk * nk)
            # number of n_l with sl n_l <= gap ("above") or < gap ("above=")
            mm = np.floor(gap / sl) if region == "above" else np.ceil(gap / sl) - 1.0
            ok = mm >= 0
            if not np.any(ok):
                continue
            mm, g, w = mm[ok], gap[ok], s * np.log(nj[ok])
            # sum_{m=0}^{M} e^{gap - sl m}
            parts.append(logsumexp(w + g + np.log(-np.expm1(-sl * (mm + 1))))
                         - math.log(-math.expm1(-sl)))
        comp = float(logsumexp(parts)) if parts else -math.inf
    if comp - log_full > math.log(0.5):
        raise LatticeBudgetError("complement too close to the full sum for a stable difference")
    return log_full + math.log(-math.expm1(comp - log_full))


def _log_two_axis_tail(sj: float, sk: float, s: float, cut: float) -> float:
    best = math.inf
    for th in THETAS:
        val = (-th * cut + math.log(_sum_power_exp_bound(s, (1 - th) * sj))
               - math.log(-math.expm1(-(1 - th) * sk)))
        best = min(best, val)
    return best


@dataclass(frozen=True)
class SigmaSum:
    direct: float
    bound: float


def sigma_sum(delta: float, sigma, p: float, j: int) -> SigmaSum:
    """Sum over sigma.n >= delta of e^{-sigma.n + delta} n_j^{p/2}, with the explicit bound.

    For delta < 0 the bound is (p/e)^{p/2} e^delta sigma_j^{-p/2} prod <sigma_i>/sigma_i;
    for delta >= 0 it is the explicit two-term estimate with the j+1 axis
    (cyclic) playing the role of the second axis.
    """
    ji = _check_j(j)
    p = float(getattr(p, "p", p))
    sig = np.asarray(sigma, dtype=float)
    if np.any(sig <= 0) or not 1 <= p < math.inf:
        raise ValueError("need sigma > 0 and finite p >= 1")
    s = 0.5 * p
    if delta <= 0:
        li = polylog(-s, math.exp(-sig[ji]))
        direct = math.exp(delta) * li
        for i in range(3):
            if i != ji:
                direct /= -math.expm1(-sig[i])
    else:
        direct = math.exp(_exp_lattice_sum(sig, ji, s, delta, "above="))
    if delta < 0:
        bound = (p / math.e) ** s * math.exp(delta) * sig[ji] ** (-s)
        for i in range(3):
            bound *= japanese(sig[i]) / sig[i]
    else:
        j1 = (ji + 1) % 3
        j2 = (ji + 2) % 3
        first = (2.0 * p ** s + (2.0 * delta) ** s) / (sig[ji] ** s * -math.expm1(-sig[ji]))
        second = (1.0 + 2.0 * delta / japanese(sig[j1])) * (delta / sig[ji]) ** (s + 1.0)
        bound = (first + second) / (-math.expm1(-sig[j1]) * -math.expm1(-sig[j2]))
    return SigmaSum(direct, bound)


@dataclass(frozen=True)
class DecompositionBounds:
    I_plus: float
    I_minus: float
    I_zero: float

    @property
    def total(self) -> float:
        return self.I_plus + self.I_minus + self.I_zero


def _safe_exp(x: float) -> float:
    if x == -math.inf:
        return 0.0
    return math.exp(x) if x < 709.0 else math.inf


def _log_rel_factor(x: float, sign: int) -> float:
    """log((e^{x}-1)/x) for sign=+1 and log((1-e^{-x})/x) for sign=-1."""
    if sign > 0:
        return x + math.log(-math.expm1(-x)) - math.log(x)
    return math.log(-math.expm1(-x)) - math.log(x)


def decomposition_bounds(spec: MagneticSpectrum, j: int, p, prefactor: str = "h3",
                         budget: int = DEFAULT_BUDGET, plus_form: str = "displayed"
                         ) -> DecompositionBounds:
    """Majorants I_+, I_-, I_0 with S_{p,j}^p <= I_+ + I_- + I_0.

    ``prefactor="h3"`` uses h^3 (what the derivation produces);
    ``prefactor="hbar"`` uses a single factor hbar in I_+ and I_-.

    ``plus_form="displayed"`` gives I_+ with the factor (e^{x}-1)/x, x = p beta
    lam_j, summed over sig.n > delta_0.  ``plus_form="exact"`` keeps the sum
    over Lambda_n - lam_j >= mu, i.e. sig.n >= delta_0 + sig_j, with the factor
    (1-e^{-x})/x; it is smaller by up to e^{x}.
    """
    ji = _check_j(j)
    order = _as_order(p)
    if not order.finite or spec.params.zero_temperature:
        raise ValueError("the decomposition needs finite p and finite beta")
    pp, beta = order.p, spec.params.beta
    lam, alpha = spec.lambdas, spec.alphas
    sig = pp * beta * lam
    delta0 = pp * beta * spec.mu_tilde0
    x = pp * beta * lam[ji]
    if prefactor == "h3":
        log_scale = 3.0 * math.log(spec.params.h)
    elif prefactor == "hbar":
        log_scale = math.log(spec.hbar)
    else:
        raise ValueError("prefactor must be 'h3' or 'hbar'")
    log_common = pp * math.log(beta * lam[ji]) + 0.5 * pp * math.log(alpha[ji]) + log_scale
    s = 0.5 * pp
    if plus_form == "displayed":
        above = _exp_lattice_sum(sig, ji, s, delta0, "above", budget=budget)
        i_plus = _safe_exp(_log_rel_factor(x, +1) + log_common + above)
    elif plus_form == "exact":
        above = _exp_lattice_sum(sig, ji, s, delta0 + x, "above=", budget=budget)
        i_plus = _safe_exp(_log_rel_factor(x, -1) + log_common + above)
    else:
        raise ValueError("plus_form must be 'displayed' or 'exact'")
    below = _exp_lattice_sum(sig, ji, s, delta0, "below", budget=budget)
    i_minus = _safe_exp(_log_rel_factor(x, -1) + log_common + below)
    shell = zero_temp_shell_sum(
        MagneticSpectrum(PhysicalParams(spec.hbar, math.inf, spec.params.mu, 3, spec.b),
                         spec.axial_scale), j, pp)
    i_zero = min(1.0, beta * lam[ji]) ** pp * math.exp(pp * shell.log_value) \
        if shell.value > 0 else 0.0
    return DecompositionBounds(i_plus, i_minus, i_zero)


# --------------------------------------------------------------------------
# envelopes


def i_plus_envelope(spec: MagneticSpectrum, j: int, p) -> EnvelopeValue:
    """Closed-form envelope for I_+ in each of the six (j, sign of nu_j) cases.

    Includes the constant C_p = p^2 2^{5p/2}.  For j = 2, nu_2 <= 0 the
    temperature power is beta^{p/2 - 3}, as for the other five cases.
    """
    ji = _check_j(j)
    order = _as_order(p)
    if not order.finite or spec.params.zero_temperature:
        raise ValueError("the I_+ envelope needs finite p and finite beta")
    pp, beta, hb = order.p, spec.params.beta, spec.hbar
    b, bb = spec.b, spec.bb
    eta = beta * hb
    jeta = japanese(eta)
    nu = beta * (spec.mu_tilde0 + spec.lambdas[ji])
    jnu = japanese(nu)
    log_cp = 2.0 * math.log(pp) + 2.5 * pp * math.log(2.0)
    log_base = (0.5 * pp - 3.0) * math.log(beta) + pp * math.log(hb)
    positive = nu > 0
    if ji == 0:
        m = min(jeta, bb)
        if positive:
            body = m * (jeta ** 2 + jnu ** 2 + bb * nu * eta)
            log_nu = 0.5 * pp * math.log(jnu)
        else:
            body = m * (jeta ** 2 + b * eta)
            log_nu = -pp * abs(nu)
        label = "j=1"
    elif ji == 1:
        if positive:
            body = jeta * min(bb, 1.0 / eta) * (jeta ** 2 + jnu ** 2 + bb * eta)
            log_nu = 0.5 * pp * math.log(jnu)
        else:
            body = jeta * (bb + eta)
            log_nu = -pp * abs(nu)
        body *= bb ** (pp - 1.0)
        label = "j=2"
    else:
        if positive:
            body = (1.0 / bb + 1.0 / jeta) * (jnu ** 2 + bb * eta * (jnu + eta))
            log_nu = 0.5 * pp * math.log(jnu)
        else:
            body = jeta ** 2 + bb * eta
            log_nu = -pp * abs(nu)
        label = "j=3"
    label += ", nu>0" if positive else ", nu<=0"
    return EnvelopeValue.from_log(log_cp + math.log(body) + log_nu + log_base, label)


def mp_factor(eta: float, bb: float, p) -> float:
    """M_p(beta hbar, b) for beta hbar <b> >= 1."""
    order = _as_order(p)
    ip, ipc = order.inv, order.inv_conj
    if eta <= 1:
        return bb ** ip + eta ** (1.0 - 2.0 * ip) * bb ** ipc
    if eta <= bb:
        return eta + bb ** ip + (eta * bb) ** ipc
    return eta ** ipc * bb ** max(ip, ipc)


def magnetic_envelope(params: PhysicalParams, p) -> EnvelopeValue:
    """Envelope for ||d_x gamma|| + <b> ||d_xi gamma|| under mu >= Lambda_0.

    At beta = inf the large-beta form is evaluated with beta hbar = 1.
    """
    if not params.magnetic:
        raise ValueError("magnetic_envelope needs params.b set")
    order = _as_order(p)
    hb, mu, bb = params.hbar, params.mu, params.b_bracket
    if mu < (2.0 * bb + 1.0) * hb * (1 - 1e-12):
        raise ValueError("the magnetic envelope needs mu >= (2<b> + 1) hbar")
    ip, ipc = order.inv, order.inv_conj
    if params.zero_temperature:
        mp = mp_factor(1.0, bb, order)
        lv = math.log(mp) + (0.5 + 2 * ip) * math.log(mu) - ipc * math.log(hb)
        return EnvelopeValue.from_log(lv, "zero-temperature")
    beta = params.beta
    eta = beta * hb
    if eta * bb <= 1:
        lv = (math.log(bb) + (0.5 + 2 * ip) * math.log(japanese(beta * mu))
              + (0.5 - 3 * ip) * math.log(beta))
        return EnvelopeValue.from_log(lv, "classical")
    mp = mp_factor(eta, bb, order)
    lv = math.log(mp) + (0.5 + 2 * ip) * math.log(mu) - ipc * math.log(hb)
    return EnvelopeValue.from_log(lv, "quantum")


def zero_temp_gradient_envelopes(params: PhysicalParams, p) -> tuple[float, float]:
    """(envelope for ||d_xi gamma||, envelope for ||d_x gamma||) of the zero-temperature projection."""
    order = _as_order(p)
    hb, mu, bb = params.hbar, params.mu, params.b_bracket
    ip, ipc = order.inv, order.inv_conj
    common = mu ** (0.5 + 2 * ip) * hb ** (-ipc)
    expo = max(ip, ipc)
    return common * bb ** (expo - 1.0), common * bb ** expo


# --------------------------------------------------------------------------
# position / momentum commutators


@dataclass(frozen=True)
class XPBounds:
    """Triangle-inequality bounds for commutators with x_j, p_j and v_j (j = 1, 2, 3)."""

    x: tuple[float, float, float]
    p: tuple[float, float, float]
    v: tuple[float, float, float]
    bb: float
    hbar: float

    @property
    def x_bound(self) -> float:
        return float(sum(self.x))

    @property
    def p_bound(self) -> float:
        return float(sum(self.p))

    @property
    def v_bound(self) -> float:
        return float(sum(self.v))

    @property
    def combined_gradient(self) -> float:
        """(||[p, gamma]|| + <b> ||[x, gamma]||) / hbar, componentwise sums."""
        return (self.p_bound + self.bb * self.x_bound) / self.hbar


def xp_bounds_from_sums(spec: MagneticSpectrum, s1: float, s2: float, s3: float) -> XPBounds:
    bb, om = spec.bb, spec.omega
    x12 = (s1 + s2) / (2.0 * bb)
    p12 = 0.5 * (s1 + s2)
    v12 = 0.5 * ((1.0 - om) * s1 + (1.0 + om) * s2)
    return XPBounds((x12, x12, s3), (p12, p12, s3), (v12, v12, s3), bb, spec.hbar)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _diff_power_moments(x0, a: float, p: float):
    """log J(x0) and log M(x0) for g(x) = sigma(a - x) - sigma(-x), a > 0, where

        J(x0) = int_{x0}^inf g^p,   M(x0) = int_{x0}^inf (y - x0) g(y)^p dy.

    g = (1 - e^{-a}) sigma(a - x) sigma(x) is analytic in a strip of half
    width pi, so unit panels with 10 nodes are accurate to double precision.
    Whole panels are accumulated once; each x0 adds its partial panel.
    Below x = -45 we use g <= e^x; above a + 45, g <= (e^a - 1) e^{-x}.
    """
    x0 = np.asarray(x0, dtype=float)
    lo_cut = -45.0
    npanel = int(math.ceil(a + 90.0))
    hi_cut = lo_cut + npanel
    log_fac = math.log(-math.expm1(-a))
    log_c = p * (a + log_fac)

    def log_gp(x):
        return p * (log_fac - np.logaddexp(0.0, x - a) - np.logaddexp(0.0, -x))

    knots = lo_cut + np.arange(npanel + 1, dtype=float)
    u = 0.5 * (_GL_NODES + 1.0)
    lg = log_gp(knots[:-1, None] + u) + np.log(0.5 * _GL_WEIGHTS)
    log_p0 = logsumexp(lg, axis=1)
    log_p1 = logsumexp(lg + np.log(u), axis=1)
    # J and M at the knots, accumulated from the right; M(k) = M(k+1) + J(k+1) + panel moment
    log_j = np.empty(npanel + 1)
    log_m = np.empty(npanel + 1)
    log_j[-1] = log_c - p * hi_cut - math.log(p)
    log_m[-1] = log_c - p * hi_cut - 2.0 * math.log(p)
    for i in range(npanel - 1, -1, -1):
        log_m[i] = np.logaddexp(np.logaddexp(log_m[i + 1], log_j[i + 1]), log_p1[i])
        log_j[i] = np.logaddexp(log_j[i + 1], log_p0[i])

    xc = np.clip(x0, lo_cut, hi_cut)
    idx = np.minimum(np.floor(xc - lo_cut).astype(np.int64), npanel - 1)
    width = knots[idx + 1] - xc
    pts = xc[:, None] + 0.5 * width[:, None] * (_GL_NODES + 1.0)
    with np.errstate(divide="ignore"):
        lw = log_gp(pts) + np.log(0.5 * _GL_WEIGHTS) + np.log(width)[:, None]
        part0 = logsumexp(lw, axis=1)
        part1 = logsumexp(lw + np.log(pts - xc[:, None]), axis=1)
        jv = np.logaddexp(part0, log_j[idx + 1])
        mv = np.logaddexp(np.logaddexp(part1, log_m[idx + 1]), np.log(width) + log_j[idx + 1])
    below = x0 < lo_cut
    if np.any(below):
        extra = p * lo_cut - math.log(p)
        gap = np.log(np.where(below, lo_cut - x0, 1.0))
        jv = np.where(below, np.logaddexp(jv, extra), jv)
        mv = np.where(below, np.logaddexp(mv, gap + jv), mv)
    above = x0 >= hi_cut
    jv = np.where(above, log_c - p * x0 - math.log(p), jv)
    mv = np.where(above, log_c - p * x0 - 2.0 * math.log(p), mv)
    return jv, mv


def _log_diff_power_integral(x0, a: float, p: float):
    """log int_{x0}^inf g(x)^p dx for g(x) = sigma(a - x) - sigma(-x)."""
    return _diff_power_moments(x0, a, p)[0]


def line_sum_upper_bound(spec: MagneticSpectrum, j: int, p, rtol: float = 1e-8,
                         budget: int = DEFAULT_BUDGET) -> float:
    """Rigorous upper bound on S_{p,j}^p that enumerates only two axes.

    Along the finest axis l != j the difference g(E) = F(E - lam_j) - F(E) is
    unimodal, so sum_{n_l >= 0} g^p(E_0 + lam_l n_l) is at most
    int_{E_0}^inf g^p / lam_l + s^p with s = sup_{E >= E_0} g.  For p = 1 the
    integral has a closed form; otherwise it is computed by composite
    Gauss-Legendre quadrature (relative error far below ``rtol``) with both
    neglected ends bounded analytically.
    """
    ji = _check_j(j)
    order = _as_order(p)
    prm = spec.params
    if prm.zero_temperature or not order.finite:
        raise ValueError("the line bound is for finite beta and finite p")
    pp = order.p
    lam, alpha = spec.lambdas, spec.alphas
    beta, mu, lam_j = prm.beta, prm.mu, lam[ji]
    rest = [i for i in range(3) if i != ji]
    li = min(rest, key=lambda i: lam[i])
    ki = rest[0] if rest[1] == li else rest[1]
    occ = spec.occupation_fn
    log_fac = math.log(-math.expm1(-beta * lam_j))
    peak = mu + 0.5 * lam_j
    sig = pp * beta * np.array(lam, dtype=float)
    sig[li] = math.inf
    log_pref = (-pp * beta * (spec.ground - lam_j - mu) + 0.5 * pp * math.log(alpha[ji])
                + math.log(1.0 / (beta * lam[li]) + 1.0))
    top = max(spec.mu_tilde0 + lam_j, 0.0) + (40.0 + 3.0 * math.log(1.0 + pp)) / (pp * beta)
    while True:
        if _pair_count(lam_j, lam[ki], top) > budget:
            raise LatticeBudgetError(f"line bound for j={j} exceeds the budget {budget}")
        acc = []
        for nj, nk in _pairs(lam_j, lam[ki], top):
            e0 = spec.ground + lam_j * nj + lam[ki] * nk
            a = -beta * (e0 - lam_j - mu)
            lu = a + log_fac - np.logaddexp(0.0, a - beta * lam_j)
            top_e = np.maximum(e0, peak)
            log_s = np.asarray(log_abs_occupation_difference(occ, top_e, top_e - lam_j), dtype=float)
            if pp == 1.0:
                with np.errstate(divide="ignore"):
                    log_int = np.where(lu < -30.0, lu, np.log(np.logaddexp(0.0, lu)))
            else:
                log_int = _log_diff_power_integral(beta * (e0 - mu), beta * lam_j, pp)
            line = np.logaddexp(log_int - math.log(beta * lam[li]), pp * log_s)
            acc.append(logsumexp(line + 0.5 * pp * np.log(alpha[ji] * nj)))
        log_sum = float(logsumexp(acc)) if acc else -math.inf
        log_tail = log_pref + _log_product_tail(sig, ji, 0.5 * pp, pp * beta * top)
        if np.isfinite(log_sum) and log_tail - log_sum <= math.log(rtol):
            return math.exp(3.0 * math.log(prm.h) + float(np.logaddexp(log_sum, log_tail)))
        gap = log_tail - log_sum if np.isfinite(log_sum) else 40.0
        top += (gap - math.log(rtol)) / (0.9 * pp * beta) + 1.0 / (pp * beta)

def plane_sum_upper_bound(spec: MagneticSpectrum, j: int, p, rtol: float = 1e-8,
                          chunk: int = 1_000_000) -> float:
    """Rigorous upper bound on S_{p,j}^p that enumerates only n_j.

    On each line along the finest axis l the sum is bounded as in
    ``line_sum_upper_bound`` by L(x) = J(x) / (beta lam_l) + g^p(max(x, x_peak)),
    x = beta (E_0 - mu) the line start.  L is nonincreasing, so the sum over
    n_k is at most L(x) + int_x^inf L / (beta lam_k), and that integral is
    (M(x) / (beta lam_l) + (x_peak - x)_+ g^p(x_peak) + J(max(x, x_peak))).
    Consecutive n_j are grouped so that x moves by at most 1e-4 per group.
    """
    ji = _check_j(j)
    order = _as_order(p)
    prm = spec.params
    if prm.zero_temperature or not order.finite:
        raise ValueError("the plane bound is for finite beta and finite p")
    pp = order.p
    lam, alpha = spec.lambdas, spec.alphas
    beta, mu, lam_j = prm.beta, prm.mu, lam[ji]
    rest = sorted((i for i in range(3) if i != ji), key=lambda i: lam[i])
    li, ki = rest
    a = beta * lam_j
    al, ak = beta * lam[li], beta * lam[ki]
    x_pk = 0.5 * a
    log_g_pk = pp * (math.log(-math.expm1(-a)) - 2.0 * math.log1p(math.exp(-x_pk)))
    j_pk = float(_diff_power_moments(np.array([x_pk]), a, pp)[0][0])
    sig = pp * beta * np.array(lam, dtype=float)
    sig[li] = sig[ki] = math.inf
    log_pref = (-pp * beta * (spec.ground - lam_j - mu) + 0.5 * pp * math.log(alpha[ji])
                + math.log(1.0 / al + 1.0) + math.log(1.0 / ak + 1.0))
    top = max(spec.mu_tilde0 + lam_j, 0.0) + (40.0 + 3.0 * math.log(1.0 + pp)) / (pp * beta)
    # the plane term is nonincreasing in x, so n_j in [n, n + block) is bounded
    # by its value at n times int_n^{n+block} t^{p/2} dt
    block = max(1, math.floor(1e-4 / a))
    sp1 = 0.5 * pp + 1.0
    done, acc = 0, []
    while True:
        nmax = math.floor(top / lam_j)
        for start in range(done + 1, nmax + 1, chunk * block):
            nj = np.arange(start, min(start + chunk * block, nmax + 1), block, dtype=float)
            nb = np.minimum(nj + block, nmax + 1.0)
            x = beta * (spec.ground + lam_j * nj - mu)
            log_j, log_m = _diff_power_moments(x, a, pp)
            over = np.maximum(x, x_pk)
            log_top = np.where(x >= x_pk, _diff_power_moments(over, a, pp)[0], j_pk)
            log_s = np.where(x >= x_pk, pp * (math.log(-math.expm1(-a)) - np.logaddexp(0.0, x - a)
                                             - np.logaddexp(0.0, -x)), log_g_pk)
            with np.errstate(divide="ignore"):
                flat = np.log(np.maximum(x_pk - x, 0.0)) + log_g_pk
            line = np.logaddexp(log_j - math.log(al), log_s)
            integral = np.logaddexp(np.logaddexp(log_m - math.log(al), flat), log_top)
            plane = np.logaddexp(line, integral - math.log(ak))
            if block == 1:
                log_w = 0.5 * pp * np.log(nj)
            else:
                log_w = (sp1 * np.log(nb) + np.log(-np.expm1(sp1 * np.log(nj / nb)))
                         - math.log(sp1))
            acc.append(float(logsumexp(plane + log_w + 0.5 * pp * math.log(alpha[ji]))))
        done = max(done, nmax)
        log_sum = float(logsumexp(acc)) if acc else -math.inf
        log_tail = log_pref + _log_product_tail(sig, ji, 0.5 * pp, pp * beta * top)
        if np.isfinite(log_sum) and log_tail - log_sum <= math.log(rtol):
            return math.exp(3.0 * math.log(prm.h) + float(np.logaddexp(log_sum, log_tail)))
        gap = log_tail - log_sum if np.isfinite(log_sum) else 40.0
        top += (gap - math.log(rtol)) / (0.9 * pp * beta) + 1.0 / (pp * beta)


def axis_upper_bound(spec: MagneticSpectrum, j: int, p, budget: int = DEFAULT_BUDGET
                     ) -> tuple[float, str]:
    """Rigorous upper bound on S_{p,j} and the method that produced it.

    The exact lattice sum (plus its tail) is used when it fits in the
    budget, otherwise the smaller of the two-axis line bound and the
    I_+ + I_- + I_0 majorant.
    """
    order = _as_order(p)
    try:
        s = magnetic_commutator_sum(spec, j, order, budget=budget)
    except LatticeBudgetError:
        if not order.finite:
            raise
        return _fallback_upper(spec, j, order.p, budget)
    if not order.finite:
        return max(s.value, s.tail_bound), "exact"
    head = math.exp(order.p * s.log_value) if np.isfinite(s.log_value) else 0.0
    return (head + s.tail_bound) ** order.inv, "exact"


def xp_commutator_upper_bounds(spec: MagneticSpectrum, p, budget: int = DEFAULT_BUDGET,
                               sums=None) -> XPBounds:
    """Bounds on ||[x_j, gamma]||, ||[p_j, gamma]||, ||[v_j, gamma]|| from S_{p,1..3}.

    Each S_{p,j} enters through a rigorous upper bound (exact sum plus
    tail, or a majorant when enumeration is too large).  ``sums`` may
    supply precomputed NormValues.
    """
    order = _as_order(p)
    if sums is None:
        vals = [axis_upper_bound(spec, j, order, budget)[0] for j in (1, 2, 3)]
        return xp_bounds_from_sums(spec, *vals)
    vals = []
    for s in sums:
        if order.finite:
            vals.append((math.exp(order.p * s.log_value) + s.tail_bound) ** order.inv
                        if np.isfinite(s.log_value) else s.tail_bound ** order.inv)
        else:
            vals.append(max(s.value, s.tail_bound))
    return xp_bounds_from_sums(spec, *vals)


@dataclass(frozen=True)
class CombinedUpperBound:
    value: float
    method: str
    per_axis: tuple


def combined_gradient_upper_bound(spec: MagneticSpectrum, p,
                                  budget: int = DEFAULT_BUDGET) -> CombinedUpperBound:
    """Rigorous upper bound for ||d_x gamma|| + <b> ||d_xi gamma||."""
    pairs = [axis_upper_bound(spec, j, p, budget) for j in (1, 2, 3)]
    sums = tuple(v for v, _ in pairs)
    xp = xp_bounds_from_sums(spec, *sums)
    return CombinedUpperBound(xp.combined_gradient, "+".join(m for _, m in pairs), sums)


def _fallback_upper(spec: MagneticSpectrum, j: int, p: float, budget: int) -> tuple[float, str]:
    """The smaller of the line bound and the decomposition majorant (as a p-th root)."""
    best, method = math.inf, "none"
    for name, fn in (("line", line_sum_upper_bound), ("decomposition", _decomposition_upper)):
        try:
            val = fn(spec, j, p, budget=budget)
        except LatticeBudgetError:
            continue
        if val < best:
            best, method = val, name
    if not np.isfinite(best):
        raise LatticeBudgetError(f"no rigorous bound for j={j} fits in the budget")
    return best ** (1.0 / p), method


def _decomposition_upper(spec: MagneticSpectrum, j: int, p: float, budget: int) -> float:
    """I_+ + I_- + I_0 with the Sigma estimate replacing the direct I_+ sum if needed."""
    try:
        return decomposition_bounds(spec, j, p, budget=budget).total
    except LatticeBudgetError:
        pass
    ji = j - 1
    beta = spec.params.beta
    lam, alpha = spec.lambdas, spec.alphas
    sig = p * beta * lam
    delta0 = p * beta * spec.mu_tilde0
    x = p * beta * lam[ji]
    log_common = (p * math.log(beta * lam[ji]) + 0.5 * p * math.log(alpha[ji])
                  + 3.0 * math.log(spec.params.h))
    # the sum over sig.n > delta0 is at most the sum over sig.n >= delta0
    est = sigma_sum_bound(delta0, sig, p, j)
    i_plus = _safe_exp(_log_rel_factor(x, +1) + log_common) * est
    below = _exp_lattice_sum(sig, ji, 0.5 * p, delta0, "below", budget=budget)
    i_minus = _safe_exp(_log_rel_factor(x, -1) + log_common + below)
    shell = zero_temp_shell_sum(
        MagneticSpectrum(PhysicalParams(spec.hbar, math.inf, spec.params.mu, 3, spec.b),
                         spec.axial_scale), j, p)
    i_zero = min(1.0, beta * lam[ji]) ** p * (math.exp(p * shell.log_value) if shell.value > 0 else 0.0)
    return i_plus + i_minus + i_zero


def sigma_sum_bound(delta: float, sigma, p: float, j: int) -> float:
    """A rigorous bound on sum_{sigma.n >= delta} e^{-sigma.n+delta} n_j^{p/2} without enumeration.

    For delta <= 0 the sum is evaluated in closed form; for delta > 0 the
    explicit two-term estimate is used.
    """
    sig = np.asarray(sigma, dtype=float)
    ji = j - 1
    s = 0.5 * p
    if delta <= 0:
        val = math.exp(delta) * _sum_power_exp_bound(s, sig[ji])
        for i in range(3):
            if i != ji:
                val /= -math.expm1(-sig[i])
        return val
    j1, j2 = (ji + 1) % 3, (ji + 2) % 3
    first = (2.0 * p ** s + (2.0 * delta) ** s) / (sig[ji] ** s * -math.expm1(-sig[ji]))
    second = (1.0 + 2.0 * delta / japanese(sig[j1])) * (delta / sig[ji]) ** (s + 1.0)
    return (first + second) / (-math.expm1(-sig[j1]) * -math.expm1(-sig[j2]))

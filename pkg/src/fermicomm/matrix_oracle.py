"""Brute-force ground truth in a truncated Fock basis.

Each axis carries a ladder a|n> = sqrt(alpha n)|n-1> on {|0>, ..., |N-1>}.
The full operators are Kronecker products, the Hamiltonian is diagonalised
densely and the equilibrium state is obtained by functional calculus.
Truncation corrupts the top state of every axis, so an instance is only
trusted when the occupation there is negligible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import sparse
from scipy.linalg import svdvals

from .fermi_dirac import OccupationFn, occupation
from .magnetic_spectral import MagneticSpectrum
from .model_params import NormValue, PhysicalParams, SchattenOrder

TRUST_OCCUPATION = 1e-14
MAX_DIMENSION = 20_000
COMMUTATION_TOL = 1e-12
DIRECT_FORM_TOL = 1e-10
ZERO_T_TOL = 1e-12

Operator = Union[np.ndarray, Sequence[np.ndarray]]


class TrustError(RuntimeError):
    """Raised when the truncation boundary carries non-negligible occupation."""

    def __init__(self, occupation_value: float, message: str = ""):
        self.occupation_value = occupation_value
        super().__init__(message or f"boundary occupation {occupation_value:.3e} exceeds "
                                    f"{TRUST_OCCUPATION:g}")


class ConstructionError(RuntimeError):
    pass


def ladder(n_levels: int, alpha: float) -> np.ndarray:
    """Single-axis annihilation operator with [a, a^*] = alpha away from the top state."""
    out = np.zeros((n_levels, n_levels))
    k = np.arange(1, n_levels)
    out[k - 1, k] = np.sqrt(alpha * k)
    return out


def _embed(ops: Sequence[np.ndarray], axis: int, dims: Sequence[int]) -> np.ndarray:
    mats = [np.eye(n) for n in dims]
    mats[axis] = ops
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def _interior_mask(dims: Sequence[int]) -> np.ndarray:
    """Basis states with every n_j <= N_j - 2."""
    grids = np.meshgrid(*[np.arange(n) for n in dims], indexing="ij")
    mask = np.ones(grids[0].shape, dtype=bool)
    for g, n in zip(grids, dims):
        mask &= g <= n - 2
    return mask.ravel()


def _occ(params: PhysicalParams, energies, mu: float | None = None, beta: float | None = None):
    beta = params.beta if beta is None else beta
    mu = params.mu if mu is None else mu
    if math.isinf(beta):
        return (np.asarray(energies) <= mu + ZERO_T_TOL * params.hbar).astype(float)
    return occupation(OccupationFn(beta, mu), energies)


@dataclass(frozen=True)
class OracleState:
    """Dense operators of one truncated instance.

    ``ladders`` holds the a_j, ``hamiltonian`` the ladder form of H and
    ``gamma`` the equilibrium F(H).  ``trust_cutoff`` is the lowest energy
    Lambda_0 + lambda_j (N_j - 1) - margin_j over the axes.
    """

    params: PhysicalParams
    per_axis_levels: tuple
    model: str
    lambdas: np.ndarray
    alphas: np.ndarray
    ground: float
    margin: np.ndarray
    ladders: tuple = field(repr=False)
    hamiltonian: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    _svals: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dimension(self) -> int:
        return int(np.prod(self.per_axis_levels))

    @property
    def axis_top_energies(self) -> np.ndarray:
        return self.ground + self.lambdas * (np.asarray(self.per_axis_levels) - 1)

    @property
    def trust_cutoff(self) -> float:
        return float(np.min(self.axis_top_energies - self.margin))

    def boundary_occupation(self) -> float:
        """max_j F(Lambda_0 + lambda_j (N_j - 1) - margin)."""
        return float(np.max(_occ(self.params, self.axis_top_energies - self.margin)))

    def check_trust(self) -> float:
        occ = self.boundary_occupation()
        if not occ < TRUST_OCCUPATION:
            raise TrustError(occ)
        return occ

    def operator(self, name: str) -> Operator:
        """a, a1..a3, x1..x3, p1..p3, v1..v3 (v is p - A; equal to p without field)."""
        if name == "a":
            return list(self.ladders)
        kind, idx = name[0], int(name[1:]) - 1
        if not 0 <= idx < len(self.ladders):
            raise KeyError(name)
        if kind == "a":
            return self.ladders[idx]
        if self.model == "harmonic":
            a = self.ladders[idx]
            if kind == "x":
                return 0.5 * (a + a.T)
            if kind in "pv":
                return (a - a.T) / 2j
            raise KeyError(name)
        return _magnetic_xpv(self, kind, idx)


def _magnetic_xpv(state: OracleState, kind: str, idx: int) -> np.ndarray:
    a1, a2, a3 = state.ladders
    bb = state.params.b_bracket
    b = float(state.params.b)
    if idx == 2:
        return 0.5 * (a3 + a3.T) if kind == "x" else (a3 - a3.T) / 2j
    x1 = (a1 + a1.T + a2 + a2.T) / (4.0 * bb)
    x2 = (a1 - a1.T + a2.T - a2) / (4j * bb)
    p1 = (a1 - a1.T + a2 - a2.T) / 4j
    p2 = (-a1 - a1.T + a2 + a2.T) / 4.0
    table = {
        ("x", 0): x1, ("x", 1): x2, ("p", 0): p1, ("p", 1): p2,
        # v = p - A with A = b (x2, -x1, 0), the orientation under which a_1
        # carries the frequency <b> - b
        ("v", 0): p1 - b * x2, ("v", 1): p2 + b * x1,
    }
    return table[(kind, idx)]


def _levels(N, naxes: int) -> tuple:
    dims = tuple(int(n) for n in (N if np.ndim(N) else [N] * naxes))
    if len(dims) != naxes or min(dims) < 4:
        raise ValueError(f"need {naxes} axes with at least 4 levels each, got {dims}")
    if int(np.prod(dims)) > MAX_DIMENSION:
        raise ValueError(f"basis size {int(np.prod(dims))} exceeds {MAX_DIMENSION}")
    return dims


def _margin(lambdas: np.ndarray, rule: str) -> np.ndarray:
    """Per-axis trust margin: 2 max_j lambda_j ("max") or 2 lambda_j ("axis")."""
    lambdas = np.asarray(lambdas, dtype=float)
    if rule == "max":
        return np.full(lambdas.shape, 2.0 * float(np.max(lambdas)))
    if rule == "axis":
        return 2.0 * lambdas
    raise ValueError(f"unknown margin rule {rule!r}")


def _finish(params, dims, model, lambdas, alphas, ground, margin, ladders, trust_cutoff):
    dims = tuple(dims)
    sp = [sparse.csr_matrix(a) for a in ladders]
    hamiltonian = ground * np.eye(int(np.prod(dims)))
    for a, lam, al in zip(sp, lambdas, alphas):
        hamiltonian += (lam / al) * (a.T @ a).toarray()
    state = OracleState(params, dims, model, np.asarray(lambdas, dtype=float),
                        np.asarray(alphas, dtype=float), float(ground), np.asarray(margin),
                        tuple(ladders), hamiltonian, np.empty((0, 0)))
    if trust_cutoff is not None and state.trust_cutoff < trust_cutoff:
        raise ValueError(f"levels {dims} reach only {state.trust_cutoff:.6g} "
                         f"< requested trust cutoff {trust_cutoff:.6g}")
    interior = _interior_mask(dims)
    comm = sum(a @ a.T - a.T @ a for a in sp)
    expected = float(np.sum(alphas))
    block = comm.toarray()[np.ix_(interior, interior)]
    if not np.allclose(block, expected * np.eye(block.shape[0]), rtol=0, atol=COMMUTATION_TOL):
        raise ConstructionError("ladder commutation relation fails on the interior block")
    object.__setattr__(state, "gamma", equilibrium(state))
    return state, interior


def build_harmonic(params: PhysicalParams, N, margin: str = "max",
                   trust_cutoff: float | None = None) -> OracleState:
    """Isotropic oscillator |p|^2 + |x|^2 on N levels per axis (int or per-axis tuple)."""
    if params.magnetic:
        raise ValueError("use build_magnetic for b != None")
    d, hb = params.dim, params.hbar
    dims = _levels(N, d)
    lambdas = np.full(d, 2.0 * hb)
    alphas = np.full(d, 2.0 * hb)
    ladders = [_embed(ladder(n, 2.0 * hb), j, dims) for j, n in enumerate(dims)]
    state, interior = _finish(params, dims, "harmonic", lambdas, alphas, d * hb,
                              _margin(lambdas, margin), ladders, trust_cutoff)
    direct = 0.0
    for a in state.ladders:
        a = sparse.csr_matrix(a)
        # p^2 + x^2 = ((a + a^*)^2 - (a - a^*)^2) / 4
        direct = direct + (((a + a.T) @ (a + a.T) - (a - a.T) @ (a - a.T)) / 4.0).toarray()
    _check_direct(state, direct, interior)
    return state


def build_magnetic(params: PhysicalParams, N, axial_scale: float = 2.0, margin: str = "max",
                   trust_cutoff: float | None = None) -> OracleState:
    """Fock-Darwin Hamiltonian |p - A|^2 + |x|^2 in the ladder form.

    The direct form is checked against it on the interior block.  The
    vector potential is A = b(x2, -x1, 0); the opposite orientation is the
    mirror image x2 -> -x2 and has the same spectrum and norms.
    """
    spec = MagneticSpectrum(params, axial_scale)
    dims = _levels(N, 3)
    lambdas, alphas = spec.lambdas, spec.alphas
    ladders = [_embed(ladder(n, al), j, dims) for j, (n, al) in enumerate(zip(dims, alphas))]
    state, interior = _finish(params, dims, "magnetic", lambdas, alphas, spec.ground,
                              _margin(lambdas, margin), ladders, trust_cutoff)
    if axial_scale == 2.0:
        ops = [sparse.csr_matrix(state.operator(f"{k}{j}")) for k in "vx" for j in (1, 2, 3)]
        direct = sum(m @ m for m in ops).toarray()
        _check_direct(state, direct, interior)
    return state


def _check_direct(state: OracleState, direct: np.ndarray, interior: np.ndarray) -> None:
    diff = (direct - state.hamiltonian)[np.ix_(interior, interior)]
    scale = max(1.0, float(np.max(np.abs(state.hamiltonian))))
    if np.max(np.abs(diff)) > DIRECT_FORM_TOL * scale:
        raise ConstructionError("ladder and direct forms of H disagree on the interior block")


def required_levels(params: PhysicalParams, model: str = "harmonic", axial_scale: float = 2.0,
                    margin: str = "max", cap: int | None = None) -> tuple:
    """Smallest per-axis level counts (>= 4) that pass the trust rule."""
    if model == "harmonic":
        lambdas = np.full(params.dim, 2.0 * params.hbar)
        ground = params.dim * params.hbar
    else:
        spec = MagneticSpectrum(params, axial_scale)
        lambdas, ground = spec.lambdas, spec.ground
    m = _margin(lambdas, margin)
    if params.zero_temperature:
        target = params.mu + ZERO_T_TOL * params.hbar
    else:
        target = params.mu + math.log(1.0 / TRUST_OCCUPATION) / params.beta
    out = []
    for lam, m_j in zip(lambdas, m):
        n = max(4, math.floor((target + m_j - ground) / lam) + 2)
        while not _occ(params, ground + lam * (n - 1) - m_j) < TRUST_OCCUPATION:
            n += 1
        if cap is not None and n > cap:
            raise TrustError(float(_occ(params, ground + lam * (cap - 1) - m_j)),
                             f"axis with spacing {lam:.6g} needs {n} levels (cap {cap})")
        out.append(n)
    return tuple(out)


def equilibrium(state: OracleState, beta: float | None = None, mu: float | None = None) -> np.ndarray:
    """gamma = U F(Lambda) U^* from the full eigendecomposition of H."""
    w, u = np.linalg.eigh(state.hamiltonian)
    f = _occ(state.params, w, mu=mu, beta=beta)
    return (u * f) @ u.conj().T


def _singular_values(m: Operator) -> np.ndarray:
    if isinstance(m, np.ndarray):
        return svdvals(m)
    # |(C_1, ..., C_d)| = sqrt(sum C_j^* C_j): singular values of the stacked operator
    return svdvals(np.vstack(list(m)))


def schatten_norm(m: Operator, p, hd_scale: float = 1.0) -> float:
    """(hd_scale * sum s_k^p)^{1/p}, or max s_k for p = inf.

    Pass ``hd_scale = h**d`` for the scaled norm.  A sequence of matrices is
    treated as a vector operator.
    """
    order = p if isinstance(p, SchattenOrder) else SchattenOrder(float(p))
    return schatten_from_singular_values(_singular_values(m), order, hd_scale)


def schatten_from_singular_values(s: np.ndarray, p, hd_scale: float = 1.0) -> float:
    order = p if isinstance(p, SchattenOrder) else SchattenOrder(float(p))
    if s.size == 0:
        return 0.0
    top = float(np.max(s))
    if not order.finite:
        return top
    if top == 0.0:
        return 0.0
    # factor out the largest value to avoid overflow for large p
    return top * (hd_scale * float(np.sum((s / top) ** order.p))) ** (1.0 / order.p)


def commutator(o: Operator, gamma: np.ndarray) -> Operator:
    if isinstance(o, np.ndarray):
        # the ladder-built operators are sparse, which makes the products cheap
        m = sparse.csr_matrix(o)
        return np.asarray(m @ gamma - (m.T @ gamma.T).T)
    return [commutator(m, gamma) for m in o]


def commutator_singular_values(state: OracleState, o: Union[str, Operator],
                               trust: bool = True) -> np.ndarray:
    if trust:
        state.check_trust()
    if not isinstance(o, str):
        return _singular_values(commutator(o, state.gamma))
    if o not in state._svals:
        state._svals[o] = _singular_values(commutator(state.operator(o), state.gamma))
    return state._svals[o]


def oracle_commutator_norm(state: OracleState, o: Union[str, Operator], p,
                           trust: bool = True) -> NormValue:
    """||[O, gamma]||_{L^p} with the h^d scaling; divide by hbar for the gradients."""
    s = commutator_singular_values(state, o, trust)
    h_d = state.params.h ** len(state.per_axis_levels)
    return NormValue(schatten_from_singular_values(s, p, h_d))

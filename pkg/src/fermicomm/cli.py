"""Command-line entry point: point evaluations, sweeps and oracle cross-checks."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import classical_norms as cn
from . import harmonic_spectral as hs
from . import magnetic_spectral as ms
from . import matrix_oracle as mo
from .model_params import PhysicalParams, SchattenOrder, classify_regime

COLUMNS = ("model", "d", "hbar", "beta", "mu", "b", "p", "regime", "quantity",
           "value", "tail_bound", "envelope", "ratio", "pass")
NUMERIC = ("hbar", "beta", "mu", "b", "p", "value", "tail_bound", "envelope", "ratio")

MODELS = ("harmonic", "magnetic", "classical")
QUANTITIES = {
    "harmonic": ("S_p", "K_p", "envelopes", "ratios", "oracle_check"),
    "magnetic": ("S_p", "envelopes", "ratios", "I_decomposition", "oracle_check"),
    "classical": ("S_p", "K_p", "envelopes", "ratios", "oracle_check"),
}
ORACLE_CAP = {"harmonic": 20_000, "magnetic": 16}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepRow:
    model: str
    d: int
    hbar: float
    beta: float
    mu: float
    b: Optional[float]
    p: float
    regime: str
    quantity: str
    value: Optional[float]
    tail_bound: Optional[float] = None
    envelope: Optional[float] = None
    ratio: Optional[float] = None
    passed: Optional[bool] = None

    def as_record(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


@dataclass
class SweepConfig:
    model: str
    hbar: list
    beta: list
    mu: list
    p: list
    d: list = field(default_factory=lambda: [3])
    b: list = field(default_factory=lambda: [None])
    quantities: list = field(default_factory=lambda: ["S_p", "envelopes", "ratios"])
    tol: float = 1e-8
    format: str = "csv"
    seed: int = 0
    workers: int = 1
    # "absolute" uses beta as given; "eta" reads it as beta*hbar and
    # "eta_b" as beta*hbar*<b>.  "ground" reads mu in units of the lowest level.
    beta_scale: str = "absolute"
    mu_scale: str = "absolute"

    def validate(self) -> "SweepConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        for name in ("hbar", "beta", "mu", "p", "d", "b"):
            if not getattr(self, name):
                raise ConfigError(f"grid {name!r} is empty")
        if self.model == "magnetic":
            self.d = [3]
            if any(b is None for b in self.b):
                raise ConfigError("the magnetic model needs numeric b values")
        unknown = set(self.quantities) - set(QUANTITIES[self.model])
        if unknown:
            raise ConfigError(f"quantities {sorted(unknown)} not available for {self.model}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.beta_scale not in ("absolute", "eta", "eta_b"):
            raise ConfigError(f"unknown beta_scale {self.beta_scale!r}")
        if self.mu_scale not in ("absolute", "ground"):
            raise ConfigError(f"unknown mu_scale {self.mu_scale!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self


# --------------------------------------------------------------------------
# parsing


def _number(v):
    if v is None or (isinstance(v, str) and v.strip().lower() in ("", "none", "null")):
        return None
    if isinstance(v, str):
        return float(v.strip())
    return float(v)


def _grid(v) -> list:
    """A list of numbers, a scalar, or a logspace spec {"logspace": [lo, hi, n]}."""
    if isinstance(v, dict):
        if set(v) != {"logspace"}:
            raise ConfigError(f"unknown grid spec {v!r}")
        lo, hi, n = v["logspace"]
        return [float(x) for x in np.logspace(math.log10(lo), math.log10(hi), int(n))]
    if isinstance(v, str):
        v = v.strip()
        if v.startswith("logspace(") and v.endswith(")"):
            lo, hi, n = (x.strip() for x in v[len("logspace("):-1].split(","))
            return _grid({"logspace": [float(lo), float(hi), int(n)]})
        return [_number(x) for x in v.split(",") if x.strip()] if v else []
    if isinstance(v, (list, tuple)):
        return [_number(x) for x in v]
    return [_number(v)]


def parse_config(text: str) -> SweepConfig:
    """JSON object or flat ``key = value`` lines (lists comma-separated)."""
    text = text.strip()
    if text.startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"cannot parse config line {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            raw[key] = val
    return config_from_mapping(raw)


def config_from_mapping(raw: dict) -> SweepConfig:
    known = {f.name for f in fields(SweepConfig)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    if "model" not in raw:
        raise ConfigError("config needs a model")
    kw = {"model": str(raw["model"]).strip()}
    for name in ("hbar", "beta", "mu", "p", "b"):
        if name in raw:
            kw[name] = _grid(raw[name])
    if "d" in raw:
        kw["d"] = [int(x) for x in _grid(raw["d"])]
    if "quantities" in raw:
        q = raw["quantities"]
        kw["quantities"] = [s.strip() for s in q.split(",")] if isinstance(q, str) else list(q)
    for name, conv in (("tol", float), ("seed", int), ("workers", int),
                       ("format", str), ("beta_scale", str), ("mu_scale", str)):
        if name in raw:
            kw[name] = conv(raw[name]) if conv is not str else str(raw[name]).strip()
    missing = {"hbar", "beta", "mu", "p"} - set(kw)
    if missing:
        raise ConfigError(f"config is missing grids {sorted(missing)}")
    try:
        return SweepConfig(**kw).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# evaluation


def _params(cfg: SweepConfig, hbar, beta, mu, d, b) -> PhysicalParams:
    bb = math.sqrt(1.0 + (b or 0.0) ** 2)
    if cfg.beta_scale == "eta":
        beta = beta / hbar
    elif cfg.beta_scale == "eta_b":
        beta = beta / (hbar * bb)
    if cfg.mu_scale == "ground":
        ground = (2.0 * bb + 1.0) * hbar if cfg.model == "magnetic" else d * hbar
        mu = mu * ground
    return PhysicalParams(hbar=hbar, beta=beta, mu=mu, dim=d, b=b)


def grid_points(cfg: SweepConfig) -> list:
    return list(itertools.product(cfg.hbar, cfg.beta, cfg.mu, cfg.d, cfg.b, cfg.p))


def _ratio(value, env):
    if value is None or env is None or not env > 0 or not math.isfinite(env):
        return None
    return value / env


def evaluate_point(cfg: SweepConfig, point) -> list:
    hbar, beta, mu, d, b, p = point
    prm = _params(cfg, hbar, beta, mu, d, b)
    base = dict(model=cfg.model, d=prm.dim, hbar=prm.hbar, beta=prm.beta, mu=prm.mu, b=prm.b,
                p=float(p), regime=classify_regime(prm).value)
    try:
        fn = {"harmonic": _harmonic_rows, "magnetic": _magnetic_rows,
              "classical": _classical_rows}[cfg.model]
        return [SweepRow(**base, **r) for r in fn(cfg, prm, float(p))]
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return [SweepRow(**base, quantity=f"error: {type(exc).__name__}: {exc}", value=None,
                         passed=False)]


def _harmonic_rows(cfg, prm, p):
    spec = hs.HarmonicSpectrum(prm)
    q = set(cfg.quantities)
    rows = []
    want_env = q & {"envelopes", "ratios"}
    if "S_p" in q or want_env or "oracle_check" in q:
        s = hs.schatten_commutator_sum(spec, p)
        env = hs.quantum_envelope(prm, p, allow_large_hbar=True).value if want_env else None
        if "S_p" in q or want_env:
            rows.append(dict(quantity="S_p", value=s.value, tail_bound=s.tail_bound,
                             envelope=env, ratio=_ratio(s.value, env) if "ratios" in q else None))
    if "K_p" in q and math.isfinite(p):
        k = hs.purity_defect_quantum(spec, p)
        rows.append(dict(quantity="K_p", value=k.value, tail_bound=k.tail_bound))
    if "oracle_check" in q:
        rows.append(_oracle_row(cfg, prm, p, "a", s.value, "harmonic"))
    return rows


def _oracle_row(cfg, prm, p, op, formula, model, label="oracle_rel_diff"):
    try:
        if model == "harmonic":
            levels = mo.required_levels(prm, "harmonic")
            if int(np.prod(levels)) > ORACLE_CAP["harmonic"]:
                raise mo.TrustError(float("nan"), f"oracle needs {levels} levels")
            state = mo.build_harmonic(prm, levels)
            val = mo.oracle_commutator_norm(state, op, p).value / prm.hbar
        else:
            levels = mo.required_levels(prm, "magnetic", cap=ORACLE_CAP["magnetic"])
            state = mo.build_magnetic(prm, levels)
            val = mo.oracle_commutator_norm(state, op, p).value
    except mo.TrustError as exc:
        return dict(quantity=f"{label} (untrusted: {exc})", value=None, passed=False)
    if formula == 0.0 and val == 0.0:
        rel = 0.0
    else:
        rel = abs(val - formula) / abs(formula) if formula else math.inf
    return dict(quantity=label, value=rel, envelope=None, passed=bool(rel <= cfg.tol))


def _magnetic_rows(cfg, prm, p):
    spec = ms.MagneticSpectrum(prm)
    q = set(cfg.quantities)
    order = SchattenOrder(p)
    rows = []
    above = spec.mu_tilde0 >= -spec.tol
    sums = {}
    if q & {"S_p", "oracle_check", "I_decomposition"}:
        for j in (1, 2, 3):
            try:
                sums[j] = ms.magnetic_commutator_sum(spec, j, order)
            except ms.LatticeBudgetError:
                sums[j] = None
            if "S_p" in q:
                s = sums[j]
                rows.append(dict(quantity=f"S_p,{j}", value=None if s is None else s.value,
                                 tail_bound=None if s is None else s.tail_bound))
    if q & {"envelopes", "ratios"} and above:
        ub = ms.combined_gradient_upper_bound(spec, order)
        env = ms.magnetic_envelope(prm, order).value
        rows.append(dict(quantity=f"combined_upper[{ub.method}]", value=ub.value, envelope=env,
                         ratio=_ratio(ub.value, env) if "ratios" in q else None))
    if "I_decomposition" in q and not prm.zero_temperature and order.finite:
        for j in (1, 2, 3):
            s = sums.get(j)
            try:
                dec = ms.decomposition_bounds(spec, j, p)
            except ms.LatticeBudgetError:
                dec = None
            if s is None or dec is None:
                rows.append(dict(quantity=f"I_decomposition,{j}", value=None, passed=None))
                continue
            lhs = math.exp(p * s.log_value) if math.isfinite(s.log_value) else 0.0
            rows.append(dict(quantity=f"I_decomposition,{j}", value=lhs, envelope=dec.total,
                             ratio=_ratio(lhs, dec.total), passed=bool(lhs <= dec.total)))
    if "I_decomposition" in q and prm.zero_temperature and above and order.finite:
        bounds = ms.indicator_commutator_bounds(spec, order)
        for j in (1, 2, 3):
            s = sums.get(j)
            if s is not None:
                rows.append(dict(quantity=f"indicator_bound,{j}", value=s.value,
                                 envelope=bounds[j], ratio=_ratio(s.value, bounds[j]),
                                 passed=bool(s.value <= bounds[j])))
    if "oracle_check" in q:
        for j in (1, 2, 3):
            s = sums.get(j)
            if s is not None:
                rows.append(_oracle_row(cfg, prm, p, f"a{j}", s.value, "magnetic",
                                        label=f"oracle_rel_diff,{j}"))
    return rows


def _classical_rows(cfg, prm, p):
    q = set(cfg.quantities)
    rows = []
    env = "envelopes" in q or "ratios" in q
    if "S_p" in q or env:
        g = cn.classical_grad_norm(prm, p)
        e = cn.classical_grad_envelope(prm, p) if env else None
        rows.append(dict(quantity="grad_z", value=g.value, tail_bound=g.tail_bound, envelope=e,
                         ratio=_ratio(g.value, e) if "ratios" in q else None))
    if "K_p" in q:
        k = cn.classical_purity_defect(prm, p)
        e = cn.classical_purity_envelope(prm, p) if env else None
        rows.append(dict(quantity="purity_defect", value=k.value, tail_bound=k.tail_bound,
                         envelope=e, ratio=_ratio(k.value, e) if "ratios" in q else None))
    if prm.b is not None and prm.dim == 3:
        gx = cn.magnetic_grad_x_norm(prm, p)
        g0 = cn.classical_grad_norm(PhysicalParams(prm.hbar, prm.beta, prm.mu, 3, 0.0), p)
        rows.append(dict(quantity="magnetic_grad_x", value=gx.value, tail_bound=gx.tail_bound))
        if p == 2:
            # the squared ratio to the field-free gradient is exactly (3 + 2 b^2)/6
            expected = (3.0 + 2.0 * prm.b ** 2) / 6.0
            sq = (gx.value / g0.value) ** 2
            rows.append(dict(quantity="magnetic_ratio_sq", value=sq, envelope=expected,
                             ratio=sq / expected,
                             passed=bool(abs(sq - expected) <= cfg.tol * expected)))
        if "oracle_check" in q:
            mc, err = cn.magnetic_sphere_integral_mc(prm.b, p, seed=cfg.seed)
            ex = cn.magnetic_sphere_integral(prm.b, p)
            # err is three standard errors; flag only beyond six
            rows.append(dict(quantity="sphere_integral_mc_rel_diff", value=abs(mc - ex) / ex,
                             tail_bound=err / ex, passed=bool(abs(mc - ex) <= 2.0 * err)))
    return rows


def run_sweep(cfg: SweepConfig):
    """Rows in grid order (independent of the worker count)."""
    points = grid_points(cfg)
    if cfg.workers == 1:
        chunks = [evaluate_point(cfg, pt) for pt in points]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(evaluate_point, [cfg] * len(points), points))
    return [row for chunk in chunks for row in chunk]


# --------------------------------------------------------------------------
# emission


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return f"{v:.17g}"
    return str(v)


def _json_value(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return float(f"{v:.17g}")
    return v


def emit(rows, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in rows:
            rec = r.as_record()
            writer.writerow([_fmt(rec[c]) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        recs = [{c: _json_value(r.as_record()[c]) for c in COLUMNS} for r in rows]
        return json.dumps(recs, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def _parse_value(col: str, v):
    if v is None or v == "":
        return None
    if col == "pass":
        return v if isinstance(v, bool) else v == "true"
    if col == "d":
        return int(v)
    if col in NUMERIC:
        return float(v)
    return v


def parse_rows(text: str, fmt: str = "csv") -> list:
    """Inverse of emit."""
    if fmt == "csv":
        recs = list(csv.DictReader(io.StringIO(text)))
    else:
        recs = json.loads(text)
    out = []
    for rec in recs:
        vals = {c: _parse_value(c, rec[c]) for c in COLUMNS}
        vals["passed"] = vals.pop("pass")
        out.append(SweepRow(**vals))
    return out


def summarize(rows) -> tuple[str, bool]:
    """Per-(quantity family, regime) ratio range and a list of failing rows."""
    ranges = {}
    bad = []
    for i, r in enumerate(rows):
        if r.passed is False:
            bad.append(i)
        if r.ratio is not None and math.isfinite(r.ratio):
            key = (r.model, r.quantity.split("[")[0].split(",")[0], r.regime)
            lo, hi = ranges.get(key, (math.inf, -math.inf))
            ranges[key] = (min(lo, r.ratio), max(hi, r.ratio))
    lines = ["# summary"]
    for (model, qty, regime), (lo, hi) in sorted(ranges.items()):
        lines.append(f"# {model} {qty} {regime}: ratio min {lo:.6g} max {hi:.6g}")
    for i in bad:
        lines.append(f"# violation at row {i + 1}: {rows[i].quantity} ({rows[i].model}, "
                     f"hbar={rows[i].hbar}, beta={rows[i].beta}, mu={rows[i].mu}, "
                     f"b={rows[i].b}, p={rows[i].p})")
    return "\n".join(lines) + "\n", not bad


# --------------------------------------------------------------------------
# click interface


def _write(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _finish(cfg: SweepConfig, out: Optional[str]):
    rows = run_sweep(cfg)
    _write(emit(rows, cfg.format), out)
    summary, ok = summarize(rows)
    sys.stderr.write(summary)
    sys.exit(0 if ok else 1)


def _float_or_inf(ctx, param, value):
    if value is None:
        return None
    try:
        return float(value)
    except ValueError as exc:
        raise click.BadParameter(f"{value!r} is not a number (use 'inf' for infinity)") from exc


def point_options(f):
    opts = [
        click.option("--hbar", type=float, required=True),
        click.option("--beta", callback=_float_or_inf, required=True, help="'inf' for zero temperature"),
        click.option("--mu", type=float, required=True),
        click.option("--p", "p", callback=_float_or_inf, default="2", show_default=True),
        click.option("--d", "d", type=int, default=None),
        click.option("--b", "b", type=float, default=None),
        click.option("--tol", type=float, default=1e-8, show_default=True),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv"),
        click.option("--out", type=click.Path(dir_okay=False), default=None),
        click.option("--seed", type=int, default=0, show_default=True),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _point_config(model, hbar, beta, mu, p, d, b, tol, fmt, seed, quantities):
    try:
        return config_from_mapping(dict(
            model=model, hbar=[hbar], beta=[beta], mu=[mu], p=[p],
            d=[d if d is not None else (3 if model == "magnetic" else 1)],
            b=[b], quantities=quantities, tol=tol, format=fmt, seed=seed))
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc


@click.group()
def main():
    """Commutator norms of Fermi-Dirac equilibria for harmonic and magnetic oscillators."""


@main.command()
@point_options
def classical(hbar, beta, mu, p, d, b, tol, fmt, out, seed):
    """Phase-space norms of the classical Fermi-Dirac distribution."""
    cfg = _point_config("classical", hbar, beta, mu, p, d if b is None else 3, b, tol, fmt, seed,
                        ["S_p", "K_p", "envelopes", "ratios"])
    _finish(cfg, out)


@main.command()
@point_options
def quantum(hbar, beta, mu, p, d, b, tol, fmt, out, seed):
    """Exact spectral norms for the isotropic harmonic oscillator."""
    if b is not None:
        raise click.UsageError("use the 'magnetic' subcommand when --b is given")
    cfg = _point_config("harmonic", hbar, beta, mu, p, d, None, tol, fmt, seed,
                        ["S_p", "K_p", "envelopes", "ratios"])
    _finish(cfg, out)


@main.command()
@point_options
def magnetic(hbar, beta, mu, p, d, b, tol, fmt, out, seed):
    """Ladder commutator sums, rigorous upper bound and envelope for the magnetic oscillator."""
    if b is None:
        raise click.UsageError("--b is required for the magnetic model")
    cfg = _point_config("magnetic", hbar, beta, mu, p, 3, b, tol, fmt, seed,
                        ["S_p", "envelopes", "ratios", "I_decomposition"])
    _finish(cfg, out)


@main.command("oracle-check")
@point_options
def oracle_check(hbar, beta, mu, p, d, b, tol, fmt, out, seed):
    """Compare the spectral formulas with dense truncated-basis matrices."""
    model = "harmonic" if b is None else "magnetic"
    cfg = _point_config(model, hbar, beta, mu, p, d, b, tol, fmt, seed, ["oracle_check"])
    _finish(cfg, out)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="JSON or key = value file mirroring SweepConfig")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--tol", type=float, default=None)
@click.option("--workers", type=int, default=None)
def sweep(config_path, fmt, out, seed, tol, workers):
    """Evaluate a grid described by a config file."""
    try:
        cfg = parse_config(Path(config_path).read_text())
        if fmt is not None:
            cfg.format = fmt
        if seed is not None:
            cfg.seed = seed
        if tol is not None:
            cfg.tol = tol
        if workers is not None:
            cfg.workers = workers
        cfg.validate()
    except (ConfigError, ValueError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"invalid config: {exc}") from exc
    _finish(cfg, out)


if __name__ == "__main__":
    main()

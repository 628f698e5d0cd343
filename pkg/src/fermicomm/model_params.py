"""Physical parameters, norm conventions and regime labels.

Conventions: k_B = 1, unit mass and charge, h = 2*pi*hbar.  The magnetic
model is three dimensional with field B = 2 b e_3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from scipy.special import gammaln


def japanese(x: float) -> float:
    """Japanese bracket <x> = sqrt(1 + x^2)."""
    return math.hypot(1.0, x)


@dataclass(frozen=True)
class PhysicalParams:
    """Model configuration; ``beta = inf`` means zero temperature."""

    hbar: float
    beta: float
    mu: float
    dim: int = 3
    b: Optional[float] = None

    def __post_init__(self):
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise ValueError(f"hbar must be positive and finite, got {self.hbar}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive (inf allowed), got {self.beta}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be an integer >= 1, got {self.dim}")
        if self.b is not None:
            if not (self.b >= 0 and math.isfinite(self.b)):
                raise ValueError(f"b must be non-negative and finite, got {self.b}")
            if self.dim != 3:
                raise ValueError("the magnetic model requires dim = 3")

    @property
    def h(self) -> float:
        return 2.0 * math.pi * self.hbar

    @property
    def eta(self) -> float:
        """Dimensionless gap parameter beta * hbar."""
        return self.beta * self.hbar

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    @property
    def magnetic(self) -> bool:
        return self.b is not None

    @property
    def b_bracket(self) -> float:
        return japanese(self.b or 0.0)

    @property
    def omega(self) -> float:
        """Effective angular frequency b / <b>."""
        return (self.b or 0.0) / self.b_bracket


@dataclass(frozen=True)
class SchattenOrder:
    p: float

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"Schatten order must be >= 1, got {self.p}")

    @property
    def finite(self) -> bool:
        return math.isfinite(self.p)

    @property
    def inv(self) -> float:
        """1/p, with 1/inf = 0."""
        return 0.0 if math.isinf(self.p) else 1.0 / self.p

    @property
    def inv_conj(self) -> float:
        """1/p' = 1 - 1/p."""
        return 1.0 - self.inv


def holder_conjugate(p: SchattenOrder) -> SchattenOrder:
    if p.p == 1:
        return SchattenOrder(math.inf)
    if math.isinf(p.p):
        return SchattenOrder(1.0)
    return SchattenOrder(p.p / (p.p - 1.0))


class RegimeLabel(str, Enum):
    CLASSICAL_LIKE = "ClassicalLike"
    DEEP_QUANTUM = "DeepQuantum"
    MAG_CLASSICAL = "MagClassical"
    MAG_INTERMEDIATE_LOW = "MagIntermediateLow"
    MAG_INTERMEDIATE_HIGH = "MagIntermediateHigh"
    MAG_DEEP = "MagDeep"


def classify_regime(params: PhysicalParams) -> RegimeLabel:
    """Temperature regime; boundary points go to the lower-listed label."""
    eta = params.eta
    if not params.magnetic:
        return RegimeLabel.CLASSICAL_LIKE if eta <= 1 else RegimeLabel.DEEP_QUANTUM
    bb = params.b_bracket
    if eta * bb <= 1:
        return RegimeLabel.MAG_CLASSICAL
    if eta <= 1:
        return RegimeLabel.MAG_INTERMEDIATE_LOW
    if eta <= bb:
        return RegimeLabel.MAG_INTERMEDIATE_HIGH
    return RegimeLabel.MAG_DEEP


@dataclass(frozen=True)
class NormValue:
    """A computed norm with a bound on what truncation or quadrature left out.

    ``log_value`` keeps the natural log of ``value`` when the value itself
    under- or overflows double precision.
    """

    value: float
    tail_bound: float = 0.0
    log_value: Optional[float] = None

    def __post_init__(self):
        if not self.tail_bound >= 0:
            raise ValueError(f"tail bound must be >= 0, got {self.tail_bound}")
        if self.log_value is None:
            lv = math.log(self.value) if self.value > 0 else -math.inf
            object.__setattr__(self, "log_value", lv)

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class EnvelopeValue:
    """An asymptotic envelope (no implicit constant), kept also in log form."""

    value: float
    log_value: float
    label: str = ""

    @classmethod
    def from_log(cls, log_value: float, label: str = "") -> "EnvelopeValue":
        value = math.exp(log_value) if log_value < 709 else math.inf
        return cls(value, log_value, label)

    def __float__(self):
        return float(self.value)


def sphere_measure(n: float) -> float:
    """Surface measure of the unit sphere in R^n, 2 pi^{n/2} / Gamma(n/2)."""
    if not n > 0:
        raise ValueError(f"sphere_measure needs n > 0, got {n}")
    return math.exp(math.log(2.0) + 0.5 * n * math.log(math.pi) - gammaln(0.5 * n))

"""Physical parameter sets, controller estimates, and dimensionless scaling.

All simulation code in this package works in dimensionless units: lengths are
scaled by the rest leg length, times by sqrt(l0/g) and velocities by
sqrt(g*l0), so gravity and body mass both map to 1 and a spring stiffness k
maps to the dimensionless group k*l0/(m*g).  SI values appear only at the
configuration boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class PlantParams:
    """True physical parameters of the planar plant (SI units).

    Three virtual legs (contralateral pairs), middle hip at the COM by
    default.  The single-leg SLIP plant uses the summed stiffness/damping of
    the synchronous legs, which is also the template the controller embeds.
    """

    m: float = 9.0
    inertia: float = 0.08
    k: tuple[float, float, float] = (2000.0, 2000.0, 2000.0)
    b: tuple[float, float, float] = (12.0, 12.0, 12.0)
    l0: float = 0.175
    d: tuple[float, float, float] = (-0.2, 0.0, 0.2)
    g: float = 9.81

    def __post_init__(self):
        if self.m <= 0 or self.inertia <= 0 or self.l0 <= 0 or self.g <= 0:
            raise ValueError("m, inertia, l0 and g must be positive")
        if any(ki <= 0 for ki in self.k):
            raise ValueError("leg stiffnesses must be positive")
        if any(bi < 0 for bi in self.b):
            raise ValueError("leg damping must be non-negative")
        if not (self.d[0] < self.d[1] < self.d[2]):
            raise ValueError("hip offsets must be ordered front-to-back")

    @property
    def scale(self) -> "DimensionlessScale":
        return DimensionlessScale(l0=self.l0, g=self.g, m=self.m)

    def template(self) -> "SlipParams":
        """Dimensionless single-leg equivalent: synchronous legs summed."""
        sc = self.scale
        return SlipParams(
            rs=sum(sc.stiffness(ki) for ki in self.k),
            rb=sum(sc.damping(bi) for bi in self.b),
        )

    def slimpod(self) -> "SlimpodParams":
        sc = self.scale
        return SlimpodParams(
            rs=tuple(sc.stiffness(ki) for ki in self.k),
            rb=tuple(sc.damping(bi) for bi in self.b),
            inertia=self.inertia / (self.m * self.l0 ** 2),
            d=tuple(di / self.l0 for di in self.d),
        )


@dataclass(frozen=True)
class ParamEstimate:
    """The controller's internal (adaptable) parameter estimates (SI)."""

    k_hat: float = 2000.0
    b_hat: float = 12.0
    m_hat: float = 9.0
    l0_hat: float = 0.175
    leg_count: int = 3

    def __post_init__(self):
        if self.k_hat <= 0 or self.m_hat <= 0 or self.l0_hat <= 0:
            raise ValueError("k_hat, m_hat and l0_hat must be positive")
        if self.b_hat < 0:
            raise ValueError("b_hat must be non-negative")

    def template(self, g: float = 9.81) -> "SlipParams":
        """Dimensionless template the controller believes in.

        The scale uses the *estimated* rest length and mass, which is how a
        mass misestimate leaks into the dimensionless stiffness.
        """
        sc = DimensionlessScale(l0=self.l0_hat, g=g, m=self.m_hat)
        return SlipParams(
            rs=self.leg_count * sc.stiffness(self.k_hat),
            rb=self.leg_count * sc.damping(self.b_hat),
        )

    def with_stiffness(self, k_hat: float) -> "ParamEstimate":
        return replace(self, k_hat=k_hat)


@dataclass(frozen=True)
class DimensionlessScale:
    """Scale factors between SI and the dimensionless group."""

    l0: float
    g: float
    m: float = 1.0

    @property
    def time(self) -> float:
        return math.sqrt(self.l0 / self.g)

    @property
    def velocity(self) -> float:
        return math.sqrt(self.g * self.l0)

    def length_nd(self, x: float) -> float:
        return x / self.l0

    def length_si(self, x: float) -> float:
        return x * self.l0

    def velocity_nd(self, v: float) -> float:
        return v / self.velocity

    def velocity_si(self, v: float) -> float:
        return v * self.velocity

    def stiffness(self, k: float) -> float:
        return k * self.l0 / (self.m * self.g)

    def stiffness_si(self, rs: float) -> float:
        return rs * self.m * self.g / self.l0

    def damping(self, b: float) -> float:
        return b * math.sqrt(self.l0 / self.g) / self.m

    def damping_si(self, rb: float) -> float:
        return rb * self.m / math.sqrt(self.l0 / self.g)


@dataclass(frozen=True)
class SlipParams:
    """Dimensionless SLIP parameters (l0 = m = g = 1 implicit)."""

    rs: float
    rb: float = 0.0

    def __post_init__(self):
        if self.rs <= 0:
            raise ValueError("dimensionless stiffness must be positive")
        if self.rb < 0:
            raise ValueError("dimensionless damping must be non-negative")


@dataclass(frozen=True)
class SlimpodParams:
    """Dimensionless Slimpod parameters: per-leg springs plus body geometry."""

    rs: tuple[float, float, float]
    rb: tuple[float, float, float]
    inertia: float
    d: tuple[float, float, float]

    def __post_init__(self):
        if self.inertia <= 0:
            raise ValueError("pitch inertia must be positive")
        if any(v <= 0 for v in self.rs):
            raise ValueError("leg stiffnesses must be positive")

    def template(self) -> SlipParams:
        return SlipParams(rs=sum(self.rs), rb=sum(self.rb))


@dataclass(frozen=True)
class ApexState:
    """Poincare-section state: apex height and horizontal velocity.

    Pitch fields are carried for the hexapod plant and stay zero for SLIP.
    Dimensionless units.
    """

    z: float
    ydot: float
    alpha: float = 0.0
    alphadot: float = 0.0

    def __post_init__(self):
        if self.z <= 0:
            raise ValueError("apex height must be positive")

    def planar(self) -> tuple[float, float]:
        return (self.z, self.ydot)


@dataclass(frozen=True)
class ControlInput:
    """One stride's decision: touchdown angle, touchdown and liftoff lengths."""

    theta_td: float
    r_td: float
    r_lo: float

    def __post_init__(self):
        if not 0.0 < self.r_td <= 1.0 + 1e-12:
            raise ValueError(f"r_td out of range: {self.r_td}")
        if not 0.0 < self.r_lo <= 1.0 + 1e-12:
            raise ValueError(f"r_lo out of range: {self.r_lo}")
        if abs(self.theta_td) >= math.pi / 2:
            raise ValueError(f"theta_td out of range: {self.theta_td}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta_td, self.r_td, self.r_lo)

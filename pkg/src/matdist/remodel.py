"""
Remodeling processes P(t) at one particle.

A process is a time-sampled path in GL+(3) starting at the identity. Each
P(t) should be a material isomorphism from (t₀, x) to (t, x); the density
it transports is ρ(t) = ρ(t₀) / det P(t), and the trace of the remodeling
velocity gradient L = P⁻¹·Ṗ decides growth (tr L < 0) against resorption
(tr L > 0), with ρ̇ = −ρ·tr L.
"""

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import InvalidProcessError, MissingDensityError, SingularPError
from .isomorph import MaterialIsomorphism, membership_test
from .kernel import SamplingConfig
from .law import DET_EPS, ConstitutiveLaw

logger = logging.getLogger(__name__)

P_COLUMNS = ("p11", "p12", "p13", "p21", "p22", "p23", "p31", "p32", "p33")


class GrowthClass(str, Enum):
    GROWTH = "Growth"
    RESORPTION = "Resorption"
    NEUTRAL = "Neutral"


@dataclass(frozen=True)
class RemodelingProcess:
    particle: tuple
    times: np.ndarray
    P: np.ndarray
    rho0: Optional[float] = None
    rho: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "particle", tuple(float(v) for v in self.particle))

        if times.ndim != 1 or times.size < 2:
            raise InvalidProcessError("a process needs at least two time samples")
        if np.any(np.diff(times) <= 0):
            raise InvalidProcessError("times must be strictly increasing")
        if P.shape != (times.size, 3, 3):
            raise InvalidProcessError(f"expected {times.size} 3×3 matrices, got shape {P.shape}")
        if not np.array_equal(P[0], np.eye(3)):
            raise InvalidProcessError("P(t0) must be the identity")
        if np.any(np.linalg.det(P) <= 0):
            raise InvalidProcessError("P(t) must be orientation-preserving")
        if self.rho0 is not None and not self.rho0 > 0:
            raise InvalidProcessError("rho0 must be positive")
        if self.rho is not None:
            rho = np.asarray(self.rho, dtype=float)
            if rho.shape != times.shape:
                raise InvalidProcessError("rho must have one value per time sample")
            object.__setattr__(self, "rho", rho)

    @property
    def n_intervals(self) -> int:
        return self.times.size - 1

    @classmethod
    def from_csv(cls, path: Union[str, Path], particle: Sequence[float] = (0.0, 0.0, 0.0),
                 rho0: Optional[float] = None) -> "RemodelingProcess":
        """Read `t,p11,…,p33[,rho]`; rho0 defaults to the first rho value."""
        path = Path(path)
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            header = [name.strip() for name in (reader.fieldnames or [])]
            missing = [name for name in ("t",) + P_COLUMNS if name not in header]
            if missing:
                raise InvalidProcessError(f"{path}: missing columns {', '.join(missing)}")
            has_rho = "rho" in header
            times, mats, rho = [], [], []
            for lineno, row in enumerate(reader, start=2):
                row = {k.strip(): v for k, v in row.items() if k is not None}
                try:
                    times.append(float(row["t"]))
                    mats.append([float(row[c]) for c in P_COLUMNS])
                    if has_rho:
                        rho.append(float(row["rho"]))
                except (TypeError, ValueError) as e:
                    raise InvalidProcessError(f"{path}, line {lineno}: {e}") from e

        rho_values = np.array(rho) if has_rho else None
        if rho0 is None and rho_values is not None and rho_values.size:
            rho0 = float(rho_values[0])
        logger.debug("read %d process samples from %s", len(times), path)
        return cls(particle=tuple(particle), times=np.array(times),
                   P=np.array(mats).reshape(-1, 3, 3), rho0=rho0, rho=rho_values)


@dataclass(frozen=True)
class MembershipReport:
    residuals: np.ndarray
    tau_iso: float

    @property
    def passed(self) -> bool:
        return bool(np.all(self.residuals <= self.tau_iso))

    def to_dict(self) -> dict:
        return {"residuals": self.residuals.tolist(), "tau_iso": self.tau_iso, "passed": self.passed}


def check_membership(law: ConstitutiveLaw, proc: RemodelingProcess, cfg: SamplingConfig,
                     tau_iso: float = 1e-6) -> MembershipReport:
    """Membership residual of every P(tₖ) as an isomorphism (t₀, x) → (tₖ, x)."""
    n_check = cfg.n_validation if cfg.n_validation > 0 else cfg.n_f
    source = (float(proc.times[0]), proc.particle)
    residuals = np.array([
        membership_test(law, MaterialIsomorphism(source=source, target=(float(t), proc.particle), P=P),
                        n_check, cfg.seed, cfg.spread)
        for t, P in zip(proc.times, proc.P)
    ])
    return MembershipReport(residuals=residuals, tau_iso=tau_iso)


@dataclass(frozen=True)
class MassReport:
    predicted: np.ndarray
    measured: np.ndarray
    relative_error: np.ndarray
    tau_mass: float

    @property
    def passed_per_time(self) -> List[bool]:
        return [bool(e <= self.tau_mass) for e in self.relative_error]

    @property
    def passed(self) -> bool:
        return all(self.passed_per_time)

    def to_dict(self) -> dict:
        return {
            "predicted": self.predicted.tolist(),
            "measured": self.measured.tolist(),
            "relative_error": self.relative_error.tolist(),
            "passed_per_time": self.passed_per_time,
            "passed": self.passed,
            "tau_mass": self.tau_mass,
        }


def mass_consistency(proc: RemodelingProcess, tau_mass: float = 1e-6) -> MassReport:
    """Compare ρ(tₖ) with ρ(t₀) / |det P(tₖ)|."""
    if proc.rho is None or proc.rho0 is None:
        raise MissingDensityError("mass consistency needs density samples and rho0")
    predicted = proc.rho0 / np.abs(np.linalg.det(proc.P))
    error = np.abs(proc.rho - predicted) / predicted
    return MassReport(predicted=predicted, measured=proc.rho, relative_error=error, tau_mass=tau_mass)


def _edge_order(n: int) -> int:
    return 2 if n >= 3 else 1


def velocity_gradient(proc: RemodelingProcess) -> np.ndarray:
    """L(tₖ) = P(tₖ)⁻¹·Ṗ(tₖ), Ṗ by second-order differences."""
    for t, P in zip(proc.times, proc.P):
        if abs(np.linalg.det(P)) <= DET_EPS or np.linalg.cond(P) > 1.0 / np.finfo(float).eps:
            raise SingularPError(f"P({t}) is numerically singular")
    P_dot = np.gradient(proc.P, proc.times, axis=0, edge_order=_edge_order(proc.times.size))
    return np.linalg.solve(proc.P, P_dot)


@dataclass(frozen=True)
class GrowthReport:
    times: np.ndarray
    trace: np.ndarray
    trace_direct: np.ndarray
    classes: List[GrowthClass]
    tau_tr: float
    rho_dot: Optional[np.ndarray] = None
    rho_dot_predicted: Optional[np.ndarray] = None
    sign_consistent: Optional[bool] = None
    convention: str = field(default="growth when tr(P⁻¹·Ṗ) < 0, resorption when tr(P⁻¹·Ṗ) > 0; ρ̇ = −ρ·tr(P⁻¹·Ṗ)")

    @property
    def rho_dot_error(self) -> Optional[float]:
        if self.rho_dot is None:
            return None
        return float(np.max(np.abs(self.rho_dot - self.rho_dot_predicted)))

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "trace_L": self.trace.tolist(),
            "trace_L_direct": self.trace_direct.tolist(),
            "classes": [c.value for c in self.classes],
            "tau_tr": self.tau_tr,
            "rho_dot": None if self.rho_dot is None else self.rho_dot.tolist(),
            "rho_dot_predicted": None if self.rho_dot_predicted is None else self.rho_dot_predicted.tolist(),
            "rho_dot_error": self.rho_dot_error,
            "sign_consistent": self.sign_consistent,
            "convention": self.convention,
        }


def classify_growth(proc: RemodelingProcess, tau_tr: float = 1e-8) -> GrowthReport:
    """Growth / Resorption / Neutral per time from the sign of tr L.

    tr L is taken as d/dt log det P, which equals tr(P⁻¹·Ṗ) and is exact
    zero for isochoric paths; the trace of velocity_gradient is reported
    alongside.
    """
    L = velocity_gradient(proc)
    trace_direct = np.trace(L, axis1=1, axis2=2)
    edge = _edge_order(proc.times.size)
    trace = np.gradient(np.log(np.linalg.det(proc.P)), proc.times, edge_order=edge)

    classes = [GrowthClass.GROWTH if tr < -tau_tr else GrowthClass.RESORPTION if tr > tau_tr
               else GrowthClass.NEUTRAL for tr in trace]

    rho_dot = rho_dot_predicted = sign_consistent = None
    if proc.rho is not None:
        rho_dot = np.gradient(proc.rho, proc.times, edge_order=edge)
        rho_dot_predicted = -proc.rho * trace
        decided = np.abs(trace) > tau_tr
        sign_consistent = bool(np.all(np.sign(rho_dot[decided]) == np.sign(rho_dot_predicted[decided])))
        if not sign_consistent:
            logger.warning("density rate disagrees in sign with -rho·tr L at particle %s", proc.particle)

    return GrowthReport(times=proc.times, trace=trace, trace_direct=trace_direct, classes=classes, tau_tr=tau_tr,
                        rho_dot=rho_dot, rho_dot_predicted=rho_dot_predicted, sign_consistent=sign_consistent)

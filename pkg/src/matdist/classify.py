"""
Global verdicts on a grid sweep from the fiber-dimension criteria.

Thresholds: 4 = dimension of body-time, 3 = dimension of the body,
1 / 0 = whether a particle's history admits a material time direction.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .distributions import FiberReport
from .errors import IncompleteSweepError

logger = logging.getLogger(__name__)

BODY_TIME_DIM = 4
BODY_DIM = 3
TIME_DIRECTION = 1
NO_TIME_DIRECTION = 0

CRITERIA = {
    "smooth_uniform_remodeling": (
        f"the body-material distribution has dimension {BODY_TIME_DIM} at every sampled (t, x) "
        "and the material distribution has constant dimension"
    ),
    "smooth_remodeling": (
        "the material distribution has constant dimension and the particle-history "
        f"distribution has dimension {TIME_DIRECTION} at every sampled (t, x)"
    ),
    "smooth_aging": (
        "the material distribution has constant dimension and the particle-history "
        f"distribution has dimension {NO_TIME_DIRECTION} at some sampled (t, x)"
    ),
    "uniform_aging": (
        "smooth aging holds and the state distribution at fixed t has dimension "
        f"{BODY_DIM} at every sampled (t, x)"
    ),
}

CITATIONS = {
    "smooth_uniform_remodeling": "global dimension theorem for smooth uniform remodeling (every instant and particle)",
    "smooth_remodeling": "constant-dimension theorem for smooth remodeling",
    "smooth_aging": "constant-dimension proposition for smooth aging",
    "uniform_aging": "uniform-aging proposition",
}

THRESHOLD_PROVENANCE = {
    "body_time_dim": {"value": BODY_TIME_DIM, "meaning": "dimension of body-time",
                      "citation": CITATIONS["smooth_uniform_remodeling"]},
    "body_dim": {"value": BODY_DIM, "meaning": "dimension of the body",
                 "citation": CITATIONS["uniform_aging"]},
    "time_direction": {"value": TIME_DIRECTION, "meaning": "particle history admits a material time direction",
                       "citation": CITATIONS["smooth_remodeling"]},
    "no_time_direction": {"value": NO_TIME_DIRECTION, "meaning": "particle history admits no material time direction",
                          "citation": CITATIONS["smooth_aging"]},
}

CAVEATS = (
    "Verdicts are necessary evidence evaluated on the sampled grid, not proofs over the continuum.",
    "Constant fiber dimension is the computable condition for a smooth material groupoid; "
    "topological obstructions off the grid cannot be detected numerically.",
)


@dataclass(frozen=True)
class Verdict:
    value: bool
    criterion: str
    witnesses: List[dict] = field(default_factory=list)
    counterexample: Optional[dict] = None
    citation: str = ""

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "criterion": self.criterion,
            "citation": self.citation,
            "witnesses": self.witnesses,
            "counterexample": self.counterexample,
        }


@dataclass(frozen=True)
class ClassificationReport:
    per_point: List[dict]
    verdicts: Dict[str, Verdict]
    dims_constant: Optional[bool]
    thresholds_used: dict
    complete: bool = True
    failed_points: List[dict] = field(default_factory=list)
    caveats: Sequence[str] = CAVEATS

    @property
    def smooth_uniform_remodeling(self) -> Optional[Verdict]:
        return self.verdicts.get("smooth_uniform_remodeling")

    @property
    def smooth_remodeling(self) -> Optional[Verdict]:
        return self.verdicts.get("smooth_remodeling")

    @property
    def smooth_aging(self) -> Optional[Verdict]:
        return self.verdicts.get("smooth_aging")

    @property
    def uniform_aging(self) -> Optional[Verdict]:
        return self.verdicts.get("uniform_aging")

    def to_dict(self) -> dict:
        return {
            "status": "complete" if self.complete else "incomplete",
            "dims_constant": self.dims_constant,
            "verdicts": {name: verdict.to_dict() for name, verdict in self.verdicts.items()},
            "per_point": self.per_point,
            "failed_points": self.failed_points,
            "thresholds_used": self.thresholds_used,
            "threshold_provenance": THRESHOLD_PROVENANCE,
            "caveats": list(self.caveats),
        }


def _where(report: FiberReport) -> dict:
    return {"t": report.t, "x": list(report.x)}


def _first(reports: Sequence[FiberReport], predicate) -> Optional[FiberReport]:
    return next((r for r in reports if predicate(r)), None)


def _verdicts(ok: Sequence[FiberReport]) -> Tuple[Dict[str, Verdict], bool]:
    reference = ok[0].dim_full
    jump = _first(ok, lambda r: r.dim_full != reference)
    dims_constant = jump is None
    all_points = [_where(r) for r in ok]

    not_base4 = _first(ok, lambda r: r.dim_base != BODY_TIME_DIM)
    not_px1 = _first(ok, lambda r: r.dim_particle_x_base != TIME_DIRECTION)
    aging_points = [_where(r) for r in ok if r.dim_particle_x_base == NO_TIME_DIRECTION]
    not_state3 = _first(ok, lambda r: r.dim_state_t_base != BODY_DIM)

    def verdict(name: str, blocker: Optional[FiberReport], witnesses: List[dict]) -> Verdict:
        if blocker is None:
            return Verdict(True, CRITERIA[name], witnesses=witnesses, citation=CITATIONS[name])
        return Verdict(False, CRITERIA[name], counterexample=_where(blocker), citation=CITATIONS[name])

    uniform = verdict("smooth_uniform_remodeling", not_base4 or jump, all_points)
    remodeling = verdict("smooth_remodeling", jump or not_px1, all_points)
    if jump is not None:
        aging = verdict("smooth_aging", jump, [])
    elif aging_points:
        aging = Verdict(True, CRITERIA["smooth_aging"], witnesses=aging_points, citation=CITATIONS["smooth_aging"])
    else:
        aging = Verdict(False, CRITERIA["smooth_aging"], counterexample=_where(ok[0]),
                        citation=CITATIONS["smooth_aging"])

    if aging.value:
        uniform_aging = verdict("uniform_aging", not_state3, aging.witnesses)
    else:
        uniform_aging = Verdict(False, CRITERIA["uniform_aging"], counterexample=aging.counterexample,
                                citation=CITATIONS["uniform_aging"])

    return {
        "smooth_uniform_remodeling": uniform,
        "smooth_remodeling": remodeling,
        "smooth_aging": aging,
        "uniform_aging": uniform_aging,
    }, dims_constant


def classify(sweep: Sequence[FiberReport], thresholds: Optional[dict] = None) -> ClassificationReport:
    """Apply the dimension criteria to a sweep.

    Raises IncompleteSweepError carrying a partial report (verdicts over the
    points that succeeded) when any point failed.
    """
    if not sweep:
        raise ValueError("cannot classify an empty sweep")
    ok = [r for r in sweep if not r.failed]
    failed = [dict(_where(r), error=r.error) for r in sweep if r.failed]

    verdicts, dims_constant = _verdicts(ok) if ok else ({}, None)
    report = ClassificationReport(
        per_point=[r.summary() for r in sweep],
        verdicts=verdicts,
        dims_constant=dims_constant,
        thresholds_used=dict(thresholds or {}),
        complete=not failed,
        failed_points=failed,
    )
    if failed:
        raise IncompleteSweepError(f"{len(failed)} of {len(sweep)} grid points failed", report=report)
    logger.debug("verdicts: %s", {name: v.value for name, v in verdicts.items()})
    return report

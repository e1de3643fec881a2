"""
Pydantic models for bound reports, sweep rows and check outcomes.
Provides validation and serialization for everything the CLI writes.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

ABSOLUTE_FLOOR = 1e-12


class BoundKind(str, Enum):
    """One inequality of the speed-limit family."""
    MASTER = "MASTER"
    SPEED_RATE = "SPEED_RATE"
    ALPHA_FAMILY = "ALPHA_FAMILY"
    CONTROL_EFFORT = "CONTROL_EFFORT"
    COARSE_X_CHAIN = "COARSE_X_CHAIN"
    COARSE_V_CHAIN = "COARSE_V_CHAIN"
    KHOD_X = "KHOD_X"
    KHOD2_V = "KHOD2_V"
    TIGHT_FREV0 = "TIGHT_FREV0"
    MARGV_FREV0 = "MARGV_FREV0"
    SIGMA_UPPER_A = "SIGMA_UPPER_A"
    SIGMA_UPPER_B = "SIGMA_UPPER_B"
    SIMIL_FIRR0 = "SIMIL_FIRR0"
    MARGX_FIRR0 = "MARGX_FIRR0"
    RLC_CEC = "RLC_CEC"


class ForceRegime(str, Enum):
    """Declared time-reversal character of the applied force."""
    GENERAL = "general"
    F_IRR_ZERO = "f_irr_zero"  # force even under time reversal
    F_REV_ZERO = "f_rev_zero"  # force odd under time reversal


class BoundReport(BaseModel):
    """
    One evaluated inequality, oriented so that it holds when lhs >= rhs.

    `chain` lists further (upper, lower) pairs that must each hold for
    chained inequalities.
    """
    kind: BoundKind
    params: dict[str, float] = Field(default_factory=dict)
    lhs: float
    rhs: float
    slack: float
    tolerance: float
    satisfied: bool
    terms: dict[str, float] = Field(default_factory=dict)
    chain: list[tuple[float, float]] = Field(default_factory=list)
    scale: float = 0.0
    notes: list[str] = Field(default_factory=list)

    model_config = ConfigDict(from_attributes=True)

    @classmethod
    def build(
        cls,
        kind: BoundKind,
        lhs: float,
        rhs: float,
        tol_rel: float,
        scale: float = 0.0,
        terms: Optional[dict[str, float]] = None,
        chain: Optional[list[tuple[float, float]]] = None,
        params: Optional[dict[str, float]] = None,
        notes: Optional[list[str]] = None,
    ) -> "BoundReport":
        """
        Assemble a report and decide `satisfied`.

        The tolerance is tol_rel * max(|lhs|, |rhs|), floored at
        ABSOLUTE_FLOOR * scale, where `scale` is the size of the terms summed
        to form the sides. Each chain pair gets the same rule on its own sides.
        """
        chain = list(chain or [])
        floor = ABSOLUTE_FLOOR * abs(scale)

        def allowed(upper: float, lower: float) -> float:
            return max(tol_rel * max(abs(upper), abs(lower)), floor)

        tolerance = allowed(lhs, rhs)
        slack = lhs - rhs
        ok = slack >= -tolerance and all(u - l >= -allowed(u, l) for u, l in chain)
        return cls(
            kind=kind,
            params=params or {},
            lhs=lhs,
            rhs=rhs,
            slack=slack,
            tolerance=tolerance,
            satisfied=bool(ok),
            terms=terms or {},
            chain=chain,
            scale=abs(scale),
            notes=notes or [],
        )

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind.value
        inner = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.kind.value}({inner})"


class SweepRow(BaseModel):
    """One point of the gamma/m transition-time sweep."""
    gamma_over_m: float = Field(..., gt=0)
    tau24: float = float("nan")
    tau25: float = float("nan")
    tau_actual: float
    tau_over_relax: float = float("nan")
    steps: int = 0
    ordering_holds: Optional[bool] = None
    bounds_satisfied: Optional[bool] = None
    root: Optional[str] = None
    breakdown: dict = Field(default_factory=dict)
    error: Optional[str] = None

    @property
    def succeeded(self) -> bool:
        return self.error is None


class CheckOutcome(BaseModel):
    """Result of one named invariant in `check`."""
    suite: str
    name: str
    passed: bool
    detail: str = ""
    worst: Optional[float] = None


class ClosedFormComparison(BaseModel):
    """Closed-form W2 against the exact discrete value on a grid."""
    closed: float
    discrete: float
    relative_gap: float
    truncated_mass: float = 0.0
    passed: bool

    @model_validator(mode="after")
    def gap_is_nonnegative(self) -> "ClosedFormComparison":
        if self.relative_gap < 0:
            raise ValueError("relative_gap must be nonnegative")
        return self

"""Machine-checked stability conditions and closed-form Poisson oracles.

Each checker evaluates the named scalar diagnostics of a model (spectral
radii and operator norms of summed coefficient matrices), compares them to 1
with strict inequality, and lists the conclusions the holding conditions
license.  Values within 1e-12 of 1 are additionally flagged ``boundary``:
the underlying results need strict inequality, so numerical equality is
evidence of a knife-edge configuration rather than a pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import linalg
from .models import GinarSpec, IngarchSpec, LogLinearSpec, ModelSpec

HOLDS = "holds"
FAILS = "fails"
NOT_APPLICABLE = "not_applicable"

_BOUNDARY_TOL = 1e-12
_STIRLING_MAX = 30


@dataclass(frozen=True)
class Verdict:
    status: str
    boundary: bool = False

    def to_dict(self) -> dict:
        return {"status": self.status, "boundary": self.boundary}


@dataclass(frozen=True)
class Diagnostic:
    """A named scalar together with the matrix it was computed from."""

    value: float
    matrix: list | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "matrix": self.matrix}


@dataclass
class ConditionReport:
    """Evaluated diagnostics plus a verdict for every checked condition."""

    model_kind: str
    computed: dict[str, Diagnostic]
    verdicts: dict[str, Verdict]
    implications: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def holds(self, name: str) -> bool:
        return self.verdicts[name].status == HOLDS

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "computed": {k: v.to_dict() for k, v in self.computed.items()},
            "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
            "implications": self.implications,
            "notes": self.notes,
        }

    def format_table(self) -> str:
        lines = [f"condition report ({self.model_kind})"]
        lines.append("  diagnostics:")
        for name, diag in self.computed.items():
            lines.append(f"    {name:<24} {diag.value:.10g}")
        lines.append("  verdicts:")
        for name, verdict in self.verdicts.items():
            suffix = "  [boundary]" if verdict.boundary else ""
            lines.append(f"    {name:<24} {verdict.status}{suffix}")
        if self.implications:
            lines.append("  implications:")
            for imp in self.implications:
                lines.append(f"    {imp['conclusion']}  (from {imp['condition']})")
        for note in self.notes:
            lines.append(f"  note: {note}")
        return "\n".join(lines)


def _verdict(value: float) -> Verdict:
    # Strict comparison with tolerance zero; the boundary flag records ties.
    return Verdict(HOLDS if value < 1.0 else FAILS, boundary=abs(value - 1.0) <= _BOUNDARY_TOL)


def check_model(spec: ModelSpec) -> ConditionReport:
    """Dispatch to the family-specific checker."""
    if isinstance(spec, GinarSpec):
        return check_ginar(spec)
    if isinstance(spec, IngarchSpec):
        return check_ingarch(spec)
    return check_loglinear(spec)


def check_ginar(spec: GinarSpec) -> ConditionReport:
    """Stationarity and moment conditions of the thinning model."""
    total = sum(spec.mean_matrices[1:], spec.mean_matrices[0].copy())
    rho = linalg.spectral_radius(total)
    computed = {"rho_sum_means": Diagnostic(rho, total.tolist())}
    verdicts = {
        "stationarity": _verdict(rho),
        # Built-in counting and immigration families all have finite moments
        # of every order, so the moment hypothesis holds by construction.
        "higher_order_moments": Verdict(HOLDS),
    }
    implications = []
    if verdicts["stationarity"].status == HOLDS:
        implications.append({
            "conclusion": "a unique stationary, non-anticipative, integrable solution exists",
            "condition": "rho(sum of thinning mean matrices) < 1",
        })
        implications.append({
            "conclusion": "E |X_0|_1^r is finite for every r > 1",
            "condition": "stationarity plus finite moments of the counting and immigration families",
        })
    notes = [
        f"counting family '{spec.counting_family}' and immigration family "
        f"'{spec.immigration.family}' have finite moments of every order",
    ]
    return ConditionReport("ginar", computed, verdicts, implications, notes)


def check_ingarch(spec: IngarchSpec) -> ConditionReport:
    """Stationarity, polynomial-moment and exponential-moment conditions."""
    total = spec.lambda_matrices[0] + spec.count_matrices[0]
    for j in range(1, spec.q):
        total = total + spec.lambda_matrices[j] + spec.count_matrices[j]
    rho = linalg.spectral_radius(total)
    l1_sum = sum(linalg.matrix_norm(a, "l1") for a in spec.lambda_matrices) \
        + sum(linalg.matrix_norm(b, "l1") for b in spec.count_matrices)
    linf = linalg.matrix_norm(total, "linf")
    l2_sum = sum(linalg.matrix_norm(a, "l2") for a in spec.lambda_matrices) \
        + sum(linalg.matrix_norm(b, "l2") for b in spec.count_matrices)
    min_d = float(spec.intensity_offset.min())

    computed = {
        "rho_sum_AB": Diagnostic(rho, total.tolist()),
        "l1_sum_norms": Diagnostic(l1_sum),
        "linf_sum": Diagnostic(linf, total.tolist()),
        # Informational only: no verdict attaches to the l2 diagnostic.
        "l2_sum_norms": Diagnostic(l2_sum),
        "min_offset": Diagnostic(min_d, spec.intensity_offset.tolist()),
    }
    verdicts = {
        "stationarity": _verdict(rho),
        "polynomial_moments": _verdict(rho),
        "exp_moment_l1": _verdict(l1_sum),
        "exp_moment_linf": _verdict(linf),
        "necessity_applicable": Verdict(HOLDS if min_d > 0 else NOT_APPLICABLE),
    }

    implications = []
    if verdicts["stationarity"].status == HOLDS:
        implications.append({
            "conclusion": "a unique stationary, non-anticipative, integrable solution exists",
            "condition": "rho(sum(A_i + B_i)) < 1",
        })
        implications.append({
            "conclusion": "E |Y_t|_1^r is finite for every r > 1",
            "condition": "rho(sum(A_i + B_i)) < 1",
        })
    if verdicts["exp_moment_l1"].status == HOLDS:
        implications.append({
            "conclusion": "some delta > 0 gives finite E exp(delta |Y_0|_1) and E exp(delta |lambda_0|_1)",
            "condition": "sum of l1 norms of all A_i, B_i < 1",
        })
    if verdicts["exp_moment_linf"].status == HOLDS:
        implications.append({
            "conclusion": "some delta > 0 gives finite E exp(delta |Y_0|_1) and E exp(delta |lambda_0|_1)",
            "condition": "linf norm of sum(A_i + B_i) < 1",
        })
    if verdicts["necessity_applicable"].status == HOLDS:
        implications.append({
            "conclusion": "conversely, existence of a stationary integrable solution forces rho(sum(A_i + B_i)) < 1",
            "condition": "all components of the intensity offset are positive",
        })

    notes = []
    if verdicts["stationarity"].status == HOLDS \
            and verdicts["exp_moment_l1"].status == FAILS \
            and verdicts["exp_moment_linf"].status == FAILS and spec.p > 1:
        notes.append(
            "stationarity holds but neither norm criterion for exponential moments does; "
            "in dimension > 1 it is an open question whether the spectral-radius condition "
            "alone gives finite exponential moments"
        )
    return ConditionReport("ingarch", computed, verdicts, implications, notes)


def check_loglinear(spec: LogLinearSpec) -> ConditionReport:
    """Conditions on the entrywise absolute values of the coefficients."""
    total = linalg.entrywise_abs(spec.mu_matrices[0]) + linalg.entrywise_abs(spec.logcount_matrices[0])
    for j in range(1, spec.q):
        total = total + linalg.entrywise_abs(spec.mu_matrices[j]) \
            + linalg.entrywise_abs(spec.logcount_matrices[j])
    rho = linalg.spectral_radius(total)
    linf = linalg.matrix_norm(total, "linf")
    computed = {
        "rho_sum_abs": Diagnostic(rho, total.tolist()),
        "linf_sum_abs": Diagnostic(linf, total.tolist()),
    }
    verdicts = {
        "stationarity": _verdict(rho),
        "exp_moments": _verdict(linf),
    }
    implications = []
    if verdicts["stationarity"].status == HOLDS:
        implications.append({
            "conclusion": "a unique stationary, non-anticipative, integrable solution exists",
            "condition": "rho(sum(|A_i| + |B_i|)) < 1, entrywise absolute values",
        })
    if verdicts["exp_moments"].status == HOLDS:
        implications.append({
            "conclusion": "some delta > 0 gives finite E exp(delta |Y_0|_1) and E exp(delta |lambda_0|_1)",
            "condition": "linf norm of sum(|A_i| + |B_i|) < 1",
        })
    return ConditionReport("loglinear", computed, verdicts, implications)


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind S(n, k), exactly.

    Computed by the recurrence ``S(n, k) = k S(n-1, k) + S(n-1, k-1)``;
    restricted to ``1 <= n <= 30`` to stay in the exact integer range.
    """
    if not 1 <= n <= _STIRLING_MAX:
        raise ValueError(f"n must lie in [1, {_STIRLING_MAX}], got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    row = [0, 1]  # S(1, 0), S(1, 1)
    for m in range(2, n + 1):
        new = [0] * (m + 1)
        for i in range(1, m + 1):
            new[i] = i * row[i] + row[i - 1] if i < len(row) else row[i - 1]
        row = new
    return row[k]


def poisson_raw_moment(lam: float, r: int) -> float:
    """r-th raw moment of Poisson(lam): sum over i of lam^i S(r, i)."""
    if lam < 0:
        raise ValueError("intensity must be nonnegative")
    if not 1 <= r <= _STIRLING_MAX:
        raise ValueError(f"moment order must lie in [1, {_STIRLING_MAX}], got {r}")
    return float(sum(lam**i * stirling2(r, i) for i in range(1, r + 1)))


def poisson_mgf(lam: float, delta: float) -> float:
    """log E exp(delta X) for X ~ Poisson(lam), i.e. lam (e^delta - 1)."""
    if lam < 0:
        raise ValueError("intensity must be nonnegative")
    if not math.isfinite(delta):
        raise ValueError("delta must be finite")
    return float(lam * (math.exp(delta) - 1.0))

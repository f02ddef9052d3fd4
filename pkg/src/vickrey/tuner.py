"""Budget-constrained parameter selection and grid sweeps.

:func:`tune` doubles epsilon from a small start (at t = 0) until the
utility loss fits the budget, then scans t at that epsilon and keeps the
feasible point with the largest inference error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .audit import AuditReport, Auditor, write_reports_csv
from .errors import BudgetUnreachable
from .mechanisms import MechanismConfig

DEFAULT_T_GRID = tuple(round(0.05 * i, 2) for i in range(1, 21))


@dataclass(frozen=True)
class TunerConfig:
    budget: float
    epsilon0: float
    t_grid: tuple[float, ...] = DEFAULT_T_GRID
    max_doublings: int = 40

    def __post_init__(self):
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if not self.epsilon0 > 0:
            raise ValueError("epsilon0 must be positive")
        if not self.t_grid or any(not 0.0 <= t <= 1.0 for t in self.t_grid):
            raise ValueError("t grid must be non-empty with values in [0, 1]")
        if self.max_doublings < 0:
            raise ValueError("max_doublings must be non-negative")


@dataclass
class TuneResult:
    epsilon: float
    t: float
    report: AuditReport
    log: list[AuditReport] = field(default_factory=list)


Evaluator = Callable[[float, float], AuditReport]


def family(auditor: Auditor, base: MechanismConfig) -> Evaluator:
    """Wrap an auditor as a cached ``(epsilon, t) -> AuditReport`` function."""
    cache: dict[tuple[float, float], AuditReport] = {}

    def evaluate(epsilon: float, t: float) -> AuditReport:
        key = (float(epsilon), float(t))
        if key not in cache:
            cache[key] = auditor.audit(base.replace(epsilon=epsilon, t=t))
        return cache[key]

    return evaluate


def tune(evaluate: Evaluator, config: TunerConfig) -> TuneResult:
    """Maximize inference error subject to utility loss <= budget.

    Feasibility is ``L <= C`` in both phases. Ties in inference error keep
    the smaller t. Every evaluation is appended to the log in call order.
    """
    log: list[AuditReport] = []

    def run(eps, t):
        rep = evaluate(eps, t)
        log.append(rep)
        return rep

    eps = config.epsilon0
    rep = run(eps, 0.0)
    doublings = 0
    while rep.utility_loss > config.budget:
        if doublings >= config.max_doublings:
            raise BudgetUnreachable(eps, rep.utility_loss, config.budget)
        eps *= 2.0
        doublings += 1
        rep = run(eps, 0.0)

    best, best_t = rep, 0.0
    for t in config.t_grid:
        if t == 0.0:
            continue
        cand = run(eps, t)
        if cand.utility_loss <= config.budget and cand.inference_error > best.inference_error:
            best, best_t = cand, t
    return TuneResult(eps, best_t, best, log)


@dataclass
class TradeoffCurve:
    reports: list[AuditReport] = field(default_factory=list)

    def add(self, report: AuditReport):
        if any(r.key == report.key for r in self.reports):
            raise ValueError(f"duplicate curve key {report.key}")
        self.reports.append(report)

    def __len__(self):
        return len(self.reports)

    def __iter__(self):
        return iter(self.reports)

    def to_csv(self, stream, comment: str | None = None):
        write_reports_csv(stream, self.reports, comment)

    @staticmethod
    def read_csv(stream) -> list[dict]:
        return list(csv.DictReader(ln for ln in stream if not ln.startswith("#")))


def sweep(auditor: Auditor, base: MechanismConfig, epsilons: Sequence[float],
          variants: Sequence[dict], repetitions: int = 1) -> TradeoffCurve:
    """One audit per (epsilon, variant override) pair, in grid order."""
    if not epsilons or not variants:
        raise ValueError("grids must be non-empty")
    curve = TradeoffCurve()
    for overrides in variants:
        for eps in epsilons:
            cfg = base.replace(epsilon=float(eps), **overrides)
            curve.add(auditor.audit_repeated(cfg, repetitions))
    return curve

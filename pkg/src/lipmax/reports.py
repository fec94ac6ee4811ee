"""Bound-check records: one line per verified inequality."""
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Check:
    inequality_id: str
    lhs: float
    rhs: float
    constants: dict = field(default_factory=dict)
    mesh_h: float = None
    seed: int = None
    tol: float = 0.0
    note: str = ""
    skipped: bool = False

    @property
    def margin(self):
        return float(self.rhs - self.lhs)

    @property
    def passed(self):
        if self.skipped:
            return True
        return bool(np.isfinite(self.lhs) and np.isfinite(self.rhs) and self.margin >= -self.tol)

    def record(self):
        rec = {"inequality_id": self.inequality_id, "lhs": float(self.lhs), "rhs": float(self.rhs),
               "constants": dict(self.constants), "margin": self.margin, "pass": self.passed,
               "mesh_h": None if self.mesh_h is None else float(self.mesh_h), "seed": self.seed}
        if self.note:
            rec["note"] = self.note
        if self.skipped:
            rec["skipped"] = True
        return rec


@dataclass
class BoundCheckReport:
    """Ordered collection of checks plus free-form metadata."""

    checks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, inequality_id, lhs, rhs, **kw):
        c = Check(inequality_id, float(np.real(lhs)), float(np.real(rhs)), **kw)
        self.checks.append(c)
        return c

    def extend(self, other):
        self.checks.extend(other.checks)
        self.meta.update(other.meta)
        return self

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c.inequality_id for c in self.checks if not c.passed]

    def by_id(self, prefix):
        return [c for c in self.checks if c.inequality_id.startswith(prefix)]

    def min_margin(self, prefix=""):
        sel = self.by_id(prefix)
        return min(c.margin for c in sel) if sel else np.nan

    def records(self):
        return [c.record() for c in self.checks]

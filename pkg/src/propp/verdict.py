"""Three-valued answers for bounded searches."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class Status(str, Enum):
    YES = "ProvenYes"
    NO = "ProvenNo"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Verdict:
    status: Status
    witness: Any = None
    budget: int = 0
    notes: dict = field(default_factory=dict)

    @classmethod
    def yes(cls, witness=None, budget=0, **notes):
        return cls(Status.YES, witness, budget, notes)

    @classmethod
    def no(cls, witness=None, budget=0, **notes):
        return cls(Status.NO, witness, budget, notes)

    @classmethod
    def unknown(cls, witness=None, budget=0, **notes):
        return cls(Status.UNKNOWN, witness, budget, notes)

    @property
    def is_yes(self):
        return self.status is Status.YES

    @property
    def is_no(self):
        return self.status is Status.NO

    @property
    def is_unknown(self):
        return self.status is Status.UNKNOWN

    @property
    def exit_code(self):
        return {Status.YES: 0, Status.NO: 1, Status.UNKNOWN: 2}[self.status]

    def to_json(self):
        return {"status": self.status.value, "witness": self.witness, "budget": self.budget, **self.notes}

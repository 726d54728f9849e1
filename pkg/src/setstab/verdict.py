"""Outcome record returned by every predicate in the package."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any


@dataclass(frozen=True)
class StabilityVerdict:
    """Boolean outcome plus the data that certifies or refutes it.

    ``witness`` maps short names (``"member"``, ``"point"``, ...) to the
    offending or certifying objects.  A failing verdict always has one.
    """

    holds: bool
    witness: dict[str, Any] | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.holds and not self.witness:
            raise ValueError("a failing verdict needs a witness")
        object.__setattr__(self, "notes", tuple(self.notes))

    def __bool__(self) -> bool:
        return self.holds

    def with_notes(self, *notes: str) -> StabilityVerdict:
        return replace(self, notes=self.notes + tuple(n for n in notes if n not in self.notes))


def passed(*notes: str, **witness: Any) -> StabilityVerdict:
    return StabilityVerdict(True, witness or None, notes)


def failed(notes: tuple[str, ...] | list[str] = (), **witness: Any) -> StabilityVerdict:
    return StabilityVerdict(False, witness, tuple(notes))

"""Observed family count tables, in the canonical type ordering."""

from __future__ import annotations

import operator
from dataclasses import dataclass

from epifam import model

N_TRIAD_TYPES = len(model.TRIAD_TYPES)
N_PAIR_TYPES = len(model.PAIR_TYPES)

# pair type index (0-based) receiving each triad type when the father is dropped
PAIR_OF_TRIAD = {
    t_index: p.index - 1 for p in model.PAIR_TYPES for t_index in p.triad_indices
}

EXCLUDED_PAIR_POS = model.EXCLUDED_PAIR.index - 1


def triad_label(position: int) -> str:
    """Canonical label of the triad type at 0-based vector position."""
    return f"triad_{position + 1}"


def pair_label(position: int) -> str:
    p = model.PAIR_TYPES[position]
    return f"pair_{p.m}_{p.c}"


def _cells(values, n: int, what: str) -> tuple[int, ...]:
    if values is None:
        return (0,) * n
    out = tuple(operator.index(v) for v in values)
    if len(out) != n:
        raise ValueError(f"{what} must have {n} entries, got {len(out)}")
    if any(v < 0 for v in out):
        raise ValueError(f"{what} must be non-negative")
    return out


@dataclass(frozen=True)
class CountsTable:
    """Counts of case/control families by genotype type, plus the design totals.

    Triad vectors follow the 15-type canonical ordering, pair vectors the
    7-type ordering.  The stored totals always equal the respective cell
    sums.  All-triad and all-pair tables are valid special cases.
    """

    case_triads: tuple[int, ...]
    control_triads: tuple[int, ...]
    case_pairs: tuple[int, ...]
    control_pairs: tuple[int, ...]
    total_case_triads: int
    total_control_triads: int
    total_case_pairs: int
    total_control_pairs: int

    def __post_init__(self):
        object.__setattr__(self, "case_triads", _cells(self.case_triads, N_TRIAD_TYPES, "case triad counts"))
        object.__setattr__(self, "control_triads", _cells(self.control_triads, N_TRIAD_TYPES, "control triad counts"))
        object.__setattr__(self, "case_pairs", _cells(self.case_pairs, N_PAIR_TYPES, "case pair counts"))
        object.__setattr__(self, "control_pairs", _cells(self.control_pairs, N_PAIR_TYPES, "control pair counts"))
        for total_name, cells in (
            ("total_case_triads", self.case_triads),
            ("total_control_triads", self.control_triads),
            ("total_case_pairs", self.case_pairs),
            ("total_control_pairs", self.control_pairs),
        ):
            total = operator.index(getattr(self, total_name))
            object.__setattr__(self, total_name, total)
            if total != sum(cells):
                raise ValueError(f"{total_name}={total} does not match the cell sum {sum(cells)}")

    @classmethod
    def from_cells(
        cls, case_triads=None, control_triads=None, case_pairs=None, control_pairs=None
    ) -> "CountsTable":
        """Build a table from cell counts, deriving the four design totals."""
        ct = _cells(case_triads, N_TRIAD_TYPES, "case triad counts")
        ut = _cells(control_triads, N_TRIAD_TYPES, "control triad counts")
        cp = _cells(case_pairs, N_PAIR_TYPES, "case pair counts")
        up = _cells(control_pairs, N_PAIR_TYPES, "control pair counts")
        return cls(ct, ut, cp, up, sum(ct), sum(ut), sum(cp), sum(up))

    @property
    def total_families(self) -> int:
        return (
            self.total_case_triads
            + self.total_control_triads
            + self.total_case_pairs
            + self.total_control_pairs
        )

    @property
    def is_triads_only(self) -> bool:
        return self.total_case_pairs == 0 and self.total_control_pairs == 0

    @property
    def is_pairs_only(self) -> bool:
        return self.total_case_triads == 0 and self.total_control_triads == 0

    def drop_fathers(self) -> "CountsTable":
        """Collapse every triad family onto its mother-child pair type."""
        case_pairs = list(self.case_pairs)
        control_pairs = list(self.control_pairs)
        for t in model.TRIAD_TYPES:
            j = PAIR_OF_TRIAD[t.index]
            case_pairs[j] += self.case_triads[t.index - 1]
            control_pairs[j] += self.control_triads[t.index - 1]
        return CountsTable.from_cells(None, None, case_pairs, control_pairs)

    def case_triads_only(self) -> "CountsTable":
        """Keep only the complete case-family triads."""
        return CountsTable.from_cells(self.case_triads, None, None, None)

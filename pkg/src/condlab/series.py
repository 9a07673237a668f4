"""GrowthSeries: measured (m, value, kind) sequences that feed exponent fits."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .io import csv_text, read_csv


class Kind(str, enum.Enum):
    EXACT = "exact"
    LOWER = "lower_witness"
    UPPER = "upper_envelope"


@dataclass
class GrowthSeries:
    quantity: str
    system: str
    entries: list = field(default_factory=list)

    def add(self, m, value, kind=Kind.EXACT):
        kind = Kind(kind)
        same = [e[0] for e in self.entries if e[2] is kind]
        if same and int(m) <= same[-1]:
            raise ValueError(f"m must be strictly increasing within kind {kind.value}: {m} after {same[-1]}")
        self.entries.append((int(m), float(value), kind))
        return self

    def select(self, kinds=(Kind.EXACT, Kind.LOWER)):
        """(m, value) arrays for the given kinds, ordered by m."""
        kinds = {Kind(k) for k in kinds}
        rows = sorted((m, v) for m, v, k in self.entries if k in kinds)
        if not rows:
            return np.zeros(0, dtype=int), np.zeros(0)
        m, v = zip(*rows)
        return np.array(m), np.array(v)

    def value_at(self, m, kind):
        for mm, v, k in self.entries:
            if mm == m and k is Kind(kind):
                return v
        return None

    def check(self, k_type=False, atol=1e-10):
        """Invariant check; returns a list of violations (empty when consistent)."""
        bad = []
        for m, v, k in self.entries:
            if k is Kind.EXACT:
                lw = self.value_at(m, Kind.LOWER)
                if lw is not None and lw > v * (1 + atol):
                    bad.append(f"m={m}: witness {lw} exceeds exact {v}")
            if k_type and v < 1 - atol:
                bad.append(f"m={m}: value {v} < 1")
        return bad

    def to_csv(self) -> str:
        rows = [(self.quantity, self.system, m, v, k.value) for m, v, k in self.entries]
        return csv_text(["quantity", "system", "m", "value", "kind"], rows)

    @classmethod
    def from_csv(cls, text):
        """All series in a CSV text, keyed by (quantity, system)."""
        _, rows = read_csv(text if "\n" in text else text)
        out = {}
        for q, s, m, v, k in rows:
            out.setdefault((q, s), cls(q, s)).entries.append((int(m), float(v), Kind(k)))
        return out


def series_from(m, values, quantity="value", system="", kind=Kind.EXACT):
    s = GrowthSeries(quantity, system)
    for mm, v in zip(m, values):
        s.add(mm, v, kind)
    return s

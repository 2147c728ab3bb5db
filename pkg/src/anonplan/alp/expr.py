"""Affine expressions over LP variables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence


@dataclass
class LinearExpr:
    """constant + sum(coef * var); zero coefficients are dropped on construction."""

    constant: float = 0.0
    terms: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self.constant = float(self.constant)
        self.terms = {int(v): float(c) for v, c in self.terms.items() if c != 0.0}

    def __add__(self, other: "LinearExpr") -> "LinearExpr":
        terms = dict(self.terms)
        for v, c in other.terms.items():
            terms[v] = terms.get(v, 0.0) + c
        return LinearExpr(self.constant + other.constant, terms)

    def scaled(self, s: float) -> "LinearExpr":
        return LinearExpr(self.constant * s, {v: c * s for v, c in self.terms.items()})

    def value(self, x: Sequence[float]) -> float:
        return self.constant + sum(c * x[v] for v, c in self.terms.items())

    def render(self, names: Mapping[int, str] | None = None) -> str:
        names = names or {}
        parts = []
        for v in sorted(self.terms):
            c = self.terms[v]
            name = names.get(v, f"x{v}")
            if not parts:
                parts.append(f"{c!r} {name}" if c >= 0 else f"- {-c!r} {name}")
            else:
                parts.append(f"+ {c!r} {name}" if c >= 0 else f"- {-c!r} {name}")
        if self.constant or not parts:
            parts.append(
                f"+ {self.constant!r}" if self.constant >= 0 and parts else f"{self.constant!r}"
            )
        return " ".join(parts)

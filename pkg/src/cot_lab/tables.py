"""Sampled-curve container shared by the curve modules and the CLI.

A CurveTable is a rectangular block of floats: one named column per curve or
argmin parameter, one row per abscissa sample. Serialization uses Python's
shortest round-trip float representation so re-running a sweep with the same
inputs reproduces the output stream byte for byte.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple


@dataclass(frozen=True)
class CurveTable:
    columns: Tuple[str, ...]
    rows: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        rows = tuple(tuple(float(v) for v in r) for r in self.rows)
        for r in rows:
            if len(r) != len(self.columns):
                raise ValueError("row width does not match column count")
        object.__setattr__(self, "rows", rows)

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines.extend(",".join(repr(v) for v in r) for r in self.rows)
        return "\n".join(lines) + "\n"

    def to_json_obj(self) -> dict:
        return {"columns": list(self.columns),
                "rows": [list(r) for r in self.rows]}


def table_from_rows(columns: Sequence[str], rows: List[Sequence[float]]
                    ) -> CurveTable:
    return CurveTable(tuple(columns), tuple(tuple(r) for r in rows))

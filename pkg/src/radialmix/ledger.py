"""Time series of tracked norms, with exact CSV round-tripping."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["LEDGER_COLUMNS", "EnergyLedger", "atomic_write_text", "format_float"]

# Per-mode radial integrals (angular factor dropped).  The last two columns are
# the mixed products on the right-hand side of the cross-term balance.
LEDGER_COLUMNS = (
    "t",
    "l2_sq",
    "grad_sq",
    "wtheta_sq",
    "cross",
    "lap_sq",
    "wgrad_sq",
    "wm2_sq",
    "x_sq",
    "phi",
    "w",
    "mix_drlap",
    "mix_m2lap",
)

_NONNEGATIVE = ("l2_sq", "grad_sq", "wtheta_sq", "lap_sq", "wgrad_sq", "wm2_sq", "x_sq")


def format_float(x: float) -> str:
    # 17 significant digits round-trip every IEEE double
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class EnergyLedger:
    """Rows of diagnostics ordered by time.

    Rows are appended by the trajectory that owns the ledger; afterwards it is
    treated as read-only.  ``failed`` and ``message`` describe an aborted run,
    in which case the rows cover the part of the trajectory that completed.
    """

    columns = LEDGER_COLUMNS

    def __init__(self, rows=None, *, failed: bool = False, message: str = ""):
        self._rows: list[tuple[float, ...]] = []
        self.failed = failed
        self.message = message
        for row in rows or ():
            self.append(row)

    def append(self, row) -> None:
        if isinstance(row, dict):
            row = tuple(float(row[c]) for c in self.columns)
        else:
            row = tuple(float(v) for v in row)
            if len(row) != len(self.columns):
                raise ValueError(f"expected {len(self.columns)} values, got {len(row)}")
        if self._rows and not row[0] > self._rows[-1][0]:
            raise ValueError("ledger times must be strictly increasing")
        self._rows.append(row)

    def __len__(self) -> int:
        return len(self._rows)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise KeyError(name) from None
        return np.array([r[j] for r in self._rows])

    def as_array(self) -> np.ndarray:
        return np.array(self._rows, dtype=float).reshape(len(self._rows), len(self.columns))

    def check(self) -> None:
        """Raise if the ledger invariants do not hold."""
        t = self["t"]
        if np.any(np.diff(t) <= 0):
            raise ValueError("ledger times must be strictly increasing")
        for name in _NONNEGATIVE:
            if np.any(self[name] < 0):
                raise ValueError(f"column {name} has negative entries")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self._rows:
            writer.writerow([format_float(v) for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "EnergyLedger":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != cls.columns:
            raise ValueError(f"unexpected ledger header {header}")
        return cls([float(v) for v in row] for row in reader if row)

    @classmethod
    def read_csv(cls, path) -> "EnergyLedger":
        return cls.from_csv(Path(path).read_text())

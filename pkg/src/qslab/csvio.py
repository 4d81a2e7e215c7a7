"""CSV emission for mode trajectories, 17 significant digits so values round-trip."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .observables import diagnostic_series

MODE_COLUMNS = ["t", "omega1_re", "omega1_im", "omega3_re", "omega3_im",
                "omega5_re", "omega5_im", "omega7_re", "omega7_im", "A", "B", "E", "R"]


def fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


def write_rows(path: Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_mode_csv(path: Path, times, states) -> Path:
    """One row per sample; R is left blank where |omega3| is degenerate."""
    states = np.asarray(states, dtype=complex)
    d = diagnostic_series(states)
    rows = []
    for i, t in enumerate(times):
        s = states[i]
        rows.append([t, s[0].real, s[0].imag, s[1].real, s[1].imag, s[2].real, s[2].imag,
                     s[3].real, s[3].imag, d["A"][i], d["B"][i], d["E"][i], d["R"][i]])
    return write_rows(path, MODE_COLUMNS, rows)


def read_mode_csv(path: Path) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Inverse of write_mode_csv: times, complex states (N, 4) and diagnostic columns."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([float(r["t"]) for r in rows])
    states = np.array([[complex(float(r[f"omega{k}_re"]), float(r[f"omega{k}_im"])) for k in (1, 3, 5, 7)]
                       for r in rows])
    diag = {c: np.array([float(r[c]) if r[c] != "" else np.nan for r in rows]) for c in ("A", "B", "E", "R")}
    return t, states, diag

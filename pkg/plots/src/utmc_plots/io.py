"""Readers for the utmc output schemas.

Curve CSV:   level, n, cumulative_masks, C, C_tilde, stderr
Summary CSV: f, rho, level, plateau, plateau_over_std, tau, status
Thresholds:  JSON object with f_per / f_inv fields

Schema violations raise SchemaError naming the offending column.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

CURVE_COLUMNS = ["level", "n", "cumulative_masks", "C", "C_tilde", "stderr"]
SUMMARY_COLUMNS = ["f", "rho", "level", "plateau", "plateau_over_std", "tau", "status"]


class SchemaError(Exception):
    pass


def _check_header(path, have, want):
    for col in want:
        if col not in have:
            raise SchemaError(f"{path}: missing column {col!r}")
    for col in have:
        if col not in want:
            raise SchemaError(f"{path}: unexpected column {col!r}")


@dataclass
class Curve:
    level: int
    n: np.ndarray
    masks: np.ndarray
    C: np.ndarray
    C_tilde: np.ndarray
    stderr: np.ndarray

    def stderr_tilde(self) -> np.ndarray:
        """Standard errors in normalized units, recovered from the affine
        relation between the C and C_tilde columns."""
        dc = self.C.max() - self.C.min()
        dt = self.C_tilde.max() - self.C_tilde.min()
        scale = dc / dt if dt > 0 else 1.0
        return self.stderr / scale if scale > 0 else self.stderr


def read_curves(path) -> dict[int, Curve]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file")
        _check_header(path, list(reader.fieldnames), CURVE_COLUMNS)
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    out: dict[int, Curve] = {}
    levels = sorted({int(r["level"]) for r in rows})
    for level in levels:
        sel = [r for r in rows if int(r["level"]) == level]
        try:
            out[level] = Curve(
                level=level,
                n=np.array([int(r["n"]) for r in sel]),
                masks=np.array([int(r["cumulative_masks"]) for r in sel]),
                C=np.array([float(r["C"]) for r in sel]),
                C_tilde=np.array([float(r["C_tilde"]) for r in sel]),
                stderr=np.array([float(r["stderr"]) for r in sel]),
            )
        except ValueError as e:
            raise SchemaError(f"{path}: bad value in curve row ({e})") from e
    return out


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file")
        _check_header(path, list(reader.fieldnames), SUMMARY_COLUMNS)
        rows = []
        for raw in reader:
            try:
                rows.append(
                    {
                        "f": float(raw["f"]),
                        "rho": float(raw["rho"]),
                        "level": int(raw["level"]),
                        "plateau": float(raw["plateau"]),
                        "plateau_over_std": float(raw["plateau_over_std"]),
                        "tau": float(raw["tau"]),
                        "status": raw["status"],
                    }
                )
            except ValueError as e:
                raise SchemaError(f"{path}: bad value in summary row ({e})") from e
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def read_thresholds(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if "f_per" not in doc and "f_inv" not in doc:
        raise SchemaError(f"{path}: no f_per or f_inv field")
    return {"f_per": doc.get("f_per"), "f_inv": doc.get("f_inv")}

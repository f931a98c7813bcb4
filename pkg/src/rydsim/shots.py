"""Shot-record ingestion and the pair-outcome aggregation behind the fidelity estimate.

A shot file is a CSV with one row per atom per shot and the columns
``run_id, site, pair_id, blowout, analyzer_phase_rad, bright``. Rows sharing
``(run_id, pair_id)`` form one pair shot and must reference exactly two
sites; the lower site id is the first qubit. Blowout shots without an
analyzer phase give the ``A_ij`` counts, blowout shots with a phase give the
parity scan, and shots without blowout give the ``B_ij`` counts.
"""
from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .errors import InvalidParameterError
from .estimators import (
    BrightDarkCounts,
    Estimate,
    OutcomeCounts,
    bell_fidelity_report,
    parity_contrast,
    spam_correct,
)
from .estimators.results import as_estimate

COLUMNS = ("run_id", "site", "pair_id", "blowout", "analyzer_phase_rad", "bright")
A_KEYS = ("00", "01", "10", "11")
B_KEYS = ("bb", "bd", "db", "dd")


class ShotFileError(InvalidParameterError):
    """Malformed or incomplete shot-record data."""


@dataclass(frozen=True)
class ShotRecord:
    run_id: str
    site: str
    pair_id: Optional[str]
    blowout: bool
    analyzer_phase: Optional[float]
    bright: bool


def _flag(value: str, column: str, line: int) -> bool:
    value = value.strip()
    if value not in ("0", "1"):
        raise ShotFileError(f"line {line}: {column} must be 0 or 1, got {value!r}")
    return value == "1"


def parse_shot_rows(rows: Iterable[dict], start_line: int = 2) -> list[ShotRecord]:
    records = []
    for line, row in enumerate(rows, start=start_line):
        phase = (row.get("analyzer_phase_rad") or "").strip()
        try:
            phase_val = float(phase) if phase else None
        except ValueError:
            raise ShotFileError(f"line {line}: analyzer_phase_rad is not a number: {phase!r}") from None
        if phase_val is not None and not math.isfinite(phase_val):
            raise ShotFileError(f"line {line}: analyzer_phase_rad must be finite")
        run_id = (row.get("run_id") or "").strip()
        site = (row.get("site") or "").strip()
        if not run_id or not site:
            raise ShotFileError(f"line {line}: run_id and site are required")
        records.append(ShotRecord(
            run_id=run_id,
            site=site,
            pair_id=(row.get("pair_id") or "").strip() or None,
            blowout=_flag(row.get("blowout", ""), "blowout", line),
            analyzer_phase=phase_val,
            bright=_flag(row.get("bright", ""), "bright", line),
        ))
    return records


def read_shot_records(path: Union[str, Path]) -> list[ShotRecord]:
    """Parse a shot-record CSV, validating the header and every flag."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ShotFileError(f"{path}: missing columns {', '.join(missing)}")
        return parse_shot_rows(reader)


def write_shot_records(path: Union[str, Path], records: Iterable[ShotRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            phase = "" if r.analyzer_phase is None else repr(r.analyzer_phase)
            w.writerow([r.run_id, r.site, r.pair_id or "", int(r.blowout), phase, int(r.bright)])


def _site_key(site: str):
    return (0, int(site), "") if site.lstrip("-").isdigit() else (1, 0, site)


@dataclass
class PairSplits:
    """Pair-outcome counts for each measurement split."""

    a_counts: Counter = field(default_factory=Counter)
    b_counts: Counter = field(default_factory=Counter)
    parity_counts: dict = field(default_factory=dict)

    @property
    def n_a(self) -> int:
        return sum(self.a_counts.values())

    @property
    def n_b(self) -> int:
        return sum(self.b_counts.values())


def aggregate_pairs(records: Iterable[ShotRecord]) -> PairSplits:
    """Group atom rows into pair shots and count outcomes per split.

    With blowout a bright atom is ``0`` and a dark one ``1``; without blowout
    outcomes are kept as ``b``/``d``.
    """
    groups: dict = defaultdict(list)
    for r in records:
        if r.pair_id is None:
            continue
        groups[(r.run_id, r.pair_id)].append(r)
    splits = PairSplits()
    for key, rows in sorted(groups.items()):
        sites = {r.site for r in rows}
        if len(rows) != 2 or len(sites) != 2:
            raise ShotFileError(f"pair {key} must reference exactly two sites, found {len(rows)} rows")
        a, b = sorted(rows, key=lambda r: _site_key(r.site))
        if a.blowout != b.blowout or a.analyzer_phase != b.analyzer_phase:
            raise ShotFileError(f"pair {key}: rows disagree on blowout or analyzer phase")
        if a.blowout:
            outcome = ("0" if a.bright else "1") + ("0" if b.bright else "1")
            if a.analyzer_phase is None:
                splits.a_counts[outcome] += 1
            else:
                splits.parity_counts.setdefault(a.analyzer_phase, Counter())[outcome] += 1
        else:
            splits.b_counts[("b" if a.bright else "d") + ("b" if b.bright else "d")] += 1
    return splits


def parity_points(parity_counts: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(phases, parity, sigma)`` with binomial errors on the same-outcome fraction."""
    phases = np.array(sorted(parity_counts), dtype=float)
    values, sigmas = [], []
    for ph in phases:
        c = parity_counts[ph]
        n = sum(c.values())
        same = (c["00"] + c["11"]) / n
        values.append(2 * same - 1)
        # add-one smoothing keeps the error finite at same = 0 or 1
        q = (c["00"] + c["11"] + 1) / (n + 2)
        sigmas.append(2 * math.sqrt(q * (1 - q) / n))
    return phases, np.array(values), np.array(sigmas)


def contrast_from_counts(parity_counts: dict) -> Estimate:
    if len(parity_counts) < 4:
        raise ShotFileError(f"parity scan needs at least 4 analyzer phases, found {len(parity_counts)}")
    phases, values, sigmas = parity_points(parity_counts)
    return parity_contrast(phases, values, sigmas).estimate("contrast")


def _require(splits: PairSplits, mode: str, contrast) -> None:
    if splits.n_a == 0:
        raise ShotFileError("no blowout shots without analyzer phase (the A split) in the shot file")
    if mode == "bell":
        if splits.n_b == 0:
            raise ShotFileError("no shots without blowout (the B split) in the shot file; bell mode needs both")
        if contrast is None and not splits.parity_counts:
            raise ShotFileError("no parity-scan shots (blowout rows with analyzer_phase_rad) and no contrast given")


def _point_report(splits: PairSplits, mode: str, contrast, loss, bdd_upper) -> dict:
    A = OutcomeCounts.from_counts(splits.a_counts)
    if mode == "suppressed":
        out = {"raw": {"value": A.A00.value, "sigma": A.A00.sigma}, "corrected": None, "flags": []}
        if loss is not None:
            corr = spam_correct(A.A00, 0.0, 0.0, loss)
            out["corrected"] = {"value": corr.p00.value, "sigma": corr.p00.sigma}
            out["flags"] = sorted(f"clamped_corrected:{k}" for k in corr.clamped if k == "p00")
        out["inputs"] = {"A": {k: {"value": getattr(A, k).value, "sigma": getattr(A, k).sigma}
                               for k in ("A00", "A01", "A10", "A11")},
                         "loss": None if loss is None else {"value": loss.value, "sigma": loss.sigma}}
        return out
    if bdd_upper is not None:
        n = splits.n_b
        B = BrightDarkCounts(
            *(Estimate(splits.b_counts[k] / n, math.sqrt(splits.b_counts[k] * (n - splits.b_counts[k]) / n**3))
              for k in ("bb", "bd", "db")),
            bdd_upper=bdd_upper,
        )
    else:
        B = BrightDarkCounts.from_counts(splits.b_counts)
    c = contrast if contrast is not None else contrast_from_counts(splits.parity_counts)
    return bell_fidelity_report(A, B, c, loss).to_dict()


def _resample(counter: Counter, keys, rng) -> Counter:
    n = sum(counter.values())
    p = np.array([counter[k] for k in keys], dtype=float) / n
    return Counter(dict(zip(keys, rng.multinomial(n, p).tolist())))


def estimate_from_splits(
    splits: PairSplits,
    mode: str = "bell",
    contrast=None,
    loss=None,
    bdd_upper: Optional[float] = None,
    bootstrap: int = 0,
    seed: Optional[int] = None,
) -> dict:
    """Fidelity report for ``mode`` in {"bell", "suppressed"}.

    With ``bootstrap > 0`` every split is resampled with replacement
    (multinomially on its outcome counts) and the loss is redrawn from its
    Gaussian; the reported sigmas are then the bootstrap standard deviations
    and the propagated ones are kept under ``propagated``.
    """
    if mode not in ("bell", "suppressed"):
        raise InvalidParameterError(f"unknown estimate mode {mode!r}")
    contrast = None if contrast is None else as_estimate(contrast)
    loss = None if loss is None else as_estimate(loss)
    _require(splits, mode, contrast)
    report = _point_report(splits, mode, contrast, loss, bdd_upper)
    report["mode"] = mode
    report["shots"] = {"A": splits.n_a, "B": splits.n_b,
                       "parity": sum(sum(c.values()) for c in splits.parity_counts.values())}
    report["uncertainty"] = "propagated"
    if bootstrap <= 0:
        return report
    if seed is None:
        raise InvalidParameterError("bootstrap needs a seed")
    rng = np.random.default_rng(seed)
    keys = ("raw", "lower_bound", "corrected")
    samples: dict = {k: [] for k in keys if report.get(k) is not None}
    for _ in range(bootstrap):
        sub = PairSplits(
            a_counts=_resample(splits.a_counts, A_KEYS, rng),
            b_counts=_resample(splits.b_counts, B_KEYS, rng) if splits.n_b else Counter(),
            parity_counts={ph: _resample(c, A_KEYS, rng) for ph, c in splits.parity_counts.items()},
        )
        eps = None
        if loss is not None:
            eps = Estimate(float(np.clip(rng.normal(loss.value, loss.sigma), 0.0, 0.999)), loss.sigma)
        try:
            rep = _point_report(sub, mode, contrast, eps, bdd_upper)
        except InvalidParameterError:
            continue
        for k in samples:
            samples[k].append(rep[k]["value"])
    report["propagated"] = {k: dict(report[k]) for k in samples}
    for k, vals in samples.items():
        report[k]["sigma"] = float(np.std(vals, ddof=1))
    report["uncertainty"] = "bootstrap"
    report["bootstrap"] = {"resamples": bootstrap, "accepted": len(next(iter(samples.values()))), "seed": seed}
    return report

"""Bell-state fidelity with leakage bounds and SPAM (atom-loss) correction.

Outcome conventions follow the readout: with blowout, ``0`` is bright and
``1`` is dark, so any non-qubit population is counted as ``1``. Without
blowout both qubit states are bright and only leaked or lost atoms are dark.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

from ..errors import InvalidParameterError
from .results import Estimate, as_estimate, linear_sigma


def _binomial_sigma(k: int, n: int) -> float:
    p = k / n
    return math.sqrt(p * (1 - p) / n)


def _check_sum(values, sigmas, what):
    total = sum(values)
    s = math.sqrt(sum(x * x for x in sigmas))
    if abs(total - 1) > max(3 * s, 1e-9):
        raise InvalidParameterError(f"{what} probabilities sum to {total:.4f}, not 1 within 3 sigma")


@dataclass(frozen=True)
class OutcomeCounts:
    """Outcome probabilities ``A_ij`` of the blowout readout."""

    A00: Estimate
    A01: Estimate
    A10: Estimate
    A11: Estimate

    def __post_init__(self):
        vals = [as_estimate(getattr(self, k)) for k in ("A00", "A01", "A10", "A11")]
        for k, v in zip(("A00", "A01", "A10", "A11"), vals):
            if not 0 <= v.value <= 1:
                raise InvalidParameterError(f"{k} must be in [0, 1]")
            object.__setattr__(self, k, v)
        _check_sum([v.value for v in vals], [v.sigma for v in vals], "A")

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "OutcomeCounts":
        """From raw counts keyed ``"00", "01", "10", "11"`` (binomial sigmas)."""
        n = sum(counts.get(k, 0) for k in ("00", "01", "10", "11"))
        if n == 0:
            raise InvalidParameterError("no blowout shots")
        return cls(*(Estimate(counts.get(k, 0) / n, _binomial_sigma(counts.get(k, 0), n))
                     for k in ("00", "01", "10", "11")))


@dataclass(frozen=True)
class BrightDarkCounts:
    """Outcome probabilities ``B_ij`` of the readout without blowout.

    ``Bdd`` may be omitted and replaced by an upper bound ``bdd_upper``; it is
    then treated as the interval ``[0, bdd_upper]``.
    """

    Bbb: Estimate
    Bbd: Estimate
    Bdb: Estimate
    Bdd: Optional[Estimate] = None
    bdd_upper: Optional[float] = None

    def __post_init__(self):
        keys = ("Bbb", "Bbd", "Bdb")
        for k in keys:
            v = as_estimate(getattr(self, k))
            if not 0 <= v.value <= 1:
                raise InvalidParameterError(f"{k} must be in [0, 1]")
            object.__setattr__(self, k, v)
        if self.Bdd is None:
            if self.bdd_upper is None:
                raise InvalidParameterError("give Bdd or an upper bound for it")
            ub = float(self.bdd_upper)
            # uniform on [0, ub]
            object.__setattr__(self, "Bdd", Estimate(ub / 2, ub / math.sqrt(12)))
        else:
            object.__setattr__(self, "Bdd", as_estimate(self.Bdd))
        vals = [getattr(self, k) for k in keys + ("Bdd",)]
        _check_sum([v.value for v in vals], [v.sigma for v in vals], "B")

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "BrightDarkCounts":
        """From raw counts keyed ``"bb", "bd", "db", "dd"``."""
        n = sum(counts.get(k, 0) for k in ("bb", "bd", "db", "dd"))
        if n == 0:
            raise InvalidParameterError("no shots without blowout")
        return cls(*(Estimate(counts.get(k, 0) / n, _binomial_sigma(counts.get(k, 0), n))
                     for k in ("bb", "bd", "db", "dd")))


def bell_fidelity_raw(A: OutcomeCounts, contrast) -> Estimate:
    """``(A00 + A11 + C)/2``."""
    c = as_estimate(contrast)
    value = 0.5 * (A.A00.value + A.A11.value + c.value)
    return Estimate(value, 0.5 * linear_sigma([1, 1, 1], [A.A00.sigma, A.A11.sigma, c.sigma]))


@dataclass(frozen=True)
class PopulationBounds:
    p00: Estimate
    p01: Estimate
    p10: Estimate
    p11: Estimate
    clamped: frozenset = frozenset()


def population_lower_bounds(A: OutcomeCounts, B: BrightDarkCounts) -> PopulationBounds:
    """Lower bounds on the qubit populations from leakage-aware readout.

    ``p00 = A00``; the dark-outcome populations lose the leaked weight that
    the no-blowout readout reveals. Negative bounds are clamped to zero and
    reported in ``clamped``.
    """
    bounds = {
        "p00": A.A00,
        "p01": Estimate(A.A01.value - B.Bbd.value, math.hypot(A.A01.sigma, B.Bbd.sigma)),
        "p10": Estimate(A.A10.value - B.Bdb.value, math.hypot(A.A10.sigma, B.Bdb.sigma)),
        "p11": Estimate(A.A11.value - (1 - B.Bbb.value), math.hypot(A.A11.sigma, B.Bbb.sigma)),
    }
    clamped = set()
    for k, v in bounds.items():
        if v.value < 0:
            bounds[k] = Estimate(0.0, v.sigma)
            clamped.add(k)
    return PopulationBounds(clamped=frozenset(clamped), **bounds)


@dataclass(frozen=True)
class SpamCorrected:
    p00: Estimate
    p11: Estimate
    contrast: Estimate
    fidelity: Estimate
    clamped: frozenset = frozenset()


def _clamp(name, est, clamped):
    if est.value < 0 or est.value > 1:
        clamped.add(name)
        return Estimate(min(max(est.value, 0.0), 1.0), est.sigma)
    return est


def spam_correct(p00, p11, contrast, loss) -> SpamCorrected:
    """Undo per-atom loss ``loss``.

    Loss scales ``p00`` and the contrast by ``(1-loss)^2`` and feeds ``p11``
    (a lost atom reads dark): ``p11 = p11c (1-loss)^2 + loss``.
    """
    p00, p11, c, eps = (as_estimate(x) for x in (p00, p11, contrast, loss))
    if not 0 <= eps.value < 1:
        raise InvalidParameterError(f"loss must be in [0, 1), got {eps.value}")
    k = (1 - eps.value) ** -2
    dk = 2 * (1 - eps.value) ** -3
    p00c = Estimate(p00.value * k, linear_sigma([k, p00.value * dk], [p00.sigma, eps.sigma]))
    cc = Estimate(c.value * k, linear_sigma([k, c.value * dk], [c.sigma, eps.sigma]))
    p11c_val = (p11.value - eps.value) * k
    p11c = Estimate(p11c_val, linear_sigma([k, -k + (p11.value - eps.value) * dk], [p11.sigma, eps.sigma]))
    s = p00.value + p11.value + c.value - eps.value
    f_val = 0.5 * s * k
    f_sig = linear_sigma([0.5 * k] * 3 + [0.5 * (-k + s * dk)], [p00.sigma, p11.sigma, c.sigma, eps.sigma])
    clamped: set = set()
    p00c = _clamp("p00", p00c, clamped)
    p11c = _clamp("p11", p11c, clamped)
    cc = _clamp("contrast", cc, clamped)
    fid = _clamp("fidelity", Estimate(f_val, f_sig), clamped)
    return SpamCorrected(p00c, p11c, cc, fid, frozenset(clamped))


@dataclass
class FidelityReport:
    raw: Estimate
    lower_bound: Estimate
    corrected: Optional[Estimate]
    bounds: PopulationBounds
    A: OutcomeCounts
    B: BrightDarkCounts
    contrast: Estimate
    loss: Optional[Estimate] = None
    spam: Optional[SpamCorrected] = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def e(x):
            return None if x is None else {"value": x.value, "sigma": x.sigma}

        return {
            "raw": e(self.raw),
            "lower_bound": e(self.lower_bound),
            "corrected": e(self.corrected),
            "population_bounds": {k: e(getattr(self.bounds, k)) for k in ("p00", "p01", "p10", "p11")},
            "corrected_populations": None if self.spam is None else {
                "p00": e(self.spam.p00), "p11": e(self.spam.p11), "contrast": e(self.spam.contrast)},
            "inputs": {
                "A": {k: e(getattr(self.A, k)) for k in ("A00", "A01", "A10", "A11")},
                "B": {k: e(getattr(self.B, k)) for k in ("Bbb", "Bbd", "Bdb", "Bdd")},
                "contrast": e(self.contrast),
                "loss": e(self.loss),
            },
            "flags": sorted(self.flags),
        }


def bell_fidelity_report(A: OutcomeCounts, B: BrightDarkCounts, contrast, loss=None) -> FidelityReport:
    """Raw fidelity, leakage-aware lower bound and (given ``loss``) SPAM-corrected bound."""
    c = as_estimate(contrast)
    raw = bell_fidelity_raw(A, c)
    bounds = population_lower_bounds(A, B)
    lb = Estimate(0.5 * (bounds.p00.value + bounds.p11.value + c.value),
                  0.5 * linear_sigma([1, 1, 1], [bounds.p00.sigma, bounds.p11.sigma, c.sigma]))
    flags = [f"clamped:{k}" for k in bounds.clamped]
    spam = corrected = eps = None
    if loss is not None:
        eps = as_estimate(loss)
        spam = spam_correct(bounds.p00, bounds.p11, c, eps)
        corrected = spam.fidelity
        flags += [f"clamped_corrected:{k}" for k in spam.clamped]
    return FidelityReport(raw, lb, corrected, bounds, A, B, c, eps, spam, flags)

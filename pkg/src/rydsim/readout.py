"""State-selective blowout readout.

Each blowout round drives ``g1 -> ryd`` and autoionizes whatever reached the
Rydberg level, so an atom in ``g1`` survives a round only when the pi pulse
fails. Rounds are treated as independent trials.
"""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import core
from .errors import InvalidParameterError


@dataclass(frozen=True)
class ReadoutModel:
    """Error parameters of the blowout + imaging sequence.

    Parameters
    ----------
    pi_pulse_error : float
        Probability that an atom in ``g1`` survives one blowout round.
    n_rounds : int
        Number of blowout rounds before imaging.
    imaging_error : float
        Probability that a present, bright atom is read as dark.
    raman_scatter_error : float
        Per-round probability that an atom in ``g0`` scatters out of the
        qubit state during the Rydberg pulse and is removed.
    false_bright : float
        Probability that an empty (dark) site is read as bright.
    atom_loss : float
        Probability that the atom is lost before readout.
    """

    pi_pulse_error: float = 0.0
    n_rounds: int = 3
    imaging_error: float = 0.0
    raman_scatter_error: float = 0.0
    false_bright: float = 0.0
    atom_loss: float = 0.0

    def __post_init__(self):
        for name in ("pi_pulse_error", "imaging_error", "raman_scatter_error", "false_bright", "atom_loss"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InvalidParameterError(f"{name} must be in [0, 1], got {v}")
        if int(self.n_rounds) != self.n_rounds or self.n_rounds < 0:
            raise InvalidParameterError("n_rounds must be a non-negative integer")

    @classmethod
    def reference_budget(cls, n_rounds: int = 3) -> "ReadoutModel":
        """Error budget of the reported readout characterization.

        Imaging error 0.6 %, Raman scattering 1.2 % per round and the 1.2 %
        loss between consecutive images; the pi-pulse error is set so that a
        ``g1`` atom survives three rounds with probability ~0.2 %.
        """
        return cls(
            pi_pulse_error=0.125,
            n_rounds=n_rounds,
            imaging_error=0.006,
            raman_scatter_error=0.012,
            atom_loss=0.012,
        )

    def present_probability(self, level: str, blowout: bool = True) -> float:
        """Probability that an atom starting in ``level`` is still there and bright-able."""
        keep = 1.0 - self.atom_loss
        if level == "ryd":
            return 0.0
        if not blowout:
            return keep
        if level == "g0":
            return keep * (1.0 - self.raman_scatter_error) ** self.n_rounds
        if level == "g1":
            return keep * self.pi_pulse_error**self.n_rounds
        raise InvalidParameterError(f"unknown level {level!r}")

    def bright_probability(self, level: str, blowout: bool = True) -> float:
        q = self.present_probability(level, blowout)
        return q * (1.0 - self.imaging_error) + (1.0 - q) * self.false_bright


def outcome_labels(n_atoms: int) -> list[str]:
    return ["".join(p) for p in itertools.product("bd", repeat=n_atoms)]


def blowout_readout(
    state: np.ndarray,
    model: ReadoutModel,
    blowout: bool = True,
    shots: Optional[int] = None,
    rng_seed: Optional[int] = None,
) -> dict[str, float]:
    """Bright/dark outcome distribution of a one- or two-atom state.

    Returns exact probabilities keyed by ``"b"/"d"`` strings (one character
    per atom), or multinomial counts when ``shots`` is given. Only level
    populations matter; coherences do not affect the readout.
    """
    probs_by_level = np.array(list(core.populations(state).values()))
    n_atoms = core.n_atoms_of(len(probs_by_level))
    bright = {lvl: model.bright_probability(lvl, blowout) for lvl in core.LEVELS}
    probs = dict.fromkeys(outcome_labels(n_atoms), 0.0)
    for p, levels in zip(probs_by_level, itertools.product(core.LEVELS, repeat=n_atoms)):
        for outcome in probs:
            w = p
            for lvl, o in zip(levels, outcome):
                w *= bright[lvl] if o == "b" else 1.0 - bright[lvl]
            probs[outcome] += w
    if shots is None:
        return {k: float(v) for k, v in probs.items()}
    rng = np.random.default_rng(rng_seed)
    keys = list(probs)
    pvals = np.clip([probs[k] for k in keys], 0, None)
    counts = rng.multinomial(int(shots), pvals / pvals.sum())
    return {k: int(c) for k, c in zip(keys, counts)}


def survival_vs_rounds(model: ReadoutModel, level: str, rounds) -> np.ndarray:
    """Single-atom bright probability after each number of blowout rounds."""
    out = []
    for n in rounds:
        m = dataclasses.replace(model, n_rounds=int(n))
        out.append(m.bright_probability(level))
    return np.array(out)

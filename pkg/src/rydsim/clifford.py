"""Single-qubit Clifford group and randomized-benchmarking sequences.

The 24 Cliffords are generated breadth-first from the physical pulses
``X, Y, X/2, -X/2, Y/2, -Y/2`` (in that order), so every element carries
the shortest generator word that reaches it; ties resolve to the word found
first. Elements are stored modulo global phase and indexed by discovery
order, with index 0 the identity.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidParameterError

GENERATORS = {
    "X": (math.pi, 0.0),
    "Y": (math.pi, math.pi / 2),
    "X/2": (math.pi / 2, 0.0),
    "-X/2": (-math.pi / 2, 0.0),
    "Y/2": (math.pi / 2, math.pi / 2),
    "-Y/2": (-math.pi / 2, math.pi / 2),
}


def qubit_rotation(angle: float, axis_phase: float) -> np.ndarray:
    """2x2 ``exp(-i angle/2 (cos p X + sin p Y))``."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array(
        [[c, -1j * s * np.exp(-1j * axis_phase)], [-1j * s * np.exp(1j * axis_phase), c]],
        dtype=complex,
    )


def _phase_key(u: np.ndarray) -> tuple:
    flat = u.ravel()
    pivot = flat[np.argmax(np.abs(flat) > 1e-9)]
    v = flat * (abs(pivot) / pivot)
    return tuple(np.round(np.concatenate([v.real, v.imag]), 9))


@dataclass(frozen=True)
class CliffordGroup:
    unitaries: tuple
    words: tuple
    table: np.ndarray
    inverse: np.ndarray

    def __len__(self):
        return len(self.unitaries)

    def compose(self, *indices: int) -> int:
        """Index of the product applying ``indices`` left to right in time."""
        out = 0
        for i in indices:
            out = int(self.table[i, out])
        return out

    def index_of(self, u: np.ndarray) -> int:
        key = _phase_key(u)
        for i, v in enumerate(self.unitaries):
            if _phase_key(v) == key:
                return i
        raise KeyError("unitary is not a Clifford")


@lru_cache(maxsize=None)
def clifford_group() -> CliffordGroup:
    """Build the group, its 24x24 multiplication table and inverse map.

    ``table[i, j]`` is the index of ``U_i @ U_j`` (``j`` applied first).
    """
    gens = {name: qubit_rotation(*args) for name, args in GENERATORS.items()}
    seen = {_phase_key(np.eye(2)): 0}
    unitaries, words = [np.eye(2, dtype=complex)], [()]
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for name, g in gens.items():
            u = g @ unitaries[i]
            key = _phase_key(u)
            if key not in seen:
                seen[key] = len(unitaries)
                unitaries.append(u)
                words.append(words[i] + (name,))
                queue.append(seen[key])
    n = len(unitaries)
    if n != 24:
        raise RuntimeError(f"expected 24 Cliffords, generated {n}")
    table = np.empty((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            table[i, j] = seen[_phase_key(unitaries[i] @ unitaries[j])]
    inverse = np.array([int(np.flatnonzero(table[i] == 0)[0]) for i in range(n)])
    return CliffordGroup(tuple(unitaries), tuple(words), table, inverse)


@dataclass(frozen=True)
class CliffordSequence:
    """A random Clifford sequence terminated by its (possibly flipped) inverse.

    ``elements`` are group indices applied in order; the last one is the
    recovery element. ``ideal_outcome`` is the qubit state reached from
    ``initial_state`` without errors.
    """

    elements: tuple
    depth: int
    ideal_outcome: int
    seed: Optional[int]
    initial_state: int = 1

    @property
    def words(self) -> list[tuple]:
        group = clifford_group()
        return [group.words[i] for i in self.elements]

    def unitary(self) -> np.ndarray:
        group = clifford_group()
        u = np.eye(2, dtype=complex)
        for i in self.elements:
            u = group.unitaries[i] @ u
        return u


def random_rb_sequence(depth: int, seed: Optional[int] = None, initial_state: int = 1) -> CliffordSequence:
    """Draw ``depth`` uniform Cliffords and append the recovery element.

    The recovery inverts the net rotation and, with probability 1/2 (decided
    by the seed), appends an ``X`` so the ideal outcome is ``|0>`` or ``|1>``
    with equal probability.
    """
    if depth < 1:
        raise InvalidParameterError(f"depth must be >= 1, got {depth}")
    if initial_state not in (0, 1):
        raise InvalidParameterError("initial_state must be 0 or 1")
    group = clifford_group()
    rng = np.random.default_rng(seed)
    body = [int(i) for i in rng.integers(len(group), size=depth)]
    net = group.compose(*body)
    recovery = int(group.inverse[net])
    flip = int(rng.integers(2))
    if flip:
        recovery = int(group.table[group.index_of(qubit_rotation(*GENERATORS["X"])), recovery])
    elements = tuple(body) + (recovery,)
    if group.compose(*elements) != (0 if not flip else group.index_of(qubit_rotation(*GENERATORS["X"]))):
        raise RuntimeError("sequence does not compose to the recovery target")
    return CliffordSequence(elements, depth, initial_state ^ flip, seed, initial_state)


def sequence_success_probability(
    seq: CliffordSequence,
    gate_error: float = 0.0,
    spam_error: float = 0.0,
    loss_per_gate: float = 0.0,
) -> float:
    """Probability of reading ``ideal_outcome`` under a simple noise model.

    Each Clifford is followed by depolarization shrinking the Bloch vector by
    ``1 - 2 gate_error``; readout flips with probability ``spam_error``. A
    lost atom (probability ``loss_per_gate`` per Clifford) reads as dark, i.e.
    as ``|1>``.
    """
    group = clifford_group()
    rho = np.zeros((2, 2), dtype=complex)
    rho[seq.initial_state, seq.initial_state] = 1.0
    shrink = 1.0 - 2.0 * gate_error
    for i in seq.elements:
        u = group.unitaries[i]
        rho = u @ rho @ u.conj().T
        rho = shrink * rho + (1 - shrink) * np.eye(2) / 2
    p = float(rho[seq.ideal_outcome, seq.ideal_outcome].real)
    p = p * (1 - spam_error) + (1 - p) * spam_error
    kept = (1.0 - loss_per_gate) ** len(seq.elements)
    return kept * p + (1 - kept) * (1.0 if seq.ideal_outcome == 1 else 0.0)


def rb_dataset(
    depths: Sequence[int],
    n_sequences: int,
    shots: int,
    seed: int,
    gate_error: float,
    spam_error: float,
    loss_per_gate: float = 0.0,
    ideal_outcome: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Synthetic RB data: ``(depths, mean success, standard error)``.

    Per-sequence outcomes are binomially sampled. The standard error is the
    larger of the spread across sequences and the pooled binomial error.
    ``ideal_outcome`` restricts sampling to sequences ending in that state.
    """
    rng = np.random.default_rng(seed)
    means, errs = [], []
    for d in depths:
        fracs = []
        while len(fracs) < n_sequences:
            seq = random_rb_sequence(int(d), seed=int(rng.integers(2**63)))
            if ideal_outcome is not None and seq.ideal_outcome != ideal_outcome:
                continue
            p = sequence_success_probability(seq, gate_error, spam_error, loss_per_gate)
            fracs.append(rng.binomial(shots, p) / shots)
        fracs = np.array(fracs)
        m = fracs.mean()
        pooled = math.sqrt(max(m * (1 - m), 1e-12) / (n_sequences * shots))
        spread = fracs.std(ddof=1) / math.sqrt(n_sequences)
        means.append(m)
        errs.append(max(pooled, spread))
    return np.asarray(depths, dtype=float), np.array(means), np.array(errs)

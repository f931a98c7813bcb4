"""Few-level atomic states, drive Hamiltonians and time evolution.

Each atom is a three-level system ``g0, g1, ryd`` (the two nuclear-spin
qubit states and the Rydberg level). Two-atom operators live on the tensor
basis in lexicographic order::

    g0g0, g0g1, g0ryd, g1g0, g1g1, g1ryd, rydg0, rydg1, rydryd

Kets are 1-D complex arrays, density operators are 2-D complex arrays.
All frequencies are angular (rad/s) and times are in seconds.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, InvalidParameterError

LEVELS = ("g0", "g1", "ryd")
G0, G1, RYD = 0, 1, 2

_HERMITIAN_RTOL = 1e-10


def basis_labels(n_atoms: int) -> list[str]:
    """Return the ordered basis labels for ``n_atoms`` (1 or 2) atoms."""
    if n_atoms not in (1, 2):
        raise InvalidParameterError(f"only 1 or 2 atoms supported, got {n_atoms}")
    return ["".join(p) for p in itertools.product(LEVELS, repeat=n_atoms)]


def n_atoms_of(dim: int) -> int:
    if dim == 3:
        return 1
    if dim == 9:
        return 2
    raise InvalidParameterError(f"dimension {dim} is not 3 or 9")


def basis_state(*levels: str) -> np.ndarray:
    """Ket for a product of single-atom levels, e.g. ``basis_state("g1", "g1")``."""
    ket = np.array([1.0 + 0j])
    for level in levels:
        single = np.zeros(3, dtype=complex)
        single[LEVELS.index(level)] = 1.0
        ket = np.kron(ket, single)
    return ket


def ket_to_dm(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


@dataclass(frozen=True)
class DriveHamiltonian:
    """Effective two-photon drive of the ``g1 <-> ryd`` transition.

    Parameters
    ----------
    rabi : float
        Two-photon Rabi frequency (rad/s), must be >= 0.
    detuning : float
        Laser detuning from the bare ``g1 -> ryd`` resonance (rad/s).
    phase : float
        Laser phase (rad).
    light_shift : float
        Additional shift of the Rydberg level (rad/s), e.g. from an ion-core
        control beam. It detunes the transition by ``-light_shift``.
    zeeman_split : float
        Extra detuning of the ``g0 -> ryd`` path (rad/s). Only used when
        ``leak_g0`` is set.
    leak_g0 : bool
        Couple ``g0`` to ``ryd`` with the same Rabi frequency, detuned by
        ``zeeman_split``.
    """

    rabi: float
    detuning: float = 0.0
    phase: float = 0.0
    light_shift: float = 0.0
    zeeman_split: float = 0.0
    leak_g0: bool = False

    def __post_init__(self):
        for name in ("rabi", "detuning", "phase", "light_shift", "zeeman_split"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")
        if self.rabi < 0:
            raise InvalidParameterError(f"rabi must be >= 0, got {self.rabi}")


@dataclass(frozen=True)
class LindbladChannel:
    """Collapse operator with its rate (1/s)."""

    operator: np.ndarray
    rate: float

    def __post_init__(self):
        if not self.rate >= 0:
            raise InvalidParameterError(f"channel rate must be >= 0, got {self.rate}")


def build_single_atom(drive: DriveHamiltonian) -> np.ndarray:
    """3x3 Hamiltonian (rad/s) of one atom under ``drive``.

    The laser term is ``(rabi/2) e^{i phase} |g1><ryd| + h.c.`` and the Rydberg
    diagonal is ``-(detuning - light_shift)``. With ``leak_g0`` the ``g0``
    level is coupled too; the frame then co-rotates with the ``g0 -> ryd``
    offset, placing ``+zeeman_split`` on the ``g0`` diagonal (see
    :func:`leakage_frame_correction`).
    """
    h = np.zeros((3, 3), dtype=complex)
    coupling = 0.5 * drive.rabi * np.exp(1j * drive.phase)
    h[G1, RYD] = coupling
    h[RYD, G1] = np.conj(coupling)
    h[RYD, RYD] = -(drive.detuning - drive.light_shift)
    if drive.leak_g0:
        h[G0, RYD] = coupling
        h[RYD, G0] = np.conj(coupling)
        h[G0, G0] = drive.zeeman_split
    return h


def leakage_frame_correction(drive: DriveHamiltonian, duration: float, n_atoms: int) -> np.ndarray:
    """Diagonal unitary mapping the ``leak_g0`` frame back to the qubit frame.

    Multiply it onto the propagator of the total (time-independent frame)
    evolution of length ``duration``. Identity when leakage is off.
    """
    single = np.ones(3, dtype=complex)
    if drive.leak_g0:
        single[G0] = np.exp(1j * drive.zeeman_split * duration)
    diag = single
    for _ in range(n_atoms - 1):
        diag = np.kron(diag, single)
    return np.diag(diag)


def _as_single(h) -> np.ndarray:
    if isinstance(h, DriveHamiltonian):
        return build_single_atom(h)
    h = np.asarray(h, dtype=complex)
    if h.shape != (3, 3):
        raise InvalidParameterError(f"single-atom Hamiltonian must be 3x3, got {h.shape}")
    return h


def build_two_atom(d1, d2, blockade: float, sign: int = 1) -> np.ndarray:
    """9x9 Hamiltonian of two atoms with a van der Waals shift on ``|rr>``.

    ``d1`` and ``d2`` are :class:`DriveHamiltonian` instances or 3x3 arrays.
    ``blockade`` is the magnitude of the interaction (rad/s); ``math.inf``
    gives perfect blockade, implemented by removing all couplings into
    ``|rr>`` rather than by a numerically huge energy.
    """
    if not blockade >= 0:
        raise InvalidParameterError(f"blockade must be >= 0, got {blockade}")
    if sign not in (1, -1):
        raise InvalidParameterError("sign must be +1 or -1")
    h1, h2 = _as_single(d1), _as_single(d2)
    eye = np.eye(3)
    h = np.kron(h1, eye) + np.kron(eye, h2)
    rr = 3 * RYD + RYD
    if math.isinf(blockade):
        h[rr, :] = 0
        h[:, rr] = 0
    else:
        h[rr, rr] += sign * blockade
    return h


def _check_hermitian(h: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(h))))
    if not np.allclose(h, h.conj().T, rtol=0, atol=_HERMITIAN_RTOL * scale):
        raise InvalidParameterError("Hamiltonian is not Hermitian")


def propagator(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h`` via eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    _check_hermitian(h)
    if t < 0:
        raise InvalidParameterError(f"duration must be >= 0, got {t}")
    energies, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * energies * t)) @ vecs.conj().T


def evolve_unitary(state: np.ndarray, h: np.ndarray, t: float) -> np.ndarray:
    """Evolve a ket (or density operator) under ``h`` for time ``t``."""
    if t == 0:
        _check_hermitian(np.asarray(h, dtype=complex))
        return np.array(state, dtype=complex)
    u = propagator(h, t)
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return u @ state
    return u @ state @ u.conj().T


def liouvillian(h: np.ndarray, channels: Sequence[LindbladChannel] = ()) -> np.ndarray:
    """Superoperator acting on row-major ``rho.ravel()``."""
    h = np.asarray(h, dtype=complex)
    dim = h.shape[0]
    eye = np.eye(dim)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for ch in channels:
        if ch.rate == 0:
            continue
        c = np.asarray(ch.operator, dtype=complex)
        cdc = c.conj().T @ c
        sup += ch.rate * (np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T))
    return sup


def lindblad_trajectory(
    rho: np.ndarray,
    h: np.ndarray,
    channels: Sequence[LindbladChannel],
    times: Sequence[float],
    atol: float = 1e-9,
    rtol: float = 1e-9,
) -> np.ndarray:
    """Density operators at each of ``times`` (ascending, starting >= 0)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = ket_to_dm(rho)
    h = np.asarray(h, dtype=complex)
    _check_hermitian(h)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise InvalidParameterError("times must be ascending and non-negative")
    dim = rho.shape[0]
    t_end = float(times[-1])
    if t_end == 0:
        return np.repeat(rho[None], len(times), axis=0)
    # integrate in units of t_end so the tolerance applies to an O(1) problem
    sup = liouvillian(h, channels) * t_end

    def rhs(_s, y):
        return sup @ y

    sol = solve_ivp(
        rhs,
        (0.0, 1.0),
        rho.ravel(),
        method="DOP853",
        t_eval=times / t_end,
        atol=atol,
        rtol=rtol,
    )
    if not sol.success:
        raise ConvergenceError(f"Lindblad integration failed: {sol.message}", residual=atol)
    out = sol.y.T.reshape(len(times), dim, dim)
    return 0.5 * (out + out.conj().transpose(0, 2, 1))


def evolve_lindblad(
    rho: np.ndarray,
    h: np.ndarray,
    channels: Sequence[LindbladChannel],
    t: float,
    atol: float = 1e-9,
    rtol: float = 1e-9,
) -> np.ndarray:
    """Integrate the master equation for time ``t`` and return the final state."""
    if t < 0:
        raise InvalidParameterError(f"duration must be >= 0, got {t}")
    return lindblad_trajectory(rho, h, channels, [0.0, t], atol=atol, rtol=rtol)[-1]


def embed(op: np.ndarray, atom: int, n_atoms: int) -> np.ndarray:
    """Lift a single-atom 3x3 operator onto ``atom`` of an ``n_atoms`` register."""
    if n_atoms == 1:
        return np.asarray(op, dtype=complex)
    eye = np.eye(3)
    return np.kron(op, eye) if atom == 0 else np.kron(eye, op)


def _projector(i: int, j: int) -> np.ndarray:
    op = np.zeros((3, 3), dtype=complex)
    op[i, j] = 1.0
    return op


def rydberg_decay_channels(rate: float, n_atoms: int, branching: float = 0.5) -> list[LindbladChannel]:
    """Spontaneous decay ``ryd -> g0`` (fraction ``branching``) and ``ryd -> g1``."""
    out = []
    for atom in range(n_atoms):
        out.append(LindbladChannel(embed(_projector(G0, RYD), atom, n_atoms), rate * branching))
        out.append(LindbladChannel(embed(_projector(G1, RYD), atom, n_atoms), rate * (1 - branching)))
    return out


def rydberg_dephasing_channels(rate: float, n_atoms: int) -> list[LindbladChannel]:
    """Pure dephasing of ``ryd`` (collapse operator ``|r><r|``; coherences decay at rate/2)."""
    return [LindbladChannel(embed(_projector(RYD, RYD), a, n_atoms), rate) for a in range(n_atoms)]


def raman_channels(rate: float, n_atoms: int) -> list[LindbladChannel]:
    """Incoherent scattering off the driven ``g1`` level, randomizing the spin."""
    out = []
    for atom in range(n_atoms):
        out.append(LindbladChannel(embed(_projector(G0, G1), atom, n_atoms), rate / 2))
        out.append(LindbladChannel(embed(_projector(G1, G1), atom, n_atoms), rate / 2))
    return out


def populations(state: np.ndarray) -> dict[str, float]:
    """Probability of each basis label for a ket or density operator."""
    state = np.asarray(state)
    if state.ndim == 1:
        probs = np.abs(state) ** 2
    else:
        probs = np.real(np.diag(state))
    labels = basis_labels(n_atoms_of(len(probs)))
    return {lab: float(p) for lab, p in zip(labels, probs)}


def fidelity(state: np.ndarray, target: np.ndarray) -> float:
    """Overlap ``<target|rho|target>`` of ``state`` with the pure ``target``."""
    target = np.asarray(target, dtype=complex)
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return float(abs(np.vdot(target, state)) ** 2)
    return float(np.real(np.vdot(target, state @ target)))

"""Gate protocols: the two-pulse CZ gate, RF spin rotations and test circuits."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares, minimize_scalar

from . import core
from .core import G0, G1, RYD, DriveHamiltonian
from .errors import ConvergenceError, InvalidParameterError

TWO_PI = 2 * math.pi

#: Two-photon Rabi frequency used for the gate (rad/s).
GATE_RABI = TWO_PI * 0.763e6
#: Zeeman splitting that detunes |0> from the Rydberg level (rad/s).
ZEEMAN_SPLIT = TWO_PI * 7.8e6
#: Nuclear-spin Larmor frequency (rad/s) and RF Rabi frequency (rad/s).
LARMOR = TWO_PI * 3.09e3
RF_RABI = TWO_PI * 161.7


@dataclass(frozen=True)
class NoiseModel:
    """Incoherent error sources for gate and readout simulations.

    Rates are in 1/s. ``atom_loss`` is a per-atom probability applied at
    readout (a lost atom reads as dark). ``trap_shift_ratio`` and
    ``field_gradient`` (Hz/um) are only consumed by coherence simulations.
    """

    ryd_decay_rate: float = 0.0
    ryd_dephasing_rate: float = 0.0
    raman_rate: float = 0.0
    atom_loss: float = 0.0
    decay_branching: float = 0.5
    trap_shift_ratio: Optional[float] = None
    field_gradient: Optional[float] = None

    def __post_init__(self):
        for name in ("ryd_decay_rate", "ryd_dephasing_rate", "raman_rate"):
            if not getattr(self, name) >= 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if not 0 <= self.atom_loss <= 1:
            raise InvalidParameterError("atom_loss must be in [0, 1]")
        if not 0 <= self.decay_branching <= 1:
            raise InvalidParameterError("decay_branching must be in [0, 1]")

    def channels(self, n_atoms: int) -> list[core.LindbladChannel]:
        chans = []
        if self.ryd_decay_rate:
            chans += core.rydberg_decay_channels(self.ryd_decay_rate, n_atoms, self.decay_branching)
        if self.ryd_dephasing_rate:
            chans += core.rydberg_dephasing_channels(self.ryd_dephasing_rate, n_atoms)
        if self.raman_rate:
            chans += core.raman_channels(self.raman_rate, n_atoms)
        return chans

    @property
    def is_coherent(self) -> bool:
        return not (self.ryd_decay_rate or self.ryd_dephasing_rate or self.raman_rate)


@dataclass(frozen=True)
class CZPulseParams:
    """Dimensionless parameters of the two-pulse CZ gate.

    Each pulse has detuning ``delta_over_omega * rabi`` and duration
    ``tau_omega / rabi``; the second pulse carries the laser phase ``xi``.
    ``phi01`` and ``phi11`` are the phases acquired by ``|01>`` and ``|11>``
    under perfect blockade.
    """

    delta_over_omega: float
    xi: float
    tau_omega: float
    phi01: float = 0.0
    phi11: float = 0.0
    residual: float = 0.0

    def detuning(self, rabi: float) -> float:
        return self.delta_over_omega * rabi

    def duration(self, rabi: float) -> float:
        """Length of one pulse (s)."""
        return self.tau_omega / rabi

    def phase_identity_error(self) -> float:
        """``phi11 - 2 phi01 - pi`` wrapped to (-pi, pi]."""
        return _wrap(self.phi11 - 2 * self.phi01 - math.pi)


def _wrap(angle: float) -> float:
    return (angle + math.pi) % TWO_PI - math.pi


def _two_level_columns(d, phase, tau, coupling):
    """First column of ``exp(-i H tau)`` for H = [[0, c e^{i phase}/2], [h.c., -d]].

    Vectorized over numpy-broadcastable ``d``, ``phase``, ``tau``. Units of
    the Rabi frequency (``coupling`` is 1 for ``|01>``, sqrt(2) for ``|11>``).
    """
    w = np.sqrt(d**2 + coupling**2)
    c, s = np.cos(w * tau / 2), np.sin(w * tau / 2)
    glob = np.exp(1j * d * tau / 2)
    # exp(-iHt) = e^{i d t/2} [cos(wt/2) I - i (2/w) sin(wt/2) K], K = H + d/2
    u00 = glob * (c - 1j * s * d / w)
    u01 = glob * (-1j * s * coupling * np.exp(1j * phase) / w)
    u10 = glob * (-1j * s * coupling * np.exp(-1j * phase) / w)
    u11 = glob * (c + 1j * s * d / w)
    return u00, u01, u10, u11


def _gate_columns(d, xi, tau, coupling):
    a00, a01, a10, a11 = _two_level_columns(d, 0.0, tau, coupling)
    b00, b01, b10, b11 = _two_level_columns(d, xi, tau, coupling)
    ground = b00 * a00 + b01 * a10
    excited = b10 * a00 + b11 * a10
    return ground, excited


def cz_amplitudes(delta_over_omega, xi, tau_omega):
    """Return ``(<01|U|01>, <01r|U|01>, <11|U|11>, <W|U|11>)`` under perfect blockade."""
    g1, e1 = _gate_columns(delta_over_omega, xi, tau_omega, 1.0)
    g2, e2 = _gate_columns(delta_over_omega, xi, tau_omega, math.sqrt(2))
    return g1, e1, g2, e2


def _cz_residual_vector(x):
    g1, e1, g2, e2 = cz_amplitudes(*x)
    r = np.array([e1, e2, g2 + g1**2])
    return np.concatenate([r.real, r.imag])


def solve_cz_parameters(tol: float = 1e-6) -> CZPulseParams:
    """Find the shortest two-pulse CZ with positive detuning.

    Constraints: ``|01>`` and ``|11>`` return to themselves and
    ``phi11 = 2 phi01 + pi``. A coarse grid over (detuning, phase slip,
    duration) seeds Levenberg-Marquardt refinement; among converged roots the
    one with the smallest ``tau_omega`` (then ``delta_over_omega > 0``) wins.
    """
    if not 0 < tol <= 1e-3:
        raise InvalidParameterError(f"tol must be in (0, 1e-3], got {tol}")
    d = np.linspace(0.05, 1.5, 30)[:, None, None]
    xi = np.linspace(0, TWO_PI, 37)[None, :, None]
    tau = np.linspace(1.0, 8.0, 57)[None, None, :]
    g1, e1, g2, e2 = cz_amplitudes(d, xi, tau)
    cost = np.abs(e1) ** 2 + np.abs(e2) ** 2 + np.abs(g2 + g1**2) ** 2
    order = np.argsort(cost, axis=None)[:12]
    best = None
    roots = []
    for flat in order:
        i, j, k = np.unravel_index(flat, cost.shape)
        x0 = [d[i, 0, 0], xi[0, j, 0], tau[0, 0, k]]
        fit = least_squares(_cz_residual_vector, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        res = float(np.max(np.abs(fit.fun)))
        if best is None or res < best[0]:
            best = (res, fit.x)
        if res <= tol and fit.x[2] > 0:
            roots.append(fit.x)
    if not roots:
        raise ConvergenceError("CZ parameter solve did not converge", residual=best[0])
    roots.sort(key=lambda x: (round(x[2], 6), -np.sign(x[0])))
    dO, xi_s, tO = roots[0]
    if dO < 0:
        dO, xi_s = -dO, -xi_s
    xi_s = float(xi_s % TWO_PI)
    g1, _, g2, _ = cz_amplitudes(dO, xi_s, tO)
    residual = float(np.max(np.abs(_cz_residual_vector([dO, xi_s, tO]))))
    return CZPulseParams(
        delta_over_omega=float(dO),
        xi=xi_s,
        tau_omega=float(tO),
        phi01=float(np.angle(g1)),
        phi11=float(np.angle(g2)),
        residual=residual,
    )


def cz_drives(params: CZPulseParams, rabi: float, light_shift: float = 0.0, leak_g0: bool = False,
              zeeman_split: float = ZEEMAN_SPLIT) -> list[tuple[DriveHamiltonian, float]]:
    """The two (drive, duration) segments of the gate."""
    common = dict(
        rabi=rabi,
        detuning=params.detuning(rabi),
        light_shift=light_shift,
        zeeman_split=zeeman_split,
        leak_g0=leak_g0,
    )
    t = params.duration(rabi)
    return [(DriveHamiltonian(phase=0.0, **common), t), (DriveHamiltonian(phase=params.xi, **common), t)]


def _segment_h(drive: DriveHamiltonian, n_atoms: int, blockade: float, sign: int) -> np.ndarray:
    if n_atoms == 1:
        return core.build_single_atom(drive)
    return core.build_two_atom(drive, drive, blockade, sign)


def apply_cz(
    state: np.ndarray,
    params: CZPulseParams,
    omega: float = GATE_RABI,
    blockade: float = math.inf,
    noise: Optional[NoiseModel] = None,
    light_shift: float = 0.0,
    leak_g0: bool = False,
    zeeman_split: float = ZEEMAN_SPLIT,
    blockade_sign: int = 1,
) -> np.ndarray:
    """Apply the two CZ pulses to a one- or two-atom ket or density operator.

    Without incoherent noise the evolution is exact and the input kind is
    preserved. With a dissipative ``noise`` the result is always a density
    operator. ``noise.atom_loss`` is not applied here (see readout).
    """
    if not omega > 0:
        raise InvalidParameterError(f"omega must be > 0, got {omega}")
    state = np.asarray(state, dtype=complex)
    n_atoms = core.n_atoms_of(state.shape[0])
    segments = cz_drives(params, omega, light_shift, leak_g0, zeeman_split)
    dissipative = noise is not None and not noise.is_coherent
    if dissipative and state.ndim == 1:
        state = core.ket_to_dm(state)
    total = 0.0
    for drive, t in segments:
        h = _segment_h(drive, n_atoms, blockade, blockade_sign)
        if dissipative:
            state = core.evolve_lindblad(state, h, noise.channels(n_atoms), t)
        else:
            state = core.evolve_unitary(state, h, t)
        total += t
    if leak_g0:
        frame = core.leakage_frame_correction(segments[0][0], total, n_atoms)
        state = frame @ state if state.ndim == 1 else frame @ state @ frame.conj().T
    return state


def cz_trajectory(
    state: np.ndarray,
    params: CZPulseParams,
    times: Sequence[float],
    omega: float = GATE_RABI,
    blockade: float = math.inf,
    noise: Optional[NoiseModel] = None,
    light_shift: float = 0.0,
) -> np.ndarray:
    """Density operators at ``times`` (s, within the gate) during the CZ pulses."""
    times = np.asarray(times, dtype=float)
    rho = np.asarray(state, dtype=complex)
    if rho.ndim == 1:
        rho = core.ket_to_dm(rho)
    n_atoms = core.n_atoms_of(rho.shape[0])
    chans = noise.channels(n_atoms) if noise is not None else []
    (d1, t1), (d2, t2) = cz_drives(params, omega, light_shift)
    if np.any(times < 0) or np.any(times > t1 + t2 + 1e-15):
        raise InvalidParameterError("times must lie within the gate")
    h1 = _segment_h(d1, n_atoms, blockade, 1)
    h2 = _segment_h(d2, n_atoms, blockade, 1)
    uniq, inverse = np.unique(times, return_inverse=True)
    first = uniq <= t1
    grid1 = np.unique(np.concatenate([[0.0], uniq[first], [t1]]))
    traj1 = core.lindblad_trajectory(rho, h1, chans, grid1)
    at_uniq = np.empty((len(uniq),) + rho.shape, dtype=complex)
    at_uniq[first] = traj1[np.searchsorted(grid1, uniq[first])]
    if np.any(~first):
        grid2 = np.concatenate([[0.0], uniq[~first] - t1])
        at_uniq[~first] = core.lindblad_trajectory(traj1[-1], h2, chans, grid2)[1:]
    return at_uniq[inverse]


def rotation_matrix(angle: float, axis_phase: float) -> np.ndarray:
    """3x3 RF rotation ``exp(-i angle/2 (cos p X + sin p Y))`` on {g0, g1}; ryd untouched."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    r = np.eye(3, dtype=complex)
    r[G0, G0] = r[G1, G1] = c
    r[G0, G1] = -1j * s * np.exp(-1j * axis_phase)
    r[G1, G0] = -1j * s * np.exp(1j * axis_phase)
    return r


def single_qubit_rotation(state: np.ndarray, angle: float, axis_phase: float) -> np.ndarray:
    """Apply the same global RF rotation to every atom of ``state``."""
    state = np.asarray(state, dtype=complex)
    r = rotation_matrix(angle, axis_phase)
    if core.n_atoms_of(state.shape[0]) == 2:
        r = np.kron(r, r)
    if state.ndim == 1:
        return r @ state
    return r @ state @ r.conj().T


def rf_drive_full(
    state: np.ndarray,
    omega_rf: float,
    larmor: float,
    t: float,
    phase: float = 0.0,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> np.ndarray:
    """Linearly polarized RF drive integrated without the rotating-wave approximation.

    Lab-frame drive ``omega_rf cos(larmor t - phase) X`` on a qubit split by
    ``larmor``; the result is returned in the frame rotating at ``larmor`` so
    it compares directly with :func:`single_qubit_rotation` of angle
    ``omega_rf * t``.
    """
    if not (omega_rf > 0 and larmor > 0):
        raise InvalidParameterError("omega_rf and larmor must be > 0")
    state = np.asarray(state, dtype=complex)
    if t == 0:
        return state.copy()
    n_atoms = core.n_atoms_of(state.shape[0])

    def h_int(tt):
        amp = omega_rf * math.cos(larmor * tt - phase)
        op = np.zeros((3, 3), dtype=complex)
        op[G0, G1] = amp * np.exp(-1j * larmor * tt)
        op[G1, G0] = np.conj(op[G0, G1])
        if n_atoms == 2:
            return np.kron(op, np.eye(3)) + np.kron(np.eye(3), op)
        return op

    is_ket = state.ndim == 1
    dim = state.shape[0]

    def rhs(tt, y):
        h = h_int(tt)
        if is_ket:
            return -1j * (h @ y)
        rho = y.reshape(dim, dim)
        return (-1j * (h @ rho - rho @ h)).ravel()

    sol = solve_ivp(rhs, (0.0, t), state.ravel(), method="DOP853", rtol=rtol, atol=atol,
                    max_step=math.pi / (4 * larmor) if larmor * t > 1 else np.inf)
    if not sol.success:
        raise ConvergenceError(f"RF integration failed: {sol.message}", residual=rtol)
    out = sol.y[:, -1]
    return out if is_ket else out.reshape(dim, dim)


BELL_TARGET = (core.basis_state("g0", "g0") + 1j * core.basis_state("g1", "g1")) / math.sqrt(2)


def _initial_product() -> np.ndarray:
    return single_qubit_rotation(core.basis_state("g0", "g0"), math.pi / 2, 0.0)


def bell_circuit(
    params: CZPulseParams,
    comp_phase: float,
    noise: Optional[NoiseModel] = None,
    omega: float = GATE_RABI,
    blockade: float = math.inf,
    light_shift: float = 0.0,
) -> np.ndarray:
    """Prepare ``[(|0> - i|1>)/sqrt2]^2``, apply CZ, then a (pi/2, comp_phase) pulse.

    Returns the two-atom density operator. The target is ``(|00> + i|11>)/sqrt2``
    when ``comp_phase`` compensates the single-qubit phase ``phi01``.
    """
    rho = core.ket_to_dm(_initial_product())
    rho = apply_cz(rho, params, omega, blockade, noise, light_shift=light_shift)
    return single_qubit_rotation(rho, math.pi / 2, comp_phase)


def _best_phase(objective) -> float:
    grid = np.linspace(0, TWO_PI, 73)
    vals = [objective(p) for p in grid]
    p0 = grid[int(np.argmin(vals))]
    res = minimize_scalar(objective, bounds=(p0 - 0.1, p0 + 0.1), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x % TWO_PI)


def bell_compensation_phase(params: CZPulseParams) -> float:
    """Analysis-pulse axis phase that turns the ideal CZ output into a Bell state.

    The rotation axis must lie along the equatorial Bloch vector of each atom,
    which the gate has advanced by ``phi01`` from its initial azimuth -pi/2.
    """
    return (params.phi01 - math.pi / 2) % TWO_PI


def bell_fidelity(rho: np.ndarray) -> float:
    """Fidelity to the closest ``(|00> + e^{i theta}|11>)/sqrt2``.

    Equals ``(p00 + p11 + C)/2`` with ``C = 2|rho_{00,11}|`` the parity
    contrast. The Bell phase ``theta`` picks up ``2 phi01`` from the gate
    and is not fixed by a global analysis pulse, so it is optimized over.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = core.ket_to_dm(rho)
    i00, i11 = 0, 4
    return float(0.5 * (rho[i00, i00].real + rho[i11, i11].real) + abs(rho[i00, i11]))


def bell_phase(rho: np.ndarray) -> float:
    """Relative phase ``theta`` of ``|11>`` against ``|00>`` in a two-atom state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = core.ket_to_dm(rho)
    return float(np.angle(rho[4, 0]))


def suppressed_compensation_phase(params: CZPulseParams, light_shift: float,
                                  omega: float = GATE_RABI, blockade: float = math.inf) -> float:
    """Analyzer phase returning the noiseless suppressed-gate output to ``|00>``."""
    after = apply_cz(_initial_product(), params, omega, blockade, light_shift=light_shift)
    target = core.basis_state("g0", "g0")
    return _best_phase(lambda p: -core.fidelity(single_qubit_rotation(after, math.pi / 2, p), target))


def suppressed_gate(
    params: CZPulseParams,
    light_shift: float,
    comp_phase: Optional[float] = None,
    noise: Optional[NoiseModel] = None,
    omega: float = GATE_RABI,
    blockade: float = math.inf,
) -> np.ndarray:
    """Bell circuit with the Rydberg level light-shifted during both CZ pulses.

    With a large shift the gate acts as identity up to a single-qubit phase,
    which ``comp_phase`` undoes so the ideal output is ``|00>``. By default
    the compensating phase is computed from the noiseless suppressed dynamics.
    """
    if comp_phase is None:
        comp_phase = suppressed_compensation_phase(params, light_shift, omega, blockade)
    return bell_circuit(params, comp_phase, noise, omega, blockade, light_shift=light_shift)


def qubit_populations(rho: np.ndarray) -> tuple[float, float, float, float]:
    """``(p00, p01, p10, p11)`` of a two-atom state."""
    pops = core.populations(rho)
    return pops["g0g0"], pops["g0g1"], pops["g1g0"], pops["g1g1"]


def parity_scan(rho: np.ndarray, phases: Sequence[float]) -> list[tuple[float, float, float, float, float]]:
    """Populations after a global (pi/2, phase) analysis pulse for each phase."""
    phases = list(phases)
    if not phases:
        raise InvalidParameterError("phases must be nonempty")
    out = []
    for p in phases:
        rotated = single_qubit_rotation(rho, math.pi / 2, p)
        out.append((float(p),) + qubit_populations(rotated))
    return out


def parity(row) -> float:
    """``p00 + p11 - p01 - p10`` of a :func:`parity_scan` row."""
    _, p00, p01, p10, p11 = row
    return p00 + p11 - p01 - p10


def swap_atoms(state: np.ndarray) -> np.ndarray:
    """Exchange the two atoms of a 9-dimensional ket or density operator."""
    perm = np.array([3 * b + a for a in range(3) for b in range(3)])
    state = np.asarray(state)
    if state.ndim == 1:
        return state[perm]
    return state[np.ix_(perm, perm)]

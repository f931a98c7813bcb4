"""Blockade characterization, C6 scaling and hyperfine light-shift algebra.

Frequencies are angular (rad/s), distances in um, and C6 in rad/s * um^6.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares

from .errors import FitError, IllConditionedFitError, InvalidParameterError

SQRT2 = math.sqrt(2)
TWO_PI = 2 * math.pi
#: Quantum defect of the 3S1 Rydberg series.
QUANTUM_DEFECT_3S1 = 4.439


def blockade_spectrum(R: float, C6: float, omega: float) -> list[tuple[float, float]]:
    """Frequency components ``(frequency, weight)`` of the ``|11>`` population.

    Resonant drive of ``{|11>, W, |rr>}`` with couplings ``sqrt(2) omega / 2``
    and ``|rr>`` shifted by ``V = C6 / R^6``. Components with equal frequency
    are merged; the constant term is dropped.
    """
    if not (R > 0 and omega > 0):
        raise InvalidParameterError("R and omega must be > 0")
    v = C6 / R**6
    a = SQRT2 * omega / 2
    h = np.array([[0.0, a, 0.0], [a, 0.0, a], [0.0, a, v]])
    energies, vecs = np.linalg.eigh(h)
    w = np.abs(vecs[0]) ** 2
    comps: dict = {}
    for j in range(3):
        for k in range(j + 1, 3):
            f = abs(energies[k] - energies[j])
            key = next((c for c in comps if math.isclose(c, f, rel_tol=1e-9, abs_tol=1e-12 * omega)), f)
            comps[key] = comps.get(key, 0.0) + 2 * w[j] * w[k]
    return sorted(comps.items())


def blockade_frequency(R: float, C6: float, omega: float) -> float:
    """Dominant (largest-amplitude) oscillation frequency of the ``|11>`` population."""
    return float(max(blockade_spectrum(R, C6, omega), key=lambda fw: fw[1])[0])


@dataclass(frozen=True)
class BlockadeDataset:
    """Fitted pair Rabi frequencies (rad/s) versus atom spacing (um)."""

    spacings: tuple
    frequencies: tuple
    sigmas: tuple
    omega: float

    def __post_init__(self):
        n = len(self.spacings)
        if not (len(self.frequencies) == len(self.sigmas) == n):
            raise InvalidParameterError("spacings, frequencies and sigmas must have equal length")
        if any(r <= 0 for r in self.spacings):
            raise InvalidParameterError("spacings must be > 0")
        lo, hi = self.omega, SQRT2 * self.omega
        for f, s in zip(self.frequencies, self.sigmas):
            if not (lo - 3 * s <= f <= hi + 3 * s):
                raise InvalidParameterError(f"frequency {f:.4g} outside [omega, sqrt2 omega] by > 3 sigma")


@dataclass(frozen=True)
class BlockadeFit:
    """Result of :func:`fit_blockade_radius`.

    ``rb`` satisfies ``C6 / rb^6 = omega`` exactly. ``rb_sigma`` and
    ``c6_sigma`` include the magnification term; the ``*_fit_sigma`` fields
    are the statistical part only. ``r_half`` is the spacing at which the
    model frequency is halfway between omega and sqrt(2) omega.
    """

    rb: float
    rb_sigma: float
    c6: float
    c6_sigma: float
    rb_fit_sigma: float
    c6_fit_sigma: float
    magnification_uncertainty: float
    c6_interval: tuple
    r_half: float
    omega: float
    residual_norm: float

    def to_dict(self, freq_unit: float = TWO_PI * 1e12) -> dict:
        """JSON-ready dict; C6 expressed in ``freq_unit`` (default THz) * um^6."""
        return {
            "rb_um": self.rb,
            "rb_sigma_um": self.rb_sigma,
            "rb_fit_sigma_um": self.rb_fit_sigma,
            "c6": self.c6 / freq_unit,
            "c6_sigma": self.c6_sigma / freq_unit,
            "c6_fit_sigma": self.c6_fit_sigma / freq_unit,
            "c6_interval": [x / freq_unit for x in self.c6_interval],
            "magnification_uncertainty": self.magnification_uncertainty,
            "r_half_um": self.r_half,
            "omega_mhz": self.omega / (TWO_PI * 1e6),
            "residual_norm": self.residual_norm,
        }


def fit_blockade_radius(data: BlockadeDataset, magnification_uncertainty: float = 0.1) -> BlockadeFit:
    """Least-squares fit of C6 through :func:`blockade_frequency`.

    The magnification uncertainty ``m`` rescales every spacing by ``1 +/- m``,
    so it enters ``rb`` linearly but C6 to the sixth power: the reported
    ``c6_interval`` is ``[C6 (1-m)^6, C6 (1+m)^6]`` and ``c6_sigma`` adds the
    linearized ``6 m C6`` in quadrature.
    """
    r = np.asarray(data.spacings, dtype=float)
    f = np.asarray(data.frequencies, dtype=float)
    s = np.maximum(np.asarray(data.sigmas, dtype=float), 1e-12 * data.omega)
    omega = data.omega
    if len(r) < 4:
        raise FitError("blockade fit needs at least 4 spacings")
    mid = 0.5 * (1 + SQRT2) * omega
    if np.all(f > mid):
        raise IllConditionedFitError("all points are blockaded; no spacings in the non-interacting regime")
    if np.all(f < mid):
        raise IllConditionedFitError("no points are blockaded; no spacings in the blockade regime")

    def resid(logc6):
        c6 = math.exp(logc6[0])
        return np.array([(blockade_frequency(ri, c6, omega) - fi) / si for ri, fi, si in zip(r, f, s)])

    # coarse scan in log C6 between "everything blockaded" and "nothing blockaded"
    grid = np.linspace(math.log(omega * r.min() ** 6) - 3, math.log(omega * r.max() ** 6) + 3, 200)
    costs = [float(np.sum(resid([g]) ** 2)) for g in grid]
    x0 = grid[int(np.argmin(costs))]
    sol = least_squares(resid, [x0], x_scale=[1.0], xtol=1e-14, ftol=1e-14)
    if not sol.success:
        raise FitError(f"blockade fit failed: {sol.message}")
    logc6 = float(sol.x[0])
    c6 = math.exp(logc6)
    jac = sol.jac
    chi2 = float(np.sum(sol.fun**2))
    var_log = float(np.linalg.pinv(jac.T @ jac)[0, 0])
    c6_fit_sigma = c6 * math.sqrt(var_log)
    rb = (c6 / omega) ** (1 / 6)
    rb_fit_sigma = rb * math.sqrt(var_log) / 6
    m = magnification_uncertainty
    rb_sigma = math.hypot(rb_fit_sigma, m * rb)
    c6_sigma = math.hypot(c6_fit_sigma, 6 * m * c6)

    def gap(radius):
        return blockade_frequency(radius, c6, omega) - mid

    r_half = brentq(gap, rb / 4, rb * 4, xtol=1e-12)
    return BlockadeFit(
        rb=rb,
        rb_sigma=rb_sigma,
        c6=c6,
        c6_sigma=c6_sigma,
        rb_fit_sigma=rb_fit_sigma,
        c6_fit_sigma=c6_fit_sigma,
        magnification_uncertainty=m,
        c6_interval=(c6 * (1 - m) ** 6, c6 * (1 + m) ** 6),
        r_half=float(r_half),
        omega=omega,
        residual_norm=math.sqrt(chi2),
    )


def synthetic_blockade_dataset(
    C6: float,
    omega: float,
    spacings: Sequence[float],
    rel_sigma: float = 0.0,
    seed: Optional[int] = None,
) -> BlockadeDataset:
    """Frequencies from :func:`blockade_frequency`, optionally with Gaussian noise."""
    rng = np.random.default_rng(seed)
    freqs, sigs = [], []
    for r in spacings:
        f = float(blockade_frequency(r, C6, omega))
        sig = rel_sigma * f
        if sig:
            f = float(np.clip(f + rng.normal(0, sig), omega - 2 * sig, SQRT2 * omega + 2 * sig))
        freqs.append(f)
        sigs.append(sig if sig else 1e-3 * omega)
    return BlockadeDataset(tuple(map(float, spacings)), tuple(freqs), tuple(sigs), omega)


def c6_scale(C6_ref: float, n_ref: float, n_target: float, defect: float = QUANTUM_DEFECT_3S1) -> float:
    """Scale C6 between principal quantum numbers as ``(n - defect)^11``."""
    if n_ref <= defect or n_target <= defect:
        raise InvalidParameterError("principal quantum numbers must exceed the quantum defect")
    return C6_ref * ((n_target - defect) / (n_ref - defect)) ** 11


@dataclass(frozen=True)
class LightShiftPair:
    """Light shifts measured on the even isotope.

    ``dU0 = U0 - U0g`` (pi transition, m_J' = 0) and ``dU1 = U1 - U0g``
    (sigma transition, |m_J'| = 1), with ``ground`` the ground-state shift
    ``U0g``.
    """

    dU0: float
    dU1: float
    ground: float = 0.0


@dataclass(frozen=True)
class HyperfineShifts:
    shift_half: float
    shift_three_half: float
    diff_half: float
    diff_three_half: float
    magic_residual: float


# Clebsch-Gordan weights for I = 1/2 (x) J = 1 -> F = 3/2:
#   |3/2, +-1/2> = sqrt(2/3) |m_J = 0, m_I = +-1/2> + sqrt(1/3) |m_J = +-1, m_I = -+1/2>
#   |3/2, +-3/2> = |m_J = +-1, m_I = +-1/2>
# The tensor shift is diagonal in m_J, so each F' sublevel shifts by the
# CG-weighted mean of U0 (m_J = 0) and U1 (|m_J| = 1).
_CG_HALF = (2 / 3, 1 / 3)
_CG_THREE_HALF = (0.0, 1.0)


def hyperfine_shift_projection(pair: LightShiftPair) -> HyperfineShifts:
    """Shifts of the F' = 3/2 sublevels and their differentials to the ground state.

    ``magic_residual = 2 dU0 + dU1`` vanishes exactly when the ``|m_F'| = 1/2``
    transition is magic (``dU0 / dU1 = -1/2``).
    """
    u0 = pair.ground + pair.dU0
    u1 = pair.ground + pair.dU1
    half = _CG_HALF[0] * u0 + _CG_HALF[1] * u1
    three_half = _CG_THREE_HALF[0] * u0 + _CG_THREE_HALF[1] * u1
    return HyperfineShifts(
        shift_half=half,
        shift_three_half=three_half,
        diff_half=(2 * pair.dU0 + pair.dU1) / 3,
        diff_three_half=pair.dU1,
        magic_residual=2 * pair.dU0 + pair.dU1,
    )

"""Coherence fits: Ramsey, phase-scan visibility, spin echo and T1."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from ..errors import FitError, InvalidParameterError
from .results import Estimate, FitResult, weighted_fit

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class FieldGradient:
    """Linear detuning gradient across the array.

    ``gradient`` is in Hz/um and ``positions`` are site coordinates in um
    along the gradient.
    """

    gradient: float
    positions: tuple

    def average_factor(self, t) -> np.ndarray:
        """``mean_i exp(2 pi i g (x_i - <x>) t)``: the array-average dephasing factor."""
        x = np.asarray(self.positions, dtype=float)
        x = x - x.mean()
        t = np.asarray(t, dtype=float)
        return np.exp(1j * TWO_PI * self.gradient * np.multiply.outer(t, x)).mean(axis=-1)


def _envelope(kind: str):
    if kind == "gaussian":
        return lambda t, T: np.exp(-((t / T) ** 2))
    if kind == "exponential":
        return lambda t, T: np.exp(-t / T)
    raise InvalidParameterError(f"unknown envelope {kind!r}")


def ramsey_model(t, amplitude, t2, freq, phase, envelope="gaussian", gradient: Optional[FieldGradient] = None):
    """``1/2 + 1/2 A V(t) Re[M(t) e^{i(2 pi f t + phase)}]`` with ``M`` the gradient factor."""
    t = np.asarray(t, dtype=float)
    osc = np.exp(1j * (TWO_PI * freq * t + phase))
    if gradient is not None:
        osc = osc * gradient.average_factor(t)
    return 0.5 + 0.5 * amplitude * _envelope(envelope)(t, t2) * osc.real


def _dominant_frequency(t, y):
    span = t.max() - t.min()
    dt = np.min(np.diff(np.unique(t)))
    freqs = np.linspace(0.25 / span, 0.5 / dt, 4000)
    yc = y - y.mean()
    power = np.abs(np.exp(-1j * TWO_PI * np.outer(freqs, t)) @ yc)
    return float(freqs[np.argmax(power)])


def ramsey_fit(
    times,
    populations,
    sigma=None,
    envelope: str = "gaussian",
    gradient: Optional[FieldGradient] = None,
) -> FitResult:
    """Fit a decaying Ramsey fringe; reports ``t2`` as the 1/e time of the envelope."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(populations, dtype=float)
    if len(t) < 6:
        raise FitError("ramsey_fit needs at least 6 points")
    f0 = _dominant_frequency(t, y)
    amp0 = float(np.clip(2 * np.max(np.abs(y - 0.5)), 0.1, 1.0))
    t20 = 0.5 * np.ptp(t)

    def model(tt, a, t2, f, ph):
        return ramsey_model(tt, a, t2, f, ph, envelope, gradient)

    best = None
    for ph0 in np.linspace(0, TWO_PI, 4, endpoint=False):
        try:
            fit = weighted_fit(model, t, y, [amp0, t20, f0, ph0], ("amplitude", "t2", "freq", "phase"),
                               f"ramsey-{envelope}", sigma,
                               bounds=([0, 1e-12, 0, -10 * math.pi], [1.5, np.inf, np.inf, 10 * math.pi]))
        except FitError:
            continue
        if best is None or fit.residual_norm < best.residual_norm:
            best = fit
    if best is None:
        raise FitError("ramsey fit failed for every starting phase")
    return best


def _harmonic_fit(x, y, sigma, harmonic):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones_like(x), np.cos(harmonic * x), np.sin(harmonic * x)])
    w = np.ones_like(y) if sigma is None else 1.0 / np.maximum(np.asarray(sigma, dtype=float), 1e-12)
    coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
    resid = y - design @ coef
    cov = np.linalg.pinv((design * w[:, None]).T @ (design * w[:, None]))
    if sigma is None:
        dof = max(len(y) - 3, 1)
        cov = cov * float(resid @ resid) / dof
    chi = float(np.linalg.norm(resid * w))
    return coef, cov, chi


def _amplitude(coef, cov):
    b, c = coef[1], coef[2]
    r = math.hypot(b, c)
    if r == 0:
        sig = math.sqrt(max(0.5 * (cov[1, 1] + cov[2, 2]), 0.0))
    else:
        g = np.array([b / r, c / r])
        sig = math.sqrt(max(float(g @ cov[1:, 1:] @ g), 0.0))
    return r, sig, math.atan2(c, b)


def visibility_fit(phases, populations, sigma=None) -> FitResult:
    """Fit ``a + (C/2) cos(phase - phase0)`` by linear least squares.

    The phases must cover a full period: ``max - min`` plus one mean
    spacing is at least 2 pi.
    """
    ph = np.asarray(phases, dtype=float)
    if len(ph) < 5:
        raise FitError("visibility_fit needs at least 5 phases")
    span = np.ptp(ph) + np.ptp(ph) / (len(ph) - 1)
    if span < TWO_PI - 1e-9:
        raise FitError("phases must span a full 2 pi period")
    coef, cov, chi = _harmonic_fit(ph, populations, sigma, 1)
    r, sr, phase0 = _amplitude(coef, cov)
    return FitResult("visibility", ("offset", "contrast", "phase"),
                     np.array([coef[0], 2 * r, phase0]),
                     np.array([math.sqrt(cov[0, 0]), 2 * sr, sr / r if r else math.inf]),
                     chi, True, len(ph))


def parity_contrast(phases, parity, sigma=None) -> FitResult:
    """Fit the parity signal ``a + C cos(2 phase - phase0)``; ``contrast`` is ``C``."""
    ph = np.asarray(phases, dtype=float)
    if len(ph) < 4:
        raise FitError("parity_contrast needs at least 4 phases")
    coef, cov, chi = _harmonic_fit(ph, parity, sigma, 2)
    r, sr, phase0 = _amplitude(coef, cov)
    return FitResult("parity", ("offset", "contrast", "phase"),
                     np.array([coef[0], r, phase0]),
                     np.array([math.sqrt(cov[0, 0]), sr, sr / r if r else math.inf]),
                     chi, True, len(ph))


def _exp_model(t, amplitude, rate):
    return amplitude * np.exp(-rate * np.asarray(t, dtype=float))


def decay_fit(times, values, sigma=None, tag: str = "exp-decay") -> FitResult:
    """Fit ``A exp(-t/T)``; the rate is fitted so a flat curve gives ``T = inf``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    pos = y > 0
    if pos.sum() >= 2:
        slope, icpt = np.polyfit(t[pos], np.log(y[pos]), 1)
        p0 = [math.exp(icpt), max(-slope, 0.0)]
    else:
        p0 = [float(y.max()), 1.0 / max(np.ptp(t), 1e-12)]
    fit = weighted_fit(_exp_model, t, y, p0, ("amplitude", "rate"), tag, sigma,
                       bounds=([0, 0], [np.inf, np.inf]))
    rate, srate = fit["rate"], fit.sigma("rate")
    time = math.inf if rate == 0 else 1 / rate
    stime = math.inf if rate == 0 else srate / rate**2
    fit.names = fit.names + ("time",)
    fit.values = np.append(fit.values, time)
    fit.sigmas = np.append(fit.sigmas, stime)
    return fit


def spin_echo_fit(hold_times, visibilities, survival, vis_sigma=None, survival_sigma=None) -> FitResult:
    """Intrinsic echo coherence time from survival-normalized visibilities.

    ``time`` in the result is T2; the raw (unnormalized) decay time is stored
    under ``extra["raw_time"]``.
    """
    v = np.asarray(visibilities, dtype=float)
    s = np.asarray(survival, dtype=float)
    norm, nsig = _normalize(v, s, vis_sigma, survival_sigma)
    raw = decay_fit(hold_times, v, vis_sigma, tag="echo-raw")
    fit = decay_fit(hold_times, norm, nsig, tag="echo")
    fit.extra["raw_time"] = {"value": raw["time"], "sigma": raw.sigma("time")}
    return fit


def spin_echo_pipeline(hold_times, phases, populations, survival, pop_sigma=None) -> FitResult:
    """Visibility fit per hold time, then the survival-normalized decay fit.

    ``populations`` has shape ``(len(hold_times), len(phases))``.
    """
    pops = np.asarray(populations, dtype=float)
    vis, vsig = [], []
    for i in range(len(hold_times)):
        sig = None if pop_sigma is None else np.asarray(pop_sigma)[i]
        f = visibility_fit(phases, pops[i], sig)
        vis.append(f["contrast"])
        vsig.append(f.sigma("contrast"))
    fit = spin_echo_fit(hold_times, vis, survival, np.maximum(vsig, 1e-6))
    fit.extra["visibility"] = list(map(float, vis))
    return fit


def _normalize(values, survival, vsig, ssig):
    values = np.asarray(values, dtype=float)
    survival = np.asarray(survival, dtype=float)
    if np.any(survival <= 0):
        raise FitError("survival must be positive to normalize")
    norm = values / survival
    if vsig is None and ssig is None:
        return norm, None
    vs = np.zeros_like(values) if vsig is None else np.asarray(vsig, dtype=float)
    ss = np.zeros_like(values) if ssig is None else np.asarray(ssig, dtype=float)
    return norm, np.sqrt((vs / survival) ** 2 + (values * ss / survival**2) ** 2)


def t1_fit(
    times,
    populations: Mapping[int, Sequence[float]],
    survival,
    pop_sigma: Optional[Mapping[int, Sequence[float]]] = None,
    survival_sigma=None,
) -> FitResult:
    """Atom-loss time and per-state spin-flip times.

    ``populations[s]`` is the probability of detecting the atom in its
    initial spin state ``s`` (0 or 1). It is divided by ``survival`` (the
    atom survival without spin readout) before fitting an exponential.
    Result parameters: ``Ta`` and ``T1_<s>`` for each supplied state.
    """
    t = np.asarray(times, dtype=float)
    if len(t) < 4:
        raise FitError("t1_fit needs at least 4 points")
    surv = decay_fit(t, survival, survival_sigma, tag="survival")
    names, vals, sigs = ["Ta"], [surv["time"]], [surv.sigma("time")]
    extra = {"normalized": {}}
    for state in sorted(populations):
        sig = None if pop_sigma is None else pop_sigma.get(state)
        norm, nsig = _normalize(populations[state], survival, sig, survival_sigma)
        f = decay_fit(t, norm, nsig, tag=f"t1-{state}")
        names.append(f"T1_{state}")
        vals.append(f["time"])
        sigs.append(f.sigma("time"))
        extra["normalized"][str(state)] = list(map(float, norm))
    return FitResult("t1", tuple(names), np.array(vals), np.array(sigs),
                     surv.residual_norm, surv.converged, len(t), extra)

"""Experiment runners behind ``rydsim simulate``.

Each runner takes an :class:`~rydsim.config.ExperimentConfig` and returns an
:class:`ExperimentResult`: an ordered table (the CSV) plus a summary dict
(the JSON). Column names are part of the output contract and documented in
each runner's docstring. Sampled experiments derive every random draw from
the config seed, so identical configs give byte-identical outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import core, gates
from .clifford import rb_dataset
from .config import ConfigError, ExperimentConfig
from .estimators import (
    FieldGradient,
    parity_contrast,
    ramsey_fit,
    ramsey_model,
    rb_fit,
    spam_correct,
    spin_echo_pipeline,
    t1_fit,
)
from .readout import ReadoutModel, blowout_readout, survival_vs_rounds

TWO_PI = 2 * math.pi
LABELS2 = core.basis_labels(2)
SUPPRESSION_SHIFT_MHZ = -18.3


@dataclass
class ExperimentResult:
    columns: tuple
    rows: list
    summary: dict = field(default_factory=dict)


@lru_cache(maxsize=1)
def cz_params() -> gates.CZPulseParams:
    return gates.solve_cz_parameters()


def _sweep(cfg: ExperimentConfig, parameter: str, start: float, stop: float, steps: int) -> np.ndarray:
    if cfg.sweep is None:
        return np.linspace(start, stop, steps)
    if cfg.sweep.parameter != parameter:
        raise ConfigError(f"experiment {cfg.experiment!r} sweeps {parameter!r}, not {cfg.sweep.parameter!r}")
    return cfg.sweep.values()


def _params_summary(p: gates.CZPulseParams) -> dict:
    return {"delta_over_omega": p.delta_over_omega, "xi": p.xi, "tau_omega": p.tau_omega,
            "phi01": p.phi01, "phi11": p.phi11}


def _population_rows(rho) -> list:
    pops = core.populations(rho)
    return [(label, pops[label]) for label in LABELS2]


def _readout_summary(rho, model: Optional[ReadoutModel]) -> Optional[dict]:
    if model is None:
        return None
    probs = blowout_readout(rho, model, blowout=True)
    nob = blowout_readout(rho, model, blowout=False)
    # bright is qubit state 0 under blowout
    a = {("0" if k[0] == "b" else "1") + ("0" if k[1] == "b" else "1"): v for k, v in probs.items()}
    return {"A": dict(sorted(a.items())), "B": dict(sorted(nob.items()))}


def run_gate_dynamics(cfg: ExperimentConfig) -> ExperimentResult:
    """Populations during the CZ pulses.

    Columns: ``time_us`` then ``p_<label>`` for the nine two-atom labels.
    Option ``initial`` picks the computational input state (default "11").
    """
    initial = str(cfg.option("initial", "11"))
    if initial not in ("00", "01", "10", "11"):
        raise ConfigError("options.initial must be one of 00, 01, 10, 11")
    params = cz_params()
    c = cfg.constants
    gate_time = 2 * params.duration(c.rabi)
    times_us = _sweep(cfg, "time_us", 0.0, gate_time * 1e6, int(cfg.option("points", 201)))
    if np.any(times_us * 1e-6 > gate_time * (1 + 1e-12)) or np.any(times_us < 0):
        raise ConfigError(f"time_us must lie in [0, {gate_time * 1e6:.6g}]")
    times = np.minimum(times_us * 1e-6, gate_time)
    psi0 = core.basis_state(*("g" + ch for ch in initial))
    traj = gates.cz_trajectory(psi0, params, times, c.rabi, c.blockade, cfg.noise, c.light_shift)
    rows = []
    for t, rho in zip(times_us, traj):
        pops = core.populations(rho)
        rows.append((float(t),) + tuple(pops[label] for label in LABELS2))
    idx = LABELS2.index("g" + initial[0] + "g" + initial[1])
    ryd_manifold = [i for i, label in enumerate(LABELS2) if "ryd" in label]
    return ExperimentResult(
        ("time_us",) + tuple(f"p_{label}" for label in LABELS2),
        rows,
        {
            "initial": initial,
            "gate_time_us": gate_time * 1e6,
            "return_probability": float(traj[-1][idx, idx].real),
            "max_rydberg_population": float(max(sum(r[1 + i] for i in ryd_manifold) for r in rows)),
            "max_rr_population": float(max(r[1 + LABELS2.index("rydryd")] for r in rows)),
            "cz_params": _params_summary(params),
        },
    )


def _bell_state(cfg: ExperimentConfig):
    params = cz_params()
    c = cfg.constants
    comp = cfg.option("comp_phase_rad")
    comp = gates.bell_compensation_phase(params) if comp is None else float(comp)
    rho = gates.bell_circuit(params, comp, cfg.noise, c.rabi, c.blockade, c.light_shift)
    return rho, comp


def run_bell(cfg: ExperimentConfig) -> ExperimentResult:
    """Bell-circuit output. Columns: ``state``, ``population``."""
    rho, comp = _bell_state(cfg)
    p00, p01, p10, p11 = gates.qubit_populations(rho)
    summary = {
        "comp_phase_rad": comp,
        "bell_fidelity": gates.bell_fidelity(rho),
        "bell_phase_rad": gates.bell_phase(rho),
        "p00": p00, "p01": p01, "p10": p10, "p11": p11,
        "contrast": float(2 * abs(rho[0, 4])),
        "readout": _readout_summary(rho, cfg.readout),
    }
    return ExperimentResult(("state", "population"), _population_rows(rho), summary)


def run_parity(cfg: ExperimentConfig) -> ExperimentResult:
    """Parity scan of the Bell-circuit output.

    Columns: ``phase_rad, p00, p01, p10, p11, parity``. With option
    ``ideal`` the exact Bell state is scanned instead of the simulated one.
    """
    if cfg.option("ideal", False):
        rho, comp = core.ket_to_dm(gates.BELL_TARGET), None
    else:
        rho, comp = _bell_state(cfg)
    phases = _sweep(cfg, "phase_rad", 0.0, TWO_PI, int(cfg.option("points", 41)))
    scan = gates.parity_scan(rho, phases)
    rows = [row + (gates.parity(row),) for row in scan]
    fit = parity_contrast([r[0] for r in rows], [r[5] for r in rows])
    return ExperimentResult(
        ("phase_rad", "p00", "p01", "p10", "p11", "parity"),
        rows,
        {"contrast": fit["contrast"], "contrast_sigma": fit.sigma("contrast"), "parity_phase_rad": fit["phase"],
         "bell_fidelity": gates.bell_fidelity(rho), "comp_phase_rad": comp},
    )


def run_suppressed_gate(cfg: ExperimentConfig) -> ExperimentResult:
    """Bell circuit with the Rydberg level light-shifted. Columns: ``state``, ``population``.

    The shift comes from ``constants.light_shift_mhz`` (default -18.3 MHz,
    the measured ion-core light shift). With a readout model
    the blowout ``A00`` and its loss-corrected value are also reported.
    """
    params = cz_params()
    c = cfg.constants
    shift_mhz = SUPPRESSION_SHIFT_MHZ if c.light_shift_mhz is None else c.light_shift_mhz
    shift = TWO_PI * 1e6 * shift_mhz
    comp = cfg.option("comp_phase_rad")
    if comp is None:
        comp = gates.suppressed_compensation_phase(params, shift, c.rabi, c.blockade)
    rho = gates.suppressed_gate(params, shift, float(comp), cfg.noise, c.rabi, c.blockade)
    p00 = gates.qubit_populations(rho)[0]
    summary = {"light_shift_mhz": shift_mhz, "comp_phase_rad": float(comp), "p00": p00,
               "readout": _readout_summary(rho, cfg.readout)}
    if cfg.readout is not None:
        a00 = summary["readout"]["A"]["00"]
        summary["A00"] = a00
        summary["A00_loss_corrected"] = spam_correct(a00, 0.0, 0.0, cfg.readout.atom_loss).p00.value
    return ExperimentResult(("state", "population"), _population_rows(rho), summary)


def run_rabi(cfg: ExperimentConfig) -> ExperimentResult:
    """RF Rabi flopping from ``|0>``. Columns: ``time_ms``, ``p1``.

    Option ``full`` integrates the drive without the rotating-wave
    approximation.
    """
    c = cfg.constants
    times_ms = _sweep(cfg, "time_ms", 0.0, 20.0, int(cfg.option("points", 81)))
    psi0 = core.basis_state("g0")
    full = bool(cfg.option("full", False))
    rows = []
    for t_ms in times_ms:
        t = t_ms * 1e-3
        if full:
            psi = gates.rf_drive_full(psi0, c.rf_rabi, c.larmor, t)
        else:
            psi = gates.single_qubit_rotation(psi0, c.rf_rabi * t, 0.0)
        rows.append((float(t_ms), core.populations(psi)["g1"]))
    t = np.array([r[0] for r in rows]) * 1e-3
    fit = ramsey_fit(t, [r[1] for r in rows], envelope="exponential")
    freq = fit["freq"]
    return ExperimentResult(("time_ms", "p1"), rows, {
        "rf_rabi_hz": c.rf_rabi_hz, "fitted_rabi_hz": freq, "fitted_rabi_sigma_hz": fit.sigma("freq"),
        "period_ms": 1e3 / freq, "rwa": not full,
    })


def _positions(cfg: ExperimentConfig) -> tuple:
    n = int(cfg.option("n_sites", 30))
    pitch = float(cfg.option("site_pitch_um", 5.0))
    return tuple(pitch * i for i in range(n))


def run_ramsey(cfg: ExperimentConfig) -> ExperimentResult:
    """Synthetic Ramsey fringes with binomial shot noise. Columns: ``time_s, p0, sigma``.

    Options: ``t2_s`` (1.24), ``detuning_hz`` (2.0), ``shots`` (200) and
    ``array_average``; with the latter the fringes are averaged over a linear
    array under ``noise.field_gradient_hz_per_um``.
    """
    rng = np.random.default_rng(cfg.require_seed())
    t2 = float(cfg.option("t2_s", 1.24))
    det = float(cfg.option("detuning_hz", 2.0))
    shots = int(cfg.option("shots", 200))
    times = _sweep(cfg, "time_s", 0.0, 3.0, int(cfg.option("points", 61)))
    gradient = None
    if cfg.option("array_average", False):
        g = cfg.noise.field_gradient if cfg.noise and cfg.noise.field_gradient is not None else 2e-3
        gradient = FieldGradient(g, _positions(cfg))
    p = ramsey_model(times, 1.0, t2, det, 0.0, "gaussian", gradient)
    k = rng.binomial(shots, np.clip(p, 0, 1))
    y = k / shots
    sig = np.sqrt(np.maximum(y * (1 - y), 1.0 / shots) / shots)
    fit = ramsey_fit(times, y, sig, envelope="gaussian")
    rows = [(float(t), float(v), float(s)) for t, v, s in zip(times, y, sig)]
    return ExperimentResult(("time_s", "p0", "sigma"), rows, {
        "t2_star_s": fit["t2"], "t2_star_sigma_s": fit.sigma("t2"), "injected_t2_star_s": t2,
        "freq_hz": fit["freq"], "array_average": gradient is not None, "fit": fit.to_dict(),
    })


def run_echo(cfg: ExperimentConfig) -> ExperimentResult:
    """Synthetic spin echo with atom loss.

    Columns: ``hold_s, phase_rad, p0, survival``. Visibility decays as
    ``exp(-T/T2)`` and survival as ``exp(-T/Ta)``; the summary carries the
    survival-normalized T2 from the visibility pipeline.
    """
    rng = np.random.default_rng(cfg.require_seed())
    t2 = float(cfg.option("t2_s", 5.0))
    ta = float(cfg.option("ta_s", 9.0))
    shots = int(cfg.option("shots", 400))
    holds = _sweep(cfg, "hold_s", 0.0, 8.0, int(cfg.option("points", 9)))
    phases = np.linspace(0, TWO_PI, int(cfg.option("phases", 12)), endpoint=False)
    pops = np.empty((len(holds), len(phases)))
    sig = np.empty_like(pops)
    survival = np.empty(len(holds))
    rows = []
    for i, hold in enumerate(holds):
        s_true = math.exp(-hold / ta)
        survival[i] = rng.binomial(shots, s_true) / shots
        p = s_true * (0.5 + 0.5 * math.exp(-hold / t2) * np.cos(phases))
        pops[i] = rng.binomial(shots, p) / shots
        sig[i] = np.sqrt(np.maximum(pops[i] * (1 - pops[i]), 1.0 / shots) / shots)
        rows += [(float(hold), float(ph), float(v), float(survival[i])) for ph, v in zip(phases, pops[i])]
    fit = spin_echo_pipeline(holds, phases, pops, survival, sig)
    return ExperimentResult(("hold_s", "phase_rad", "p0", "survival"), rows, {
        "t2_s": fit["time"], "t2_sigma_s": fit.sigma("time"), "injected_t2_s": t2,
        "raw_decay_time_s": fit.extra["raw_time"]["value"], "fit": fit.to_dict(),
    })


def run_t1(cfg: ExperimentConfig) -> ExperimentResult:
    """Synthetic T1 data. Columns: ``time_s, survival, p_stay_0, p_stay_1``.

    ``p_stay_s`` is the probability of detecting the atom still in its
    initial state ``s``: ``exp(-t/Ta) exp(-t/T1_s)``.
    """
    rng = np.random.default_rng(cfg.require_seed())
    ta = float(cfg.option("ta_s", 9.0))
    t1 = {0: float(cfg.option("t1_0_s", 13.0)), 1: float(cfg.option("t1_1_s", 27.0))}
    shots = int(cfg.option("shots", 1000))
    times = _sweep(cfg, "time_s", 0.0, 20.0, int(cfg.option("points", 11)))
    surv_true = np.exp(-times / ta)
    survival = rng.binomial(shots, surv_true) / shots
    stay = {s: rng.binomial(shots, surv_true * np.exp(-times / t1[s])) / shots for s in (0, 1)}

    def sigma(y):
        return np.sqrt(np.maximum(y * (1 - y), 1.0 / shots) / shots)

    fit = t1_fit(times, stay, survival, {s: sigma(v) for s, v in stay.items()}, sigma(survival))
    rows = [(float(t), float(s), float(a), float(b)) for t, s, a, b in zip(times, survival, stay[0], stay[1])]
    return ExperimentResult(("time_s", "survival", "p_stay_0", "p_stay_1"), rows, {
        "Ta_s": fit["Ta"], "Ta_sigma_s": fit.sigma("Ta"),
        "T1_0_s": fit["T1_0"], "T1_0_sigma_s": fit.sigma("T1_0"),
        "T1_1_s": fit["T1_1"], "T1_1_sigma_s": fit.sigma("T1_1"),
        "injected": {"Ta_s": ta, "T1_0_s": t1[0], "T1_1_s": t1[1]},
    })


def run_blowout(cfg: ExperimentConfig) -> ExperimentResult:
    """Blowout survival versus number of rounds. Columns: ``n_rounds, survival_0, survival_1``.

    Uses the configured readout model, or the error budget of
    :meth:`ReadoutModel.reference_budget` when none is given.
    """
    model = cfg.readout or ReadoutModel.reference_budget()
    rounds = _sweep(cfg, "n_rounds", 1, 6, 6).astype(int)
    s0 = survival_vs_rounds(model, "g0", rounds)
    s1 = survival_vs_rounds(model, "g1", rounds)
    rows = [(int(n), float(a), float(b)) for n, a, b in zip(rounds, s0, s1)]
    summary = {
        "n_rounds": model.n_rounds,
        "survival_0": model.bright_probability("g0"),
        "survival_1": model.bright_probability("g1"),
    }
    if len(rounds) >= 2 and np.all(s1 > 0):
        slope, icpt = np.polyfit(rounds, np.log(s1), 1)
        resid = np.log(s1) - (slope * rounds + icpt)
        ss_tot = float(np.sum((np.log(s1) - np.log(s1).mean()) ** 2))
        summary["log_slope_1"] = float(slope)
        summary["log_linear_r2_1"] = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return ExperimentResult(("n_rounds", "survival_0", "survival_1"), rows, summary)


def run_rb(cfg: ExperimentConfig) -> ExperimentResult:
    """Synthetic randomized benchmarking. Columns: ``depth, success, sigma``.

    Options: ``depths`` (2..32), ``n_sequences`` (40), ``shots`` (300),
    ``gate_error`` (4.1e-4), ``spam_error`` (0.025), ``loss_per_gate`` (0)
    and ``ideal_outcome`` (either).
    """
    seed = cfg.require_seed()
    depths = [int(d) for d in cfg.option("depths", [2, 4, 8, 16, 32])]
    eps_gate = float(cfg.option("gate_error", 4.1e-4))
    d, y, s = rb_dataset(
        depths,
        n_sequences=int(cfg.option("n_sequences", 40)),
        shots=int(cfg.option("shots", 300)),
        seed=seed,
        gate_error=eps_gate,
        spam_error=float(cfg.option("spam_error", 0.025)),
        loss_per_gate=float(cfg.option("loss_per_gate", 0.0)),
        ideal_outcome=cfg.option("ideal_outcome"),
    )
    fit = rb_fit(d, y, s)
    rows = [(int(a), float(b), float(c)) for a, b, c in zip(d, y, s)]
    return ExperimentResult(("depth", "success", "sigma"), rows, {
        "eps_gate": fit["eps_gate"], "eps_gate_sigma": fit.sigma("eps_gate"),
        "eps_spam": fit["eps_spam"], "eps_spam_sigma": fit.sigma("eps_spam"),
        "fidelity": 1 - fit["eps_gate"], "injected_eps_gate": eps_gate,
        "within_2sigma": abs(fit["eps_gate"] - eps_gate) <= 2 * fit.sigma("eps_gate"),
    })


RUNNERS: dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "gate-dynamics": run_gate_dynamics,
    "bell": run_bell,
    "parity": run_parity,
    "suppressed-gate": run_suppressed_gate,
    "rabi": run_rabi,
    "ramsey": run_ramsey,
    "echo": run_echo,
    "t1": run_t1,
    "blowout": run_blowout,
    "rb": run_rb,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    try:
        runner = RUNNERS[cfg.experiment]
    except KeyError:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}; choose from {', '.join(RUNNERS)}") from None
    result = runner(cfg)
    result.summary = {"experiment": cfg.experiment, "seed": cfg.seed, **result.summary}
    return result

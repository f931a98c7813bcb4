from __future__ import annotations

import numpy as np

from ..errors import FitError
from .results import FitResult, weighted_fit


def rb_model(depth, eps_gate, eps_spam):
    """Success probability ``1/2 + 1/2 (1 - 2 eps_spam)(1 - 2 eps_gate)^d``."""
    return 0.5 + 0.5 * (1 - 2 * eps_spam) * (1 - 2 * eps_gate) ** np.asarray(depth, dtype=float)


def rb_fit(depths, success, sigma=None, sigma_floor: float = 1e-6) -> FitResult:
    """Weighted least-squares fit of the RB decay.

    Returns a :class:`FitResult` with ``eps_gate`` and ``eps_spam``; the
    average gate fidelity ``1 - eps_gate`` is stored in ``extra``.
    """
    d = np.asarray(depths, dtype=float)
    y = np.asarray(success, dtype=float)
    if len(np.unique(d)) < 3:
        raise FitError("rb_fit needs at least 3 distinct depths")
    # log-linear start on the decaying part 2R - 1
    z = np.clip(2 * y - 1, 1e-6, None)
    slope, intercept = np.polyfit(d, np.log(z), 1)
    p0 = [max(min(0.5 * (1 - np.exp(slope)), 0.49), 1e-7), max(min(0.5 * (1 - np.exp(intercept)), 0.49), -0.49)]
    fit = weighted_fit(rb_model, d, y, p0, ("eps_gate", "eps_spam"), "rb", sigma, sigma_floor)
    fit.extra["fidelity"] = {"value": 1 - fit["eps_gate"], "sigma": fit.sigma("eps_gate")}
    return fit

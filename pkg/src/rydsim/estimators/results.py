from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from ..errors import FitError


class Estimate(NamedTuple):
    """A value with its 1-sigma uncertainty."""

    value: float
    sigma: float = 0.0

    def __format__(self, spec):
        return f"{format(self.value, spec)} +/- {format(self.sigma, spec)}"


def as_estimate(x) -> Estimate:
    if isinstance(x, Estimate):
        return x
    if isinstance(x, tuple) and len(x) == 2:
        return Estimate(float(x[0]), float(x[1]))
    return Estimate(float(x), 0.0)


def linear_sigma(gradient: Sequence[float], sigmas: Sequence[float]) -> float:
    """First-order propagated uncertainty for independent inputs."""
    return float(math.sqrt(sum((g * s) ** 2 for g, s in zip(gradient, sigmas))))


@dataclass
class FitResult:
    """Parameter estimates of a least-squares fit.

    ``residual_norm`` is ``sqrt(chi^2)`` for weighted fits and the plain
    residual 2-norm otherwise.
    """

    model: str
    names: tuple
    values: np.ndarray
    sigmas: np.ndarray
    residual_norm: float
    converged: bool
    n_points: int
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.sigmas[self.names.index(name)])

    def estimate(self, name: str) -> Estimate:
        return Estimate(self[name], self.sigma(name))

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "converged": self.converged,
            "residual_norm": self.residual_norm,
            "n_points": self.n_points,
            "parameters": {n: {"value": float(v), "sigma": float(s)}
                           for n, v, s in zip(self.names, self.values, self.sigmas)},
        }
        out.update(self.extra)
        return out


def weighted_fit(
    model: Callable,
    x: np.ndarray,
    y: np.ndarray,
    p0: Sequence[float],
    names: Sequence[str],
    tag: str,
    sigma: Optional[np.ndarray] = None,
    sigma_floor: float = 1e-6,
    bounds=(-np.inf, np.inf),
) -> FitResult:
    """``scipy.optimize.curve_fit`` with inverse-variance weights and a sigma floor.

    With ``sigma`` the covariance is absolute; without it, it is scaled by
    the reduced chi-square as usual.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if sigma is not None:
        sigma = np.maximum(np.asarray(sigma, dtype=float), sigma_floor)
    if len(x) <= len(p0):
        raise FitError(f"{tag}: {len(x)} points cannot constrain {len(p0)} parameters")
    try:
        with warnings.catch_warnings():
            # handled below: an exact unweighted fit has zero residual variance
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(
                model, x, y, p0=p0, sigma=sigma, absolute_sigma=sigma is not None,
                bounds=bounds, maxfev=20000,
            )
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"{tag} fit failed: {exc}") from exc
    resid = y - model(x, *popt)
    if sigma is not None:
        resid = resid / sigma
    perr = np.sqrt(np.clip(np.diag(pcov), 0, None))
    if sigma is None and np.linalg.norm(resid) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        perr = np.zeros_like(perr)
    converged = bool(np.all(np.isfinite(perr)))
    return FitResult(tag, tuple(names), np.asarray(popt, dtype=float), perr,
                     float(np.linalg.norm(resid)), converged, len(x))

"""Synthetic panels with predictable returns and lower-tail dependence.

Data-generating process
-----------------------
State variables follow independent stationary AR(1) recursions

    M_{t} = phi * M_{t-1} + eps_t,      phi in (0.2, 0.9),  eps ~ N(0, 1),

initialized at their stationary law.  Returns are linear in the lagged state
plus a shock with a two-regime mixture structure:

    R_{i,t} = b_i' M_{t-1} + sigma_i eta_{i,t} - J_t * s * zeta_i * |g_t|,

where ``eta`` is i.i.d. standard normal per asset, ``J_t`` is a Bernoulli
tail event with probability ``tail_prob``, ``g_t`` a standard normal crash
magnitude shared by all assets, ``zeta_i`` fixed positive exposures, and
``s = tail_strength * idio_vol``.  The joint downside term makes co-crash
probabilities exceed the product of marginal crash probabilities, so pairwise
tail spillovers are nonzero by construction; at ``tail_strength = 0`` the
shocks are cross-sectionally independent given the state variables and all
spillovers vanish.  All draws come from one seeded generator in a fixed
order, so a spec maps to exactly one panel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import ReturnPanel, default_timestamps
from .errors import DimensionError, DomainError

__all__ = ["SimulationSpec", "generate"]


@dataclass(frozen=True)
class SimulationSpec:
    """Dimensions, seed, and dependence knobs for one synthetic panel."""

    n_assets: int = 40
    n_predictors: int = 7
    horizon: int = 500
    seed: int = 0
    factor_loading_scale: float = 0.5
    idio_vol: float = 0.02
    tail_strength: float = 1.0
    tail_prob: float = 0.05

    def __post_init__(self):
        if self.n_assets < 2:
            raise DimensionError("need at least 2 assets")
        if self.n_predictors < 1:
            raise DimensionError("need at least 1 state variable")
        if self.horizon <= self.n_assets + self.n_predictors:
            raise DimensionError(
                f"horizon {self.horizon} too short for {self.n_assets} assets "
                f"and {self.n_predictors} state variables"
            )
        if self.idio_vol <= 0.0:
            raise DomainError("idio_vol must be positive")
        if self.factor_loading_scale < 0.0:
            raise DomainError("factor_loading_scale must be nonnegative")
        if self.tail_strength < 0.0:
            raise DomainError("tail_strength must be nonnegative")
        if not 0.0 <= self.tail_prob < 1.0:
            raise DomainError("tail_prob must lie in [0, 1)")


def generate(spec: SimulationSpec) -> tuple[ReturnPanel, np.ndarray]:
    """Draw one panel and its state-variable matrix from the mixture process.

    Returns
    -------
    (ReturnPanel, ndarray)
        A panel of shape ``(horizon, n_assets)`` and the aligned state
        variables of shape ``(horizon, n_predictors)``.  Identical specs
        yield identical output, bit for bit.
    """
    rng = np.random.default_rng(spec.seed)
    t, n, m = spec.horizon, spec.n_assets, spec.n_predictors

    phi = rng.uniform(0.2, 0.9, size=m)
    loadings = rng.normal(
        0.0, spec.factor_loading_scale * spec.idio_vol / np.sqrt(m), size=(n, m)
    )
    exposures = rng.uniform(0.5, 1.5, size=n)

    macros = np.empty((t, m))
    macros[0] = rng.standard_normal(m) / np.sqrt(1.0 - phi * phi)
    innovations = rng.standard_normal((t - 1, m))
    for row in range(1, t):
        macros[row] = phi * macros[row - 1] + innovations[row - 1]

    noise = rng.standard_normal((t, n))
    tail_events = rng.random(t) < spec.tail_prob
    crash_size = np.abs(rng.standard_normal(t))

    returns = np.empty((t, n))
    returns[0] = spec.idio_vol * noise[0]
    returns[1:] = macros[:-1] @ loadings.T + spec.idio_vol * noise[1:]
    crash = spec.tail_strength * spec.idio_vol * (tail_events * crash_size)
    returns -= crash[:, None] * exposures[None, :]

    panel = ReturnPanel.from_array(returns, timestamps=default_timestamps(t))
    return panel, macros

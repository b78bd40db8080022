"""Market primitives: deterministic coefficient curves and preferences.

The market consists of one risk-free asset with rate ``r(t)`` and ``M``
risky assets with drift vector ``mu(t)`` and volatility matrix
``sigma(t)`` (rows are per-asset volatility loadings).  Curves are
either constants or piecewise-linear tables over a uniform time grid;
evaluation between nodes interpolates linearly.

Derived quantities cached at every grid node:

* excess return ``beta = mu - r * 1``
* Gram matrix ``Sigma = sigma' sigma`` (must be symmetric positive
  definite), and its inverse
* squared market price of risk ``theta = beta' Sigma^{-1} beta``
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    NonPositiveHorizon,
    OutOfHorizon,
    SingularGram,
)

DEFAULT_NUM_STEPS = 2000


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``num_steps + 1`` nodes spanning ``[0, horizon]``."""

    horizon: float
    num_steps: int = DEFAULT_NUM_STEPS
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon <= 0.0:
            raise NonPositiveHorizon(f"horizon must be positive, got {self.horizon}")
        if self.num_steps < 1:
            raise ConfigError(f"num_steps must be >= 1, got {self.num_steps}")
        nodes = np.linspace(0.0, float(self.horizon), self.num_steps + 1)
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @property
    def dt(self) -> float:
        return self.horizon / self.num_steps

    def half_times(self) -> np.ndarray:
        """Nodes plus midpoints: ``2 * num_steps + 1`` points."""
        return np.linspace(0.0, self.horizon, 2 * self.num_steps + 1)

    def same_nodes(self, other: "TimeGrid") -> bool:
        return self.num_steps == other.num_steps and self.horizon == other.horizon


@dataclass(frozen=True)
class Preferences:
    """Risk aversion, skewness preference, and ambiguity aversion.

    The induced wealth-dependent coefficients are ``gamma0 / w`` for
    risk aversion and ``phi0 / w**2`` for skewness preference, both
    positive and decreasing in wealth.
    """

    gamma0: float
    phi0: float = 0.0
    xi: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.gamma0) or self.gamma0 <= 0.0:
            raise ConfigError(f"gamma0 must be positive, got {self.gamma0}")
        if not np.isfinite(self.phi0) or self.phi0 < 0.0:
            raise ConfigError(f"phi0 must be nonnegative, got {self.phi0}")
        if not np.isfinite(self.xi) or self.xi < 0.0:
            raise ConfigError(f"xi must be nonnegative, got {self.xi}")

    def risk_aversion_at(self, w: float) -> float:
        return self.gamma0 / w

    def skew_preference_at(self, w: float) -> float:
        return self.phi0 / (w * w)


def _as_node_curve(value, grid: TimeGrid, shape: tuple, name: str) -> np.ndarray:
    """Broadcast a constant or per-node table to shape (N+1, *shape)."""
    n = grid.num_steps + 1
    arr = np.asarray(value, dtype=float)
    if arr.shape == shape:
        out = np.broadcast_to(arr, (n, *shape)).copy()
    elif arr.shape == (n, *shape):
        out = arr.copy()
    else:
        raise ConfigError(
            f"{name} must have shape {shape} (constant) or {(n, *shape)} "
            f"(per-node table), got {arr.shape}"
        )
    if not np.all(np.isfinite(out)):
        raise ConfigError(f"{name} contains non-finite values")
    return out


@dataclass(frozen=True)
class MarketCurves:
    """Validated market curves with derived quantities cached per node.

    Construct through :func:`build_market`; the constructor assumes the
    node arrays are already consistent.
    """

    num_assets: int
    horizon: float
    grid: TimeGrid
    risk_free_nodes: np.ndarray    # (N+1,)
    drift_nodes: np.ndarray        # (N+1, M)
    volatility_nodes: np.ndarray   # (N+1, M, M)
    excess_nodes: np.ndarray       # (N+1, M)
    gram_nodes: np.ndarray         # (N+1, M, M)
    gram_inv_nodes: np.ndarray     # (N+1, M, M)
    theta_nodes: np.ndarray        # (N+1,)

    def __post_init__(self):
        for name in (
            "risk_free_nodes", "drift_nodes", "volatility_nodes",
            "excess_nodes", "gram_nodes", "gram_inv_nodes", "theta_nodes",
        ):
            getattr(self, name).flags.writeable = False

    # -- interpolation ------------------------------------------------

    def _check_time(self, t) -> None:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.horizon):
            raise OutOfHorizon(f"time {t} outside [0, {self.horizon}]")

    def _locate(self, t: float) -> tuple[int, float]:
        """Index of the left node and the interpolation weight."""
        x = t / self.grid.dt
        k = min(int(x), self.grid.num_steps - 1)
        return k, x - k

    def risk_free_at(self, t):
        self._check_time(t)
        return np.interp(t, self.grid.nodes, self.risk_free_nodes)

    def drift_at(self, t: float) -> np.ndarray:
        self._check_time(t)
        k, w = self._locate(float(t))
        return (1.0 - w) * self.drift_nodes[k] + w * self.drift_nodes[k + 1]

    def volatility_at(self, t: float) -> np.ndarray:
        self._check_time(t)
        k, w = self._locate(float(t))
        return (1.0 - w) * self.volatility_nodes[k] + w * self.volatility_nodes[k + 1]

    def excess_at(self, t: float) -> np.ndarray:
        self._check_time(t)
        k, w = self._locate(float(t))
        return (1.0 - w) * self.excess_nodes[k] + w * self.excess_nodes[k + 1]

    def gram_at(self, t: float) -> np.ndarray:
        self._check_time(t)
        k, w = self._locate(float(t))
        return (1.0 - w) * self.gram_nodes[k] + w * self.gram_nodes[k + 1]

    def gram_solve(self, t: float, rhs: np.ndarray) -> np.ndarray:
        """Solve ``Sigma(t) x = rhs`` at interpolated Sigma."""
        return np.linalg.solve(self.gram_at(t), rhs)

    def theta_at(self, t):
        """``beta(t)' Sigma(t)^{-1} beta(t)`` at interpolated curves.

        Accepts a scalar or an array of times.
        """
        self._check_time(t)
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        if self.num_assets == 1:
            beta = np.interp(ts, self.grid.nodes, self.excess_nodes[:, 0])
            gram = np.interp(ts, self.grid.nodes, self.gram_nodes[:, 0, 0])
            out = beta * beta / gram
        else:
            out = np.empty_like(ts)
            for i, ti in enumerate(ts):
                beta = self.excess_at(ti)
                out[i] = float(beta @ self.gram_solve(ti, beta))
        return float(out[0]) if np.isscalar(t) or np.ndim(t) == 0 else out


def build_market(
    horizon: float,
    risk_free,
    drift,
    volatility,
    num_steps: int = DEFAULT_NUM_STEPS,
    grid: TimeGrid | None = None,
) -> MarketCurves:
    """Validate inputs, derive cached quantities, and return the market.

    ``drift`` may be a scalar (one asset), an ``(M,)`` vector, or an
    ``(N+1, M)`` table.  ``volatility`` may be a scalar, an ``(M,)``
    vector of per-asset volatilities (diagonal matrix), an ``(M, M)``
    matrix, or an ``(N+1, M, M)`` table.

    Raises ``NonPositiveHorizon`` for ``horizon <= 0`` and
    ``SingularGram`` if ``sigma' sigma`` fails a Cholesky factorization
    at any node.
    """
    if grid is None:
        grid = TimeGrid(horizon, num_steps)
    elif grid.horizon != horizon:
        raise ConfigError("grid horizon does not match market horizon")
    n = grid.num_steps + 1

    mu = np.asarray(drift, dtype=float)
    if mu.ndim == 0:
        mu = mu.reshape(1)
    # A 1-D drift is a constant M-vector; per-node tables must be (N+1, M).
    num_assets = mu.shape[-1]
    mu_nodes = _as_node_curve(mu, grid, (num_assets,), "drift")

    sig = np.asarray(volatility, dtype=float)
    if sig.ndim == 0:
        if num_assets != 1:
            raise ConfigError("scalar volatility requires a single asset")
        sig = sig.reshape(1, 1)
    elif sig.ndim == 1:
        if sig.shape[0] != num_assets:
            raise ConfigError(
                f"volatility vector length {sig.shape[0]} != num_assets {num_assets}"
            )
        sig = np.diag(sig)
    vol_nodes = _as_node_curve(sig, grid, (num_assets, num_assets), "volatility")

    r_nodes = _as_node_curve(risk_free, grid, (), "risk_free")

    excess = mu_nodes - r_nodes[:, None]
    gram = np.einsum("tji,tjk->tik", vol_nodes, vol_nodes)
    gram = 0.5 * (gram + np.transpose(gram, (0, 2, 1)))  # enforce exact symmetry

    gram_inv = np.empty_like(gram)
    theta = np.empty(n)
    for k in range(n):
        try:
            np.linalg.cholesky(gram[k])
            gram_inv[k] = np.linalg.inv(gram[k])
        except np.linalg.LinAlgError:
            raise SingularGram(
                f"Gram matrix singular or not positive definite at node {k} "
                f"(t = {grid.nodes[k]:g})"
            ) from None
        theta[k] = float(excess[k] @ gram_inv[k] @ excess[k])

    return MarketCurves(
        num_assets=num_assets,
        horizon=float(horizon),
        grid=grid,
        risk_free_nodes=r_nodes,
        drift_nodes=mu_nodes,
        volatility_nodes=vol_nodes,
        excess_nodes=excess,
        gram_nodes=gram,
        gram_inv_nodes=gram_inv,
        theta_nodes=theta,
    )

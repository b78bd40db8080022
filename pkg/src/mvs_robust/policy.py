"""Strategies, distortions, value functions, and utility losses.

All quantities here are assembled from solved coefficient tables.  The
equilibrium allocation is linear in wealth, the Girsanov distortion is
wealth-free, and every value function is a time coefficient times
wealth, so the three utility-loss ratios are wealth-independent.

Coefficient values between grid nodes come from cubic interpolation of
the solved arrays, matching the integrator's order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NonPositiveWealth, OutOfHorizon, ZeroDenominatorValue
from .market import MarketCurves
from .solver import CoefficientTable, MispecTable, SolvedModel


def _check_time(table, t: float) -> None:
    if t < 0.0 or t > table.grid.horizon:
        raise OutOfHorizon(f"time {t} outside [0, {table.grid.horizon}]")


def coefficients_at(table: CoefficientTable, t: float) -> tuple[float, ...]:
    """(f, h1, h2, h3, g1, k1) interpolated at time t."""
    _check_time(table, t)
    x = table.grid.nodes
    return tuple(
        float(CubicSpline(x, arr)(t))
        for arr in (table.f, table.h1, table.h2, table.h3, table.g1, table.k1)
    )


@dataclass(frozen=True)
class PolicyPoint:
    """Equilibrium strategy and sensitivity aggregates at one (t, w)."""

    time: float
    wealth: float
    allocation: np.ndarray   # money in each risky asset
    distortion: np.ndarray   # Girsanov drift adjustment, wealth-free
    delta1: float
    delta2: float
    delta3: float
    ambiguity_pref: float    # -delta2 / delta1**2


def equilibrium_policy(
    table: CoefficientTable,
    market: MarketCurves,
    t: float,
    w: float,
) -> PolicyPoint:
    """Evaluate the equilibrium control-measure pair at (t, w).

    The allocation is ``w / (xi + 1) * Sigma^{-1} beta * f(t)`` and the
    distortion is ``-xi / (xi + 1) * sigma' Sigma^{-1} beta``.  The
    sensitivity aggregates are assembled term by term from the solved
    coefficients (not through ``f``), so the identities
    ``delta1 = f * delta3`` and ``delta3 = -w * delta2`` are genuine
    cross-checks of the solution rather than restatements.
    """
    if w <= 0.0:
        raise NonPositiveWealth(f"wealth must be positive, got {w}")
    _check_time(table, t)
    f, h1, h2, h3, g1, k1 = coefficients_at(table, t)
    g0, p0, xi = table.gamma0, table.phi0, table.xi

    beta = market.excess_at(t)
    sig = market.volatility_at(t)
    gram_inv_beta = market.gram_solve(t, beta)
    allocation = (w / (xi + 1.0)) * gram_inv_beta * f
    distortion = -(xi / (xi + 1.0)) * (sig.T @ gram_inv_beta)

    delta1 = (
        h1 - g0 * h2 + p0 * h3
        + (g0 * g1 + 2.0 * p0 * g1 * g1) * g1
        - p0 * k1 * g1
        - 2.0 * p0 * g1 * k1
    )
    delta2 = (-g0 * h2 + 2.0 * p0 * h3) / w - 2.0 * p0 * g1 * k1 / w
    delta3 = g0 * h2 + 2.0 * p0 * (g1 * k1 - h3)
    ambiguity_pref = -delta2 / (delta1 * delta1)

    return PolicyPoint(
        time=t, wealth=w, allocation=allocation, distortion=distortion,
        delta1=delta1, delta2=delta2, delta3=delta3,
        ambiguity_pref=ambiguity_pref,
    )


def value_bracket(table: CoefficientTable, t: float) -> float:
    """Coefficient multiplying wealth in the variant's value function."""
    f, h1, h2, h3, g1, k1 = coefficients_at(table, t)
    g0, p0 = table.gamma0, table.phi0
    return (
        h1 - 0.5 * g0 * (h2 - g1 * g1)
        + p0 / 3.0 * (2.0 * g1 ** 3 - 3.0 * g1 * h2 + h3)
    )


def mispec_value_bracket(table: MispecTable, t: float) -> float:
    """Coefficient multiplying wealth in a misspecified-strategy value."""
    _check_time(table, t)
    x = table.grid.nodes
    a1, a2, a3, b1 = (
        float(CubicSpline(x, arr)(t))
        for arr in (table.a1, table.a2, table.a3, table.b1)
    )
    g0, p0 = table.gamma0, table.phi0
    return (
        a1 - 0.5 * g0 * (a2 - b1 * b1)
        + p0 / 3.0 * (2.0 * b1 ** 3 - 3.0 * b1 * a2 + a3)
    )


@dataclass(frozen=True)
class ValueReport:
    """All six value functions and the three loss ratios at one (t, w)."""

    time: float
    wealth: float
    value_full: float
    value_neutral: float
    value_noskew: float
    value_basic: float
    value_mispec_u: float
    value_mispec_both: float
    loss_skew: float          # 1 - value_noskew / value_full
    loss_uncertainty: float   # 1 - value_mispec_u / value_full
    loss_both: float          # 1 - value_mispec_both / value_full


def value_at(model: SolvedModel, t: float, w: float) -> ValueReport:
    """Assemble every value function and loss ratio at (t, w).

    Losses are formed from the wealth-free brackets, so they are
    independent of ``w`` by construction.
    """
    if w <= 0.0:
        raise NonPositiveWealth(f"wealth must be positive, got {w}")
    b_full = value_bracket(model.full, t)
    b_neutral = value_bracket(model.neutral, t)
    b_noskew = value_bracket(model.noskew, t)
    b_basic = value_bracket(model.basic, t)
    b_mu = mispec_value_bracket(model.mispec_u, t)
    b_mb = mispec_value_bracket(model.mispec_both, t)
    if b_full == 0.0:
        raise ZeroDenominatorValue(f"value function vanishes at t = {t}")
    return ValueReport(
        time=t, wealth=w,
        value_full=b_full * w,
        value_neutral=b_neutral * w,
        value_noskew=b_noskew * w,
        value_basic=b_basic * w,
        value_mispec_u=b_mu * w,
        value_mispec_both=b_mb * w,
        loss_skew=1.0 - b_noskew / b_full,
        loss_uncertainty=1.0 - b_mu / b_full,
        loss_both=1.0 - b_mb / b_full,
    )


@dataclass(frozen=True)
class Delta3Report:
    """Grid minimum of the positivity quantity delta3."""

    min_value: float
    argmin_time: float
    all_positive: bool


def delta3_scan(table: CoefficientTable) -> Delta3Report:
    """Report the grid minimum of delta3 and whether it stays positive."""
    idx = int(np.argmin(table.delta3))
    mn = float(table.delta3[idx])
    return Delta3Report(
        min_value=mn,
        argmin_time=float(table.grid.nodes[idx]),
        all_positive=bool(mn > 0.0),
    )

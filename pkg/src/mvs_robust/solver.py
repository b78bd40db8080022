"""Backward coefficient systems and their fixed-point oracle.

Everything the policy, value, and simulation layers consume is a table
of time functions solved backward from the horizon:

* ``solve_system`` integrates the differential-algebraic system for
  ``(h1, h2, h3, g1, k1)`` with classical RK4, evaluating the ratio
  function ``f`` algebraically from the state inside every stage.  The
  four model variants (full robust, ambiguity-neutral, no-skewness,
  basic) are exact termwise reductions of one another obtained by
  zeroing the ambiguity weight and/or the skewness weight, so a single
  integrator serves all of them.

* ``solve_f_picard`` solves the equivalent integral equation for ``f``
  by damped fixed-point iteration on the same grid (trapezoid
  quadrature), backed by a backward-continuation fallback for
  parameter sets where the plain iteration is not contractive.  It is
  an independent numerical route to the same unique solution and is
  used as an oracle for ``solve_system``.

* ``solve_mispec_system`` solves the analogous backward system for the
  value of an investor who follows a pre-specified naive strategy
  (ignoring model uncertainty, or both uncertainty and skewness) while
  nature still distorts the measure.

The denominator of the algebraic ratio equals ``gamma0`` at the
terminal time and must stay positive for the backward solution to
exist; the integrators raise ``DegenerateDenominator`` as soon as it
falls below the guard ``eps_den``, which includes the genuine
blow-up case where it would cross zero inside the horizon.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    ConfigError,
    DegenerateDenominator,
    NoConvergence,
    NonFiniteState,
    UnsolvedTable,
)
from .market import MarketCurves, Preferences, TimeGrid

DEFAULT_EPS_DEN = 1e-12
DEFAULT_PICARD_TOL = 1e-10
DEFAULT_PICARD_MAX_ITER = 500


class ModelVariant(enum.Enum):
    """Which reduction of the full robust model a table solves."""

    FULL = "full"
    AMBIGUITY_NEUTRAL = "neutral"
    NO_SKEW = "noskew"
    BASIC = "basic"

    def effective(self, prefs: Preferences) -> tuple[float, float, float]:
        """(gamma0, phi0, xi) actually used by this variant."""
        phi0 = 0.0 if self in (ModelVariant.NO_SKEW, ModelVariant.BASIC) else prefs.phi0
        xi = 0.0 if self in (ModelVariant.AMBIGUITY_NEUTRAL, ModelVariant.BASIC) else prefs.xi
        return prefs.gamma0, phi0, xi


class MispecKind(enum.Enum):
    """Which naive strategy drives a misspecified-value system."""

    IGNORE_UNCERTAINTY = "ignore_uncertainty"
    IGNORE_BOTH = "ignore_both"

    @property
    def driver_variant(self) -> ModelVariant:
        if self is MispecKind.IGNORE_UNCERTAINTY:
            return ModelVariant.AMBIGUITY_NEUTRAL
        return ModelVariant.BASIC


def _frozen_array(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CoefficientTable:
    """Solved grid functions for one model variant.

    ``gamma0``, ``phi0``, ``xi`` are the variant's effective values
    (zeroed where the variant demands it), so every downstream formula
    can be written once against the full model.  ``k1`` duplicates
    ``h2`` by construction and is stored for the identity check.
    """

    variant: ModelVariant
    grid: TimeGrid
    gamma0: float
    phi0: float
    xi: float
    f: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    g1: np.ndarray
    k1: np.ndarray
    delta3: np.ndarray

    def __post_init__(self):
        for name in ("f", "h1", "h2", "h3", "g1", "k1", "delta3"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))


@dataclass(frozen=True)
class MispecTable:
    """Solved grid functions for a misspecified-strategy value system."""

    kind: MispecKind
    grid: TimeGrid
    gamma0: float
    phi0: float
    xi: float
    driver_f: np.ndarray
    a: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    b1: np.ndarray
    c1: np.ndarray

    def __post_init__(self):
        for name in ("driver_f", "a", "a1", "a2", "a3", "b1", "c1"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))


def _half_grid_rates(market: MarketCurves, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Risk-free rate and theta on nodes plus midpoints (2N+1 points)."""
    times = grid.half_times()
    r = np.asarray(market.risk_free_at(times), dtype=float)
    theta = np.asarray(market.theta_at(times), dtype=float)
    return r, theta


def _integrate_variant(
    r_half: np.ndarray,
    th_half: np.ndarray,
    gamma0: float,
    phi0: float,
    xi: float,
    grid: TimeGrid,
    eps_den: float,
) -> tuple[np.ndarray, ...]:
    """Backward RK4 for (h1, h2, h3, g1, k1); f algebraic at each stage."""
    n = grid.num_steps
    dt = grid.dt
    c = 1.0 / ((xi + 1.0) * (xi + 1.0))
    pen_c = 0.5 * xi * c
    g0, p0 = gamma0, phi0

    f = np.empty(n + 1)
    out = np.empty((5, n + 1))

    def rhs(ri, ti, y1, y2, y3, y4, y5):
        den = g0 * y2 + 2.0 * p0 * (y4 * y5 - y3)
        if den < eps_den:
            raise DegenerateDenominator(
                f"coefficient denominator {den:.3e} below guard {eps_den:g}"
            )
        fv = (y1 + g0 * (y4 * y4 - y2) + p0 * (y3 + 2.0 * y4 ** 3 - 3.0 * y4 * y5)) / den
        a = ri + ti * fv * c
        b = 2.0 * ri + (2.0 * ti * fv + ti * fv * fv) * c
        d = 3.0 * (ri + (ti * fv + ti * fv * fv) * c)
        pen = pen_c * ti * fv * fv * den
        return -(a * y1 + pen), -b * y2, -d * y3, -a * y4, -b * y5, fv

    y1 = y2 = y3 = y4 = y5 = 1.0
    h = -dt
    *_, fv = rhs(r_half[2 * n], th_half[2 * n], y1, y2, y3, y4, y5)
    f[n] = fv
    out[:, n] = (y1, y2, y3, y4, y5)

    for k in range(n, 0, -1):
        r1, t1 = r_half[2 * k], th_half[2 * k]
        rm, tm = r_half[2 * k - 1], th_half[2 * k - 1]
        r0, t0 = r_half[2 * k - 2], th_half[2 * k - 2]
        a1, a2, a3, a4, a5, _ = rhs(r1, t1, y1, y2, y3, y4, y5)
        b1, b2, b3, b4, b5, _ = rhs(
            rm, tm,
            y1 + 0.5 * h * a1, y2 + 0.5 * h * a2, y3 + 0.5 * h * a3,
            y4 + 0.5 * h * a4, y5 + 0.5 * h * a5,
        )
        c1, c2, c3, c4, c5, _ = rhs(
            rm, tm,
            y1 + 0.5 * h * b1, y2 + 0.5 * h * b2, y3 + 0.5 * h * b3,
            y4 + 0.5 * h * b4, y5 + 0.5 * h * b5,
        )
        d1, d2, d3, d4, d5, _ = rhs(
            r0, t0,
            y1 + h * c1, y2 + h * c2, y3 + h * c3, y4 + h * c4, y5 + h * c5,
        )
        y1 += h / 6.0 * (a1 + 2.0 * (b1 + c1) + d1)
        y2 += h / 6.0 * (a2 + 2.0 * (b2 + c2) + d2)
        y3 += h / 6.0 * (a3 + 2.0 * (b3 + c3) + d3)
        y4 += h / 6.0 * (a4 + 2.0 * (b4 + c4) + d4)
        y5 += h / 6.0 * (a5 + 2.0 * (b5 + c5) + d5)
        if not (
            math.isfinite(y1) and math.isfinite(y2) and math.isfinite(y3)
            and math.isfinite(y4) and math.isfinite(y5)
        ):
            raise NonFiniteState(f"state non-finite at node {k - 1}")
        *_, fv = rhs(r0, t0, y1, y2, y3, y4, y5)
        f[k - 1] = fv
        out[:, k - 1] = (y1, y2, y3, y4, y5)

    return f, out[0], out[1], out[2], out[3], out[4]


def solve_system(
    market: MarketCurves,
    prefs: Preferences,
    grid: TimeGrid,
    variant: ModelVariant = ModelVariant.FULL,
    eps_den: float = DEFAULT_EPS_DEN,
) -> CoefficientTable:
    """Solve the backward coefficient system for one model variant.

    Terminal conditions are exact: all five coefficients equal 1 and
    ``f`` equals ``1 / gamma0`` at the horizon.
    """
    gamma0, phi0, xi = variant.effective(prefs)
    r_half, th_half = _half_grid_rates(market, grid)
    f, h1, h2, h3, g1, k1 = _integrate_variant(
        r_half, th_half, gamma0, phi0, xi, grid, eps_den
    )
    delta3 = gamma0 * h2 + 2.0 * phi0 * (g1 * k1 - h3)
    return CoefficientTable(
        variant=variant, grid=grid, gamma0=gamma0, phi0=phi0, xi=xi,
        f=f, h1=h1, h2=h2, h3=h3, g1=g1, k1=k1, delta3=delta3,
    )


# ---------------------------------------------------------------------------
# Fixed-point route for f
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PicardInfo:
    iterations: int
    mode: str  # "global" or "continuation"


def _reverse_cumtrapz(g: np.ndarray, dt: float) -> np.ndarray:
    """out[i] = trapezoid integral of g from node i to the last node."""
    inc = 0.5 * dt * (g[:-1] + g[1:])
    out = np.empty_like(g)
    out[-1] = 0.0
    out[:-1] = np.cumsum(inc[::-1])[::-1]
    return out


def solve_f_picard(
    market: MarketCurves,
    prefs: Preferences,
    grid: TimeGrid,
    tol: float = DEFAULT_PICARD_TOL,
    max_iter: int = DEFAULT_PICARD_MAX_ITER,
    eps_den: float = DEFAULT_EPS_DEN,
    f0: np.ndarray | None = None,
    full_output: bool = False,
):
    """Solve the integral equation for ``f`` by damped fixed-point iteration.

    The map rebuilds the exponential coefficient representations from
    the current iterate with trapezoid quadrature on the grid and
    returns the implied ratio function.  Iteration starts from the
    constant terminal value ``1 / gamma0`` (or ``f0``), halving the
    step weight whenever the sup-norm residual grows.  If the global
    iteration stalls, the solver falls back to backward continuation:
    the map only propagates information backward in time, so the fixed
    point is converged tail-segment by tail-segment, which succeeds
    whenever the solution exists on the grid.
    """
    if tol <= 0.0:
        raise ConfigError(f"tol must be positive, got {tol}")
    gamma0, phi0, xi = prefs.gamma0, prefs.phi0, prefs.xi
    n = grid.num_steps
    dt = grid.dt
    c = 1.0 / ((xi + 1.0) * (xi + 1.0))
    nodes = grid.nodes
    rr = np.asarray(market.risk_free_at(nodes), dtype=float)
    th = np.asarray(market.theta_at(nodes), dtype=float)
    f_init = (
        np.full(n + 1, 1.0 / gamma0) if f0 is None
        else np.asarray(f0, dtype=float).copy()
    )
    if f_init.shape != (n + 1,):
        raise ConfigError(f"f0 must have shape {(n + 1,)}, got {f_init.shape}")
    f_cap = max(6.0, 4.0 / gamma0)

    def apply_map(fa: np.ndarray, j: int) -> tuple[np.ndarray | None, bool]:
        """One sweep of the map on nodes j..N.

        Returns (new tail, degenerate flag); the tail is None when the
        iterate left the valid set, with the flag marking a denominator
        below the guard (as opposed to a plain overflow).
        """
        fc = np.clip(fa, -f_cap, f_cap)
        thj, rrj = th[j:], rr[j:]
        rate_g = rrj + thj * fc * c
        rate_h2 = 2.0 * rrj + (2.0 * thj * fc + thj * fc * fc) * c
        rate_h3 = 3.0 * (rrj + (thj * fc + thj * fc * fc) * c)
        g1 = np.exp(_reverse_cumtrapz(rate_g, dt))
        h2 = np.exp(_reverse_cumtrapz(rate_h2, dt))
        h3 = np.exp(_reverse_cumtrapz(rate_h3, dt))
        den = gamma0 * h2 + 2.0 * phi0 * (g1 * h2 - h3)
        if not np.all(np.isfinite(den)):
            return None, False
        if np.min(den) < eps_den:
            return None, True
        q = 0.5 * xi * c * thj * fc * fc * den
        h1 = g1 * (1.0 + _reverse_cumtrapz(q / g1, dt))
        fn = (
            h1 + gamma0 * (g1 * g1 - h2)
            + phi0 * (h3 + 2.0 * g1 ** 3 - 3.0 * g1 * h2)
        ) / den
        return (fn, False) if np.all(np.isfinite(fn)) else (None, False)

    total = 0  # map evaluations across both phases, capped by max_iter

    # Global damped iteration; sufficient for all but strongly
    # non-contractive parameter sets.
    f = f_init.copy()
    lam = 1.0
    prev_res = np.inf
    budget_global = max(1, max_iter // 2) if max_iter > 1 else max_iter
    while total < budget_global:
        fn, _ = apply_map(f, 0)
        total += 1
        if fn is None:
            break
        res = float(np.max(np.abs(fn - f)))
        if res < tol and np.max(np.abs(fn)) < 0.99 * f_cap:
            return (fn, PicardInfo(total, "global")) if full_output else fn
        if res > prev_res:
            lam = max(0.5 * lam, 2.0 ** -6)
        f = f + lam * (fn - f)
        prev_res = res
        if total > 60 and lam <= 2.0 ** -6:
            break

    # Backward continuation: converge the fixed point on growing tail
    # segments [t_j, T]; values on an already-converged tail are fixed
    # points of the restricted map and do not move.
    f = f_init.copy()
    i = n
    seg = max(1, n // 20)
    while i > 0:
        j = max(0, i - seg)
        tail = f[j:].copy()
        converged = False
        degenerate = False
        stage_evals = 0
        while stage_evals < 80 and total < max_iter:
            fn, degenerate = apply_map(tail, j)
            total += 1
            stage_evals += 1
            if fn is None:
                break
            res = float(np.max(np.abs(fn - tail)))
            tail = fn
            if res < tol:
                converged = True
                break
        if converged:
            f[j:] = tail
            i = j
        elif seg == 1 and degenerate:
            # the tail beyond this node is converged, so the map itself
            # degenerates here: no valid solution extends past t_j
            raise DegenerateDenominator(
                f"fixed-point denominator below guard {eps_den:g} extending "
                f"to node {j} (t = {nodes[j]:g})"
            )
        elif seg > 1 and total < max_iter:
            seg = max(1, seg // 2)
        else:
            raise NoConvergence(
                f"fixed-point iteration stalled at node {i} "
                f"(t = {nodes[i]:g}) after {total} map evaluations"
            )
    return (f, PicardInfo(total, "continuation")) if full_output else f


# ---------------------------------------------------------------------------
# Misspecified-strategy value systems
# ---------------------------------------------------------------------------

def solve_mispec_system(
    market: MarketCurves,
    prefs: Preferences,
    grid: TimeGrid,
    kind: MispecKind,
    eps_den: float = DEFAULT_EPS_DEN,
    driver: CoefficientTable | None = None,
) -> MispecTable:
    """Solve the backward value system under a pre-specified naive strategy.

    The driver curve is the naive strategy's own ratio function (from
    the ambiguity-neutral table for ``IGNORE_UNCERTAINTY``, from the
    basic table for ``IGNORE_BOTH``), interpolated with a cubic spline
    at the RK4 stage times.  The investor's true ambiguity weight
    ``xi`` enters the distorted dynamics; the skewness weight is kept
    for ``IGNORE_UNCERTAINTY`` and dropped for ``IGNORE_BOTH``.
    """
    if driver is None:
        driver = solve_system(market, prefs, grid, kind.driver_variant, eps_den)
    elif driver.variant is not kind.driver_variant:
        raise UnsolvedTable(
            f"driver table variant {driver.variant} does not match {kind}"
        )
    gamma0 = prefs.gamma0
    phi0 = prefs.phi0 if kind is MispecKind.IGNORE_UNCERTAINTY else 0.0
    xi = prefs.xi

    n = grid.num_steps
    dt = grid.dt
    r_half, th_half = _half_grid_rates(market, grid)
    fd_half = CubicSpline(grid.nodes, driver.f)(grid.half_times())

    g0, p0 = gamma0, phi0
    a = np.empty(n + 1)
    out = np.empty((5, n + 1))

    def rhs(ri, ti, fi, y1, y2, y3, y4, y5):
        den = g0 * y2 + 2.0 * p0 * (y4 * y5 - y3)
        if den < eps_den:
            raise DegenerateDenominator(
                f"value-system denominator {den:.3e} below guard {eps_den:g}"
            )
        av = (y1 + g0 * (y4 * y4 - y2) + p0 * (y3 + 2.0 * y4 ** 3 - 3.0 * y4 * y5)) / den
        if abs(av) < eps_den:
            raise DegenerateDenominator(
                f"distortion ratio {av:.3e} below guard {eps_den:g}"
            )
        base = ri + ti * fi - xi * ti * fi * fi / av
        v2 = ti * fi * fi
        pen = 0.5 * xi * v2 * den
        return (
            -(base * y1 + pen),
            -(2.0 * base + v2) * y2,
            -3.0 * (base + v2) * y3,
            -base * y4,
            -(2.0 * base + v2) * y5,
            av,
        )

    y1 = y2 = y3 = y4 = y5 = 1.0
    h = -dt
    *_, av = rhs(r_half[2 * n], th_half[2 * n], fd_half[2 * n], y1, y2, y3, y4, y5)
    a[n] = av
    out[:, n] = (y1, y2, y3, y4, y5)

    for k in range(n, 0, -1):
        r1, t1, f1 = r_half[2 * k], th_half[2 * k], fd_half[2 * k]
        rm, tm, fm = r_half[2 * k - 1], th_half[2 * k - 1], fd_half[2 * k - 1]
        r0, t0, fz = r_half[2 * k - 2], th_half[2 * k - 2], fd_half[2 * k - 2]
        a1_, a2_, a3_, a4_, a5_, _ = rhs(r1, t1, f1, y1, y2, y3, y4, y5)
        b1_, b2_, b3_, b4_, b5_, _ = rhs(
            rm, tm, fm,
            y1 + 0.5 * h * a1_, y2 + 0.5 * h * a2_, y3 + 0.5 * h * a3_,
            y4 + 0.5 * h * a4_, y5 + 0.5 * h * a5_,
        )
        c1_, c2_, c3_, c4_, c5_, _ = rhs(
            rm, tm, fm,
            y1 + 0.5 * h * b1_, y2 + 0.5 * h * b2_, y3 + 0.5 * h * b3_,
            y4 + 0.5 * h * b4_, y5 + 0.5 * h * b5_,
        )
        d1_, d2_, d3_, d4_, d5_, _ = rhs(
            r0, t0, fz,
            y1 + h * c1_, y2 + h * c2_, y3 + h * c3_, y4 + h * c4_, y5 + h * c5_,
        )
        y1 += h / 6.0 * (a1_ + 2.0 * (b1_ + c1_) + d1_)
        y2 += h / 6.0 * (a2_ + 2.0 * (b2_ + c2_) + d2_)
        y3 += h / 6.0 * (a3_ + 2.0 * (b3_ + c3_) + d3_)
        y4 += h / 6.0 * (a4_ + 2.0 * (b4_ + c4_) + d4_)
        y5 += h / 6.0 * (a5_ + 2.0 * (b5_ + c5_) + d5_)
        if not (
            math.isfinite(y1) and math.isfinite(y2) and math.isfinite(y3)
            and math.isfinite(y4) and math.isfinite(y5)
        ):
            raise NonFiniteState(f"value-system state non-finite at node {k - 1}")
        *_, av = rhs(r0, t0, fz, y1, y2, y3, y4, y5)
        a[k - 1] = av
        out[:, k - 1] = (y1, y2, y3, y4, y5)

    return MispecTable(
        kind=kind, grid=grid, gamma0=gamma0, phi0=phi0, xi=xi,
        driver_f=driver.f.copy(), a=a,
        a1=out[0], a2=out[1], a3=out[2], b1=out[3], c1=out[4],
    )


# ---------------------------------------------------------------------------
# Convenience container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolvedModel:
    """All tables needed to evaluate values and losses at one parameter set."""

    prefs: Preferences
    grid: TimeGrid
    full: CoefficientTable
    neutral: CoefficientTable
    noskew: CoefficientTable
    basic: CoefficientTable
    mispec_u: MispecTable
    mispec_both: MispecTable


def solve_all(
    market: MarketCurves,
    prefs: Preferences,
    grid: TimeGrid,
    eps_den: float = DEFAULT_EPS_DEN,
) -> SolvedModel:
    """Solve every variant and both misspecified-value systems."""
    full = solve_system(market, prefs, grid, ModelVariant.FULL, eps_den)
    neutral = solve_system(market, prefs, grid, ModelVariant.AMBIGUITY_NEUTRAL, eps_den)
    noskew = solve_system(market, prefs, grid, ModelVariant.NO_SKEW, eps_den)
    basic = solve_system(market, prefs, grid, ModelVariant.BASIC, eps_den)
    mispec_u = solve_mispec_system(
        market, prefs, grid, MispecKind.IGNORE_UNCERTAINTY, eps_den, driver=neutral
    )
    mispec_both = solve_mispec_system(
        market, prefs, grid, MispecKind.IGNORE_BOTH, eps_den, driver=basic
    )
    return SolvedModel(
        prefs=prefs, grid=grid, full=full, neutral=neutral,
        noskew=noskew, basic=basic, mispec_u=mispec_u, mispec_both=mispec_both,
    )

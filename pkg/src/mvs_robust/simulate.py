"""Monte Carlo simulation of the equilibrium wealth process and oracles.

Under the worst-case (distorted) measure the equilibrium wealth is an
explicit geometric Brownian motion with deterministic drift
``r + theta f / (xi+1)**2`` and squared volatility
``theta f**2 / (xi+1)**2``, so paths can be generated exactly from
per-step lognormal increments; an Euler-Maruyama scheme is retained
purely as a discretization cross-check.  Closed-form lognormal moments
provide the independent oracle against the solved coefficient tables:
the order-1..3 moments must reproduce ``g1 w``, ``h2 w**2`` and
``h3 w**3``.

Randomness is counter-based: path ``i`` consumes a fixed block range of
a Philox stream keyed by the seed, so results are bitwise independent
of chunking, execution order, and worker count.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import ndtri

from .errors import ConfigError, OutOfHorizon, PenaltyUndefined, UnsolvedTable
from .market import MarketCurves
from .policy import mispec_value_bracket, value_bracket
from .solver import CoefficientTable, MispecTable

_CHUNK = 16384          # paths per accumulation block, fixed for determinism
_MIN_UNIFORM = 5e-324   # keeps ndtri finite if a raw uniform is exactly 0


class Scheme(enum.Enum):
    EXACT_LOGNORMAL = "exact"
    EULER_MARUYAMA = "euler"


class Measure(enum.Enum):
    REFERENCE = "reference"
    DISTORTED = "distorted"


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; paths are a pure function of (seed, index)."""

    num_paths: int = 100_000
    seed: int = 0
    start_time: float = 0.0
    start_wealth: float = 4.0
    scheme: Scheme = Scheme.EXACT_LOGNORMAL
    measure: Measure = Measure.DISTORTED
    num_steps: int = 200

    def __post_init__(self):
        if self.num_paths < 2:
            raise ConfigError(f"num_paths must be >= 2, got {self.num_paths}")
        if self.num_steps < 1:
            raise ConfigError(f"num_steps must be >= 1, got {self.num_steps}")
        if self.start_wealth <= 0.0:
            raise ConfigError(f"start_wealth must be positive, got {self.start_wealth}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    std_error: float


@dataclass(frozen=True)
class SimResult:
    """Path statistics; moments are raw moments of terminal wealth."""

    config: SimConfig
    moments: tuple[MomentEstimate, MomentEstimate, MomentEstimate, MomentEstimate]
    sup_fourth_moment: float
    sup_fourth_time: float
    min_wealth: float
    penalty: MomentEstimate | None
    objective: MomentEstimate | None


@dataclass(frozen=True)
class _Dynamics:
    """Deterministic curves driving one simulated wealth process."""

    times: np.ndarray      # sim nodes, start_time .. T
    drift: np.ndarray
    vol2: np.ndarray
    pen_rate: np.ndarray   # penalty integrand per unit wealth
    gamma0: float
    phi0: float
    bracket0: float        # value coefficient at start_time


def _check_grids(table, market: MarketCurves) -> None:
    if not table.grid.same_nodes(market.grid):
        raise UnsolvedTable(
            f"table grid ({table.grid.num_steps} steps over {table.grid.horizon}) "
            f"does not match market grid ({market.grid.num_steps} steps over "
            f"{market.grid.horizon})"
        )


def _table_dynamics(
    table: CoefficientTable,
    market: MarketCurves,
    cfg: SimConfig,
) -> _Dynamics:
    _check_grids(table, market)
    horizon = table.grid.horizon
    if not 0.0 <= cfg.start_time < horizon:
        raise OutOfHorizon(f"start_time {cfg.start_time} outside [0, {horizon})")
    times = np.linspace(cfg.start_time, horizon, cfg.num_steps + 1)
    nodes = table.grid.nodes
    f = CubicSpline(nodes, table.f)(times)
    d3 = CubicSpline(nodes, table.delta3)(times)
    r = np.asarray(market.risk_free_at(times), dtype=float)
    th = np.asarray(market.theta_at(times), dtype=float)
    xi = table.xi
    c = 1.0 / ((xi + 1.0) * (xi + 1.0))
    if cfg.measure is Measure.DISTORTED:
        drift = r + th * f * c
    else:
        drift = r + th * f / (xi + 1.0)
    vol2 = th * f * f * c
    pen_rate = 0.5 * xi * c * th * f * f * d3
    return _Dynamics(
        times=times, drift=drift, vol2=vol2, pen_rate=pen_rate,
        gamma0=table.gamma0, phi0=table.phi0,
        bracket0=value_bracket(table, cfg.start_time),
    )


def _mispec_dynamics(
    mispec: MispecTable,
    market: MarketCurves,
    cfg: SimConfig,
) -> _Dynamics:
    _check_grids(mispec, market)
    horizon = mispec.grid.horizon
    if not 0.0 <= cfg.start_time < horizon:
        raise OutOfHorizon(f"start_time {cfg.start_time} outside [0, {horizon})")
    times = np.linspace(cfg.start_time, horizon, cfg.num_steps + 1)
    nodes = mispec.grid.nodes
    fd = CubicSpline(nodes, mispec.driver_f)(times)
    a = CubicSpline(nodes, mispec.a)(times)
    g0, p0, xi = mispec.gamma0, mispec.phi0, mispec.xi
    d3 = g0 * CubicSpline(nodes, mispec.a2)(times) + 2.0 * p0 * (
        CubicSpline(nodes, mispec.b1)(times) * CubicSpline(nodes, mispec.c1)(times)
        - CubicSpline(nodes, mispec.a3)(times)
    )
    r = np.asarray(market.risk_free_at(times), dtype=float)
    th = np.asarray(market.theta_at(times), dtype=float)
    if cfg.measure is Measure.DISTORTED:
        drift = r + th * fd - xi * th * fd * fd / a
    else:
        drift = r + th * fd
    vol2 = th * fd * fd
    pen_rate = 0.5 * xi * th * fd * fd * d3
    return _Dynamics(
        times=times, drift=drift, vol2=vol2, pen_rate=pen_rate,
        gamma0=g0, phi0=p0,
        bracket0=mispec_value_bracket(mispec, cfg.start_time),
    )


def _path_normals(seed: int, first_path: int, n_paths: int, n_steps: int) -> np.ndarray:
    """Standard normals, row i belonging to global path ``first_path + i``.

    Each path owns ``ceil(n_steps / 4)`` whole Philox blocks, so the
    draws for a path do not depend on how paths are chunked.
    """
    blocks_per_path = (n_steps + 3) // 4
    bitgen = np.random.Philox(key=seed, counter=first_path * blocks_per_path)
    u = np.random.Generator(bitgen).random(n_paths * blocks_per_path * 4)
    u = u.reshape(n_paths, blocks_per_path * 4)[:, :n_steps]
    return ndtri(np.maximum(u, _MIN_UNIFORM))


def _simulate(dyn: _Dynamics, cfg: SimConfig) -> SimResult:
    times, drift, vol2, pen_rate = dyn.times, dyn.drift, dyn.vol2, dyn.pen_rate
    n_steps = cfg.num_steps
    ds = np.diff(times)
    # per-step trapezoid integrals of the deterministic exponent parts
    m_step = 0.5 * ds * ((drift[:-1] - 0.5 * vol2[:-1]) + (drift[1:] - 0.5 * vol2[1:]))
    s_step = np.sqrt(0.5 * ds * (vol2[:-1] + vol2[1:]))

    w0 = cfg.start_wealth
    pow_sums = np.zeros(8)                  # sums of W_T ** (1..8)
    node4 = np.zeros(n_steps + 1)           # sums of W_s ** 4 per node
    vec_sum = np.zeros(4)                   # (W_T, W_T^2, W_T^3, penalty)
    vec_outer = np.zeros((4, 4))
    min_w = np.inf

    for first in range(0, cfg.num_paths, _CHUNK):
        n = min(_CHUNK, cfg.num_paths - first)
        z = _path_normals(cfg.seed, first, n, n_steps)
        pen = np.zeros(n)
        if cfg.scheme is Scheme.EXACT_LOGNORMAL:
            logw = np.full(n, np.log(w0))
            w = np.full(n, w0)
            node4[0] += n * w0 ** 4
            min_w = min(min_w, w0)
            for k in range(n_steps):
                w_prev = w
                logw = logw + m_step[k] + s_step[k] * z[:, k]
                w = np.exp(logw)
                pen += 0.5 * ds[k] * (pen_rate[k] * w_prev + pen_rate[k + 1] * w)
                node4[k + 1] += float(np.sum(w ** 4))
                mn = float(np.min(w))
                if mn < min_w:
                    min_w = mn
        else:
            w = np.full(n, w0)
            node4[0] += n * w0 ** 4
            min_w = min(min_w, w0)
            sq = np.sqrt(ds)
            for k in range(n_steps):
                w_prev = w
                w = w * (1.0 + drift[k] * ds[k] + np.sqrt(vol2[k]) * sq[k] * z[:, k])
                pen += 0.5 * ds[k] * (pen_rate[k] * w_prev + pen_rate[k + 1] * w)
                node4[k + 1] += float(np.sum(w ** 4))
                mn = float(np.min(w))
                if mn < min_w:
                    min_w = mn
        for p in range(1, 9):
            pow_sums[p - 1] += float(np.sum(w ** p))
        x = np.stack([w, w * w, w ** 3, pen])
        vec_sum += x.sum(axis=1)
        vec_outer += x @ x.T

    npaths = cfg.num_paths
    raw = pow_sums / npaths
    bessel = npaths / (npaths - 1.0)

    def estimate(k: int) -> MomentEstimate:
        var = max(0.0, (raw[2 * k - 1] - raw[k - 1] ** 2) * bessel)
        return MomentEstimate(value=raw[k - 1], std_error=float(np.sqrt(var / npaths)))

    moments = tuple(estimate(k) for k in range(1, 5))

    mean4 = vec_sum / npaths
    cov = (vec_outer / npaths - np.outer(mean4, mean4)) * bessel

    sup_idx = int(np.argmax(node4))
    result_penalty = None
    result_objective = None
    if cfg.measure is Measure.DISTORTED:
        result_penalty = MomentEstimate(
            value=float(mean4[3]),
            std_error=float(np.sqrt(max(0.0, cov[3, 3]) / npaths)),
        )
        m1, m2, m3, mp = mean4
        g0, p0 = dyn.gamma0, dyn.phi0
        obj = (
            m1
            - 0.5 * g0 / w0 * (m2 - m1 * m1)
            + p0 / (3.0 * w0 * w0) * (m3 - 3.0 * m1 * m2 + 2.0 * m1 ** 3)
            + mp
        )
        grad = np.array([
            1.0 + g0 * m1 / w0 + p0 / (w0 * w0) * (2.0 * m1 * m1 - m2),
            -0.5 * g0 / w0 - p0 * m1 / (w0 * w0),
            p0 / (3.0 * w0 * w0),
            1.0,
        ])
        obj_var = max(0.0, float(grad @ cov @ grad))
        result_objective = MomentEstimate(
            value=float(obj), std_error=float(np.sqrt(obj_var / npaths))
        )

    return SimResult(
        config=cfg,
        moments=moments,
        sup_fourth_moment=float(node4[sup_idx] / npaths),
        sup_fourth_time=float(times[sup_idx]),
        min_wealth=float(min_w),
        penalty=result_penalty,
        objective=result_objective,
    )


def simulate_equilibrium_wealth(
    table: CoefficientTable,
    market: MarketCurves,
    cfg: SimConfig,
) -> SimResult:
    """Simulate the equilibrium wealth GBM described by a solved table."""
    return _simulate(_table_dynamics(table, market, cfg), cfg)


def lognormal_moments(
    table: CoefficientTable,
    market: MarketCurves,
    t: float,
    w: float,
    order: int,
    measure: Measure = Measure.DISTORTED,
) -> float:
    """Exact GBM moment ``E[W_T ** order]`` started from (t, w).

    Computed as ``w**n * exp(integral of n*drift + n(n-1)/2 * vol2)``
    with trapezoid quadrature on the solver grid; orders 1..3 must
    reproduce the solved ``g1 w``, ``h2 w**2``, ``h3 w**3``.
    """
    if order not in (1, 2, 3, 4):
        raise ConfigError(f"order must be 1..4, got {order}")
    _check_grids(table, market)
    horizon = table.grid.horizon
    if not 0.0 <= t <= horizon:
        raise OutOfHorizon(f"time {t} outside [0, {horizon}]")
    times, drift, vol2, _ = _tail_curves(table, market, t, measure)
    integrand = order * drift + 0.5 * order * (order - 1) * vol2
    return w ** order * float(np.exp(np.trapezoid(integrand, times)))


def _tail_curves(
    table: CoefficientTable,
    market: MarketCurves,
    t: float,
    measure: Measure,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(times, drift, vol2, pen_rate) on grid nodes >= t, with t prepended."""
    nodes = table.grid.nodes
    mask = nodes >= t
    xi = table.xi
    c = 1.0 / ((xi + 1.0) * (xi + 1.0))
    scale = c if measure is Measure.DISTORTED else 1.0 / (xi + 1.0)

    r = market.risk_free_nodes[mask]
    th = market.theta_nodes[mask]
    f = table.f[mask]
    d3 = table.delta3[mask]
    times = nodes[mask]
    if times.size == 0 or times[0] > t:
        f0 = float(CubicSpline(nodes, table.f)(t))
        d30 = float(CubicSpline(nodes, table.delta3)(t))
        r = np.concatenate([[float(market.risk_free_at(t))], r])
        th = np.concatenate([[float(market.theta_at(t))], th])
        f = np.concatenate([[f0], f])
        d3 = np.concatenate([[d30], d3])
        times = np.concatenate([[t], times])
    drift = r + th * f * scale
    vol2 = th * f * f * c
    pen_rate = 0.5 * xi * c * th * f * f * d3
    return times, drift, vol2, pen_rate


@dataclass(frozen=True)
class ValueCheck:
    """Objective reassembly compared against the solved value function."""

    time: float
    wealth: float
    value: float
    analytic_objective: float
    analytic_rel_err: float
    mc_objective: MomentEstimate
    mc_z: float
    sim: SimResult


def verify_value(
    table: CoefficientTable,
    market: MarketCurves,
    t: float,
    w: float,
    cfg: SimConfig,
    mispec: MispecTable | None = None,
) -> ValueCheck:
    """Reassemble the objective from moments plus the penalty quadrature.

    The analytic route uses exact lognormal moments and a trapezoid
    penalty integral along the expected wealth curve; the Monte Carlo
    route assembles the same objective from sample moments.  Both are
    compared against the value function implied by the solved table
    (or, when ``mispec`` is given, by the misspecified-strategy value
    system, simulated under its own distorted dynamics).
    """
    source = table if mispec is None else mispec
    horizon = source.grid.horizon
    if t == horizon:
        # degenerate terminal distribution: value equals wealth, no penalty
        est = MomentEstimate(value=w, std_error=0.0)
        sim = SimResult(
            config=replace(cfg, start_time=t, start_wealth=w),
            moments=tuple(MomentEstimate(w ** n, 0.0) for n in (1, 2, 3, 4)),
            sup_fourth_moment=w ** 4, sup_fourth_time=t, min_wealth=w,
            penalty=MomentEstimate(0.0, 0.0), objective=est,
        )
        return ValueCheck(
            time=t, wealth=w, value=w, analytic_objective=w,
            analytic_rel_err=0.0, mc_objective=est, mc_z=0.0, sim=sim,
        )

    cfg = replace(cfg, start_time=t, start_wealth=w, measure=Measure.DISTORTED)
    if mispec is None:
        dyn = _table_dynamics(table, market, cfg)
        times, drift, vol2, pen_rate = _tail_curves(table, market, t, Measure.DISTORTED)
    else:
        dyn = _mispec_dynamics(mispec, market, cfg)
        times, drift, vol2, pen_rate = _mispec_tail_curves(mispec, market, t)

    d3_floor = _tail_delta3_min(table if mispec is None else mispec, t)
    if d3_floor <= 0.0 and (dyn.pen_rate != 0.0).any():
        raise PenaltyUndefined(
            f"ambiguity preference scale nonpositive on the horizon "
            f"(min delta3 = {d3_floor:g})"
        )

    def tail_int(g):
        return float(np.trapezoid(g, times))

    m1 = w * np.exp(tail_int(drift))
    m2 = w * w * np.exp(tail_int(2.0 * drift + vol2))
    m3 = w ** 3 * np.exp(tail_int(3.0 * drift + 3.0 * vol2))
    grow = np.concatenate(
        [[0.0], np.cumsum(0.5 * np.diff(times) * (drift[:-1] + drift[1:]))]
    )
    expected_w = w * np.exp(grow)
    penalty = tail_int(pen_rate * expected_w)
    analytic = (
        m1
        - 0.5 * dyn.gamma0 / w * (m2 - m1 * m1)
        + dyn.phi0 / (3.0 * w * w) * (m3 - 3.0 * m1 * m2 + 2.0 * m1 ** 3)
        + penalty
    )

    value = dyn.bracket0 * w
    rel_err = abs(analytic - value) / abs(value)

    sim = _simulate(dyn, cfg)
    mc = sim.objective
    z = (mc.value - value) / mc.std_error if mc.std_error > 0.0 else 0.0

    return ValueCheck(
        time=t, wealth=w, value=value,
        analytic_objective=float(analytic), analytic_rel_err=float(rel_err),
        mc_objective=mc, mc_z=float(z), sim=sim,
    )


def _mispec_tail_curves(
    mispec: MispecTable,
    market: MarketCurves,
    t: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Misspecified-strategy dynamics on grid nodes >= t, t prepended."""
    nodes = mispec.grid.nodes
    mask = nodes >= t
    g0, p0, xi = mispec.gamma0, mispec.phi0, mispec.xi
    r = market.risk_free_nodes[mask]
    th = market.theta_nodes[mask]
    fd = mispec.driver_f[mask]
    a = mispec.a[mask]
    d3 = (g0 * mispec.a2 + 2.0 * p0 * (mispec.b1 * mispec.c1 - mispec.a3))[mask]
    times = nodes[mask]
    if times.size == 0 or times[0] > t:
        fd = np.concatenate([[float(CubicSpline(nodes, mispec.driver_f)(t))], fd])
        a = np.concatenate([[float(CubicSpline(nodes, mispec.a)(t))], a])
        d3_full = g0 * mispec.a2 + 2.0 * p0 * (mispec.b1 * mispec.c1 - mispec.a3)
        d3 = np.concatenate([[float(CubicSpline(nodes, d3_full)(t))], d3])
        r = np.concatenate([[float(market.risk_free_at(t))], r])
        th = np.concatenate([[float(market.theta_at(t))], th])
        times = np.concatenate([[t], times])
    drift = r + th * fd - xi * th * fd * fd / a
    vol2 = th * fd * fd
    pen_rate = 0.5 * xi * th * fd * fd * d3
    return times, drift, vol2, pen_rate


def _tail_delta3_min(table, t: float) -> float:
    mask = table.grid.nodes >= t
    if isinstance(table, CoefficientTable):
        return float(np.min(table.delta3[mask]))
    d3 = table.gamma0 * table.a2 + 2.0 * table.phi0 * (table.b1 * table.c1 - table.a3)
    return float(np.min(d3[mask]))


@dataclass(frozen=True)
class MomentBound:
    """Finiteness check of the running fourth moment of wealth."""

    analytic_sup: float
    analytic_argmax_time: float
    mc_sup: float
    ratio: float
    finite: bool
    consistent: bool


def moment_bound_check(
    table: CoefficientTable,
    market: MarketCurves,
    cfg: SimConfig,
    ratio_band: tuple[float, float] = (0.8, 1.25),
) -> MomentBound:
    """Compare the analytic running fourth moment with the sampled one.

    The analytic curve is ``w**4 * exp(integral of 4*drift + 6*vol2)``
    accumulated forward from the start node; the Monte Carlo figure is
    the maximum over sim nodes of the sample fourth moment.
    """
    dyn = _table_dynamics(table, market, cfg)
    ds = np.diff(dyn.times)
    g = 4.0 * dyn.drift + 6.0 * dyn.vol2
    grow = np.concatenate([[0.0], np.cumsum(0.5 * ds * (g[:-1] + g[1:]))])
    curve = cfg.start_wealth ** 4 * np.exp(grow)
    idx = int(np.argmax(curve))
    analytic_sup = float(curve[idx])

    sim = _simulate(dyn, cfg)
    ratio = sim.sup_fourth_moment / analytic_sup
    return MomentBound(
        analytic_sup=analytic_sup,
        analytic_argmax_time=float(dyn.times[idx]),
        mc_sup=sim.sup_fourth_moment,
        ratio=float(ratio),
        finite=bool(np.isfinite(analytic_sup) and np.isfinite(sim.sup_fourth_moment)),
        consistent=bool(ratio_band[0] <= ratio <= ratio_band[1]),
    )

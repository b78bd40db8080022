"""Named verification checks bundled behind the ``check`` command.

Every check runs at the configuration's own parameters with pinned
tolerances and returns a machine-readable result.  The same bounds are
asserted by the acceptance test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import MvsRobustError
from .policy import delta3_scan
from .simulate import (
    lognormal_moments,
    moment_bound_check,
    simulate_equilibrium_wealth,
    verify_value,
)
from .solver import ModelVariant, solve_f_picard, solve_system

ORACLE_SUP_TOL = 1e-6          # RK4 vs fixed-point route, sup norm on f
CLOSED_FORM_REL_TOL = 1e-7     # quadrature reconstruction of h2, h3, g1
MOMENT_REL_TOL = 1e-7          # lognormal moments vs solved coefficients
VALUE_REL_TOL = 1e-6           # analytic objective reassembly vs value
MC_Z_BOUND = 3.0               # Monte Carlo bands, in standard errors
FOURTH_MOMENT_BAND = (0.8, 1.25)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    metrics: dict[str, float] = field(default_factory=dict)
    message: str = ""

    def summary_line(self) -> str:
        parts = [f"check={self.name}", f"status={'pass' if self.passed else 'fail'}"]
        parts += [f"{k}={v:.6g}" for k, v in self.metrics.items()]
        if self.message:
            parts.append(f"note={self.message}")
        return " ".join(parts)


def _solve_context(config: RunConfig):
    grid = config.build_grid()
    market = config.build_market(grid)
    prefs = config.build_preferences()
    table = solve_system(
        market, prefs, grid, ModelVariant.FULL, config.solver.eps_den
    )
    return grid, market, prefs, table


def check_terminal_conditions(config: RunConfig) -> CheckResult:
    """Terminal nodes carry the exact boundary values."""
    _, _, prefs, table = _solve_context(config)
    errs = [
        abs(table.f[-1] - 1.0 / prefs.gamma0),
        abs(table.h1[-1] - 1.0), abs(table.h2[-1] - 1.0),
        abs(table.h3[-1] - 1.0), abs(table.g1[-1] - 1.0), abs(table.k1[-1] - 1.0),
    ]
    worst = max(errs)
    return CheckResult("terminal_conditions", worst == 0.0, {"max_abs_err": worst})


def check_oracle_equivalence(config: RunConfig) -> CheckResult:
    """RK4 route and integral-equation route agree on f."""
    grid, market, prefs, table = _solve_context(config)
    f_pic = solve_f_picard(
        market, prefs, grid,
        tol=config.solver.picard_tol,
        max_iter=config.solver.picard_max_iter,
        eps_den=config.solver.eps_den,
    )
    sup = float(np.max(np.abs(table.f - f_pic)))
    return CheckResult(
        "oracle_equivalence", sup < ORACLE_SUP_TOL,
        {"sup_diff": sup, "tol": ORACLE_SUP_TOL},
    )


def check_closed_form_consistency(config: RunConfig) -> CheckResult:
    """Exponential reconstructions from the solved f match the ODE output."""
    grid, market, prefs, table = _solve_context(config)
    dt = grid.dt
    nodes = grid.nodes
    r = np.asarray(market.risk_free_at(nodes), dtype=float)
    th = np.asarray(market.theta_at(nodes), dtype=float)
    c = 1.0 / ((table.xi + 1.0) ** 2)
    f = table.f

    def revcum(g):
        inc = 0.5 * dt * (g[:-1] + g[1:])
        out = np.empty_like(g)
        out[-1] = 0.0
        out[:-1] = np.cumsum(inc[::-1])[::-1]
        return out

    g1 = np.exp(revcum(r + th * f * c))
    h2 = np.exp(revcum(2 * r + (2 * th * f + th * f * f) * c))
    h3 = np.exp(revcum(3 * (r + (th * f + th * f * f) * c)))
    rel = max(
        float(np.max(np.abs(g1 / table.g1 - 1.0))),
        float(np.max(np.abs(h2 / table.h2 - 1.0))),
        float(np.max(np.abs(h3 / table.h3 - 1.0))),
    )
    return CheckResult(
        "closed_form_consistency", rel < CLOSED_FORM_REL_TOL,
        {"max_rel_err": rel, "tol": CLOSED_FORM_REL_TOL},
    )


def check_h2_equals_k1(config: RunConfig) -> CheckResult:
    _, _, _, table = _solve_context(config)
    same = bool(np.array_equal(table.h2, table.k1))
    return CheckResult("h2_equals_k1", same, {"max_abs_diff": float(np.max(np.abs(table.h2 - table.k1)))})


def check_lognormal_moments(config: RunConfig) -> CheckResult:
    """Orders 1..3 of the wealth GBM reproduce g1 w, h2 w^2, h3 w^3."""
    grid, market, prefs, table = _solve_context(config)
    w = config.simulation.start_wealth
    t = config.simulation.start_time
    k = int(round(t / grid.dt))
    targets = (table.g1[k] * w, table.h2[k] * w ** 2, table.h3[k] * w ** 3)
    rels = [
        abs(lognormal_moments(table, market, t, w, n) / targets[n - 1] - 1.0)
        for n in (1, 2, 3)
    ]
    worst = max(rels)
    return CheckResult(
        "lognormal_moments", worst < MOMENT_REL_TOL,
        {"max_rel_err": worst, "tol": MOMENT_REL_TOL},
    )


def check_value_verification(config: RunConfig) -> CheckResult:
    """Analytic and Monte Carlo objective reassembly hit the value function."""
    _, market, _, table = _solve_context(config)
    cfg = config.build_sim_config()
    res = verify_value(
        table, market, config.simulation.start_time,
        config.simulation.start_wealth, cfg,
    )
    ok = res.analytic_rel_err < VALUE_REL_TOL and abs(res.mc_z) <= MC_Z_BOUND
    return CheckResult(
        "value_verification", ok,
        {
            "analytic_rel_err": res.analytic_rel_err,
            "mc_z": res.mc_z,
            "value": res.value,
        },
    )


def check_delta3_positivity(config: RunConfig) -> CheckResult:
    _, _, _, table = _solve_context(config)
    scan = delta3_scan(table)
    return CheckResult(
        "delta3_positivity", scan.all_positive,
        {"min_delta3": scan.min_value, "argmin_time": scan.argmin_time},
    )


def check_moment_bound(config: RunConfig) -> CheckResult:
    _, market, _, table = _solve_context(config)
    cfg = config.build_sim_config()
    res = moment_bound_check(table, market, cfg, FOURTH_MOMENT_BAND)
    return CheckResult(
        "moment_bound", res.finite and res.consistent,
        {
            "analytic_sup": res.analytic_sup,
            "mc_sup": res.mc_sup,
            "ratio": res.ratio,
        },
    )


def check_determinism(config: RunConfig) -> CheckResult:
    """Two identical simulation runs agree bitwise."""
    _, market, _, table = _solve_context(config)
    cfg = config.build_sim_config()
    a = simulate_equilibrium_wealth(table, market, cfg)
    b = simulate_equilibrium_wealth(table, market, cfg)
    same = all(
        a.moments[i].value == b.moments[i].value
        and a.moments[i].std_error == b.moments[i].std_error
        for i in range(4)
    ) and a.sup_fourth_moment == b.sup_fourth_moment
    return CheckResult("determinism", bool(same))


ALL_CHECKS = (
    check_terminal_conditions,
    check_oracle_equivalence,
    check_closed_form_consistency,
    check_h2_equals_k1,
    check_lognormal_moments,
    check_value_verification,
    check_delta3_positivity,
    check_moment_bound,
    check_determinism,
)


def run_checks(config: RunConfig) -> list[CheckResult]:
    results = []
    for fn in ALL_CHECKS:
        name = fn.__name__.removeprefix("check_")
        try:
            results.append(fn(config))
        except MvsRobustError as exc:
            results.append(
                CheckResult(name, False, message=f"{type(exc).__name__}: {exc}")
            )
    return results

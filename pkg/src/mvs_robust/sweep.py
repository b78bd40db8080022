"""Parameter sweep engine.

A sweep solves the full model stack at every point of a one- or
two-parameter grid and reports, per cell: the equilibrium allocation
and distortion at (t = 0, w = w0), all six values, the three loss
ratios, and the grid minimum of the positivity quantity delta3.  Cells
where the solver degenerates are recorded with the error name in the
status column instead of aborting the sweep.

Cells are independent, so they may be computed by a thread pool; the
output order is fixed by cell index regardless of worker count.  The
``MVS_ROBUST_THREADS`` environment variable caps the pool size.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import MvsRobustError
from .policy import delta3_scan, equilibrium_policy, value_at
from .solver import solve_all


def worker_count() -> int:
    env = os.environ.get("MVS_ROBUST_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            n = 1
        return max(1, n)
    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class SweepRow:
    values: dict[str, float]
    status: str
    fields: dict[str, float] | None  # None when the cell failed


RESULT_FIELDS = (
    "u_star", "q_star", "V", "V_hat", "V_tilde", "V_bar",
    "V1", "V2", "L1", "L2", "L3", "min_delta3",
)


def sweep_grid(config: RunConfig) -> list[dict[str, float]]:
    """Cell parameter dictionaries in output order (outer x inner)."""
    sw = config.sweep
    if sw is None:
        raise MvsRobustError("config has no [sweep] section")
    first = np.linspace(sw.min, sw.max, sw.count)
    if sw.param2 is None:
        return [{sw.param: float(v)} for v in first]
    second = np.linspace(sw.min2, sw.max2, sw.count2)
    return [
        {sw.param: float(a), sw.param2: float(b)}
        for a in first
        for b in second
    ]


def _evaluate_cell(config: RunConfig, values: dict[str, float]) -> SweepRow:
    try:
        cfg = config.with_overrides(values)
        grid = cfg.build_grid()
        market = cfg.build_market(grid)
        prefs = cfg.build_preferences()
        model = solve_all(market, prefs, grid, cfg.solver.eps_den)
        w0 = cfg.simulation.start_wealth
        pol = equilibrium_policy(model.full, market, 0.0, w0)
        rep = value_at(model, 0.0, w0)
        scan = delta3_scan(model.full)
        fields = {
            "u_star": float(pol.allocation[0]) if market.num_assets == 1
            else float(np.linalg.norm(pol.allocation)),
            "q_star": float(pol.distortion[0]) if market.num_assets == 1
            else float(np.linalg.norm(pol.distortion)),
            "V": rep.value_full,
            "V_hat": rep.value_noskew,
            "V_tilde": rep.value_neutral,
            "V_bar": rep.value_basic,
            "V1": rep.value_mispec_u,
            "V2": rep.value_mispec_both,
            "L1": rep.loss_skew,
            "L2": rep.loss_uncertainty,
            "L3": rep.loss_both,
            "min_delta3": scan.min_value,
        }
        return SweepRow(values=values, status="ok", fields=fields)
    except MvsRobustError as exc:
        return SweepRow(values=values, status=type(exc).__name__, fields=None)


def run_sweep(config: RunConfig) -> tuple[list[str], list[SweepRow]]:
    """Evaluate every cell; returns (header, rows) in deterministic order."""
    cells = sweep_grid(config)
    sw = config.sweep
    params = [sw.param] + ([sw.param2] if sw.param2 else [])
    header = params + list(RESULT_FIELDS) + ["status"]

    workers = worker_count()
    if workers == 1 or len(cells) == 1:
        rows = [_evaluate_cell(config, v) for v in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda v: _evaluate_cell(config, v), cells))
    return header, rows


def rows_to_csv(header: list[str], rows: list[SweepRow]) -> str:
    """Render rows as locale-independent CSV with 17 significant digits."""
    lines = [",".join(header)]
    param_names = [h for h in header if h not in RESULT_FIELDS and h != "status"]
    for row in rows:
        cells = [f"{row.values[p]:.17g}" for p in param_names]
        if row.fields is None:
            cells += ["" for _ in RESULT_FIELDS]
        else:
            cells += [f"{row.fields[k]:.17g}" for k in RESULT_FIELDS]
        cells.append(row.status)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"

"""
CSV tables for external plotting
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.exceptions import SeriesMissing
from core.models import DichotomyVerdict, EigenResult, ExpansionFit, ResidualReport
from harness.models import ResultDocument, Series

PLOT_KINDS: Dict[str, Tuple[str, ...]] = {
    "corner-u12-vs-r": ("r", "direction_id", "estimate"),
    "edge-coefficient": ("x3", "c"),
    "refinement": ("h", "residual", "rate"),
    "eigen-ladder": ("mesh_h", "lambda1"),
    "hessian-trend": ("h", "max_eigenvalue"),
}


def corner_series(verdict: DichotomyVerdict) -> Series:
    rows = [
        [r, float(s.direction_id), e] for s in verdict.per_direction for r, e in zip(s.radii, s.estimates)
    ]
    return Series(columns=list(PLOT_KINDS["corner-u12-vs-r"]), rows=rows)


def edge_series(fit: ExpansionFit) -> Series:
    return Series(columns=list(PLOT_KINDS["edge-coefficient"]), rows=[list(p) for p in zip(fit.x3_samples, fit.coefficient_c)])


def refinement_series(report: ResidualReport) -> Series:
    """One row per level; no rate on the coarsest"""
    rows: List[List[Optional[float]]] = []
    previous: Optional[Tuple[float, float]] = None
    for h, err in report.refinement:
        rate = None
        if previous is not None and previous[1] > 0 and err > 0:
            rate = float(np.log(previous[1] / err) / np.log(previous[0] / h))
        rows.append([h, err, rate])
        previous = (h, err)
    return Series(columns=list(PLOT_KINDS["refinement"]), rows=rows)


def eigen_series(result: EigenResult) -> Series:
    return Series(columns=list(PLOT_KINDS["eigen-ladder"]), rows=[[lv.mesh_h, lv.lambda1] for lv in result.ladder])


def hessian_series(hs: Sequence[float], values: Sequence[float]) -> Series:
    return Series(columns=list(PLOT_KINDS["hessian-trend"]), rows=[[h, v] for h, v in zip(hs, values)])


def emit_plot_data(result: ResultDocument, kind: str, out_dir: Union[str, Path]) -> Path:
    """Write one series of a result as <kind>.csv"""
    if kind not in result.series:
        raise SeriesMissing(
            f"result has no {kind!r} series", {"experiment_id": result.experiment_id, "available": sorted(result.series)}
        )
    series = result.series[kind]
    path = Path(out_dir) / f"{kind}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    table = np.asarray(series.rows, dtype=float).reshape(-1, len(series.columns))
    np.savetxt(path, table, delimiter=",", fmt="%.17g", header=",".join(series.columns), comments="")
    return path

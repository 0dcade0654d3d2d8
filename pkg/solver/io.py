"""
Portable persistence of discrete solutions: a JSON header line, then a CSV table
"""

import json
from pathlib import Path
from typing import Union

import numpy as np

from core.exceptions import SolverError
from core.models import AffineMap
from solver.grid import Grid
from solver.solution import DiscreteSolution

HEADER_FIELDS = (
    "iterations",
    "residual",
    "convexity_violations",
    "monotone_scheme_id",
    "warnings",
    "elapsed_ms",
    "pin_shift",
)


def write_solution(sol: DiscreteSolution, path: Union[str, Path]) -> Path:
    path = Path(path)
    meta = {name: getattr(sol, name) for name in HEADER_FIELDS}
    meta.update(h=sol.h, lower=list(sol.grid.lower), shape=list(sol.grid.shape))
    meta["frame"] = sol.frame.model_dump() if sol.frame is not None else None
    columns = [f"x{k + 1}" for k in range(sol.dim)] + ["status", "value"]
    table = np.column_stack([sol.points(), sol.grid.flat_status, sol.values])
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        table,
        delimiter=",",
        fmt="%.17g",
        header=json.dumps(meta) + "\n" + ",".join(columns),
        comments="# ",
    )
    return path


def read_solution(path: Union[str, Path]) -> DiscreteSolution:
    path = Path(path)
    with path.open() as handle:
        first = handle.readline()
    if not first.startswith("# "):
        raise SolverError("solution file lacks its header line", {"path": str(path)})
    try:
        meta = json.loads(first[2:])
    except json.JSONDecodeError as e:
        raise SolverError("unreadable solution header", {"path": str(path), "error": str(e)}) from e

    table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    shape = tuple(meta.pop("shape"))
    grid = Grid(
        h=meta.pop("h"),
        lower=tuple(meta.pop("lower")),
        shape=shape,
        status=table[:, -2].astype(int).reshape(shape),
    )
    frame = meta.pop("frame")
    return DiscreteSolution(
        grid=grid,
        values=table[:, -1],
        frame=AffineMap.model_validate(frame) if frame else None,
        **meta,
    )

"""
Grid functions produced by the solver
"""

from typing import List, Optional

import numpy as np
from pydantic import Field
from scipy.interpolate import RegularGridInterpolator

from core.exceptions import OutOfDomain
from core.models import AffineMap, ArrayModel, FloatArray
from solver.domains import ComputationalDomain
from solver.grid import BOUNDARY, INTERIOR, OUTSIDE, Grid


class DiscreteSolution(ArrayModel):
    """Nodal values on a grid; NaN outside the domain"""

    grid: Grid
    values: FloatArray = Field(..., description="Flat nodal values in grid order")
    domain: Optional[ComputationalDomain] = None
    frame: Optional[AffineMap] = Field(None, description="x = S y + t maps grid coordinates to the problem's")
    iterations: int = 0
    residual: float = Field(0.0, description="max |MA_h u - f| over interior nodes")
    convexity_violations: int = 0
    monotone_scheme_id: str = "sampled"
    warnings: List[str] = Field(default_factory=list)
    elapsed_ms: float = 0.0
    pin_shift: Optional[float] = Field(None, description="Outer-data shift found by the pinned shooting")

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def tau_conv(self) -> float:
        return 10.0 * self.h**2

    def points(self) -> np.ndarray:
        return self.grid.points()

    def node_mask(self, which: str = "inside") -> np.ndarray:
        status = self.grid.flat_status
        if which == "interior":
            return status == INTERIOR
        if which == "boundary":
            return status == BOUNDARY
        return status != OUTSIDE

    def nodes(self, which: str = "inside"):
        mask = self.node_mask(which)
        return self.points()[mask], self.values[mask]

    def value_grid(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(self.grid.axes(), self.value_grid(), bounds_error=False, fill_value=np.nan)

    def evaluate(self, points) -> np.ndarray:
        """Multilinear interpolation at points given in grid coordinates"""
        values = self.interpolator()(np.atleast_2d(np.asarray(points, dtype=float)))
        if np.any(np.isnan(values)):
            raise OutOfDomain("evaluation point is too close to the boundary or outside the grid")
        return values

    def evaluate_physical(self, points) -> np.ndarray:
        """Evaluation at points of the original problem, through the stored frame"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.frame is not None:
            pts = self.frame.inverse().apply(pts)
        return self.evaluate(pts)

    def value_at(self, point) -> float:
        return float(self.values[self.grid.nearest(point)])

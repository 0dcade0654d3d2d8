"""
Richardson extrapolation over dyadic sequences
"""

import math
from typing import Optional, Sequence, Tuple

from pydantic import BaseModel

ORDER_BOUNDS: Tuple[float, float] = (0.5, 4.0)


class RichardsonResult(BaseModel):
    extrapolated: float
    order: Optional[float] = None
    error_estimate: float = 0.0


def richardson_extrapolate(
    values: Sequence[float], ratio: float = 2.0, order_bounds: Tuple[float, float] = ORDER_BOUNDS
) -> RichardsonResult:
    """Extrapolate the last three values of a sequence refined by ``ratio`` each step

    Values are ordered coarse to fine. The observed order is clamped to
    ``order_bounds``; a converged sequence returns the finest value.
    """
    if len(values) < 3:
        raise ValueError("Richardson extrapolation needs three values")
    coarse, medium, fine = (float(v) for v in values[-3:])
    e_fine = medium - fine
    e_coarse = coarse - medium
    scale = max(1.0, abs(fine))
    if abs(e_fine) <= 1e-14 * scale:
        return RichardsonResult(extrapolated=fine, order=None, error_estimate=0.0)
    if abs(e_coarse) <= 1e-14 * scale:
        order = order_bounds[1]
    else:
        order = math.log(abs(e_coarse / e_fine)) / math.log(ratio)
    order = min(max(order, order_bounds[0]), order_bounds[1])
    correction = (fine - medium) / (ratio**order - 1.0)
    return RichardsonResult(extrapolated=fine + correction, order=order, error_estimate=abs(correction))

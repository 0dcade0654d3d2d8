"""
Runtime settings for mapoly

Defaults can be overridden through MAPOLY_<NAME> environment variables, then by an
experiment's ``settings`` block, then by command-line flags.
"""

import os
from functools import lru_cache
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

ENV_PREFIX = "MAPOLY_"
VERSION = "1.0.0"


class Settings(BaseModel):
    """Numeric knobs shared by every module

    The 2-D scheme uses the orthogonal pairs (v, v_perp) of primitive vectors
    with entries at most ``scheme_width``: width 3 gives 8 frames and 16
    directions, width 4 gives 12 frames and 24 directions. Directions come in
    perpendicular pairs, so the count is always even; width 3 is the closest
    to a 17-direction stencil.
    """

    model_config = ConfigDict(frozen=True)

    # geometry / normalize
    geom_tol: float = Field(1e-9, gt=0, description="On-plane tolerance for geometric predicates")
    angle_tol: float = Field(1e-12, ge=0, description="Slack on the A-condition comparison")
    tau_strict: float = Field(0.0, ge=0, description="Margin required by the strong A-condition")
    edge_samples: int = Field(33, ge=2, description="Sample points per edge for skeleton sampling")
    eps0_variant: Literal["angle", "gap"] = Field("angle", description="Which epsilon0 variant to return")

    # solver
    grid_h: float = Field(1.0 / 32, gt=0, description="Default grid spacing")
    scheme_width: int = Field(3, ge=1, le=4, description="Largest entry of the 2-D stencil vectors")
    scheme_frames3d: Literal["basic", "full"] = Field("full", description="Orthogonal frame family in 3-D")
    scheme_delta: float = Field(1e-6, gt=0, description="Convexity regularization of the scheme")
    initial_guess: Literal["convex_envelope", "poisson"] = Field(
        "convex_envelope", description="Newton start: convex envelope of the boundary data, or a Poisson solve"
    )
    snap_fraction: float = Field(0.05, ge=0, lt=0.5, description="Nodes closer than this times h snap to the boundary")
    newton_tol: float = Field(1e-8, gt=0, description="Residual tolerance of the nonlinear solve")
    newton_max_iter: int = Field(60, ge=1)
    newton_max_damping: int = Field(12, ge=0, description="Maximum step halvings per Newton iteration")
    ptc_max_iter: int = Field(400, ge=1, description="Pseudo-time iterations before giving up")
    pin_tol: float = Field(1e-3, gt=0)
    pin_max_expand: int = Field(12, ge=1, description="Bracket doublings allowed when shooting the pin")

    # spectral
    eigen_mesh_h: float = Field(0.05, gt=0)
    gap_rel_tol: float = Field(0.01, ge=0, description="Relative gap below which the eigenvalue gap is treated as zero")

    # asymptotics
    tau_c2: float = Field(0.05, gt=0)
    tau_root: float = Field(0.05, gt=0)
    c_noise_floor: float = Field(1e-4, gt=0, description="Edge coefficient magnitude treated as zero")

    # constructions
    boundary_pairs: int = Field(10_000, ge=10)
    max_probes: int = Field(64**3, ge=8)

    seed: int = Field(0, description="Seed for every sampled certificate")
    threads: int = Field(1, ge=1)

    def merged(self, overrides: Optional[Dict[str, Any]] = None) -> "Settings":
        """Return a copy with ``overrides`` applied and validated"""
        if not overrides:
            return self
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return Settings(**data)


def _from_environment() -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for name in Settings.model_fields:
        raw = os.getenv(f"{ENV_PREFIX}{name.upper()}")
        if raw is not None:
            values[name] = raw
    return values


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Settings built from defaults and the environment"""
    return Settings(**_from_environment())

"""Run settings.

Every knob the method leaves open (tolerances, seeds, order search, scaling
constants) lives here with a default. Values resolve as CLI flag, then
``MOLP_MOMENTS_*`` environment variable, then the dataclass default.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from typing import Literal, Optional

Variant = Literal["full-u", "reduced-u"]
FlatGap = Literal["practical", "strict"]
ScalingMode = Literal["enumerate", "conservative", "certificate"]

ENV_PREFIX = "MOLP_MOMENTS_"

DEFAULT_SEED = 20240101
DEFAULT_ENUMERATION_CAP = 10**6


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(ENV_PREFIX + name)
    return float(raw) if raw else default


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(ENV_PREFIX + name)
    return int(raw) if raw else default


@dataclass
class SolverSettings:
    """Interior-point settings. ``tol_gap`` bounds the complementarity mu."""

    tol_eq: float = 1e-8
    tol_psd: float = 1e-8
    tol_gap: float = 1e-10
    max_iters: int = 200
    step_fraction: float = 0.98

    @classmethod
    def from_env(cls) -> "SolverSettings":
        return cls(
            tol_eq=_env_float("TOL_EQ", cls.tol_eq),
            tol_psd=_env_float("TOL_PSD", cls.tol_psd),
            tol_gap=_env_float("TOL_GAP", cls.tol_gap),
            max_iters=_env_int("MAX_ITERS", cls.max_iters),
        )


@dataclass
class ExtractionSettings:
    tol_rank: float = 1e-6
    gap_factor: float = 1e3
    tol_round: float = 1e-4
    cond_max: float = 1e10
    pivot_ratio: float = 0.1
    seed: int = DEFAULT_SEED
    flat_gap: FlatGap = "practical"

    @classmethod
    def from_env(cls) -> "ExtractionSettings":
        return cls(
            tol_rank=_env_float("TOL_RANK", cls.tol_rank),
            tol_round=_env_float("TOL_ROUND", cls.tol_round),
            seed=_env_int("SEED", cls.seed),
        )


@dataclass
class ScalingSettings:
    """How M, M_i and the dual bounds are obtained.

    ``M`` / ``Mi`` overrides win over ``mode``; ``Mi`` may be a single value
    applied to every system.
    """

    mode: ScalingMode = "enumerate"
    M: Optional[int] = None
    Mi: Optional[tuple[int, ...]] = None
    M0: Optional[int] = None
    ub_dual: Optional[tuple[int, ...]] = None
    factor_limit: Optional[int] = None
    cap: int = DEFAULT_ENUMERATION_CAP


@dataclass
class PipelineSettings:
    """Configuration for a full solve."""

    variant: Variant = "full-u"
    systems: Optional[tuple[int, ...]] = None
    order: Optional[int] = None
    order_slack: int = 3
    max_moments: int = 5000
    include_zero_dual: bool = True
    eliminate_lambda: bool = True
    rescale: bool = True
    jobs: int = 1
    solver: SolverSettings = field(default_factory=SolverSettings)
    extraction: ExtractionSettings = field(default_factory=ExtractionSettings)
    scaling: ScalingSettings = field(default_factory=ScalingSettings)

    @classmethod
    def from_env(cls) -> "PipelineSettings":
        return cls(
            jobs=_env_int("JOBS", cls.jobs),
            max_moments=_env_int("MAX_MOMENTS", cls.max_moments),
            solver=SolverSettings.from_env(),
            extraction=ExtractionSettings.from_env(),
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        for key in ("systems",):
            if data[key] is not None:
                data[key] = list(data[key])
        for key in ("Mi", "ub_dual"):
            if data["scaling"][key] is not None:
                data["scaling"][key] = list(data["scaling"][key])
        return data

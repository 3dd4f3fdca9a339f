"""Flat key=value configuration for the batch pipeline.

File keys follow the knob names used throughout: kappa, omega, K (context
length), W (match half-window), N (block size), L (histogram bins), D0
(distortion normalizer, "auto" = block count), rho (inter-view penalty),
threshold (edge detection), disparity_scale, alphas, lambdas, seed, merge.
Lines are ``key = value``; '#' starts a comment.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .aec import AecParams
from .approx import ApproxConfig
from .swim import SwimConfig


@dataclass(frozen=True)
class PipelineConfig:
    kappa: float = 2.0
    omega: float = 1.0
    context: int = 3
    window: int = 10
    block: int = 16
    bins: int = 10
    norm: float | None = None
    rho: float = 1e6
    threshold: int = 30
    disparity_scale: float = 1.0
    alphas: tuple = (0.25, 0.5, 0.75)
    lambdas: tuple = (0.0, 0.5, 2.0, 8.0)
    seed: int = 0
    merge: bool = True

    def aec_params(self) -> AecParams:
        return AecParams(context_len=self.context, kappa=self.kappa, omega=self.omega)

    def swim_config(self) -> SwimConfig:
        return SwimConfig(block=self.block, window=self.window, bins=self.bins, norm=self.norm)

    def approx_config(self, lagrange: float = 0.0) -> ApproxConfig:
        return ApproxConfig(
            lagrange=lagrange,
            interview_weight=self.rho,
            merge=self.merge,
            aec=self.aec_params(),
            swim=self.swim_config(),
        )


_KEYS = {
    "kappa": "kappa",
    "omega": "omega",
    "K": "context",
    "W": "window",
    "N": "block",
    "L": "bins",
    "D0": "norm",
    "rho": "rho",
    "threshold": "threshold",
    "disparity_scale": "disparity_scale",
    "alphas": "alphas",
    "lambdas": "lambdas",
    "seed": "seed",
    "merge": "merge",
}

_INT_FIELDS = {"context", "window", "block", "bins", "threshold", "seed"}
_FLOAT_FIELDS = {"kappa", "omega", "rho", "disparity_scale"}


def parse_config(text: str) -> PipelineConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        field = _KEYS[key]
        if field in _INT_FIELDS:
            values[field] = int(val)
        elif field in _FLOAT_FIELDS:
            values[field] = float(val)
        elif field == "norm":
            values[field] = None if val.lower() in ("auto", "none") else float(val)
        elif field in ("alphas", "lambdas"):
            values[field] = tuple(float(v) for v in val.split(",") if v.strip())
        elif field == "merge":
            values[field] = val.strip().lower() not in ("0", "false", "no", "off")
    return PipelineConfig(**values)


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def with_overrides(cfg: PipelineConfig, **kwargs) -> PipelineConfig:
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})

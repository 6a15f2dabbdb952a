"""Designs of experiments on [0, 1]^d and their on-disk format.

Random kinds (Latin hypercube, iid uniform) draw from numpy's PCG64
generator so a seed pins the design bitwise.  Two fixed 2-d kinds
reproduce axis-aligned configurations that make additive Gram matrices
singular: the four corners of a rectangle, and a six-point "ladder"
whose rungs share coordinates pairwise.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "RNG_ALGORITHM",
    "Design",
    "DesignKind",
    "DoeConfig",
    "generate",
    "save_design",
    "load_design",
    "sidecar_path",
]

# Algorithm behind every seeded draw in the package; recorded in design
# metadata so a design file documents how to regenerate itself.
RNG_ALGORITHM = "numpy.random.PCG64"

_RECTANGLE = np.array([[0.2, 0.3], [0.8, 0.3], [0.2, 0.7], [0.8, 0.7]])

# Three x1 values and three x2 levels, each used by exactly two points:
# consecutive rungs share one x1 coordinate, closing a single linear
# dependence among the six additive observations.
_LADDER = np.array(
    [[0.15, 0.2], [0.45, 0.2], [0.85, 0.5], [0.15, 0.5], [0.85, 0.9], [0.45, 0.9]]
)


class DesignKind(str, Enum):
    LHS = "lhs"
    UNIFORM = "uniform"
    RECTANGLE = "rectangle"
    LADDER = "ladder"


@dataclass(frozen=True)
class Design:
    """An n x d point set with every coordinate in [0, 1] and no duplicate rows."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError(f"design points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[1] == 0:
            raise ValueError("design must have at least one coordinate")
        if not np.all(np.isfinite(pts)):
            raise ValueError("design points must be finite")
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ValueError("design points must lie in the unit hypercube")
        if len(np.unique(pts, axis=0)) != pts.shape[0]:
            raise ValueError("design contains duplicate points")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DoeConfig:
    kind: DesignKind
    n: int | None = None
    d: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", DesignKind(self.kind))
        fixed = {DesignKind.RECTANGLE: 4, DesignKind.LADDER: 6}
        if self.kind in fixed:
            # shape is pinned; stating it explicitly is allowed but checked
            want = fixed[self.kind]
            if self.n is None:
                object.__setattr__(self, "n", want)
            if self.d is None:
                object.__setattr__(self, "d", 2)
            if self.n != want or self.d != 2:
                raise ValueError(
                    f"kind {self.kind.value!r} is a fixed design with n={want}, d=2"
                )
            return
        if self.n is None or self.d is None:
            raise ValueError(f"kind {self.kind.value!r} requires both n and d")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")


def generate(cfg: DoeConfig) -> Design:
    """Generate the design described by ``cfg``; same config, same points."""
    if cfg.kind == DesignKind.RECTANGLE:
        return Design(_RECTANGLE)
    if cfg.kind == DesignKind.LADDER:
        return Design(_LADDER)
    rng = np.random.default_rng(cfg.seed)
    if cfg.kind == DesignKind.UNIFORM:
        return Design(rng.uniform(size=(cfg.n, cfg.d)))
    # Latin hypercube: one point per stratum in every coordinate, jittered
    # uniformly inside the stratum.
    pts = np.empty((cfg.n, cfg.d))
    for j in range(cfg.d):
        perm = rng.permutation(cfg.n)
        pts[:, j] = (perm + rng.uniform(size=cfg.n)) / cfg.n
    return Design(pts)


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".meta.json")


def save_design(design: Design, path, cfg: DoeConfig | None = None) -> None:
    """Write points as CSV with header x1..xd, plus a metadata sidecar.

    Floats are written with full round-trip precision so a load returns
    the exact same matrix.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(design.dim)])
        for row in design.points:
            writer.writerow([repr(float(v)) for v in row])
    meta = {"n": len(design), "d": design.dim, "rng": RNG_ALGORITHM}
    if cfg is not None:
        meta["kind"] = cfg.kind.value
        meta["seed"] = cfg.seed
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_design(path) -> Design:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty design file")
        expected = [f"x{j + 1}" for j in range(len(header))]
        if header != expected:
            raise ValueError(f"{path}: expected header {expected}, got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    pts = np.asarray(rows, dtype=float)
    if pts.size == 0:
        pts = pts.reshape(0, len(header))
    return Design(pts)

"""Basin reconstruction on evaluation grids and boundary extraction from
near-0.5 classification probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynsys import IntegratorConfig, LorenzParams, fixed_points, integrate_many
from .labeling import DEFAULT_LABEL_EPS, SamplingDomain
from .mlp import NetworkParams, forward_batch
from .fileio import FORMAT_VERSIONS, sidecar_path, write_csv, write_json

# forward passes are chunked so dense lattices stay memory-bounded
_EVAL_CHUNK = 65536


@dataclass(frozen=True)
class GridSpec2D:
    """Planar lattice at fixed z; points ordered x-major (x slowest)."""

    plane_z: float
    x_range: tuple[float, float] = (-20.0, 20.0)
    y_range: tuple[float, float] = (-20.0, 20.0)
    nx: int = 100
    ny: int = 100

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("nx and ny must be >= 2")
        if not (self.x_range[0] < self.x_range[1] and self.y_range[0] < self.y_range[1]):
            raise ValueError("ranges must be nondegenerate")

    def points(self) -> np.ndarray:
        xs = np.linspace(self.x_range[0], self.x_range[1], self.nx)
        ys = np.linspace(self.y_range[0], self.y_range[1], self.ny)
        pts = np.empty((self.nx * self.ny, 3))
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts[:, 0] = gx.ravel()
        pts[:, 1] = gy.ravel()
        pts[:, 2] = self.plane_z
        return pts


@dataclass(frozen=True)
class SphereSpec:
    """Spherical lattice: theta in [0, pi] inclusive, phi in [0, 2 pi)."""

    center: tuple[float, float, float]
    radius: float = 30.0
    n_theta: int = 200
    n_phi: int = 400

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError("radius must be positive")
        if self.n_theta < 2 or self.n_phi < 1:
            raise ValueError("need n_theta >= 2 and n_phi >= 1")

    def angles(self):
        thetas = np.linspace(0.0, math.pi, self.n_theta)
        phis = np.linspace(0.0, 2.0 * math.pi, self.n_phi, endpoint=False)
        return thetas, phis

    def points(self):
        thetas, phis = self.angles()
        tg, pg = np.meshgrid(thetas, phis, indexing="ij")
        tg, pg = tg.ravel(), pg.ravel()
        c = np.asarray(self.center, dtype=float)
        pts = np.empty((tg.size, 3))
        pts[:, 0] = c[0] + self.radius * np.sin(tg) * np.cos(pg)
        pts[:, 1] = c[1] + self.radius * np.sin(tg) * np.sin(pg)
        pts[:, 2] = c[2] + self.radius * np.cos(tg)
        return pts, tg, pg


def midway_center(params: LorenzParams) -> tuple[float, float, float]:
    """(0, 0, r - 1): the point midway between the two attractors."""
    return (0.0, 0.0, params.r - 1.0)


@dataclass
class ProbField:
    points: np.ndarray  # (n, 3)
    probs: np.ndarray   # (n,)
    classes: np.ndarray  # (n,) in {0, 1}, consistent with probs at threshold 0.5


@dataclass
class SphereField(ProbField):
    thetas: np.ndarray
    phis: np.ndarray


def _evaluate(net: NetworkParams, pts: np.ndarray) -> np.ndarray:
    probs = np.empty(len(pts))
    for lo in range(0, len(pts), _EVAL_CHUNK):
        probs[lo:lo + _EVAL_CHUNK] = forward_batch(net, pts[lo:lo + _EVAL_CHUNK])
    return probs


def evaluate_slice(net: NetworkParams, spec: GridSpec2D) -> ProbField:
    """Classifier probabilities over a z = const lattice, x-major order."""
    pts = spec.points()
    probs = _evaluate(net, pts)
    return ProbField(pts, probs, (probs >= 0.5).astype(np.int8))


def evaluate_sphere(net: NetworkParams, spec: SphereSpec) -> SphereField:
    """Classifier probabilities over a sphere, theta-major order."""
    pts, tg, pg = spec.points()
    probs = _evaluate(net, pts)
    return SphereField(pts, probs, (probs >= 0.5).astype(np.int8), tg, pg)


def volume_lattice(volume: SamplingDomain, resolution) -> np.ndarray:
    """Row-major dense lattice over the volume (x slowest, z fastest)."""
    if isinstance(resolution, int):
        resolution = (resolution, resolution, resolution)
    nx, ny, nz = (int(v) for v in resolution)
    if min(nx, ny, nz) < 2:
        raise ValueError("resolution must be >= 2 per axis")
    axes = [np.linspace(volume.lower[d], volume.upper[d], n)
            for d, n in enumerate((nx, ny, nz))]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])


def extract_boundary(net: NetworkParams, volume: SamplingDomain = SamplingDomain(),
                     resolution=60, band: tuple[float, float] = (0.4, 0.6)):
    """Lattice points whose class-1 probability falls strictly inside band.

    These points cluster around the classifier's decision boundary, which
    approximates the basin boundary.  An empty result is valid.  Returns
    (points (m, 3), probs (m,)).
    """
    lo, hi = band
    if not lo < 0.5 < hi:
        raise ValueError(f"band must straddle 0.5, got {band}")
    pts = volume_lattice(volume, resolution)
    probs = _evaluate(net, pts)
    keep = (probs > lo) & (probs < hi)
    return pts[keep], probs[keep]


def ground_truth_slice(params: LorenzParams, spec: GridSpec2D,
                       cfg: IntegratorConfig = IntegratorConfig(),
                       eps: float = DEFAULT_LABEL_EPS,
                       workers: int = 1) -> np.ndarray:
    """Direct-integration labels over the slice lattice, aligned with
    evaluate_slice ordering; undecided cells carry -1."""
    if not params.bistable:
        raise ValueError(f"r = {params.r} outside the bistable range")
    pts = spec.points()
    finals, _, status = integrate_many(params, pts, cfg, workers=workers)
    cp, cm = fixed_points(params)
    dp = np.linalg.norm(finals - np.asarray(cp), axis=1)
    dm = np.linalg.norm(finals - np.asarray(cm), axis=1)
    labels = np.full(len(pts), -1, dtype=np.int8)
    decided = status == 0
    labels[decided & (dp < eps)] = 1
    labels[decided & (dm < eps)] = 0
    return labels


def grid_accuracy(field: ProbField, truth: np.ndarray) -> float:
    """Agreement between field classes and decided ground-truth cells."""
    truth = np.asarray(truth)
    decided = truth >= 0
    if not decided.any():
        raise ValueError("no decided ground-truth cells")
    return float(np.mean(field.classes[decided] == truth[decided]))


def save_slice(field: ProbField, path, spec: GridSpec2D,
               truth: np.ndarray | None = None,
               provenance: dict | None = None) -> None:
    header = ["x", "y", "z", "prob", "class"]
    if truth is not None:
        header.append("truth")
        rows = ((p[0], p[1], p[2], pr, int(c), int(t))
                for p, pr, c, t in zip(field.points, field.probs, field.classes, truth))
    else:
        rows = ((p[0], p[1], p[2], pr, int(c))
                for p, pr, c in zip(field.points, field.probs, field.classes))
    write_csv(path, header, rows)
    meta = {
        "format_version": FORMAT_VERSIONS["slice"],
        "spec": {"plane_z": spec.plane_z, "x_range": list(spec.x_range),
                 "y_range": list(spec.y_range), "nx": spec.nx, "ny": spec.ny},
        "with_truth": truth is not None,
    }
    if provenance:
        meta["provenance"] = provenance
    write_json(sidecar_path(path), meta)


def save_sphere(field: SphereField, path, spec: SphereSpec,
                provenance: dict | None = None) -> None:
    rows = ((t, ph, p[0], p[1], p[2], pr, int(c))
            for t, ph, p, pr, c in zip(field.thetas, field.phis, field.points,
                                       field.probs, field.classes))
    write_csv(path, ["theta", "phi", "x", "y", "z", "prob", "class"], rows)
    meta = {
        "format_version": FORMAT_VERSIONS["sphere"],
        "spec": {"center": list(spec.center), "radius": spec.radius,
                 "n_theta": spec.n_theta, "n_phi": spec.n_phi},
    }
    if provenance:
        meta["provenance"] = provenance
    write_json(sidecar_path(path), meta)


def save_boundary(points: np.ndarray, probs: np.ndarray, path,
                  volume: SamplingDomain, resolution, band,
                  provenance: dict | None = None) -> None:
    rows = ((p[0], p[1], p[2], pr) for p, pr in zip(points, probs))
    write_csv(path, ["x", "y", "z", "prob"], rows)
    if isinstance(resolution, int):
        resolution = (resolution, resolution, resolution)
    meta = {
        "format_version": FORMAT_VERSIONS["boundary"],
        "volume": {"lower": list(volume.lower), "upper": list(volume.upper)},
        "resolution": list(resolution),
        "band": list(band),
        "n_points": int(len(points)),
    }
    if provenance:
        meta["provenance"] = provenance
    write_json(sidecar_path(path), meta)

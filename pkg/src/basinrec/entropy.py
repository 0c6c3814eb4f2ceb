"""Basin entropy: box-averaged Gibbs entropy of terminal-attractor frequencies."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .dynsys import IntegratorConfig, LorenzParams, integrate_many, fixed_points
from .labeling import DEFAULT_LABEL_EPS, SamplingDomain
from .fileio import FORMAT_VERSIONS, sidecar_path, write_csv, write_json

LOG_BASES = ("natural", "2")


@dataclass(frozen=True)
class EntropyConfig:
    """Box placement and sampling budget for the basin-entropy estimator.

    Box centers are drawn uniformly from the domain (seeded); each cube of
    side box_side is clipped to the domain, so boxes always lie fully
    inside it.  Orbits for box i come from the RNG substream keyed by
    (seed, i), making parallel evaluation order-independent.
    """

    n_boxes: int = 25
    trajs_per_box: int = 25
    box_side: float = 4.0
    domain: SamplingDomain = SamplingDomain()
    log_base: str = "natural"
    seed: int = 0

    def __post_init__(self):
        if self.n_boxes < 1:
            raise ValueError("n_boxes must be >= 1")
        if self.trajs_per_box < 2:
            raise ValueError("trajs_per_box must be >= 2")
        if not self.box_side > 0.0:
            raise ValueError("box_side must be positive")
        if self.log_base not in LOG_BASES:
            raise ValueError(f"log_base must be one of {LOG_BASES}")


@dataclass(frozen=True)
class BoxResult:
    center: tuple[float, float, float]
    counts: tuple[int, int, int]  # (n_CMinus, n_CPlus, n_undecided)
    entropy: float
    usable: bool  # False when fewer than 2 decided orbits


@dataclass(frozen=True)
class EntropyResult:
    value: float
    boxes: list[BoxResult]
    n_unusable: int


def box_entropy(counts, log_base: str = "natural") -> float:
    """Gibbs entropy of the per-class relative frequencies in one box.

    counts holds the decided per-class tallies; zero-count classes
    contribute nothing (0 log 1/0 := 0).
    """
    if log_base not in LOG_BASES:
        raise ValueError(f"log_base must be one of {LOG_BASES}")
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise ValueError("counts must be non-negative")
    total = sum(counts)
    if total < 1:
        raise ValueError("box has no decided orbits")
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log(p)
    if log_base == "2":
        h /= math.log(2.0)
    return h


def _default_labeler(params: LorenzParams, integ: IntegratorConfig,
                     eps: float, workers: int):
    cp, cm = fixed_points(params)

    def labeler(ics: np.ndarray) -> np.ndarray:
        finals, _, status = integrate_many(params, ics, integ, workers=workers)
        dp = np.linalg.norm(finals - np.asarray(cp), axis=1)
        dm = np.linalg.norm(finals - np.asarray(cm), axis=1)
        labels = np.full(len(ics), -1, dtype=np.int8)
        decided = status == 0
        labels[decided & (dp < eps)] = 1
        labels[decided & (dm < eps)] = 0
        return labels

    return labeler


def box_bounds(cfg: EntropyConfig, center: np.ndarray):
    half = cfg.box_side / 2.0
    lo = np.maximum(center - half, np.asarray(cfg.domain.lower, dtype=float))
    hi = np.minimum(center + half, np.asarray(cfg.domain.upper, dtype=float))
    return lo, hi


def basin_entropy(params: LorenzParams, cfg: EntropyConfig = EntropyConfig(),
                  integ: IntegratorConfig = IntegratorConfig(),
                  labeler=None, eps: float = DEFAULT_LABEL_EPS,
                  workers: int = 1) -> EntropyResult:
    """Average per-box entropy over seeded random boxes.

    labeler maps an (m, 3) array of initial conditions to labels in
    {0, 1, -1 (undecided)}; by default it integrates the Lorenz flow.
    Boxes with fewer than 2 decided orbits contribute zero entropy and are
    flagged.  Entropies are accumulated in natural log and converted once
    at the end, so the base-2 value equals the natural value divided by
    log 2 exactly.
    """
    if not params.bistable:
        raise ValueError(f"r = {params.r} outside the bistable range")
    if labeler is None:
        labeler = _default_labeler(params, integ, eps, workers)

    rng_centers = np.random.default_rng(np.random.SeedSequence([int(cfg.seed)]))
    lo = np.asarray(cfg.domain.lower, dtype=float)
    hi = np.asarray(cfg.domain.upper, dtype=float)
    centers = lo + rng_centers.random((cfg.n_boxes, 3)) * (hi - lo)

    ics = np.empty((cfg.n_boxes * cfg.trajs_per_box, 3))
    for i in range(cfg.n_boxes):
        blo, bhi = box_bounds(cfg, centers[i])
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), i]))
        rows = slice(i * cfg.trajs_per_box, (i + 1) * cfg.trajs_per_box)
        ics[rows] = blo + rng.random((cfg.trajs_per_box, 3)) * (bhi - blo)

    labels = np.asarray(labeler(ics))
    boxes = []
    total = 0.0
    n_unusable = 0
    for i in range(cfg.n_boxes):
        rows = labels[i * cfg.trajs_per_box:(i + 1) * cfg.trajs_per_box]
        n0 = int((rows == 0).sum())
        n1 = int((rows == 1).sum())
        n_und = cfg.trajs_per_box - n0 - n1
        usable = (n0 + n1) >= 2
        h = box_entropy((n0, n1)) if usable else 0.0
        if not usable:
            n_unusable += 1
        total += h
        boxes.append(BoxResult(tuple(centers[i]), (n0, n1, n_und), h, usable))

    value = total / cfg.n_boxes
    if cfg.log_base == "2":
        value = value / math.log(2.0)
        boxes = [BoxResult(b.center, b.counts, b.entropy / math.log(2.0), b.usable)
                 for b in boxes]
    return EntropyResult(value, boxes, n_unusable)


ENTROPY_HEADER = ["box_index", "cx", "cy", "cz", "n0", "n1", "n_undecided", "entropy"]


def save_entropy(result: EntropyResult, path, params: LorenzParams,
                 cfg: EntropyConfig, integ: IntegratorConfig) -> None:
    """Per-box CSV plus a JSON summary holding the averaged entropy."""
    rows = ((i, b.center[0], b.center[1], b.center[2],
             b.counts[0], b.counts[1], b.counts[2], b.entropy)
            for i, b in enumerate(result.boxes))
    write_csv(path, ENTROPY_HEADER, rows)
    summary = {
        "format_version": FORMAT_VERSIONS["entropy"],
        "basin_entropy": result.value,
        "n_unusable_boxes": result.n_unusable,
        "params": {"r": params.r, "sigma": params.sigma, "beta": params.beta},
        "config": {
            "n_boxes": cfg.n_boxes,
            "trajs_per_box": cfg.trajs_per_box,
            "box_side": cfg.box_side,
            "domain": {"lower": list(cfg.domain.lower), "upper": list(cfg.domain.upper)},
            "log_base": cfg.log_base,
            "seed": cfg.seed,
        },
        "integrator": asdict(integ),
    }
    write_json(sidecar_path(path, "summary"), summary)

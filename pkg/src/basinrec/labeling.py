"""Attractor-labeled datasets: sample initial conditions, integrate to rest,
record which fixed point captured each trajectory."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from enum import IntEnum
from pathlib import Path

import numpy as np

from .dynsys import IntegratorConfig, LorenzParams, fixed_points, integrate_many, integrate_to_rest
from .fileio import FORMAT_VERSIONS, sidecar_path, write_csv, write_json

# Terminal classification radius.  Strictly larger than the integrator's
# default convergence_radius (1e-3) so every converged run is decidable.
DEFAULT_LABEL_EPS = 1e-2


class AttractorLabel(IntEnum):
    C_MINUS = 0
    C_PLUS = 1
    UNDECIDED = -1


@dataclass(frozen=True)
class LabeledSample:
    ic: tuple[float, float, float]
    label: AttractorLabel
    settle_time: float


@dataclass(frozen=True)
class SamplingDomain:
    """Axis-aligned box from which initial conditions are drawn."""

    lower: tuple[float, float, float] = (-50.0, -50.0, -50.0)
    upper: tuple[float, float, float] = (50.0, 50.0, 50.0)

    def __post_init__(self):
        lo, hi = self.lower, self.upper
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("domain bounds must be 3-vectors")
        if not all(math.isfinite(a) and math.isfinite(b) and a < b for a, b in zip(lo, hi)):
            raise ValueError(f"need lower < upper component-wise, got {lo} / {hi}")

    def contains(self, pt) -> bool:
        return all(a <= float(v) <= b for a, b, v in zip(self.lower, self.upper, pt))

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float) - np.asarray(self.lower, dtype=float)


class LabeledDataset:
    """Columnar store of decided samples; iterates as LabeledSample records."""

    def __init__(self, ics: np.ndarray, labels: np.ndarray, settle_times: np.ndarray):
        ics = np.asarray(ics, dtype=float).reshape(-1, 3)
        labels = np.asarray(labels, dtype=np.int8).reshape(-1)
        settle_times = np.asarray(settle_times, dtype=float).reshape(-1)
        if not (len(ics) == len(labels) == len(settle_times)):
            raise ValueError("column lengths disagree")
        if len(labels) and not np.isin(labels, (0, 1)).all():
            raise ValueError("dataset labels must be 0 or 1")
        self.ics = ics
        self.labels = labels
        self.settle_times = settle_times

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> LabeledSample:
        return LabeledSample(tuple(self.ics[i]), AttractorLabel(int(self.labels[i])),
                             float(self.settle_times[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.ics[idx], self.labels[idx], self.settle_times[idx])


@dataclass(frozen=True)
class DatasetResult:
    data: LabeledDataset
    undecided_fraction: float
    n_requested: int
    n_undecided: int
    n_failed: int  # integration failures, a subset of the undecided


def classify_final_state(final, params: LorenzParams, eps: float = DEFAULT_LABEL_EPS,
                         converged: bool = True) -> AttractorLabel:
    """Assign the terminal state to C+ / C- by proximity, else UNDECIDED."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if not converged:
        return AttractorLabel.UNDECIDED
    cp, cm = fixed_points(params)
    dp = sum((float(a) - b) ** 2 for a, b in zip(final, cp))
    dm = sum((float(a) - b) ** 2 for a, b in zip(final, cm))
    if dp < eps * eps:
        return AttractorLabel.C_PLUS
    if dm < eps * eps:
        return AttractorLabel.C_MINUS
    return AttractorLabel.UNDECIDED


def label_initial_condition(params: LorenzParams, ic,
                            cfg: IntegratorConfig = IntegratorConfig(),
                            eps: float = DEFAULT_LABEL_EPS) -> LabeledSample:
    """Integrate one initial condition to rest and classify the endpoint."""
    final, elapsed, converged = integrate_to_rest(params, ic, cfg)
    label = classify_final_state(final, params, eps, converged)
    return LabeledSample((float(ic[0]), float(ic[1]), float(ic[2])), label, elapsed)


def sample_ic(domain: SamplingDomain, seed: int, index: int) -> np.ndarray:
    """The index-th initial condition of the stream keyed by (seed, index).

    Each sample owns an RNG substream, so any partition of the index range
    across workers reproduces the sequential draw exactly.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    lo = np.asarray(domain.lower, dtype=float)
    hi = np.asarray(domain.upper, dtype=float)
    return lo + rng.random(3) * (hi - lo)


def generate_dataset(params: LorenzParams, n: int,
                     domain: SamplingDomain = SamplingDomain(),
                     cfg: IntegratorConfig = IntegratorConfig(),
                     seed: int = 0,
                     eps: float = DEFAULT_LABEL_EPS,
                     workers: int = 1) -> DatasetResult:
    """Draw n uniform initial conditions, label each by its terminal attractor.

    Undecided trajectories (non-converged, unclassifiable, or failed
    integrations) are dropped from the returned dataset; their fraction is
    reported.  Output is ordered by sample index and is a pure function of
    (params, n, domain, cfg, seed, eps) regardless of worker count.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not params.bistable:
        raise ValueError(f"r = {params.r} outside the bistable range "
                         f"({1} < r < {24.74})")
    ics = np.empty((n, 3))
    for i in range(n):
        ics[i] = sample_ic(domain, seed, i)
    finals, elapsed, status = integrate_many(params, ics, cfg, workers=workers)

    cp, cm = fixed_points(params)
    dp = np.linalg.norm(finals - np.asarray(cp), axis=1)
    dm = np.linalg.norm(finals - np.asarray(cm), axis=1)
    labels = np.full(n, AttractorLabel.UNDECIDED, dtype=np.int8)
    decided = status == 0
    labels[decided & (dp < eps)] = AttractorLabel.C_PLUS
    labels[decided & (dm < eps)] = AttractorLabel.C_MINUS

    keep = labels >= 0
    data = LabeledDataset(ics[keep], labels[keep], elapsed[keep])
    n_undecided = int(n - keep.sum())
    return DatasetResult(
        data=data,
        undecided_fraction=n_undecided / n,
        n_requested=n,
        n_undecided=n_undecided,
        n_failed=int((status == 2).sum()),
    )


def train_test_split(data: LabeledDataset, train_fraction: float, seed: int = 0):
    """Seeded uniform permutation; first floor(n * fraction) rows train."""
    if len(data) == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(int(seed))
    perm = rng.permutation(len(data))
    n_train = int(len(data) * train_fraction)
    return data.subset(perm[:n_train]), data.subset(perm[n_train:])


DATASET_HEADER = ["x0", "y0", "z0", "label", "settle_time"]


def save_dataset(result: DatasetResult, path, params: LorenzParams,
                 domain: SamplingDomain, cfg: IntegratorConfig, seed: int) -> None:
    """Write the dataset CSV plus a JSON sidecar with full provenance."""
    data = result.data
    rows = ((data.ics[i, 0], data.ics[i, 1], data.ics[i, 2],
             int(data.labels[i]), data.settle_times[i]) for i in range(len(data)))
    write_csv(path, DATASET_HEADER, rows)
    meta = {
        "format_version": FORMAT_VERSIONS["dataset"],
        "params": {"r": params.r, "sigma": params.sigma, "beta": params.beta},
        "domain": {"lower": list(domain.lower), "upper": list(domain.upper)},
        "integrator": asdict(cfg),
        "seed": int(seed),
        "n_requested": result.n_requested,
        "n_samples": len(data),
        "n_undecided": result.n_undecided,
        "n_failed": result.n_failed,
        "undecided_fraction": result.undecided_fraction,
    }
    write_json(sidecar_path(path), meta)


def load_dataset(path) -> LabeledDataset:
    """Parse a dataset CSV; malformed rows are reported with line numbers."""
    path = Path(path)
    ics, labels, times = [], [], []
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.split(",") != DATASET_HEADER:
            raise ValueError(f"{path}: line 1: expected header "
                             f"{','.join(DATASET_HEADER)!r}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ValueError(f"{path}: line {lineno}: expected 5 fields, got {len(parts)}")
            try:
                ics.append([float(parts[0]), float(parts[1]), float(parts[2])])
                label = int(parts[3])
                times.append(float(parts[4]))
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            if label not in (0, 1):
                raise ValueError(f"{path}: line {lineno}: label must be 0 or 1, got {label}")
            labels.append(label)
    if not labels:
        raise ValueError(f"{path}: no samples")
    return LabeledDataset(np.array(ics), np.array(labels), np.array(times))

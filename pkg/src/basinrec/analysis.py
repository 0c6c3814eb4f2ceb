"""The r-sweep experiment and the statistical fits run on its output:
exponential trend fits, accuracy-vs-entropy regressions, and the Student-t
machinery behind their p-values."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .dynsys import IntegratorConfig, LorenzParams
from .entropy import EntropyConfig, basin_entropy
from .labeling import SamplingDomain, generate_dataset, train_test_split
from .mlp import NetworkArch, TrainConfig, train
from .fileio import FORMAT_VERSIONS, write_csv, write_json

_BETACF_MAX_ITER = 300
_BETACF_EPS = 3e-16
_TINY = 1e-300

# Levenberg-Marquardt damping schedule
_LM_LAMBDA0 = 1e-3
_LM_UP = 10.0
_LM_DOWN = 10.0
_LM_MAX_ITER = 200
_LM_STEP_TOL = 1e-10
_LM_RELATIVE_TOL = 1e-12
_LM_LAMBDA_CAP = 1e12


@dataclass(frozen=True)
class SweepRow:
    r: float
    accuracy: float
    basin_entropy: float
    undecided_fraction: float
    failed: bool = False


@dataclass
class FitResult:
    params: dict[str, float]
    std_errors: dict[str, float]
    p_values: dict[str, float]
    residual_norm: float
    converged: bool
    message: str = ""


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    return h  # converged to machine precision long before this in practice


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _t_tail(t_abs: float, dof: int) -> float:
    """P(T > t_abs) for t_abs >= 0; exact in the far tail (no cancellation)."""
    if math.isinf(t_abs):
        return 0.0
    x = dof / (dof + t_abs * t_abs)
    return 0.5 * _betainc(dof / 2.0, 0.5, x)


def t_cdf(t: float, dof: int) -> float:
    """Student-t cumulative distribution via the incomplete beta."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    t = float(t)
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    if t == 0.0:
        return 0.5
    tail = _t_tail(abs(t), dof)
    return 1.0 - tail if t > 0 else tail


def fit_linear(x, y) -> FitResult:
    """Ordinary least squares y = intercept + slope * x with standard
    errors and two-sided t-test p-values (dof = n - 2)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise ValueError("x and y lengths differ")
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 points")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("inputs must be finite")
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        raise ValueError("x values are all equal; slope undefined")

    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    rss = float(resid @ resid)
    dof = n - 2
    sigma2 = rss / dof
    se_slope = math.sqrt(sigma2 / sxx)
    se_intercept = math.sqrt(sigma2 * (1.0 / n + x.mean() ** 2 / sxx))

    def pval(est: float, se: float) -> float:
        if se == 0.0:
            return 1.0 if est == 0.0 else 0.0
        return 2.0 * _t_tail(abs(est) / se, dof)

    return FitResult(
        params={"intercept": intercept, "slope": slope},
        std_errors={"intercept": se_intercept, "slope": se_slope},
        p_values={"intercept": pval(intercept, se_intercept),
                  "slope": pval(slope, se_slope)},
        residual_norm=math.sqrt(rss),
        converged=True,
    )


def _exp_model(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    alpha, beta, gamma = theta
    return alpha * np.exp(beta * x) + gamma


def _exp_jacobian(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    alpha, beta, _ = theta
    e = np.exp(beta * x)
    return np.column_stack([e, alpha * x * e, np.ones_like(x)])


def default_exp_init(x, y) -> tuple[float, float, float]:
    y = np.asarray(y, dtype=float)
    return (math.copysign(1e-3, y[-1] - y[0]), 0.3, float(y.mean()))


def fit_exponential(x, y, init: tuple[float, float, float] | None = None) -> FitResult:
    """Least-squares fit of amplitude * exp(rate * x) + offset.

    Levenberg-Marquardt with the analytic Jacobian; a step is accepted
    only when it does not increase the residual sum of squares.  Standard
    errors come from the Gauss-Newton covariance at the solution.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise ValueError("x and y lengths differ")
    if x.size < 4:
        raise ValueError("need at least 4 points for a 3-parameter fit")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("inputs must be finite")

    theta = np.asarray(init if init is not None else default_exp_init(x, y), dtype=float)
    resid = y - _exp_model(theta, x)
    rss = float(resid @ resid)
    lam = _LM_LAMBDA0
    converged = False
    message = "iteration limit reached"

    for _ in range(_LM_MAX_ITER):
        jac = _exp_jacobian(theta, x)
        jtj = jac.T @ jac
        jtr = jac.T @ resid
        try:
            step = np.linalg.solve(jtj + lam * np.eye(3), jtr)
        except np.linalg.LinAlgError:
            lam *= _LM_UP
            if lam > _LM_LAMBDA_CAP:
                message = "singular normal equations"
                break
            continue
        candidate = theta + step
        # wild candidates may overflow exp; they are rejected just below
        with np.errstate(over="ignore", invalid="ignore"):
            cand_resid = y - _exp_model(candidate, x)
            cand_rss = float(cand_resid @ cand_resid)
        if np.isfinite(cand_rss) and cand_rss <= rss:
            rel_drop = (rss - cand_rss) / rss if rss > 0 else 0.0
            theta, resid, rss = candidate, cand_resid, cand_rss
            lam = max(lam / _LM_DOWN, 1e-15)
            if float(np.linalg.norm(step)) < _LM_STEP_TOL or rel_drop < _LM_RELATIVE_TOL:
                converged = True
                message = "converged"
                break
        else:
            lam *= _LM_UP
            if lam > _LM_LAMBDA_CAP:
                message = "damping exhausted without an acceptable step"
                break

    names = ("alpha", "beta", "gamma")
    dof = x.size - 3
    jac = _exp_jacobian(theta, x)
    try:
        cov = np.linalg.inv(jac.T @ jac) * (rss / dof if dof > 0 else math.nan)
        se = np.sqrt(np.abs(np.diag(cov)))
    except np.linalg.LinAlgError:
        se = np.full(3, math.inf)
        converged = False
        message = "singular normal equations at solution"
    return FitResult(
        params=dict(zip(names, (float(v) for v in theta))),
        std_errors=dict(zip(names, (float(v) for v in se))),
        p_values={},
        residual_norm=math.sqrt(rss),
        converged=converged,
        message=message,
    )


class RunSeeds(NamedTuple):
    """Independent integer seeds for the stages of one pipeline run."""

    dataset: int
    split: int
    train: int
    entropy: int


def derive_seeds(master_seed: int, index: int | None = None) -> RunSeeds:
    """Stable per-stage seeds from a master seed (and sweep index)."""
    entropy = [int(master_seed)] if index is None else [int(master_seed), int(index)]
    state = np.random.SeedSequence(entropy).generate_state(4)
    return RunSeeds(*(int(v) for v in state))


@dataclass(frozen=True)
class SweepConfig:
    """Per-r pipeline configuration for the accuracy / entropy sweep."""

    n_samples: int = 20000
    train_fraction: float = 0.8
    sigma: float = 10.0
    beta: float = 8.0 / 3.0
    domain: SamplingDomain = SamplingDomain()
    integrator: IntegratorConfig = IntegratorConfig()
    arch: NetworkArch = NetworkArch()
    train_cfg: TrainConfig = TrainConfig()
    entropy_cfg: EntropyConfig = EntropyConfig()


DEFAULT_SWEEP_R = (4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0)


def sweep(r_values, cfg: SweepConfig = SweepConfig(), master_seed: int = 0,
          workers: int = 1) -> list[SweepRow]:
    """Train and evaluate the full pipeline at each r.

    Per-r randomness derives from (master_seed, index); the basin-entropy
    box placement is shared across all r (seeded by master_seed alone) so
    that entropies are comparable along the sweep.  A failing r yields a
    NaN row flagged failed instead of aborting.
    """
    r_values = [float(r) for r in r_values]
    if sorted(r_values) != r_values:
        raise ValueError("r_values must be sorted ascending")
    entropy_seed = derive_seeds(master_seed).entropy
    rows = []
    for i, r in enumerate(r_values):
        seeds = derive_seeds(master_seed, i)
        try:
            params = LorenzParams(r=r, sigma=cfg.sigma, beta=cfg.beta)
            result = generate_dataset(params, cfg.n_samples, cfg.domain,
                                      cfg.integrator, seeds.dataset, workers=workers)
            tr, te = train_test_split(result.data, cfg.train_fraction, seeds.split)
            train_cfg = replace(cfg.train_cfg, seed=seeds.train)
            _, report = train(tr, te, cfg.arch, train_cfg)
            ent_cfg = replace(cfg.entropy_cfg, seed=entropy_seed)
            ent = basin_entropy(params, ent_cfg, cfg.integrator, workers=workers)
            rows.append(SweepRow(r, report.final_test_accuracy, ent.value,
                                 result.undecided_fraction))
        except (ValueError, RuntimeError):
            rows.append(SweepRow(r, math.nan, math.nan, math.nan, failed=True))
    return rows


def two_region_fits(rows: list[SweepRow], split: tuple[float, float] = (13.5, 14.0)):
    """Accuracy-vs-entropy linear fits below and above the homoclinic
    transition; rows with r strictly inside the split gap are excluded."""
    usable = [row for row in rows if not row.failed]
    low = [row for row in usable if row.r <= split[0]]
    high = [row for row in usable if row.r >= split[1]]
    if len(low) < 3 or len(high) < 3:
        raise ValueError(f"each region needs >= 3 rows, got {len(low)} and {len(high)}")
    fit_low = fit_linear([row.basin_entropy for row in low],
                         [row.accuracy for row in low])
    fit_high = fit_linear([row.basin_entropy for row in high],
                          [row.accuracy for row in high])
    return fit_low, fit_high


SWEEP_HEADER = ["r", "accuracy", "basin_entropy", "undecided_fraction"]


def save_sweep(rows: list[SweepRow], path) -> None:
    write_csv(path, SWEEP_HEADER,
              ((row.r, row.accuracy, row.basin_entropy, row.undecided_fraction)
               for row in rows))


def save_fit(fit: FitResult, path, label: str = "") -> None:
    write_json(path, {
        "format_version": FORMAT_VERSIONS["fit"],
        "label": label,
        "params": fit.params,
        "std_errors": fit.std_errors,
        "p_values": fit.p_values,
        "residual_norm": fit.residual_norm,
        "converged": fit.converged,
        "message": fit.message,
    })

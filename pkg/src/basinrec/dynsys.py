"""Lorenz vector field, its fixed points, and an adaptive Tsitouras 5(4) integrator.

The integrator advances an initial condition until the trajectory settles
into one of the two stable fixed points (or a time cap is hit).  The hot
loop is a numba kernel specialised to the Lorenz right-hand side; a generic
single-step function using the same tableau is exposed for testing and for
problems other than Lorenz.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dependency, but run anyway
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


BISTABLE_R_MIN = 1.0
BISTABLE_R_MAX = 24.74

# Tsitouras 5(4) pair: 7 stages, FSAL, 5th-order solution propagated.
# _E holds the weights of the difference between the 5th- and 4th-order
# solutions, used for the local error estimate.
_C2 = 0.161
_C3 = 0.327
_C4 = 0.9
_C5 = 0.9800255409045097
_A21 = 0.161
_A31 = -0.008480655492356989
_A32 = 0.335480655492357
_A41 = 2.8971530571054935
_A42 = -6.359448489975075
_A43 = 4.3622954328695815
_A51 = 5.325864828439257
_A52 = -11.748883564062828
_A53 = 7.4955393428898365
_A54 = -0.09249506636175525
_A61 = 5.86145544294642
_A62 = -12.92096931784711
_A63 = 8.159367898576159
_A64 = -0.071584973281401
_A65 = -0.028269050394068383
_B1 = 0.09646076681806523
_B2 = 0.01
_B3 = 0.4798896504144996
_B4 = 1.379008574103742
_B5 = -3.290069515436081
_B6 = 2.324710524099774
_B7 = 0.0
_E1 = -0.00178001105222577714
_E2 = -0.0008164344596567469
_E3 = 0.007880878010261995
_E4 = -0.1447110071732629
_E5 = 0.5823571654525552
_E6 = -0.45808210592918697
_E7 = 0.015151515151515152

TSIT5_C = np.array([0.0, _C2, _C3, _C4, _C5, 1.0, 1.0])
TSIT5_A = (
    np.array([_A21]),
    np.array([_A31, _A32]),
    np.array([_A41, _A42, _A43]),
    np.array([_A51, _A52, _A53, _A54]),
    np.array([_A61, _A62, _A63, _A64, _A65]),
    np.array([_B1, _B2, _B3, _B4, _B5, _B6]),  # FSAL: last stage row = solution weights
)
TSIT5_B = np.array([_B1, _B2, _B3, _B4, _B5, _B6, _B7])
TSIT5_E = np.array([_E1, _E2, _E3, _E4, _E5, _E6, _E7])

# step controller bounds (accept when scaled error <= 1)
_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0


class StepSizeUnderflow(RuntimeError):
    """Adaptive step control demanded a step below the configured minimum."""


@dataclass(frozen=True)
class LorenzParams:
    """Parameters of the Lorenz flow; sigma and beta default to the classical values."""

    r: float
    sigma: float = 10.0
    beta: float = 8.0 / 3.0

    def __post_init__(self):
        for name in ("r", "sigma", "beta"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be a positive finite number, got {v}")

    @property
    def bistable(self) -> bool:
        return BISTABLE_R_MIN < self.r < BISTABLE_R_MAX


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances, step bounds and stopping rule for integrate_to_rest.

    convergence_radius = 0 disables the proximity stop and always runs to
    max_time.
    """

    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    max_time: float = 2000.0
    initial_step: float = 1e-3
    min_step: float = 1e-12
    max_step: float = 1.0
    convergence_radius: float = 1e-3

    def __post_init__(self):
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if not (0.0 < self.min_step <= self.initial_step <= self.max_step):
            raise ValueError("need 0 < min_step <= initial_step <= max_step")
        if not self.max_time > 0.0:
            raise ValueError("max_time must be positive")
        if self.convergence_radius < 0.0:
            raise ValueError("convergence_radius must be >= 0")


def lorenz_rhs(params: LorenzParams, s) -> tuple[float, float, float]:
    """Time derivative of the Lorenz flow at state s = (x, y, z)."""
    x, y, z = float(s[0]), float(s[1]), float(s[2])
    return (
        params.sigma * (y - x),
        params.r * x - y - x * z,
        x * y - params.beta * z,
    )


def fixed_points(params: LorenzParams):
    """The pair of nontrivial fixed points (C+, C-); requires r > 1.

    Both satisfy lorenz_rhs = 0: the x and y components coincide at
    +/- sqrt(beta (r - 1)) and z = r - 1.
    """
    if params.r <= 1.0:
        raise ValueError(f"no nontrivial fixed points for r = {params.r} <= 1")
    q = math.sqrt(params.beta * (params.r - 1.0))
    z = params.r - 1.0
    return (q, q, z), (-q, -q, z)


def symmetry_image(s) -> tuple[float, float, float]:
    """The Lorenz symmetry (x, y, z) -> (-x, -y, z); an involution."""
    return (-float(s[0]), -float(s[1]), float(s[2]))


def tsit5_step(f, t: float, y: np.ndarray, h: float):
    """One Tsitouras 5(4) step for a generic right-hand side f(t, y).

    Returns the 5th-order solution at t + h together with the embedded
    error-estimate vector (difference between the 5th- and 4th-order
    solutions).  Used directly by order tests; the Lorenz production path
    runs the same tableau in a compiled kernel.
    """
    y = np.asarray(y, dtype=float)
    k = np.empty((7, y.size))
    k[0] = f(t, y)
    for i, row in enumerate(TSIT5_A[:5], start=1):
        k[i] = f(t + TSIT5_C[i] * h, y + h * (row @ k[:i]))
    y5 = y + h * (TSIT5_A[5] @ k[:6])
    k[6] = f(t + h, y5)
    err = h * (TSIT5_E @ k)
    return y5, err


@njit(cache=True, nogil=True)
def _advance_lorenz(sigma, r, beta, x, y, z,
                    abs_tol, rel_tol, max_time, h0, min_step, max_step,
                    conv_radius, cpx, cpy, cpz, cmx, cmy, cmz):
    """Adaptive Tsit5 loop for the Lorenz flow, scalar-unrolled.

    Returns (x, y, z, elapsed, status) with status 0 = settled within
    conv_radius of a fixed point, 1 = ran to max_time, 2 = step underflow.
    """
    t = 0.0
    h = h0
    r2 = conv_radius * conv_radius
    dp = (x - cpx) ** 2 + (y - cpy) ** 2 + (z - cpz) ** 2
    dm = (x - cmx) ** 2 + (y - cmy) ** 2 + (z - cmz) ** 2
    if dp < r2 or dm < r2:
        return x, y, z, t, 0

    k1x = sigma * (y - x)
    k1y = r * x - y - x * z
    k1z = x * y - beta * z
    while t < max_time:
        hs = h
        if hs > max_time - t:
            hs = max_time - t

        ux = x + hs * (_A21 * k1x)
        uy = y + hs * (_A21 * k1y)
        uz = z + hs * (_A21 * k1z)
        k2x = sigma * (uy - ux)
        k2y = r * ux - uy - ux * uz
        k2z = ux * uy - beta * uz

        ux = x + hs * (_A31 * k1x + _A32 * k2x)
        uy = y + hs * (_A31 * k1y + _A32 * k2y)
        uz = z + hs * (_A31 * k1z + _A32 * k2z)
        k3x = sigma * (uy - ux)
        k3y = r * ux - uy - ux * uz
        k3z = ux * uy - beta * uz

        ux = x + hs * (_A41 * k1x + _A42 * k2x + _A43 * k3x)
        uy = y + hs * (_A41 * k1y + _A42 * k2y + _A43 * k3y)
        uz = z + hs * (_A41 * k1z + _A42 * k2z + _A43 * k3z)
        k4x = sigma * (uy - ux)
        k4y = r * ux - uy - ux * uz
        k4z = ux * uy - beta * uz

        ux = x + hs * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x)
        uy = y + hs * (_A51 * k1y + _A52 * k2y + _A53 * k3y + _A54 * k4y)
        uz = z + hs * (_A51 * k1z + _A52 * k2z + _A53 * k3z + _A54 * k4z)
        k5x = sigma * (uy - ux)
        k5y = r * ux - uy - ux * uz
        k5z = ux * uy - beta * uz

        ux = x + hs * (_A61 * k1x + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x)
        uy = y + hs * (_A61 * k1y + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y)
        uz = z + hs * (_A61 * k1z + _A62 * k2z + _A63 * k3z + _A64 * k4z + _A65 * k5z)
        k6x = sigma * (uy - ux)
        k6y = r * ux - uy - ux * uz
        k6z = ux * uy - beta * uz

        vx = x + hs * (_B1 * k1x + _B2 * k2x + _B3 * k3x + _B4 * k4x + _B5 * k5x + _B6 * k6x)
        vy = y + hs * (_B1 * k1y + _B2 * k2y + _B3 * k3y + _B4 * k4y + _B5 * k5y + _B6 * k6y)
        vz = z + hs * (_B1 * k1z + _B2 * k2z + _B3 * k3z + _B4 * k4z + _B5 * k5z + _B6 * k6z)
        k7x = sigma * (vy - vx)
        k7y = r * vx - vy - vx * vz
        k7z = vx * vy - beta * vz

        ex = hs * (_E1 * k1x + _E2 * k2x + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * k7x)
        ey = hs * (_E1 * k1y + _E2 * k2y + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y + _E7 * k7y)
        ez = hs * (_E1 * k1z + _E2 * k2z + _E3 * k3z + _E4 * k4z + _E5 * k5z + _E6 * k6z + _E7 * k7z)
        sx = abs_tol + rel_tol * max(abs(vx), abs(x))
        sy = abs_tol + rel_tol * max(abs(vy), abs(y))
        sz = abs_tol + rel_tol * max(abs(vz), abs(z))
        err = math.sqrt(((ex / sx) ** 2 + (ey / sy) ** 2 + (ez / sz) ** 2) / 3.0)

        if err <= 1.0:
            t = t + hs
            x, y, z = vx, vy, vz
            k1x, k1y, k1z = k7x, k7y, k7z  # FSAL
            dp = (x - cpx) ** 2 + (y - cpy) ** 2 + (z - cpz) ** 2
            dm = (x - cmx) ** 2 + (y - cmy) ** 2 + (z - cmz) ** 2
            if dp < r2 or dm < r2:
                return x, y, z, t, 0

        if err == 0.0:
            fac = _FAC_MAX
        else:
            fac = _SAFETY * err ** -0.2
            if fac < _FAC_MIN:
                fac = _FAC_MIN
            elif fac > _FAC_MAX:
                fac = _FAC_MAX
        h = hs * fac
        if h > max_step:
            h = max_step
        if h < min_step:
            return x, y, z, t, 2
    return x, y, z, t, 1


def integrate_to_rest(params: LorenzParams, ic, cfg: IntegratorConfig = IntegratorConfig()):
    """Advance ic until it settles near C+ or C-, or max_time elapses.

    Returns (final_state, elapsed, converged).  converged is True only for
    the proximity stop; running out the time cap yields False.  Raises
    StepSizeUnderflow if error control cannot proceed above cfg.min_step.
    """
    x, y, z = (float(ic[0]), float(ic[1]), float(ic[2]))
    if not all(math.isfinite(v) for v in (x, y, z)):
        raise ValueError(f"initial condition must be finite, got {ic!r}")
    (cpx, cpy, cpz), (cmx, cmy, cmz) = fixed_points(params)
    fx, fy, fz, t, status = _advance_lorenz(
        params.sigma, params.r, params.beta, x, y, z,
        cfg.abs_tol, cfg.rel_tol, cfg.max_time, cfg.initial_step,
        cfg.min_step, cfg.max_step, cfg.convergence_radius,
        cpx, cpy, cpz, cmx, cmy, cmz)
    if status == 2:
        raise StepSizeUnderflow(
            f"required step below min_step={cfg.min_step} at t={t} for ic={ic!r}")
    return (fx, fy, fz), t, status == 0


def integrate_many(params: LorenzParams, ics: np.ndarray,
                   cfg: IntegratorConfig = IntegratorConfig(), workers: int = 1):
    """Batch integrate_to_rest over an (n, 3) array of initial conditions.

    Per-sample failures are reported in the status array instead of
    raising, so a batch never aborts.  Output arrays are indexed by input
    row and identical for any worker count.

    Returns (finals (n, 3), elapsed (n,), status (n,)) with status
    0 = converged, 1 = hit max_time, 2 = step underflow.
    """
    ics = np.ascontiguousarray(ics, dtype=float)
    if ics.ndim != 2 or ics.shape[1] != 3:
        raise ValueError(f"ics must have shape (n, 3), got {ics.shape}")
    cp, cm = fixed_points(params)
    n = ics.shape[0]
    finals = np.empty((n, 3))
    elapsed = np.empty(n)
    status = np.empty(n, dtype=np.int8)

    def run(lo: int, hi: int):
        for i in range(lo, hi):
            fx, fy, fz, t, st = _advance_lorenz(
                params.sigma, params.r, params.beta,
                ics[i, 0], ics[i, 1], ics[i, 2],
                cfg.abs_tol, cfg.rel_tol, cfg.max_time, cfg.initial_step,
                cfg.min_step, cfg.max_step, cfg.convergence_radius,
                cp[0], cp[1], cp[2], cm[0], cm[1], cm[2])
            finals[i, 0], finals[i, 1], finals[i, 2] = fx, fy, fz
            elapsed[i] = t
            status[i] = st

    if workers <= 1 or n < 2:
        run(0, n)
    else:
        chunk = max(1, -(-n // workers))
        bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: run(*b), bounds))
    return finals, elapsed, status

"""
Fixed-step propagation of dV/dt = -i M(t) V over [0, T].

Two independent routes:

* ``propagate``: classical RK4 on the sparse affine form of the generator.
* ``expm_propagate``: piecewise-constant exponentials with M sampled at the
  midpoint of each step.  Used as the oracle for the RK4 route.

Both inner loops are compiled with numba and release the GIL, so separate
trajectories can run in parallel threads.
"""

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import expm

MIN_STEPS = 4096
STEP_RATE_PRODUCT = 0.01  # cap on h * rate_scale
CHUNK_STEPS = 1 << 15
TARGET_SNAPSHOTS = 1024


class IntegrationError(RuntimeError):
    pass


class Method(str, enum.Enum):
    RK4_FIXED = "RK4_FIXED"
    PIECEWISE_EXPM = "PIECEWISE_EXPM"


@dataclass(frozen=True)
class IntegratorSettings:
    """Step control for a single trajectory.

    ``steps=None`` applies the default rule h <= min(T/4096, 0.01/rate) where
    rate is the generator's ``rate_scale``.  ``record_stride=None`` keeps
    roughly a thousand snapshots.  ``substeps`` subdivides every step of the
    exponential route only.
    """

    method: Method = Method.RK4_FIXED
    steps: int = None
    record_stride: int = None
    substeps: int = 1

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.steps is not None and self.steps < 16:
            raise ValueError(f"steps must be >= 16, got {self.steps}")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")

    def resolve(self, gen):
        """Return (steps, stride) for ``gen``, with steps a multiple of stride."""
        steps = self.steps if self.steps is not None else default_steps(gen.duration, gen.rate_scale)
        stride = self.record_stride
        if stride is None:
            stride = max(1, steps // TARGET_SNAPSHOTS)
        steps = stride * math.ceil(steps / stride)
        return steps, stride


def default_steps(duration, rate_scale):
    return max(MIN_STEPS, math.ceil(duration * rate_scale / STEP_RATE_PRODUCT))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    steps: int

    @property
    def final(self):
        return self.states[-1]

    @property
    def populations(self):
        return np.abs(self.states) ** 2

    @property
    def norms(self):
        return np.linalg.norm(self.states, axis=1)


@numba.njit(cache=True, nogil=True)
def _apply(rows, cols, vals, term, coef_row, v, out):
    out[:] = 0.0
    for e in range(rows.size):
        out[rows[e]] += vals[e] * coef_row[term[e]] * v[cols[e]]


@numba.njit(cache=True, nogil=True)
def _rk4_chunk(rows, cols, vals, term, coef, v, h, first_step, stride, snaps):
    # coef holds the generator coefficients on the half-step grid of this chunk
    n_steps = (coef.shape[0] - 1) // 2
    d = v.size
    k1 = np.empty(d, dtype=np.complex128)
    k2 = np.empty(d, dtype=np.complex128)
    k3 = np.empty(d, dtype=np.complex128)
    k4 = np.empty(d, dtype=np.complex128)
    tmp = np.empty(d, dtype=np.complex128)
    mih = -1j * h
    for j in range(n_steps):
        _apply(rows, cols, vals, term, coef[2 * j], v, k1)
        for i in range(d):
            tmp[i] = v[i] + 0.5 * mih * k1[i]
        _apply(rows, cols, vals, term, coef[2 * j + 1], tmp, k2)
        for i in range(d):
            tmp[i] = v[i] + 0.5 * mih * k2[i]
        _apply(rows, cols, vals, term, coef[2 * j + 1], tmp, k3)
        for i in range(d):
            tmp[i] = v[i] + mih * k3[i]
        _apply(rows, cols, vals, term, coef[2 * j + 2], tmp, k4)
        for i in range(d):
            v[i] += mih / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        step = first_step + j + 1
        if step % stride == 0:
            snaps[step // stride, :] = v


@numba.njit(cache=True, nogil=True)
def _chain_chunk(props, v, first_step, stride, snaps):
    n_steps = props.shape[0]
    d = v.size
    tmp = np.empty(d, dtype=np.complex128)
    for j in range(n_steps):
        for r in range(d):
            acc = 0.0j
            for c in range(d):
                acc += props[j, r, c] * v[c]
            tmp[r] = acc
        v[:] = tmp
        step = first_step + j + 1
        if step % stride == 0:
            snaps[step // stride, :] = v


def _prepare(gen, v0, settings):
    v = np.array(v0, dtype=np.complex128).ravel()
    if v.size != gen.dim:
        raise ValueError(f"initial vector has {v.size} components, generator has dimension {gen.dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError("initial vector must be finite")
    steps, stride = settings.resolve(gen)
    snaps = np.empty((steps // stride + 1, gen.dim), dtype=np.complex128)
    snaps[0] = v
    return v, steps, stride, snaps


# every generator here is contractive, so real growth of |V| means an unstable step
GROWTH_LIMIT = 2.0


def _check_finite(v, step, h, norm0):
    if not np.all(np.isfinite(v)):
        raise IntegrationError(f"non-finite amplitudes at t = {step * h:.6g} s; the step is too large")
    if np.linalg.norm(v) > GROWTH_LIMIT * norm0:
        raise IntegrationError(f"norm grew {np.linalg.norm(v) / norm0:.3g}x by t = {step * h:.6g} s; the step is too large")


def propagate(gen, v0, settings=IntegratorSettings()):
    """RK4 with a fixed step over [0, gen.duration]."""
    v, steps, stride, snaps = _prepare(gen, v0, settings)
    norm0 = np.linalg.norm(v)
    h = gen.duration / steps
    rows, cols = gen.rows, gen.cols
    vals, term = gen.values, gen.term
    for start in range(0, steps, CHUNK_STEPS):
        n = min(CHUNK_STEPS, steps - start)
        t = (start + 0.5 * np.arange(2 * n + 1)) * h
        coef = gen.coefficient_table(t)
        _rk4_chunk(rows, cols, vals, term, coef, v, h, start, stride, snaps)
        _check_finite(v, start + n, h, norm0)
    return Trajectory(np.arange(snaps.shape[0]) * stride * h, snaps, steps)


def expm_propagate(gen, v0, settings=IntegratorSettings(method=Method.PIECEWISE_EXPM)):
    """Product of exp(-i h M(t_mid)) over the step grid.

    Each step of ``settings`` is split into ``settings.substeps`` exponentials;
    snapshots stay on the outer grid.
    """
    v, steps, stride, snaps = _prepare(gen, v0, settings)
    norm0 = np.linalg.norm(v)
    sub = settings.substeps
    h = gen.duration / steps
    hs = h / sub
    fine_stride = stride * sub
    chunk = max(1, CHUNK_STEPS // (4 * sub)) * sub
    total = steps * sub
    for start in range(0, total, chunk):
        n = min(chunk, total - start)
        t_mid = (start + 0.5 + np.arange(n)) * hs
        props = expm(-1j * hs * gen.matrix(t_mid))
        _chain_chunk(props, v, start, fine_stride, snaps)
        _check_finite(v, (start + n) / sub, h, norm0)
    return Trajectory(np.arange(snaps.shape[0]) * stride * h, snaps, steps)


def oracle_settings(gen, substeps=4):
    """Settings for ``expm_propagate`` when it serves as a reference.

    The exponential absorbs the fast static detunings exactly, so its grid only
    has to resolve the pulse time scale; each step is split ``substeps`` times.
    """
    rate = gen.pulse_rate if gen.pulse_rate is not None else gen.rate_scale
    return IntegratorSettings(
        method=Method.PIECEWISE_EXPM,
        steps=default_steps(gen.duration, rate),
        substeps=substeps,
    )


def integrate(gen, v0, settings=IntegratorSettings()):
    """Dispatch on ``settings.method``."""
    if settings.method is Method.PIECEWISE_EXPM:
        return expm_propagate(gen, v0, settings)
    return propagate(gen, v0, settings)

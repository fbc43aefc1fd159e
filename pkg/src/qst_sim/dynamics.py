"""
Dynamics matrices M(t) for dV/dt = -i M(t) V.

Mode ordering is always (m1, f_-N, ..., f_0, ..., f_+N, m2).  Every model is
stored as a sparse affine form

    M(t) = S + sum_k c_k(t) K_k

where S and K_k are fixed complex matrices and c_k are scalar schedules.  That
keeps per-step work proportional to the number of nonzero entries, which is
what makes the 21-mode fiber affordable with a fixed-step integrator.
"""

import enum
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .pulses import (
    PulseParams,
    counter_diabatic_coupling,
    envelope,
    mixing_angle,
    modified_pulses,
    reference_pulses,
)

SPEED_OF_LIGHT_FIBER = 2e8  # m/s

SQRT2 = np.sqrt(2.0)


class Protocol(str, enum.Enum):
    AP = "AP"
    STAP_CD = "STAP_CD"
    STAP_MOD = "STAP_MOD"
    EFFECTIVE_3MODE = "EFFECTIVE_3MODE"


class ValidityWarning(UserWarning):
    """An approximation is being used outside the regime it was derived for."""


@dataclass(frozen=True)
class SystemConfig:
    """Fiber and mechanics parameters (rates in rad/s).

    ``n_pairs`` counts fiber mode pairs on each side of the central mode, so
    the fiber carries 2*n_pairs + 1 modes and M has dimension 2*n_pairs + 3.
    """

    gamma_fib: float = 0.0
    gamma_m: float = 0.0
    delta_fsr: float = np.inf
    n_pairs: int = 0
    protocol: Protocol = Protocol.AP
    detuning_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if self.gamma_fib < 0 or self.gamma_m < 0:
            raise ValueError("loss rates must be non-negative")
        if not self.delta_fsr > 0:
            raise ValueError(f"delta_fsr must be positive, got {self.delta_fsr!r}")
        if int(self.n_pairs) != self.n_pairs or self.n_pairs < 0:
            raise ValueError(f"n_pairs must be a non-negative integer, got {self.n_pairs!r}")
        if self.n_pairs > 0 and not np.isfinite(self.delta_fsr):
            raise ValueError("a multimode fiber needs a finite delta_fsr")
        if self.detuning_offset != 0.0:
            raise ValueError("only the red-sideband working point (detuning_offset = 0) is supported")

    @classmethod
    def from_fiber_length(cls, fiber_length, c=SPEED_OF_LIGHT_FIBER, **kwargs):
        return cls(delta_fsr=fsr_from_length(fiber_length, c), **kwargs)

    @property
    def dim(self):
        return 2 * self.n_pairs + 3

    @property
    def fiber_detunings(self):
        n = np.arange(-self.n_pairs, self.n_pairs + 1)
        return n * self.delta_fsr if self.n_pairs else np.zeros(1)

    def replace(self, **changes):
        return replace(self, **changes)


def fsr_from_length(fiber_length, c=SPEED_OF_LIGHT_FIBER):
    """delta_FSR = pi c / L in rad/s."""
    if not fiber_length > 0:
        raise ValueError(f"fiber length must be positive, got {fiber_length!r}")
    return np.pi * c / fiber_length


def mode_labels(n_pairs):
    return ("m1",) + tuple(f"f{n:+d}" if n else "f0" for n in range(-n_pairs, n_pairs + 1)) + ("m2",)


@dataclass(frozen=True, eq=False)
class Generator:
    """Time-dependent dynamics matrix in sparse affine form.

    Entry ``e`` contributes ``values[e] * c_{term[e]}(t)`` at ``(rows[e], cols[e])``
    with ``c_0 = 1``.  ``coefficients`` maps an array of times of shape (n,) to
    an array of shape (n, n_terms) holding c_1 .. c_{n_terms}.
    """

    dim: int
    duration: float
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    term: np.ndarray
    n_terms: int
    coefficients: Callable[[np.ndarray], np.ndarray]
    rate_scale: float
    pulse_rate: float = None
    loss_rates: np.ndarray = None
    labels: tuple = ()
    name: str = ""

    @property
    def hermitian_when_lossless(self):
        return self.loss_rates is not None

    @property
    def is_lossless(self):
        return self.loss_rates is not None and not np.any(self.loss_rates)

    def coefficient_table(self, t):
        """Shape (n, n_terms + 1) complex table with the constant column first."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        table = np.empty((t.size, self.n_terms + 1), dtype=complex)
        table[:, 0] = 1.0
        if self.n_terms:
            table[:, 1:] = self.coefficients(t)
        return table

    def matrix(self, t):
        scalar = np.ndim(t) == 0
        table = self.coefficient_table(t)
        out = np.zeros((table.shape[0], self.dim, self.dim), dtype=complex)
        for k in range(self.n_terms + 1):
            sel = self.term == k
            if np.any(sel):
                out[:, self.rows[sel], self.cols[sel]] += table[:, k, None] * self.values[sel]
        return out[0] if scalar else out

    __call__ = matrix


class _Builder:
    def __init__(self, dim):
        self.dim = dim
        self._entries = []

    def add(self, row, col, value, term=0):
        self._entries.append((row, col, complex(value), term))

    def add_symmetric(self, row, col, value, term):
        self.add(row, col, value, term)
        self.add(col, row, value, term)

    def build(self, p, n_terms, coefficients, rate_scale, loss_rates=None, labels=(), name=""):
        merged = {}
        for r, c, v, k in self._entries:
            if v != 0:
                merged[(r, c, k)] = merged.get((r, c, k), 0) + v
        keys = sorted(merged)
        return Generator(
            dim=self.dim,
            duration=p.duration,
            rows=np.array([k[0] for k in keys], dtype=np.int64),
            cols=np.array([k[1] for k in keys], dtype=np.int64),
            values=np.array([merged[k] for k in keys], dtype=complex),
            term=np.array([k[2] for k in keys], dtype=np.int64),
            n_terms=n_terms,
            coefficients=coefficients,
            rate_scale=rate_scale,
            pulse_rate=p.lambda0,
            loss_rates=loss_rates,
            labels=labels,
            name=name,
        )


def _coupling_schedule(p, modified):
    if modified:
        def couplings(t):
            mp = modified_pulses(t, p)
            return np.stack([mp.g1_mod, mp.g2_mod], axis=1)
    else:
        def couplings(t):
            ps = reference_pulses(t, p)
            return np.stack([ps.g1, ps.g2], axis=1)
    return couplings


def _rate_scale(p, c):
    return max(p.lambda0, c.n_pairs * c.delta_fsr if c.n_pairs else 0.0)


def _multimode_structure(c, counter_diabatic):
    n_pairs = c.n_pairs
    dim = c.dim
    b = _Builder(dim)
    m1, m2 = 0, dim - 1
    for j, n in enumerate(range(-n_pairs, n_pairs + 1), start=1):
        b.add(j, j, (n * c.delta_fsr if n else 0.0) - 0.5j * c.gamma_fib)
        b.add_symmetric(m1, j, 1.0, term=1)
        b.add_symmetric(m2, j, (-1.0) ** abs(n), term=2)
    b.add(m1, m1, -0.5j * c.gamma_m)
    b.add(m2, m2, -0.5j * c.gamma_m)
    if counter_diabatic:
        b.add(m1, m2, 1j, term=3)
        b.add(m2, m1, -1j, term=3)
    return b


def _loss_rates(c):
    loss = np.full(c.dim, c.gamma_fib)
    loss[[0, -1]] = c.gamma_m
    return loss


def multimode_generator(p, c, modified=False, counter_diabatic=False):
    """Generator for m1 and m2 coupled to 2N+1 fiber modes.

    m1 couples with +g1 to every fiber mode, m2 couples with (-1)^n g2 to
    mode f_n; fiber mode n sits at detuning n*delta_fsr with loss gamma_fib.
    N = 0 is the single-mode fiber.
    """
    b = _multimode_structure(c, counter_diabatic)
    couplings = _coupling_schedule(p, modified)
    if counter_diabatic:
        def coefficients(t):
            return np.column_stack([couplings(t), counter_diabatic_coupling(t, p)])
    else:
        coefficients = couplings
    name = "multimode" if c.n_pairs else "single-mode"
    return b.build(
        p, 3 if counter_diabatic else 2, coefficients, _rate_scale(p, c),
        _loss_rates(c), mode_labels(c.n_pairs), name,
    )


def frozen_matrix(c, g1, g2, g_a=0.0):
    """Dynamics matrix for fixed coupling values (no time dependence)."""
    b = _multimode_structure(c, counter_diabatic=True)
    dummy = PulseParams(1.0, 1.0, 1.0)
    gen = b.build(dummy, 3, lambda t: np.tile([g1, g2, g_a], (t.size, 1)), 1.0)
    return gen.matrix(0.0)


def effective_generator(p, c):
    """Single fiber mode with f_{+1} and f_{-1} adiabatically eliminated.

    Mechanical diagonals pick up -i Gamma_i and the two mechanical modes are
    linked through i Gamma_12, with Gamma_ij = g_i g_j gamma_fib / D and
    D = gamma_fib^2 / 4 + delta_fsr^2.
    """
    denom = 0.25 * c.gamma_fib**2 + c.delta_fsr**2
    _check_elimination_validity(p, denom)
    rate = c.gamma_fib / denom
    b = _Builder(3)
    b.add(1, 1, -0.5j * c.gamma_fib)
    b.add(0, 0, -0.5j * c.gamma_m)
    b.add(2, 2, -0.5j * c.gamma_m)
    b.add_symmetric(0, 1, 1.0, term=1)
    b.add_symmetric(2, 1, 1.0, term=2)
    b.add(0, 0, -1j * rate, term=3)
    b.add(2, 2, -1j * rate, term=4)
    b.add_symmetric(0, 2, 1j * rate, term=5)

    def coefficients(t):
        ps = reference_pulses(t, p)
        return np.column_stack([ps.g1, ps.g2, ps.g1**2, ps.g2**2, ps.g1 * ps.g2])

    return b.build(p, 5, coefficients, p.lambda0, None, mode_labels(0), "effective")


def _check_elimination_validity(p, denom, samples=1025):
    ps = reference_pulses(np.linspace(0.0, p.duration, samples), p)
    peak = max(ps.g1.max(), ps.g2.max())
    if denom <= 100.0 * peak**2:
        warnings.warn(
            f"eliminating f_+-1 assumes gamma_fib^2/4 + delta_fsr^2 >> g^2; "
            f"here the ratio is only {denom / peak**2:.3g}",
            ValidityWarning,
            stacklevel=3,
        )
        return False
    return True


def build_generator(p, c):
    """Generator for the protocol and fiber selected in ``c``."""
    if c.protocol is Protocol.AP:
        return multimode_generator(p, c)
    if c.protocol is Protocol.STAP_CD:
        return multimode_generator(p, c, counter_diabatic=True)
    if c.protocol is Protocol.STAP_MOD:
        return multimode_generator(p, c, modified=True)
    if c.protocol is Protocol.EFFECTIVE_3MODE:
        return effective_generator(p, c)
    raise ValueError(f"unknown protocol {c.protocol!r}")


def single_mode_matrix(t, p, c):
    """3x3 matrix over (m1, f0, m2).

    STAP_MOD substitutes the reshaped couplings; every other protocol uses the
    reference schedule.  ``c.n_pairs`` is ignored.
    """
    single = c.replace(n_pairs=0)
    return multimode_generator(p, single, modified=c.protocol is Protocol.STAP_MOD).matrix(t)


def counter_diabatic_matrix(t, p):
    g_a = counter_diabatic_coupling(t, p)
    out = np.zeros(np.shape(g_a) + (3, 3), dtype=complex)
    out[..., 0, 2] = 1j * g_a
    out[..., 2, 0] = -1j * g_a
    return out


def multimode_matrix(t, p, c):
    return multimode_generator(p, c, modified=c.protocol is Protocol.STAP_MOD).matrix(t)


def effective_three_mode_matrix(t, p, c):
    return effective_generator(p, c).matrix(t)


def effective_rates(g1, g2, gamma_fib, delta_fsr):
    """Return (Gamma_1, Gamma_2, Gamma_12) of the eliminated model."""
    k = gamma_fib / (0.25 * gamma_fib**2 + delta_fsr**2)
    return g1 * g1 * k, g2 * g2 * k, g1 * g2 * k


def _rotation(theta):
    sin, cos = np.sin(theta), np.cos(theta)
    zero = np.zeros_like(theta)
    one = np.ones_like(theta)
    rows = [
        [sin / SQRT2, one / SQRT2, cos / SQRT2],
        [cos, zero, -sin],
        [sin / SQRT2, -one / SQRT2, cos / SQRT2],
    ]
    return np.moveaxis(np.array(rows, dtype=float), (0, 1), (-2, -1))


def adiabatic_modes(t, p):
    """Rows give A+, A0, A- in the (m1, f0, m2) basis.

    R is orthogonal and R M R^T = diag(g0, 0, -g0) for the lossless
    single-mode matrix.  A0 = cos(theta) m1 - sin(theta) m2 is the dark mode.
    """
    return _rotation(mixing_angle(t, p))


def _rotation_derivative(theta, dtheta):
    # d/dtheta of each row: A+ -> A0/sqrt2, A0 -> -(A+ + A-)/sqrt2, A- -> A0/sqrt2
    sin, cos = np.sin(theta), np.cos(theta)
    zero = np.zeros_like(theta)
    rows = [
        [cos / SQRT2, zero, -sin / SQRT2],
        [-sin, zero, -cos],
        [cos / SQRT2, zero, -sin / SQRT2],
    ]
    return np.moveaxis(np.array(rows, dtype=float), (0, 1), (-2, -1)) * np.asarray(dtheta)[..., None, None]


def adiabatic_frame_matrix(t, p, c):
    """Generator Lambda for the adiabatic amplitudes A = R V, so dA/dt = -i Lambda A.

    Lambda = R M R^T + i (dR/dt) R^T with M the eliminated three-mode model.
    With gamma_fib = 0 (or infinite delta_fsr) that is the plain single-mode
    matrix.
    """
    theta = mixing_angle(t, p)
    dtheta = counter_diabatic_coupling(t, p)
    R = _rotation(theta)
    dR = _rotation_derivative(theta, dtheta)
    M = _frame_source_matrix(t, p, c)
    Rt = np.swapaxes(R, -1, -2)
    return R @ M @ Rt + 1j * dR @ Rt


def _frame_source_matrix(t, p, c):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        return effective_generator(p, c).matrix(t)


def adiabatic_rate_matrix(t, p, c):
    """K = -i Lambda, the matrix in dA/dt = K A."""
    return -1j * adiabatic_frame_matrix(t, p, c)


def dark_mode_loss_factor(t, p, c):
    """eta = g0^2 gamma_fib / (gamma_fib^2/2 + 2 delta_fsr^2)."""
    g0, _ = envelope(t, p)
    return g0**2 * c.gamma_fib / (0.5 * c.gamma_fib**2 + 2.0 * c.delta_fsr**2)


def adiabatic_rate_closed_form(t, p, c, doubled_angles=False):
    """Closed form of the adiabatic-frame rate matrix for gamma_m = 0.

    With ``doubled_angles`` the loss matrix uses cos^2(pi s), sin(2 pi s) and
    sin^2(pi s), the arguments as they are usually printed; the default uses
    the arguments that follow from the frame algebra (2 theta = pi s / 2).
    """
    g0, s = envelope(t, p)
    dtheta = counter_diabatic_coupling(t, p)
    gamma = c.gamma_fib
    eta = dark_mode_loss_factor(t, p, c)
    two_theta = np.pi * s if doubled_angles else 0.5 * np.pi * s
    cos_sq = np.cos(two_theta) ** 2
    sin_sq = np.sin(two_theta) ** 2
    cross = np.sin(2.0 * two_theta) / SQRT2
    d = dtheta / SQRT2
    base = np.array(
        [
            [-1j * g0 - gamma / 4, d, gamma / 4 + 0 * g0],
            [-d, 0 * g0, -d],
            [gamma / 4 + 0 * g0, d, 1j * g0 - gamma / 4],
        ],
        dtype=complex,
    )
    loss = np.array(
        [
            [cos_sq, -cross, cos_sq],
            [-cross, 2.0 * sin_sq, -cross],
            [cos_sq, -cross, cos_sq],
        ]
    )
    out = base - eta * loss
    return np.moveaxis(out, (0, 1), (-2, -1))


def adiabatic_frame_generator(p, c):
    """Adiabatic-frame dynamics as a :class:`Generator` (dense 3x3 terms)."""
    b = _Builder(3)
    term = 1
    for i in range(3):
        for j in range(3):
            b.add(i, j, 1.0, term=term)
            term += 1

    def coefficients(t):
        return adiabatic_frame_matrix(t, p, c).reshape(-1, 9)

    return b.build(p, 9, coefficients, p.lambda0, None, ("A+", "A0", "A-"), "adiabatic-frame")


def zero_mode_three_mode_fiber(g1, g2, delta_fsr):
    """Normalised zero-eigenvalue mode of the lossless 5x5 (N = 1) matrix.

    Proportional to (g2, 2 g1 g2 / delta, 0, -2 g1 g2 / delta, -g1) over
    (m1, f-1, f0, f+1, m2).
    """
    if not delta_fsr > 0:
        raise ValueError(f"delta_fsr must be positive, got {delta_fsr!r}")
    if g1 == 0 and g2 == 0:
        raise ValueError("zero mode is undefined when g1 = g2 = 0")
    side = 2.0 * g1 * g2 / delta_fsr
    v = np.array([g2, side, 0.0, -side, -g1], dtype=float)
    v /= np.max(np.abs(v))  # rescale first so tiny couplings do not underflow the norm
    return v / np.linalg.norm(v)


# Gell-Mann matrices used by the SU(3) pulse reshaping
GELL_MANN = {
    1: np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex),
    5: np.array([[0, 0, -1j], [0, 0, 0], [1j, 0, 0]], dtype=complex),
    6: np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=complex),
}


def su3_frame_unitary(phi):
    """exp(-i phi G6): rotates f0 into m2.

    The sign is chosen so that the transformed couplings come out as
    g1 cos(phi) - g_a sin(phi), g2 + dphi/dt and g1 sin(phi) + g_a cos(phi).
    """
    phi = np.asarray(phi, dtype=float)
    out = np.zeros(phi.shape + (3, 3), dtype=complex)
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = out[..., 2, 2] = np.cos(phi)
    out[..., 1, 2] = out[..., 2, 1] = -1j * np.sin(phi)
    return out


def su3_transformed_matrix(t, p, c=None):
    """U (M + M_cd) U^dagger + i (dU/dt) U^dagger with phi from the reshaped pulses.

    Only defined for the lossless single-mode model.
    """
    if c is not None and (c.gamma_fib != 0 or c.gamma_m != 0):
        raise ValueError("the SU(3) reshaping is only defined without losses")
    lossless = SystemConfig()
    M = multimode_generator(p, lossless, counter_diabatic=True).matrix(t)
    mp = modified_pulses(t, p)
    U = su3_frame_unitary(mp.phi)
    dU = -1j * GELL_MANN[6] @ U * np.asarray(mp.dphi)[..., None, None]
    Ud = np.conj(np.swapaxes(U, -1, -2))
    return U @ M @ Ud + 1j * dU @ Ud


def su3_reshaped_couplings(t, p):
    """(g1~, g2~, ga~) for the phi of :func:`modified_pulses`, before imposing ga~ = 0."""
    ps = reference_pulses(t, p)
    mp = modified_pulses(t, p)
    cos, sin = np.cos(mp.phi), np.sin(mp.phi)
    return (
        ps.g1 * cos - mp.g_a * sin,
        ps.g2 + mp.dphi,
        ps.g1 * sin + mp.g_a * cos,
    )


def su3_target_matrix(t, p):
    """g1~ G1 + g2~ G6 - ga~ G5."""
    g1t, g2t, gat = su3_reshaped_couplings(t, p)
    expand = lambda x: np.asarray(x)[..., None, None]  # noqa: E731
    return expand(g1t) * GELL_MANN[1] + expand(g2t) * GELL_MANN[6] - expand(gat) * GELL_MANN[5]

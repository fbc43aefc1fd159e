"""
Drive schedules for the two optomechanical nodes.

The reference schedule is a sech envelope split between the sending (g1) and
receiving (g2) couplings by a tanh ramp, applied in counterintuitive order
(g2 first).  Everything here is a pure, vectorised function of time: pass a
float or an ndarray of times and get the same shape back.

All rates are angular (rad/s).  Helpers named ``*_hz`` take cyclic values,
i.e. the quantity divided by 2*pi, which is how experimental numbers are
usually quoted.
"""

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Below this fraction of lambda0 the envelope is treated as switched off and
# the counter-diabatic quantities are pinned to zero.
GUARD_FRACTION = 1e-12


@dataclass(frozen=True)
class PulseParams:
    """Parameters of the reference schedule.

    Parameters
    ----------
    lambda0 : float
        Peak coupling scale in rad/s; the envelope peaks at lambda0/sqrt(2).
    duration : float
        Coupling time T in seconds.  Pulses live on [0, T].
    sigma : float
        Width of the sech envelope in seconds, 0 < sigma <= T.
    """

    lambda0: float
    duration: float
    sigma: float

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0!r}")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration!r}")
        if not 0 < self.sigma <= self.duration:
            raise ValueError(
                f"sigma must satisfy 0 < sigma <= duration, got sigma={self.sigma!r}, "
                f"duration={self.duration!r}"
            )

    @classmethod
    def from_hz(cls, lambda0_hz, duration, sigma_ratio=0.125):
        """Build from lambda0/2pi in Hz, T in seconds and sigma/T."""
        return cls(TWO_PI * lambda0_hz, duration, sigma_ratio * duration)

    @property
    def t0(self):
        """Characteristic adiabatic time sqrt(2)*pi/lambda0."""
        return characteristic_time(self.lambda0)

    @property
    def sigma_ratio(self):
        return self.sigma / self.duration

    def replace(self, **changes):
        fields = {"lambda0": self.lambda0, "duration": self.duration, "sigma": self.sigma}
        fields.update(changes)
        return PulseParams(**fields)


def characteristic_time(lambda0):
    return np.sqrt(2.0) * np.pi / lambda0


@dataclass(frozen=True)
class PulseSample:
    g1: np.ndarray
    g2: np.ndarray
    dg1: np.ndarray
    dg2: np.ndarray
    g0: np.ndarray


@dataclass(frozen=True)
class ModifiedPulseSample:
    g1_mod: np.ndarray
    g2_mod: np.ndarray
    g_a: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray


@dataclass(frozen=True)
class PhysicalCouplingParams:
    """Node-level quantities behind an effective fiber coupling (all rad/s)."""

    G: float
    kappa: float
    delta_fsr: float

    def __post_init__(self):
        for name in ("G", "kappa", "delta_fsr"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value!r}")


def _reduced_time(t, p):
    x = (np.asarray(t, dtype=float) - 0.5 * p.duration) / p.sigma
    return x, 1.0 / np.cosh(x), np.tanh(x)


def envelope(t, p):
    """Return ``(g0, s)``: the sech envelope and the 0..2 ramp."""
    _, sech, tanh = _reduced_time(t, p)
    g0 = p.lambda0 / np.sqrt(2.0) * sech
    s = 1.0 + tanh
    return g0, s


def reference_pulses(t, p):
    """Reference couplings g1 = g0 sin(pi s/4), g2 = g0 cos(pi s/4) and their exact time derivatives."""
    _, sech, tanh = _reduced_time(t, p)
    g0 = p.lambda0 / np.sqrt(2.0) * sech
    theta = 0.25 * np.pi * (1.0 + tanh)
    dg0 = -g0 * tanh / p.sigma
    dtheta = 0.25 * np.pi * sech**2 / p.sigma
    sin, cos = np.sin(theta), np.cos(theta)
    return PulseSample(
        g1=g0 * sin,
        g2=g0 * cos,
        dg1=dg0 * sin + g0 * cos * dtheta,
        dg2=dg0 * cos - g0 * sin * dtheta,
        g0=g0,
    )


def mixing_angle(t, p):
    """Mixing angle arctan(g1/g2), running from ~0 at t=0 to ~pi/2 at t=T."""
    ps = reference_pulses(t, p)
    return np.arctan2(ps.g1, ps.g2)


def _guarded(g0, p):
    return g0 < GUARD_FRACTION * p.lambda0


def counter_diabatic_coupling(t, p):
    """Auxiliary coupling g_a = (dg1 g2 - g1 dg2) / g0**2.

    Equal to the rate of change of the mixing angle.  Returns 0 where the
    envelope has dropped below the guard level.
    """
    ps = reference_pulses(t, p)
    off = _guarded(ps.g0, p)
    g0sq = np.where(off, 1.0, ps.g0**2)
    g_a = (ps.dg1 * ps.g2 - ps.g1 * ps.dg2) / g0sq
    return np.where(off, 0.0, g_a)


def counter_diabatic_closed_form(t, p):
    """(pi / 4 sigma) sech^2((t - T/2)/sigma); reference value for ``counter_diabatic_coupling``."""
    _, sech, _ = _reduced_time(t, p)
    return 0.25 * np.pi / p.sigma * sech**2


def modified_pulses(t, p):
    """Reshaped couplings that absorb the counter-diabatic term.

    phi = arctan(-g_a/g1), g1_mod = sqrt(g1^2 + g_a^2), g2_mod = g2 + dphi/dt.
    dphi/dt is evaluated from the closed forms of g1 and g_a, so no numerical
    differentiation is involved.
    """
    _, _, tanh = _reduced_time(t, p)
    ps = reference_pulses(t, p)
    off = _guarded(ps.g0, p)
    g_a = np.where(off, 0.0, counter_diabatic_coupling(t, p))
    dg_a = -2.0 * g_a * tanh / p.sigma

    g1 = ps.g1
    norm_sq = g1**2 + g_a**2
    safe = np.where(off | (norm_sq == 0.0), 1.0, norm_sq)
    phi = np.where(off, 0.0, np.arctan2(-g_a, g1))
    dphi = np.where(off, 0.0, (g_a * ps.dg1 - dg_a * g1) / safe)
    return ModifiedPulseSample(
        g1_mod=np.sqrt(norm_sq),
        g2_mod=ps.g2 + dphi,
        g_a=g_a,
        phi=phi,
        dphi=dphi,
    )


def effective_coupling_from_physical(q):
    """Fiber coupling g = sqrt(gamma_e * delta_fsr / 2pi) with gamma_e = G^2/kappa."""
    gamma_e = q.G**2 / q.kappa
    return float(np.sqrt(gamma_e * q.delta_fsr / TWO_PI))

"""Closed-form gait templates.

Joint angles are indexed ``i = 1..N`` in every wave, so the spatial phase of
joint ``i`` is ``2*pi*k*i/N``.  Arrays returned here are zero-based.  All
angles are radians; ``omega`` is in cycles per second.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SerpenoidParams:
    amplitude: float
    omega: float = 0.1
    spatial_frequency: float = 1.5
    offset: float = 0.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.spatial_frequency < 0:
            raise ValueError("spatial_frequency must be >= 0")
        if abs(self.amplitude) + abs(self.offset) > np.pi:
            raise ValueError("|amplitude| + |offset| must not exceed pi")


@dataclass(frozen=True)
class AmplitudeProfile:
    """``A(tau) = gain * (bias + sin(tau + phase))``."""

    gain: float = 0.0
    bias: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.gain < 0:
            raise ValueError("profile gain must be >= 0")

    def __call__(self, tau):
        return self.gain * (self.bias + np.sin(np.asarray(tau) + self.phase))

    def derivative(self, tau):
        return self.gain * np.cos(np.asarray(tau) + self.phase)


@dataclass(frozen=True)
class TwoWaveDesign:
    forward_profile: AmplitudeProfile = field(default_factory=AmplitudeProfile)
    turning_profile: AmplitudeProfile = field(default_factory=AmplitudeProfile)
    k_f: float = 1.5
    k_o: float = 1.0
    psi: float = 0.0
    omega: float = 0.1
    theta_max: float = np.pi / 2

    def __post_init__(self):
        if self.k_f <= 0:
            raise ValueError("k_f must be positive")
        if self.k_o < 0:
            raise ValueError("k_o must be >= 0")
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.turning_profile.bias != 1.0:
            raise ValueError("the turning profile bias is fixed at 1")

    @classmethod
    def from_params(cls, a_f=0.0, gamma=1.0, phi_f=0.0, a_o=0.0, phi_o=0.0,
                    k_f=1.5, k_o=1.0, psi=0.0, omega=0.1, theta_max=np.pi / 2):
        return cls(AmplitudeProfile(a_f, gamma, phi_f), AmplitudeProfile(a_o, 1.0, phi_o),
                   k_f=k_f, k_o=k_o, psi=psi, omega=omega, theta_max=theta_max)

    @property
    def period(self) -> float:
        return 1.0 / self.omega

    def params(self) -> dict:
        """Flat parameter dict in radians, using the JSON field names."""
        return {
            "a_f": self.forward_profile.gain,
            "gamma": self.forward_profile.bias,
            "phi_f": self.forward_profile.phase,
            "a_o": self.turning_profile.gain,
            "phi_o": self.turning_profile.phase,
            "k_f": self.k_f,
            "k_o": self.k_o,
            "psi": self.psi,
            "omega": self.omega,
            "theta_max": self.theta_max,
        }

    def with_params(self, **kw) -> "TwoWaveDesign":
        p = self.params()
        p.update(kw)
        return TwoWaveDesign.from_params(**p)

    def mirrored(self) -> "TwoWaveDesign":
        """Design whose shape at ``t + T/2`` is the negation of this one's at ``t``.

        Shifting both profile phases by ``-pi`` keeps the amplitudes while the
        half-period shift flips the sign of both carrier waves.  The per-cycle
        rotation therefore changes sign.
        """
        return replace(
            self,
            forward_profile=replace(self.forward_profile, phase=self.forward_profile.phase - np.pi),
            turning_profile=replace(self.turning_profile, phase=self.turning_profile.phase - np.pi),
        )


def serpenoid_shape(t, p: SerpenoidParams, n: int) -> np.ndarray:
    i = np.arange(1, n + 1)
    return p.amplitude * np.sin(TWO_PI * p.omega * t + TWO_PI * p.spatial_frequency * i / n) + p.offset


def amplitude_profiles(tau_f, tau_o, d: TwoWaveDesign):
    return d.forward_profile(tau_f), d.turning_profile(tau_o)


def _phases(t, d: TwoWaveDesign):
    t = np.asarray(t, dtype=float)
    tau_f = TWO_PI * d.omega * t
    return tau_f, tau_f + d.psi


def two_wave_shape(t, d: TwoWaveDesign, n: int) -> np.ndarray:
    """Joint angles of the two-wave template; ``t`` may be an array (rows)."""
    t = np.asarray(t, dtype=float)
    tau_f, tau_o = _phases(t, d)
    a_f, a_o = amplitude_profiles(tau_f, tau_o, d)
    i = np.arange(1, n + 1)
    sf = TWO_PI * d.k_f * i / n
    so = TWO_PI * d.k_o * i / n
    tf = tau_f[..., None]
    to = tau_o[..., None]
    return np.asarray(a_f)[..., None] * np.sin(tf + sf) + np.asarray(a_o)[..., None] * np.sin(to + so)


def two_wave_rate(t, d: TwoWaveDesign, n: int) -> np.ndarray:
    """Analytic time derivative of :func:`two_wave_shape`."""
    t = np.asarray(t, dtype=float)
    tau_f, tau_o = _phases(t, d)
    w = TWO_PI * d.omega
    a_f, a_o = amplitude_profiles(tau_f, tau_o, d)
    da_f = w * d.forward_profile.derivative(tau_f)
    da_o = w * d.turning_profile.derivative(tau_o)
    i = np.arange(1, n + 1)
    sf = tau_f[..., None] + TWO_PI * d.k_f * i / n
    so = tau_o[..., None] + TWO_PI * d.k_o * i / n
    return (np.asarray(da_f)[..., None] * np.sin(sf) + w * np.asarray(a_f)[..., None] * np.cos(sf)
            + np.asarray(da_o)[..., None] * np.sin(so) + w * np.asarray(a_o)[..., None] * np.cos(so))


def geometric_basis_shape(r, k: float, n: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    i = np.arange(1, n + 1)
    phase = TWO_PI * k * i / n
    return r[..., 0:1] * np.sin(phase) + r[..., 1:2] * np.cos(phase)


def geometric_coords(t, d: TwoWaveDesign) -> np.ndarray:
    """``(r1, r2)`` that reproduce a ``k_o == k_f`` design through the sine/cosine basis."""
    tau_f, tau_o = _phases(t, d)
    a_f, a_o = amplitude_profiles(tau_f, tau_o, d)
    r1 = a_f * np.cos(tau_f) + a_o * np.cos(tau_o)
    r2 = a_f * np.sin(tau_f) + a_o * np.sin(tau_o)
    return np.stack([r1, r2], axis=-1)


def offset_curvature(t, d: TwoWaveDesign):
    """Offset ``kappa(t)`` that the turning wave reduces to when ``k_o == 0``."""
    _, tau_o = _phases(t, d)
    return d.turning_profile(tau_o) * np.sin(tau_o)


def reduced_shape(a_o, tau_o, d: TwoWaveDesign, n: int) -> np.ndarray:
    """Joint angles on the ``(tau_o, A_o)`` sub-shape space with ``f1`` and ``f3`` fixed."""
    a_o = np.asarray(a_o, dtype=float)
    tau_o = np.asarray(tau_o, dtype=float)
    tau_f = tau_o - d.psi
    a_f = d.forward_profile(tau_f)
    i = np.arange(1, n + 1)
    return (np.asarray(a_f)[..., None] * np.sin(tau_f[..., None] + TWO_PI * d.k_f * i / n)
            + a_o[..., None] * np.sin(tau_o[..., None] + TWO_PI * d.k_o * i / n))


# JSON I/O uses degrees for angles; omega stays in cycles per second.
_ANGLE_KEYS = ("a_f", "phi_f", "a_o", "phi_o", "psi", "theta_max")
DESIGN_KEYS = ("a_f", "gamma", "phi_f", "a_o", "phi_o", "k_f", "k_o", "psi", "omega", "theta_max")


def design_to_dict(d: TwoWaveDesign) -> dict:
    p = d.params()
    return {k: (float(np.degrees(p[k])) if k in _ANGLE_KEYS else float(p[k])) for k in DESIGN_KEYS}


def design_from_dict(data: dict) -> TwoWaveDesign:
    unknown = set(data) - set(DESIGN_KEYS)
    if unknown:
        raise ValueError(f"unknown design keys: {sorted(unknown)}")
    p = {k: (np.radians(v) if k in _ANGLE_KEYS else float(v)) for k, v in data.items()}
    return TwoWaveDesign.from_params(**p)


def dump_design(d: TwoWaveDesign, path) -> None:
    with open(path, "w") as fh:
        json.dump(design_to_dict(d), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_design(path) -> TwoWaveDesign:
    with open(path) as fh:
        return design_from_dict(json.load(fh))

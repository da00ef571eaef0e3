"""Closed-form propagation primitives.

Free-space and close-in path loss, complex material permittivity, Fresnel
reflection coefficients, and the Kouyoumjian-Pathak uniform wedge diffraction
coefficient with the numerically evaluated Fresnel transition function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.special

from .errors import DegeneratePath, InvalidAngle, NonPositiveInput
from .materials import VACUUM_PERMITTIVITY, Material

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class ComplexPermittivity:
    """Relative permittivity eta = real_part - j*imag_part (lossy medium)."""

    real_part: float
    imag_part: float = 0.0

    def __post_init__(self):
        if self.real_part < 1.0:
            raise ValueError(f"real_part must be >= 1, got {self.real_part}")
        if self.imag_part < 0.0:
            raise ValueError(f"imag_part must be >= 0, got {self.imag_part}")

    @property
    def value(self) -> complex:
        return complex(self.real_part, -self.imag_part)


@dataclass(frozen=True)
class PathLossParams:
    frequency: float  # Hz
    distance: float  # m
    exponent: float = 2.0
    atmospheric_attenuation: float = 0.0  # dB

    def __post_init__(self):
        if self.frequency <= 0.0 or self.distance <= 0.0:
            raise NonPositiveInput(
                f"frequency and distance must be > 0, got f={self.frequency}, d={self.distance}"
            )
        if self.exponent <= 0.0:
            raise NonPositiveInput(f"path-loss exponent must be > 0, got {self.exponent}")
        if self.atmospheric_attenuation < 0.0:
            raise ValueError(f"attenuation must be >= 0, got {self.atmospheric_attenuation}")


def fspl(frequency, distance):
    """Free-space path loss in dB; accepts scalars or arrays."""
    f = np.asarray(frequency, dtype=np.float64)
    d = np.asarray(distance, dtype=np.float64)
    if (f <= 0).any() or (d <= 0).any():
        raise NonPositiveInput("fspl requires frequency > 0 and distance > 0")
    out = 20.0 * np.log10(4.0 * np.pi * d * f / SPEED_OF_LIGHT)
    return float(out) if out.ndim == 0 else out


def ci_path_loss(params: PathLossParams) -> float:
    """Close-in reference path loss: FSPL at 1 m + 10*n*log10(d) + AT, in dB."""
    return (
        fspl(params.frequency, 1.0)
        + 10.0 * params.exponent * math.log10(params.distance)
        + params.atmospheric_attenuation
    )


def complex_permittivity(material: Material, frequency: float) -> ComplexPermittivity:
    """eta = eps_r - j*sigma(f) / (2*pi*f*eps0)."""
    if frequency <= 0.0:
        raise NonPositiveInput(f"frequency must be > 0, got {frequency}")
    sigma = material.conductivity(frequency)
    imag = sigma / (2.0 * math.pi * frequency * VACUUM_PERMITTIVITY)
    return ComplexPermittivity(material.relative_permittivity, imag)


def _eta_value(eta) -> complex:
    if isinstance(eta, ComplexPermittivity):
        return eta.value
    eta = complex(eta)
    # Accept raw complex with either sign convention; losses go below the axis.
    return complex(eta.real, -abs(eta.imag))


def fresnel_reflection(eta, incidence_angle, polarization: str = "TE"):
    """Fresnel reflection coefficient at a planar air/material interface.

    incidence_angle is measured from the surface normal, in [0, pi/2); arrays
    are broadcast.  TE is the E-field perpendicular to the plane of incidence.
    """
    theta = np.asarray(incidence_angle, dtype=np.float64)
    if (theta < 0).any() or (theta >= np.pi / 2).any():
        raise InvalidAngle("incidence angle must lie in [0, pi/2)")
    if polarization not in ("TE", "TM"):
        raise ValueError(f"polarization must be 'TE' or 'TM', got {polarization!r}")
    n2 = _eta_value(eta)
    cos_t = np.cos(theta)
    root = np.sqrt(n2 - np.sin(theta) ** 2 + 0j)
    if polarization == "TE":
        gamma = (cos_t - root) / (cos_t + root)
    else:
        gamma = (n2 * cos_t - root) / (n2 * cos_t + root)
    return complex(gamma) if gamma.ndim == 0 else gamma


def transition_function(x):
    """Kouyoumjian-Pathak Fresnel transition function F(x), x >= 0.

    F(x) = 2j*sqrt(x)*exp(jx) * int_{sqrt(x)}^inf exp(-j t^2) dt, evaluated via
    the modified negative Fresnel integral.  F(x) -> 1 as x grows; F(0) = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    if (x < 0).any():
        raise NonPositiveInput("transition function argument must be >= 0")
    sqrt_x = np.sqrt(x)
    fm = scipy.special.modfresnelm(sqrt_x)[0]
    out = 2j * sqrt_x * np.exp(1j * x) * fm
    return complex(out) if out.ndim == 0 else out


def _nearest_integer(beta, n, sign):
    """N minimizing |2*pi*n*N - (beta + sign*pi)|."""
    return np.round((beta + sign * np.pi) / (2.0 * np.pi * n))


def _a_coeff(beta, n, sign):
    big_n = _nearest_integer(beta, n, sign)
    return 2.0 * np.cos((2.0 * np.pi * n * big_n - beta) / 2.0) ** 2


def _cot(x):
    return np.cos(x) / np.sin(x)


def _cot_f_term(beta, n, k_l, sign):
    """cot((pi + sign*beta)/(2n)) * F(kL * a_sign(beta)), with the KP small-
    angle limit substituted near the boundary where the cotangent blows up."""
    beta = np.asarray(beta, dtype=np.float64)
    k_l = np.broadcast_to(np.asarray(k_l, dtype=np.float64), beta.shape)
    eps = beta - sign * (2.0 * np.pi * n * _nearest_integer(beta, n, sign) - np.pi)
    tol = 1e-9
    singular = np.abs(eps) <= tol

    out = np.empty(beta.shape, dtype=np.complex128)
    if singular.any():
        e = eps[singular]
        sgn = np.where(e >= 0, 1.0, -1.0)
        lim = n * np.exp(1j * np.pi / 4) * (
            np.sqrt(2.0 * np.pi * k_l[singular]) * sgn
            - 2.0 * k_l[singular] * e * np.exp(1j * np.pi / 4)
        )
        out[singular] = lim
    reg = ~singular
    if reg.any():
        arg = k_l[reg] * _a_coeff(beta[reg], n, sign)
        out[reg] = _cot((np.pi + sign * beta[reg]) / (2.0 * n)) * transition_function(arg)
    return out


def utd_diffraction(
    wedge_angle,
    s_incident,
    s_diffracted,
    phi_incident,
    phi_diffracted,
    frequency,
    eta_faces=None,
    beta0=np.pi / 2,
    polarization: str = "TE",
):
    """Uniform wedge diffraction coefficient D (four-term KP form).

    wedge_angle is the interior angle of the solid wedge (0 for a thin
    screen); phi angles are measured from the o-face within the exterior
    region [0, (2 - wedge_angle/pi)*pi]; s_* are the leg lengths in meters.
    eta_faces supplies the (o-face, n-face) permittivities used to weight the
    two reflection-boundary terms; perfectly reflecting faces when omitted.
    The face coefficients are evaluated at angles symmetric in (phi_incident,
    phi_diffracted) so the coefficient is exactly reciprocal.
    """
    s_i = np.asarray(s_incident, dtype=np.float64)
    s_d = np.asarray(s_diffracted, dtype=np.float64)
    if (s_i <= 0).any() or (s_d <= 0).any():
        raise DegeneratePath("diffraction leg lengths must be > 0")
    if frequency <= 0.0:
        raise NonPositiveInput(f"frequency must be > 0, got {frequency}")
    n = 2.0 - float(wedge_angle) / np.pi
    if not 0.0 < n <= 2.0:
        raise InvalidAngle(f"wedge angle {wedge_angle} outside [0, 2*pi)")
    phi = np.asarray(phi_diffracted, dtype=np.float64)
    phi_p = np.asarray(phi_incident, dtype=np.float64)
    if (phi < 0).any() or (phi > n * np.pi + 1e-9).any() or (phi_p < 0).any() or (
        phi_p > n * np.pi + 1e-9
    ).any():
        raise InvalidAngle("phi angles must lie within the wedge exterior [0, n*pi]")

    k = 2.0 * np.pi * frequency / SPEED_OF_LIGHT
    sin_b = np.sin(beta0)
    big_l = s_i * s_d / (s_i + s_d) * sin_b**2
    k_l = k * big_l

    beta_m = phi - phi_p
    beta_p = phi + phi_p

    if eta_faces is None:
        r_o = r_n = 1.0 + 0.0j
    else:
        eta_o, eta_n = eta_faces
        # Grazing angles symmetric under swapping the incident/diffracted
        # roles; they reduce to the specular angle on each face's reflection
        # boundary.
        g_o = np.minimum(phi, phi_p)
        g_n = n * np.pi - np.maximum(phi, phi_p)
        lim = np.pi / 2 - 1e-9
        th_o = np.clip(np.abs(np.pi / 2 - g_o), 0.0, lim)
        th_n = np.clip(np.abs(np.pi / 2 - g_n), 0.0, lim)
        r_o = fresnel_reflection(eta_o, th_o, polarization)
        r_n = fresnel_reflection(eta_n, th_n, polarization)

    pref = -np.exp(-1j * np.pi / 4) / (2.0 * n * np.sqrt(2.0 * np.pi * k) * sin_b)
    d_sum = (
        _cot_f_term(beta_m, n, k_l, +1)
        + _cot_f_term(beta_m, n, k_l, -1)
        + r_n * _cot_f_term(beta_p, n, k_l, +1)
        + r_o * _cot_f_term(beta_p, n, k_l, -1)
    )
    out = pref * d_sum
    return complex(out) if np.ndim(out) == 0 else out


def diffraction_spreading(s_incident, s_diffracted):
    """Factor converting a 1/(s_i+s_d) free-space spread into the edge-
    diffraction spread sqrt(1/(s_i*s_d*(s_i+s_d))); symmetric in its args."""
    s_i = np.asarray(s_incident, dtype=np.float64)
    s_d = np.asarray(s_diffracted, dtype=np.float64)
    return np.sqrt((s_i + s_d) / (s_i * s_d))

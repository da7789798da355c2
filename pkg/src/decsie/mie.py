"""Plane-wave scattering by a concentrically layered dielectric sphere.

Vector spherical harmonic expansion with time convention exp(-i w t).  In
each layer the field is written with the same angular harmonics as the
incident wave,

    E = sum_n E_n [ TE_n(r) M_o1n - i TM_n(r) N_e1n ],  E_n = i^n (2n+1) / (n(n+1)),

where each radial coefficient carries a regular (j_n) and an outgoing
(h_n) part.  Layer coefficients are propagated outward by matching the
tangential E and H at every interface.  The exterior is normalised to the
incident wave, which leaves (1, -b_n) for TE and (1, -a_n) for TM.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from .sie import PlaneWave


class MieConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LayeredSphere:
    """Radii ascending, permittivities innermost first, unit background."""

    radii: tuple
    eps: tuple

    def __post_init__(self):
        r = tuple(float(x) for x in np.atleast_1d(self.radii))
        e = tuple(complex(x) for x in np.atleast_1d(self.eps))
        if len(r) != len(e) or not r:
            raise ValueError("need one permittivity per layer")
        if r[0] <= 0 or any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("radii must be positive and strictly increasing")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "eps", e)

    @classmethod
    def homogeneous(cls, radius: float, eps: complex) -> "LayeredSphere":
        return cls((radius,), (eps,))

    @property
    def outer_radius(self) -> float:
        return self.radii[-1]

    def layer_of(self, r: np.ndarray) -> np.ndarray:
        """0..L-1 for layers, L for the exterior."""
        return np.searchsorted(np.asarray(self.radii), r, side="left")


def wiscombe_terms(x: float) -> int:
    return int(math.ceil(x + 4.0 * x ** (1.0 / 3.0) + 2.0))


def _riccati(n, rho):
    """psi, psi', xi, xi' for Riccati-Bessel functions of order n at rho."""
    j = spherical_jn(n, rho)
    jd = spherical_jn(n, rho, derivative=True)
    y = spherical_yn(n, rho)
    yd = spherical_yn(n, rho, derivative=True)
    h, hd = j + 1j * y, jd + 1j * yd
    return rho * j, j + rho * jd, rho * h, h + rho * hd


class MieSolution:
    """Per-layer expansion coefficients for one sphere, frequency and order."""

    def __init__(self, sphere: LayeredSphere, k0: float, n_max: int):
        if k0 <= 0:
            raise ValueError("k0 must be positive")
        self.sphere, self.k0, self.n_max = sphere, float(k0), int(n_max)
        self.k = np.sqrt(np.array(sphere.eps + (1.0,), dtype=complex)) * self.k0
        n = np.arange(1, self.n_max + 1)
        nl = len(sphere.radii)
        # coef[mode, layer, {j,h}, n]
        coef = np.zeros((2, nl + 1, 2, n.size), dtype=complex)
        coef[:, 0, 0, :] = 1.0
        for layer, rad in enumerate(sphere.radii):
            ki, ko = self.k[layer], self.k[layer + 1]
            pi_, dpi, xi_, dxi = _riccati(n, ki * rad)
            po, dpo, xo, dxo = _riccati(n, ko * rad)
            for mode in (0, 1):
                P, Q = coef[mode, layer]
                if mode == 0:  # TE: xi/k and xi' continuous
                    r1 = (P * pi_ + Q * xi_) / ki
                    r2 = P * dpi + Q * dxi
                    a11, a12, a21, a22 = po / ko, xo / ko, dpo, dxo
                else:  # TM: xi'/k and xi continuous
                    r1 = (P * dpi + Q * dxi) / ki
                    r2 = P * pi_ + Q * xi_
                    a11, a12, a21, a22 = dpo / ko, dxo / ko, po, xo
                det = a11 * a22 - a12 * a21
                coef[mode, layer + 1, 0] = (r1 * a22 - a12 * r2) / det
                coef[mode, layer + 1, 1] = (a11 * r2 - a21 * r1) / det
        scale = coef[:, nl, 0, :].copy()
        coef /= scale[:, None, None, :]
        self.coef = coef

    @property
    def a_n(self) -> np.ndarray:
        return -self.coef[1, -1, 1]

    @property
    def b_n(self) -> np.ndarray:
        return -self.coef[0, -1, 1]

    def local_field(self, xyz: np.ndarray, return_terms: bool = False):
        """Total E for a unit x-polarised wave travelling along +z (local frame)."""
        xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
        r = np.linalg.norm(xyz, axis=1)
        tiny = 1e-9 * self.sphere.outer_radius
        # the series is regular at the origin; nudge to keep the angles defined
        xyz = np.where((r < tiny)[:, None], xyz + np.array([tiny, 0.6 * tiny, 0.8 * tiny]), xyz)
        r = np.linalg.norm(xyz, axis=1)
        radii = np.asarray(self.sphere.radii)
        on_iface = np.isclose(r[:, None], radii[None, :], rtol=1e-13, atol=0).any(axis=1)
        r = np.where(on_iface, r * (1 + 1e-12), r)
        xyz = xyz * (r / np.linalg.norm(xyz, axis=1))[:, None]
        cos_t = np.clip(xyz[:, 2] / r, -1.0, 1.0)
        sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t**2))
        phi = np.arctan2(xyz[:, 1], xyz[:, 0])
        cp, spn = np.cos(phi), np.sin(phi)
        layer = self.sphere.layer_of(r)
        k = self.k[layer]
        rho = k * r

        n_all = np.arange(1, self.n_max + 1)
        pis = np.zeros((self.n_max + 1, r.size))
        taus = np.zeros_like(pis)
        pis[1] = 1.0
        for n in range(1, self.n_max + 1):
            if n >= 2:
                pis[n] = ((2 * n - 1) * cos_t * pis[n - 1] - n * pis[n - 2]) / (n - 1)
            taus[n] = n * cos_t * pis[n] - (n + 1) * pis[n - 1]

        E_sph = np.zeros((r.size, 3), dtype=complex)
        last = np.zeros(r.size)
        for n in n_all:
            En = (1j**n) * (2 * n + 1) / (n * (n + 1))
            j = spherical_jn(n, rho)
            jd = spherical_jn(n, rho, derivative=True)
            y = spherical_yn(n, rho)
            yd = spherical_yn(n, rho, derivative=True)
            h, hd = j + 1j * y, jd + 1j * yd
            te = self.coef[0, layer, 0, n - 1] * j + self.coef[0, layer, 1, n - 1] * h
            tm_z = self.coef[1, layer, 0, n - 1] * j + self.coef[1, layer, 1, n - 1] * h
            tm_d = (self.coef[1, layer, 0, n - 1] * (j + rho * jd) + self.coef[1, layer, 1, n - 1] * (h + rho * hd)) / rho
            pi_n, tau_n = pis[n], taus[n]
            # M_o1n and N_e1n in (r, theta, phi)
            m_t = cp * pi_n * te
            m_p = -spn * tau_n * te
            n_r = cp * n * (n + 1) * sin_t * pi_n * tm_z / rho
            n_t = cp * tau_n * tm_d
            n_p = -spn * pi_n * tm_d
            term = En * np.stack([-1j * n_r, m_t - 1j * n_t, m_p - 1j * n_p], axis=1)
            E_sph += term
            last = np.linalg.norm(term, axis=1)
        st, ct = sin_t, cos_t
        r_hat = np.stack([st * cp, st * spn, ct], axis=1)
        t_hat = np.stack([ct * cp, ct * spn, -st], axis=1)
        p_hat = np.stack([-spn, cp, np.zeros_like(cp)], axis=1)
        E = E_sph[:, 0:1] * r_hat + E_sph[:, 1:2] * t_hat + E_sph[:, 2:3] * p_hat
        if return_terms:
            return E, last
        return E


def _frame(wave: PlaneWave):
    ep = wave.E_p
    re, im = ep.real, ep.imag
    base = re if np.linalg.norm(re) >= np.linalg.norm(im) else im
    e1 = base / np.linalg.norm(base)
    if np.linalg.norm(ep - (ep @ e1) * e1) > 1e-12 * np.linalg.norm(ep):
        raise ValueError("Mie oracle needs a linearly polarised wave")
    e3 = wave.u_hat
    e2 = np.cross(e3, e1)
    return np.stack([e1, e2, e3]), complex(ep @ e1)


def mie_field(sphere: LayeredSphere, wave: PlaneWave, points, n_max: int | None = None, tail_tol: float = 1e-12) -> np.ndarray:
    """Total E at ``points`` (n, 3) for a linearly polarised plane wave.

    The order defaults to the Wiscombe count for the outer size parameter.
    If the last retained term still exceeds ``tail_tol`` relative to the
    field, the evaluation is repeated once with 2 N + 10 terms.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    R, amp = _frame(wave)
    local = points @ R.T
    n0 = n_max or wiscombe_terms(wave.k0 * sphere.outer_radius)
    for attempt, n in enumerate((n0, 2 * n0 + 10)):
        sol = MieSolution(sphere, wave.k0, n)
        E, last = sol.local_field(local, return_terms=True)
        scale = max(np.linalg.norm(E, axis=1).max(), 1e-300)
        if last.max() <= tail_tol * scale:
            break
        if n_max is not None:
            break
    else:
        raise MieConvergenceError(f"series tail {last.max() / scale:.3e} above {tail_tol:g} with {n} terms")
    return amp * (E @ R)


def quasi_static_interior(eps: complex) -> complex:
    """Uniform interior field factor of a small dielectric sphere."""
    return 3.0 / (eps + 2.0)

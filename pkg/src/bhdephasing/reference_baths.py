"""Reference baths with known dephasing behaviour.

Free bosons (``eps = k^2 / 2m`` or ``2 J sum_i (1 - cos k_i)``, weight
``N^2 = rho0``) and weakly-interacting Bogoliubov gases
(``omega = sqrt(eps (eps + 2 rho0 U))``, ``N^2 = rho0 eps / omega``).
Spectral densities are normalised as ``J(w) = int d^dk/(2 pi)^d N^2 delta(w - omega_k)``,
the thermodynamic limit of the lattice sums ``(1/V) sum_k``, so every closed
form can be checked against a finite-lattice sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _bessel
from .correlators import PowerFit, _linear_fit
from .errors import NonPositive, Unsupported
from .excitations import MomentumGrid

KINDS = ("free-continuum", "free-lattice", "weakly-interacting-continuum", "weakly-interacting-lattice")


@dataclass(frozen=True)
class OracleBath:
    """Parameters of a reference bath; ``m`` is used on the continuum, ``J`` on a lattice."""
    kind: str
    d: float = 1
    m: float = 1.0
    J: float = 1.0
    rho0: float = 1.0
    U: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise Unsupported(f"unknown bath kind {self.kind!r}")
        if not self.d > 0:
            raise ValueError("dimension must be positive")
        for name in ("m", "J", "rho0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.interacting and not self.U > 0:
            raise ValueError("interaction must be positive")
        if self.lattice and self.d not in (1, 2, 3):
            raise Unsupported("lattice baths need an integer dimension")

    @property
    def interacting(self) -> bool:
        return self.kind.startswith("weakly")

    @property
    def lattice(self) -> bool:
        return self.kind.endswith("lattice")

    @property
    def mass(self) -> float:
        """Mass on the continuum, band mass ``1 / (2 J)`` on the lattice."""
        return 1.0 / (2.0 * self.J) if self.lattice else self.m

    @property
    def gap_scale(self) -> float:
        return self.rho0 * self.U if self.interacting else 0.0

    def frequency(self, eps):
        eps = np.asarray(eps, dtype=float)
        if not self.interacting:
            return eps
        return np.sqrt(eps * (eps + 2 * self.gap_scale))

    def weight(self, eps):
        """``N^2`` per mode as a function of the bare energy."""
        eps = np.asarray(eps, dtype=float)
        if not self.interacting:
            return np.full_like(eps, self.rho0)
        w = self.frequency(eps)
        return self.rho0 * np.where(w > 0, eps / np.where(w > 0, w, 1.0), 0.0)

    def bare_energy(self, omega):
        """Inverse dispersion ``eps(omega)``."""
        omega = np.asarray(omega, dtype=float)
        if not self.interacting:
            return omega
        c = self.gap_scale
        return np.sqrt(c * c + omega * omega) - c


def expected_exponents(bath: OracleBath) -> dict:
    """Asymptotic power laws of the reference tables: low-frequency ``J``, late ``gamma`` and ``Gamma``.

    ``None`` marks logarithmic behaviour.
    """
    d = bath.d
    if not bath.interacting:
        if not 0 < d < 4:
            raise Unsupported("free-boson power laws hold for 0 < d < 4")
        return {"J": (d - 2) / 2, "gamma": (2 - d) / 2, "Gamma": (4 - d) / 2}
    return {"J": d, "gamma": -d, "Gamma": None if d == 1 else 1 - d}


# -- spectral densities ----------------------------------------------------------

def _continuum_prefactor(bath: OracleBath) -> float:
    d = bath.d
    sphere = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    return bath.rho0 * sphere * (2 * bath.mass) ** (d / 2) / (2 * (2 * math.pi) ** d)


def oracle_spectral_density(bath: OracleBath, omega) -> np.ndarray:
    """Closed-form ``J(omega)``.

    Continuum kinds are exact in any ``d``. The 1D lattice kinds are exact and
    diverge at the band edge; for lattice kinds in higher dimension the
    low-frequency (band-mass) continuum form is returned.
    """
    omega = np.asarray(omega, dtype=float)
    out = np.zeros_like(omega)
    pos = omega > 0
    w = omega[pos]
    if bath.lattice and bath.d == 1:
        eps = bath.bare_energy(w)
        band = 4 * bath.J
        inside = eps < band
        val = np.zeros_like(w)
        e = eps[inside]
        if bath.interacting:
            R = e + bath.gap_scale
            val[inside] = bath.rho0 / np.pi * np.sqrt(e) / (R * np.sqrt(band - e))
        else:
            val[inside] = bath.rho0 / (np.pi * np.sqrt(e * (band - e)))
        out[pos] = val
        return out
    A = _continuum_prefactor(bath)
    d = bath.d
    if bath.interacting:
        eps = bath.bare_energy(w)
        out[pos] = A * eps ** (d / 2) / (eps + bath.gap_scale)
    else:
        out[pos] = A * w ** ((d - 2) / 2)
    return out


def van_hove_frequency(bath: OracleBath) -> float:
    """Band-edge frequency of a 1D lattice bath, where ``J(omega)`` diverges."""
    if not (bath.lattice and bath.d == 1):
        raise Unsupported("van Hove point is only tabulated for 1D lattices")
    return float(bath.frequency(4 * bath.J))


def locate_van_hove(omega, values) -> float:
    """Frequency of the bin with the largest finite difference of ``J``."""
    omega = np.asarray(omega, dtype=float)
    v = np.nan_to_num(np.asarray(values, dtype=float), posinf=np.finfo(float).max / 4)
    i = int(np.argmax(np.abs(np.diff(v))))
    return float(omega[i + 1] if abs(v[i + 1]) >= abs(v[i]) else omega[i])


# -- rates -------------------------------------------------------------------------

def _closed_available(bath: OracleBath) -> bool:
    return (bath.kind == "free-continuum" and 0 < bath.d < 4) or (
        bath.kind == "free-lattice" and bath.d == 1)


def _free_continuum_coefficient(bath: OracleBath) -> tuple[float, float]:
    """``(C, s)`` with ``gamma = C t^{-s}``, ``s = (d - 2)/2``."""
    s = (bath.d - 2) / 2
    A = _continuum_prefactor(bath)
    if s == 0:
        return A * math.pi / 2, 0.0
    return A * math.gamma(s) * math.sin(math.pi * s / 2), s


def oracle_gamma(bath: OracleBath, t, *, method: str = "auto", Ls: int = 2048) -> np.ndarray:
    """Dephasing rate of a reference bath.

    ``method`` is ``closed`` (free continuum, free 1D lattice), ``quadrature``
    (Fourier-sine integral of the closed-form ``J``; exact 1D lattice and all
    continuum kinds) or ``lattice`` (direct momentum sum on ``Ls^d`` sites).
    """
    t = np.asarray(t, dtype=float)
    if method == "auto":
        method = "closed" if _closed_available(bath) else ("lattice" if bath.lattice else "quadrature")
    if method == "closed":
        if not _closed_available(bath):
            raise Unsupported(f"no closed form for {bath.kind} in d = {bath.d}")
        if bath.kind == "free-lattice":
            x = 2 * bath.J * t
            return bath.rho0 * t * (np.sin(x) * _bessel.j1(x) + np.cos(x) * _bessel.j0(x))
        C, s = _free_continuum_coefficient(bath)
        with np.errstate(divide="ignore"):
            out = C * t ** (-s)
        return np.where(t > 0, out, 0.0 if s <= 0 else np.inf)
    if method == "lattice":
        return lattice_sum(bath, t, Ls)[0]
    if method == "quadrature":
        return np.array([_sine_transform(bath, ti) for ti in t])
    raise ValueError(f"unknown method {method!r}")


def oracle_Gamma(bath: OracleBath, t, *, method: str = "auto", Ls: int = 2048) -> np.ndarray:
    """Decoherence function ``int_0^t gamma`` with the same methods as :func:`oracle_gamma`."""
    t = np.asarray(t, dtype=float)
    if method == "auto":
        method = "closed" if bath.kind == "free-continuum" else ("lattice" if bath.lattice else "quadrature")
    if method == "closed":
        if bath.kind != "free-continuum":
            raise Unsupported("closed decoherence only for free continuum bosons")
        C, s = _free_continuum_coefficient(bath)
        return C * t ** (1 - s) / (1 - s)
    if method == "lattice":
        return lattice_sum(bath, t, Ls)[1]
    if method == "quadrature":
        return np.array([_dephasing_integral(bath, ti) for ti in t])
    raise ValueError(f"unknown method {method!r}")


def _band_top(bath: OracleBath) -> float:
    if bath.lattice and bath.d == 1:
        return float(bath.frequency(4 * bath.J))
    return np.inf


def _sine_transform(bath: OracleBath, t: float) -> float:
    """``int J(w) sin(w t) / w dw``."""
    if t == 0:
        return 0.0
    f = lambda w: oracle_spectral_density(bath, np.array([w]))[0] / w if w > 0 else 0.0
    top = _band_top(bath)
    if np.isfinite(top):
        # integrable inverse-square-root edges: substitute w = top sin^2(theta)
        def g(theta):
            w = top * np.sin(theta) ** 2
            return f(w) * np.sin(w * t) * 2 * top * np.sin(theta) * np.cos(theta)
        val, _ = integrate.quad(g, 0, np.pi / 2, limit=2000, epsabs=1e-13, epsrel=1e-11)
        return val
    # split off the oscillatory tail for a Fourier integral on [a, inf)
    a = 1.0
    head, _ = integrate.quad(lambda w: f(w) * np.sin(w * t), 0, a, limit=2000, epsabs=1e-14, epsrel=1e-12)
    tail, _ = integrate.quad(f, a, np.inf, weight="sin", wvar=t, limlst=500)
    return head + tail


def _dephasing_integral(bath: OracleBath, t: float) -> float:
    """``int J(w) (1 - cos w t) / w^2 dw`` in the scaled variable ``x = w t``."""
    if t == 0:
        return 0.0
    f = lambda x: oracle_spectral_density(bath, np.array([x / t]))[0]
    kern = lambda x: 2 * np.sin(0.5 * x) ** 2 / x ** 2 if x > 1e-8 else 0.5
    top = _band_top(bath) * t
    if np.isfinite(top):
        def g(theta):
            x = top * np.sin(theta) ** 2
            return f(x) * kern(x) * 2 * top * np.sin(theta) * np.cos(theta)
        val, _ = integrate.quad(g, 0, np.pi / 2, limit=4000, epsabs=1e-14, epsrel=1e-11)
        return val * t
    a = 2 * np.pi
    head, _ = integrate.quad(lambda x: f(x) * kern(x), 0, a, limit=2000, epsabs=1e-14, epsrel=1e-12)
    smooth, _ = integrate.quad(lambda x: f(x) / x ** 2, a, np.inf, limit=2000)
    osc, _ = integrate.quad(lambda x: f(x) / x ** 2, a, np.inf, weight="cos", wvar=1.0, limlst=500)
    return (head + smooth - osc) * t


def lattice_sum(bath: OracleBath, t, Ls: int = 2048) -> tuple[np.ndarray, np.ndarray]:
    """Direct ``(1/V) sum_k`` of ``N^2 sin(w t)/w`` and ``N^2 (1 - cos w t)/w^2``.

    Uses the point-group wedge for ``d = 2``; the ``k = 0`` term is kept with its
    ``t`` (resp. ``t^2 / 2``) limit.
    """
    if not bath.lattice or bath.d not in (1, 2):
        raise Unsupported("direct sums are provided for 1D and 2D lattices")
    t = np.asarray(t, dtype=float)
    d = int(bath.d)
    if d == 1:
        m = np.arange(Ls)
        mult = np.ones(Ls)
        pts = m[:, None]
    else:
        pts, mult = MomentumGrid(Ls, 2).wedge()
    k = 2 * np.pi * pts / Ls
    eps = 2 * bath.J * (1 - np.cos(k)).sum(axis=1)
    w = bath.frequency(eps)
    n2 = np.where(eps > 0, bath.weight(eps), bath.rho0 if not bath.interacting else 0.0)
    coef = n2 * mult / Ls ** d
    gamma = np.zeros(len(t))
    Gamma = np.zeros(len(t))
    step = max(1, 2_000_000 // len(w))
    safe = np.where(w > 0, w, 1.0)
    for s in range(0, len(t), step):
        tt = t[s:s + step, None]
        ph = tt * w[None, :]
        gamma[s:s + step] = np.where(w > 0, np.sin(ph) / safe, tt) @ coef
        Gamma[s:s + step] = np.where(w > 0, 2 * np.sin(0.5 * ph) ** 2 / safe ** 2, 0.5 * tt ** 2) @ coef
    return gamma, Gamma


# -- fits ---------------------------------------------------------------------------

def asymptotic_exponent(t, series, window) -> PowerFit:
    """Log-log least-squares exponent of ``|series|`` on ``window = (t_lo, t_hi)``.

    Raises :class:`NonPositive` when the series vanishes or changes sign
    inside the window; fit an envelope (see :func:`envelope`) in that case.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(series, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    seg = y[sel]
    if len(seg) < 3:
        raise ValueError("window holds fewer than three samples")
    if np.any(seg == 0) or (np.any(seg > 0) and np.any(seg < 0)):
        raise NonPositive(f"series changes sign or vanishes inside {window}")
    return _linear_fit(np.log(t[sel]), np.log(np.abs(seg)), tuple(window))


def envelope(t, series):
    """Local maxima of ``|series|`` (times and values) for fitting oscillating decays."""
    y = np.abs(np.asarray(series, dtype=float))
    i = np.flatnonzero((y[1:-1] >= y[:-2]) & (y[1:-1] > y[2:])) + 1
    return np.asarray(t)[i], y[i]

"""Density structure factors, spectral density and dephasing rates of the bath.

The local density fluctuation splits into a one-mode part with weights
``N_{a,k} = sum_n n c0_n (u + v)_{a,k,n}`` and a two-mode part with
``W_{ak,bp} = sum_n (n - n0) u_{a,k,n} v_{b,p,n}``. At zero temperature

    gamma_1(t) = (1/V)   sum N^2 sin(w t) / w
    gamma_2(t) = (1/V^2) sum (W^2 + W W') sin(W_t t) / W_t,   W_t = w_ak + w_bp

The double sum in ``gamma_2`` factorises over the Fock index into products
of single-momentum kernels, which is what makes large lattices affordable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import ModeUnavailable
from .excitations import ExcitationSpectrum

#: spectra with at most this many (k, branch) modes use the direct double sum in auto mode
DIRECT_MODE_BUDGET = 2048
#: hard cap for an explicit direct request
DIRECT_MODE_CAP = 8192


def time_grid(t_max: float = 200.0, dt: float = 0.01) -> np.ndarray:
    """Uniform grid ``0, dt, ..., t_max``."""
    n = int(round(t_max / dt))
    return np.arange(n + 1) * dt


class DensityWeights:
    """One- and two-particle density weights of every stored mode.

    Modes are flattened to a single axis of length ``P = points * branches``;
    ``mult`` carries the symmetry multiplicity of each and zero modes are dropped.

    Attributes
    ----------
    N : ndarray (P,)
        One-particle weights.
    u, v : ndarray (P, n_max + 1)
        Bogoliubov amplitudes.
    excess : ndarray (n_max + 1,)
        ``n - n0``, the Fock-space weight entering ``W``, ``U``-type and ``V``-type terms.
    """

    def __init__(self, omega, N, u, v, mult, branch, excess, volume, spectrum=None):
        self.omega = np.asarray(omega, dtype=float)
        self.N = np.asarray(N, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.mult = np.asarray(mult, dtype=float)
        self.branch = np.asarray(branch, dtype=int)
        self.excess = np.asarray(excess, dtype=float)
        self.volume = int(volume)
        self.spectrum = spectrum

    @classmethod
    def single_mode(cls, omega, u, v, c0, *, volume=1, density=None):
        """Weights of a hand-made mode set (rows of ``u`` and ``v``), mainly for checks."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        c0 = np.asarray(c0, dtype=float)
        n = np.arange(len(c0))
        n0 = float(np.dot(n, c0 ** 2)) if density is None else density
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        return cls(omega, (u + v) @ (n * c0), u, v, np.ones(len(omega)), np.arange(len(omega)),
                   n - n0, volume)

    @property
    def n_modes(self) -> int:
        return len(self.omega)

    @property
    def n_branches(self) -> int:
        return int(self.branch.max()) + 1 if len(self.branch) else 0

    @property
    def weighted_u(self) -> np.ndarray:
        """``(n - n0) u``: contracting with ``v`` gives ``W``."""
        return self.u * self.excess

    def W(self, i=None, j=None):
        """``W_{ij} = sum_n (n - n0) u_{i,n} v_{j,n}`` for mode indices (all pairs by default)."""
        wu = self.weighted_u if i is None else self.weighted_u[i]
        vv = self.v if j is None else self.v[j]
        return wu @ vv.T

    def U_type(self, i=None, j=None):
        wu = self.weighted_u if i is None else self.weighted_u[i]
        uu = self.u if j is None else self.u[j]
        return wu @ uu.T

    def V_type(self, i=None, j=None):
        wv = (self.v * self.excess) if i is None else self.v[i] * self.excess
        vv = self.v if j is None else self.v[j]
        return wv @ vv.T


def compute_weights(spectrum: ExcitationSpectrum) -> DensityWeights:
    """Flatten a spectrum into per-mode density weights, skipping zero modes."""
    state = spectrum.state
    c0 = np.asarray(state.amplitudes)
    K, nb = spectrum.omega.shape
    keep = ~spectrum.zero_mode.ravel()
    u = spectrum.u.reshape(K * nb, -1)[keep]
    v = spectrum.v.reshape(K * nb, -1)[keep]
    omega = spectrum.omega.ravel()[keep]
    mult = np.repeat(spectrum.multiplicity, nb)[keep]
    branch = np.tile(np.arange(nb), K)[keep]
    # first-order density response; u and v are orthogonal to c0, so only
    # the occupation-weighted overlap survives
    N = (u + v) @ (np.arange(len(c0)) * c0)
    excess = np.arange(len(c0)) - state.density
    return DensityWeights(omega, N, u, v, mult, branch, excess, spectrum.volume, spectrum)


# -- spectral density ----------------------------------------------------------

@dataclass(frozen=True)
class SpectralDensity:
    """Histogram of ``N^2 / V`` per unit frequency."""
    edges: np.ndarray
    values: np.ndarray
    by_branch: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    def zeroth_moment(self) -> float:
        return float(self.values.sum() * self.width)


def spectral_density(weights: DensityWeights, d_omega: float = 0.005) -> SpectralDensity:
    """Bin ``N^2 mult / V`` into bins of width ``d_omega`` starting at zero."""
    if not d_omega > 0:
        raise ValueError("bin width must be positive")
    top = weights.omega.max() if weights.n_modes else 0.0
    n_bins = int(np.floor(top / d_omega)) + 1
    edges = np.arange(n_bins + 1) * d_omega
    idx = np.minimum((weights.omega / d_omega).astype(int), n_bins - 1)
    w = weights.N ** 2 * weights.mult / weights.volume
    values = np.bincount(idx, weights=w, minlength=n_bins) / d_omega
    nb = max(weights.n_branches, 1)
    by_branch = np.zeros((nb, n_bins))
    for b in range(weights.n_branches):
        sel = weights.branch == b
        by_branch[b] = np.bincount(idx[sel], weights=w[sel], minlength=n_bins) / d_omega
    return SpectralDensity(edges, values, by_branch)


@dataclass(frozen=True)
class PowerFit:
    exponent: float
    stderr: float
    prefactor: float
    window: tuple


def fit_low_frequency(sd: SpectralDensity, *, skip: int = 2, decades: float = 1.0,
                      threshold: float = 0.0) -> PowerFit:
    """Log-log least squares of ``J`` over the lowest decade of nonzero bins.

    The lowest ``skip`` nonzero bins are dropped (finite-size gap).
    """
    nz = np.flatnonzero(sd.values > threshold)
    if len(nz) <= skip + 2:
        raise ValueError("not enough nonzero bins for a fit")
    nz = nz[skip:]
    w = sd.centers[nz]
    sel = w <= w[0] * 10 ** decades
    x, y = np.log(w[sel]), np.log(sd.values[nz][sel])
    return _linear_fit(x, y, (float(w[sel][0]), float(w[sel][-1])))


def _linear_fit(x, y, window) -> PowerFit:
    if len(x) < 3:
        raise ValueError("at least three points are needed for a fit")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(x) - 2, 1)
    s2 = resid @ resid / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return PowerFit(float(coef[0]), float(np.sqrt(cov[0, 0])), float(np.exp(coef[1])), window)


# -- rates ---------------------------------------------------------------------

@dataclass
class RateSeries:
    """Dephasing rate and decoherence function on a uniform grid."""
    t: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    Gamma1: np.ndarray | None = None
    Gamma2: np.ndarray | None = None
    gamma1_branches: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma1 + self.gamma2

    @property
    def Gamma(self) -> np.ndarray:
        if self.Gamma1 is None or self.Gamma2 is None:
            return decoherence(self)
        return self.Gamma1 + self.Gamma2

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


def _sinc_t(omega, t):
    """``sin(w t) / w`` with the ``t`` limit at ``w = 0``; shape ``(len(t), len(w))``."""
    t = np.asarray(t, dtype=float)[:, None]
    w = np.asarray(omega, dtype=float)[None, :]
    safe = np.where(w == 0, 1.0, w)
    return np.where(w == 0, t, np.sin(w * t) / safe)


def _one_minus_cos(omega, t):
    """``(1 - cos w t) / w^2`` written as ``2 sin^2(w t / 2) / w^2`` (no cancellation)."""
    t = np.asarray(t, dtype=float)[:, None]
    w = np.asarray(omega, dtype=float)[None, :]
    safe = np.where(w == 0, 1.0, w)
    return np.where(w == 0, 0.5 * t ** 2, 2 * np.sin(0.5 * w * t) ** 2 / safe ** 2)


def _chunks(n_t, n_modes, budget=2_000_000):
    step = max(1, budget // max(n_modes, 1))
    for start in range(0, n_t, step):
        yield slice(start, min(start + step, n_t))


def _is_uniform(t) -> bool:
    if len(t) < 3:
        return False
    d = np.diff(t)
    return bool(np.allclose(d, d[0], rtol=1e-10, atol=0.0)) and d[0] > 0


def _oscillators(omega, t, budget=2_000_000):
    """Yield ``(rows, cos(w t), sin(w t))`` chunk by chunk.

    On a uniform grid each chunk is built by angle addition from one exact
    row and a table of step powers, which avoids most trigonometric calls
    without accumulating rounding error across chunks.
    """
    omega = np.asarray(omega, dtype=float)
    t = np.asarray(t, dtype=float)
    uniform = _is_uniform(t)
    step = max(1, budget // max(len(omega), 1))
    if uniform:
        dt = t[1] - t[0]
        ph = (np.arange(min(step, len(t))) * dt)[:, None] * omega[None, :]
        wc, ws = np.cos(ph), np.sin(ph)
    for sl in _chunks(len(t), len(omega), budget):
        if uniform:
            n = sl.stop - sl.start
            c0 = np.cos(omega * t[sl.start])
            s0 = np.sin(omega * t[sl.start])
            yield sl, c0 * wc[:n] - s0 * ws[:n], s0 * wc[:n] + c0 * ws[:n]
        else:
            ph = t[sl, None] * omega[None, :]
            yield sl, np.cos(ph), np.sin(ph)


def gamma1(weights: DensityWeights, t, *, by_branch: bool = False):
    """One-particle rate ``(1/V) sum N^2 sin(w t)/w``; optionally also per branch."""
    t = np.asarray(t, dtype=float)
    coef = weights.N ** 2 * weights.mult / weights.volume
    nb = max(weights.n_branches, 1)
    onehot = np.zeros((weights.n_modes, nb))
    w = weights.omega
    # zero modes never reach this point; guard anyway with the t limit
    onehot[np.arange(weights.n_modes), weights.branch] = coef / np.where(w > 0, w, 1.0)
    out = np.zeros((len(t), nb))
    for sl, _, S in _oscillators(w, t):
        out[sl] = S @ onehot
    if np.any(w == 0):
        out += np.outer(t, np.bincount(weights.branch[w == 0], coef[w == 0], minlength=nb))
    total = out.sum(axis=1)
    return (total, out.T) if by_branch else total


def Gamma1(weights: DensityWeights, t) -> np.ndarray:
    """Closed-form ``(1/V) sum N^2 (1 - cos w t)/w^2``, evaluated as ``2 sin^2(w t/2)/w^2``."""
    t = np.asarray(t, dtype=float)
    w = weights.omega
    coef = weights.N ** 2 * weights.mult / weights.volume
    scaled = 2 * coef / np.where(w > 0, w, 1.0) ** 2
    out = np.zeros(len(t))
    for sl, _, S in _oscillators(0.5 * w, t):
        out[sl] = (S * S) @ scaled
    if np.any(w == 0):
        out += 0.5 * t ** 2 * coef[w == 0].sum()
    return out


def _pair_coefficients(weights: DensityWeights):
    """Direct ``(W^2 + W W') mult mult / V^2`` and pair frequencies, flattened."""
    W = weights.W()
    coef = (W ** 2 + W * W.T) * np.outer(weights.mult, weights.mult) / weights.volume ** 2
    freq = weights.omega[:, None] + weights.omega[None, :]
    return coef.ravel(), freq.ravel()


def _check_direct(weights: DensityWeights, cap: int):
    modes = int(round(weights.mult.sum()))
    if modes > cap:
        raise ModeUnavailable(f"direct two-particle sum over {modes} modes exceeds the cap {cap}")


def gamma2(weights: DensityWeights, t, mode: str = "auto", *, cap: int = DIRECT_MODE_CAP,
           with_integral: bool = False):
    """Two-particle rate by the explicit double sum or the Fock-factorised kernels.

    With ``with_integral`` the matching decoherence contribution ``Gamma_2`` is
    returned as well, ``(gamma2, Gamma2)``.
    """
    t = np.asarray(t, dtype=float)
    mode = resolve_gamma2_mode(weights, mode)
    if mode == "direct":
        _check_direct(weights, cap)
        coef, freq = _pair_coefficients(weights)
        g = np.zeros(len(t))
        G = np.zeros(len(t)) if with_integral else None
        for sl in _chunks(len(t), len(freq)):
            g[sl] = _sinc_t(freq, t[sl]) @ coef
            if with_integral:
                G[sl] = _one_minus_cos(freq, t[sl]) @ coef
        return (g, G) if with_integral else g
    if mode != "factorized":
        raise ValueError(f"unknown mode {mode!r}")
    g, G = _factorized_gamma2(weights, t)
    return (g, G) if with_integral else g


def resolve_gamma2_mode(weights: DensityWeights, mode: str) -> str:
    if mode == "auto":
        return "direct" if weights.mult.sum() <= DIRECT_MODE_BUDGET else "factorized"
    return mode


class _PairKernel:
    """Evaluate ``C2(tau) = <d2n(tau) d2n(0)>`` through single-momentum kernels.

    ``C2 = sum_nm x_n x_m [K^uu_nm K^vv_nm + K^uv_nm K^uv_mn]`` with
    ``K^xy_nm(tau) = (1/V) sum_i mult_i x_in y_im exp(i w_i tau)`` and
    ``x = n - n0``; only the real part is needed. ``K^uu`` and ``K^vv`` are
    symmetric in ``(n, m)`` and stored as upper triangles.
    """

    def __init__(self, weights: DensityWeights):
        w = weights.mult / weights.volume
        u, v = weights.u, weights.v
        nf = u.shape[1]
        self.omega = weights.omega
        iu, ju = np.triu_indices(nf)
        uu = u[:, iu] * u[:, ju]
        vv = v[:, iu] * v[:, ju]
        uv = (u[:, :, None] * v[:, None, :]).reshape(-1, nf * nf)
        self.stack = np.hstack([uu, vv, uv]) * w[:, None]
        x = weights.excess
        self.xx_sym = x[iu] * x[ju] * np.where(iu == ju, 1.0, 2.0)
        self.xx = np.outer(x, x).ravel()
        self.swap = np.arange(nf * nf).reshape(nf, nf).T.ravel()
        self.m = len(iu)

    def from_phases(self, C, S) -> np.ndarray:
        """``Re C2`` for rows of ``cos(w tau)`` and ``sin(w tau)``."""
        m = self.m
        Kc = C @ self.stack
        Ks = S @ self.stack
        cu, cv, cw = Kc[:, :m], Kc[:, m:2 * m], Kc[:, 2 * m:]
        su, sv, sw = Ks[:, :m], Ks[:, m:2 * m], Ks[:, 2 * m:]
        out = (cu * cv - su * sv) @ self.xx_sym
        out += (cw * cw[:, self.swap] - sw * sw[:, self.swap]) @ self.xx
        return out

    def __call__(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        out = np.empty(len(tau))
        for sl in _chunks(len(tau), len(self.omega)):
            ph = tau[sl, None] * self.omega[None, :]
            out[sl] = self.from_phases(np.cos(ph), np.sin(ph))
        return out


#: relative quadrature error allowed per interval for the two-particle rate
QUADRATURE_TOL = 1e-9
#: largest ``max(w_i + w_j) * h`` handled by one Gauss-Legendre panel
PANEL_PHASE = 4.0


def _gauss_legendre_error(nodes: int, half_phase: float) -> float:
    """Remainder bound of ``nodes``-point Gauss-Legendre on ``exp(i W tau)``, relative to ``h``.

    With ``x = W h / 2`` the bound is ``2^(2n) (n!)^4 / ((2n+1) ((2n)!)^3) x^(2n)``.
    """
    n = nodes
    log_c = (2 * n * math.log(2) + 4 * math.lgamma(n + 1) - math.log(2 * n + 1)
             - 3 * math.lgamma(2 * n + 1))
    if half_phase <= 0:
        return 0.0
    return math.exp(log_c + 2 * n * math.log(half_phase))


def quadrature_rule(top: float, dt: float, *, tol: float = QUADRATURE_TOL,
                    min_nodes: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Offsets in ``[0, dt]`` and weights integrating frequencies up to ``top`` to ``tol``."""
    panels = max(1, int(np.ceil(top * dt / PANEL_PHASE)))
    h = dt / panels
    nodes = min_nodes
    while _gauss_legendre_error(nodes, 0.5 * top * h) > tol:
        nodes += 1
    x, wq = np.polynomial.legendre.leggauss(nodes)
    local = (np.arange(panels)[:, None] * h + 0.5 * h * (x[None, :] + 1)).ravel()
    return local, np.tile(0.5 * h * wq, panels)


def _factorized_gamma2(weights: DensityWeights, t):
    """Integrate ``Re C2`` on each grid interval by Gauss-Legendre quadrature.

    The node count per interval follows from the Gauss-Legendre remainder for
    the fastest pair frequency ``max(w_i + w_j)``, so every oscillation is
    integrated to about ``1e-9`` relative. Returns ``gamma2(t)`` and
    ``Gamma2(t)`` (the latter through the repeated-integral kernel ``(t - tau)``).
    """
    t = np.asarray(t, dtype=float)
    if len(t) < 2 or weights.n_modes == 0:
        return np.zeros(len(t)), np.zeros(len(t))
    kernel = _PairKernel(weights)
    if t[0] != 0.0 or not (_is_uniform(t) or len(t) == 2):
        raise ValueError("factorized two-particle rates need a uniform grid starting at zero")
    dt = t[1] - t[0]
    local, lw = quadrature_rule(2 * weights.omega.max(), dt)
    fc = np.cos(local[:, None] * weights.omega[None, :])
    fs = np.sin(local[:, None] * weights.omega[None, :])
    n_int = len(t) - 1
    incr = np.empty(n_int)
    moment = np.empty(n_int)
    nq = len(local)
    budget = max(len(weights.omega), 4_000_000 // nq)
    for sl, C, S in _oscillators(weights.omega, t[:-1], budget=budget):
        # all node offsets of the chunk in one product: rows ordered (node, interval)
        Cq = (C[None] * fc[:, None] - S[None] * fs[:, None]).reshape(-1, C.shape[1])
        Sq = (S[None] * fc[:, None] + C[None] * fs[:, None]).reshape(-1, C.shape[1])
        vals = kernel.from_phases(Cq, Sq).reshape(nq, -1)
        incr[sl] = lw @ vals
        moment[sl] = (lw * (dt - local)) @ vals
    g = np.concatenate([[0.0], np.cumsum(incr)])
    G = np.zeros(len(t))
    for j in range(1, len(t)):
        G[j] = G[j - 1] + dt * g[j - 1] + moment[j - 1]
    return g, G


def pair_correlation_at_zero(weights: DensityWeights) -> float:
    """``(1/V^2) sum (W^2 + W W')``, the two-particle part of ``lambda``."""
    return float(_PairKernel(weights)(np.zeros(1))[0])


def short_time_lambda(weights: DensityWeights) -> float:
    """Gaussian decay constant ``lambda`` of the echo, ``L ~ exp(-lambda g^2 t^2)``."""
    one = float(np.sum(weights.N ** 2 * weights.mult) / weights.volume)
    return one + pair_correlation_at_zero(weights)


def compute_rates(weights: DensityWeights, t, *, gamma2_mode: str = "auto",
                  two_particle: bool = True) -> RateSeries:
    """Full rate series: branch-resolved ``gamma_1``, ``gamma_2`` and both ``Gamma`` parts."""
    t = np.asarray(t, dtype=float)
    g1, branches = gamma1(weights, t, by_branch=True)
    G1 = Gamma1(weights, t)
    mode = resolve_gamma2_mode(weights, gamma2_mode)
    if two_particle:
        g2, G2 = gamma2(weights, t, mode, with_integral=True)
    else:
        g2, G2 = np.zeros(len(t)), np.zeros(len(t))
    meta = {"gamma2_mode": mode if two_particle else "off",
            "lambda": short_time_lambda(weights) if two_particle else float(
                np.sum(weights.N ** 2 * weights.mult) / weights.volume)}
    return RateSeries(t, g1, g2, G1, G2, branches, meta)


def decoherence(series: RateSeries, method: str = "trapezoid") -> np.ndarray:
    """``Gamma(t) = int_0^t gamma``; ``closed`` returns the stored closed-form sums."""
    if method == "trapezoid":
        return cumulative_trapezoid(series.gamma, series.t, initial=0.0)
    if method == "closed":
        if series.Gamma1 is None or series.Gamma2 is None:
            raise ValueError("series carries no closed-form decoherence")
        return series.Gamma1 + series.Gamma2
    raise ValueError(f"unknown method {method!r}")


def plateau(series_t, gamma, *, fraction: float = 0.25):
    """Mean of ``gamma`` over the last ``fraction`` of the window and its relative spread."""
    t = np.asarray(series_t)
    sel = t >= t[-1] - fraction * (t[-1] - t[0])
    seg = np.asarray(gamma)[sel]
    mean = float(seg.mean())
    spread = float((seg.max() - seg.min()) / abs(mean)) if mean != 0 else np.inf
    return mean, spread

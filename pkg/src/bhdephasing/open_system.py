"""Impurity observables of the pure-dephasing channel and BLP information flows.

Populations are conserved and the coherence is multiplied by ``sqrt(L(t))``
with ``L = exp(-2 g^2 Gamma)``. The trace distance of the optimal pair of
initial states equals ``sqrt(L)``, so information flows are sums of echo
increments over the intervals where the rate has a fixed sign.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEcho, InvalidState

#: rates with ``|gamma|`` below this are treated as zero when locating sign changes
DEAD_BAND = 1e-12
POSITIVITY_TOL = 1e-12


def loschmidt_echo(Gamma, g: float) -> np.ndarray:
    """``L(t) = exp(-2 g^2 Gamma(t))``."""
    return np.exp(-2.0 * g ** 2 * np.asarray(Gamma, dtype=float))


@dataclass(frozen=True)
class ImpurityState:
    """Two-level density matrix plus the density-renormalised splitting."""
    rho: np.ndarray
    omega_tilde: float = 0.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise InvalidState("density matrix must be 2x2")
        if abs(np.trace(rho) - 1) > 1e-12:
            raise InvalidState(f"trace {np.trace(rho)} differs from 1")
        if np.abs(rho - rho.conj().T).max() > 1e-12:
            raise InvalidState("density matrix is not Hermitian")
        if np.linalg.eigvalsh(rho).min() < -POSITIVITY_TOL:
            raise InvalidState("density matrix is not positive semi-definite")
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_bath(cls, rho, params, density: float) -> "ImpurityState":
        """Attach ``omega0 + g n0`` from bath parameters and the mean filling."""
        return cls(rho, params.omega0 + params.g * density)

    @classmethod
    def plus(cls, omega_tilde: float = 0.0) -> "ImpurityState":
        return cls(0.5 * np.ones((2, 2)), omega_tilde)

    @classmethod
    def minus(cls, omega_tilde: float = 0.0) -> "ImpurityState":
        return cls(0.5 * np.array([[1, -1], [-1, 1]]), omega_tilde)


@dataclass(frozen=True)
class ImpurityTrajectory:
    t: np.ndarray
    rho: np.ndarray   # (T, 2, 2)

    @property
    def coherence(self) -> np.ndarray:
        return self.rho[:, 0, 1]


def evolve_impurity(state: ImpurityState, L, t, *, with_phase: bool = True) -> ImpurityTrajectory:
    """Apply the dephasing map: ``rho_12(t) = rho_12(0) sqrt(L) exp(-i w t)``.

    Raises :class:`InvalidState` if the echo drives the state out of the
    positive cone (only possible for ``L > 1``); nothing is clipped.
    """
    t = np.asarray(t, dtype=float)
    L = np.asarray(L, dtype=float)
    if L.shape != t.shape:
        raise ValueError("echo and time grid must have equal length")
    if np.any(L < 0):
        raise InvalidState("negative echo")
    r0 = state.rho
    factor = np.sqrt(L).astype(complex)
    if with_phase:
        factor = factor * np.exp(-1j * state.omega_tilde * t)
    rho = np.empty((len(t), 2, 2), dtype=complex)
    rho[:, 0, 0] = r0[0, 0]
    rho[:, 1, 1] = r0[1, 1]
    rho[:, 0, 1] = r0[0, 1] * factor
    rho[:, 1, 0] = np.conj(rho[:, 0, 1])
    excess = np.abs(rho[:, 0, 1]) ** 2 - (r0[0, 0] * r0[1, 1]).real
    if np.any(excess > POSITIVITY_TOL):
        i = int(np.argmax(excess))
        raise InvalidState(f"positivity lost at t = {t[i]} (|rho12|^2 exceeds rho11 rho22 by {excess[i]:.3e})")
    return ImpurityTrajectory(t, rho)


def trace_distance(rho1, rho2) -> float:
    """``(1/2) || rho1 - rho2 ||_1``."""
    diff = np.asarray(rho1) - np.asarray(rho2)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def pair_distance(L, t, omega_tilde: float = 0.0) -> np.ndarray:
    """Trace distance between the evolved ``|+>`` and ``|->`` states (equals ``sqrt(L)``)."""
    a = evolve_impurity(ImpurityState.plus(omega_tilde), L, t)
    b = evolve_impurity(ImpurityState.minus(omega_tilde), L, t)
    return np.array([trace_distance(x, y) for x, y in zip(a.rho, b.rho)])


@dataclass(frozen=True)
class MarkovianityReport:
    """BLP bookkeeping of one echo series.

    ``N_minus`` sums echo gains over intervals with ``gamma < 0`` and
    ``N_plus`` sums echo losses (as positive numbers) where ``gamma > 0``.
    """
    N_minus: float
    N_plus: float
    R: float
    intervals: list = field(default_factory=list)
    echo_samples: list = field(default_factory=list)
    final_sqrt_echo: float = 1.0

    def telescoping_residual(self) -> float:
        """``(N_plus - N_minus) - (1 - sqrt(L(t_end)))``; zero up to rounding."""
        return (self.N_plus - self.N_minus) - (1.0 - self.final_sqrt_echo)

    def as_dict(self) -> dict:
        return {"N_minus": self.N_minus, "N_plus": self.N_plus, "R": self.R,
                "intervals": [list(map(float, iv)) for iv in self.intervals],
                "echo_samples": [list(map(float, s)) for s in self.echo_samples],
                "final_sqrt_echo": self.final_sqrt_echo}


def _signs(gamma, dead_band):
    s = np.sign(gamma)
    s[np.abs(gamma) < dead_band] = 0
    nz = np.flatnonzero(s)
    if len(nz) == 0:
        return np.ones_like(s)
    s[: nz[0]] = s[nz[0]]
    # carry the previous sign through the dead band
    idx = np.where(s != 0, np.arange(len(s)), 0)
    np.maximum.accumulate(idx, out=idx)
    return s[idx]


def _log_echo_hermite(t0, t1, y0, y1, d0, d1, x):
    """Cubic Hermite interpolation of ``log L`` with slopes ``-2 g^2 gamma``."""
    h = t1 - t0
    s = (x - t0) / h
    h00 = 2 * s ** 3 - 3 * s ** 2 + 1
    h10 = s ** 3 - 2 * s ** 2 + s
    h01 = -2 * s ** 3 + 3 * s ** 2
    h11 = s ** 3 - s ** 2
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def blp_measures(t, gamma, L, g: float, *, dead_band: float = DEAD_BAND) -> MarkovianityReport:
    """Information back-flow ``N_-``, loss ``N_+`` and their ratio ``R``.

    Sign changes of ``gamma`` are located by linear interpolation between grid
    points; the echo at a crossing is interpolated in ``log L`` using the exact
    slope ``-2 g^2 gamma``.
    """
    t = np.asarray(t, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    L = np.asarray(L, dtype=float)
    if not (t.shape == gamma.shape == L.shape):
        raise ValueError("t, gamma and L must be aligned")
    logL = np.log(L)
    slope = -2.0 * g ** 2 * gamma
    sign = _signs(gamma, dead_band)
    # segment boundaries: (time, sqrt L) with the sign of the segment that ends there
    bounds = [(t[0], float(np.sqrt(L[0])))]
    seg_sign = [sign[0]]
    for i in np.flatnonzero(sign[1:] != sign[:-1]):
        g0, g1 = gamma[i], gamma[i + 1]
        if g1 != g0 and abs(g0) >= dead_band:
            tc = t[i] - g0 * (t[i + 1] - t[i]) / (g1 - g0)
            tc = min(max(tc, t[i]), t[i + 1])
        else:
            tc = t[i]
        y = _log_echo_hermite(t[i], t[i + 1], logL[i], logL[i + 1], slope[i], slope[i + 1], tc)
        bounds.append((tc, float(np.exp(0.5 * y))))
        seg_sign.append(sign[i + 1])
    bounds.append((t[-1], float(np.sqrt(L[-1]))))

    n_minus = n_plus = 0.0
    intervals, samples = [], []
    for (ta, ea), (tb, eb), s in zip(bounds[:-1], bounds[1:], seg_sign):
        if s < 0:
            n_minus += eb - ea
            intervals.append((ta, tb))
            samples.append((ea, eb))
        else:
            n_plus += ea - eb
    if n_plus == 0 and n_minus > 0:
        raise DegenerateEcho("echo never decays while it revives; check the time grid")
    R = n_minus / n_plus if n_minus != 0 else 0.0
    return MarkovianityReport(n_minus, n_plus, R, intervals, samples, float(np.sqrt(L[-1])))

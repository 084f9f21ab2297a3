"""Bose-Hubbard bath parameters and the homogeneous Gutzwiller ground state.

Energies are measured in units of the on-site interaction ``U`` (the default
``U = 1`` makes this literal) and times in units of ``hbar / U``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .errors import NoBracket, NoConvergence, OutOfLobe, UnderTruncated

#: order parameters below this value are treated as an exact Mott insulator
PSI_THRESHOLD = 1e-7
TRUNCATION_TOL = 1e-10


@dataclass(frozen=True)
class BathParams:
    """Couplings and geometry of the Bose-Hubbard bath plus the impurity.

    Parameters
    ----------
    J : float
        Nearest-neighbour hopping.
    mu : float
        Chemical potential.
    U : float
        On-site interaction.
    d : int
        Lattice dimension (1 or 2).
    Ls : int
        Sites per axis, even and at least 4; the volume is ``Ls ** d``.
    n_max : int
        Largest boson occupation kept per site.
    g : float
        Impurity-density coupling.
    omega0 : float
        Bare impurity splitting; only enters as a phase.
    """

    J: float
    mu: float
    U: float = 1.0
    d: int = 2
    Ls: int = 64
    n_max: int = 6
    g: float = 1e-3
    omega0: float = 0.0

    def __post_init__(self):
        if not self.J >= 0:
            raise ValueError(f"hopping must be non-negative, got {self.J}")
        if not self.U > 0:
            raise ValueError(f"interaction must be positive, got {self.U}")
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if self.n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {self.n_max}")
        if self.Ls < 4 or self.Ls % 2:
            raise ValueError(f"Ls must be even and >= 4, got {self.Ls}")

    @classmethod
    def from_hopping(cls, two_d_J: float, mu: float, *, U: float = 1.0, d: int = 2, **kw) -> "BathParams":
        """Build parameters from the rescaled hopping ``2 d J`` used in phase diagrams."""
        return cls(J=two_d_J / (2 * d), mu=mu, U=U, d=d, **kw)

    @property
    def z(self) -> int:
        return 2 * self.d

    @property
    def zJ(self) -> float:
        return self.z * self.J

    @property
    def volume(self) -> int:
        return self.Ls ** self.d

    def replace(self, **changes) -> "BathParams":
        return dataclasses.replace(self, **changes)

    def onsite_energies(self) -> np.ndarray:
        """Fock-space diagonal ``H_n = U n (n - 1) / 2 - mu n``."""
        n = np.arange(self.n_max + 1, dtype=float)
        return 0.5 * self.U * n * (n - 1) - self.mu * n

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def annihilation(n_max: int) -> np.ndarray:
    """Truncated bosonic annihilation operator, ``a[n-1, n] = sqrt(n)``."""
    return np.diag(np.sqrt(np.arange(1.0, n_max + 1)), k=1)


def order_parameter(c: np.ndarray) -> float:
    """``psi = sum_n sqrt(n) c_{n-1} c_n`` for real amplitudes."""
    n = np.arange(1, len(c))
    return float(np.sum(np.sqrt(n) * c[:-1] * c[1:]))


def mean_density(c: np.ndarray) -> float:
    return float(np.sum(np.arange(len(c)) * c**2))


def energy_per_site(c: np.ndarray, params: BathParams) -> float:
    """Gutzwiller energy functional ``-zJ psi^2 + sum_n H_n c_n^2``."""
    return float(-params.zJ * order_parameter(c) ** 2 + params.onsite_energies() @ c**2)


def mean_field_hamiltonian(params: BathParams, phi: float) -> np.ndarray:
    a = annihilation(params.n_max)
    return np.diag(params.onsite_energies()) - params.zJ * phi * (a + a.T)


def _ground_vector(params: BathParams, phi: float) -> tuple[float, np.ndarray]:
    w, vecs = np.linalg.eigh(mean_field_hamiltonian(params, phi))
    c = vecs[:, 0]
    # Perron-Frobenius: for phi > 0 all components share a sign
    if c[np.argmax(np.abs(c))] < 0:
        c = -c
    return float(w[0]), c


def _fixed_point_map(params: BathParams, phi: float) -> float:
    return order_parameter(_ground_vector(params, phi)[1])


class GutzwillerState:
    """Converged homogeneous Gutzwiller state (immutable).

    Attributes
    ----------
    amplitudes : ndarray
        Real Fock amplitudes ``c0_n``, length ``n_max + 1``.
    psi : float
        Order parameter, non-negative; exactly zero in the Mott phase.
    density : float
        Mean filling ``n0``.
    energy : float
        Energy per site ``E0``.
    mf_energy : float
        Lowest eigenvalue of the single-site mean-field Hamiltonian; this is
        the Lagrange multiplier that enforces normalisation.
    """

    __slots__ = ("amplitudes", "psi", "density", "energy", "mf_energy", "params",
                 "converged", "residual", "iterations", "energy_trace", "top_weight")

    def __init__(self, amplitudes, params, *, converged=True, residual=0.0, iterations=0,
                 energy_trace=()):
        c = np.array(amplitudes, dtype=float)
        c /= np.linalg.norm(c)
        c.flags.writeable = False
        psi = order_parameter(c)
        if psi < 0:
            raise ValueError("amplitudes must be in the non-negative psi gauge")
        h = mean_field_hamiltonian(params, psi)
        object.__setattr__(self, "amplitudes", c)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "density", mean_density(c))
        object.__setattr__(self, "energy", energy_per_site(c, params))
        object.__setattr__(self, "mf_energy", float(c @ h @ c))
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "converged", bool(converged))
        object.__setattr__(self, "residual", float(residual))
        object.__setattr__(self, "iterations", int(iterations))
        object.__setattr__(self, "energy_trace", tuple(energy_trace))
        object.__setattr__(self, "top_weight", float(c[-1] ** 2))

    def __setattr__(self, name, value):
        raise AttributeError("GutzwillerState is immutable")

    @property
    def is_superfluid(self) -> bool:
        return self.psi > 0.0

    @property
    def under_truncated(self) -> bool:
        return self.top_weight > TRUNCATION_TOL

    def __repr__(self):
        return (f"GutzwillerState(psi={self.psi:.6g}, n0={self.density:.6g}, "
                f"E0={self.energy:.6g}, converged={self.converged})")


def solve_ground_state(params: BathParams, *, tol: float = 1e-12, max_iter: int = 100_000,
                       damping: float = 0.5, psi_threshold: float = PSI_THRESHOLD,
                       truncation_tol: float = TRUNCATION_TOL,
                       check_truncation: bool = True) -> GutzwillerState:
    """Minimise the homogeneous Gutzwiller energy by self-consistent diagonalisation.

    The order parameter is iterated as ``phi <- (1 - damping) phi + damping psi(phi)``
    starting above every fixed point, so the sequence decreases monotonically and
    the energy is non-increasing along the trace. Near a critical point the map
    becomes marginal; the iteration then hands over to a bracketed root solve of
    ``psi(phi) / phi = 1``, which is monotone in ``phi``.
    """
    if params.zJ == 0.0:
        # J = 0: Fock state of lowest on-site energy, ties broken towards lower n
        c = np.zeros(params.n_max + 1)
        c[int(np.argmin(params.onsite_energies()))] = 1.0
        return _finish(c, params, 0.0, 0, (energy_per_site(c, params),), truncation_tol,
                       check_truncation)

    phi = np.sqrt(params.n_max)
    trace = []
    prev_step = None
    settled = False
    it = 0
    for it in range(1, max_iter + 1):
        _, c = _ground_vector(params, phi)
        psi = order_parameter(c)
        trace.append(energy_per_site(c, params))
        step = abs(psi - phi)
        if step < tol:
            phi = psi
            settled = True
            break
        if psi < 0.1 * psi_threshold:
            break
        if prev_step is not None and it > 20 and step > 0.99 * prev_step:
            # critical slowing down
            break
        prev_step = step
        phi = (1.0 - damping) * phi + damping * psi
    else:
        raise NoConvergence(f"no convergence after {max_iter} iterations", residual=step)

    if not settled or phi < psi_threshold:
        phi = _polish(params, phi)

    if phi < psi_threshold:
        _, c = _ground_vector(params, 0.0)
        c = np.abs(c)
        residual = 0.0
    else:
        _, c = _ground_vector(params, phi)
        residual = abs(order_parameter(c) - phi)
        if residual > max(tol, 1e-10):
            raise NoConvergence(f"self-consistency residual {residual:.3e}", residual=residual)
    trace.append(energy_per_site(c, params))
    return _finish(c, params, residual, it, trace, truncation_tol, check_truncation)


def _polish(params: BathParams, phi_hi: float) -> float:
    """Root of ``psi(phi)/phi - 1`` below ``phi_hi``, or 0 when only the trivial root exists."""
    def ratio(phi):
        return _fixed_point_map(params, phi) / phi - 1.0

    phi_lo = 1e-8
    if ratio(phi_lo) <= 0.0:
        return 0.0
    phi_hi = max(phi_hi, 2 * phi_lo)
    while ratio(phi_hi) > 0.0:
        phi_hi *= 2.0
        if phi_hi > 10 * np.sqrt(params.n_max):
            raise NoConvergence("could not bracket the order parameter")
    return optimize.brentq(ratio, phi_lo, phi_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                           maxiter=500)


def _finish(c, params, residual, iterations, trace, truncation_tol, check_truncation):
    state = GutzwillerState(c, params, converged=True, residual=residual, iterations=iterations,
                            energy_trace=trace)
    if check_truncation and state.top_weight > truncation_tol:
        raise UnderTruncated(f"top Fock state weight {state.top_weight:.3e} exceeds "
                             f"{truncation_tol:g}; increase n_max", top_weight=state.top_weight)
    return state


def mott_boundary(mu_over_U: float, lobe: int = 1, *, d: int = 2, n_max: int = 6,
                  xtol: float = 1e-10) -> float:
    """Critical ``2dJ/U`` at which the Mott lobe ``lobe`` turns superfluid at fixed ``mu/U``.

    Located by bisection on the phase reported by :func:`solve_ground_state`.
    """
    if not lobe - 1 < mu_over_U < lobe:
        raise OutOfLobe(f"mu/U = {mu_over_U} lies outside lobe n = {lobe}")
    n_max = max(n_max, lobe + 2)

    def superfluid(two_d_J):
        p = BathParams.from_hopping(two_d_J, mu_over_U, d=d, n_max=n_max)
        return solve_ground_state(p, check_truncation=False).is_superfluid

    lo, hi = 0.0, 0.05
    while not superfluid(hi):
        lo, hi = hi, 2 * hi
        if hi > 100:
            raise NoConvergence("no superfluid found while bracketing the boundary")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if superfluid(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class DensitySolution(NamedTuple):
    mu: float
    density: float
    plateau: bool
    state: GutzwillerState


def find_mu_for_density(params: BathParams, target: float, *, window: tuple[float, float] | None = None,
                        tol: float = 1e-10) -> DensitySolution:
    """Chemical potential at which the ground-state filling equals ``target``.

    ``params.mu`` is ignored. When the filling is pinned over a finite range of
    ``mu`` (a Mott plateau), the midpoint of the plateau is returned with
    ``plateau=True``.
    """
    if window is None:
        window = (-params.zJ - params.U, params.U * (params.n_max - 1))

    def density(mu):
        return solve_ground_state(params.replace(mu=mu), check_truncation=False).density

    lo, hi = window
    f_lo, f_hi = density(lo) - target, density(hi) - target
    if f_lo > 0 or f_hi < 0:
        raise NoBracket(f"target filling {target} not bracketed by mu in {window}")
    if f_lo == 0:
        hi_edge = lo
    elif f_hi == 0:
        hi_edge = hi
    else:
        mu0 = optimize.brentq(lambda m: density(m) - target, lo, hi, xtol=1e-14, maxiter=500)
        hi_edge = mu0

    # edges of the set where the filling sits on target
    def on_target(mu):
        return abs(density(mu) - target) <= tol

    if on_target(hi_edge):
        left = _edge(on_target, hi_edge, lo, xtol=1e-12)
        right = _edge(on_target, hi_edge, hi, xtol=1e-12)
        if right - left > 1e-8:
            mu = 0.5 * (left + right)
            state = solve_ground_state(params.replace(mu=mu))
            return DensitySolution(mu, state.density, True, state)
    state = solve_ground_state(params.replace(mu=hi_edge))
    if abs(state.density - target) > 1e-8:
        raise NoConvergence(f"density {state.density} misses target {target}")
    return DensitySolution(hi_edge, state.density, False, state)


def _edge(inside, x_in, x_out, xtol):
    """Bisect for the boundary of a connected set containing ``x_in`` towards ``x_out``."""
    if inside(x_out):
        return x_out
    while abs(x_out - x_in) > xtol:
        mid = 0.5 * (x_in + x_out)
        if inside(mid):
            x_in = mid
        else:
            x_out = mid
    return x_in


def adequate_n_max(params: BathParams, *, truncation_tol: float = TRUNCATION_TOL,
                   ceiling: int = 64) -> BathParams:
    """Return ``params`` with ``n_max`` raised until the top Fock state is negligible."""
    while True:
        state = solve_ground_state(params, check_truncation=False)
        if state.top_weight <= truncation_tol:
            return params
        if params.n_max >= ceiling:
            raise UnderTruncated(f"n_max = {ceiling} still truncates the state",
                                 top_weight=state.top_weight)
        params = params.replace(n_max=params.n_max + 2)

"""Quadratic fluctuations around the Gutzwiller state and their Bogoliubov modes.

Fluctuations ``dc_n(r)`` are restricted to the complement of ``c0`` and
expanded to second order in the energy functional. In momentum space the
quadratic form reads

    E2 = sum_k C_k^+ A(k) C_k + 1/2 sum_k [C_k^+ B(k) C_{-k}^* + c.c.]

with ``A(k) = P [h - lambda0 - J z(k) (p p^T + q q^T)] P`` and
``B(k) = -J z(k) P (p q^T + q p^T) P``. Here ``h`` is the single-site
mean-field Hamiltonian, ``lambda0`` its ground energy, ``p = a^T c0`` and
``q = a c0`` are the gradients of the order parameter, ``P`` projects out
``c0`` and ``z(k) = 2 sum_i cos k_i``. Both blocks depend on ``k`` only
through ``z(k)``, which is what makes the point-group reduction exact.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np
from scipy.linalg import null_space

from .errors import DynamicallyUnstable
from .model import BathParams, GutzwillerState, annihilation

ZERO_FREQUENCY = 1e-12


# -- momentum grid ---------------------------------------------------------

class MomentumGrid:
    """Periodic ``Ls^d`` momentum grid, ``k_i = 2 pi m_i / Ls``, with its C4v wedge."""

    def __init__(self, Ls: int, d: int = 2):
        if Ls < 4 or Ls % 2:
            raise ValueError("Ls must be even and >= 4")
        self.Ls = Ls
        self.d = d

    @property
    def volume(self) -> int:
        return self.Ls ** self.d

    def momenta(self, points) -> np.ndarray:
        """Map integer indices to ``[-pi, pi)``."""
        m = np.asarray(points)
        m = (m + self.Ls // 2) % self.Ls - self.Ls // 2
        return 2 * np.pi * m / self.Ls

    def z(self, points) -> np.ndarray:
        """Lattice structure factor ``2 sum_i cos k_i`` (``-2d <= z <= 2d``)."""
        k = 2 * np.pi * np.asarray(points, dtype=float) / self.Ls
        return 2 * np.cos(k).sum(axis=-1)

    def full(self) -> np.ndarray:
        return np.array(list(product(range(self.Ls), repeat=self.d)), dtype=int)

    def orbit(self, point) -> set:
        """Images of ``point`` under reflections and (in 2D) the diagonal swap."""
        L = self.Ls
        out = set()
        for signs in product((1, -1), repeat=self.d):
            m = tuple((s * x) % L for s, x in zip(signs, point))
            out.add(m)
            if self.d == 2:
                out.add((m[1], m[0]))
        return out

    def wedge(self) -> tuple[np.ndarray, np.ndarray]:
        """Irreducible points ``0 <= m_d <= ... <= m_1 <= Ls/2`` and their orbit sizes."""
        half = self.Ls // 2
        if self.d == 1:
            pts = [(m,) for m in range(half + 1)]
        else:
            pts = [(m1, m2) for m1 in range(half + 1) for m2 in range(m1 + 1)]
        mult = np.array([len(self.orbit(p)) for p in pts], dtype=int)
        return np.array(pts, dtype=int), mult

    def representative(self, point) -> tuple:
        """Wedge representative of any grid point."""
        half = self.Ls // 2
        m = [min(x % self.Ls, (-x) % self.Ls) for x in point]
        m = sorted(m, reverse=True)
        assert all(0 <= x <= half for x in m)
        return tuple(m)


# -- fluctuation blocks ------------------------------------------------------

@dataclass(frozen=True)
class FluctuationBlock:
    """Blocks ``A(k)``, ``B(k)`` in Fock space (projected) and in the complement basis."""
    k: tuple
    momentum: np.ndarray
    zk: float
    A: np.ndarray
    B: np.ndarray
    basis: np.ndarray

    @property
    def A_reduced(self) -> np.ndarray:
        return self.basis.T @ self.A @ self.basis

    @property
    def B_reduced(self) -> np.ndarray:
        return self.basis.T @ self.B @ self.basis

    def pseudo_hermitian(self) -> np.ndarray:
        """``[[A, B], [-B, -A]]`` in the complement basis."""
        A, B = self.A_reduced, self.B_reduced
        return np.block([[A, B], [-B, -A]])


def complement_basis(c0: np.ndarray) -> np.ndarray:
    """Orthonormal columns spanning the orthogonal complement of ``c0``."""
    return null_space(np.asarray(c0)[None, :])


def _ingredients(state: GutzwillerState):
    p = state.params
    c0 = np.asarray(state.amplitudes)
    a = annihilation(p.n_max)
    h = np.diag(p.onsite_energies()) - p.zJ * state.psi * (a + a.T)
    onsite = h - state.mf_energy * np.eye(len(c0))
    grad_p = a.T @ c0
    grad_q = a @ c0
    proj = np.eye(len(c0)) - np.outer(c0, c0)
    return onsite, grad_p, grad_q, proj


def fluctuation_matrices(state: GutzwillerState, zk) -> tuple[np.ndarray, np.ndarray]:
    """Stacked projected ``A`` and ``B`` for an array of structure factors ``z(k)``."""
    onsite, gp, gq, proj = _ingredients(state)
    J = state.params.J
    zk = np.atleast_1d(np.asarray(zk, dtype=float))
    normal = proj @ (np.outer(gp, gp) + np.outer(gq, gq)) @ proj
    anomalous = proj @ (np.outer(gp, gq) + np.outer(gq, gp)) @ proj
    base = proj @ onsite @ proj
    A = base[None] - J * zk[:, None, None] * normal[None]
    B = -J * zk[:, None, None] * anomalous[None]
    return A, B


def build_fluctuation_block(state: GutzwillerState, k) -> FluctuationBlock:
    """Quadratic fluctuation block at integer momentum index ``k``."""
    p = state.params
    k = tuple(int(x) for x in np.atleast_1d(k))
    if len(k) != p.d:
        raise ValueError(f"momentum index must have {p.d} components")
    grid = MomentumGrid(p.Ls, p.d)
    zk = float(grid.z(k))
    A, B = fluctuation_matrices(state, zk)
    A, B = 0.5 * (A[0] + A[0].T), 0.5 * (B[0] + B[0].T)
    return FluctuationBlock(k, grid.momenta(k), zk, A, B, complement_basis(state.amplitudes))


# -- Bogoliubov solve --------------------------------------------------------

@dataclass(frozen=True)
class Mode:
    branch: int
    k: tuple
    omega: float
    u: np.ndarray
    v: np.ndarray
    zero_mode: bool = False


def _cholesky_route(A, B):
    """Symmetric reduction; valid when ``A + B`` is positive definite."""
    S, D = A + B, A - B
    L = np.linalg.cholesky(S)
    M = np.swapaxes(L, -1, -2) @ D @ L
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    w2, x = np.linalg.eigh(M)
    return w2, x, L


def _general_route(A, B, tol=1e-9):
    """Eigenproblem of ``[[A, B], [-B, -A]]`` with positive-norm selection."""
    nb = A.shape[0]
    Lk = np.block([[A, B], [-B, -A]])
    w, vec = np.linalg.eig(Lk)
    scale = max(1.0, np.abs(Lk).max())
    if np.any(np.abs(w.imag) > tol * scale):
        raise DynamicallyUnstable(f"complex frequency {w[np.argmax(np.abs(w.imag))]}")
    w = w.real
    vec = vec.real
    norms = np.einsum("ij,ij->j", vec[:nb], vec[:nb]) - np.einsum("ij,ij->j", vec[nb:], vec[nb:])
    order = np.argsort(w)
    # zero modes come with null norm; fill up with them only if positive-norm modes run short
    keep = [j for j in order if norms[j] > tol and w[j] > -tol * scale]
    zeros = [j for j in order if abs(norms[j]) <= tol and abs(w[j]) <= 1e-6 * scale]
    chosen = keep + zeros[: max(0, nb - len(keep))]
    if len(chosen) < nb:
        raise DynamicallyUnstable("could not isolate a positive-norm mode set")
    chosen = sorted(chosen[:nb], key=lambda j: w[j])
    omega = np.maximum(w[chosen], 0.0)
    u = vec[:nb, chosen].T.copy()
    v = vec[nb:, chosen].T.copy()
    zero = np.array([abs(norms[j]) <= tol for j in chosen])
    for i in range(nb):
        if zero[i]:
            u[i] = 0.0
            v[i] = 0.0
            omega[i] = 0.0
        else:
            s = np.sqrt(norms[chosen[i]])
            u[i] /= s
            v[i] /= s
    return omega, u, v, zero


def bogoliubov_batch(A, B, *, unstable_tol: float = 1e-10):
    """Solve a stack of real symmetric blocks.

    Returns ``omega (K, nb)``, ``u, v (K, nb, nb)`` (rows are modes, in the
    basis of ``A``) and a zero-mode mask. Modes satisfy
    ``u.u - v.v = 1`` and are sorted by increasing frequency.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    K, nb, _ = A.shape
    omega = np.zeros((K, nb))
    u = np.zeros((K, nb, nb))
    v = np.zeros((K, nb, nb))
    zero = np.zeros((K, nb), dtype=bool)

    S = A + B
    ok = np.ones(K, dtype=bool)
    # Cholesky needs a comfortably positive definite S
    smin = np.linalg.eigvalsh(S)[:, 0]
    scale = np.maximum(1.0, np.abs(A).max(axis=(1, 2)))
    ok &= smin > 1e-8 * scale
    if ok.any():
        w2, x, L = _cholesky_route(A[ok], B[ok])
        sc = scale[ok][:, None]
        if np.any(w2 < -unstable_tol * sc):
            idx = np.flatnonzero(ok)[np.argmin(w2.min(axis=1))]
            raise DynamicallyUnstable(f"negative squared frequency at block {idx}", k=int(idx))
        w = np.sqrt(np.clip(w2, 0.0, None))
        small = w < ZERO_FREQUENCY * sc
        safe = np.where(small, 1.0, w)
        xs = x * np.sqrt(safe)[:, None, :]
        Lt = np.swapaxes(L, -1, -2)
        X = np.linalg.solve(Lt, xs)
        Y = (L @ xs) / safe[:, None, :]
        uu = 0.5 * (X + Y)
        vv = 0.5 * (X - Y)
        uu[np.broadcast_to(small[:, None, :], uu.shape)] = 0.0
        vv[np.broadcast_to(small[:, None, :], vv.shape)] = 0.0
        omega[ok] = np.where(small, 0.0, w)
        u[ok] = np.swapaxes(uu, -1, -2)
        v[ok] = np.swapaxes(vv, -1, -2)
        zero[ok] = small
    for i in np.flatnonzero(~ok):
        try:
            omega[i], u[i], v[i], zero[i] = _general_route(A[i], B[i])
        except DynamicallyUnstable as exc:
            raise DynamicallyUnstable(str(exc), k=int(i)) from None
    return omega, u, v, zero


def diagonalize_modes(block: FluctuationBlock) -> list[Mode]:
    """Positive-norm Bogoliubov modes of one block, amplitudes in Fock space."""
    omega, u, v, zero = bogoliubov_batch(block.A_reduced[None], block.B_reduced[None])
    Q = block.basis
    return [Mode(a, block.k, float(omega[0, a]), Q @ u[0, a], Q @ v[0, a], bool(zero[0, a]))
            for a in range(omega.shape[1])]


# -- spectrum ----------------------------------------------------------------

class ExcitationSpectrum:
    """Bogoliubov spectrum on a periodic grid, stored on a set of representative points.

    Attributes
    ----------
    points : ndarray (K, d)
        Integer momentum indices of the stored points.
    multiplicity : ndarray (K,)
        Number of grid points each stored point stands for (all ones for a full grid).
    omega : ndarray (K, nb)
    u, v : ndarray (K, nb, n_max + 1)
        Mode amplitudes in the Fock basis.
    zero_mode : ndarray (K, nb) of bool
        Modes excluded from correlator sums (condensate phase mode, gapless points).
    """

    def __init__(self, state, grid, points, multiplicity, omega, u, v, zero_mode):
        self.state = state
        self.grid = grid
        self.points = np.asarray(points, dtype=int)
        self.multiplicity = np.asarray(multiplicity, dtype=int)
        self.omega = np.asarray(omega, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.zero_mode = np.asarray(zero_mode, dtype=bool)
        for arr in (self.points, self.multiplicity, self.omega, self.u, self.v, self.zero_mode):
            arr.flags.writeable = False

    @property
    def params(self) -> BathParams:
        return self.state.params

    @property
    def volume(self) -> int:
        return self.grid.volume

    @property
    def n_branches(self) -> int:
        return self.omega.shape[1]

    @property
    def zk(self) -> np.ndarray:
        return self.grid.z(self.points)

    @property
    def is_reduced(self) -> bool:
        return len(self.points) != self.grid.volume

    def index_of(self, k) -> int:
        k = tuple(int(x) % self.grid.Ls for x in np.atleast_1d(k))
        if self.is_reduced:
            k = self.grid.representative(k)
        hits = np.flatnonzero(np.all(self.points == np.array(k), axis=1))
        if len(hits) == 0:
            raise KeyError(k)
        return int(hits[0])

    def mode(self, branch: int, k) -> Mode:
        i = self.index_of(k)
        return Mode(branch, tuple(int(x) for x in np.atleast_1d(k)), float(self.omega[i, branch]),
                    self.u[i, branch].copy(), self.v[i, branch].copy(),
                    bool(self.zero_mode[i, branch]))

    def expand(self) -> "ExcitationSpectrum":
        """Full-grid spectrum obtained by copying each representative onto its orbit."""
        if not self.is_reduced:
            return self
        full = self.grid.full()
        lookup = {tuple(p): i for i, p in enumerate(self.points)}
        idx = np.array([lookup[self.grid.representative(p)] for p in full])
        return ExcitationSpectrum(self.state, self.grid, full, np.ones(len(full), dtype=int),
                                  self.omega[idx], self.u[idx], self.v[idx], self.zero_mode[idx])

    def band_edge(self, branch: int = 0) -> float:
        """Frequency of ``branch`` at the zone corner ``(pi, ..., pi)``."""
        return float(self.omega[self.index_of((self.grid.Ls // 2,) * self.grid.d), branch])

    def group_velocity_max(self, branch: int = 0) -> float:
        """Largest ``|grad omega|`` of ``branch`` from central differences on the grid."""
        full = self.expand()
        Ls, d = self.grid.Ls, self.grid.d
        w = full.omega[:, branch].reshape((Ls,) * d)
        dk = 2 * np.pi / Ls
        grad2 = sum(((np.roll(w, -1, ax) - np.roll(w, 1, ax)) / (2 * dk)) ** 2 for ax in range(d))
        return float(np.sqrt(grad2.max()))

    def recurrence_time(self, branch: int = 0) -> float:
        """Time after which the fastest wave of ``branch`` returns from a periodic image, ``Ls / v_max``."""
        return self.grid.Ls / self.group_velocity_max(branch)

    @property
    def tau_goldstone(self) -> float:
        """Oscillation time ``2 pi / omega_G(pi, pi)`` set by the Goldstone bandwidth."""
        return 2 * np.pi / self.band_edge(0)


def compute_spectrum(state: GutzwillerState, grid: MomentumGrid | None = None, *,
                     use_symmetry: bool = True) -> ExcitationSpectrum:
    """Diagonalise the fluctuation problem on ``grid`` (defaults to the bath's own lattice)."""
    p = state.params
    if grid is None:
        grid = MomentumGrid(p.Ls, p.d)
    if use_symmetry:
        points, mult = grid.wedge()
    else:
        points = grid.full()
        mult = np.ones(len(points), dtype=int)
    zk = grid.z(points)
    A, B = fluctuation_matrices(state, zk)
    Q = complement_basis(state.amplitudes)
    Ar = np.einsum("ni,knm,mj->kij", Q, A, Q)
    Br = np.einsum("ni,knm,mj->kij", Q, B, Q)
    Ar = 0.5 * (Ar + np.swapaxes(Ar, 1, 2))
    Br = 0.5 * (Br + np.swapaxes(Br, 1, 2))
    try:
        omega, u, v, zero = bogoliubov_batch(Ar, Br)
    except DynamicallyUnstable as exc:
        k = None if exc.k is None else tuple(int(x) for x in points[exc.k])
        raise DynamicallyUnstable(f"{exc} (k = {k})", k=k) from None
    if state.is_superfluid:
        # global phase rotation: the Goldstone mode at k = 0 is a zero mode
        at_origin = np.all(points == 0, axis=1)
        zero[at_origin, 0] = True
        omega[at_origin, 0] = 0.0
        u[at_origin, 0] = 0.0
        v[at_origin, 0] = 0.0
    u, v = _smooth_degenerate_labels(zk, omega, u, v)
    uf = np.einsum("ni,kai->kan", Q, u)
    vf = np.einsum("ni,kai->kan", Q, v)
    return ExcitationSpectrum(state, grid, points, mult, omega, uf, vf, zero)


def _smooth_degenerate_labels(zk, omega, u, v, tol=1e-9):
    """Within exactly degenerate branches, order modes by overlap with the neighbouring z(k)."""
    order = np.argsort(-zk, kind="stable")
    u, v = u.copy(), v.copy()
    for prev, cur in zip(order[:-1], order[1:]):
        w = omega[cur]
        a = 0
        while a < len(w):
            b = a + 1
            while b < len(w) and w[b] - w[a] < tol:
                b += 1
            if b - a > 1:
                block = slice(a, b)
                ov = np.abs(u[prev, block] @ u[cur, block].T)
                perm = np.argsort(-ov, axis=1)[:, 0]
                if len(set(perm)) == b - a:
                    u[cur, block] = u[cur, block][perm]
                    v[cur, block] = v[cur, block][perm]
            a = b
    return u, v


# -- disk cache ----------------------------------------------------------------

def save_spectrum(spectrum: ExcitationSpectrum, directory) -> Path:
    """Write ``omega, u, v`` as little-endian float64 plus a JSON sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = f"{spectrum.params.digest()}_Ls{spectrum.grid.Ls}"
    K, nb = spectrum.omega.shape
    nf = spectrum.u.shape[2]
    blob = np.concatenate([spectrum.omega.ravel(), spectrum.u.ravel(), spectrum.v.ravel()])
    path = directory / f"{stem}.bin"
    tmp = path.with_suffix(".bin.tmp")
    blob.astype("<f8").tofile(tmp)
    os.replace(tmp, path)
    meta = {
        "params_hash": spectrum.params.digest(),
        "params": spectrum.params.as_dict(),
        "Ls": spectrum.grid.Ls,
        "d": spectrum.grid.d,
        "dims": {"points": K, "branches": nb, "fock": nf},
        "layout": ["omega[points, branches]", "u[points, branches, fock]", "v[points, branches, fock]"],
        "dtype": "<f8",
        "points": spectrum.points.tolist(),
        "multiplicity": spectrum.multiplicity.tolist(),
        "zero_mode": spectrum.zero_mode.astype(int).tolist(),
        "amplitudes": [float(x) for x in spectrum.state.amplitudes],
    }
    (directory / f"{stem}.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    return path


def load_spectrum(directory, params: BathParams, Ls: int | None = None) -> ExcitationSpectrum | None:
    """Return a cached spectrum for ``params``, or ``None`` when absent or stale."""
    directory = Path(directory)
    Ls = params.Ls if Ls is None else Ls
    stem = f"{params.digest()}_Ls{Ls}"
    meta_path, bin_path = directory / f"{stem}.json", directory / f"{stem}.bin"
    if not (meta_path.exists() and bin_path.exists()):
        return None
    meta = json.loads(meta_path.read_text())
    if meta["params_hash"] != params.digest():
        return None
    K, nb, nf = (meta["dims"][key] for key in ("points", "branches", "fock"))
    data = np.fromfile(bin_path, dtype="<f8")
    if data.size != K * nb * (1 + 2 * nf):
        return None
    omega = data[: K * nb].reshape(K, nb)
    u = data[K * nb: K * nb * (1 + nf)].reshape(K, nb, nf)
    v = data[K * nb * (1 + nf):].reshape(K, nb, nf)
    state = GutzwillerState(np.array(meta["amplitudes"]), params)
    return ExcitationSpectrum(state, MomentumGrid(Ls, meta["d"]), meta["points"], meta["multiplicity"],
                              omega, u, v, np.array(meta["zero_mode"], dtype=bool))

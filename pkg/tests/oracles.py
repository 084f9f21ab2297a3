"""Independent reference computations used by the test-suite.

Nothing here imports the fluctuation or correlator code of the package; the
only shared pieces are the ground-state amplitudes and parameters.
"""
from __future__ import annotations

from itertools import product

import numpy as np
from scipy.linalg import null_space


def mott_lobe_boundary(mu_t: float, n: int = 1) -> float:
    """Closed-form critical ``z J / U = 2 d J / U`` of lobe ``n`` at reduced chemical potential ``mu / U``."""
    return (n - mu_t) * (mu_t - n + 1) / (1 + mu_t)


def lattice_energy_gradient(c, params, neighbours):
    """Energy of a real-space Gutzwiller product state and ``dE/dc*`` per site."""
    n_max = params.n_max
    nn = np.arange(n_max + 1)
    H = params.U * nn * (nn - 1) / 2 - params.mu * nn
    a = np.diag(np.sqrt(nn[1:]), 1)
    psi = np.einsum("ri,ij,rj->r", c.conj(), a, c)
    phi = psi[neighbours].sum(axis=1)
    E = np.einsum("ri,i,ri->", c.conj(), H, c).real
    E -= params.J * 0.5 * np.sum(psi.conj() * phi + psi * phi.conj()).real
    G = H * c - params.J * ((c @ a) * phi[:, None] + (c @ a.T) * phi.conj()[:, None])
    return E, G


def square_neighbours(Ls: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    sites = np.array(list(product(range(Ls), repeat=d)))
    index = {tuple(s): i for i, s in enumerate(sites)}
    nbr = []
    for s in sites:
        row = []
        for ax in range(d):
            for step in (1, -1):
                t = s.copy()
                t[ax] = (t[ax] + step) % Ls
                row.append(index[tuple(t)])
        nbr.append(row)
    return sites, np.array(nbr)


def numerical_fluctuation_blocks(c0, params, Ls=4, step=1e-5):
    """On-site and displacement blocks of ``A`` and ``B`` from a finite-difference Hessian.

    Fluctuations are parametrised as ``c_r = sqrt(1 - |xi_r|^2) c0 + Q xi_r``
    with ``xi = x + i y``; then ``H_xx = 2 (A + B)`` and ``H_yy = 2 (A - B)``.
    Returns ``{displacement: (A, B)}`` in the complement basis ``Q``.
    """
    sites, nbr = square_neighbours(Ls, params.d)
    V = len(sites)
    Q = null_space(np.asarray(c0)[None, :])
    nb = Q.shape[1]

    def grad(z):
        x = z[: V * nb].reshape(V, nb)
        y = z[V * nb:].reshape(V, nb)
        xi = x + 1j * y
        s = np.sqrt(1 - np.sum(np.abs(xi) ** 2, axis=1))
        c = s[:, None] * c0[None, :] + xi @ Q.T
        _, G = lattice_energy_gradient(c, params, nbr)
        Gc = G.conj()
        base = np.einsum("ri,i->r", Gc, c0)
        gQ = Gc @ Q
        gx = 2 * np.real(gQ - (x / s[:, None]) * base[:, None])
        gy = 2 * np.real(1j * gQ - (y / s[:, None]) * base[:, None])
        return np.concatenate([gx.ravel(), gy.ravel()])

    n = 2 * V * nb
    hess = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        hess[:, j] = (grad(e) - grad(-e)) / (2 * step)
    hess = 0.5 * (hess + hess.T)
    Hxx = hess[: V * nb, : V * nb].reshape(V, nb, V, nb)
    Hyy = hess[V * nb:, V * nb:].reshape(V, nb, V, nb)
    blocks = {}
    for s_idx, s in enumerate(sites):
        disp = tuple((s + Ls // 2) % Ls - Ls // 2)
        blocks[disp] = ((Hxx[0, :, s_idx] + Hyy[0, :, s_idx]) / 4,
                        (Hxx[0, :, s_idx] - Hyy[0, :, s_idx]) / 4)
    return blocks, Q


def blocks_at_momentum(blocks, k):
    """Fourier sum ``sum_d X_d exp(i k.d)`` of real-space blocks (real for inversion-symmetric lattices)."""
    A = sum(Ad * np.cos(np.dot(k, d)) for d, (Ad, _) in blocks.items())
    B = sum(Bd * np.cos(np.dot(k, d)) for d, (_, Bd) in blocks.items())
    return A, B


def real_space_bogoliubov(blocks, Ls, d, nb, zero_tol=1e-3):
    """Positive-norm modes of the full real-space quadratic Hamiltonian.

    ``H = b^+ A b + (b B b + h.c.)/2`` with ``i db/dt = A b + B b^+``; modes solve
    ``A U + B V = w U`` and ``B U + A V = -w V`` with ``U.U - V.V = 1``. Modes with
    ``|w| < zero_tol`` (the condensate phase rotation, smeared to about the square
    root of the Hessian error) are dropped.
    """
    sites, _ = square_neighbours(Ls, d)
    V = len(sites)
    A = np.zeros((V * nb, V * nb))
    B = np.zeros((V * nb, V * nb))
    for i, si in enumerate(sites):
        for j, sj in enumerate(sites):
            disp = tuple((sj - si + Ls // 2) % Ls - Ls // 2)
            Ad, Bd = blocks[disp]
            A[i * nb:(i + 1) * nb, j * nb:(j + 1) * nb] = Ad
            B[i * nb:(i + 1) * nb, j * nb:(j + 1) * nb] = Bd
    n = V * nb
    w, vec = np.linalg.eig(np.block([[A, B], [-B, -A]]))
    w, vec = w.real, vec.real
    norms = np.sum(vec[:n] ** 2, axis=0) - np.sum(vec[n:] ** 2, axis=0)
    keep = (norms > 1e-8) & (np.abs(w) > zero_tol)
    w, U, V = w[keep], vec[:n, keep], vec[n:, keep]
    # eig returns an arbitrary basis inside degenerate subspaces; make it
    # orthonormal in the symplectic metric (distinct frequencies already are)
    G = U.T @ U - V.T @ V
    G[np.abs(w[:, None] - w[None, :]) > 1e-7] = 0.0
    lam, R = np.linalg.eigh(0.5 * (G + G.T))
    T = R @ np.diag(lam ** -0.5) @ R.T
    return w, U @ T, V @ T


def local_density_rates(c0, params, t, Ls=4, step=1e-5):
    """``gamma_1`` and ``gamma_2`` of site 0 by Wick's theorem in real space.

    The density is expanded to second order in the fluctuation field,
    ``dn = l.(b + b^+) + b^+ X b``, with ``l = Q^T (n c0)`` and
    ``X = Q^T (n - n0) Q``; ``gamma(t) = int_0^t Re <dn(tau) dn(0)>``.
    """
    c0 = np.asarray(c0, dtype=float)
    blocks, Q = numerical_fluctuation_blocks(c0, params, Ls=Ls, step=step)
    nb = Q.shape[1]
    w, U, V = real_space_bogoliubov(blocks, Ls, params.d, nb)
    occ = np.arange(len(c0))
    n0 = occ @ c0 ** 2
    ell = Q.T @ (occ * c0)
    X = Q.T @ np.diag(occ - n0) @ Q
    U0, V0 = U[:nb], V[:nb]            # site 0 components
    lin = ell @ (U0 + V0)
    M = U0.T @ X @ V0                  # M[a, b] = U_a X V_b
    pair = M.T * (M + M.T)             # coefficient of exp(-i (w_a + w_b) t)
    t = np.asarray(t, dtype=float)[:, None]
    g1 = (np.sin(w * t) / w) @ lin ** 2
    W = w[:, None] + w[None, :]
    g2 = (np.sin(W.ravel() * t) / W.ravel()) @ pair.ravel()
    return g1, g2, float(lin @ lin + pair.sum())

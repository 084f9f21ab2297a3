import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhdephasing.errors import NoBracket, OutOfLobe, UnderTruncated
from bhdephasing.model import (BathParams, GutzwillerState, adequate_n_max, energy_per_site,
                               find_mu_for_density, mott_boundary, order_parameter,
                               solve_ground_state)
from oracles import mott_lobe_boundary


def test_params_validation():
    with pytest.raises(ValueError):
        BathParams(J=-0.1, mu=0.5)
    with pytest.raises(ValueError):
        BathParams(J=0.1, mu=0.5, Ls=7)
    with pytest.raises(ValueError):
        BathParams(J=0.1, mu=0.5, n_max=1)
    p = BathParams.from_hopping(1.0, 0.8)
    assert p.J == pytest.approx(0.25) and p.z == 4 and p.volume == 64 ** 2


def test_hopping_off_gives_fock_state():
    st_ = solve_ground_state(BathParams(J=0.0, mu=0.5))
    assert st_.amplitudes[1] == 1.0 and st_.psi == 0.0
    assert st_.density == 1.0 and st_.energy == pytest.approx(-0.5)


def test_deep_superfluid_point():
    st_ = solve_ground_state(BathParams.from_hopping(1.0, 0.8, n_max=10))
    assert st_.psi > 1.0 and st_.converged and st_.residual < 1e-10
    c = np.asarray(st_.amplitudes)
    n = np.arange(len(c))
    assert abs(c @ c - 1) < 1e-12
    assert abs(order_parameter(c) - st_.psi) < 1e-12
    assert abs(n @ c ** 2 - st_.density) < 1e-12


def test_default_cutoff_flags_deep_superfluid():
    with pytest.raises(UnderTruncated):
        solve_ground_state(BathParams.from_hopping(1.0, 0.8, n_max=6))
    assert adequate_n_max(BathParams.from_hopping(1.0, 0.8)).n_max >= 10


def test_mott_point_is_exactly_zero():
    st_ = solve_ground_state(BathParams.from_hopping(0.05, 0.4))
    assert st_.psi == 0.0 and not st_.is_superfluid and st_.density == pytest.approx(1.0)


def test_state_is_immutable():
    st_ = solve_ground_state(BathParams.from_hopping(0.3, 0.5, n_max=8))
    with pytest.raises(AttributeError):
        st_.psi = 1.0
    with pytest.raises(ValueError):
        st_.amplitudes[0] = 0.0


@pytest.mark.parametrize("two_d_J", [0.05, 0.2, 0.4, 0.8])
def test_two_level_truncation_matches_grid_search(two_d_J):
    p = BathParams.from_hopping(two_d_J, 0.5, n_max=2)
    st_ = solve_ground_state(p, check_truncation=False)
    # brute force over the positive octant of the sphere at 1e-3 resolution
    theta = np.arange(0, np.pi / 2 + 1e-3, 1e-3)
    a, b = np.meshgrid(theta, theta, indexing="ij")
    c = np.stack([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)], axis=-1).reshape(-1, 3)
    psi = c[:, 0] * c[:, 1] + np.sqrt(2) * c[:, 1] * c[:, 2]
    H = p.onsite_energies()
    E = -p.zJ * psi ** 2 + c ** 2 @ H
    i = np.argmin(E)
    assert st_.energy <= E[i] + 1e-12
    assert st_.energy == pytest.approx(E[i], abs=5e-6)
    assert np.abs(np.asarray(st_.amplitudes) - c[i]).max() < 5e-3


def test_energy_trace_non_increasing():
    for two_d_J, mu, n_max in [(0.3, 0.5, 8), (1.0, 0.8, 10), (0.18, np.sqrt(2) - 1, 6), (0.1, 0.8, 6)]:
        st_ = solve_ground_state(BathParams.from_hopping(two_d_J, mu, n_max=n_max))
        diffs = np.diff(st_.energy_trace)
        assert np.all(diffs <= 1e-13), diffs.max()


@settings(max_examples=20, deadline=None)
@given(phase=st.floats(0, 2 * np.pi))
def test_global_phase_invariance(phase):
    p = BathParams.from_hopping(0.3, 0.5, n_max=8)
    st_ = solve_ground_state(p)
    c = np.asarray(st_.amplitudes) * np.exp(1j * phase)
    n = np.arange(len(c))
    a = np.diag(np.sqrt(n[1:]), 1)
    psi = np.vdot(c, a @ c)
    E = -p.zJ * abs(psi) ** 2 + np.vdot(c, p.onsite_energies() * c).real
    assert abs(E - st_.energy) < 1e-12
    assert abs(abs(psi) - st_.psi) < 1e-12
    assert abs(np.vdot(c, n * c).real - st_.density) < 1e-12


def test_mott_boundary_critical_points():
    assert mott_boundary(0.8) == pytest.approx(0.0888888889, abs=1e-8)
    assert mott_boundary(np.sqrt(2) - 1) == pytest.approx(0.171572875, abs=1e-8)
    assert mott_boundary(0.999) < 1e-3
    assert mott_boundary(0.001) < 1e-3


def test_mott_boundary_second_lobe():
    d = mott_boundary(1.5, lobe=2, n_max=8)
    assert d == pytest.approx(mott_lobe_boundary(1.5, 2), abs=1e-6)


def test_mott_boundary_rejects_outside_lobe():
    with pytest.raises(OutOfLobe):
        mott_boundary(1.2, lobe=1)


@settings(max_examples=8, deadline=None)
@given(mu=st.floats(0.05, 0.95))
def test_boundary_matches_closed_form(mu):
    assert abs(mott_boundary(mu) - mott_lobe_boundary(mu)) < 1e-4


@pytest.mark.parametrize("two_d_J", [0.3, 0.6])
def test_density_increases_with_mu_in_superfluid(two_d_J):
    mus = np.linspace(-0.1, 0.5, 7)
    dens = [solve_ground_state(BathParams.from_hopping(two_d_J, m, n_max=8)).density for m in mus]
    assert np.all(np.diff(dens) > 0)


def test_find_mu_for_density():
    sol = find_mu_for_density(BathParams.from_hopping(0.5, 0.0, n_max=8), 0.6)
    assert abs(sol.density - 0.6) < 1e-8 and not sol.plateau
    sol = find_mu_for_density(BathParams.from_hopping(1.0, 0.0, n_max=12), 1.0)
    assert abs(sol.density - 1.0) < 1e-8 and sol.state.is_superfluid


def test_find_mu_plateau_at_zero_hopping():
    sol = find_mu_for_density(BathParams(J=0.0, mu=0.0), 1.0)
    assert sol.plateau and sol.mu == pytest.approx(0.5, abs=1e-8)


def test_find_mu_without_bracket():
    with pytest.raises(NoBracket):
        find_mu_for_density(BathParams.from_hopping(0.5, 0.0, n_max=8), 0.6, window=(0.4, 0.5))

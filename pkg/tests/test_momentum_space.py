import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dissipative_kitaev.errors import PreconditionError
from dissipative_kitaev.model_core import (
    ChainParams,
    build_hamiltonian,
    build_modulated_A0,
    commutator,
    hs_norm,
)
from dissipative_kitaev.momentum_space import (
    SingularMomentumError,
    bogoliubov_coefficients,
    bogoliubov_operator,
    dispersion,
    dispersion_table,
    emergent_energy,
    emergent_mode,
    even_mode_vector,
    find_kappa,
    kappa_report,
    mode_majorana_vector,
    on_grid,
    perturbed_mode_residual,
    solve_kappa,
)
from dissipative_kitaev.third_quantization import fit_power_law, momentum_grid


# --------------------------------------------------------------------------- dispersion


def test_dispersion_values():
    p = ChainParams(N=8)
    assert dispersion(p, np.pi / 2) == pytest.approx(1.0)
    free = ChainParams(N=8, w=1.3, delta=0.0, mu=0.4)
    ks = np.linspace(-3, 3, 7)
    assert np.allclose(dispersion(free, ks), np.abs(1.3 * np.cos(ks) + 0.4))
    assert dispersion(ChainParams(N=8, w=0.7, delta=2j, mu=0.2), 0.0) == pytest.approx(0.9)


def test_bogoliubov_emergent_condition_at_quarter_zone():
    p = ChainParams(N=8)
    low = bogoliubov_coefficients(p, -np.pi / 2)
    assert low.u == pytest.approx(-low.v)
    # the mirrored momentum carries u = v (its conjugate partner, see solve_kappa)
    high = bogoliubov_coefficients(p, np.pi / 2)
    assert high.u == pytest.approx(high.v)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.05, 3.09),
    st.floats(-2, 2),
    st.floats(0.2, 2),
    st.floats(-2, 2),
    st.floats(-2, 2),
)
def test_bogoliubov_normalized(k, mu, w, dr, di):
    if abs(complex(dr, di)) < 1e-3:
        return
    mode = bogoliubov_coefficients(ChainParams(N=8, w=w, delta=complex(dr, di), mu=mu), k)
    assert abs(mode.u) ** 2 + abs(mode.v) ** 2 == pytest.approx(1.0, abs=1e-12)
    assert mode.E >= 0


@pytest.mark.parametrize(
    "params",
    [ChainParams(N=8), ChainParams(N=8, w=0.8, delta=0.6 + 0.9j, mu=0.3), ChainParams(N=6, w=1.1 + 0.4j, delta=1.2j, mu=-0.2)],
)
def test_bogoliubov_modes_lower_energy_in_fock_space(params):
    H0 = build_hamiltonian(params).data
    for k in momentum_grid(params.N):
        if abs(np.sin(k)) < 1e-12:
            continue
        mode = bogoliubov_coefficients(params, k)
        d = bogoliubov_operator(params, mode).data
        res = hs_norm(commutator(H0, d) - mode.frequency * d) / hs_norm(d)
        assert res < 1e-10
        if params.w.imag == 0:
            assert mode.frequency == pytest.approx(-mode.E)


def test_singular_momenta():
    p = ChainParams(N=8, mu=0.3)
    for k in (0.0, np.pi):
        with pytest.raises(SingularMomentumError):
            bogoliubov_coefficients(p, k)
    H0 = build_hamiltonian(p).data
    for k in (0.0, np.pi):
        mode = bogoliubov_coefficients(p, k, allow_singular=True)
        assert {abs(mode.u), abs(mode.v)} == {0.0, 1.0}
        d = bogoliubov_operator(p, mode).data
        assert hs_norm(commutator(H0, d) - mode.frequency * d) < 1e-12


def test_h0_spectrum_from_quasienergies():
    p = ChainParams(N=8, mu=0.3)
    E = dispersion(p, momentum_grid(8))
    sums = np.sort([np.dot(E, np.array(n) - 0.5) for n in itertools.product([0, 1], repeat=8)])
    assert np.abs(np.sort(np.linalg.eigvalsh(build_hamiltonian(p).data)) - sums).max() < 1e-10


def test_mode_vector_matches_operator():
    from dissipative_kitaev.model_core import build_majoranas

    p = ChainParams(N=4, mu=0.2)
    mode = bogoliubov_coefficients(p, np.pi / 2)
    a = mode_majorana_vector(p, mode)
    g = [x.data for x in build_majoranas(p)]
    assert np.allclose(sum(ai * gi for ai, gi in zip(a, g)), bogoliubov_operator(p, mode).data)


def test_dispersion_table():
    rows = dispersion_table(ChainParams(N=8))
    assert [r["m"] for r in rows] == list(range(-3, 5))
    assert all(abs(r["u_re"] + 1j * r["u_im"]) ** 2 + abs(r["v_re"] + 1j * r["v_im"]) ** 2 == pytest.approx(1) for r in rows)


# --------------------------------------------------------------------------- kappa


def test_solve_kappa_values():
    sol = solve_kappa(ChainParams(N=8))
    assert sol.kappas[0] == pytest.approx(np.pi / 2) and sol.on_grid == (True, True)
    sol = solve_kappa(ChainParams(N=8, mu=0.5))
    assert sol.kappas[0] == pytest.approx(2 * np.pi / 3)
    assert sol.kappas[1] == pytest.approx(2 * np.pi - 2 * np.pi / 3)
    assert sol.on_grid == (False, False)
    assert not solve_kappa(ChainParams(N=8, mu=1.5)).exists
    assert solve_kappa(ChainParams(N=6)).on_grid == (False, False)


def test_solve_kappa_requires_imaginary_pairing():
    with pytest.raises(PreconditionError):
        solve_kappa(ChainParams(N=8, delta=1 + 1j))


@pytest.mark.parametrize("mu", [0.0, 0.3, 0.6, -0.45])
def test_root_finder_matches_closed_form(mu):
    p = ChainParams(N=8, mu=mu)
    root = find_kappa(p)
    assert min(abs(root - k) for k in solve_kappa(p).kappas) < 1e-10
    assert root == pytest.approx(2 * np.pi - np.arccos(-mu), abs=1e-10)


def test_root_finder_no_solution():
    with pytest.raises(PreconditionError):
        find_kappa(ChainParams(N=8, mu=1.2))


def test_kappa_report():
    rep = kappa_report(ChainParams(N=8, mu=0.3))
    assert rep["exists"] and rep["E_kappa"] == pytest.approx(np.sqrt(1 - 0.09))
    assert rep["root_found"] == pytest.approx(rep["solutions"][1])
    assert not kappa_report(ChainParams(N=8, mu=2.0))["exists"]


def test_on_grid():
    assert on_grid(8, np.pi / 2) and on_grid(8, 3 * np.pi / 2) and not on_grid(6, np.pi / 2)


# --------------------------------------------------------------------------- emergent modes


def test_emergent_mode_n4():
    p = ChainParams(N=4)
    kappa = 3 * np.pi / 2
    m = emergent_mode(p, kappa)
    assert m.E_kappa == pytest.approx(1.0)
    assert m.expected_omega == pytest.approx(-1.0)
    assert m.on_grid and m.d is not None
    assert all(v < 1e-12 for v in m.checks.values()), m.checks
    assert m.coefficient_residual < 1e-12


@pytest.mark.parametrize("N", [4, 8])
def test_emergent_mode_with_interaction(N):
    base = ChainParams(N=N)
    inter = base.replace(interactions=((0.8, (1, 2, 3, 4)),))
    a = emergent_mode(base, 3 * np.pi / 2, fock=True)
    b = emergent_mode(inter, 3 * np.pi / 2, fock=True)
    assert b.checks["[H, d] - omega d"] < 1e-10
    assert b.checks["[H, d] - omega d"] == pytest.approx(a.checks["[H, d] - omega d"], abs=1e-12)


def test_emergent_mode_mirror_branch_raises_energy():
    m = emergent_mode(ChainParams(N=4), np.pi / 2)
    assert m.expected_omega == pytest.approx(1.0)
    assert m.checks["[H, d] - omega d"] < 1e-12


def test_emergent_mode_off_grid_has_no_fock_check():
    m = emergent_mode(ChainParams(N=8, mu=0.3), find_kappa(ChainParams(N=8, mu=0.3)))
    assert not m.on_grid and m.d is None and m.checks == {}
    # off the grid the finite chain has no exact mode at kappa
    assert m.coefficient_residual > 1e-3


def test_emergent_mode_large_n_coefficients():
    # mu = -1/sqrt(2) puts kappa = 7 pi / 4 on the N = 64 grid
    p = ChainParams(N=64, mu=-1 / np.sqrt(2))
    m = emergent_mode(p, find_kappa(p))
    assert m.kappa == pytest.approx(7 * np.pi / 4)
    assert m.on_grid and m.d is None
    assert m.coefficient_residual < 1e-12


def test_grid_compatible_nonzero_mu():
    mu = 1 / np.sqrt(2)
    p = ChainParams(N=8, mu=mu)
    kappa = find_kappa(p)
    assert on_grid(8, kappa)
    m = emergent_mode(p, kappa)
    assert m.E_kappa == pytest.approx(np.sqrt(1 - mu**2))
    assert all(v < 1e-10 for v in m.checks.values())


def test_sublattices():
    """d_kappa lives on even Majoranas, A_0 on odd ones."""
    a = even_mode_vector(4, 3 * np.pi / 2)
    assert np.all(a[0::2] == 0) and np.all(a[1::2] != 0)
    from dissipative_kitaev.model_core import build_majoranas, hs_inner

    g = build_majoranas(4)
    A0 = build_modulated_A0(ChainParams(N=4)).data
    overlaps = np.array([abs(hs_inner(x.data, A0)) for x in g])
    assert np.all(overlaps[1::2] < 1e-14) and np.all(overlaps[0::2] > 0.5)


def test_emergent_energy_complex_hopping_uses_real_part():
    assert emergent_energy(ChainParams(N=8, w=2 + 5j, delta=3j, mu=1.0)) == pytest.approx(3 * np.sqrt(0.75))


# --------------------------------------------------------------------------- perturbations


def test_perturbed_residual_zero_at_kappa():
    assert perturbed_mode_residual(ChainParams(N=16), 3 * np.pi / 2, 0.0) < 1e-14


def test_perturbed_residual_linear_in_epsilon():
    N = 16
    p = ChainParams(N=N)
    eps = 2 * np.pi / N * np.array([1, 2, 3])
    res = [perturbed_mode_residual(p, 3 * np.pi / 2, e) for e in eps]
    assert fit_power_law(eps, res) == pytest.approx(1.0, abs=0.1)


def test_perturbed_residual_halves_with_doubled_n():
    r8 = perturbed_mode_residual(ChainParams(N=8), 3 * np.pi / 2, 2 * np.pi / 8)
    r16 = perturbed_mode_residual(ChainParams(N=16), 3 * np.pi / 2, 2 * np.pi / 16)
    assert r8 / r16 == pytest.approx(2.0, rel=0.05)


def test_perturbed_residual_fock_agrees():
    p = ChainParams(N=8)
    for e in (2 * np.pi / 8, 4 * np.pi / 8):
        assert perturbed_mode_residual(p, 3 * np.pi / 2, e, fock=True) == pytest.approx(
            perturbed_mode_residual(p, 3 * np.pi / 2, e), rel=1e-10
        )

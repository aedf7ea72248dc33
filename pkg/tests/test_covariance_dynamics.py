import numpy as np
import pytest
import scipy.linalg

from conftest import random_density_matrix, random_params
from dissipative_kitaev import covariance_dynamics as cd
from dissipative_kitaev.covariance_dynamics import (
    CovarianceState,
    SpectralFallbackWarning,
    TrajectoryRecord,
    derive_generator,
    dominant_frequency,
    fit_slope,
    integrate,
    load_state,
    long_time_value,
    make_initial_state,
    output_grid,
    parse_observable,
    propagate_state,
    random_state,
    save_state,
    scaling_sweep,
    state_from_density_matrix,
    uniform_pair_state,
)
from dissipative_kitaev.errors import AnalysisError, ParameterError, ParseError, PreconditionError
from dissipative_kitaev.liouville_exact import build_superoperator, full_spectrum, observable_trajectory
from dissipative_kitaev.model_core import ChainParams, build_fermion_operators, build_nonlocal_A


def oracle_correlations(params, rho0, times):
    spec = full_spectrum(build_superoperator(params))
    c = [x.data for x in build_fermion_operators(params)]
    # observable_trajectory returns tr(O^+ rho); pass O^+ to get tr(O rho)
    F12 = observable_trajectory(spec, (c[0] @ c[1]).conj().T, rho0, times)
    G12 = observable_trajectory(spec, (c[0].conj().T @ c[1]).conj().T, rho0, times)
    return F12, G12


# --------------------------------------------------------------------------- state


def test_state_validation():
    with pytest.raises(ParameterError):
        CovarianceState(np.ones((2, 2)), np.eye(2))
    with pytest.raises(ParameterError):
        CovarianceState(np.zeros((2, 2)), np.array([[0, 1], [0, 0]]))
    with pytest.raises(ParameterError):
        CovarianceState(np.zeros((2, 2)), np.eye(3))
    s = uniform_pair_state(3)
    with pytest.raises(ValueError):
        s.F[0, 1] = 0


def test_majorana_round_trip():
    s = random_state(5, seed=2)
    back = CovarianceState.from_majorana(s.to_majorana())
    assert np.allclose(back.F, s.F, atol=1e-14) and np.allclose(back.G, s.G, atol=1e-14)


def test_state_from_density_matrix_matches_majorana(rng):
    rho = random_density_matrix(rng, 16)
    s = state_from_density_matrix(rho)
    assert s.is_physical
    from dissipative_kitaev.model_core import build_majoranas

    g = [x.data for x in build_majoranas(4)]
    omega = np.array([[np.trace(a @ b @ rho) for b in g] for a in g]) - np.eye(8)
    assert np.allclose(s.to_majorana(), omega, atol=1e-12)


def test_physicality_flags():
    assert random_state(6, seed=1).is_physical
    assert CovarianceState(np.zeros((3, 3)), 0.5 * np.eye(3)).is_physical
    ok, radius = uniform_pair_state(4).physicality()
    assert not ok and radius > 1


def test_uniform_pair_layout():
    s = uniform_pair_state(4)
    iu = np.triu_indices(4, 1)
    assert np.all(s.F[iu] == 1 + 1j) and np.all(s.F.T[iu] == -(1 + 1j))
    assert np.all(np.diag(s.F) == 0) and np.array_equal(s.G, np.eye(4))


def test_random_state_deterministic():
    a, b = random_state(6, seed=7), random_state(6, seed=7)
    assert np.array_equal(a.F, b.F) and np.array_equal(a.G, b.G)
    assert not np.array_equal(a.F, random_state(6, seed=8).F)
    p = ChainParams(N=6)
    r1 = integrate(a, p, 2.0, 0.1)
    r2 = integrate(b, p, 2.0, 0.1)
    assert all(np.array_equal(r1[k], r2[k]) for k in r1.labels)
    with pytest.raises(ParameterError):
        random_state(4, seed=1, radius=1.5)


def test_save_load_round_trip(tmp_path):
    s = random_state(5, seed=3)
    path = tmp_path / "state.txt"
    save_state(s, path)
    back = load_state(path)
    assert np.array_equal(back.F, s.F) and np.array_equal(back.G, s.G)
    assert np.array_equal(make_initial_state(f"file:{path}", 5).F, s.F)
    with pytest.raises(ParameterError):
        make_initial_state(f"file:{path}", 4)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "N=2\nF\n",
        "# N=1 convention=other\nF\n0 0\nG\n0 0\n",
        "# N=1 convention=F=<c_m c_n>,G=<c_m^+ c_n>\nF\n0 0\nH\n0 0\n",
        "# N=1 convention=F=<c_m c_n>,G=<c_m^+ c_n>\nF\n0 x\nG\n0 0\n",
        "# N=1 convention=F=<c_m c_n>,G=<c_m^+ c_n>\nF\n0 0 0\nG\n0 0\n",
        "# N=1 convention=F=<c_m c_n>,G=<c_m^+ c_n>\nF\n0 0\nG\n0 0\nextra\n",
        "# N=1 convention=F=<c_m c_n>,G=<c_m^+ c_n>\nF\n1 0\nG\n0 0\n",
    ],
)
def test_malformed_state_files(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ParseError):
        load_state(path)


def test_missing_state_file(tmp_path):
    with pytest.raises(ParseError):
        load_state(tmp_path / "nope.txt")


def test_make_initial_state_specs():
    assert np.array_equal(make_initial_state("uniform-pair", 4).F, uniform_pair_state(4).F)
    assert np.array_equal(make_initial_state("random", 4, seed=5).F, random_state(4, 5).F)
    with pytest.raises(ParameterError):
        make_initial_state("random", 4)
    with pytest.raises(ParameterError):
        make_initial_state("thermal", 4)


# --------------------------------------------------------------------------- generator


def test_generator_rejects_interactions():
    with pytest.raises(PreconditionError):
        derive_generator(ChainParams(N=4, interactions=((1.0, (1, 2)),)))


def test_generator_homogeneous_for_hermitian_jumps():
    assert derive_generator(ChainParams(N=4)).homogeneous
    assert not derive_generator(ChainParams(N=4, jump_asymmetry=0.3)).homogeneous


@pytest.mark.parametrize("seed", [0, 1])
def test_oracle_equivalence_generic_params(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, N=3)
    rho0 = random_density_matrix(rng, 8)
    times = output_grid(5.0, 0.25)
    F12, G12 = oracle_correlations(p, rho0, times)
    s0 = state_from_density_matrix(rho0)
    # strongly dissipative generic parameters: the default tolerances drift to ~1e-7,
    # a tighter rtol restores 1e-8; the eigenbasis route is exact
    for rec in (integrate(s0, p, 5.0, 0.25, method="spectral"), integrate(s0, p, 5.0, 0.25, rtol=1e-12, atol=1e-13)):
        assert np.abs(rec["F[1,2]"] - F12).max() < 1e-8
        assert np.abs(rec["G[1,2]"] - G12).max() < 1e-8
    rec = integrate(s0, p, 5.0, 0.25)
    assert np.abs(rec["F[1,2]"] - F12).max() < 1e-6


def test_generator_derivative_matches_oracle(rng):
    p = random_params(rng, N=3)
    rho0 = random_density_matrix(rng, 8)
    sup = build_superoperator(p)
    dF, dG = derive_generator(p)(state_from_density_matrix(rho0))
    c = [x.data for x in build_fermion_operators(3)]
    drho = sup.apply(rho0)
    F_dot = np.array([[np.trace(c[m] @ c[n] @ drho) for n in range(3)] for m in range(3)])
    G_dot = np.array([[np.trace(c[m].conj().T @ c[n] @ drho) for n in range(3)] for m in range(3)])
    assert np.allclose(dF, F_dot, atol=1e-12) and np.allclose(dG, G_dot, atol=1e-12)


def test_free_hopping_rotation():
    p = ChainParams(N=5, w=0.8 + 0.3j, delta=0.0, mu=0.0, gamma=0.0)
    s0 = random_state(5, seed=4)
    t = 1.7
    s = propagate_state(s0, p, t)
    h = np.zeros((5, 5), dtype=complex)
    for i in range(5):
        j = (i + 1) % 5
        h[i, j] += -0.5 * p.w
        h[j, i] += -0.5 * np.conj(p.w)
    U = scipy.linalg.expm(-1j * h * t)
    assert np.allclose(s.G, U.conj() @ s0.G @ U.T, atol=1e-12)
    assert np.trace(s.G) == pytest.approx(np.trace(s0.G))
    rec = integrate(s0, p, 5.0, 0.5, observables=[f"G[{i},{i}]" for i in range(1, 6)])
    total = sum(rec[f"G[{i},{i}]"] for i in range(1, 6))
    assert np.allclose(total, np.trace(s0.G), atol=1e-9)


def test_maximally_mixed_stationary():
    s0 = CovarianceState(np.zeros((4, 4)), 0.5 * np.eye(4))
    s = propagate_state(s0, ChainParams(N=4, mu=0.2), 10.0)
    assert np.allclose(s.F, 0, atol=1e-12) and np.allclose(s.G, 0.5 * np.eye(4), atol=1e-12)


def test_vacuum_relaxes_to_half_filling():
    s0 = CovarianceState(np.zeros((4, 4)), np.zeros((4, 4)))
    rec, final = integrate(s0, ChainParams(N=4), 60.0, 1.0, observables=["G[1,1]"], return_final_state=True)
    assert np.allclose(np.diag(final.G), 0.5, atol=1e-6)
    assert abs(rec["G[1,1]"][0]) < 1e-15


def test_structure_preserved_along_flow():
    p = ChainParams(N=6, mu=0.3, jump_asymmetry=0.2 + 0.1j)
    s0 = random_state(6, seed=9)
    for t in (0.5, 3.0, 10.0):
        s = propagate_state(s0, p, t)  # construction validates the structure
        assert np.abs(s.F + s.F.T).max() < 1e-9 and np.abs(s.G - s.G.conj().T).max() < 1e-9
    _, fin = integrate(s0, p, 10.0, 0.5, return_final_state=True)
    assert np.allclose(fin.F, propagate_state(s0, p, 10.0).F, atol=1e-8)


def test_flow_is_affine():
    p = ChainParams(N=4, jump_asymmetry=0.4 + 0.3j, mu=0.2)
    assert not derive_generator(p).homogeneous
    o1, o2 = random_state(4, 1).to_majorana(), random_state(4, 2).to_majorana()
    zero = np.zeros((8, 8))  # Omega = 0 is the maximally mixed state

    def evolve(omega):
        return propagate_state(CovarianceState.from_majorana(omega), p, 2.5).to_majorana()

    a, b = 0.7, -1.9
    lhs = evolve(a * o1 + b * o2)
    rhs = a * evolve(o1) + b * evolve(o2) + (1 - a - b) * evolve(zero)
    assert np.allclose(lhs, rhs, atol=1e-11)


# --------------------------------------------------------------------------- integrate


def test_integrators_agree():
    p = ChainParams(N=8, mu=0.1)
    s0 = random_state(8, seed=11)
    recs = {m: integrate(s0, p, 10.0, 0.5, method=m) for m in ("DOP853", "RK45", "spectral")}
    for lab in ("F[1,2]", "G[1,2]"):
        assert np.abs(recs["DOP853"][lab] - recs["spectral"][lab]).max() < 1e-8
        assert np.abs(recs["RK45"][lab] - recs["spectral"][lab]).max() < 1e-6
    assert recs["spectral"].metadata["eigenbasis_condition"] < 1e8


def test_spectral_fallback(monkeypatch):
    monkeypatch.setattr(cd, "SPECTRAL_CONDITION_CAP", 0.5)
    p = ChainParams(N=4)
    s0 = random_state(4, seed=1)
    with pytest.warns(SpectralFallbackWarning):
        rec = integrate(s0, p, 2.0, 0.5, method="spectral")
    assert rec.metadata["method"].startswith("DOP853")


def test_integrate_errors():
    p = ChainParams(N=4)
    s0 = random_state(4, seed=1)
    with pytest.raises(ParameterError):
        integrate(random_state(3, seed=1), p, 1.0)
    with pytest.raises(ParameterError):
        integrate(s0, p, 1.0, method="euler")
    with pytest.raises(ParameterError):
        integrate(s0, p, 1.0, 0.3)
    with pytest.raises(ParameterError):
        integrate(s0, p, 1.0, observables=["F[1,5]"])
    with pytest.raises(ParseError):
        integrate(s0, p, 1.0, observables=["c1c2"])


def test_output_grid_and_parse():
    assert np.allclose(output_grid(1.0, 0.25), [0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ParameterError):
        output_grid(-1.0, 0.1)
    assert parse_observable(" G[ 3 , 12 ] ") == ("G", 3, 12)


def test_trajectory_record_validation():
    with pytest.raises(ParameterError):
        TrajectoryRecord(np.array([0.0, 0.0]), {})
    from dissipative_kitaev.errors import NumericalError

    with pytest.raises(NumericalError):
        TrajectoryRecord(np.array([0.0, 1.0]), {"x": np.array([0, np.nan])})


# --------------------------------------------------------------------------- analysis


def test_long_time_constant():
    t = np.linspace(0, 10, 101)
    lt = long_time_value(TrajectoryRecord(t, {"x": np.full(101, 0.3 + 0.1j)}))
    assert lt.osc_amplitude == 0 and lt.dominant_freq == 0
    assert lt.mean_abs == pytest.approx(abs(0.3 + 0.1j))


def test_dominant_frequency_sinusoid():
    t = np.arange(0, 40, 0.01)
    lt = long_time_value(TrajectoryRecord(t, {"x": np.exp(2j * t)}), window=1.0)
    assert lt.dominant_freq == pytest.approx(2.0, abs=0.01)
    assert dominant_frequency(t, np.cos(3.3 * t)) == pytest.approx(3.3, abs=0.01)


def test_long_time_window_errors():
    t = np.linspace(0, 10, 101)
    rec = TrajectoryRecord(t, {"x": np.sin(0.5 * t)})
    with pytest.raises(AnalysisError):
        long_time_value(rec, window=0.25)  # fewer than 3 periods
    with pytest.raises(AnalysisError):
        long_time_value(TrajectoryRecord(t[:20], {"x": np.sin(t[:20])}), window=0.25)
    with pytest.raises(ParameterError):
        long_time_value(rec, window=0.0)


def test_odd_mode_frequency_matches_liouvillian_pair():
    """|Im lambda| of the purely imaginary pair, seen through the odd observable A + A^+."""
    p = ChainParams(N=4)
    spec = full_spectrum(build_superoperator(p))
    pair = spec.eigenvalues[spec.tags() == "imaginary"]
    A = build_nonlocal_A(p).data
    X = A + A.conj().T
    rho0 = (np.eye(16) + 0.5 * X) / 16
    t = output_grid(60.0, 0.05)
    rec = TrajectoryRecord(t, {"x": observable_trajectory(spec, X, rho0, t)})
    lt = long_time_value(rec, window=0.5)
    assert lt.dominant_freq == pytest.approx(np.abs(pair.imag).max(), rel=0.02)
    assert lt.osc_amplitude > 0.1


def test_scaling_sweep_single_n():
    rows = scaling_sweep(ChainParams(N=4), [8], t_max=20.0, dt_out=0.1)
    assert len(rows) == 1 and rows[0].N == 8
    assert fit_slope(rows) is None


def test_scaling_small_n_slope():
    rows = scaling_sweep(ChainParams(N=4), [4, 8, 12, 16], t_max=100.0)
    assert fit_slope(rows) == pytest.approx(-1.0, abs=0.2)


# --------------------------------------------------------------------------- persistence


@pytest.mark.parametrize("N, persists", [(8, True), (10, False), (12, True), (14, False)])
def test_long_time_memory_requires_mod4(N, persists):
    """With mod(N, 4) = 0 correlations keep a nonzero long-time value; otherwise they decay."""
    rec = integrate(uniform_pair_state(N), ChainParams(N=N), 20000.0, 0.5, ("F[1,2]",), method="spectral")
    tail = np.abs(rec["F[1,2]"][-400:])
    if persists:
        assert tail.mean() == pytest.approx(1.0 / N, rel=1e-8)
    else:
        assert tail.max() < 1e-12


@pytest.mark.xfail(strict=True, reason="transient oscillations at t <= 100 are larger for N % 4 != 0; see decisions ledger")
def test_persistent_oscillation_amplitude_mod4():
    amp = {}
    for N in (12, 14):
        rec = integrate(uniform_pair_state(N), ChainParams(N=N), 100.0, 0.05, ("F[1,2]",), method="spectral")
        amp[N] = long_time_value(rec, window=0.5, min_periods=0).osc_amplitude
    assert amp[12] > 10 * amp[14]

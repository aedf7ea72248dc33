"""Bogoliubov diagonalization of the quadratic chain and its emergent ladder modes.

The momentum modes are

    d(k) = e^{-i pi/4} N^{-1/2} sum_j e^{-ikj} (u_k c_j + v_k c_j^+),

so that ``[H_0, d(k)] = -(E_k + Im(w) sin k) d(k)`` with

    E_k = sqrt(|D sin k|^2 + (Re(w) cos k + mu)^2).

For real ``w`` this is the familiar ``[H_0, d(k)] = -E_k d(k)``.  When
``u_kappa = -v_kappa`` the mode is a pure even-Majorana sum
``d_kappa = sum_j e^{-i kappa j} gamma_{2j}``: it anticommutes with the odd-Majorana
jump operators, and its parity dressing ``A_kappa = P_{1,N} d_kappa`` commutes with them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ParameterError, PreconditionError
from .model_core import (
    ChainParams,
    DenseOperator,
    anticommutator,
    build_fermion_operators,
    build_hamiltonian,
    build_jump_operators,
    build_parity,
    commutator,
    even_majorana_mode,
    hs_norm,
)
from .third_quantization import majorana_coefficients, majorana_transform, momentum_grid

GRID_TOL = 1e-9
SINGULAR_TOL = 1e-12


class SingularMomentumError(ParameterError):
    """The closed form for (u_k, v_k) is 0/0 at sin k = 0; the mode is a pure particle or hole."""


@dataclass(frozen=True)
class BogoliubovMode:
    k: float
    u: complex
    v: complex
    E: float
    frequency: float  # omega in [H_0, d(k)] = omega d(k)

    def __post_init__(self):
        norm = abs(self.u) ** 2 + abs(self.v) ** 2
        if abs(norm - 1) > 1e-12:
            raise ParameterError(f"Bogoliubov coefficients are not normalized (|u|^2+|v|^2 = {norm})")


def _kinetic(params: ChainParams, k):
    return params.w.real * np.cos(k) + params.mu


def dispersion(params: ChainParams, k):
    """``E_k = sqrt(|D sin k|^2 + (Re(w) cos k + mu)^2)`` (vectorized over ``k``)."""
    k = np.asarray(k, dtype=float)
    E = np.sqrt(np.abs(params.delta * np.sin(k)) ** 2 + _kinetic(params, k) ** 2)
    return float(E) if E.ndim == 0 else E


def bogoliubov_coefficients(params: ChainParams, k: float, allow_singular: bool = False) -> BogoliubovMode:
    """Normalized ``(u_k, v_k)`` of the lowering mode at momentum ``k``.

    For ``sin k != 0``

        u_k = -i D sin k sqrt(E_k - X_k) / (sqrt(2) |D sin k| sqrt(E_k)),
        v_k = i (E_k + X_k) / (D sin k) u_k,       X_k = Re(w) cos k + mu,

    which already satisfy ``|u|^2 + |v|^2 = 1``.  At ``sin k = 0`` (or ``D = 0``)
    these are 0/0; with ``allow_singular`` the limit is returned instead: a pure
    particle ``(1, 0)`` for ``X_k <= 0`` and a pure hole ``(0, 1)`` otherwise.
    """
    k = float(k)
    s = np.sin(k)
    X = float(_kinetic(params, k))
    E = dispersion(params, k)
    shift = params.w.imag * s
    pair = params.delta * s
    if abs(pair) < SINGULAR_TOL:
        if not allow_singular:
            raise SingularMomentumError(f"Bogoliubov coefficients are singular at k={k:.6g} (D sin k = 0)")
        u, v = (1.0 + 0j, 0j) if X <= 0 else (0j, 1.0 + 0j)
        return BogoliubovMode(k, u, v, abs(X), -(abs(X) + shift))
    # E -/+ X = |D sin k|^2 / (E +/- X) avoids cancellation when |X| ~ E
    p2 = abs(pair) ** 2
    e_minus = E - X if X <= 0 else p2 / (E + X)
    e_plus = E + X if X >= 0 else p2 / (E - X)
    u = -1j * pair * np.sqrt(e_minus) / (np.sqrt(2) * abs(pair) * np.sqrt(E))
    v = 1j * e_plus / pair * u
    return BogoliubovMode(k, complex(u), complex(v), E, -(E + shift))


def mode_majorana_vector(params: ChainParams, mode: BogoliubovMode) -> np.ndarray:
    """Coefficients ``a`` with ``d(k) = sum_a a_a gamma_a`` (length 2N)."""
    N = params.N
    T = majorana_transform(N)
    j = np.arange(1, N + 1)
    phase = np.exp(-1j * np.pi / 4) / np.sqrt(N) * np.exp(-1j * mode.k * j)
    return (phase * mode.u) @ T + (phase * mode.v) @ T.conj()


def bogoliubov_operator(params: ChainParams, mode: BogoliubovMode) -> DenseOperator:
    """Fock-space ``d(k)`` for small N."""
    c = [op.data for op in build_fermion_operators(params)]
    data = sum(
        np.exp(-1j * np.pi / 4 - 1j * mode.k * j) / np.sqrt(params.N) * (mode.u * c[j - 1] + mode.v * c[j - 1].conj().T)
        for j in range(1, params.N + 1)
    )
    return DenseOperator(data, f"d({mode.k:.4f})", "odd")


def on_grid(N: int, k: float, tol: float = GRID_TOL) -> bool:
    m = N * k / (2 * np.pi)
    return abs(m - round(m)) < tol


@dataclass(frozen=True)
class KappaSolution:
    kappas: tuple  # (kappa, 2 pi - kappa), empty when there is no real solution
    on_grid: tuple
    N: int | None = None

    @property
    def exists(self) -> bool:
        return bool(self.kappas)


def _require_imaginary_delta(params: ChainParams) -> None:
    if abs(params.delta.real) > 1e-14 * max(1.0, abs(params.delta)):
        raise PreconditionError("emergent even-Majorana modes need a purely imaginary pairing")


def solve_kappa(params: ChainParams) -> KappaSolution:
    """``kappa = arccos(-mu / Re w)`` and ``2 pi - kappa``, with on-grid flags for ``params.N``.

    Of the two, the lowering mode (``u = -v``) sits at the one with
    ``sin(kappa) Im(D) < 0``; the other carries its conjugate.
    """
    _require_imaginary_delta(params)
    w = params.w.real
    if w == 0 or abs(params.mu) >= abs(w):
        return KappaSolution((), (), params.N)
    kappa = float(np.arccos(-params.mu / w))
    pair = (kappa, 2 * np.pi - kappa)
    return KappaSolution(pair, tuple(on_grid(params.N, q) for q in pair), params.N)


def emergent_condition(params: ChainParams, k: float) -> float:
    """``Re(-v_k / u_k) - 1``; it changes sign where ``u_k = -v_k``."""
    s = np.sin(k)
    E, X = dispersion(params, k), _kinetic(params, k)
    return float(np.real(-1j * (E + X) / (params.delta * s)) - 1.0)


def find_kappa(params: ChainParams, xtol: float = 1e-15) -> float:
    """Root-find ``u_k = -v_k`` on the half zone where it can hold (independent of the closed form)."""
    _require_imaginary_delta(params)
    if params.delta.imag == 0:
        raise PreconditionError("no pairing, no emergent mode")
    eps = 1e-9
    # with Im D > 0 the lowering solution has sin k < 0, i.e. k in (pi, 2 pi)
    lo, hi = (np.pi + eps, 2 * np.pi - eps) if params.delta.imag > 0 else (eps, np.pi - eps)
    f_lo, f_hi = emergent_condition(params, lo), emergent_condition(params, hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise PreconditionError("u_k = -v_k has no real solution (|mu| >= |w|)")
    return float(brentq(lambda k: emergent_condition(params, k), lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))


def emergent_energy(params: ChainParams) -> float:
    """``E_kappa = |D| sqrt(1 - mu^2 / w^2)`` with the real part of ``w``."""
    ratio = params.mu / params.w.real
    return float(abs(params.delta) * np.sqrt(1 - ratio**2))


def even_mode_vector(N: int, kappa: float) -> np.ndarray:
    """Majorana coefficients of ``d_kappa = sum_j e^{-i kappa j} gamma_{2j}``."""
    a = np.zeros(2 * N, dtype=complex)
    a[1::2] = np.exp(-1j * kappa * np.arange(1, N + 1))
    return a


@dataclass(frozen=True, eq=False)
class EmergentMode:
    kappa: float
    coefficients: np.ndarray
    E_kappa: float
    expected_omega: float
    coefficient_residual: float  # ||4 H a - omega a|| / ||a|| in the Majorana basis
    on_grid: bool
    d: DenseOperator | None = None
    A: DenseOperator | None = None
    checks: dict = field(default_factory=dict)


def emergent_mode(params: ChainParams, kappa: float, fock: bool | None = None) -> EmergentMode:
    """Even-Majorana mode at ``kappa`` with coefficient-level and (small N) Fock checks.

    ``[H_0, sum a_m gamma_m] = 4 sum_j (H a)_j gamma_j`` for ``H_0 = sum H_jk gamma_j gamma_k``,
    so the coefficient residual is valid at any N.  The Fock checks use the full
    Hamiltonian, including interaction terms.
    """
    N = params.N
    a = even_mode_vector(N, kappa)
    E = emergent_energy(params)
    omega = -E if np.sin(kappa) * params.delta.imag < 0 else E
    form = majorana_coefficients(params.quadratic())
    Ha = 4 * form.H_mat @ a
    coef_res = float(np.linalg.norm(Ha - omega * a) / np.linalg.norm(a))
    grid = on_grid(N, kappa)
    fock = grid and N <= 10 if fock is None else fock
    if not fock:
        return EmergentMode(kappa, a, E, omega, coef_res, grid)
    d = even_majorana_mode(params, kappa)
    H = build_hamiltonian(params).data
    P = build_parity(params).data
    A = DenseOperator(P @ d.data, f"A_{kappa:.4f}", "odd")
    jumps = [L.data for L in build_jump_operators(params)]
    norm_d = hs_norm(d.data)
    checks = {
        "[H, d] - omega d": hs_norm(commutator(H, d.data) - omega * d.data) / norm_d,
        "{L_j, d}": max(hs_norm(anticommutator(L, d.data)) for L in jumps) / norm_d,
        "[L_j, A]": max(hs_norm(commutator(L, A.data)) for L in jumps) / norm_d,
        "[H0, A] - omega A": hs_norm(
            commutator(build_hamiltonian(params.quadratic()).data, A.data) - omega * A.data
        ) / norm_d,
    }
    return EmergentMode(kappa, a, E, omega, coef_res, grid, d, A, checks)


def perturbed_mode_residual(params: ChainParams, kappa: float, epsilon: float, fock: bool = False) -> float:
    """``sqrt(sum_mu ||[L_mu, P d(kappa + eps)]||^2) / ||d(kappa + eps)||`` for the Bogoliubov mode.

    Since ``P`` anticommutes with every Majorana, ``[L, P d] = -P {L, d}`` and
    ``{L, d} = 2 (l . a)`` is a c-number, so the coefficient route is exact at
    any N; ``fock=True`` evaluates the same quantity with dense operators.  The
    residual is ``sqrt(2 gamma) |u + v|`` for ``jump_asymmetry = 1`` and vanishes
    at ``eps = 0``.
    """
    mode = bogoliubov_coefficients(params, kappa + epsilon, allow_singular=True)
    if fock:
        d = bogoliubov_operator(params, mode).data
        P = build_parity(params).data
        total = sum(hs_norm(commutator(L.data, P @ d)) ** 2 for L in build_jump_operators(params))
        return float(np.sqrt(total) / hs_norm(d))
    a = mode_majorana_vector(params, mode)
    T = majorana_transform(params.N)
    l = np.sqrt(params.gamma) * (T + params.jump_asymmetry * T.conj())
    return float(2 * np.linalg.norm(l @ a) / np.linalg.norm(a))


def dispersion_table(params: ChainParams) -> list[dict]:
    """Rows ``(m, k, E, u, v, frequency)`` over the Brillouin grid (singular points as limits)."""
    rows = []
    for k in momentum_grid(params.N):
        mode = bogoliubov_coefficients(params, k, allow_singular=True)
        rows.append(
            {
                "m": int(round(params.N * k / (2 * np.pi))),
                "k": float(k),
                "E": mode.E,
                "u_re": mode.u.real,
                "u_im": mode.u.imag,
                "v_re": mode.v.real,
                "v_im": mode.v.imag,
                "frequency": mode.frequency,
            }
        )
    return rows


def kappa_report(params: ChainParams) -> dict:
    sol = solve_kappa(params)
    report = {"N": params.N, "solutions": list(sol.kappas), "on_grid": list(sol.on_grid), "exists": sol.exists}
    if sol.exists:
        report["E_kappa"] = emergent_energy(params)
        report["root_found"] = find_kappa(params)
    return report

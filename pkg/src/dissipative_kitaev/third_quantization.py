"""Liouvillian spectra of the quadratic chain from the 2N x 2N shape blocks.

Majoranas are ordered ``w = (gamma_1, ..., gamma_2N)`` with
``gamma_{2j-1} = c_j + c_j^+`` and ``gamma_{2j} = i (c_j - c_j^+)``.  The
Hamiltonian coefficients are normalized as

    H_0 = sum_{j,k} H_jk gamma_j gamma_k + const,     H = -H^T purely imaginary,

and jump operators ``L_mu = sum_j l_{mu j} gamma_j`` give the bath matrix
``M_jk = sum_mu l_{mu j} conj(l_{mu k})``.  With these conventions the blocks

    L11 = -2i H - M - M^T,   L12 = 4 M,   L22 = 2i H^T + M^T + M

reproduce the exact vectorized Liouvillian: every sum ``-2 sum_i beta_i v_i``
over the eigenvalues ``beta`` of ``L22`` is an exact eigenvalue.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConsistencyError, NumericalError, ParameterError, ResourceError
from .liouville_exact import CLASSIFY_TOL, classify_eigenvalues
from .model_core import ChainParams

FULL_ENUMERATION_CAP = 24  # maximal 2N for the full 2^(2N) enumeration
DEFAULT_MAX_COUNT = 5_000_000


class InteractionIgnoredWarning(UserWarning):
    """Third quantization only sees the quadratic part of the model."""


def majorana_transform(N: int) -> np.ndarray:
    """Matrix ``T`` with ``c_j = sum_a T[j, a] gamma_a`` (so ``c_j^+`` uses ``conj(T)``)."""
    T = np.zeros((N, 2 * N), dtype=complex)
    idx = np.arange(N)
    T[idx, 2 * idx] = 0.5
    T[idx, 2 * idx + 1] = -0.5j
    return T


@dataclass(frozen=True, eq=False)
class MajoranaQuadraticForm:
    H_mat: np.ndarray
    M_mat: np.ndarray
    n_sites: int

    def __post_init__(self):
        H, M = self.H_mat, self.M_mat
        if H.shape != (2 * self.n_sites,) * 2 or M.shape != H.shape:
            raise ParameterError("H_mat and M_mat must be 2N x 2N")
        scale = max(1.0, np.abs(H).max(), np.abs(M).max())
        if np.abs(H + H.T).max() > 1e-12 * scale:
            raise ConsistencyError("H_mat is not antisymmetric")
        if np.abs(M - M.conj().T).max() > 1e-12 * scale:
            raise ConsistencyError("M_mat is not Hermitian")
        if np.linalg.eigvalsh(M).min() < -1e-12 * scale:
            raise ConsistencyError("M_mat is not positive semidefinite")


def _quadratic_dirac_terms(params: ChainParams):
    """Yield ``(coeff, (dagger_a, site_a), (dagger_b, site_b))`` for the quadratic Hamiltonian."""
    N, w, D, mu = params.N, params.w, params.delta, params.mu
    for i in range(N):
        j = (i + 1) % N
        yield -0.5 * w, (True, i), (False, j)
        yield -0.5 * np.conj(w), (True, j), (False, i)
        yield -0.5 * D, (False, i), (False, j)
        yield -0.5 * np.conj(D), (True, j), (True, i)
        yield -mu, (True, i), (False, i)


def majorana_coefficients(params: ChainParams) -> MajoranaQuadraticForm:
    """Majorana-basis ``(H, M)`` of the quadratic chain and its jump operators.

    Each bilinear ``c_a^(+) c_b^(+)`` is expanded as ``sum T_a T_b gamma gamma``;
    the symmetric part of the coefficient matrix only produces constants, so
    ``H`` is its antisymmetric part.
    """
    if params.interactions:
        warnings.warn(
            "interaction terms are ignored by the quadratic (third-quantization) treatment",
            InteractionIgnoredWarning,
            stacklevel=2,
        )
    N = params.N
    T = majorana_transform(N)
    rows = {False: T, True: T.conj()}
    K = np.zeros((2 * N, 2 * N), dtype=complex)
    for coeff, (da, a), (db, b) in _quadratic_dirac_terms(params):
        K += coeff * np.outer(rows[da][a], rows[db][b])
    H = 0.5 * (K - K.T)
    l = np.sqrt(params.gamma) * (T + params.jump_asymmetry * T.conj())
    M = l.T @ l.conj()
    return MajoranaQuadraticForm(H, 0.5 * (M + M.conj().T), N)


@dataclass(frozen=True, eq=False)
class ShapeBlocks:
    L11: np.ndarray
    L12: np.ndarray
    L22: np.ndarray

    def full(self) -> np.ndarray:
        """The block upper-triangular ``4N x 4N`` matrix ``[[L11, L12], [0, L22]]``."""
        n = self.L22.shape[0]
        return np.block([[self.L11, self.L12], [np.zeros((n, n)), self.L22]])


def shape_blocks(form: MajoranaQuadraticForm, tol: float = 1e-10) -> ShapeBlocks:
    H, M = form.H_mat, form.M_mat
    L11 = -2j * H - M - M.T
    L12 = 4.0 * M
    L22 = 2j * H.T + M.T + M
    err = np.abs(L11 + L22.conj().T).max()
    if err > tol * max(1.0, np.abs(L22).max()):
        raise ConsistencyError(f"L11 != -L22^+ (deviation {err:.3g}); Majorana conventions are inconsistent")
    return ShapeBlocks(L11, L12, L22)


@dataclass(frozen=True, eq=False)
class RapiditySet:
    """Eigenvalues of ``L22`` sorted by (Re, Im), plus pairing diagnostics."""

    betas: np.ndarray
    conjugation_error: float
    pairing_error: float

    def __len__(self) -> int:
        return len(self.betas)

    def zero_real_part(self, tol: float = CLASSIFY_TOL) -> np.ndarray:
        return self.betas[np.abs(self.betas.real) < tol]


def _multiset_mismatch(a: np.ndarray, b: np.ndarray) -> float:
    """Largest distance in the optimal one-to-one matching of two equal-length multisets."""
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max()) if len(a) else 0.0


def rapidities(blocks: ShapeBlocks, tol: float = 1e-8) -> RapiditySet:
    """Rapidities ``beta`` = eigenvalues of ``L22`` (all have ``Re beta >= 0``).

    Validated against the pairings ``eig(L11) = -conj(eig(L22))`` and closure
    under complex conjugation.
    """
    eta = scipy.linalg.eigvals(blocks.L22)
    xi = scipy.linalg.eigvals(blocks.L11)
    scale = max(1.0, np.abs(eta).max())
    conj_err = _multiset_mismatch(eta, eta.conj())
    pair_err = _multiset_mismatch(xi, -eta.conj())
    if conj_err > tol * scale or pair_err > tol * scale:
        raise NumericalError(
            f"rapidity pairing unresolved (conjugation {conj_err:.3g}, L11/L22 {pair_err:.3g}); "
            f"eigenvalues: {np.sort_complex(eta)}"
        )
    if eta.real.min() < -tol * scale:
        raise NumericalError(f"rapidity with negative real part {eta.real.min():.3g}")
    # snap numerically-zero real parts so that ordering is deterministic
    eta = np.where(np.abs(eta.real) < 1e-13 * scale, 1j * eta.imag, eta)
    order = np.lexsort((np.round(eta.imag, 12), np.round(eta.real, 12)))
    return RapiditySet(eta[order], conj_err, pair_err)


def quadratic_rapidities(params: ChainParams) -> RapiditySet:
    return rapidities(shape_blocks(majorana_coefficients(params)))


def spectrum_from_rapidities(rap: RapiditySet | np.ndarray, v) -> complex:
    """``lambda_v = -2 sum_i beta_i v_i`` for a binary string ``v`` of length 2N."""
    betas = rap.betas if isinstance(rap, RapiditySet) else np.asarray(rap)
    v = np.asarray([int(x) for x in v] if isinstance(v, str) else v)
    if v.shape != betas.shape:
        raise ParameterError(f"excitation string has length {v.size}, expected {betas.size}")
    if not np.all((v == 0) | (v == 1)):
        raise ParameterError("excitation string must be binary")
    return complex(-2.0 * np.dot(betas, v))


@dataclass(frozen=True, eq=False)
class EnumeratedSpectrum:
    values: np.ndarray
    n_excitations: np.ndarray
    strategy: str

    def __len__(self) -> int:
        return len(self.values)

    def tags(self, tol: float = CLASSIFY_TOL) -> np.ndarray:
        return classify_eigenvalues(self.values, tol)


def _enumerate_full(betas: np.ndarray):
    vals = np.zeros(1, dtype=complex)
    counts = np.zeros(1, dtype=np.int16)
    for b in betas:
        vals = np.concatenate([vals, vals - 2.0 * b])
        counts = np.concatenate([counts, counts + 1])
    return vals, counts


def _enumerate_max_excitations(betas: np.ndarray, m: int, max_count: int):
    from math import comb

    n = len(betas)
    total = sum(comb(n, j) for j in range(min(m, n) + 1))
    if total > max_count:
        raise ResourceError(f"max_excitations={m} yields {total} eigenvalues (> {max_count})")
    vals, counts = [np.zeros(1, dtype=complex)], [np.zeros(1, dtype=np.int16)]
    for j in range(1, min(m, n) + 1):
        idx = np.array(list(itertools.combinations(range(n), j)))
        vals.append(-2.0 * betas[idx].sum(axis=1))
        counts.append(np.full(len(idx), j, dtype=np.int16))
    return np.concatenate(vals), np.concatenate(counts)


def _enumerate_realpart_cap(betas: np.ndarray, r: float, max_count: int):
    order = np.argsort(betas.real, kind="stable")
    b = betas[order]
    rates = 2.0 * b.real
    vals, counts = [0j], [0]
    # depth-first over subsets in increasing-rate order; prune once the next rate overshoots
    stack = [(0, 0j, 0.0, 0)]
    while stack:
        start, val, rate, n = stack.pop()
        for i in range(start, len(b)):
            new_rate = rate + rates[i]
            if new_rate > r:
                break
            new_val = val - 2.0 * b[i]
            vals.append(new_val)
            counts.append(n + 1)
            if len(vals) > max_count:
                raise ResourceError(f"realpart_cap={r} yields more than {max_count} eigenvalues")
            stack.append((i + 1, new_val, new_rate, n + 1))
    return np.array(vals, dtype=complex), np.array(counts, dtype=np.int16)


def enumerate_spectrum(
    rap: RapiditySet,
    strategy: str = "full",
    max_excitations: int | None = None,
    realpart_cap: float | None = None,
    max_count: int = DEFAULT_MAX_COUNT,
) -> EnumeratedSpectrum:
    """Assemble Liouvillian eigenvalues from rapidities.

    Strategies: ``"full"`` (all ``2^(2N)`` strings, ``2N <= 24``),
    ``"max_excitations"`` (at most ``m`` ones) and ``"realpart_cap"``
    (all values with ``|Re lambda| <= r``; exact because every rapidity has
    ``Re beta >= 0``).
    """
    betas = rap.betas
    if strategy == "full":
        if len(betas) > FULL_ENUMERATION_CAP:
            raise ResourceError(f"full enumeration of 2^{len(betas)} strings exceeds cap 2^{FULL_ENUMERATION_CAP}")
        vals, counts = _enumerate_full(betas)
    elif strategy == "max_excitations":
        if max_excitations is None or max_excitations < 0:
            raise ParameterError("max_excitations strategy needs m >= 0")
        vals, counts = _enumerate_max_excitations(betas, int(max_excitations), max_count)
    elif strategy == "realpart_cap":
        if realpart_cap is None or realpart_cap < 0:
            raise ParameterError("realpart_cap strategy needs r >= 0")
        vals, counts = _enumerate_realpart_cap(betas, float(realpart_cap), max_count)
    else:
        raise ParameterError(f"unknown enumeration strategy {strategy!r}")
    order = np.lexsort((vals.imag, vals.real, counts))
    return EnumeratedSpectrum(vals[order], counts[order], strategy)


# ---------------------------------------------------------------------------
# translation-invariant chain: 2x2 blocks per momentum


def _on_site_bath(params: ChainParams) -> np.ndarray:
    T = majorana_transform(1)
    l = np.sqrt(params.gamma) * (T + params.jump_asymmetry * T.conj())
    return l.T @ l.conj()


def majorana_kblock(params: ChainParams, k: float) -> tuple[np.ndarray, np.ndarray]:
    """``(H(k), M(k))`` in the (odd, even) Majorana basis of one unit cell.

    ``H(k) = sum_r H[(0, a), (r, b)] e^{ikr}``; the bath is on-site, so
    ``M(k)`` does not depend on ``k``.  For ``jump_asymmetry = 1`` it is
    ``gamma * diag(1, 0)``.
    """
    w, D, mu = params.w, params.delta, params.mu
    s, c = np.sin(k), np.cos(k)
    off = 0.25j * (w.real * c + mu) - 0.25 * D.real * s
    H = np.array(
        [
            [0.25 * (w.imag + D.imag) * s, off],
            [np.conj(off), 0.25 * (w.imag - D.imag) * s],
        ],
        dtype=complex,
    )
    return H, _on_site_bath(params)


def kblock_l22(params: ChainParams, k: float) -> np.ndarray:
    H, M = majorana_kblock(params, k)
    return -2j * H + M + M.T


def rapidity_dispersion_pbc(params: ChainParams, k) -> tuple:
    """Closed-form rapidities ``(beta_plus, beta_minus)`` of the momentum-``k`` block.

        beta = (g/4)(|1+d|^2 + |1-d|^2) - (i/2) Im(w) sin k  +-  sqrt(Lambda) / 2
        Lambda = 4 g^2 |d|^2 - 4 i g (Re d Im D + Im d Re D) sin k
                 - |D|^2 sin^2 k - (Re(w) cos k + mu)^2

    with ``g = gamma``, ``d = jump_asymmetry`` and ``D = delta``.  The principal
    square root makes ``Re beta_plus >= Re beta_minus``.  Vectorized over ``k``.
    """
    g, d = params.gamma, params.jump_asymmetry
    w, D, mu = params.w, params.delta, params.mu
    k = np.asarray(k, dtype=float)
    s, c = np.sin(k), np.cos(k)
    centre = 0.25 * g * (abs(1 + d) ** 2 + abs(1 - d) ** 2) - 0.5j * w.imag * s
    lam = (
        4 * g * g * abs(d) ** 2
        - 4j * g * (d.real * D.imag + d.imag * D.real) * s
        - abs(D) ** 2 * s**2
        - (w.real * c + mu) ** 2
    )
    root = np.sqrt(lam + 0j)
    return centre + 0.5 * root, centre - 0.5 * root


def momentum_grid(N: int) -> np.ndarray:
    """``k = 2 pi m / N`` for ``m = -N/2+1 ... N/2`` (first Brillouin zone)."""
    m = np.arange(-(N // 2) + (1 if N % 2 == 0 else 0), N // 2 + 1)
    return 2 * np.pi * m / N


def pbc_rapidities(params: ChainParams) -> np.ndarray:
    """All ``2N`` rapidities from the closed form over the momentum grid."""
    bp, bm = rapidity_dispersion_pbc(params, momentum_grid(params.N))
    return np.concatenate([bp, bm])


def gap_scaling(template: ChainParams, N_list, tol: float = CLASSIFY_TOL) -> list[tuple[int, float]]:
    """Smallest nonzero decay rate ``Re beta`` among oscillating rapidities, per ``N``.

    Rapidities with ``Re beta < tol`` (exact dynamical-symmetry modes) and
    non-oscillating ones (``|Im beta| < tol``) are excluded.  If nothing
    remains (e.g. ``gamma = 0``) the gap is 0.
    """
    out = []
    for N in N_list:
        betas = pbc_rapidities(template.replace(N=int(N)))
        keep = (betas.real > tol) & (np.abs(betas.imag) > tol)
        out.append((int(N), float(betas.real[keep].min()) if keep.any() else 0.0))
    return out


def fit_power_law(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if len(xs) < 2:
        raise ParameterError("a power-law fit needs at least two points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ParameterError("power-law fit needs positive data")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])

"""Brute-force vectorized Liouvillian for small chains.

Vectorization is row-major, ``vec(rho)[a * d + b] = rho[a, b]``, so that
``vec(X rho Y) = (X kron Y^T) vec(rho)`` and the generator

    L[rho] = -i [H, rho] + sum_mu (2 L rho L^+ - {L^+ L, rho})

becomes ``-i (H x 1 - 1 x H^T) + sum 2 L x conj(L) - (L^+ L) x 1 - 1 x (L^+ L)^T``.
This module is the reference every faster route is checked against.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
import scipy.linalg

from .errors import NumericalError, ParameterError, ResourceError
from .model_core import ChainParams, DenseOperator, build_hamiltonian, build_jump_operators

EXACT_CAP = 6
CLASSIFY_TOL = 1e-9


class DefectiveSpectrumWarning(UserWarning):
    """The eigenbasis is too ill-conditioned for the spectral sum; propagation was used."""


@dataclass(frozen=True, eq=False)
class Superoperator:
    matrix: np.ndarray
    n_sites: int
    basis: str = "row-major"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, rho) -> np.ndarray:
        """Act on an operator given as a ``2^N x 2^N`` matrix."""
        rho = rho.data if isinstance(rho, DenseOperator) else np.asarray(rho)
        d = rho.shape[0]
        return (self.matrix @ rho.reshape(-1)).reshape(d, d)


@dataclass(frozen=True, eq=False)
class SpectralTriple:
    eigenvalue: complex
    rho_right: DenseOperator
    sigma_left: DenseOperator


def superoperator_from_operators(H: np.ndarray, jumps: Sequence[np.ndarray]) -> np.ndarray:
    d = H.shape[0]
    eye = np.eye(d)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for J in jumps:
        JdJ = J.conj().T @ J
        L += 2.0 * np.kron(J, J.conj()) - np.kron(JdJ, eye) - np.kron(eye, JdJ.T)
    return L


def build_superoperator(params: ChainParams, cap: int = EXACT_CAP) -> Superoperator:
    if params.N > cap:
        raise ResourceError(f"exact Liouvillian for N={params.N} exceeds cap {cap} (dim 4^{params.N})")
    H = build_hamiltonian(params).data
    jumps = [L.data for L in build_jump_operators(params)]
    return Superoperator(superoperator_from_operators(H, jumps), params.N)


def classify_eigenvalues(values, tol: float = CLASSIFY_TOL) -> np.ndarray:
    """Tag each eigenvalue as ``zero``, ``imaginary`` or ``decaying``."""
    values = np.asarray(values, dtype=complex)
    tags = np.full(values.shape, "decaying", dtype=object)
    on_axis = np.abs(values.real) < tol
    tags[on_axis] = "imaginary"
    tags[np.abs(values) < tol] = "zero"
    return tags


class ExactSpectrum:
    """Eigenvalues with biorthonormal right/left eigenoperators.

    Normalization is ``<sigma_k, rho_k'> = delta_kk'`` in the normalized
    Hilbert-Schmidt product.  Eigenvalues are sorted by (Re, Im); degenerate
    clusters get a Gram-Schmidt orthonormalized right basis.
    """

    def __init__(self, sup: Superoperator, eigenvalues, right, left, condition: float):
        self.superoperator = sup
        self.eigenvalues = eigenvalues
        self.right = right
        self.left = left
        self.condition = condition

    @property
    def defective(self) -> bool:
        return not np.isfinite(self.condition) or self.condition > 1e8

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def __getitem__(self, k: int) -> SpectralTriple:
        d = 2**self.superoperator.n_sites
        return SpectralTriple(
            complex(self.eigenvalues[k]),
            DenseOperator(self.right[:, k].reshape(d, d), f"rho_{k}"),
            DenseOperator(self.left[:, k].reshape(d, d), f"sigma_{k}"),
        )

    def __iter__(self) -> Iterator[SpectralTriple]:
        return (self[k] for k in range(len(self)))

    def tags(self, tol: float = CLASSIFY_TOL) -> np.ndarray:
        return classify_eigenvalues(self.eigenvalues, tol)


def _cluster_keys(values: np.ndarray, tol: float) -> list[np.ndarray]:
    order = np.lexsort((values.imag, values.real))
    groups: list[list[int]] = []
    for idx in order:
        for g in groups[-8:]:
            if abs(values[g[0]] - values[idx]) < tol:
                g.append(idx)
                break
        else:
            groups.append([idx])
    return [np.array(g) for g in groups]


def full_spectrum(sup: Superoperator, cluster_tol: float = CLASSIFY_TOL) -> ExactSpectrum:
    try:
        w, vl, vr = scipy.linalg.eig(sup.matrix, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed on {sup.dim}x{sup.dim} Liouvillian: {exc}") from exc
    dim = 2**sup.n_sites
    groups = _cluster_keys(w, cluster_tol)
    groups.sort(key=lambda g: (w[g].real.mean(), w[g].imag.mean()))
    vals, R, Lv = [], [], []
    for g in groups:
        g = np.sort(g)
        r, _ = np.linalg.qr(vr[:, g])
        left = vl[:, g]
        overlap = left.conj().T @ r / dim
        try:
            left = left @ np.linalg.inv(overlap).conj().T
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"left/right eigenvectors are not biorthogonalizable near lambda={w[g[0]]:.6g}"
            ) from exc
        vals.extend(w[g])
        R.append(r)
        Lv.append(left)
    R = np.hstack(R)
    Lv = np.hstack(Lv)
    # every right vector has unit Euclidean norm, so large left norms flag near-defectiveness
    condition = float(np.max(np.linalg.norm(Lv, axis=0)) / np.sqrt(dim))
    return ExactSpectrum(sup, np.array(vals), R, Lv, condition)


def _as_matrix(x) -> np.ndarray:
    return x.data if isinstance(x, DenseOperator) else np.asarray(x, dtype=complex)


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ParameterError("density matrix must be square")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ParameterError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ParameterError(f"density matrix has trace {np.trace(rho):.6g}")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise ParameterError("density matrix is not positive semidefinite")


def propagate_density_matrix(
    params: ChainParams | Superoperator,
    rho0,
    t_grid: Sequence[float],
    check_physical: bool = True,
) -> list[DenseOperator]:
    """``rho(t) = exp(t L) rho0`` on each grid point (matrix exponentials of the step sizes)."""
    sup = params if isinstance(params, Superoperator) else build_superoperator(params)
    rho0 = _as_matrix(rho0)
    if check_physical:
        check_density_matrix(rho0)
    d = rho0.shape[0]
    times = np.asarray(t_grid, dtype=float)
    order = np.argsort(times, kind="stable")
    out: list[DenseOperator | None] = [None] * len(times)
    steps: dict[float, np.ndarray] = {}
    vec = rho0.reshape(-1).astype(complex)
    t_prev = 0.0
    for idx in order:
        dt = float(times[idx] - t_prev)
        if dt != 0.0:
            key = round(dt, 14)
            if key not in steps:
                steps[key] = scipy.linalg.expm(dt * sup.matrix)
            vec = steps[key] @ vec
        t_prev = float(times[idx])
        out[idx] = DenseOperator(vec.reshape(d, d).copy(), f"rho(t={times[idx]:g})")
    return out


def observable_trajectory(spectrum: ExactSpectrum, O, rho0, t):
    """``tr(O^+ rho(t)) = sum_k exp(t lambda_k) tr(O^+ rho_k) <sigma_k, rho0>``.

    Falls back to direct propagation, with a :class:`DefectiveSpectrumWarning`,
    when the eigenbasis is too ill-conditioned.
    """
    O = _as_matrix(O)
    rho0 = _as_matrix(rho0)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if spectrum.defective:
        warnings.warn(
            f"eigenbasis condition {spectrum.condition:.3g}; using propagation",
            DefectiveSpectrumWarning,
            stacklevel=2,
        )
        states = propagate_density_matrix(spectrum.superoperator, rho0, times, check_physical=False)
        vals = np.array([np.vdot(O, s.data) for s in states])
    else:
        d = rho0.shape[0]
        amp_out = O.reshape(-1).conj() @ spectrum.right
        amp_in = spectrum.left.conj().T @ rho0.reshape(-1) / d
        vals = np.exp(np.outer(times, spectrum.eigenvalues)) @ (amp_out * amp_in)
    return vals[0] if np.ndim(t) == 0 else vals


def expectation(O, rho) -> complex:
    """``tr(O rho)``."""
    return complex(np.trace(_as_matrix(O) @ _as_matrix(rho)))

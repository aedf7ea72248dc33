"""Fock-space construction of the interacting Kitaev chain and its symmetry operators.

Basis states are ordered by binary occupation with site 1 as the least
significant bit, and every Jordan-Wigner string attaches to the lower-indexed
sites, so that ``c_j = Z_1 ... Z_{j-1} a_j`` with ``a = [[0, 1], [0, 0]]``.
Operator inner products use the normalized Hilbert-Schmidt form
``<A, B> = tr(A^+ B) / 2^N`` (the identity has unit norm).

The Hamiltonian is

    H = -1/2 sum_i [w c_i^+ c_{i+1} + w* c_{i+1}^+ c_i + D c_i c_{i+1} + D* c_{i+1}^+ c_i^+]
        - mu sum_i (n_i - 1/2) + sum_terms V prod_m (c_m + c_m^+)

with periodic boundary conditions ``c_{N+1} = c_1``.  With this sign and
normalization choice the quasienergy is
``E_k = sqrt(|D sin k|^2 + (w cos k + mu)^2)`` and the even-Majorana mode at
``cos(kappa) = -mu/w`` is an exact ladder operator.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import ConsistencyError, ParameterError, PreconditionError, ResourceError

FOCK_CAP = 12
PARITY_TOL = 1e-12

_ANNIHILATE = np.array([[0, 1], [0, 0]], dtype=complex)
_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
_EYE2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class ChainParams:
    """Physical parameters of the driven-dissipative chain.

    ``interactions`` is a sequence of ``(V, sites)`` pairs, ``sites`` being an
    even-length tuple of distinct 1-based site indices; the term is
    ``V * prod_m gamma_{2m-1}``, made Hermitian as in :func:`interaction_term`.
    Jump operators are ``L_j = sqrt(gamma) (c_j + jump_asymmetry * c_j^+)``;
    ``jump_asymmetry = 1`` gives ``sqrt(gamma) * gamma_{2j-1}``.
    """

    N: int
    w: complex = 1.0
    delta: complex = 1j
    mu: float = 0.0
    gamma: float = 1.0
    jump_asymmetry: complex = 1.0
    interactions: tuple = ()
    boundary: str = "periodic"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ParameterError(f"N must be an integer >= 2, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "w", complex(self.w))
        object.__setattr__(self, "delta", complex(self.delta))
        object.__setattr__(self, "jump_asymmetry", complex(self.jump_asymmetry))
        if np.iscomplexobj(self.mu) and np.imag(self.mu) != 0:
            raise ParameterError("mu must be real")
        object.__setattr__(self, "mu", float(np.real(self.mu)))
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.gamma < 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        if self.boundary != "periodic":
            raise ParameterError("only periodic boundary conditions are supported")
        terms = []
        for coeff, sites in self.interactions:
            sites = tuple(int(s) for s in sites)
            if len(sites) == 0 or len(sites) % 2:
                raise ParameterError(f"interaction site tuple must have even length, got {sites}")
            if len(set(sites)) != len(sites):
                raise ParameterError(f"interaction sites must be distinct, got {sites}")
            if min(sites) < 1 or max(sites) > self.N:
                raise ParameterError(f"interaction sites {sites} outside 1..{self.N}")
            terms.append((complex(coeff), sites))
        object.__setattr__(self, "interactions", tuple(terms))

    @property
    def is_quadratic(self) -> bool:
        return not self.interactions

    def quadratic(self) -> "ChainParams":
        """The same chain with every interaction term removed."""
        return dataclasses.replace(self, interactions=())

    def replace(self, **changes) -> "ChainParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        def cplx(z):
            return [z.real, z.imag]

        return {
            "N": self.N,
            "w": cplx(self.w),
            "delta": cplx(self.delta),
            "mu": self.mu,
            "gamma": self.gamma,
            "jump_asymmetry": cplx(self.jump_asymmetry),
            "interactions": [[cplx(v), list(s)] for v, s in self.interactions],
            "boundary": self.boundary,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainParams":
        def cplx(x):
            return complex(x[0], x[1]) if isinstance(x, (list, tuple)) else complex(x)

        return cls(
            N=d["N"],
            w=cplx(d["w"]),
            delta=cplx(d["delta"]),
            mu=d["mu"],
            gamma=d["gamma"],
            jump_asymmetry=cplx(d.get("jump_asymmetry", 1.0)),
            interactions=tuple((cplx(v), tuple(s)) for v, s in d.get("interactions", [])),
            boundary=d.get("boundary", "periodic"),
        )


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """A labeled ``2^N x 2^N`` matrix with a declared fermion-parity grade.

    ``fermion_parity`` is ``"even"``, ``"odd"`` or ``"mixed"``; even/odd are
    checked against the total parity at construction.
    """

    data: np.ndarray
    label: str = ""
    fermion_parity: str = "mixed"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ParameterError(f"operator must be square, got shape {data.shape}")
        dim = data.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise ParameterError(f"operator dimension {dim} is not a power of two")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.fermion_parity not in ("even", "odd", "mixed"):
            raise ParameterError(f"unknown parity flag {self.fermion_parity!r}")
        if self.fermion_parity != "mixed":
            p = _parity_diagonal(self.n_sites)
            # (P A -/+ A P)_{ab} = (p_a -/+ p_b) A_{ab}
            sign = 1.0 if self.fermion_parity == "even" else -1.0
            defect = np.abs((p[:, None] - sign * p[None, :]) * data).max()
            scale = max(1.0, np.abs(data).max())
            if defect > PARITY_TOL * scale:
                raise ConsistencyError(
                    f"{self.label or 'operator'} declared {self.fermion_parity} "
                    f"but parity defect is {defect:.3e}"
                )

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_sites(self) -> int:
        return self.dim.bit_length() - 1

    def dag(self) -> "DenseOperator":
        return DenseOperator(self.data.conj().T, f"({self.label})^+", self.fermion_parity)

    def relabel(self, label: str) -> "DenseOperator":
        return DenseOperator(self.data, label, self.fermion_parity, dict(self.meta))


# --------------------------------------------------------------------------- helpers


def hs_inner(a, b) -> complex:
    """Normalized Hilbert-Schmidt inner product tr(a^+ b) / dim."""
    a, b = _array(a), _array(b)
    return np.vdot(a, b) / a.shape[0]


def hs_norm(a) -> float:
    return float(np.sqrt(max(hs_inner(a, a).real, 0.0)))


def commutator(a, b) -> np.ndarray:
    a, b = _array(a), _array(b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = _array(a), _array(b)
    return a @ b + b @ a


def _array(x) -> np.ndarray:
    return x.data if isinstance(x, DenseOperator) else np.asarray(x)


def _kron_sites(site_ops: Sequence[np.ndarray]) -> np.ndarray:
    # site_ops[0] is site 1 (least significant bit), so it is the last kron factor
    return reduce(np.kron, list(site_ops)[::-1])


def _check_cap(N: int, cap: int) -> None:
    if N > cap:
        raise ResourceError(f"Fock construction for N={N} exceeds cap {cap} (dim 2^{N})")


@lru_cache(maxsize=None)
def _parity_diagonal(N: int) -> np.ndarray:
    occ = np.array([bin(s).count("1") for s in range(2**N)])
    p = (-1.0) ** occ
    p.setflags(write=False)
    return p


@lru_cache(maxsize=8)
def _annihilators(N: int) -> tuple:
    ops = []
    for j in range(N):
        site_ops = [_PAULI_Z] * j + [_ANNIHILATE] + [_EYE2] * (N - j - 1)
        c = _kron_sites(site_ops)
        c.setflags(write=False)
        ops.append(c)
    return tuple(ops)


# --------------------------------------------------------------------------- builders


def build_fermion_operators(params: ChainParams | int, cap: int = FOCK_CAP) -> list[DenseOperator]:
    """Annihilators ``c_1 .. c_N`` as Jordan-Wigner strings."""
    N = params if isinstance(params, int) else params.N
    if N < 1:
        raise ParameterError("need at least one site")
    _check_cap(N, cap)
    return [DenseOperator(c, f"c_{j + 1}", "odd") for j, c in enumerate(_annihilators(N))]


def build_majoranas(params: ChainParams | int, cap: int = FOCK_CAP) -> list[DenseOperator]:
    """``gamma_1 .. gamma_2N`` with gamma_{2j-1} = c_j + c_j^+, gamma_{2j} = i(c_j - c_j^+)."""
    out = []
    for j, c in enumerate(build_fermion_operators(params, cap), start=1):
        cd = c.data.conj().T
        out.append(DenseOperator(c.data + cd, f"gamma_{2 * j - 1}", "odd"))
        out.append(DenseOperator(1j * (c.data - cd), f"gamma_{2 * j}", "odd"))
    return out


def build_parity(params: ChainParams | int, first: int = 1, last: int | None = None) -> DenseOperator:
    """Sign-valued parity string ``prod_{q=first}^{last} (1 - 2 n_q)``.

    The total parity P_{1,N} squares to one.  The literal ``m_q = 1/2 - n_q``
    factors differ from these by ``(1/2)`` per site; see :func:`literal_parity_string`.
    """
    N = params if isinstance(params, int) else params.N
    last = N if last is None else last
    site_ops = [_PAULI_Z if first <= q <= last else _EYE2 for q in range(1, N + 1)]
    return DenseOperator(_kron_sites(site_ops), f"P_{{{first},{last}}}", "even")


def literal_parity_string(params: ChainParams | int, first: int, last: int) -> np.ndarray:
    """``prod_{q=first}^{last} (1/2 - n_q)`` (identity when the range is empty)."""
    N = params if isinstance(params, int) else params.N
    m = np.diag([0.5, -0.5]).astype(complex)
    return _kron_sites([m if first <= q <= last else _EYE2 for q in range(1, N + 1)])


def _pbc_bonds(N: int) -> Iterable[tuple[int, int]]:
    for i in range(N):
        yield i, (i + 1) % N


def interaction_term(params: ChainParams, coeff: complex, sites: Sequence[int]) -> np.ndarray:
    """Hermitian interaction term built on ``prod_m gamma_{2m-1}``.

    A product of ``n`` distinct Majoranas is Hermitian for ``n = 0, 1 mod 4``
    and anti-Hermitian otherwise; in the latter case it is multiplied by ``i``
    (e.g. ``i gamma_1 gamma_3``).  The term is then the Hermitian part
    ``(T + T^+) / 2`` of ``T = V * product``, i.e. ``Re(V) * product``.
    """
    maj = build_majoranas(params)
    prod = reduce(np.matmul, [maj[2 * (s - 1)].data for s in sites])
    n = len(sites)
    if (n * (n - 1) // 2) % 2:
        prod = 1j * prod
    term = coeff * prod
    return 0.5 * (term + term.conj().T)


def build_hamiltonian(params: ChainParams, cap: int = FOCK_CAP) -> DenseOperator:
    """Dense Hamiltonian of the chain including interaction terms."""
    c = [op.data for op in build_fermion_operators(params, cap)]
    cd = [x.conj().T for x in c]
    dim = 2**params.N
    w, D, mu = params.w, params.delta, params.mu
    H = np.zeros((dim, dim), dtype=complex)
    for i, j in _pbc_bonds(params.N):
        H += -0.5 * (w * cd[i] @ c[j] + np.conj(w) * cd[j] @ c[i])
        H += -0.5 * (D * c[i] @ c[j] + np.conj(D) * cd[j] @ cd[i])
    eye = np.eye(dim)
    for i in range(params.N):
        H += -mu * (cd[i] @ c[i] - 0.5 * eye)
    for coeff, sites in params.interactions:
        H += interaction_term(params, coeff, sites)
    defect = np.abs(H - H.conj().T).max()
    if defect > 1e-12 * max(1.0, np.abs(H).max()):
        raise ConsistencyError(f"Hamiltonian is not Hermitian (defect {defect:.3e})")
    return DenseOperator(H, "H", "even")


def _require_mod4(params: ChainParams, what: str) -> None:
    if params.N % 4:
        raise PreconditionError(f"{what} requires N % 4 == 0, got N={params.N}")


def build_modulated_A0(params: ChainParams) -> DenseOperator:
    """``A_0 = sum_x i^x (c_x + c_x^+) = sum_x i^x gamma_{2x-1}``."""
    _require_mod4(params, "A_0")
    maj = build_majoranas(params)
    data = sum((1j**x) * maj[2 * x - 2].data for x in range(1, params.N + 1))
    return DenseOperator(data, "A_0", "odd")


def build_nonlocal_A(params: ChainParams) -> DenseOperator:
    """Normalized ``A = s * sum_x i^x (b_x + b_x^+)`` with ``b_x = P_{1,x-1} c_x P_{x,N}``.

    The parity strings use the literal ``1/2 - n_q`` factors, so the raw sum has
    ``{A, A^+} = 2N 4^{-N}``; the positive scale ``s`` restoring ``{A, A^+} = 1``
    is stored in ``meta["normalization"]``.
    """
    _require_mod4(params, "A")
    N = params.N
    c = [op.data for op in build_fermion_operators(params)]
    raw = np.zeros((2**N, 2**N), dtype=complex)
    for x in range(1, N + 1):
        b = literal_parity_string(N, 1, x - 1) @ c[x - 1] @ literal_parity_string(N, x, N)
        raw += (1j**x) * (b + b.conj().T)
    acomm = anticommutator(raw, raw.conj().T)
    level = hs_inner(np.eye(2**N), acomm).real
    if level <= 0:
        raise ConsistencyError("raw A has vanishing norm")
    scale = 1.0 / np.sqrt(level)
    return DenseOperator(scale * raw, "A", "odd", {"normalization": scale})


def build_semilocal_spin_A(params: ChainParams) -> DenseOperator:
    """Spin-basis form ``sum_j i^j sigma^x_j prod_{q>j} sigma^z_q`` built from raw Pauli strings."""
    _require_mod4(params, "A~")
    N = params.N
    data = np.zeros((2**N, 2**N), dtype=complex)
    for j in range(1, N + 1):
        site_ops = [_EYE2] * (j - 1) + [_PAULI_X] + [_PAULI_Z] * (N - j)
        data += (1j**j) * _kron_sites(site_ops)
    return DenseOperator(data, "A~", "odd")


def build_charge_Q(params: ChainParams) -> DenseOperator:
    """``Q = A^+ A`` for the normalized A (a projector)."""
    A = build_nonlocal_A(params).data
    return DenseOperator(A.conj().T @ A, "Q", "even")


def build_symmetry_S(params: ChainParams, angle: float = np.pi) -> DenseOperator:
    """``S = exp(i angle Q)``; the default angle pi gives eigenvalues +-1."""
    Q = build_charge_Q(params).data
    return DenseOperator(scipy.linalg.expm(1j * angle * Q), "S", "even")


def build_jump_operators(params: ChainParams) -> list[DenseOperator]:
    """``L_j = sqrt(gamma) (c_j + delta c_j^+)`` for j = 1..N."""
    if params.gamma < 0:
        raise ParameterError("gamma must be >= 0")
    g = np.sqrt(params.gamma)
    out = []
    for j, c in enumerate(build_fermion_operators(params), start=1):
        data = g * (c.data + params.jump_asymmetry * c.data.conj().T)
        out.append(DenseOperator(data, f"L_{j}", "odd"))
    return out


def even_majorana_mode(params: ChainParams, kappa: float) -> DenseOperator:
    """``d_kappa = sum_j exp(-i kappa j) gamma_{2j}``."""
    maj = build_majoranas(params)
    data = sum(np.exp(-1j * kappa * j) * maj[2 * j - 1].data for j in range(1, params.N + 1))
    return DenseOperator(data, f"d_{kappa:.4f}", "odd")


def verify_eigenoperator(H, A) -> tuple[complex, float]:
    """Least-squares ``omega`` in ``[H, A] = omega A`` and the relative residual.

    Returns ``omega = <A, [H, A]> / <A, A>`` and ``||[H, A] - omega A|| / ||A||``.
    """
    h, a = _array(H), _array(A)
    if h.shape != a.shape:
        raise PreconditionError(f"shape mismatch {h.shape} vs {a.shape}")
    norm2 = hs_inner(a, a).real
    if norm2 == 0:
        raise PreconditionError("cannot fit an eigenvalue for the zero operator")
    comm = commutator(h, a)
    omega = hs_inner(a, comm) / norm2
    residual = hs_norm(comm - omega * a) / np.sqrt(norm2)
    return complex(omega), float(residual)


# --------------------------------------------------------------------------- identity suite


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float | None
    passed: bool | None
    note: str = ""

    @property
    def status(self) -> str:
        if self.passed is None:
            return "skipped"
        return "pass" if self.passed else "FAIL"


def identity_suite(params: ChainParams, tol: float = 1e-10) -> list[CheckResult]:
    """Evaluate the operator identities of the model at the given parameters.

    Checks that need ``N % 4 == 0`` are reported as skipped otherwise.  Every
    residual is a normalized Hilbert-Schmidt norm.
    """
    results: list[CheckResult] = []

    def record(name, residual, note=""):
        results.append(CheckResult(name, float(residual), bool(residual < tol), note))

    N = params.N
    eye = np.eye(2**N)
    c = [op.data for op in build_fermion_operators(params)]
    worst = 0.0
    for j in range(N):
        for m in range(N):
            worst = max(worst, hs_norm(anticommutator(c[j], c[m])))
            target = eye if j == m else 0.0
            worst = max(worst, hs_norm(anticommutator(c[j], c[m].conj().T) - target))
    record("CAR {c_j, c_m^+} = delta_jm", worst)

    maj = [g.data for g in build_majoranas(params)]
    worst = max(
        hs_norm(anticommutator(maj[a], maj[b]) - (2 * eye if a == b else 0.0))
        for a in range(2 * N)
        for b in range(2 * N)
    )
    record("Majorana {gamma_j, gamma_m} = 2 delta_jm", worst)

    H = build_hamiltonian(params).data
    H0 = build_hamiltonian(params.quadratic()).data
    P = build_parity(params).data
    jumps = [L.data for L in build_jump_operators(params)]

    record("[H0, P_1N] = 0", hs_norm(commutator(H0, P)))
    record("{L_j, P_1N} = 0", max(hs_norm(anticommutator(L, P)) for L in jumps))

    kappa = -np.pi / 2
    d = even_majorana_mode(params, kappa).data
    if params.interactions:
        worst = max(
            hs_norm(commutator(interaction_term(params, v, s), d)) for v, s in params.interactions
        )
        record("[V term, d_kappa] = 0", worst)

    skipped = []
    if N % 4 == 0:
        A0 = build_modulated_A0(params)
        # A0 is a dynamical symmetry of the quadratic part only
        omega0, res0 = verify_eigenoperator(H0, A0)
        record("[H0, A0] = omega A0", res0, f"omega = {omega0:.12g}")
        A = build_nonlocal_A(params)
        a = A.data
        omega, res = verify_eigenoperator(H, a)
        record("[H, A] = omega A", res, f"omega = {omega:.12g}")
        record("A^2 = 0", hs_norm(a @ a))
        record("{A, A^+} = 1", hs_norm(anticommutator(a, a.conj().T) - eye),
               f"scale = {A.meta['normalization']:.6g}")
        worst = max(max(hs_norm(commutator(a, L)), hs_norm(commutator(a.conj().T, L))) for L in jumps)
        record("[A, L_j] = [A^+, L_j] = 0", worst)
        S = build_symmetry_S(params).data
        record("[H, S] = 0", hs_norm(commutator(H, S)))
        worst = max(hs_norm(commutator(S, L)) for L in jumps)
        record("[S, L_j] = 0", worst)
    else:
        skipped = ["[H0, A0] = omega A0", "[H, A] = omega A", "A^2 = 0", "{A, A^+} = 1",
                   "[A, L_j] = [A^+, L_j] = 0", "[H, S] = 0", "[S, L_j] = 0"]
    for name in skipped:
        results.append(CheckResult(name, None, None, "requires N % 4 == 0"))
    return results

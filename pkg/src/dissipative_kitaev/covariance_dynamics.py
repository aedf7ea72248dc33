"""Two-point correlation dynamics of the quadratic dissipative chain.

The state is carried as the Majorana correlation ``C_ab = <w_a w_b>``, written
``C = 1 + Omega`` with ``Omega`` antisymmetric.  From the adjoint Lindblad
equation ``dO/dt = i[H, O] + sum_mu (2 L^+ O L - {L^+ L, O})`` one finds the
closed, linear-affine flow

    dOmega/dt = -(Y Omega + Omega Y^T) + c,     Y = 4i H + 4 Re M,   c = -8i Im M,

with ``H`` and ``M`` the Majorana-basis matrices of :mod:`third_quantization`.
For Hermitian jumps (``jump_asymmetry`` real) ``c = 0``.  ``Omega = 0`` is the
infinite-temperature state ``F = 0``, ``G = 1/2``.

The physical correlators are ``F = <c_m c_n> = T C T^T`` and
``G = <c_m^+ c_n> = conj(T) C T^T`` for ``c = T w``; conversely
``<Psi Psi^T> = [[F, 1 - G^T], [G, F^+]]`` for ``Psi = (c, c^+)``.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .errors import AnalysisError, NumericalError, ParameterError, ParseError, PreconditionError
from .model_core import ChainParams
from .third_quantization import majorana_coefficients, majorana_transform

RTOL = 1e-9
ATOL = 1e-10
STRUCTURE_TOL = 1e-10
PHYSICAL_TOL = 1e-8
SPECTRAL_CONDITION_CAP = 1e8
FILE_TAG = "F=<c_m c_n>,G=<c_m^+ c_n>"


class SpectralFallbackWarning(UserWarning):
    """The eigenbasis propagator was ill-conditioned; adaptive integration was used instead."""


def _psi_to_majorana(N: int) -> np.ndarray:
    """``U`` with ``w = U Psi`` for ``Psi = (c_1..c_N, c_1^+..c_N^+)``."""
    U = np.zeros((2 * N, 2 * N), dtype=complex)
    j = np.arange(N)
    U[2 * j, j] = 1.0
    U[2 * j, N + j] = 1.0
    U[2 * j + 1, j] = 1j
    U[2 * j + 1, N + j] = -1j
    return U


@dataclass(frozen=True, eq=False)
class CovarianceState:
    F: np.ndarray
    G: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        F = np.array(self.F, dtype=complex)
        G = np.array(self.G, dtype=complex)
        if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape != G.shape:
            raise ParameterError("F and G must be square matrices of equal size")
        scale = max(1.0, np.abs(F).max(), np.abs(G).max())
        if np.abs(F + F.T).max() > STRUCTURE_TOL * scale:
            raise ParameterError("F must be antisymmetric")
        if np.abs(G - G.conj().T).max() > STRUCTURE_TOL * scale:
            raise ParameterError("G must be Hermitian")
        F.setflags(write=False)
        G.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "t", float(self.t))

    @property
    def N(self) -> int:
        return self.F.shape[0]

    def to_majorana(self) -> np.ndarray:
        """``Omega = <w w^T> - 1`` (with ``<c^+ c^+> = F^+``)."""
        N = self.N
        eye = np.eye(N)
        psi = np.block([[self.F, eye - self.G.T], [self.G, self.F.conj().T]])
        U = _psi_to_majorana(N)
        return U @ psi @ U.T - np.eye(2 * N)

    @classmethod
    def from_majorana(cls, omega: np.ndarray, t: float = 0.0) -> "CovarianceState":
        N = omega.shape[0] // 2
        T = majorana_transform(N)
        C = np.eye(2 * N) + omega
        F = T @ C @ T.T
        G = T.conj() @ C @ T.T
        # remove rounding-level asymmetry so the structural checks are exact
        return cls(0.5 * (F - F.T), 0.5 * (G + G.conj().T), t)

    def physicality(self) -> tuple[bool, float]:
        """Whether ``Omega`` is Hermitian with spectrum in ``[-1, 1]``, plus its spectral radius."""
        om = self.to_majorana()
        herm = np.abs(om - om.conj().T).max() <= PHYSICAL_TOL * max(1.0, np.abs(om).max())
        radius = float(np.abs(np.linalg.eigvals(om)).max())
        return bool(herm and radius <= 1 + PHYSICAL_TOL), radius

    @property
    def is_physical(self) -> bool:
        return self.physicality()[0]


def state_from_density_matrix(rho: np.ndarray) -> CovarianceState:
    """Two-point functions of a small-N density matrix (``tr(c_m c_n rho)`` etc.)."""
    from .model_core import build_fermion_operators

    N = int(round(np.log2(rho.shape[0])))
    c = [op.data for op in build_fermion_operators(N)]
    F = np.array([[np.trace(c[m] @ c[n] @ rho) for n in range(N)] for m in range(N)])
    G = np.array([[np.trace(c[m].conj().T @ c[n] @ rho) for n in range(N)] for m in range(N)])
    return CovarianceState(F, G)


@dataclass(frozen=True, eq=False)
class CovarianceGenerator:
    """``dOmega/dt = -(Y Omega + Omega Y^T) + c`` in the Majorana basis."""

    Y: np.ndarray
    c: np.ndarray
    n_sites: int

    def rhs(self, omega: np.ndarray) -> np.ndarray:
        return -(self.Y @ omega + omega @ self.Y.T) + self.c

    def __call__(self, state: CovarianceState) -> tuple[np.ndarray, np.ndarray]:
        """``(dF/dt, dG/dt)`` at ``state``."""
        d = self.rhs(state.to_majorana())
        T = majorana_transform(self.n_sites)
        return T @ d @ T.T, T.conj() @ d @ T.T

    @property
    def homogeneous(self) -> bool:
        return not np.any(self.c)


def derive_generator(params: ChainParams) -> CovarianceGenerator:
    if params.interactions:
        raise PreconditionError("two-point functions do not close for the interacting model")
    form = majorana_coefficients(params)
    M = form.M_mat
    Y = 4j * form.H_mat + 4 * M.real
    c = -8j * M.imag
    if np.isrealobj(Y) or np.abs(Y.imag).max() < 1e-15:
        Y = Y.real
    return CovarianceGenerator(Y, c, params.N)


# --------------------------------------------------------------------------- observables


_OBS_RE = re.compile(r"^\s*([FG])\s*\[\s*(\d+)\s*,\s*(\d+)\s*\]\s*$")


def parse_observable(label: str) -> tuple[str, int, int]:
    """``"F[1,2]"`` -> ``<c_1 c_2>``, ``"G[1,2]"`` -> ``<c_1^+ c_2>`` (1-based sites)."""
    m = _OBS_RE.match(label)
    if not m:
        raise ParseError(f"observable must look like F[m,n] or G[m,n], got {label!r}")
    return m.group(1), int(m.group(2)), int(m.group(3))


def _readout_vectors(N: int, label: str) -> tuple[np.ndarray, np.ndarray, complex]:
    """``(r, s, offset)`` with ``value = r^T Omega s + offset``."""
    kind, m, n = parse_observable(label)
    if not (1 <= m <= N and 1 <= n <= N):
        raise ParameterError(f"observable {label} outside the chain of {N} sites")
    T = majorana_transform(N)
    r = T[m - 1].conj() if kind == "G" else T[m - 1]
    s = T[n - 1]
    return r, s, complex(r @ s)


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    times: np.ndarray
    values: dict  # label -> complex array
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ParameterError("trajectory time grid must be strictly increasing")
        for label, v in self.values.items():
            if not np.all(np.isfinite(v)):
                raise NumericalError(f"non-finite values in trajectory {label}")

    @property
    def labels(self) -> list[str]:
        return list(self.values)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.values[label]


def output_grid(t_max: float, dt_out: float) -> np.ndarray:
    if t_max <= 0 or dt_out <= 0:
        raise ParameterError("t_max and dt_out must be positive")
    n = int(round(t_max / dt_out))
    if abs(n * dt_out - t_max) > 1e-9 * t_max:
        raise ParameterError(f"t_max={t_max} is not a multiple of dt_out={dt_out}")
    return np.linspace(0.0, t_max, n + 1)


def _spectral_values(gen: CovarianceGenerator, omega0: np.ndarray, times: np.ndarray, readouts):
    """Exact propagation in the eigenbasis of ``Y``; ``None`` if it is ill-conditioned."""
    d, V = scipy.linalg.eig(gen.Y)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > SPECTRAL_CONDITION_CAP:
        return None, cond
    Vi = np.linalg.inv(V)
    K0 = Vi @ omega0 @ Vi.T
    rates = d[:, None] + d[None, :]
    if gen.homogeneous:
        Kc = None
    else:
        Kc = Vi @ gen.c @ Vi.T
    out = {}
    for label, (r, s, off) in readouts.items():
        rv, sv = r @ V, s @ V
        W0 = rv[:, None] * sv[None, :] * K0
        vals = np.empty(len(times), dtype=complex)
        Wc = None if Kc is None else rv[:, None] * sv[None, :] * Kc
        for i, t in enumerate(times):
            e = np.exp(-d * t)
            v = e @ W0 @ e
            if Wc is not None:
                small = np.abs(rates * t) < 1e-8
                safe = np.where(small, 1.0, rates)
                grow = np.where(small, t * (1 - 0.5 * rates * t), -np.expm1(-rates * t) / safe)
                v += np.sum(Wc * grow)
            vals[i] = v + off
        out[label] = vals
    return out, cond


def integrate(
    state0: CovarianceState,
    params: ChainParams,
    t_max: float,
    dt_out: float = 0.1,
    observables: Sequence[str] = ("F[1,2]", "G[1,2]"),
    method: str = "DOP853",
    rtol: float = RTOL,
    atol: float = ATOL,
    return_final_state: bool = False,
):
    """Evolve the correlations and sample ``observables`` on a uniform grid.

    ``method`` is an adaptive embedded Runge-Kutta pair (``"DOP853"`` or
    ``"RK45"``, via :func:`scipy.integrate.solve_ivp` with dense output) or
    ``"spectral"``, the exact eigenbasis solution of the linear flow (falling
    back to DOP853 with a warning when the eigenbasis is ill-conditioned).
    """
    if state0.N != params.N:
        raise ParameterError(f"state has N={state0.N}, parameters have N={params.N}")
    gen = derive_generator(params)
    times = output_grid(t_max, dt_out)
    n = 2 * params.N
    omega0 = state0.to_majorana()
    readouts = {label: _readout_vectors(params.N, label) for label in observables}
    meta = {"params": params.to_dict(), "method": method, "rtol": rtol, "atol": atol, "t0": state0.t}
    values = None
    final = None
    if method == "spectral":
        values, cond = _spectral_values(gen, omega0, times, readouts)
        meta["eigenbasis_condition"] = float(cond)
        if values is None:
            warnings.warn(
                f"eigenbasis condition {cond:.3g}; integrating with DOP853 instead",
                SpectralFallbackWarning,
                stacklevel=2,
            )
            method = "DOP853"
            meta["method"] = "DOP853 (spectral fallback)"
    if values is None:
        if method not in ("DOP853", "RK45"):
            raise ParameterError(f"unknown integration method {method!r}")

        def rhs(_t, y):
            return gen.rhs(y.reshape(n, n)).reshape(-1)

        sol = solve_ivp(
            rhs, (0.0, times[-1]), omega0.reshape(-1).astype(complex),
            method=method, t_eval=times, rtol=rtol, atol=atol,
        )
        if sol.status != 0:
            raise NumericalError(
                f"integration stopped at t={sol.t[-1] if sol.t.size else 0:.6g}: {sol.message} "
                f"(possible stiffness; ||Y|| = {np.linalg.norm(gen.Y, 2):.3g})"
            )
        meta["n_rhs"] = int(sol.nfev)
        Y = sol.y.reshape(n, n, -1)
        values = {label: np.einsum("a,abt,b->t", r, Y, s) + off for label, (r, s, off) in readouts.items()}
        if return_final_state:
            final = CovarianceState.from_majorana(Y[:, :, -1], state0.t + times[-1])
    elif return_final_state:
        final = propagate_state(state0, params, times[-1])
    rec = TrajectoryRecord(state0.t + times, values, meta)
    return (rec, final) if return_final_state else rec


def propagate_state(state0: CovarianceState, params: ChainParams, t: float) -> CovarianceState:
    """Full ``(F, G)`` at time ``t`` via the matrix exponential of the vectorized flow."""
    gen = derive_generator(params)
    n = 2 * params.N
    omega0 = state0.to_majorana()
    E = scipy.linalg.expm(-t * gen.Y)
    omega = E @ omega0 @ E.T
    if not gen.homogeneous:
        # integrate the constant source with the augmented-matrix trick on the vectorized system
        A = -(np.kron(gen.Y, np.eye(n)) + np.kron(np.eye(n), gen.Y))
        aug = np.zeros((n * n + 1, n * n + 1), dtype=complex)
        aug[: n * n, : n * n] = A
        aug[: n * n, -1] = gen.c.reshape(-1)
        v = scipy.linalg.expm(t * aug)[: n * n, -1]
        omega = omega + v.reshape(n, n)
    return CovarianceState.from_majorana(omega, state0.t + t)


# --------------------------------------------------------------------------- initial states


def uniform_pair_state(N: int) -> CovarianceState:
    """``<c_i c_j> = 1 + i`` for ``i < j`` (antisymmetrized) and ``<c_i c_i^+> = 0``, i.e. ``G = 1``."""
    F = np.triu(np.full((N, N), 1 + 1j), 1)
    return CovarianceState(F - F.T, np.eye(N, dtype=complex))


def random_state(N: int, seed: int, radius: float = 0.95) -> CovarianceState:
    """Reproducible random Gaussian state: ``Omega = i A`` with ``A`` real antisymmetric.

    ``A`` is built from standard-normal entries and rescaled to spectral norm
    ``radius < 1``, so the state is physical.
    """
    if not 0 <= radius <= 1:
        raise ParameterError("radius must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((2 * N, 2 * N))
    A = X - X.T
    norm = np.linalg.norm(A, 2)
    A = A * (radius / norm) if norm > 0 else A
    return CovarianceState.from_majorana(1j * A)


def save_state(state: CovarianceState, path) -> None:
    """Plain-text ``F`` and ``G`` blocks (``re im`` pairs, round-trip exact)."""
    N = state.N
    lines = [f"# N={N} convention={FILE_TAG}"]
    for name, mat in (("F", state.F), ("G", state.G)):
        lines.append(name)
        for row in mat:
            lines.append(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_state(path) -> CovarianceState:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read initial state {path}: {exc}") from exc
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty file")
    m = re.match(r"^#\s*N=(\d+)\s+convention=(.+?)\s*$", lines[0])
    if not m:
        raise ParseError(f"{path}: header must read '# N=<int> convention=<tag>'")
    N, tag = int(m.group(1)), m.group(2)
    if tag != FILE_TAG:
        raise ParseError(f"{path}: unsupported convention {tag!r}")
    blocks = {}
    pos = 1
    for name in ("F", "G"):
        if pos >= len(lines) or lines[pos] != name:
            raise ParseError(f"{path}: expected block '{name}' at line {pos + 1}")
        rows = []
        for ln in lines[pos + 1 : pos + 1 + N]:
            try:
                nums = [float(x) for x in ln.split()]
            except ValueError as exc:
                raise ParseError(f"{path}: bad number in block {name}: {exc}") from exc
            if len(nums) != 2 * N:
                raise ParseError(f"{path}: block {name} row has {len(nums)} numbers, expected {2 * N}")
            rows.append(np.array(nums[0::2]) + 1j * np.array(nums[1::2]))
        if len(rows) != N:
            raise ParseError(f"{path}: block {name} has {len(rows)} rows, expected {N}")
        blocks[name] = np.array(rows)
        pos += 1 + N
    if pos != len(lines):
        raise ParseError(f"{path}: trailing content after G block")
    try:
        return CovarianceState(blocks["F"], blocks["G"])
    except ParameterError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def make_initial_state(spec: str, N: int, seed: int | None = None) -> CovarianceState:
    """``"uniform_pair"``, ``"random"`` (needs ``seed``) or ``"file:PATH"``."""
    key = spec.replace("-", "_")
    if key == "uniform_pair":
        return uniform_pair_state(N)
    if key == "random":
        if seed is None:
            raise ParameterError("random initial state needs a seed")
        return random_state(N, seed)
    if spec.startswith("file:"):
        state = load_state(spec[5:])
        if state.N != N:
            raise ParameterError(f"initial-state file holds N={state.N}, expected {N}")
        return state
    raise ParameterError(f"unknown initial-state spec {spec!r}")


# --------------------------------------------------------------------------- analysis


@dataclass(frozen=True)
class LongTimeValue:
    mean_abs: float
    osc_amplitude: float
    dominant_freq: float


def dominant_frequency(times: np.ndarray, values: np.ndarray, pad: int = 16) -> float:
    """Angular frequency of the largest Fourier peak of the mean-subtracted signal.

    Hann-windowed, zero-padded FFT with parabolic peak refinement; 0 for a
    constant signal.  For complex input the magnitude of the signed frequency
    is returned.
    """
    x = np.asarray(values) - np.mean(values)
    scale = max(np.abs(values).max(), 1e-300)
    if np.abs(x).max() <= 1e-12 * scale:
        return 0.0
    dt = float(times[1] - times[0])
    npts = pad * len(x)
    spec = np.abs(np.fft.fft(x * np.hanning(len(x)), npts))
    freqs = 2 * np.pi * np.fft.fftfreq(npts, dt)
    i = int(np.argmax(spec))
    a, b, c = spec[i - 1], spec[i], spec[(i + 1) % npts]
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    df = 2 * np.pi / (npts * dt)
    return float(abs(freqs[i] + shift * df))


def long_time_value(
    traj: TrajectoryRecord, label: str | None = None, window: float = 0.25, min_periods: float = 3.0
) -> LongTimeValue:
    """Trailing-window mean of ``|value|``, half peak-to-peak of ``|value|`` and the dominant frequency."""
    if not 0 < window <= 1:
        raise ParameterError("window must be a fraction in (0, 1]")
    label = traj.labels[0] if label is None else label
    vals = traj[label]
    times = traj.times
    start = int(np.floor(len(times) * (1 - window)))
    t, v = times[start:], vals[start:]
    if len(t) < 8:
        raise AnalysisError(f"trailing window holds only {len(t)} samples")
    a = np.abs(v)
    freq = dominant_frequency(t, v)
    span = t[-1] - t[0]
    if freq > 0 and freq * span / (2 * np.pi) < min_periods:
        raise AnalysisError(
            f"window of length {span:.4g} covers {freq * span / (2 * np.pi):.2f} periods (< {min_periods})"
        )
    return LongTimeValue(float(a.mean()), float(0.5 * (a.max() - a.min())), freq)


@dataclass(frozen=True)
class ScalingRow:
    N: int
    mean_abs: float
    osc_amplitude: float
    dominant_freq: float


def scaling_sweep(
    template: ChainParams,
    N_list: Sequence[int],
    initial: str = "uniform_pair",
    observable: str = "F[1,2]",
    t_max: float = 100.0,
    dt_out: float = 0.05,
    window: float = 0.25,
    method: str = "spectral",
    seed: int | None = None,
) -> list[ScalingRow]:
    rows = []
    for N in N_list:
        params = template.replace(N=int(N))
        state = make_initial_state(initial, params.N, seed)
        rec = integrate(state, params, t_max, dt_out, (observable,), method=method)
        lt = long_time_value(rec, observable, window, min_periods=0.0)
        rows.append(ScalingRow(int(N), lt.mean_abs, lt.osc_amplitude, lt.dominant_freq))
    return rows


def fit_slope(rows: Sequence[ScalingRow]) -> float | None:
    """Log-log slope of ``mean_abs`` against ``N``; ``None`` for fewer than two rows."""
    if len(rows) < 2:
        return None
    x = np.log([r.N for r in rows])
    y = np.log([r.mean_abs for r in rows])
    return float(np.polyfit(x, y, 1)[0])

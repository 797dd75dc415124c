"""Exact quantum toolkit for pure states and density matrices of dimension 2/4/8.

Construction, projective measurement, trace distance, optimal two-hypothesis
(Helstrom) discrimination, and mutually unbiased basis families. Everything is
dense double-precision complex arithmetic; algebraic identities hold to ATOL,
sampled frequencies to Monte Carlo error. All values are immutable after
construction and randomness enters only through caller-supplied generators.
"""

from functools import lru_cache

import numpy as np

ATOL = 1e-9

SUPPORTED_DIMS = (2, 4, 8)


class PureState:
    """Unit-norm complex state vector of dimension 2, 4 or 8."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes):
        amp = np.asarray(amplitudes, dtype=complex)
        if amp.ndim != 1 or amp.shape[0] not in SUPPORTED_DIMS:
            raise ValueError(f"amplitudes must be a vector of length in {SUPPORTED_DIMS}")
        norm2 = float(np.sum(np.abs(amp) ** 2))
        if abs(norm2 - 1.0) > ATOL:
            raise ValueError(f"state not normalized: |amp|^2 = {norm2!r}")
        amp = amp.copy()
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    def __setattr__(self, name, value):
        raise AttributeError("PureState is immutable")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def outer(self) -> np.ndarray:
        """Projector |psi><psi| as a plain ndarray."""
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.outer())

    def overlap2(self, other: "PureState") -> float:
        """Squared inner product |<self|other>|^2."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return float(np.abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def isclose(self, other: "PureState", atol: float = ATOL) -> bool:
        """Equality up to global phase."""
        return self.dim == other.dim and abs(self.overlap2(other) - 1.0) <= atol

    def __repr__(self):
        return f"PureState({np.array2string(self.amplitudes, precision=6)})"


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix of dimension 2, 4 or 8."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        mat = np.asarray(entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] not in SUPPORTED_DIMS:
            raise ValueError(f"entries must be a square matrix with side in {SUPPORTED_DIMS}")
        if not np.allclose(mat, mat.conj().T, atol=ATOL, rtol=0.0):
            raise ValueError("matrix is not Hermitian")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > ATOL:
            raise ValueError(f"trace is {tr!r}, expected 1")
        if float(np.min(np.linalg.eigvalsh(mat))) < -ATOL:
            raise ValueError("matrix is not positive semidefinite")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "entries", mat)

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def bb84_state(bit: int, basis: int) -> PureState:
    """Conjugate-coding qubit: basis 0 gives {|0>,|1>}[bit], basis 1 gives {|+>,|->}[bit]."""
    if bit not in (0, 1) or basis not in (0, 1):
        raise ValueError("bit and basis must be 0 or 1")
    if basis == 0:
        amp = np.zeros(2, dtype=complex)
        amp[bit] = 1.0
    else:
        s = 1.0 if bit == 0 else -1.0
        amp = np.array([1.0, s], dtype=complex) / np.sqrt(2.0)
    return PureState(amp)


def mixture(states) -> DensityMatrix:
    """Convex mixture sum_i p_i |psi_i><psi_i| from (PureState, probability) pairs."""
    states = list(states)
    if not states:
        raise ValueError("mixture of nothing")
    probs = np.array([p for _, p in states], dtype=float)
    if np.any(probs < -ATOL):
        raise ValueError("negative probability")
    if abs(float(probs.sum()) - 1.0) > ATOL:
        raise ValueError(f"probabilities sum to {float(probs.sum())!r}, expected 1")
    dim = states[0][0].dim
    acc = np.zeros((dim, dim), dtype=complex)
    for psi, p in states:
        if psi.dim != dim:
            raise ValueError("dimension mismatch in mixture")
        acc += p * psi.outer()
    return DensityMatrix(acc)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """(1/2)||a - b||_1 via the Hermitian spectrum of the difference."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    eig = np.linalg.eigvalsh(a.entries - b.entries)
    return 0.5 * float(np.sum(np.abs(eig)))


def helstrom_success(a: DensityMatrix, b: DensityMatrix, prior_a: float) -> float:
    """Optimal probability of discriminating a (prior prior_a) from b (prior 1-prior_a).

    Equals (1/2)(1 + ||prior_a*a - (1-prior_a)*b||_1).
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if not 0.0 <= prior_a <= 1.0:
        raise ValueError("prior_a must lie in [0, 1]")
    eig = np.linalg.eigvalsh(prior_a * a.entries - (1.0 - prior_a) * b.entries)
    return 0.5 * (1.0 + float(np.sum(np.abs(eig))))


class TwoOutcomeMeasurement:
    """Projective measurement realizing the Helstrom optimum for one state pair.

    ``basis`` holds orthonormal eigenvectors as columns; ``labels[i]`` maps
    column i to outcome 0 (hypothesis a) or 1 (hypothesis b).
    """

    __slots__ = ("basis", "labels")

    def __init__(self, basis: np.ndarray, labels: np.ndarray):
        self.basis = basis
        self.labels = labels

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def projectors(self):
        """(P_a, P_b) with P_a + P_b = identity."""
        dim = self.dim
        pa = np.zeros((dim, dim), dtype=complex)
        pb = np.zeros((dim, dim), dtype=complex)
        for i in range(dim):
            v = self.basis[:, i]
            (pa if self.labels[i] == 0 else pb)[:, :] += np.outer(v, v.conj())
        return pa, pb

    def probability_a(self, state: PureState) -> float:
        """Probability of outcome 0 (hypothesis a) on a pure state."""
        amps = self.basis.conj().T @ state.amplitudes
        return float(np.sum(np.abs(amps[self.labels == 0]) ** 2))

    def sample(self, state: PureState, rng: np.random.Generator) -> int:
        """Draw outcome 0 (a) or 1 (b) for one fresh copy of ``state``."""
        return 0 if rng.random() < self.probability_a(state) else 1


def helstrom_measurement(a: DensityMatrix, b: DensityMatrix,
                         prior_a: float = 0.5) -> TwoOutcomeMeasurement:
    """Projectors onto the nonnegative/negative eigenspaces of prior_a*a - (1-prior_a)*b.

    Zero eigenvalues count toward hypothesis a (deterministic tie-break; the
    success probability is unaffected). Sampling it attains helstrom_success.
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    eig, vec = np.linalg.eigh(prior_a * a.entries - (1.0 - prior_a) * b.entries)
    labels = np.where(eig >= 0.0, 0, 1).astype(np.int8)
    return TwoOutcomeMeasurement(vec, labels)


def measure(state: PureState, basis: np.ndarray, rng: np.random.Generator):
    """Born-rule measurement in an orthonormal basis (columns of ``basis``).

    Returns (outcome index, post-measurement PureState = the outcome column).
    """
    basis = np.asarray(basis, dtype=complex)
    dim = state.dim
    if basis.shape != (dim, dim):
        raise ValueError("basis must be a square matrix matching the state dimension")
    if not np.allclose(basis.conj().T @ basis, np.eye(dim), atol=ATOL, rtol=0.0):
        raise ValueError("basis columns are not orthonormal")
    probs = np.abs(basis.conj().T @ state.amplitudes) ** 2
    probs = probs / probs.sum()
    outcome = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    outcome = min(outcome, dim - 1)
    return outcome, PureState(basis[:, outcome])


class MubFamily:
    """A list of pairwise mutually unbiased orthonormal bases of one dimension."""

    __slots__ = ("dim", "bases")

    def __init__(self, dim: int, bases, validate: bool = True):
        self.dim = dim
        self.bases = [np.asarray(b, dtype=complex) for b in bases]
        for b in self.bases:
            b.setflags(write=False)
        if validate:
            errs = self.check()
            if errs:
                raise ValueError("; ".join(errs))

    def __len__(self):
        return len(self.bases)

    def check(self, atol: float = ATOL):
        """List of violated invariants (empty when the family is valid)."""
        errs = []
        eye = np.eye(self.dim)
        for t, b in enumerate(self.bases):
            if b.shape != (self.dim, self.dim):
                errs.append(f"basis {t} has wrong shape")
            elif not np.allclose(b.conj().T @ b, eye, atol=atol, rtol=0.0):
                errs.append(f"basis {t} is not unitary")
        target = 1.0 / self.dim
        for t1 in range(len(self.bases)):
            for t2 in range(t1 + 1, len(self.bases)):
                overlaps = np.abs(self.bases[t1].conj().T @ self.bases[t2]) ** 2
                dev = float(np.max(np.abs(overlaps - target)))
                if dev > atol:
                    errs.append(f"bases {t1},{t2} not unbiased (max deviation {dev:.3e})")
        return errs

    def basis_state(self, theta: int, index: int) -> PureState:
        """Column ``index`` of basis ``theta`` as a PureState."""
        return PureState(self.bases[theta][:, index])


_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
_CIRCULAR = np.array([[1.0, 1.0], [1.0j, -1.0j]], dtype=complex) / np.sqrt(2.0)


@lru_cache(maxsize=None)
def bb84_family() -> MubFamily:
    """The computational and Hadamard bases of one qubit (conjugate coding pair)."""
    return MubFamily(2, [np.eye(2, dtype=complex), _HADAMARD])


@lru_cache(maxsize=None)
def mub4_family() -> MubFamily:
    """All 5 mutually unbiased bases of dimension 4 (tensor construction)."""
    twist = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
    bases = [
        np.eye(4, dtype=complex),
        np.kron(_HADAMARD, _HADAMARD),
        twist @ np.kron(_HADAMARD, _CIRCULAR),
        twist @ np.kron(_CIRCULAR, _HADAMARD),
        np.kron(_CIRCULAR, _CIRCULAR),
    ]
    return MubFamily(4, bases)


@lru_cache(maxsize=None)
def mub8_family() -> MubFamily:
    """9 mutually unbiased bases of dimension 8.

    Tensor products of the Hadamard-like and circular single-qubit bases with
    diagonal sign corrections; basis 0 is the computational basis. Ordering is
    fixed so basis indices are stable across runs.
    """
    u = np.diag([1, 1, 1, 1, 1, -1, -1, 1]).astype(complex)
    v = np.diag([1, 1, 1, -1, 1, -1, 1, 1]).astype(complex)
    w = np.diag([1, 1, 1, -1, 1, 1, -1, 1]).astype(complex)
    o, c = _HADAMARD, _CIRCULAR

    def k3(x, y, z):
        return np.kron(np.kron(x, y), z)

    bases = [
        np.eye(8, dtype=complex),
        k3(o, o, o),
        u @ k3(o, o, c),
        v @ k3(o, c, o),
        w @ k3(o, c, c),
        w @ k3(c, o, o),
        v @ k3(c, o, c),
        u @ k3(c, c, o),
        k3(c, c, c),
    ]
    return MubFamily(8, bases)

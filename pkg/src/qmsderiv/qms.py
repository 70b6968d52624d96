"""States, modular action, interpolated inner products, and Lindblad generators.

A faithful state on M_n(C) is represented by its density matrix D (Hermitian,
strictly positive, trace one). The modular conjugation by D and the family of
inner products

    <A, B>_s = tr(D^{1-s} B* D^s A),    s in [0, 1]

interpolate between the GNS form (s = 0) and the KMS form (s = 1/2). All
powers of D go through its cached eigendecomposition, so non-diagonal density
matrices are handled identically to diagonal ones.

Generators are specified by jump operators V_j with Bohr frequencies omega_j
satisfying D V_j D^{-1} = exp(-omega_j) V_j, the jump list closed under
adjoints. The generator acts as

    L(A) = -sum_j w_j exp(-omega_j / 2) (V_j* [A, V_j] + [V_j*, A] V_j)

with optional real weights w_j (default 1); signed weights cover sums of
rank-one diagonal pieces that arise when splitting a diagonal jump operator.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotHermitian
from .linalg import as_cmatrix, herm_eig


@dataclass(frozen=True)
class DensityState:
    """Faithful state on M_n(C): positive trace-one density matrix D."""

    n: int
    D: np.ndarray = field(repr=False)
    eigvals: np.ndarray = field(repr=False, default=None)
    eigvecs: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        D = as_cmatrix(self.D, self.n).copy()
        w, V = herm_eig(D, tol=1e-10)
        if w[0] <= 0:
            raise NotHermitian(
                f"density matrix not strictly positive (min eigenvalue {w[0]:.3e})")
        if abs(w.sum() - 1.0) > 1e-10:
            raise DimensionMismatch(f"density trace {w.sum()} is not 1")
        for name, val in (("D", D), ("eigvals", w), ("eigvecs", V)):
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    @classmethod
    def from_matrix(cls, D):
        D = as_cmatrix(D)
        return cls(D.shape[0], D)

    @classmethod
    def from_diagonal(cls, diag, normalize=False):
        d = np.asarray(diag, dtype=float)
        if normalize:
            d = d / d.sum()
        return cls(len(d), np.diag(d).astype(complex))

    @classmethod
    def tracial(cls, n):
        return cls(n, np.eye(n, dtype=complex) / n)

    def power(self, p):
        """Fractional power D^p through the cached eigendecomposition."""
        return (self.eigvecs * self.eigvals ** p) @ self.eigvecs.conj().T


def modular_conjugate(state, A, p):
    """D^p A D^{-p}, the analytic continuation sigma_{-ip} of the modular group."""
    A = as_cmatrix(A, state.n)
    return state.power(p) @ A @ state.power(-p)


def s_inner(state, s, A, B):
    """<A, B>_s = tr(D^{1-s} B* D^s A) with D the trace-one density matrix."""
    if not 0.0 <= s <= 1.0:
        raise DimensionMismatch(f"inner-product parameter s={s} outside [0, 1]")
    A = as_cmatrix(A, state.n)
    B = as_cmatrix(B, state.n)
    return complex(np.trace(state.power(1.0 - s) @ B.conj().T @ state.power(s) @ A))


@dataclass(frozen=True)
class Jump:
    """One jump operator with its Bohr frequency and an optional real weight."""

    V: np.ndarray
    omega: float
    weight: float = 1.0

    def __post_init__(self):
        V = as_cmatrix(self.V).copy()
        V.flags.writeable = False
        object.__setattr__(self, "V", V)


@dataclass(frozen=True)
class LindbladSpec:
    """State plus adjoint-closed jump operators defining a symmetric generator."""

    state: DensityState
    jumps: tuple

    def __post_init__(self):
        jumps = tuple(
            j if isinstance(j, Jump) else Jump(*j) for j in self.jumps)
        for j in jumps:
            if j.V.shape != (self.state.n, self.state.n):
                raise DimensionMismatch(
                    f"jump shape {j.V.shape} does not match n={self.state.n}")
        object.__setattr__(self, "jumps", jumps)

    @property
    def n(self):
        return self.state.n


def derive_omega(state, V):
    """Bohr frequency recovered from the eigenvector relation D V D^{-1} = e^{-w} V.

    Uses the Rayleigh ratio <V, D V D^{-1}> / <V, V> in the Frobenius inner
    product; validation separately checks the relation actually holds.
    """
    V = as_cmatrix(V, state.n)
    nrm2 = np.vdot(V, V).real
    if nrm2 == 0:
        return 0.0
    ratio = np.vdot(V, modular_conjugate(state, V, 1.0)) / nrm2
    if ratio.real <= 0:
        return 0.0
    return float(-np.log(ratio.real))


def make_spec(state, jumps):
    """Build a LindbladSpec from (V, omega or None[, weight]) tuples.

    Omitted frequencies are recovered from the modular eigenvector relation.
    """
    out = []
    for item in jumps:
        if isinstance(item, Jump):
            out.append(item)
            continue
        V, omega = item[0], item[1]
        weight = item[2] if len(item) > 2 else 1.0
        if omega is None:
            omega = derive_omega(state, V)
        out.append(Jump(as_cmatrix(V, state.n), float(omega), float(weight)))
    return LindbladSpec(state, tuple(out))


def lindblad_apply(spec, A):
    """Apply the generator L(A) = -sum_j w_j e^{-omega_j/2} (V*[A,V] + [V*,A]V)."""
    A = as_cmatrix(A, spec.n)
    out = np.zeros_like(A)
    for j in spec.jumps:
        V = j.V
        Vs = V.conj().T
        comm_AV = A @ V - V @ A
        comm_VsA = Vs @ A - A @ Vs
        out -= j.weight * np.exp(-0.5 * j.omega) * (Vs @ comm_AV + comm_VsA @ V)
    return out


@dataclass
class ValidationReport:
    """Outcome of checking the generator hypotheses on a LindbladSpec."""

    adjoint_closed: bool
    sigma_residuals: list
    omegas: list
    messages: list
    ok: bool

    def as_dict(self):
        return {
            "ok": self.ok,
            "adjoint_closed": self.adjoint_closed,
            "sigma_residuals": self.sigma_residuals,
            "omegas": self.omegas,
            "messages": self.messages,
        }


def validate_spec(spec, tol=1e-8):
    """Check adjoint closure of the jump multiset and the modular eigenvector relation.

    Each jump must satisfy ||D V D^{-1} - e^{-omega} V||_F <= tol * ||V||_F, and
    the multiset {(V_j, omega_j, w_j)} must be invariant under
    (V, omega, w) -> (V*, -omega, w). Failures are reported, not raised.
    """
    messages = []
    residuals = []
    for idx, j in enumerate(spec.jumps):
        nrm = np.linalg.norm(j.V)
        if nrm == 0:
            residuals.append(0.0)
            continue
        dev = np.linalg.norm(
            modular_conjugate(spec.state, j.V, 1.0) - np.exp(-j.omega) * j.V)
        rel = float(dev / nrm)
        residuals.append(rel)
        if rel > tol:
            messages.append(
                f"jump {idx}: not a modular eigenvector with omega={j.omega:.6g} "
                f"(relative residual {rel:.3e})")

    unmatched = list(range(len(spec.jumps)))
    adjoint_closed = True
    while unmatched:
        i = unmatched.pop(0)
        ji = spec.jumps[i]
        partner = None
        for k in unmatched:
            jk = spec.jumps[k]
            if (np.allclose(jk.V, ji.V.conj().T, atol=1e-12 * max(1, np.linalg.norm(ji.V)))
                    and abs(jk.omega + ji.omega) <= 1e-8 * max(1.0, abs(ji.omega))
                    and abs(jk.weight - ji.weight) <= 1e-12 * max(1.0, abs(ji.weight))):
                partner = k
                break
        if partner is not None:
            unmatched.remove(partner)
        elif np.allclose(ji.V, ji.V.conj().T, atol=1e-12 * max(1, np.linalg.norm(ji.V))) \
                and abs(ji.omega) <= 1e-8:
            continue  # self-adjoint jump pairs with itself
        else:
            adjoint_closed = False
            messages.append(f"jump {i}: no adjoint partner in the jump list")

    ok = adjoint_closed and all(r <= tol for r in residuals)
    return ValidationReport(adjoint_closed, residuals,
                            [j.omega for j in spec.jumps], messages, ok)


def gns_symmetry_check(spec, trials=20, seed=0):
    """Largest relative GNS asymmetry |<L(A),B>_0 - <A,L(B)>_0| over random pairs."""
    rng = np.random.default_rng(seed)
    n = spec.n
    worst = 0.0
    for _ in range(trials):
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        la = lindblad_apply(spec, A)
        lb = lindblad_apply(spec, B)
        lhs = s_inner(spec.state, 0.0, la, B)
        rhs = s_inner(spec.state, 0.0, A, lb)
        scale = max(1.0, abs(lhs) + abs(rhs))
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst

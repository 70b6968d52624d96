"""Canonical bimodule actions on M_n (x) M_n and assembly of the feasibility system.

The tensor square of the algebra carries the bimodule structure

    A (B (x) C) D = AB (x) CD - A (x) BCD

under which delta(A) = A (x) 1 is a derivation. A sesquilinear form on the
tensor square is represented by a matrix X through <x, y> = psi(y)* X psi(x),
with psi the fixed vectorization of the matrix-unit basis. Requiring the form
to make both actions adjointable and to take prescribed values f(A, B) on
derivation pairs produces three families of equations, each linear in X:

    family "left"   adjointability of the left action   (m^5 equations)
    family "right"  adjointability of the right action  (m^5 equations)
    family "target" <delta(A), delta(B)> = f(A, B)      (m^2 equations)

with m = n^2 the algebra dimension. X is searched over Hermitian matrices,
so each complex equation splits into two real rows over the isometric
Hermitian coordinate vector. Rows whose matrix-unit products all vanish are
pruned during assembly, and duplicate rows are removed by hashing canonical
(unit-norm, sign-fixed) forms; this cuts the raw row count by roughly an
order of magnitude and dominates assembly performance.

The coefficient matrix of the system depends only on n, not on the state or
the generator; those enter only through the right-hand side values of the
target family. Assembly therefore caches a per-n template and attaches fresh
target values to it, which makes repeated solves at the same size cheap.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, SizeCapExceeded
from .linalg import SparseRealMatrix, as_cmatrix
from .qms import lindblad_apply

DEFAULT_SIZE_CAP = 4

_SQRT2 = np.sqrt(2.0)


def psi_index(n, i, j, k, l):
    """Position of E_ij (x) E_kl in the fixed vectorization, 1-based.

    Equals n^3 (i-1) + n^2 (k-1) + n (j-1) + l, a bijection from index
    quadruples onto 1..n^4.
    """
    for name, v in (("i", i), ("j", j), ("k", k), ("l", l)):
        if not 1 <= v <= n:
            raise IndexOutOfRange(f"{name}={v} outside 1..{n}")
    return n ** 3 * (i - 1) + n ** 2 * (k - 1) + n * (j - 1) + l


def _tidx(n, i, j, k, l):
    # 0-based twin of psi_index
    return n ** 3 * i + n ** 2 * k + n * j + l


@dataclass(frozen=True)
class TensorElem:
    """Sparse element of M_n (x) M_n: a map (i,j,k,l) -> coefficient.

    Indices are 0-based internally; (i,j) addresses the first tensor factor
    E_ij and (k,l) the second. Zero coefficients are dropped on construction.
    """

    n: int
    terms: tuple

    def __post_init__(self):
        cleaned = {}
        for (i, j, k, l), c in dict(self.terms).items():
            for v in (i, j, k, l):
                if not 0 <= v < self.n:
                    raise IndexOutOfRange(f"tensor index {v} outside 0..{self.n - 1}")
            c = complex(c)
            if c != 0:
                cleaned[(i, j, k, l)] = cleaned.get((i, j, k, l), 0) + c
        items = tuple(sorted((q, c) for q, c in cleaned.items() if c != 0))
        object.__setattr__(self, "terms", items)

    @classmethod
    def unit(cls, n, i, j, k, l, coeff=1.0):
        return cls(n, {(i, j, k, l): coeff})

    @classmethod
    def tensor(cls, A, B):
        """A (x) B for dense matrices A, B."""
        A = as_cmatrix(A)
        B = as_cmatrix(B, A.shape[0])
        n = A.shape[0]
        terms = {}
        for i in range(n):
            for j in range(n):
                if A[i, j] == 0:
                    continue
                for k in range(n):
                    for l in range(n):
                        if B[k, l] != 0:
                            terms[(i, j, k, l)] = A[i, j] * B[k, l]
        return cls(n, terms)

    @classmethod
    def derivation_of(cls, A):
        """delta(A) = A (x) 1."""
        A = as_cmatrix(A)
        return cls.tensor(A, np.eye(A.shape[0], dtype=complex))

    def __add__(self, other):
        if self.n != other.n:
            raise DimensionMismatch("tensor elements over different algebra sizes")
        terms = dict(self.terms)
        for q, c in other.terms:
            terms[q] = terms.get(q, 0) + c
        return TensorElem(self.n, terms)

    def scale(self, c):
        return TensorElem(self.n, {q: c * v for q, v in self.terms})

    def vector(self):
        """psi applied to the element: a dense vector of length n^4."""
        v = np.zeros(self.n ** 4, dtype=complex)
        for (i, j, k, l), c in self.terms:
            v[_tidx(self.n, i, j, k, l)] += c
        return v


def left_act(A, t):
    """Left bimodule action A (B (x) C) = AB (x) C - A (x) BC, extended bilinearly."""
    A = as_cmatrix(A, t.n)
    n = t.n
    terms = {}

    def put(q, c):
        if c != 0:
            terms[q] = terms.get(q, 0) + c

    for (i, j, k, l), c in t.terms:
        for a in range(n):
            if A[a, i] != 0:
                put((a, j, k, l), c * A[a, i])
        if j == k:
            for a in range(n):
                for b in range(n):
                    if A[a, b] != 0:
                        put((a, b, i, l), -c * A[a, b])
    return TensorElem(n, terms)


def right_act(t, A):
    """Right bimodule action (B (x) C) A = B (x) CA, extended bilinearly."""
    A = as_cmatrix(A, t.n)
    n = t.n
    terms = {}
    for (i, j, k, l), c in t.terms:
        for b in range(n):
            if A[l, b] != 0:
                q = (i, j, k, b)
                terms[q] = terms.get(q, 0) + c * A[l, b]
    return TensorElem(n, terms)


@dataclass(frozen=True)
class TargetForm:
    """Values f(Q_a, Q_b*) of the prescribed form on the matrix-unit basis.

    F[a, b] = <L(Q_a), Q_b*>_s with the basis in vectorization order
    (Q_{n i + j} = E_ij, 0-based).
    """

    s: float
    F: np.ndarray = field(repr=False)

    def __post_init__(self):
        F = as_cmatrix(self.F).copy()
        F.flags.writeable = False
        object.__setattr__(self, "F", F)


def target_form(spec, s, basis_perm=None):
    """Gram data of the generator against the s-inner product on matrix units."""
    if not 0.0 <= s <= 1.0:
        raise DimensionMismatch(f"inner-product parameter s={s} outside [0, 1]")
    n = spec.n
    m = n * n
    Ds = spec.state.power(s)
    D1s = spec.state.power(1.0 - s)
    perm = _check_perm(basis_perm, m)
    F = np.zeros((m, m), dtype=complex)
    for a in range(m):
        i, j = divmod(perm[a], n)
        E = np.zeros((n, n), dtype=complex)
        E[i, j] = 1.0
        # tr(D^{1-s} E_kl D^s L(Q_a)) = (D^s L(Q_a) D^{1-s})[l, k]
        T = Ds @ lindblad_apply(spec, E) @ D1s
        F[a, :] = T.T.reshape(-1)[perm]
    return TargetForm(s, F)


def _check_perm(perm, m):
    if perm is None:
        return np.arange(m)
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(m)):
        raise IndexOutOfRange(f"basis_perm is not a permutation of 0..{m - 1}")
    return perm


# ---------------------------------------------------------------------------
# Realification over the Hermitian coordinate layout
# ---------------------------------------------------------------------------

def _pair_offsets(M):
    # start of row p's strict upper triangle within the triu enumeration
    off = np.zeros(M, dtype=np.int64)
    for p in range(1, M):
        off[p] = off[p - 1] + (M - p)
    return off


class _Realifier:
    """Split complex equations in X into real rows over Hermitian coordinates."""

    def __init__(self, M):
        self.M = M
        self.T = M * (M - 1) // 2
        self.off = _pair_offsets(M)

    def rows(self, coeff):
        """coeff: {(p, q): complex} for the functional sum c_pq X_pq.

        Returns (re_row, im_row) as {col: float} dicts; either may be empty.
        """
        M, T, off = self.M, self.T, self.off
        re_row, im_row = {}, {}

        def put(row, col, val):
            if val != 0.0:
                row[col] = row.get(col, 0.0) + val

        pairs = {}
        for (p, q), c in coeff.items():
            if p == q:
                put(re_row, p, c.real)
                put(im_row, p, c.imag)
            elif p < q:
                acc = pairs.setdefault((p, q), [0j, 0j])
                acc[0] += c
            else:
                acc = pairs.setdefault((q, p), [0j, 0j])
                acc[1] += c
        for (p, q), (c1, c2) in pairs.items():
            col_re = M + off[p] + (q - p - 1)
            col_im = col_re + T
            plus, minus = c1 + c2, c1 - c2
            put(re_row, col_re, plus.real / _SQRT2)
            put(re_row, col_im, -minus.imag / _SQRT2)
            put(im_row, col_re, plus.imag / _SQRT2)
            put(im_row, col_im, minus.real / _SQRT2)
        re_row = {c: v for c, v in re_row.items() if v != 0.0}
        im_row = {c: v for c, v in im_row.items() if v != 0.0}
        return re_row, im_row


def _canonical_key(row):
    """Unit-norm, sign-fixed, rounded form of a row for duplicate hashing."""
    items = sorted(row.items())
    norm = np.sqrt(sum(v * v for _, v in items))
    sign = 1.0 if items[0][1] > 0 else -1.0
    return tuple((c, round(sign * v / norm, 12)) for c, v in items), sign / norm


# ---------------------------------------------------------------------------
# Per-size template: everything in the system that does not depend on f
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemTemplate:
    n: int
    hom_rows: tuple          # deduped, unit-norm rows from both action families
    target_rows: tuple       # 2 m^2 rows in (a, b, re/im) order
    counts: dict


_TEMPLATE_CACHE = {}


def _build_template(n):
    m = n * n
    real = _Realifier(m * m)
    ri = [a // n for a in range(m)]
    ci = [a % n for a in range(m)]

    hom_rows = []
    seen = set()
    counts = {
        "raw_complex_left": m ** 5,
        "raw_complex_right": m ** 5,
        "raw_complex_target": m * m,
        "nonzero_real_left": 0,
        "nonzero_real_right": 0,
    }

    def emit(family, coeff):
        if not coeff:
            return
        for row in real.rows(coeff):
            if not row:
                continue
            counts[f"nonzero_real_{family}"] += 1
            key, rescale = _canonical_key(row)
            if key in seen:
                continue
            seen.add(key)
            hom_rows.append(tuple((c, v * rescale) for c, v in sorted(row.items())))

    rng = range(m)
    tidx = _tidx
    for a1 in rng:
        a, b = ri[a1], ci[a1]
        for a2 in rng:
            c, d = ri[a2], ci[a2]
            for a3 in rng:
                e, f = ri[a3], ci[a3]
                z = tidx(n, c, d, e, f)
                for a4 in rng:
                    g, h = ri[a4], ci[a4]
                    for a5 in rng:
                        p, q = ri[a5], ci[a5]
                        u = tidx(n, h, g, q, p)
                        coeff = {}
                        if b == c:
                            k = (u, tidx(n, a, d, e, f))
                            coeff[k] = coeff.get(k, 0) + 1
                        if d == e:
                            k = (u, tidx(n, a, b, c, f))
                            coeff[k] = coeff.get(k, 0) - 1
                        if a == h:
                            k = (tidx(n, b, g, q, p), z)
                            coeff[k] = coeff.get(k, 0) - 1
                        if g == q:
                            k = (tidx(n, b, a, h, p), z)
                            coeff[k] = coeff.get(k, 0) + 1
                        emit("left", {k: v for k, v in coeff.items() if v})

    for a1 in rng:
        a, b = ri[a1], ci[a1]
        for a2 in rng:
            c, d = ri[a2], ci[a2]
            for a3 in rng:
                e, f = ri[a3], ci[a3]
                z = tidx(n, c, d, e, f)
                for a4 in rng:
                    g, h = ri[a4], ci[a4]
                    for a5 in rng:
                        p, q = ri[a5], ci[a5]
                        u = tidx(n, h, g, q, p)
                        coeff = {}
                        if f == a:
                            k = (u, tidx(n, c, d, e, b))
                            coeff[k] = coeff.get(k, 0) + 1
                        if p == b:
                            k = (tidx(n, h, g, q, a), z)
                            coeff[k] = coeff.get(k, 0) - 1
                        emit("right", {k: v for k, v in coeff.items() if v})

    # target family: psi(Q_b* (x) 1)* X psi(Q_a (x) 1) = f(Q_a, Q_b*)
    target_rows = []
    for a1 in rng:
        i, j = ri[a1], ci[a1]
        for a2 in rng:
            k, l = ri[a2], ci[a2]
            coeff = {}
            for t in range(n):
                row_idx = tidx(n, l, k, t, t)
                for tp in range(n):
                    key = (row_idx, tidx(n, i, j, tp, tp))
                    coeff[key] = coeff.get(key, 0) + 1
            re_row, im_row = real.rows(coeff)
            target_rows.append((a1, a2, "re", tuple(sorted(re_row.items()))))
            target_rows.append((a1, a2, "im", tuple(sorted(im_row.items()))))

    counts["hom_rows_after_dedup"] = len(hom_rows)
    counts["target_rows_real"] = len(target_rows)
    return SystemTemplate(n, tuple(hom_rows), tuple(target_rows), counts)


def system_template(n):
    tpl = _TEMPLATE_CACHE.get(n)
    if tpl is None:
        tpl = _build_template(n)
        _TEMPLATE_CACHE[n] = tpl
    return tpl


def clear_template_cache():
    _TEMPLATE_CACHE.clear()


# ---------------------------------------------------------------------------
# Assembled system
# ---------------------------------------------------------------------------

@dataclass
class ConstraintSystem:
    """Sparse real-linear system A x = b over Hermitian coordinates of X."""

    n: int
    m: int
    s: float
    A: SparseRealMatrix
    b: np.ndarray
    hom_row_count: int
    target_meta: list        # (basis index a, basis index b, "re"|"im") per target row
    counts: dict

    @property
    def unknowns(self):
        return self.m ** 4

    def hom_block(self):
        return self.A.tocsr()[:self.hom_row_count]

    def target_block(self):
        return self.A.tocsr()[self.hom_row_count:]

    def target_rhs(self):
        return self.b[self.hom_row_count:]

    def residual_of(self, coords):
        return float(np.linalg.norm(self.A.matvec(coords) - self.b))

    def scale(self):
        return max(1.0, self.A.frobenius_norm(), float(np.linalg.norm(self.b)))

    def with_target_form(self, form):
        """Same coefficient matrix, fresh target values; cheap per-sample path."""
        b = self.b.copy()
        for offset, (a1, a2, part) in enumerate(self.target_meta):
            val = form.F[a1, a2]
            b[self.hom_row_count + offset] = val.real if part == "re" else val.imag
        return ConstraintSystem(self.n, self.m, float(form.s), self.A, b,
                                self.hom_row_count, self.target_meta,
                                self.counts)


def assemble(spec, s, size_cap=DEFAULT_SIZE_CAP, basis_perm=None):
    """Build the full feasibility system for a validated generator spec.

    Rows appear in family order (left, right, target), each family in
    lexicographic index order, duplicates removed within the action
    families. The target rows carry the only nonzero right-hand sides.
    """
    n = spec.n
    if n > size_cap:
        raise SizeCapExceeded(f"algebra size {n} exceeds cap {size_cap}")
    tpl = system_template(n)
    m = n * n
    perm = _check_perm(basis_perm, m)
    inv = np.empty(m, dtype=int)
    inv[perm] = np.arange(m)

    form = target_form(spec, s, basis_perm=basis_perm)
    nrows = len(tpl.hom_rows) + len(tpl.target_rows)
    A = SparseRealMatrix(nrows, m ** 4)
    b = np.zeros(nrows)
    r = 0
    for row in tpl.hom_rows:
        for col, val in row:
            A.add(r, col, val)
        r += 1
    target_meta = []
    # template target rows are laid out for the identity basis order; under a
    # permuted basis the row for permuted pair (a, b) is the identity-layout
    # row at (perm[a], perm[b])
    order = sorted(range(len(tpl.target_rows)),
                   key=lambda idx: (inv[tpl.target_rows[idx][0]],
                                    inv[tpl.target_rows[idx][1]],
                                    tpl.target_rows[idx][2] == "im"))
    for idx in order:
        a1, a2, part, row = tpl.target_rows[idx]
        for col, val in row:
            A.add(r, col, val)
        val = form.F[inv[a1], inv[a2]]
        b[r] = val.real if part == "re" else val.imag
        target_meta.append((int(inv[a1]), int(inv[a2]), part))
        r += 1
    A.finalize()
    counts = dict(tpl.counts)
    counts["rows_total"] = nrows
    return ConstraintSystem(n, m, float(s), A, b, len(tpl.hom_rows),
                            target_meta, counts)


def dump_system(system, path):
    """Write sorted triplets (row col value) with 17 significant digits.

    The right-hand side goes to ``<path>.rhs`` as (row value) lines.
    """
    csr = system.A.tocsr().tocoo()
    order = np.lexsort((csr.col, csr.row))
    with open(path, "w") as fh:
        for idx in order:
            fh.write(f"{csr.row[idx]} {csr.col[idx]} {csr.data[idx]:.17g}\n")
    with open(str(path) + ".rhs", "w") as fh:
        for idx in np.nonzero(system.b)[0]:
            fh.write(f"{idx} {system.b[idx]:.17g}\n")

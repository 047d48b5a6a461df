"""Dense linear algebra over the prime field F_p.

Matrices are small (a few dozen rows at most), so plain lists of ints are
used throughout.  Rows are stored as tuples; every entry is kept in [0, p).
"""
from __future__ import annotations

from dataclasses import dataclass, field


def _inv(a: int, p: int) -> int:
    return pow(a, -1, p)


@dataclass(frozen=True)
class FpMatrix:
    rows: tuple
    ncols: int
    p: int

    @classmethod
    def from_rows(cls, rows, p, ncols=None):
        rows = tuple(tuple(int(x) % p for x in r) for r in rows)
        if ncols is None:
            ncols = len(rows[0]) if rows else 0
        for r in rows:
            if len(r) != ncols:
                raise ValueError("ragged matrix")
        return cls(rows, ncols, p)

    @classmethod
    def from_columns(cls, cols, p, nrows):
        cols = [tuple(c) for c in cols]
        for c in cols:
            if len(c) != nrows:
                raise ValueError("ragged matrix")
        rows = [tuple(c[i] for c in cols) for i in range(nrows)]
        return cls.from_rows(rows, p, ncols=len(cols))

    @classmethod
    def zeros(cls, nrows, ncols, p):
        return cls(tuple((0,) * ncols for _ in range(nrows)), ncols, p)

    @classmethod
    def identity(cls, n, p):
        return cls(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)), n, p)

    @property
    def nrows(self):
        return len(self.rows)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def column(self, j):
        return tuple(r[j] for r in self.rows)

    def columns(self):
        return [self.column(j) for j in range(self.ncols)]

    def transpose(self):
        return FpMatrix.from_columns(self.rows, self.p, self.ncols)

    def __matmul__(self, other):
        if isinstance(other, FpMatrix):
            if self.ncols != other.nrows:
                raise ValueError("shape mismatch")
            cols = other.columns()
            return FpMatrix.from_rows(
                [[sum(a * b for a, b in zip(r, c)) for c in cols] for r in self.rows],
                self.p,
                ncols=other.ncols,
            )
        vec = tuple(other)
        return tuple(sum(a * b for a, b in zip(r, vec)) % self.p for r in self.rows)

    def rref(self):
        """Reduced row echelon form and pivot columns."""
        p = self.p
        m = [list(r) for r in self.rows]
        pivots = []
        row = 0
        for col in range(self.ncols):
            piv = next((i for i in range(row, len(m)) if m[i][col]), None)
            if piv is None:
                continue
            m[row], m[piv] = m[piv], m[row]
            inv = _inv(m[row][col], p)
            m[row] = [(x * inv) % p for x in m[row]]
            for i in range(len(m)):
                if i != row and m[i][col]:
                    f = m[i][col]
                    m[i] = [(a - f * b) % p for a, b in zip(m[i], m[row])]
            pivots.append(col)
            row += 1
            if row == len(m):
                break
        return FpMatrix.from_rows(m, p, ncols=self.ncols), tuple(pivots)

    def rank(self):
        return len(self.rref()[1])

    def kernel(self):
        """Basis of the right null space {x : A x = 0}."""
        r, pivots = self.rref()
        free = [j for j in range(self.ncols) if j not in pivots]
        basis = []
        for f in free:
            v = [0] * self.ncols
            v[f] = 1
            for i, pc in enumerate(pivots):
                v[pc] = (-r.rows[i][f]) % self.p
            basis.append(tuple(v))
        return basis

    def is_injective(self):
        return self.rank() == self.ncols

    def det_nonzero(self):
        return self.nrows == self.ncols and self.rank() == self.ncols

    def solve(self, b):
        """One solution x of A x = b, or None."""
        aug = FpMatrix.from_rows(
            [list(r) + [bi] for r, bi in zip(self.rows, b)], self.p, ncols=self.ncols + 1
        )
        r, pivots = aug.rref()
        if self.ncols in pivots:
            return None
        x = [0] * self.ncols
        for i, pc in enumerate(pivots):
            x[pc] = r.rows[i][self.ncols]
        return tuple(x)

    def to_list(self):
        return [list(r) for r in self.rows]


def span_rank(vectors, p, dim=None):
    vectors = [tuple(v) for v in vectors]
    if not vectors:
        return 0
    return FpMatrix.from_rows(vectors, p).rank()


def in_span(v, vectors, p):
    vectors = [tuple(x) for x in vectors]
    if not any(v):
        return True
    if not vectors:
        return False
    return span_rank(vectors + [tuple(v)], p) == span_rank(vectors, p)


def extend_to_basis(vectors, p, dim):
    """Greedily extend independent `vectors` by standard basis vectors.

    Returns the indices of the standard vectors used (lexicographic greedy).
    """
    chosen = [tuple(v) for v in vectors]
    if span_rank(chosen, p) != len(chosen):
        raise ValueError("vectors are dependent")
    used = []
    for i in range(dim):
        e = tuple(int(i == j) for j in range(dim))
        if not in_span(e, chosen, p):
            chosen.append(e)
            used.append(i)
        if len(chosen) == dim:
            break
    return used


def complement_basis(subspace, p, dim, containing=()):
    """Basis of a complement of span(subspace) containing span(containing).

    `containing` must meet span(subspace) trivially.  Greedy pivoting keeps
    the choice deterministic.
    """
    base = [tuple(v) for v in subspace if any(v)]
    if base:
        base = [tuple(r) for r in FpMatrix.from_rows(base, p).rref()[0].rows if any(r)]
    comp = []
    for v in containing:
        v = tuple(v)
        if not in_span(v, base + comp, p):
            comp.append(v)
    for i in range(dim):
        e = tuple(int(i == j) for j in range(dim))
        if span_rank(base + comp, p) == dim:
            break
        if not in_span(e, base + comp, p):
            comp.append(e)
    return comp


@dataclass
class RowOpTranscript:
    """Elementary row operations that reduce a square matrix to the identity."""

    p: int
    ops: list = field(default_factory=list)

    @classmethod
    def record(cls, mat: FpMatrix):
        p = mat.p
        m = [list(r) for r in mat.rows]
        n = len(m)
        t = cls(p)
        for col in range(n):
            piv = next((i for i in range(col, n) if m[i][col]), None)
            if piv is None:
                raise ValueError("singular matrix")
            if piv != col:
                m[col], m[piv] = m[piv], m[col]
                t.ops.append(("swap", col, piv))
            s = _inv(m[col][col], p)
            if s != 1:
                m[col] = [(x * s) % p for x in m[col]]
                t.ops.append(("scale", col, s))
            for i in range(n):
                if i != col and m[i][col]:
                    f = (-m[i][col]) % p
                    m[i] = [(a + f * b) % p for a, b in zip(m[i], m[col])]
                    t.ops.append(("add", i, col, f))
        return t

    def replay(self, mat: FpMatrix) -> FpMatrix:
        p = self.p
        m = [list(r) for r in mat.rows]
        for op in self.ops:
            if op[0] == "swap":
                _, i, j = op
                m[i], m[j] = m[j], m[i]
            elif op[0] == "scale":
                _, i, s = op
                m[i] = [(x * s) % p for x in m[i]]
            else:
                _, i, j, f = op
                m[i] = [(a + f * b) % p for a, b in zip(m[i], m[j])]
        return FpMatrix.from_rows(m, p, ncols=mat.ncols)

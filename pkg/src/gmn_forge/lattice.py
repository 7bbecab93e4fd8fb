"""Exact integer algebra for lattices carrying an antisymmetric pairing.

Everything here works on Python integers and :class:`fractions.Fraction`,
never on floats.  A pairing is an antisymmetric integer matrix ``P`` and
``<x, y> = x^T P y``.  A Frobenius basis ``(e_i, m_i)`` satisfies

    <m_i, e_j> = p_i delta_ij,   <e_i, e_j> = <m_i, m_j> = 0,

with ``p_1 | p_2 | ... | p_r``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

__all__ = [
    "SymplecticLattice",
    "FrobeniusBasis",
    "QuadraticRefinement",
    "LatticeError",
    "integer_det",
    "smith_normal_form",
    "elementary_divisors",
    "frobenius_basis",
    "dual_divisors",
    "is_primitive",
    "refine",
    "canonical_refinement_z2",
]


class LatticeError(ValueError):
    """Raised for invalid lattice input (degenerate, non-antisymmetric...)."""


def _as_int_matrix(mat) -> List[List[int]]:
    rows = [list(r) for r in mat]
    out = []
    for r in rows:
        row = []
        for v in r:
            iv = int(v)
            if iv != v:
                raise LatticeError(f"non-integer entry {v!r}")
            row.append(iv)
        out.append(row)
    return out


def integer_det(mat) -> int:
    """Exact determinant of a square integer matrix (fraction-free Bareiss)."""
    a = _as_int_matrix(mat)
    n = len(a)
    if any(len(r) != n for r in a):
        raise LatticeError("matrix is not square")
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


@dataclass(frozen=True)
class SymplecticLattice:
    """Rank ``2r`` lattice ``Z^{2r}`` with an antisymmetric integer pairing.

    Parameters
    ----------
    pairing : sequence of sequences of int
        Antisymmetric nondegenerate ``2r x 2r`` matrix.
    """

    pairing: Tuple[Tuple[int, ...], ...]

    def __init__(self, pairing):
        p = _as_int_matrix(pairing)
        n = len(p)
        if n == 0 or n % 2 or any(len(r) != n for r in p):
            raise LatticeError("pairing must be a square matrix of even size")
        for i in range(n):
            for j in range(n):
                if p[i][j] != -p[j][i]:
                    raise LatticeError("pairing is not antisymmetric")
        if integer_det(p) == 0:
            raise LatticeError("pairing is degenerate (det = 0)")
        object.__setattr__(self, "pairing", tuple(tuple(r) for r in p))

    @property
    def rank(self) -> int:
        return len(self.pairing)

    def pair(self, x: Sequence[int], y: Sequence[int]) -> int:
        P = self.pairing
        n = len(P)
        return sum(x[i] * P[i][j] * y[j] for i in range(n) if x[i] for j in range(n) if y[j])

    def to_json(self) -> dict:
        return {"rank": self.rank, "pairing": [list(r) for r in self.pairing]}

    @classmethod
    def from_json(cls, obj: dict) -> "SymplecticLattice":
        lat = cls(obj["pairing"])
        if "rank" in obj and int(obj["rank"]) != lat.rank:
            raise LatticeError(f"declared rank {obj['rank']} != matrix size {lat.rank}")
        return lat


@dataclass(frozen=True)
class FrobeniusBasis:
    """Frobenius basis: ``e``, ``m`` integer vectors and divisors ``p``."""

    e: Tuple[Tuple[int, ...], ...]
    m: Tuple[Tuple[int, ...], ...]
    p: Tuple[int, ...]

    @property
    def r(self) -> int:
        return len(self.p)

    def matrix(self) -> List[List[int]]:
        """Change-of-basis matrix with columns ``e_1..e_r, m_1..m_r``."""
        cols = list(self.e) + list(self.m)
        n = len(cols)
        return [[cols[j][i] for j in range(n)] for i in range(n)]

    def violations(self, lat: SymplecticLattice) -> List[str]:
        """List every broken Frobenius invariant (empty when valid)."""
        bad = []
        r = self.r
        for i in range(r):
            for j in range(r):
                want = self.p[i] if i == j else 0
                if lat.pair(self.m[i], self.e[j]) != want:
                    bad.append(f"<m{i},e{j}> != {want}")
                if lat.pair(self.e[i], self.e[j]) != 0:
                    bad.append(f"<e{i},e{j}> != 0")
                if lat.pair(self.m[i], self.m[j]) != 0:
                    bad.append(f"<m{i},m{j}> != 0")
        for i in range(r):
            if self.p[i] <= 0:
                bad.append(f"p{i} not positive")
            if i and self.p[i] % self.p[i - 1]:
                bad.append(f"p{i - 1} does not divide p{i}")
        if abs(integer_det(self.matrix())) != 1:
            bad.append("not a Z-basis")
        return bad

    def coordinates(self, v: Sequence[int]) -> Tuple[List[int], List[int]]:
        """Integer coordinates ``(a, b)`` with ``v = sum a_i e_i + b_i m_i``."""
        n = len(v)
        B = self.matrix()
        aug = [[Fraction(B[i][j]) for j in range(n)] + [Fraction(v[i])] for i in range(n)]
        x = _solve_exact(aug, n)
        if any(c.denominator != 1 for c in x):
            raise LatticeError("vector is not in the lattice")
        x = [int(c) for c in x]
        return x[: self.r], x[self.r:]

    def to_json(self) -> dict:
        return {"e": [list(v) for v in self.e], "m": [list(v) for v in self.m], "p": list(self.p)}


def _solve_exact(aug: List[List[Fraction]], n: int) -> List[Fraction]:
    for c in range(n):
        piv = next(i for i in range(c, n) if aug[i][c] != 0)
        aug[c], aug[piv] = aug[piv], aug[c]
        for i in range(n):
            if i != c and aug[i][c] != 0:
                f = aug[i][c] / aug[c][c]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[c])]
    return [aug[i][n] / aug[i][i] for i in range(n)]


# -- Smith normal form -------------------------------------------------------

def smith_normal_form(mat) -> Tuple[List[List[int]], List[List[int]], List[List[int]]]:
    """Smith normal form ``D = U A V`` with unimodular ``U``, ``V``.

    Returns
    -------
    D, U, V : list of lists of int
        ``D`` is diagonal with non-negative entries ``d_1 | d_2 | ...``.
    """
    A = _as_int_matrix(mat)
    m = len(A)
    n = len(A[0]) if m else 0
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for M_ in (A, V):
            for row in M_:
                row[i], row[j] = row[j], row[i]

    def add_row(src, dst, k):  # row_dst += k row_src
        A[dst] = [a + k * b for a, b in zip(A[dst], A[src])]
        U[dst] = [a + k * b for a, b in zip(U[dst], U[src])]

    def add_col(src, dst, k):  # col_dst += k col_src
        for M_ in (A, V):
            for row in M_:
                row[dst] += k * row[src]

    t = 0
    while t < min(m, n):
        nz = [(abs(A[i][j]), i, j) for i in range(t, m) for j in range(t, n) if A[i][j]]
        if not nz:
            break
        _, i0, j0 = min(nz)
        swap_rows(t, i0)
        swap_cols(t, j0)
        while True:
            done = True
            for i in range(t + 1, m):
                if A[i][t]:
                    q = A[i][t] // A[t][t]
                    add_row(t, i, -q)
                    if A[i][t]:
                        swap_rows(t, i)
                        done = False
            for j in range(t + 1, n):
                if A[t][j]:
                    q = A[t][j] // A[t][t]
                    add_col(t, j, -q)
                    if A[t][j]:
                        swap_cols(t, j)
                        done = False
            if not done:
                continue
            # enforce divisibility of the remaining block
            bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n)
                        if A[i][j] % A[t][t]), None)
            if bad is None:
                break
            add_row(bad[0], t, 1)
        if A[t][t] < 0:
            A[t] = [-a for a in A[t]]
            U[t] = [-a for a in U[t]]
        t += 1
    return A, U, V


def elementary_divisors(mat) -> List[int]:
    """Nonzero diagonal of the Smith normal form."""
    D, _, _ = smith_normal_form(mat)
    return [D[i][i] for i in range(min(len(D), len(D[0]) if D else 0)) if D[i][i]]


def is_primitive(sub_vectors: Iterable[Sequence[int]], lat: Optional[SymplecticLattice] = None) -> bool:
    """True iff the vectors span a primitive sublattice of ``Z^n``.

    Parameters
    ----------
    sub_vectors : iterable of integer vectors
        Must be linearly independent over Q.
    lat : SymplecticLattice, optional
        Only used to check the ambient dimension.
    """
    vecs = _as_int_matrix(sub_vectors)
    if not vecs:
        return True
    if lat is not None and any(len(v) != lat.rank for v in vecs):
        raise LatticeError("vector length does not match lattice rank")
    divs = elementary_divisors(vecs)
    if len(divs) < len(vecs):
        raise LatticeError("vectors are linearly dependent")
    return all(d == 1 for d in divs)


# -- Frobenius reduction -----------------------------------------------------

def _pair_vec(P, x, y):
    n = len(P)
    return sum(x[i] * P[i][j] * y[j] for i in range(n) if x[i] for j in range(n) if y[j])


def _sub(x, y, k=1):
    return [a - k * b for a, b in zip(x, y)]


def frobenius_basis(lat: SymplecticLattice, rng=None) -> FrobeniusBasis:
    """Frobenius basis of ``lat`` by pivoted symplectic Gram-Schmidt.

    The pivot is the generator pair with least nonzero ``|<v_a, v_b>|``,
    ties broken by lexicographic index, or at random when ``rng`` (any
    object with ``choice``) is supplied.  Each round either lowers the
    pivot value by a Euclidean step or splits off one hyperbolic block,
    so the loop terminates.
    """
    if not isinstance(lat, SymplecticLattice):
        lat = SymplecticLattice(lat)
    P = lat.pairing
    n = lat.rank
    gens = [[int(i == j) for j in range(n)] for i in range(n)]
    es, ms, ps = [], [], []
    while gens:
        k = len(gens)
        best = None
        cands = []
        for a in range(k):
            for b in range(a + 1, k):
                g = _pair_vec(P, gens[a], gens[b])
                if g == 0:
                    continue
                if best is None or abs(g) < best:
                    best, cands = abs(g), [(a, b)]
                elif abs(g) == best:
                    cands.append((a, b))
        if best is None:
            raise LatticeError("pairing is degenerate on the remaining block")
        a, b = cands[0] if rng is None else cands[int(rng.choice(len(cands)))]
        alpha, beta = gens[a], gens[b]
        d = _pair_vec(P, alpha, beta)
        if d < 0:
            alpha, beta, d = beta, alpha, -d
        rest = [g for i, g in enumerate(gens) if i not in (a, b)]
        restart = False
        # Euclid: make d divide the pairing of every generator with the pivot
        for idx, c in enumerate(rest):
            cb = _pair_vec(P, c, beta)
            if cb % d:
                rest[idx] = _sub(c, alpha, cb // d)
                restart = True
                break
            ca = _pair_vec(P, c, alpha)
            if ca % d:
                rest[idx] = _sub(c, beta, -(ca // d))
                restart = True
                break
        if restart:
            gens = [alpha, beta] + rest
            continue
        # orthogonalize against the hyperbolic pair
        comp = []
        for c in rest:
            x = _pair_vec(P, c, beta) // d
            y = -(_pair_vec(P, c, alpha) // d)
            comp.append([ci - x * ai - y * bi for ci, ai, bi in zip(c, alpha, beta)])
        bad = next((i for i in range(len(comp)) for j in range(i + 1, len(comp))
                    if _pair_vec(P, comp[i], comp[j]) % d), None)
        if bad is not None:
            beta = [u + v for u, v in zip(beta, comp[bad])]
            gens = [alpha, beta] + comp
            continue
        ms.append(tuple(alpha))
        es.append(tuple(beta))
        ps.append(d)
        gens = comp
    return FrobeniusBasis(tuple(es), tuple(ms), tuple(ps))


def dual_divisors(b: FrobeniusBasis, rescale: bool = False):
    """Pairing values ``1/p_i`` of the dual lattice; ``p_r/p_i`` if ``rescale``."""
    if rescale:
        return tuple(b.p[-1] // pi for pi in b.p)
    return tuple(Fraction(1, pi) for pi in b.p)


# -- quadratic refinements ---------------------------------------------------

@dataclass(frozen=True)
class QuadraticRefinement:
    """Sign function ``sigma`` on the lattice built from seed values.

    ``sigma(sum a_i e_i + b_i m_i) = prod (-1)^{a_i b_i p_i} s_e_i^{a_i} s_m_i^{b_i}``.
    """

    basis: FrobeniusBasis
    seeds_e: Tuple[int, ...]
    seeds_m: Tuple[int, ...]

    def from_coordinates(self, a: Sequence[int], b: Sequence[int]) -> int:
        s = 1
        for ai, bi, p, se, sm in zip(a, b, self.basis.p, self.seeds_e, self.seeds_m):
            if (ai * bi * p) % 2:
                s = -s
            if ai % 2 and se < 0:
                s = -s
            if bi % 2 and sm < 0:
                s = -s
        return s

    def __call__(self, v: Sequence[int]) -> int:
        a, b = self.basis.coordinates(v)
        return self.from_coordinates(a, b)


def refine(b: FrobeniusBasis, seeds: Optional[Dict] = None) -> QuadraticRefinement:
    """Quadratic refinement with seed values on the basis vectors.

    Parameters
    ----------
    seeds : dict, optional
        Keys ``("e", i)`` or ``("m", i)`` mapped to ``+1`` or ``-1``;
        missing keys default to ``+1``.
    """
    seeds = seeds or {}
    for k, v in seeds.items():
        if v not in (1, -1):
            raise LatticeError(f"seed {k} must be +1 or -1")
    se = tuple(int(seeds.get(("e", i), 1)) for i in range(b.r))
    sm = tuple(int(seeds.get(("m", i), 1)) for i in range(b.r))
    return QuadraticRefinement(b, se, sm)


def canonical_refinement_z2(p: int, q: int) -> int:
    """The SL(2,Z)-invariant refinement ``(-1)^{p + q + pq}`` on ``Z^2``."""
    return -1 if (p + q + p * q) % 2 else 1

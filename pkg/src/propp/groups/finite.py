"""Finite p-groups stored as full Cayley tables."""
from __future__ import annotations

from collections import deque
from functools import cached_property
from itertools import product

import numpy as np

from ..errors import (
    BadIdentity,
    NotAHomomorphism,
    NotASubgroup,
    NotAssociative,
    NotPPower,
    PrimeMismatch,
)
from ..linalg import FpMatrix
from ..todd_coxeter import coset_count
from ..words import invert, parse_word, reduce_word

MAX_ORDER = 512

_DEFAULT_NAMES = "abcdefghijklmnopqrsuvwxyz"  # no t: stable letters are t_*


def default_names(k, taken=()):
    out = [c for c in _DEFAULT_NAMES if c not in taken][:k]
    i = 1
    while len(out) < k:
        out.append(f"g{i}")
        i += 1
    return tuple(out)


def is_prime(p):
    return p >= 2 and all(p % q for q in range(2, int(p**0.5) + 1))


def p_power_exponent(n, p):
    """k with n == p**k, or None."""
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k if n == 1 else None


class FiniteGroup:
    """A finite group given by its multiplication table.

    ``gens`` are element indices whose ``names`` are the local generator
    symbols used in words and presentations.  Construction checks only the
    shape of the table; call :meth:`validate` for the group axioms.
    """

    def __init__(self, table, prime, gens=None, names=None, perms=None):
        table = np.asarray(table, dtype=np.int32)
        n = table.shape[0]
        if table.ndim != 2 or table.shape != (n, n):
            raise NotAssociative("table must be square")
        if n > MAX_ORDER:
            raise ValueError(f"groups of order > {MAX_ORDER} are not supported")
        if table.min(initial=0) < 0 or table.max(initial=0) >= n:
            raise NotAssociative("table entries out of range")
        if not is_prime(prime):
            raise PrimeMismatch(f"{prime} is not prime")
        self.table = table
        self.table.setflags(write=False)
        self.n = n
        self.prime = prime
        self.perms = perms
        self._gens = None if gens is None else tuple(int(g) for g in gens)
        self._names = None if names is None else tuple(names)

    # construction ----------------------------------------------------
    @classmethod
    def from_perms(cls, perms, prime, names=None):
        """Group generated by permutations (lists of images of 0..m-1)."""
        perms = [tuple(int(x) for x in pm) for pm in perms]
        if not perms:
            return cls.trivial(prime)
        m = len(perms[0])
        ident = tuple(range(m))
        elems = [ident]
        index = {ident: 0}
        queue = deque([ident])
        while queue:
            x = queue.popleft()
            for g in perms:
                y = tuple(g[x[i]] for i in range(m))  # apply x then g
                if y not in index:
                    if len(elems) >= MAX_ORDER:
                        raise ValueError(f"group order exceeds {MAX_ORDER}")
                    index[y] = len(elems)
                    elems.append(y)
                    queue.append(y)
        n = len(elems)
        table = np.empty((n, n), dtype=np.int32)
        for i, x in enumerate(elems):
            for j, y in enumerate(elems):
                table[i, j] = index[tuple(y[x[k]] for k in range(m))]
        gens = [index[g] for g in perms]
        if names is None:
            names = default_names(len(gens))
        return cls(table, prime, gens=gens, names=names, perms=perms)

    @classmethod
    def trivial(cls, prime):
        return cls([[0]], prime, gens=(), names=())

    @classmethod
    def cyclic(cls, n, prime, name="a"):
        table = [[(i + j) % n for j in range(n)] for i in range(n)]
        if n == 1:
            return cls.trivial(prime)
        return cls(table, prime, gens=(1,), names=(name,))

    @classmethod
    def dihedral(cls, m, prime=2, names=("r", "s")):
        """Dihedral group of order 2m on generators r (rotation), s (reflection)."""
        r = [(i + 1) % m for i in range(m)]
        s = [(-i) % m for i in range(m)]
        return cls.from_perms([r, s], prime, names=names)

    @classmethod
    def quaternion(cls, names=("i", "j")):
        # Q8 as permutations of {±1, ±i, ±j, ±k} coded 0..7 by left multiplication
        elems = ["1", "i", "j", "k", "-1", "-i", "-j", "-k"]
        mult = {
            ("1", x): x for x in "1ijk"
        }
        mult.update({
            ("i", "1"): "i", ("i", "i"): "-1", ("i", "j"): "k", ("i", "k"): "-j",
            ("j", "1"): "j", ("j", "i"): "-k", ("j", "j"): "-1", ("j", "k"): "i",
            ("k", "1"): "k", ("k", "i"): "j", ("k", "j"): "-i", ("k", "k"): "-1",
        })

        def m(x, y):
            sx = x.startswith("-")
            sy = y.startswith("-")
            r = mult[(x.lstrip("-"), y.lstrip("-"))]
            if sx ^ sy:
                r = r[1:] if r.startswith("-") else "-" + r
            return r

        idx = {e: i for i, e in enumerate(elems)}
        table = [[idx[m(x, y)] for y in elems] for x in elems]
        return cls(table, 2, gens=(idx["i"], idx["j"]), names=names)

    @classmethod
    def direct_product(cls, g, h, names=None):
        if g.prime != h.prime:
            raise PrimeMismatch("factors have different primes")
        n, m = g.n, h.n
        table = np.empty((n * m, n * m), dtype=np.int32)
        for a in range(n):
            for b in range(m):
                row = g.table[a][:, None] * m + h.table[b][None, :]
                table[a * m + b] = row.reshape(-1)
        gens = [x * m + h.identity for x in g.gens] + [g.identity * m + y for y in h.gens]
        if names is None:
            names = default_names(len(gens))
        return cls(table, g.prime, gens=gens, names=names)

    # basic data ------------------------------------------------------
    def __len__(self):
        return self.n

    @property
    def order(self):
        return self.n

    @property
    def is_trivial(self):
        return self.n == 1

    @property
    def is_finite(self):
        return True

    kind = "finite"

    @cached_property
    def identity(self):
        for e in range(self.n):
            if np.array_equal(self.table[e], np.arange(self.n)) and np.array_equal(
                self.table[:, e], np.arange(self.n)
            ):
                return e
        raise BadIdentity("no two-sided identity element")

    @cached_property
    def inverses(self):
        e = self.identity
        inv = [None] * self.n
        for x in range(self.n):
            hits = np.nonzero(self.table[x] == e)[0]
            if len(hits) != 1 or self.table[hits[0], x] != e:
                raise BadIdentity(f"element {x} has no unique inverse")
            inv[x] = int(hits[0])
        return tuple(inv)

    def mul(self, x, y):
        return int(self.table[x, y])

    def inv(self, x):
        return self.inverses[x]

    def pow(self, x, k):
        if k < 0:
            x, k = self.inv(x), -k
        r = self.identity
        for _ in range(k):
            r = self.mul(r, x)
        return r

    def conj(self, x, g):
        """g^-1 x g."""
        return self.mul(self.mul(self.inv(g), x), g)

    def element_order(self, x):
        k, y = 1, x
        while y != self.identity:
            y = self.mul(y, x)
            k += 1
        return k

    def validate(self):
        """Check group axioms by full enumeration and the p-power order."""
        t = self.table
        n = self.n
        # associativity, chunked to keep memory modest
        for start in range(0, n, 64):
            a = np.arange(start, min(n, start + 64))
            left = t[t[a][:, :, None], np.arange(n)[None, None, :]]  # (ab)c
            right = t[a[:, None, None], t[None, :, :]]  # a(bc)
            if not np.array_equal(left, right):
                raise NotAssociative("multiplication table is not associative")
        self.identity
        self.inverses
        for row in t:
            if len(set(row.tolist())) != n:
                raise NotAssociative("table rows are not permutations")
        if p_power_exponent(n, self.prime) is None:
            raise NotPPower(f"|G| = {n} is not a power of {self.prime}")
        if self._gens is not None and self.closure(self._gens) != frozenset(range(n)):
            raise NotASubgroup("declared generators do not generate the group")
        return None

    # generators and words ---------------------------------------------
    @property
    def gens(self):
        if self._gens is None:
            self._gens = self.burnside_basis()
        return self._gens

    @property
    def gen_names(self):
        if self._names is None:
            self._names = default_names(len(self.gens))
        return self._names

    def burnside_basis(self):
        """Lexicographically least elements whose images span G/Phi(G)."""
        phi = self.frattini_subgroup()
        chosen = []
        span = phi
        for x in range(self.n):
            if x not in span:
                chosen.append(x)
                span = self.closure(list(phi) + chosen)
            if len(span) == self.n:
                break
        return tuple(chosen)

    @cached_property
    def _words(self):
        """Shortest words (int-coded in gen_names) for every element."""
        words = {self.identity: ()}
        queue = deque([self.identity])
        letters = []
        for i, g in enumerate(self.gens):
            letters.append((i + 1, g))
            letters.append((-(i + 1), self.inv(g)))
        while queue:
            x = queue.popleft()
            for letter, g in letters:
                y = self.mul(x, g)
                if y not in words:
                    words[y] = words[x] + (letter,)
                    queue.append(y)
        return words

    def word_of(self, x):
        return self._words[x]

    def evaluate(self, word):
        x = self.identity
        for letter in word:
            g = self.gens[abs(letter) - 1]
            x = self.mul(x, g if letter > 0 else self.inv(g))
        return x

    def parse(self, text):
        return self.evaluate(parse_word(text, self.gen_names))

    def presentation(self):
        """(generator names, relators) for this group, verified by coset enumeration."""
        k = len(self.gens)
        if k == 0:
            return (), ()
        rels = [tuple([i + 1] * self.element_order(g)) for i, g in enumerate(self.gens)]
        for i in range(k):
            for j in range(i + 1, k):
                # g_i^-1 g_j g_i expressed as a word
                x = self.conj(self.gens[j], self.gens[i])
                rels.append(reduce_word((-(i + 1), j + 1, i + 1) + invert(self.word_of(x))))
        rels = [r for r in rels if r]
        try:
            ok = coset_count(k, rels, max_cosets=max(64, 8 * self.n)) == self.n
        except Exception:
            ok = False
        if not ok:
            rels = self._cayley_relators()
        return self.gen_names, tuple(rels)

    def _cayley_relators(self):
        rels = set()
        for x, wx in self._words.items():
            for i, g in enumerate(self.gens):
                y = self.mul(x, g)
                r = reduce_word(wx + (i + 1,) + invert(self._words[y]))
                if r:
                    rels.add(r)
        return sorted(rels, key=lambda r: (len(r), r))

    # subgroups -------------------------------------------------------
    def closure(self, elements):
        elements = [int(x) for x in elements]
        members = {self.identity}
        frontier = [self.identity]
        while frontier:
            new = []
            for x in frontier:
                for g in elements:
                    y = self.mul(x, g)
                    if y not in members:
                        members.add(y)
                        new.append(y)
            frontier = new
        return frozenset(members)

    def subgroup(self, elements):
        return Subgroup(self, self.closure(elements))

    def whole(self):
        return Subgroup(self, frozenset(range(self.n)))

    def is_subgroup(self, members):
        members = frozenset(members)
        if self.identity not in members:
            return False
        return all(self.mul(x, self.inv(y)) in members for x in members for y in members)

    def normalizer(self, h):
        """N_G(H) = {g : g^-1 H g = H}."""
        members = h.members if isinstance(h, Subgroup) else frozenset(h)
        if not self.is_subgroup(members):
            raise NotASubgroup("argument is not a subgroup")
        gens = Subgroup(self, members).generators()
        norm = [g for g in range(self.n) if all(self.conj(x, g) in members for x in gens)]
        return Subgroup(self, frozenset(norm))

    def conjugate_subgroup(self, members, g):
        return frozenset(self.conj(x, g) for x in members)

    def are_conjugate(self, a, b):
        """Return g with g^-1 A g = B, or None."""
        a, b = frozenset(a), frozenset(b)
        if len(a) != len(b):
            return None
        for g in range(self.n):
            if self.conjugate_subgroup(a, g) == b:
                return g
        return None

    def frattini_subgroup(self):
        p = self.prime
        gens = {self.pow(x, p) for x in range(self.n)}
        for x in range(self.n):
            for y in range(x + 1, self.n):
                gens.add(self.mul(self.mul(self.inv(x), self.inv(y)), self.mul(x, y)))
        return self.closure(gens)

    @cached_property
    def _frattini(self):
        phi = self.frattini_subgroup()
        k = p_power_exponent(self.n // len(phi), self.prime)
        if k is None:
            raise NotPPower("G/Phi(G) is not a p-group")
        p = self.prime
        basis = []
        span = phi
        for x in range(self.n):
            if x not in span:
                basis.append(x)
                span = self.closure(list(phi) + basis)
        coset_of = {}
        for coords in product(range(p), repeat=k):
            y = self.identity
            for b, c in zip(basis, coords):
                y = self.mul(y, self.pow(b, c))
            for f in phi:
                coset_of[self.mul(y, f)] = coords
        return k, tuple(coset_of[x] for x in range(self.n))

    def frattini_quotient(self):
        """(dim, projection) with projection(x) the F_p coordinates of x Phi(G)."""
        k, proj = self._frattini
        return k, (lambda x: proj[x])

    def h1_vector(self, x):
        return self._frattini[1][x]

    @property
    def h1_dim(self):
        return self._frattini[0]

    def gen_matrix(self):
        """Columns: H1 images of the declared generators."""
        k = self.h1_dim
        return FpMatrix.from_columns([self.h1_vector(g) for g in self.gens], self.prime, k)

    # comparison ----------------------------------------------------
    def __eq__(self, other):
        return (
            isinstance(other, FiniteGroup)
            and self.n == other.n
            and self.prime == other.prime
            and np.array_equal(self.table, other.table)
            and self.gens == other.gens
        )

    def __hash__(self):
        return hash((self.n, self.prime, self.table.tobytes()))

    def __repr__(self):
        return f"FiniteGroup(order={self.n}, p={self.prime}, gens={self.gen_names})"

    def describe(self):
        return f"|G|={self.n}"


class Subgroup:
    """A subgroup stored as an explicit element set of its parent."""

    def __init__(self, parent, members):
        self.parent = parent
        self.members = frozenset(int(x) for x in members)

    @property
    def order(self):
        return len(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, x):
        return x in self.members

    def __iter__(self):
        return iter(sorted(self.members))

    def __eq__(self, other):
        if isinstance(other, Subgroup):
            return self.members == other.members
        return self.members == frozenset(other)

    def __hash__(self):
        return hash(self.members)

    def __repr__(self):
        return f"Subgroup({sorted(self.members)})"

    def is_closed(self):
        return self.parent.is_subgroup(self.members)

    def generators(self):
        """A small generating set (greedy, lexicographic)."""
        gens = []
        span = frozenset([self.parent.identity])
        for x in sorted(self.members):
            if x not in span:
                gens.append(x)
                span = self.parent.closure(gens)
            if len(span) == len(self.members):
                break
        return gens

    def as_group(self, names=None):
        """(FiniteGroup, embedding) with the subgroup re-indexed 0..k-1."""
        g = self.parent
        elems = sorted(self.members, key=lambda x: (x != g.identity, x))
        idx = {x: i for i, x in enumerate(elems)}
        table = [[idx[g.mul(x, y)] for y in elems] for x in elems]
        gens = [idx[x] for x in self.generators()]
        if names is None:
            names = default_names(len(gens))
        sub = FiniteGroup(table, g.prime, gens=gens, names=names)
        return sub, GroupHom(sub, g, tuple(elems))


class GroupHom:
    """A homomorphism between finite groups given element-wise."""

    def __init__(self, source, target, image):
        self.source = source
        self.target = target
        self.image = tuple(int(x) for x in image)

    @classmethod
    def from_generators(cls, source, target, gen_images):
        """Extend generator images to a homomorphism, checking consistency."""
        gen_images = [int(x) for x in gen_images]
        if len(gen_images) != len(source.gens):
            raise NotAHomomorphism("wrong number of generator images")
        image = {source.identity: target.identity}
        queue = deque([source.identity])
        while queue:
            x = queue.popleft()
            for g, gi in zip(source.gens, gen_images):
                y = source.mul(x, g)
                yi = target.mul(image[x], gi)
                if y in image:
                    if image[y] != yi:
                        raise NotAHomomorphism("generator images do not extend")
                else:
                    image[y] = yi
                    queue.append(y)
        hom = cls(source, target, [image[x] for x in range(source.n)])
        if not hom.is_homomorphism():
            raise NotAHomomorphism("generator images do not extend")
        return hom

    def __call__(self, x):
        return self.image[x]

    def is_homomorphism(self):
        s, t = self.source, self.target
        return all(
            self.image[s.mul(x, y)] == t.mul(self.image[x], self.image[y])
            for x in range(s.n)
            for y in range(s.n)
        )

    def is_injective(self):
        return len(set(self.image)) == self.source.n

    def image_members(self):
        return frozenset(self.image)

    def preimage(self, y):
        try:
            return self.image.index(y)
        except ValueError:
            return None

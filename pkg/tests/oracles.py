"""Independent brute-force oracles used to freeze derived values."""
from __future__ import annotations

from collections import deque
from itertools import product

import numpy as np

from propp.words import invert, reduce_word


def cyclic_core(word):
    w = list(reduce_word(tuple(word)))
    while len(w) > 1 and w[0] == -w[-1]:
        w = w[1:-1]
    return tuple(w)


def reduced_words(rank, max_len):
    """All nontrivial freely reduced int-coded words of length <= max_len."""
    letters = [i for k in range(1, rank + 1) for i in (k, -k)]
    out = []
    frontier = [()]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for x in letters:
                if w and w[-1] == -x:
                    continue
                nxt.append(w + (x,))
        out.extend(nxt)
        frontier = nxt
    return out


def elementary_moves(rank):
    """Generator images of the elementary Nielsen automorphisms."""
    gens = [(i,) for i in range(1, rank + 1)]
    moves = []
    for i in range(rank):
        img = list(gens)
        img[i] = (-(i + 1),)
        moves.append(img)
        for j in range(rank):
            if i == j:
                continue
            for left, sign in product((False, True), (1, -1)):
                img = list(gens)
                extra = (sign * (j + 1),)
                img[i] = extra + gens[i] if left else gens[i] + extra
                moves.append(img)
            img = list(gens)
            img[i], img[j] = gens[j], gens[i]
            moves.append(img)
    return moves


def substitute(images, word):
    out = ()
    for x in word:
        w = images[abs(x) - 1]
        out = out + (w if x > 0 else invert(w))
    return reduce_word(out)


def in_proper_free_factor(word, rank, depth=6):
    """Nielsen search: does an automorphic image of the cyclic word miss a generator?

    In rank 2 every proper free factor is cyclic, so this decides whether
    <word> lies in a proper free factor (within the search depth).
    """
    moves = elementary_moves(rank)
    start = cyclic_core(reduce_word(tuple(word)))
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        w, d = queue.popleft()
        if len({abs(x) for x in w}) < rank:
            return True
        if d == depth:
            continue
        for m in moves:
            u = cyclic_core(substitute(m, w))
            if u not in seen:
                seen.add(u)
                queue.append((u, d + 1))
    return False


def nielsen_basis_with(word, rank, depth=6):
    """A basis reachable by <= depth Nielsen moves that contains `word`, or None."""
    target = reduce_word(tuple(word))
    start = tuple((i,) for i in range(1, rank + 1))
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        basis, d = queue.popleft()
        if target in basis:
            return basis
        if d == depth:
            continue
        for m in elementary_moves(rank):
            nb = tuple(substitute(basis, g) for g in m)
            if nb not in seen:
                seen.add(nb)
                queue.append((nb, d + 1))
    return None


# --- C4 amalgamated with C4 over C2 as a matrix group ---------------------------------
#
# a -> S and b -> M S M^-1 in SL(2, Z).  Both have order 4 with a^2 = b^2 = -I;
# modulo -I they are two involutions whose product has infinite order, so the
# representation is faithful on the amalgam.

_S = np.array([[0, -1], [1, 0]], dtype=object)
_M = np.array([[1, 2], [0, 1]], dtype=object)
_MI = np.array([[1, -2], [0, 1]], dtype=object)
AMALGAM_GENS = {"a": _S, "b": _M.dot(_S).dot(_MI)}


def _key(m):
    return tuple(int(x) for x in m.flatten())


def _subgroup(gen):
    out = [np.identity(2, dtype=object)]
    x = gen
    while _key(x) != _key(out[0]):
        out.append(x)
        x = x.dot(gen)
    return out


def amalgam_ball_counts(radius):
    """(vertices, edges, degrees) of the radius-r ball of the Bass-Serre tree.

    Vertices are left cosets g<a> and g<b>, edges are cosets g<a^2>; each
    coset is stored as the frozen set of its matrices.
    """
    sub = {"u": _subgroup(AMALGAM_GENS["a"]), "w": _subgroup(AMALGAM_GENS["b"])}
    edge_sub = _subgroup(AMALGAM_GENS["a"].dot(AMALGAM_GENS["a"]))

    def coset(g, hs):
        return frozenset(_key(g.dot(h)) for h in hs)

    ident = np.identity(2, dtype=object)
    base = ("u", coset(ident, sub["u"]))
    reps = {base: ident}
    depth = {base: 0}
    edges = set()
    degree = {}
    queue = deque([base])
    while queue:
        vert = queue.popleft()
        side, _ = vert
        other = "w" if side == "u" else "u"
        g = reps[vert]
        nbrs = set()
        for h in sub[side]:
            gh = g.dot(h)
            e = coset(gh, edge_sub)
            nxt = (other, coset(gh, sub[other]))
            nbrs.add(nxt)
            if depth[vert] < radius:
                edges.add(e)
                if nxt not in depth:
                    depth[nxt] = depth[vert] + 1
                    reps[nxt] = gh
                    queue.append(nxt)
        degree[vert] = len(nbrs)
    return len(depth), len(edges), degree

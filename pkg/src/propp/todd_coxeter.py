"""Coset enumeration (Hasse-Lee-Trotter style with coincidence handling).

Used to certify that a candidate finite presentation defines a group of the
expected order, and as an independent index oracle in tests.
"""
from __future__ import annotations

from .errors import BudgetExceeded


def _col(x):
    # generator i+1 -> column 2i, inverse -> 2i+1
    return 2 * (x - 1) if x > 0 else 2 * (-x - 1) + 1


def enumerate_cosets(ngens, relators, subgroup=(), max_cosets=100_000):
    """Return the coset table of <subgroup> in <gens | relators>.

    The table is a list of rows, each with 2*ngens entries (generator and
    inverse columns).  Raises BudgetExceeded if more than ``max_cosets``
    cosets are defined.
    """
    ncols = 2 * ngens
    inv_col = [c ^ 1 for c in range(ncols)]
    table = [[None] * ncols]
    parent = [0]  # union-find for coincidences; parent[i] == i when live

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    def define(c, col):
        if len(table) >= max_cosets:
            raise BudgetExceeded(f"coset enumeration exceeded {max_cosets} cosets")
        d = len(table)
        table.append([None] * ncols)
        parent.append(d)
        table[c][col] = d
        table[d][inv_col[col]] = c
        return d

    def coincidence(a, b):
        queue = [(a, b)]
        while queue:
            a, b = queue.pop()
            a, b = find(a), find(b)
            if a == b:
                continue
            if a > b:
                a, b = b, a
            parent[b] = a
            for col in range(ncols):
                t = table[b][col]
                if t is None:
                    continue
                table[b][col] = None
                ic = inv_col[col]
                t = find(t)
                if table[t][ic] is not None and find(table[t][ic]) == b:
                    table[t][ic] = None
                ta = table[a][col]
                if ta is None:
                    table[a][col] = t
                    if table[t][ic] is None:
                        table[t][ic] = a
                    else:
                        queue.append((table[t][ic], a))
                else:
                    queue.append((ta, t))

    def scan_and_fill(c, word):
        cols = [_col(x) for x in word]
        if not cols:
            return
        while True:
            c = find(c)
            f, i = c, 0
            b, j = c, len(cols) - 1
            while i <= j and table[find(f)][cols[i]] is not None:
                f = find(table[find(f)][cols[i]])
                i += 1
            if i > j:
                if find(f) != find(c):
                    coincidence(f, c)
                return
            while j >= i and table[find(b)][inv_col[cols[j]]] is not None:
                b = find(table[find(b)][inv_col[cols[j]]])
                j -= 1
            if j < i:
                coincidence(f, b)
                return
            if i == j:
                f, b = find(f), find(b)
                table[f][cols[i]] = b
                table[b][inv_col[cols[i]]] = f
                return
            define(find(f), cols[i])

    for w in subgroup:
        scan_and_fill(0, w)
    c = 0
    while c < len(table):
        if find(c) == c:
            for r in relators:
                scan_and_fill(c, r)
                if find(c) != c:
                    break
            if find(c) == c:
                for col in range(ncols):
                    if find(c) != c:
                        break
                    if table[c][col] is None:
                        define(c, col)
        c += 1
    live = [i for i in range(len(table)) if find(i) == i]
    index = {old: new for new, old in enumerate(live)}
    return [[index[find(table[i][col])] for col in range(ncols)] for i in live]


def coset_count(ngens, relators, subgroup=(), max_cosets=100_000):
    return len(enumerate_cosets(ngens, relators, subgroup, max_cosets))

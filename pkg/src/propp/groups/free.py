"""Finitely generated free groups, Stallings automata and mod-p vectors."""
from __future__ import annotations

from collections import deque
from functools import cached_property

from ..errors import PrimeMismatch, TrivialSubgroup, TrivialWord, UnreducedWord
from ..linalg import FpMatrix, RowOpTranscript
from ..verdict import Verdict
from ..words import (
    cyclic_reduce,
    format_word,
    invert,
    is_reduced,
    mul,
    parse_word,
    reduce_word,
    root,
)
from .finite import is_prime


class FreeGroup:
    """Free group on named generators, tagged with the working prime."""

    kind = "free"

    def __init__(self, names, prime):
        names = tuple(names)
        if not names:
            raise ValueError("free groups need rank >= 1")
        if len(set(names)) != len(names):
            raise ValueError("duplicate generator names")
        if not is_prime(prime):
            raise PrimeMismatch(f"{prime} is not prime")
        self.names = names
        self.prime = prime

    @property
    def rank(self):
        return len(self.names)

    @property
    def gen_names(self):
        return self.names

    @property
    def gens(self):
        return tuple((i + 1,) for i in range(self.rank))

    @property
    def order(self):
        return None

    @property
    def is_trivial(self):
        return False

    @property
    def is_finite(self):
        return False

    @property
    def identity(self):
        return ()

    @property
    def h1_dim(self):
        return self.rank

    def validate(self):
        return None

    def presentation(self):
        return self.names, ()

    def parse(self, text):
        return parse_word(text, self.names)

    def format(self, word):
        return format_word(word, self.names)

    def mul(self, x, y):
        return mul(x, y)

    def inv(self, x):
        return invert(x)

    def evaluate(self, word):
        return reduce_word(word)

    def word_of(self, x):
        return x

    def __eq__(self, other):
        return isinstance(other, FreeGroup) and self.names == other.names and self.prime == other.prime

    def __hash__(self):
        return hash((self.names, self.prime))

    def __repr__(self):
        return f"FreeGroup({', '.join(self.names)}; p={self.prime})"

    def describe(self):
        return f"F_{self.rank}"

    # homology ------------------------------------------------------
    def exponent_vector(self, word):
        if not is_reduced(word):
            raise UnreducedWord("word is not freely reduced")
        v = [0] * self.rank
        for x in word:
            v[abs(x) - 1] += 1 if x > 0 else -1
        return tuple(c % self.prime for c in v)

    h1_vector = exponent_vector


def exponent_vector_mod_p(group: FreeGroup, word):
    if isinstance(word, str):
        word = group.parse(word)
    return group.exponent_vector(tuple(word))


# --- Stallings automata ---------------------------------------------------

class SubgroupAutomaton:
    """Folded Stallings graph of a finitely generated subgroup.

    Edges carry a label in the free group on the subgroup's given
    generators, so reading a closed path at the base point yields the
    element written in those generators.  Edges are stored once, for
    positive letters: ``out[q][x] = (r, label)`` with ``x > 0`` and the
    mirror entry ``out[r][-x] = (q, label^-1)``.
    """

    def __init__(self, group: FreeGroup, gens):
        self.group = group
        self.gens = tuple(reduce_word(tuple(g)) for g in gens)
        self.kernel = []  # nontrivial relations among the given generators
        self._build()

    def _build(self):
        out = [dict()]
        parent = [0]
        corr = [()]  # correction applied when a state was merged into its parent
        pending = []

        def new_state():
            out.append(dict())
            parent.append(len(parent))
            corr.append(())
            return len(out) - 1

        for i, w in enumerate(self.gens):
            if not w:
                self.kernel.append((i + 1,))
                continue
            q = 0
            for k, x in enumerate(w):
                r = 0 if k == len(w) - 1 else new_state()
                pending.append((q, x, r, (i + 1,) if k == 0 else ()))
                q = r

        def potential(q):
            chain = []
            while parent[q] != q:
                chain.append(corr[q])
                q = parent[q]
            pot = ()
            for c in reversed(chain):
                pot = mul(pot, c)
            return q, pot

        def normalize(q, lab, r):
            q, pq = potential(q)
            r, pr = potential(r)
            return q, mul(pq, lab, invert(pr)), r

        def insert(q, x, r, lab):
            q, lab, r = normalize(q, lab, r)
            if x < 0:
                q, x, r, lab = r, -x, q, invert(lab)
            cur = out[q].get(x)
            if cur is not None:
                _, lab1, r1 = normalize(q, cur[1], cur[0])
                fold(q, r1, lab1, r, lab)
                return
            back = out[r].get(-x)
            if back is not None:
                _, blab, s_ = normalize(r, back[1], back[0])
                fold(r, s_, blab, q, invert(lab))
                return
            out[q][x] = (r, lab)
            out[r][-x] = (q, invert(lab))

        def fold(p, r1, lab1, r2, lab2):
            """Edges p -> r1 (lab1) and p -> r2 (lab2) with the same letter."""
            c = mul(invert(lab1), lab2)
            if r1 == r2:
                if c:
                    self.kernel.append(c)
                return
            if r2 == 0 or (r1 != 0 and r2 < r1):
                keep, gone, c = r2, r1, invert(c)
            else:
                keep, gone = r1, r2
            # edges leaving `gone` are relabelled c * lab, entering lab * c^-1
            moved = out[gone]
            out[gone] = {}
            for x, (r, lab) in moved.items():
                rr, _ = potential(r)
                if rr != gone:
                    mirror = out[rr].get(-x)
                    if mirror is not None and potential(mirror[0])[0] == gone:
                        del out[rr][-x]
                if x > 0 or rr != gone:
                    pending.append((gone, x, r, lab))
            parent[gone] = keep
            corr[gone] = c

        while pending:
            insert(*pending.pop())

        def find_root(q):
            return potential(q)[0]

        self._find = find_root
        self._norm = normalize

        # compact states, base point first
        live = [q for q in range(len(out)) if parent[q] == q]
        index = {q: i for i, q in enumerate(live)}
        self.states = len(live)
        self.out = [dict() for _ in live]
        for q in live:
            for x, (r, lab) in out[q].items():
                _, lab, r = normalize(q, lab, r)
                self.out[index[q]][x] = (index[r], lab)

    # queries -------------------------------------------------------
    @property
    def edges(self):
        return [(q, x, r, lab) for q in range(self.states) for x, (r, lab) in self.out[q].items() if x > 0]

    @property
    def rank(self):
        """Rank of the subgroup: |E| - |V| + 1."""
        return len(self.edges) - self.states + 1

    def is_folded(self):
        incoming = {}
        for q, x, r, _ in self.edges:
            if (r, x) in incoming:
                return False
            incoming[(r, x)] = q
        return True

    def read(self, word):
        """Follow `word` from the base point: (state, consumed, label) ."""
        q, lab = 0, ()
        for k, x in enumerate(word):
            step = self.out[q].get(x)
            if step is None:
                return q, k, lab
            q, l = step
            lab = mul(lab, l)
        return q, len(word), lab

    def contains(self, word):
        word = reduce_word(tuple(word))
        q, k, _ = self.read(word)
        return k == len(word) and q == 0

    membership = contains

    def preimage(self, word):
        """Word in the subgroup generators representing `word`, or None."""
        word = reduce_word(tuple(word))
        q, k, lab = self.read(word)
        if k == len(word) and q == 0:
            return lab
        return None

    @cached_property
    def tree_labels(self):
        """Shortlex BFS spanning tree: state -> reduced word from the base."""
        labels = {0: ()}
        queue = deque([0])
        while queue:
            q = queue.popleft()
            for x in sorted(self.out[q], key=lambda y: (abs(y), y < 0)):
                r, _ = self.out[q][x]
                if r not in labels:
                    labels[r] = labels[q] + (x,)
                    queue.append(r)
        return labels

    def right_coset_rep(self, word):
        """Canonical representative of the right coset H w."""
        word = reduce_word(tuple(word))
        q, k, _ = self.read(word)
        return mul(self.tree_labels[q], word[k:])

    def left_coset_rep(self, word):
        """Canonical representative of the left coset w H."""
        return invert(self.right_coset_rep(invert(word)))

    def is_complete(self):
        n = self.group.rank
        return all(len(self.out[q]) == 2 * n for q in range(self.states))

    def index(self):
        """Index [F : H] when finite, else None."""
        return self.states if self.is_complete() else None

    def transversal(self):
        """Left coset representatives when the index is finite."""
        if not self.is_complete():
            return None
        return sorted({invert(self.tree_labels[q]) for q in range(self.states)}, key=lambda w: (len(w), w))

    def core(self):
        """States and edges of the core (repeatedly trim degree-1 non-base... all states)."""
        deg = {q: len(self.out[q]) for q in range(self.states)}
        removed = set()
        changed = True
        while changed:
            changed = False
            for q in range(self.states):
                if q in removed or deg[q] > 1:
                    continue
                if deg[q] == 1:
                    (x, (r, _)), = [(x, v) for x, v in self.out[q].items() if v[0] not in removed]
                    deg[r] -= 1
                removed.add(q)
                changed = True
        keep = [q for q in range(self.states) if q not in removed]
        return keep, [(q, x, r) for q, x, r, _ in self.edges if q in keep and r in keep]


def automaton_basis(aut: SubgroupAutomaton):
    """Free basis of the subgroup read off the non-tree edges of its graph."""
    labels = {0: ()}
    tree = set()
    queue = deque([0])
    while queue:
        q = queue.popleft()
        for x in sorted(aut.out[q], key=lambda y: (abs(y), y < 0)):
            r, _ = aut.out[q][x]
            if r not in labels:
                labels[r] = labels[q] + (x,)
                tree.add((q, x) if x > 0 else (r, -x))
                queue.append(r)
    return [
        mul(labels[q], (x,), invert(labels[r]))
        for q, x, r, _ in sorted(aut.edges)
        if (q, x) not in tree
    ]


def _core_adjacency(aut):
    keep, edges = aut.core()
    adj = {q: {} for q in keep}
    for q, x, r in edges:
        adj[q][x] = r
        adj[r][-x] = q
    return adj


def _pointed_isomorphic(adj_a, a0, adj_b, b0):
    if len(adj_a) != len(adj_b):
        return False
    image = {a0: b0}
    used = {b0}
    queue = deque([a0])
    while queue:
        q = queue.popleft()
        qb = image[q]
        if set(adj_a[q]) != set(adj_b[qb]):
            return False
        for x, r in adj_a[q].items():
            rb = adj_b[qb][x]
            if r in image:
                if image[r] != rb:
                    return False
            else:
                if rb in used:
                    return False
                image[r] = rb
                used.add(rb)
                queue.append(r)
    return len(image) == len(adj_a)


def _core_entry(aut, adj):
    """(core state nearest the base, label of the path to it)."""
    labels = aut.tree_labels
    q0 = min(adj, key=lambda q: (len(labels[q]), labels[q]))
    return q0, labels[q0]


def _core_labels(adj, q0):
    lab = {q0: ()}
    queue = deque([q0])
    while queue:
        q = queue.popleft()
        for x in sorted(adj[q], key=lambda y: (abs(y), y < 0)):
            r = adj[q][x]
            if r not in lab:
                lab[r] = lab[q] + (x,)
                queue.append(r)
    return lab


def normalizer_free(group: FreeGroup, gens):
    """Generators of the normalizer of <gens> in the free group."""
    gens = [group.parse(g) if isinstance(g, str) else reduce_word(tuple(g)) for g in gens]
    gens = [g for g in gens if g]
    if not gens:
        return list(group.gens)
    aut = SubgroupAutomaton(group, gens)
    adj = _core_adjacency(aut)
    q0, u = _core_entry(aut, adj)
    lab = _core_labels(adj, q0)
    extra = []
    for q in sorted(adj):
        if q != q0 and _pointed_isomorphic(adj, q0, adj, q):
            extra.append(mul(u, lab[q], invert(u)))
    return automaton_basis(SubgroupAutomaton(group, gens + extra))


def conjugate_subgroups_free(group: FreeGroup, gens_a, gens_b):
    """g with g^-1 A g = B, or None when A and B are not conjugate."""
    def words(gens):
        out = [group.parse(g) if isinstance(g, str) else reduce_word(tuple(g)) for g in gens]
        return [w for w in out if w]

    ga, gb = words(gens_a), words(gens_b)
    if not ga or not gb:
        return () if not ga and not gb else None
    a = SubgroupAutomaton(group, ga)
    b = SubgroupAutomaton(group, gb)
    if a.rank != b.rank:
        return None
    adj_a = _core_adjacency(a)
    adj_b = _core_adjacency(b)
    q0, u = _core_entry(a, adj_a)
    labels_b = b.tree_labels
    for q in sorted(adj_b):
        if _pointed_isomorphic(adj_a, q0, adj_b, q):
            return mul(u, invert(labels_b[q]))
    return None


def subgroup_automaton(group: FreeGroup, gens):
    gens = [group.parse(g) if isinstance(g, str) else tuple(g) for g in gens]
    return SubgroupAutomaton(group, gens)


def is_injective_images(group: FreeGroup, images):
    """Free group on len(images) letters -> group is injective."""
    if any(not reduce_word(tuple(w)) for w in images):
        return False
    aut = SubgroupAutomaton(group, images)
    return aut.rank == len(images) and not aut.kernel


def product_automaton(a: SubgroupAutomaton, b: SubgroupAutomaton):
    """Pullback graph: states (qa, qb), edges labelled by letters."""
    states = {}
    edges = []
    order = []
    for qa in range(a.states):
        for qb in range(b.states):
            for x, (ra, _) in a.out[qa].items():
                if x < 0:
                    continue
                step = b.out[qb].get(x)
                if step is None:
                    continue
                rb = step[0]
                for s in ((qa, qb), (ra, rb)):
                    if s not in states:
                        states[s] = len(order)
                        order.append(s)
                edges.append(((qa, qb), x, (ra, rb)))
    return order, edges


def is_malnormal_free(group: FreeGroup, gens):
    """Exact malnormality test via the fiber product of the Stallings graph."""
    gens = [group.parse(g) if isinstance(g, str) else reduce_word(tuple(g)) for g in gens]
    gens = [g for g in gens if g]
    if not gens:
        raise TrivialSubgroup("malnormality needs a nontrivial subgroup")
    aut = SubgroupAutomaton(group, gens)
    return _fiber_verdict(group, aut, aut, skip_base=True)


def conjugates_meet_trivially(group: FreeGroup, gens_a, gens_b):
    """Verdict on A^g meeting B trivially for every g (A, B distinct subgroups).

    ProvenNo carries g with g x g^-1 = y for nontrivial x in A, y in B.
    """
    def words(gens):
        return [group.parse(w) if isinstance(w, str) else reduce_word(tuple(w)) for w in gens]

    a = SubgroupAutomaton(group, words(gens_a))
    b = SubgroupAutomaton(group, words(gens_b))
    return _fiber_verdict(group, a, b, skip_base=False)


def _fiber_verdict(group, a, b, skip_base):
    states, edges = product_automaton(a, b)
    parent = {s: s for s in states}

    def find(s):
        while parent[s] != s:
            parent[s] = parent[parent[s]]
            s = parent[s]
        return s

    for s, _, t in edges:
        parent[find(s)] = find(t)
    comps = {}
    for s in states:
        comps.setdefault(find(s), []).append(s)
    base = find((0, 0)) if (0, 0) in parent else None
    la, lb = a.tree_labels, b.tree_labels
    checked = 0
    for key in sorted(comps, key=lambda k: sorted(comps[k])):
        if skip_base and key == base:
            continue
        members = set(comps[key])
        comp_edges = [e for e in edges if e[0] in members]
        checked += 1
        if len(comp_edges) - len(members) + 1 > 0:
            (q1, q2), w = _cycle_in_component(members, comp_edges)
            g = mul(lb[q2], invert(la[q1]))
            x = mul(la[q1], w, invert(la[q1]))
            y = mul(g, x, invert(g))
            return Verdict.no(
                {"g": group.format(g), "element": group.format(x), "conjugate": group.format(y)},
                budget=checked,
            )
    return Verdict.yes({"components": len(comps), "trees": checked}, budget=checked)


def _cycle_in_component(members, edges):
    """A nontrivial closed reduced path (start state, word) in a component."""
    start = min(members)
    adj = {}
    for s, x, t in edges:
        adj.setdefault(s, []).append((x, t))
        adj.setdefault(t, []).append((-x, s))
    label = {start: ()}
    tree = set()
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for x, t in sorted(adj.get(s, [])):
            if t not in label:
                label[t] = label[s] + (x,)
                tree.add((s, x, t))
                tree.add((t, -x, s))
                queue.append(t)
    for s, x, t in sorted(edges):
        if (s, x, t) not in tree:
            w = mul(label[s], (x,), invert(label[t]))
            if w:
                return start, w
    raise AssertionError("component has no cycle")


# --- primitivity and roots -------------------------------------------------

def is_cyclic_free_factor(group: FreeGroup, c):
    """Decide whether <c> is a free factor of the pro-p completion.

    Returns (flag, basis, transcript).  When the flag is true, ``basis`` is
    a list of words containing ``c`` whose mod-p vectors form an invertible
    matrix, and ``transcript`` records the row operations reducing that
    matrix to the identity.
    """
    if isinstance(c, str):
        c = group.parse(c)
    c = tuple(c)
    if not is_reduced(c):
        raise UnreducedWord("word is not freely reduced")
    if not c:
        raise TrivialWord("the trivial word generates no free factor")
    v = group.exponent_vector(c)
    if not any(v):
        return False, None, None
    j = next(i for i, x in enumerate(v) if x)
    basis = [(i + 1,) for i in range(group.rank)]
    basis[j] = c
    mat = FpMatrix.from_columns([group.exponent_vector(w) for w in basis], group.prime, group.rank)
    transcript = RowOpTranscript.record(mat)
    return True, basis, transcript


def complete_basis(group: FreeGroup, words):
    """Extend words with independent mod-p vectors to a pro-p basis.

    The first standard generators are replaced in pivot order.  Returns
    None when the vectors are dependent.
    """
    vecs = [group.exponent_vector(w) for w in words]
    if FpMatrix.from_rows(vecs, group.prime, group.rank).rank() != len(words) if vecs else False:
        return None
    basis = [(i + 1,) for i in range(group.rank)]
    replaced = []
    for w, v in zip(words, vecs):
        # pick a standard generator not yet replaced whose coordinate keeps independence
        for j in range(group.rank):
            if j in replaced:
                continue
            trial = [basis[i] if i != j else w for i in range(group.rank)]
            m = FpMatrix.from_columns([group.exponent_vector(x) for x in trial], group.prime, group.rank)
            if m.rank() == group.rank:
                basis = trial
                replaced.append(j)
                break
        else:
            return None
    return basis


def cyclic_root(group: FreeGroup, c):
    """(conjugator, root, exponent) for c = u r^n u^-1 with r not a proper power."""
    return root(tuple(c))


def conjugate_cyclic(group: FreeGroup, c, d):
    """Return g with g^-1 <c> g = <d> (as words), or None."""
    uc, cc = cyclic_reduce(c)
    ud, cd = cyclic_reduce(d)
    for target in (cd, invert(cd)):
        if len(target) != len(cc):
            continue
        for i in range(len(cc) or 1):
            if cc[i:] + cc[:i] == target:
                # cc rotated: cc = a b, target = b a = a^-1 cc a with a = cc[:i]
                a = cc[:i]
                # c = uc cc uc^-1; d = ud target ud^-1
                g = mul(uc, a, invert(ud))
                return g
    return None

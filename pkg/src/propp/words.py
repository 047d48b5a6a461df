"""Parsing and free reduction of words.

Two encodings are used.  Inside a single free group a word is a tuple of
nonzero ints: generator ``i`` is ``i + 1`` and its inverse ``-(i + 1)``.
Across graphs of groups, words over presentation symbols are tuples of
``(symbol, +1 | -1)`` pairs.
"""
from __future__ import annotations

import re

from .errors import ProppError

_TOKEN = re.compile(r"\s*(\^|\(|\)|\[|\]|,|\*|-?\d+|[^\s\^\(\)\[\],\*]+)")


class WordSyntaxError(ProppError):
    pass


def _tokens(text):
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise WordSyntaxError(f"cannot parse {text!r} at {pos}")
        out.append(m.group(1))
        pos = m.end()
    return out


def reduce_pairs(word):
    out = []
    for s, e in word:
        if out and out[-1][0] == s and out[-1][1] == -e:
            out.pop()
        else:
            out.append((s, e))
    return tuple(out)


def invert_pairs(word):
    return tuple((s, -e) for s, e in reversed(word))


def power_pairs(word, n):
    if n < 0:
        word, n = invert_pairs(word), -n
    return reduce_pairs(tuple(word) * n)


def commutator_pairs(x, y):
    """[x, y] = x^-1 y^-1 x y."""
    return reduce_pairs(invert_pairs(x) + invert_pairs(y) + tuple(x) + tuple(y))


def parse_symbols(text, alphabet=None):
    """Parse ``text`` into a reduced tuple of (symbol, ±1) pairs.

    Accepted syntax: juxtaposition (spaces or ``*``), ``x^n`` with any
    integer ``n``, parentheses, and commutators ``[u, v] = u^-1 v^-1 u v``.
    ``1`` denotes the identity.  When an ``alphabet`` is given, an unknown
    token whose characters are all one-letter symbols is split into them,
    so ``ab`` reads as ``a b``.
    """
    toks = _tokens(text)
    pos = 0

    def name_word(tok):
        if alphabet is None or tok in alphabet:
            return ((tok, 1),)
        if all(ch in alphabet for ch in tok):
            return tuple((ch, 1) for ch in tok)
        raise WordSyntaxError(f"unknown symbol {tok!r}")

    def word(stop):
        out = ()
        while pos < len(toks) and toks[pos] not in stop:
            out = out + factor()
        return reduce_pairs(out)

    def factor():
        nonlocal pos
        tok = toks[pos]
        pos += 1
        if tok == "*":
            return ()
        if tok == "(":
            w = word({")"})
            expect(")")
        elif tok == "[":
            u = word({","})
            expect(",")
            v = word({"]"})
            expect("]")
            w = commutator_pairs(u, v)
        elif re.fullmatch(r"-?\d+", tok):
            if tok != "1":
                raise WordSyntaxError(f"unexpected number {tok}")
            w = ()
        elif tok in {")", "]", ",", "^"}:
            raise WordSyntaxError(f"unexpected {tok!r}")
        else:
            w = name_word(tok)
        if pos < len(toks) and toks[pos] == "^":
            pos += 1
            if pos >= len(toks) or not re.fullmatch(r"-?\d+", toks[pos]):
                raise WordSyntaxError("exponent must be an integer")
            n = int(toks[pos])
            pos += 1
            if len(w) > 1 and tok not in {"(", "["}:
                # ``ab^2`` binds the exponent to the last letter only
                return reduce_pairs(w[:-1] + power_pairs(w[-1:], n))
            w = power_pairs(w, n)
        return w

    def expect(t):
        nonlocal pos
        if pos >= len(toks) or toks[pos] != t:
            raise WordSyntaxError(f"expected {t!r} in {text!r}")
        pos += 1

    out = word(set())
    if pos != len(toks):
        raise WordSyntaxError(f"trailing input in {text!r}")
    return out


def format_pairs(word):
    if not word:
        return "1"
    parts = []
    i = 0
    while i < len(word):
        s, e = word[i]
        j = i
        while j + 1 < len(word) and word[j + 1] == (s, e):
            j += 1
        n = (j - i + 1) * e
        parts.append(s if n == 1 else f"{s}^{n}")
        i = j + 1
    return " ".join(parts)


# --- int-coded words ---------------------------------------------------

def reduce_word(word):
    out = []
    for x in word:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def is_reduced(word):
    return all(word[i] != -word[i + 1] for i in range(len(word) - 1))


def invert(word):
    return tuple(-x for x in reversed(word))


def mul(*words):
    out = []
    for w in words:
        for x in w:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
    return tuple(out)


def power(word, n):
    if n < 0:
        word, n = invert(word), -n
    return reduce_word(tuple(word) * n)


def cyclic_reduce(word):
    """Return (conjugator u, cyclically reduced core) with word = u core u^-1."""
    word = reduce_word(word)
    i, j = 0, len(word) - 1
    while i < j and word[i] == -word[j]:
        i += 1
        j -= 1
    return word[:i], word[i : j + 1]


def root(word):
    """(u, core root r, n) with word = u r^n u^-1 and r not a proper power."""
    u, core = cyclic_reduce(word)
    n = len(core)
    for k in range(1, n + 1):
        if n % k == 0 and core[:k] * (n // k) == core:
            return u, core[:k], n // k
    return u, core, 1


def rotations(word):
    return {word[i:] + word[:i] for i in range(len(word))} or {()}


def to_pairs(word, names):
    return tuple((names[abs(x) - 1], 1 if x > 0 else -1) for x in word)


def from_pairs(pairs, names):
    index = {n: i + 1 for i, n in enumerate(names)}
    try:
        return reduce_word(tuple(index[s] * e for s, e in pairs))
    except KeyError as exc:
        raise WordSyntaxError(f"unknown symbol {exc.args[0]!r}") from None


def parse_word(text, names):
    if isinstance(text, (tuple, list)):
        return reduce_word(tuple(text))
    return from_pairs(parse_symbols(text, set(names)), names)


def format_word(word, names):
    return format_pairs(to_pairs(word, names))

"""Quantitative decorability diagnostics.

The constant ``C = sup_x h(x)^{-1} sum_{y not in B} (bar m_y / m_y) g(x, y) h(y)^2``
controls the hit probabilities of ``B`` from below, and for symmetric or
translation-invariant models there are summability criteria.  Infinite sums
are evaluated as partial sums with a geometric tail estimate; nothing here
certifies the infinite statements themselves.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroMeanOffspring
from .model import OffspringLaw, normed_model

DEFAULT_DEPTH = 500
TAIL_TOL = 1e-9
SYMMETRY_TOL = 1e-12


def bar_mean(law):
    """``sum_k (k - 1) k d(k) / m``, the mean number of siblings of a
    size-biased individual."""
    law = OffspringLaw(law)
    m = law.mean
    if m <= 0:
        raise ZeroMeanOffspring("bar m needs a positive mean")
    return float(sum((k - 1) * k * p for k, p in zip(law.counts, law.probs)) / m)


def _per_state_ratio(model):
    # states with m_y = 0 cannot carry the spine; they contribute nothing
    out = np.zeros(model.n)
    for y, law in enumerate(model.offspring):
        if law.mean > 0:
            out[y] = bar_mean(law) / law.mean
    return out


def decorability_terms(model, B):
    """The per-``x`` values whose supremum is the decorability constant."""
    nm = normed_model(model, B)
    w = np.where(nm.in_B, 0.0, _per_state_ratio(model) * nm.h ** 2)
    if not w.any():
        # nothing to sum: no Green function needed (it may diverge)
        return np.zeros(model.n)
    return (np.asarray(model.G) @ w) / nm.h


def decorability_constant(model, B):
    """Exact finite-state value of the constant ``C``."""
    return float(decorability_terms(model, B).max())


def hit_probability_bounds(model, B, x):
    """``(h(x) / (4C + 2), min(h(x), 1))`` for the probability that the tree
    started at state position ``x`` ever visits ``B``."""
    nm = normed_model(model, B)
    C = decorability_constant(model, B)
    h = float(nm.h[int(x)])
    return h / (4 * C + 2), min(h, 1.0)


def hit_probability_exact(model, B, tol=1e-15, max_iter=1_000_000):
    """Hit probabilities for every start, as the minimal solution of
    ``q(x) = 1 - f_x(1 - (p q)(x))`` off ``B`` with ``q = 1`` on ``B``
    (``f_x`` the generating function of ``d_x``), by monotone iteration
    from zero."""
    inB = model.mask(B)
    q = inB.astype(float)
    P = np.asarray(model.motion)
    laws = [(np.array(law.counts), np.array(law.probs)) for law in model.offspring]
    for _ in range(max_iter):
        s = 1.0 - P @ q
        new = np.array([1.0 - float(pr @ s[x] ** c) for x, (c, pr) in enumerate(laws)])
        new[inB] = 1.0
        if np.abs(new - q).max() <= tol:
            return new
        q = new
    return q


@dataclass
class SeriesDiagnostic:
    """Partial sum up to ``depth`` with a geometric tail estimate."""

    partial: float
    last_term: float
    ratio: float
    tail: float
    depth: int

    @property
    def converged(self):
        return self.tail < TAIL_TOL

    @property
    def extrapolated(self):
        return self.partial + self.tail


def _series(terms):
    terms = np.asarray(terms, dtype=float)
    K = terms.size
    last = float(terms[-1])
    prev = float(terms[-2]) if K > 1 else 0.0
    if last == 0.0:
        ratio, tail = 0.0, 0.0
    elif prev > 0:
        ratio = last / prev
        tail = last * ratio / (1 - ratio) if ratio < 1 else float("inf")
    else:
        ratio, tail = float("inf"), float("inf")
    return SeriesDiagnostic(float(terms.sum()), last, ratio, tail, K)


def sup_sum(Q, ref=0, depth=DEFAULT_DEPTH):
    """Partial sums of ``sum_k k max_z (Q^k)(ref, z)``."""
    Q = np.asarray(Q, dtype=float)
    v = np.zeros(Q.shape[0])
    v[ref] = 1.0
    terms = []
    for k in range(1, depth + 1):
        v = v @ Q
        terms.append(k * v.max())
    return _series(terms)


def return_sum(Q, ref=0, depth=DEFAULT_DEPTH):
    """Partial sums of ``sum_k k sqrt((Q^{2k})(ref, ref))``."""
    Q = np.asarray(Q, dtype=float)
    Q2 = Q @ Q
    v = np.zeros(Q.shape[0])
    v[ref] = 1.0
    terms = []
    for k in range(1, depth + 1):
        v = v @ Q2
        terms.append(k * np.sqrt(max(v[ref], 0.0)))
    return _series(terms)


@dataclass
class Criterion:
    name: str
    applicable: bool
    verdict: str
    value: float
    detail: object = None


@dataclass
class DecorabilityReport:
    C: float
    bounds: dict
    criteria: list = field(default_factory=list)
    depth: int = DEFAULT_DEPTH

    def criterion(self, name):
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def csv_rows(self):
        rows = [("C", True, "finite" if np.isfinite(self.C) else "infinite", self.C)]
        rows += [(c.name, c.applicable, c.verdict, c.value) for c in self.criteria]
        return rows

    def csv(self):
        lines = ["criterion,applicable,verdict,value"]
        lines += [f"{n},{str(a).lower()},{v},{val:.12g}" for n, a, v, val in self.csv_rows()]
        return "\n".join(lines) + "\n"

    def text(self, states=None):
        name = (lambda i: states[i]) if states is not None else (lambda i: i)
        out = [f"C = {self.C:.12g}", f"truncation depth = {self.depth}"]
        for x, (lo, hi) in sorted(self.bounds.items()):
            out.append(f"hit bounds at {name(x)}: [{lo:.6g}, {hi:.6g}]")
        for c in self.criteria:
            tag = "applicable" if c.applicable else "not applicable"
            out.append(f"{c.name}: {tag}, {c.verdict}, value {c.value:.12g}")
        return "\n".join(out)


def criteria_report(model, B, depth=DEFAULT_DEPTH, ref=0):
    """Evaluate the decorability criteria that apply to ``model``.

    ``ref`` is the reference state position of the symmetric criteria.
    """
    try:
        C = decorability_constant(model, B)
        bounds = {x: hit_probability_bounds(model, B, x) for x in range(model.n)}
    except ArithmeticError:
        C, bounds = float("inf"), {}
    Q = np.asarray(model.Q)
    m_max = float(np.max(model.mean_offspring))
    criteria = []

    bars = [bar_mean(law) if law.mean > 0 else 0.0 for law in model.offspring]
    ti = bool(model.translation_invariant) and m_max < 1 and np.isfinite(max(bars))
    criteria.append(Criterion("translation-invariant", ti,
                              "decorable" if ti else "n/a", m_max))

    asym = float(np.abs(Q - Q.T).max())
    symmetric = asym <= SYMMETRY_TOL
    criteria.append(Criterion("symmetric", True, "yes" if symmetric else "no", asym))

    for name, fn in (("sup-sum", sup_sum), ("return-sum", return_sum)):
        if not symmetric:
            criteria.append(Criterion(name, False, "n/a", float("nan")))
            continue
        d = fn(Q, ref, depth)
        criteria.append(Criterion(name, True, "converged" if d.converged else "divergent",
                                  d.extrapolated if d.converged else d.partial, d))
    return DecorabilityReport(C, bounds, criteria, depth)

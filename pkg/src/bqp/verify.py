"""Exact enumeration oracles and the statistical checks built on them.

Trees are compared through a canonical encoding: a node is the nested tuple
``(location, colour, children)`` where ``children`` is the sorted tuple of the
children's encodings.  Sorting makes the encoding independent of labels and
child order, so two forests encode alike iff they are isomorphic as
location- and colour-marked rooted trees.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, product

import numpy as np
from scipy import stats

from .bmc import DEFAULT_CAPS, SamplerCaps, decorate, sample_spine
from .errors import BudgetExceeded, DecodingError, EncodingMismatch
from .forest import BLUE, UNCOLOURED, WHITE, Forest
from .model import normed_model
from .report import TestReport
from .rng import run_chunks

DEFAULT_BUDGET = 1_000_000
EXACT_TV_TOL = 1e-9


# -- encoding -----------------------------------------------------------------

def encode(forest, depth=None, root=None):
    """Canonical encoding of the tree of ``root`` (the unique root when None),
    truncated after generation ``depth``."""
    if root is None:
        roots = forest.roots()
        if len(roots) != 1:
            raise EncodingMismatch(f"expected one root, found {len(roots)}")
        root = roots[0]

    def enc(lab, d):
        kids = () if depth is not None and d >= depth else tuple(
            sorted(enc(c, d + 1) for c in forest.children(lab)))
        i = forest.position(lab)
        return (forest.locs[i], forest.colours[i], kids)

    return enc(root, 0)


def decode(code):
    """Forest with labels ``0, 1, ...`` in depth-first order."""
    labels, preds, locs, colours = [], [], [], []

    def walk(node, parent):
        if not (isinstance(node, tuple) and len(node) == 3 and isinstance(node[2], tuple)):
            raise DecodingError(f"malformed node {node!r}")
        lab = len(labels)
        labels.append(lab)
        preds.append(parent)
        locs.append(node[0])
        colours.append(node[1])
        for c in node[2]:
            walk(c, lab)

    walk(code, None)
    return Forest(labels, preds, locs, colours)


def path_key(forest):
    """Location sequence of a one-line forest, root first."""
    out = []
    level = forest.roots()
    while level:
        if len(level) != 1:
            raise EncodingMismatch("forest is not a single line")
        out.append(forest.location(level[0]))
        level = forest.children(level[0])
    return tuple(out)


@dataclass
class TreePmf:
    """Probabilities of encodings; ``overflow`` is the mass outside the
    enumerated set, compared as one extra outcome."""

    entries: dict
    scheme: str = "tree"
    overflow: float = 0.0

    @property
    def total(self):
        return math.fsum(self.entries.values()) + self.overflow

    def __len__(self):
        return len(self.entries)


def tv_distance(a, b):
    """Half the L1 distance, over the union of supports plus the overflow
    bucket."""
    if a.scheme != b.scheme:
        raise EncodingMismatch(f"cannot compare {a.scheme!r} with {b.scheme!r}")
    keys = set(a.entries) | set(b.entries)
    diffs = [abs(a.entries.get(k, 0.0) - b.entries.get(k, 0.0)) for k in keys]
    diffs.append(abs(a.overflow - b.overflow))
    return 0.5 * math.fsum(diffs)


def empirical_pmf(codes, scheme="tree", known=None):
    """Frequencies of ``codes``; with ``known``, codes outside it go to the
    overflow bucket."""
    counts = Counter(codes)
    n = sum(counts.values())
    if n == 0:
        return TreePmf({}, scheme)
    entries, over = {}, 0
    for k, c in counts.items():
        if known is not None and k not in known:
            over += c
        else:
            entries[k] = c / n
    return TreePmf(entries, scheme, over / n)


def statistical_tv_threshold(support, n):
    return 2.0 * math.sqrt(support / n) + 0.005


# -- enumeration ----------------------------------------------------------------

class _Budget:
    def __init__(self, limit):
        self.limit = limit
        self.used = 0

    def spend(self, k):
        self.used += k
        if self.used > self.limit:
            raise BudgetExceeded(f"enumeration needs more than {self.limit} shapes")


def _multisets(law, n, budget):
    """Law of the sorted ``n``-tuple of iid draws from ``law`` (dict)."""
    if n == 0:
        return {(): 1.0}
    keys = sorted(law)
    out = {}
    for combo in combinations_with_replacement(range(len(keys)), n):
        budget.spend(1)
        counts = Counter(combo)
        coef = math.factorial(n)
        p = 1.0
        for i, c in counts.items():
            coef //= math.factorial(c)
            p *= law[keys[i]] ** c
        out[tuple(keys[i] for i in combo)] = coef * p
    return out


def _child_law(model, x, sub):
    law = {}
    for y in np.flatnonzero(model.motion[x]):
        py = float(model.motion[x, y])
        for code, q in sub(int(y)).items():
            law[code] = law.get(code, 0.0) + py * q
    return law


def _plain_tables(model, depth, colour, budget):
    """``tables[r][x]``: law of the plain tree from ``x`` to depth ``r`` with
    every node painted ``colour``."""
    tables = [{x: {(x, colour, ()): 1.0} for x in range(model.n)}]
    for r in range(1, depth + 1):
        prev = tables[-1]
        row = {}
        for x in range(model.n):
            kids = _child_law(model, x, lambda y: prev[y])
            pmf = {}
            for n, dn in zip(model.offspring[x].counts, model.offspring[x].probs):
                for combo, q in _multisets(kids, n, budget).items():
                    code = (x, colour, combo)
                    pmf[code] = pmf.get(code, 0.0) + dn * q
            row[x] = pmf
        tables.append(row)
    return tables


def enumerate_truncated_bmc(model, x, depth, budget=DEFAULT_BUDGET):
    """Exact law of the plain tree from position ``x`` cut after ``depth``
    generations."""
    tables = _plain_tables(model, depth, UNCOLOURED, _Budget(budget))
    return TreePmf(dict(tables[depth][int(x)]), "tree")


def _recolour_root(pmf, colour):
    return {(c[0], colour, c[2]): p for c, p in pmf.items()}


def enumerate_truncated_biased(model, B, x, depth, budget=DEFAULT_BUDGET):
    """Exact law of the ``B``-biased tree from a blue root at ``x``.

    Follows the two-step rule literally: every ordered child tuple
    ``(y_1..y_n)`` gets weight ``d_x(n) prod p(x, y_k) sum h(y_k) / h(x)`` and
    child ``k`` is blue with probability ``h(y_k) / sum h``.
    """
    nm = normed_model(model, B)
    bud = _Budget(budget)
    white = _plain_tables(model, depth, WHITE, bud)
    h = nm.h
    memo = {}

    def law(x, r):
        if (x, r) in memo:
            return memo[(x, r)]
        if r == 0:
            out = {(x, BLUE, ()): 1.0}
        elif nm.in_B[x]:
            out = _recolour_root(white[r][x], BLUE)
        else:
            out = {}
            locs = np.flatnonzero(model.motion[x]).tolist()
            for n, dn in zip(model.offspring[x].counts, model.offspring[x].probs):
                if n == 0:
                    continue
                for ys in product(locs, repeat=n):
                    pw = dn * math.prod(float(model.motion[x, y]) for y in ys) / h[x]
                    hs = [h[y] for y in ys]
                    total = sum(hs)
                    for b in range(n):
                        weight = pw * total * hs[b] / total
                        choices = [law(y, r - 1).items() if k == b else white[r - 1][y].items()
                                   for k, y in enumerate(ys)]
                        for combo in product(*choices):
                            bud.spend(1)
                            p = weight * math.prod(q for _, q in combo)
                            code = (x, BLUE, tuple(sorted(c for c, _ in combo)))
                            out[code] = out.get(code, 0.0) + p
        memo[(x, r)] = out
        return out

    return TreePmf(dict(law(int(x), depth)), "coloured-tree")


def enumerate_reweighted_coloured(model, B, x, depth, budget=DEFAULT_BUDGET):
    """Exact law of the plain tree reweighted by ``#H_B / h(x)`` and coloured
    by a uniformly chosen entrance individual.

    A plain tree with ``k`` entrance individuals is counted ``k`` times with
    weight ``1/k`` per colouring, so the reweighted coloured law is the sum
    over entrance individuals of the plain law with that line painted blue.
    Below the truncation depth only the expected number of entrance
    individuals, ``h``, survives.
    """
    nm = normed_model(model, B)
    bud = _Budget(budget)
    white = _plain_tables(model, depth, WHITE, bud)
    h = nm.h
    memo = {}

    def F(x, r):
        # unnormalised: total mass h(x)
        if (x, r) in memo:
            return memo[(x, r)]
        if nm.in_B[x]:
            out = _recolour_root(white[r][x], BLUE)
        elif r == 0:
            out = {(x, BLUE, ()): float(h[x])}
        else:
            blue_kid = _child_law(model, x, lambda y: F(y, r - 1))
            white_kid = _child_law(model, x, lambda y: white[r - 1][y])
            out = {}
            for n, dn in zip(model.offspring[x].counts, model.offspring[x].probs):
                if n == 0:
                    continue
                rest = _multisets(white_kid, n - 1, bud)
                for bcode, bp in blue_kid.items():
                    for wcodes, wp in rest.items():
                        bud.spend(1)
                        code = (x, BLUE, tuple(sorted((bcode,) + wcodes)))
                        out[code] = out.get(code, 0.0) + n * dn * bp * wp
        memo[(x, r)] = out
        return out

    x = int(x)
    return TreePmf({c: p / h[x] for c, p in F(x, depth).items()}, "coloured-tree")


# -- spine identity -------------------------------------------------------------

def _spine_codes(rng, size, model, B, x, depth):
    caps = SamplerCaps(max_generations=depth, max_population=DEFAULT_CAPS.max_population)
    codes = Counter()
    for _ in range(size):
        spine = sample_spine(model, B, x, rng, caps)
        codes[encode(decorate(spine, model, B, rng, caps), depth)] += 1
    return codes


def empirical_spine_law(model, B, x, depth, n, seed, workers=1):
    counts = Counter()
    for c in run_chunks(_spine_codes, n, seed, model, B, int(x), depth, workers=workers):
        counts.update(c)
    return TreePmf({k: v / n for k, v in counts.items()}, "coloured-tree")


def spine_identity_test(model, B, x, depth, n_samples, seed, workers=1,
                        budget=DEFAULT_BUDGET):
    """Compare the reweighted-and-coloured plain law, the biased law and the
    empirical decorated-spine law of the tree from position ``x``."""
    a = enumerate_reweighted_coloured(model, B, x, depth, budget)
    b = enumerate_truncated_biased(model, B, x, depth, budget)
    exact = TestReport("TV(reweighted, biased)", tv_distance(a, b), EXACT_TV_TOL,
                       notes=f"x={x}, depth={depth}")
    mass = TestReport("biased law total mass = 1", abs(b.total - 1.0), EXACT_TV_TOL)
    parts = [exact, mass]
    if n_samples:
        c = empirical_spine_law(model, B, x, depth, n_samples, seed, workers)
        support = len(set(b.entries) | set(c.entries))
        parts.append(TestReport("TV(biased, sampled)", tv_distance(b, c),
                                statistical_tv_threshold(support, n_samples),
                                n_samples, seed, f"support={support}"))
    return TestReport.combine(f"spine identity x={x}", parts, n_samples, seed)


# -- path laws for the single-child case -------------------------------------------

def path_law(nu, model, B, max_len):
    """Exact law of the ``B``-hitting paths of the quasi-process of a purely
    excessive ``nu``, normalised by the entrance mass, as location sequences
    of at most ``max_len`` states; longer paths form the overflow bucket."""
    from .potential import entrance_measure, riesz_decomposition

    pot = riesz_decomposition(nu, model.Q).pot
    mass = float(entrance_measure(nu, model, B).sum())
    inB = model.mask(B)
    Q = np.asarray(model.Q)
    death = 1.0 - model.mean_offspring
    entries = {}
    frontier = {(int(x),): float(pot[x]) for x in np.flatnonzero(pot > 0)}
    for _ in range(max_len):
        nxt = {}
        for path, w in frontier.items():
            x = path[-1]
            if death[x] > 0 and any(inB[s] for s in path):
                entries[path] = entries.get(path, 0.0) + w * death[x] / mass
            for y in np.flatnonzero(Q[x]):
                nxt[path + (int(y),)] = w * Q[x, y]
        frontier = nxt
    covered = math.fsum(entries.values())
    return TreePmf(entries, "path", max(0.0, 1.0 - covered))


def _degenerate_codes(rng, size, nu, model, B, caps, which):
    from .interlacement import InterlacementSampler

    sampler = InterlacementSampler(nu, model, B, caps)
    out = Counter()
    for _ in range(size):
        if which == "tree":
            out[path_key(sampler.tree(rng))] += 1
        else:
            out[sampler.path(rng).states] += 1
    return out


def degenerate_reduction_test(nu, model, B, n, seed, max_len=12, workers=1,
                              caps=DEFAULT_CAPS):
    """For single-child offspring the branching interlacement trees are the
    classical interlacement paths.  Compares both samplers with the exact
    path law and with each other."""
    if any(max(law.counts) > 1 for law in model.offspring):
        raise ValueError("the reduction needs at most one child per individual")
    exact = path_law(nu, model, B, max_len)
    known = set(exact.entries)
    laws = {}
    for k, which in enumerate(("tree", "path")):
        counts = Counter()
        for c in run_chunks(_degenerate_codes, n, (seed, k), nu, model, B, caps, which,
                            workers=workers):
            counts.update(c)
        laws[which] = empirical_pmf(counts.elements(), "path", known)
    support = len(known) + 1
    thr = statistical_tv_threshold(support, n)
    parts = [
        TestReport("TV(exact, branching)", tv_distance(exact, laws["tree"]), thr, n, seed),
        TestReport("TV(exact, classical)", tv_distance(exact, laws["path"]), thr, n, seed),
        TestReport("TV(branching, classical)", tv_distance(laws["tree"], laws["path"]),
                   statistical_tv_threshold(2 * support, n), n, seed),
    ]
    return TestReport.combine("single-child reduction", parts, n, seed,
                              notes=f"max_len={max_len}")


# -- interlacement statistics ---------------------------------------------------

def _replica_stats(rng, size, nu, model, B, u, caps, B_inner):
    """Per-replica tree counts and occupation sums for ``size`` independent
    samples at level ``u``."""
    from .forest import entrance_set, occupation_of, progeny_of_entrance
    from .interlacement import InterlacementSampler

    sampler = InterlacementSampler(nu, model, B, caps)
    n = model.n
    Bs = set(model.indices(B).tolist())
    Bi = set(model.indices(B_inner).tolist()) if B_inner is not None else None
    counts = np.zeros(size, dtype=np.int64)
    occ = np.zeros((size, n))
    prog = np.zeros((size, n))
    prog_inner = np.zeros((size, n))
    for i in range(size):
        s = sampler.sample(u, rng)
        counts[i] = len(s.trees)
        for t in s.trees:
            occ[i] += occupation_of(t, n)
            prog[i] += occupation_of(progeny_of_entrance(t, Bs), n)
            if Bi is not None and entrance_set(t, Bi):
                prog_inner[i] += occupation_of(progeny_of_entrance(t, Bi), n)
    return {"counts": counts, "occupation": occ, "progeny": prog, "progeny_inner": prog_inner}


def interlacement_replicas(nu, model, B, u, n_runs, seed, workers=1, caps=DEFAULT_CAPS,
                           B_inner=None):
    """Statistics of ``n_runs`` independent interlacement samples, stacked."""
    parts = run_chunks(_replica_stats, n_runs, seed, nu, model, B, u, caps, B_inner,
                       workers=workers)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def z_scores(samples, target):
    """Per-coordinate z-scores of the mean of ``samples`` (rows) against
    ``target``."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    diff = samples.mean(axis=0) - target
    se = samples.std(axis=0, ddof=1) / math.sqrt(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(se > 0, diff / se, np.where(np.abs(diff) <= 1e-12, 0.0, np.inf))


def interlacement_qp_test(model, B, B_prime, nu, u, n_runs, seed, workers=1,
                          caps=DEFAULT_CAPS, threshold=4.0):
    """Entrance-progeny occupation against ``mu G`` for ``B'``, and for ``B``
    among the trees of the ``B'`` sampler that hit ``B``."""
    from .interlacement import _require_sub_markovian
    from .potential import entrance_measure

    _require_sub_markovian(model)
    if not set(model.indices(B).tolist()) <= set(model.indices(B_prime).tolist()):
        raise ValueError("B must be contained in B'")
    G = np.asarray(model.G)
    tgt_outer = entrance_measure(nu, model, B_prime) @ G
    tgt_inner = entrance_measure(nu, model, B) @ G
    if u == 0 or n_runs == 0:
        return TestReport("interlacement progeny occupation", 0.0, threshold, n_runs, seed,
                          notes="vacuous (u = 0)")
    stats_ = interlacement_replicas(nu, model, B_prime, u, n_runs, seed, workers, caps, B)
    parts = [
        TestReport("progeny occupation on B'",
                   float(np.abs(z_scores(stats_["progeny"] / u, tgt_outer)).max()),
                   threshold, n_runs, seed),
        TestReport("progeny occupation on B",
                   float(np.abs(z_scores(stats_["progeny_inner"] / u, tgt_inner)).max()),
                   threshold, n_runs, seed),
    ]
    return TestReport.combine("interlacement progeny occupation", parts, n_runs, seed)


def dispersion_index(counts):
    counts = np.asarray(counts, dtype=float)
    return float(counts.var(ddof=1) / counts.mean())


def superposition_test(nu, model, B, u1, u2, n_runs, seed, workers=1, caps=DEFAULT_CAPS,
                       alpha=1e-3, z_cut=4.0):
    """One sample at ``u1 + u2`` against the union of independent samples at
    ``u1`` and ``u2``: chi-square homogeneity of the tree-count histograms
    and two-sample z-scores of mean counts and occupations."""
    s1 = interlacement_replicas(nu, model, B, u1, n_runs, (seed, 1), workers, caps)
    s2 = interlacement_replicas(nu, model, B, u2, n_runs, (seed, 2), workers, caps)
    s = interlacement_replicas(nu, model, B, u1 + u2, n_runs, (seed, 3), workers, caps)
    c_union = s1["counts"] + s2["counts"]
    o_union = s1["occupation"] + s2["occupation"]
    top = int(max(c_union.max(), s["counts"].max()))
    h1 = np.bincount(c_union, minlength=top + 1)
    h2 = np.bincount(s["counts"], minlength=top + 1)
    # pool sparse cells so every expected count is at least 5
    table, acc = [], np.zeros(2)
    for a, b in zip(h1, h2):
        acc += (a, b)
        if acc.min() >= 5:
            table.append(acc.copy())
            acc[:] = 0
    if acc.any():
        if table:
            table[-1] += acc
        else:
            table.append(acc.copy())
    table = np.array(table).T
    if table.shape[1] > 1:
        pval = float(stats.chi2_contingency(table)[1])
    else:
        pval = 1.0
    parts = [TestReport("count histogram chi-square (1 - p)", 1 - pval, 1 - alpha, n_runs, seed)]
    for name, a, b in (("mean count", c_union[:, None], s["counts"][:, None]),
                       ("mean occupation", o_union, s["occupation"])):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        se = np.sqrt(a.var(axis=0, ddof=1) / len(a) + b.var(axis=0, ddof=1) / len(b))
        diff = a.mean(axis=0) - b.mean(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, diff / se, 0.0)
        parts.append(TestReport(f"superposition {name}", float(np.abs(z).max()), z_cut,
                                n_runs, seed))
    return TestReport.combine(f"superposition {u1:g}+{u2:g}", parts, n_runs, seed)


# -- Kuznetsov checks -------------------------------------------------------------

def _anchor_stats(rng, size, nu, model, B, sets):
    """Anchor counts and first-entrance counts into each of ``sets``, plus
    transition counts out of every backward visit, split by whether the
    visit was the birth of the path."""
    from .potential import KuznetsovSampler

    ks = KuznetsovSampler(nu, model, B)
    n = model.n
    anchors = np.zeros(n, dtype=np.int64)
    first = np.zeros((len(sets), n), dtype=np.int64)
    masks = [model.mask(s) for s in sets]
    trans = np.zeros((2, n, n), dtype=np.int64)
    for _ in range(size):
        p = ks(rng)
        anchors[p.anchor] += 1
        seq = p.backward + (p.anchor,)
        for j, m in enumerate(masks):
            for s in seq:
                if m[s]:
                    first[j, s] += 1
                    break
        for i in range(len(seq) - 1):
            trans[0 if i == 0 else 1, seq[i], seq[i + 1]] += 1
    return {"anchors": anchors, "first": first, "transitions": trans}


def kuznetsov_stats(nu, model, B, n, seed, sets=(), workers=1):
    parts = run_chunks(_anchor_stats, n, seed, nu, model, B, [list(s) for s in sets],
                       workers=workers)
    return {k: sum(p[k] for p in parts) for k in parts[0]}


def binomial_z(counts, n, p):
    counts = np.asarray(counts, dtype=float)
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    sd = np.sqrt(n * p * (1 - p))
    diff = counts - n * p
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(sd > 1e-9, diff / sd, np.where(np.abs(diff) <= 1e-6, 0.0, np.inf))


def kuznetsov_anchor_test(nu, model, B, n, seed, sets=None, workers=1, z_cut=3.0,
                          alpha=1e-3):
    """Anchor frequencies against the normalised entrance measure; first
    entrance into each larger set ``B_n`` against ``mu_{B_n}(x) h(x) / |mu_B|``;
    and a Markov check at every backward visit to each state: the next state
    follows the spine kernel ``p^h`` whether or not the path was born there."""
    from .potential import entrance_measure

    nm = normed_model(model, B)
    sets = [list(s) for s in (sets or [])]
    st = kuznetsov_stats(nu, model, B, n, seed, sets, workers)
    mu = entrance_measure(nu, model, B)
    mass = mu.sum()
    parts = [TestReport("anchor frequencies", float(np.abs(binomial_z(st["anchors"], n, mu / mass)).max()),
                        z_cut, n, seed)]
    for j, s in enumerate(sets):
        target = entrance_measure(nu, model, s) * nm.h / mass
        z = binomial_z(st["first"][j], n, target)
        parts.append(TestReport(f"first entrance into {sorted(s)}", float(np.abs(z).max()),
                                z_cut, n, seed))
    worst = 0.0
    for x in range(model.n):
        if nm.in_B[x]:
            continue
        born, later = st["transitions"][0, x], st["transitions"][1, x]
        total = born + later
        if total.sum() == 0:
            continue
        support = np.flatnonzero(nm.ph[x] > 0)
        exp = nm.ph[x, support] * total.sum()
        if support.size > 1:
            p_gof = stats.chisquare(total[support], exp).pvalue
            worst = max(worst, 1 - p_gof)
            table = np.vstack([born[support], later[support]])
            table = table[:, table.sum(axis=0) > 0]
            table = table[table.sum(axis=1) > 0]
            if table.shape[0] > 1 and table.shape[1] > 1:
                worst = max(worst, 1 - stats.chi2_contingency(table)[1])
    parts.append(TestReport("backward Markov property (1 - p)", worst, 1 - alpha, n, seed))
    return TestReport.combine("Kuznetsov anchoring", parts, n, seed)


# -- exact identity suite ---------------------------------------------------------

def exact_identity_suite(model, Bs=((0,), (0, 1)), tol=1e-9):
    """Green identity, the ``h`` system, the taboo Green identity on ``B`` and
    the occupation/excessive round-trips for Green rows and a mixture."""
    from .potential import (
        entrance_measure,
        excessive_to_occupation,
        occupation_to_excessive,
        taboo_return_kernel,
    )

    G = np.asarray(model.G)
    n = model.n
    parts = [TestReport("(I - Q) G = I", float(np.abs((np.eye(n) - model.Q) @ G - np.eye(n)).max()), tol)]
    nus = [G[0], G[min(1, n - 1)], G[0] + 2 * G[n - 1]]
    for Bl in Bs:
        B = [model.states[i] for i in Bl]
        nm = normed_model(model, B)
        idx = nm.B
        out = ~nm.in_B
        res = (nm.h - model.Q @ nm.h)[out]
        parts.append(TestReport(f"h system B={B}", float(np.abs(res).max(initial=0.0)), tol))
        QB = taboo_return_kernel(model, B)
        ident = G[np.ix_(idx, idx)] @ (np.eye(idx.size) - QB) - np.eye(idx.size)
        parts.append(TestReport(f"taboo Green identity B={B}", float(np.abs(ident).max()), tol))
        for k, nu in enumerate(nus):
            mu = excessive_to_occupation(nu, model, B)
            back = occupation_to_excessive(mu, model, B)
            parts.append(TestReport(f"round trip nu#{k} B={B}", float(np.abs(back - nu).max()), tol))
            ent = entrance_measure(nu, model, B)
            rec = ent[idx] @ G[np.ix_(idx, idx)] - nu[idx]
            parts.append(TestReport(f"entrance recomposition nu#{k} B={B}",
                                    float(np.abs(rec).max()), tol))
            parts.append(TestReport(f"entrance = occupation on B nu#{k} B={B}",
                                    float(np.abs(ent[idx] - mu[idx]).max()), tol))
    return TestReport.combine("exact identities", parts)

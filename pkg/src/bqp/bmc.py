"""Samplers for the plain and the ``B``-biased branching Markov chain, the
colouring and decoration kernels, and the spine chain.

Every sampler takes an explicit ``numpy.random.Generator`` and
:class:`SamplerCaps`; hitting a cap sets a flag on the output instead of
raising.  Given the same generator state the output is bit-identical.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpine, NoEntrance, ZeroMeanOffspring
from .forest import (
    BLUE,
    GENERATION_CAPPED,
    POPULATION_CAPPED,
    UNCOLOURED,
    WHITE,
    Forest,
    entrance_set,
)
from .model import normed_model

_U64 = np.iinfo(np.uint64).max


@dataclass(frozen=True)
class SamplerCaps:
    """Resource guard for possibly infinite trees and paths."""

    max_generations: int = 10_000
    max_population: int = 1_000_000

    def __post_init__(self):
        if self.max_generations <= 0 or self.max_population <= 0:
            raise ValueError("caps must be positive")

    def __str__(self):
        return f"{self.max_generations}/{self.max_population}"


DEFAULT_CAPS = SamplerCaps()


COMPLETE, KILLED, TRUNCATED = "complete", "killed-before-B", "truncated"


@dataclass(frozen=True)
class SpinePath:
    """Spine states from the start up to (and including) the first visit to
    ``B``.  ``status`` is ``complete``, ``killed-before-B`` or ``truncated``."""

    states: tuple
    status: str = COMPLETE

    def __len__(self):
        return len(self.states)


def _new_labels(rng, k, used):
    if k == 0:
        return []
    out = rng.integers(0, _U64, size=k, dtype=np.uint64, endpoint=True).tolist()
    for i, lab in enumerate(out):
        while lab in used:
            lab = int(rng.integers(0, _U64, dtype=np.uint64, endpoint=True))
        used.add(lab)
        out[i] = lab
    return out


class _Builder:
    """Accumulates individuals generation by generation."""

    def __init__(self, model, rng, caps):
        self.model = model
        self.rng = rng
        self.caps = caps
        self.labels, self.preds, self.locs, self.colours = [], [], [], []
        self.used = set()
        self.flags = set()
        self.pending = {}

    def add(self, label, pred, loc, colour, gen):
        """Record one individual; it is queued for reproduction at ``gen``."""
        self.labels.append(label)
        self.preds.append(pred)
        self.locs.append(loc)
        self.colours.append(colour)
        self.pending.setdefault(gen, []).append((label, loc, colour))

    def full(self):
        return len(self.labels) >= self.caps.max_population

    def add_children(self, parent, locs, colours, gen):
        """Attach children at generation ``gen``; respects the population cap."""
        room = self.caps.max_population - len(self.labels)
        if len(locs) > room:
            self.flags.add(POPULATION_CAPPED)
            locs, colours = locs[:room], colours[:room]
        if gen > self.caps.max_generations:
            if locs:
                self.flags.add(GENERATION_CAPPED)
            return
        labels = _new_labels(self.rng, len(locs), self.used)
        for lab, loc, c in zip(labels, locs, colours):
            self.add(lab, parent, loc, c, gen)

    def grow(self, special=None):
        """Reproduce every queued individual, generation by generation.

        Plain individuals use the offspring law of their location and move
        with the motion kernel; ``special(label, loc, gen)`` handles blue
        individuals and must return True when it took care of one.
        """
        model, rng = self.model, self.rng
        while self.pending:
            g = min(self.pending)
            level = self.pending.pop(g)
            if self.full():
                if level:
                    self.flags.add(POPULATION_CAPPED)
                self.pending.clear()
                break
            plain = []
            for lab, loc, colour in level:
                if special is not None and colour == BLUE and special(lab, loc, g):
                    continue
                plain.append((lab, loc, colour))
            if not plain:
                continue
            us = rng.random(len(plain)).tolist()
            counts = [model.offspring[loc].draw(u) for (_, loc, _), u in zip(plain, us)]
            total = sum(counts)
            if total == 0:
                continue
            if g + 1 > self.caps.max_generations:
                self.flags.add(GENERATION_CAPPED)
                continue
            moves = iter(rng.random(total).tolist())
            for (lab, loc, colour), k in zip(plain, counts):
                if not k:
                    continue
                child_colour = WHITE if colour in (WHITE, BLUE) else UNCOLOURED
                locs = [model.step(loc, next(moves)) for _ in range(k)]
                self.add_children(lab, locs, [child_colour] * k, g + 1)
                if self.full():
                    break

    def forest(self):
        return Forest(self.labels, self.preds, self.locs, self.colours, self.flags)


def sample_bmc(model, initial, rng, caps=DEFAULT_CAPS):
    """Plain branching Markov chain started from ``initial``.

    ``initial`` is a state position, or a list of ``(label, position)``
    pairs (``label`` may be None to draw one).
    """
    if isinstance(initial, (int, np.integer)):
        initial = [(None, int(initial))]
    b = _Builder(model, rng, caps)
    given = [lab for lab, _ in initial if lab is not None]
    if len(set(given)) != len(given):
        raise ValueError("initial labels must be distinct")
    b.used.update(given)
    fresh = iter(_new_labels(rng, sum(lab is None for lab, _ in initial), b.used))
    for lab, x in initial[: caps.max_population]:
        b.add(next(fresh) if lab is None else lab, None, int(x), UNCOLOURED, 0)
    if len(initial) > caps.max_population:
        b.flags.add(POPULATION_CAPPED)
    b.grow()
    return b.forest()


def _biased_offspring(model, nm, x, rng):
    """Children ``[(loc, colour)]`` of a blue individual at ``x`` outside ``B``
    under the displayed two-step rule: ``(n, y_1..y_n)`` with weight
    ``d_x(n) prod p(x, y_k) sum h(y_k) / h(x)``, then the blue child picked with
    probability proportional to ``h``.  Sampled by rejection from the plain law.
    """
    law = model.offspring[x]
    h = nm.h
    support = np.flatnonzero(model.motion[x])
    bound = max(law.counts) * h[support].max()
    while True:
        n = law.draw(rng.random())
        if n == 0:
            continue
        ys = [model.step(x, u) for u in rng.random(n).tolist()]
        weights = [h[y] for y in ys]
        total = sum(weights)
        if rng.random() * bound < total:
            break
    pick = rng.random() * total
    blue = n - 1
    acc = 0.0
    for k, w in enumerate(weights):
        acc += w
        if pick < acc:
            blue = k
            break
    return [(y, BLUE if k == blue else WHITE) for k, y in enumerate(ys)]


def sample_biased_bmc(model, B, x, rng, caps=DEFAULT_CAPS):
    """``B``-biased BMC from one blue individual at position ``x``.

    A blue individual in ``B`` reproduces like a white one (all children
    white), so the blue line stops on entering ``B``.
    """
    nm = normed_model(model, B)
    b = _Builder(model, rng, caps)

    def special(lab, loc, g):
        if nm.in_B[loc]:
            return False
        kids = _biased_offspring(model, nm, loc, rng)
        b.add_children(lab, [y for y, _ in kids], [c for _, c in kids], g + 1)
        return True

    b.add(_new_labels(rng, 1, b.used)[0], None, int(x), BLUE, 0)
    b.grow(special)
    return b.forest()


def colour(forest, B, rng):
    """Pick a ``B``-entrance individual uniformly; paint it and its ancestral
    line blue and everything else white."""
    heads = entrance_set(forest, B)
    if not heads:
        raise NoEntrance("forest does not hit B")
    chosen = heads[int(rng.integers(len(heads)))][0]
    blue = set()
    lab = chosen
    while lab is not None:
        blue.add(lab)
        lab = forest.predecessor(lab)
    return forest.with_colours([BLUE if lab in blue else WHITE for lab in forest.labels])


def sample_spine(model, B, x, rng, caps=DEFAULT_CAPS):
    """Run the ``p^h`` chain from ``x`` until it enters ``B``."""
    nm = normed_model(model, B)
    path = [int(x)]
    cur = int(x)
    while not nm.in_B[cur]:
        if len(path) > caps.max_generations:
            return SpinePath(tuple(path), TRUNCATED)
        if not nm.ph_cdf[cur][0]:
            return SpinePath(tuple(path), KILLED)
        cur = nm.spine_step(cur, rng.random())
        path.append(cur)
    return SpinePath(tuple(path), COMPLETE)


def decorate(spine, model, B, rng, caps=DEFAULT_CAPS):
    """Grow a coloured tree around a spine.

    The spine becomes a blue line.  Every spine individual outside ``B`` gets
    a size-biased number ``n`` of children of which ``n - 1`` white ones are
    attached at ``p(x, .)``-locations, each growing an independent plain BMC;
    every spine individual in ``B`` reproduces as the root of a plain BMC.
    """
    nm = normed_model(model, B)
    states = tuple(spine.states if isinstance(spine, SpinePath) else spine)
    if not states:
        raise InvalidSpine("empty spine")
    if any(nm.in_B[s] for s in states[:-1]):
        raise InvalidSpine("spine visits B before its last state")
    b = _Builder(model, rng, caps)
    if isinstance(spine, SpinePath) and spine.status == TRUNCATED:
        b.flags.add(GENERATION_CAPPED)
    if len(states) > caps.max_generations + 1:
        states = states[: caps.max_generations + 1]
        b.flags.add(GENERATION_CAPPED)
    if len(states) > caps.max_population:
        states = states[: caps.max_population]
        b.flags.add(POPULATION_CAPPED)
    labels = _new_labels(rng, len(states), b.used)
    pred = None
    for k, (lab, s) in enumerate(zip(labels, states)):
        b.labels.append(lab)
        b.preds.append(pred)
        b.locs.append(int(s))
        b.colours.append(BLUE)
        pred = lab
    for k, (lab, s) in enumerate(zip(labels, states)):
        if nm.in_B[s]:
            b.pending.setdefault(k, []).append((lab, int(s), WHITE))
            continue
        sb = nm.size_biased[s]
        if sb is None:
            raise ZeroMeanOffspring(f"spine state {model.states[s]!r} has zero mean offspring")
        n = sb.draw(rng.random())
        if n > 1:
            locs = [model.step(s, u) for u in rng.random(n - 1).tolist()]
            b.add_children(lab, locs, [WHITE] * (n - 1), k + 1)
    b.grow()
    return b.forest()


def reweighted_biased_sampler(model, B, x, rng, caps=DEFAULT_CAPS):
    """Plain BMC from ``x`` with importance weight ``#H_B / h(x)``."""
    nm = normed_model(model, B)
    f = sample_bmc(model, int(x), rng, caps)
    heads = entrance_set(f, set(nm.B.tolist()))
    return f, len(heads) / nm.h[int(x)]


# -- count-based batch sampler ----------------------------------------------

def batch_counts(model, x, size, rng, B=None, max_generations=10_000):
    """Vectorised generation-by-generation sampler that tracks only how many
    individuals sit at each state, for ``size`` independent trees from ``x``.

    Returns a dict with ``occupation`` (``size x n`` counts) and, when ``B`` is
    given, ``entrance`` (``size x n`` counts of ``B``-entrance individuals);
    in that case the progeny of entrance individuals is not followed and
    ``occupation`` covers the part of each tree strictly before ``B`` plus the
    entrance individuals.  ``capped`` marks trees still alive at the cap.
    """
    n = model.n
    gen = np.zeros((size, n), dtype=np.int64)
    gen[:, int(x)] = 1
    occupation = np.zeros((size, n), dtype=np.int64)
    entrance = np.zeros((size, n), dtype=np.int64) if B is not None else None
    inB = model.mask(B) if B is not None else np.zeros(n, dtype=bool)
    laws = [(np.array(law.counts), np.array(law.probs)) for law in model.offspring]
    for _ in range(max_generations + 1):
        occupation += gen
        if B is not None:
            entrance[:, inB] += gen[:, inB]
            gen[:, inB] = 0
        if not gen.any():
            break
        nxt = np.zeros_like(gen)
        for s in np.flatnonzero(gen.any(axis=0)):
            counts, probs = laws[s]
            if counts.max() == 0:
                continue
            c = gen[:, s]
            kids = rng.multinomial(c, probs) @ counts
            if kids.any():
                nxt += rng.multinomial(kids, model.motion[s])
        gen = nxt
    capped = gen.any(axis=1)
    out = {"occupation": occupation, "capped": capped}
    if B is not None:
        out["entrance"] = entrance
    return out

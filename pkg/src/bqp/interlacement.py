"""Quasi-paths anchored at their ``B``-entrance and the branching
interlacement sampler built on top of them.

The sampler only ever generates paths that hit ``B``: their intensity is
the finite measure ``u |mu_B|`` (``mu_B`` the entrance measure of ``nu``), so
the Poisson number of paths can be drawn exactly.  Each path is cut at its
entrance point, used as the spine of a decorated tree and the tree is kept
with probability ``1 / #H_B``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .bmc import DEFAULT_CAPS, SpinePath, decorate
from .errors import NotSubMarkovian
from .forest import Forest, entrance_set, occupation_of, progeny_of_entrance
from .potential import KuznetsovSampler
from .report import TestReport

BACKWARD_TRUNCATED = "backward-truncated"
FORWARD_TRUNCATED = "forward-truncated"


@dataclass(frozen=True)
class QuasiPath:
    """A path in its canonical shift representative: index 0 is the anchor.

    ``backward`` lists the states before the anchor in time order and never
    visits ``B``; ``forward`` lists the states after it.
    """

    backward: tuple
    anchor: int
    forward: tuple = ()
    flags: frozenset = field(default_factory=frozenset)

    @property
    def states(self):
        return self.backward + (self.anchor,) + self.forward

    def as_forest(self):
        """The path as a one-line forest with consecutive labels from 0."""
        s = self.states
        return Forest(range(len(s)), [None] + list(range(len(s) - 1)), s)


def death_b(path, B=None):
    """Kill the path right after its entrance into ``B``.  ``B`` is accepted
    for symmetry with the other operations; the anchor already marks the
    entrance."""
    if not path.forward and FORWARD_TRUNCATED not in path.flags:
        return path
    return replace(path, forward=(), flags=path.flags - {FORWARD_TRUNCATED})


def _require_sub_markovian(model):
    if not model.is_sub_markovian:
        worst = float(np.max(model.mean_offspring))
        raise NotSubMarkovian(f"mean offspring {worst:g} exceeds 1")


@dataclass
class InterlacementSample:
    """Retained trees of one branching interlacement realisation.

    ``n_paths`` counts the ``B``-hitting paths before thinning,
    ``entrance`` is the entrance measure of ``nu`` on ``B`` (total mass
    ``intensity_mass``) and ``advisory`` carries the decorability constant.
    """

    trees: list
    intensity_mass: float
    u: float
    seed: object = None
    n_paths: int = 0
    advisory: dict = field(default_factory=dict)
    entrance: np.ndarray = None


class InterlacementSampler:
    """Precomputed data for repeated draws with fixed ``(nu, model, B)``."""

    def __init__(self, nu, model, B, caps=DEFAULT_CAPS):
        _require_sub_markovian(model)
        self.model = model
        self.B = B
        self.caps = caps
        self.kuz = KuznetsovSampler(nu, model, B, caps, forward="Q")
        self.mass = self.kuz.mass
        self.B_set = set(self.kuz.nm.B.tolist())
        self._advisory = None

    @property
    def advisory(self):
        if self._advisory is None:
            from .decorability import decorability_constant
            try:
                self._advisory = {"C": decorability_constant(self.model, self.B)}
            except ArithmeticError as exc:
                self._advisory = {"C": float("inf"), "reason": str(exc)}
        return self._advisory

    def path(self, rng):
        """One ``B``-hitting path with its unkilled forward continuation."""
        kuz = self.kuz
        x = kuz.anchor(rng)
        back, born = kuz.backward(x, rng)
        fwd, truncated = kuz.forward_path(x, rng)
        flags = set()
        if not born:
            flags.add(BACKWARD_TRUNCATED)
        if truncated:
            flags.add(FORWARD_TRUNCATED)
        return QuasiPath(back, x, fwd, frozenset(flags))

    def tree(self, rng, path=None):
        """Decorated tree grown around ``death_b`` of a path (steps 3 and 4)."""
        if path is None:
            path = self.path(rng)
        cut = death_b(path, self.B)
        status = "truncated" if BACKWARD_TRUNCATED in cut.flags else "complete"
        spine = SpinePath(cut.backward + (cut.anchor,), status)
        return decorate(spine, self.model, self.B, rng, self.caps)

    def paths(self, u, rng):
        k = int(rng.poisson(u * self.mass)) if u > 0 else 0
        return [self.path(rng) for _ in range(k)]

    def sample(self, u, rng, seed=None):
        if u < 0:
            raise ValueError("u must be non-negative")
        paths = self.paths(u, rng)
        trees = []
        for p in paths:
            t = self.tree(rng, p)
            heads = len(entrance_set(t, self.B_set))
            if rng.random() * heads < 1.0:
                trees.append(t.uncoloured())
        return InterlacementSample(trees, self.mass, float(u), seed, len(paths),
                                   self.advisory, self.kuz.entrance)


def sample_hitting_quasi_process(nu, model, B, u, rng, caps=DEFAULT_CAPS):
    """Poisson(``u |mu_B|``) many ``B``-hitting paths of the quasi-process of
    ``nu``, each anchored at its ``B``-entrance."""
    return InterlacementSampler(nu, model, B, caps).paths(u, rng)


def sample_branching_interlacement(nu, model, B, u, rng, caps=DEFAULT_CAPS, seed=None):
    """Trees of the branching interlacement at level ``u`` that hit ``B``."""
    return InterlacementSampler(nu, model, B, caps).sample(u, rng, seed)


# -- occupation statistics ----------------------------------------------------

def tree_occupations(sample, model, B):
    """Per-tree occupation vectors ``(total, entrance progeny)`` as two
    ``len(trees) x n`` arrays."""
    n = model.n
    B_set = set(model.indices(B).tolist())
    total = np.zeros((len(sample.trees), n))
    progeny = np.zeros((len(sample.trees), n))
    for i, t in enumerate(sample.trees):
        total[i] = occupation_of(t, n)
        progeny[i] = occupation_of(progeny_of_entrance(t, B_set), n)
    return total, progeny


def occupation_z_scores(sums, squares, U, target):
    """z-scores of Poisson-process sums.

    For a Poisson process with intensity ``U Xi`` the sum of ``f`` over its
    points has mean ``U Xi(f)`` and variance ``U Xi(f^2)``; ``sums`` and
    ``squares`` are the observed sums of ``f`` and ``f^2``."""
    sums = np.asarray(sums, dtype=float)
    squares = np.asarray(squares, dtype=float)
    target = np.asarray(target, dtype=float)
    diff = sums - U * target
    sd = np.sqrt(squares)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, diff / sd, np.where(np.abs(diff) <= 1e-12, 0.0, np.inf))
    return z


def progeny_occupation_check(samples, model, B, threshold=3.0):
    """Compare the occupation of the entrance progeny, per unit ``u``, with
    ``mu_B G``.  ``samples`` is one :class:`InterlacementSample` or a list of
    independent ones drawn with the same ``(nu, B)``; their levels add up.

    Returns ``(report, target, empirical, z)``.
    """
    if isinstance(samples, InterlacementSample):
        samples = [samples]
    U = sum(s.u for s in samples)
    n = model.n
    target = np.asarray(samples[0].entrance) @ np.asarray(model.G)
    if U == 0:
        return (TestReport("entrance progeny occupation", 0.0, threshold, 0,
                           notes="vacuous (u = 0)"), target, np.zeros(n), np.zeros(n))
    sums = np.zeros(n)
    squares = np.zeros(n)
    count = 0
    for s in samples:
        _, prog = tree_occupations(s, model, B)
        sums += prog.sum(axis=0)
        squares += (prog ** 2).sum(axis=0)
        count += len(s.trees)
    z = occupation_z_scores(sums, squares, U, target)
    report = TestReport("entrance progeny occupation", float(np.abs(z).max()), threshold,
                        count, notes=f"u={U:g}")
    return report, target, sums / U, z


def occupation_csv(states, empirical, target, z):
    """CSV text ``state,empirical_occupation,exact_target,z_score``."""
    lines = ["state,empirical_occupation,exact_target,z_score"]
    for s, e, t, zz in zip(states, empirical, target, z):
        lines.append(f"{s},{e:.12g},{t:.12g},{zz:.6g}")
    return "\n".join(lines) + "\n"

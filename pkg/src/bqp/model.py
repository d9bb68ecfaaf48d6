"""State spaces, motion kernels, offspring laws and the derived operators.

A :class:`Model` is the triple (states, motion kernel, offspring laws) of a
branching Markov chain on a finite state space.  Everything downstream works
with dense ``numpy`` arrays indexed by the position of a state in
``model.states``; measures are plain 1-d arrays in that order.
"""

from dataclasses import dataclass
from functools import cached_property
from bisect import bisect_right
from typing import Mapping

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    DivergentGreen,
    EmptyStateSpace,
    InvalidOffspringLaw,
    MissingOffspringLaw,
    NotNormingRegion,
    RowSumViolation,
    SolveFailure,
    UnknownState,
    ZeroMeanOffspring,
)

ROW_TOL = 1e-12
GREEN_TOL = 1e-10
RADIUS_THRESHOLD = 1 - 1e-9
RADIUS_MAX_ITER = 10_000
NORMING_TOL = 1e-12


class OffspringLaw:
    """Finite-support law of the number of children.

    ``OffspringLaw({0: 0.6, 2: 0.4})``.  Zero-probability entries are
    dropped; the support is kept sorted.
    """

    __slots__ = ("counts", "probs", "_cdf")

    def __init__(self, probabilities):
        if isinstance(probabilities, OffspringLaw):
            probabilities = probabilities.as_dict()
        items = sorted((int(k), float(p)) for k, p in dict(probabilities).items())
        if not items:
            raise InvalidOffspringLaw("offspring law has empty support")
        for k, p in items:
            if k < 0:
                raise InvalidOffspringLaw(f"negative child count {k}")
            if not (p >= 0 and np.isfinite(p)):
                raise InvalidOffspringLaw(f"invalid probability {p!r} for {k} children")
        total = sum(p for _, p in items)
        if abs(total - 1.0) > ROW_TOL:
            raise InvalidOffspringLaw(f"offspring probabilities sum to {total!r}")
        items = [(k, p) for k, p in items if p > 0]
        self.counts = tuple(k for k, _ in items)
        self.probs = tuple(p for _, p in items)
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        self._cdf = cdf.tolist()

    def as_dict(self):
        return dict(zip(self.counts, self.probs))

    @property
    def mean(self):
        return float(sum(k * p for k, p in zip(self.counts, self.probs)))

    @property
    def second_moment(self):
        return float(sum(k * k * p for k, p in zip(self.counts, self.probs)))

    def draw(self, u):
        """Child count for a uniform ``u`` in [0, 1)."""
        return self.counts[bisect_right(self._cdf, u)]

    def __eq__(self, other):
        if not isinstance(other, OffspringLaw):
            return NotImplemented
        return self.counts == other.counts and np.allclose(self.probs, other.probs, rtol=0, atol=1e-15)

    def __hash__(self):
        return hash(self.counts)

    def __repr__(self):
        return f"OffspringLaw({self.as_dict()!r})"


def size_biased_law(law):
    """Size-biased law ``n -> n d(n) / m``."""
    law = OffspringLaw(law)
    m = law.mean
    if m <= 0:
        raise ZeroMeanOffspring("size biasing needs a positive mean")
    return OffspringLaw({k: k * p / m for k, p in zip(law.counts, law.probs) if k > 0})


def validate_kernel(matrix, kind="nonnegative", labels=None):
    """Check a square non-negative matrix; ``kind`` is ``"stochastic"``,
    ``"substochastic"`` or ``"nonnegative"``.  Returns it as a float array."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"kernel must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise DimensionMismatch("kernel entries must be finite and non-negative")
    if kind == "nonnegative":
        return a
    sums = a.sum(axis=1)
    for i, s in enumerate(sums):
        bad = abs(s - 1) > ROW_TOL if kind == "stochastic" else s > 1 + ROW_TOL
        if bad:
            row = labels[i] if labels is not None else i
            raise RowSumViolation(row, float(s))
    return a


def spectral_radius(Q, threshold=RADIUS_THRESHOLD, max_iter=RADIUS_MAX_ITER):
    """Power-iteration estimate of the spectral radius of a non-negative matrix.

    Iterates on ``I + Q`` (same Perron root shifted by one, but aperiodic) and
    stops as soon as the Collatz-Wielandt bounds place the radius on one side
    of ``threshold``.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if n == 0:
        return 0.0
    x = np.ones(n) / n
    est = 0.0
    for _ in range(max_iter):
        y = x + Q @ x
        ratio = y / x
        lower, upper = ratio.min() - 1, ratio.max() - 1
        est = y.sum() / x.sum() - 1
        if upper < threshold:
            return float(max(est, 0.0))
        if lower >= threshold:
            return float(est)
        x = y / y.sum()
        # components may underflow for reducible matrices; keep x positive
        np.maximum(x, 1e-300, out=x)
    return float(est)


def green_matrix(Q, tol=GREEN_TOL):
    """``G = (I - Q)^{-1} = sum_n Q^n`` for a non-negative matrix ``Q``."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    rho = spectral_radius(Q)
    if rho >= RADIUS_THRESHOLD:
        raise DivergentGreen(f"spectral radius estimate {rho:.12g} is not below 1")
    A = np.eye(n) - Q
    try:
        G = scipy.linalg.solve(A, np.eye(n))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolveFailure(str(exc)) from exc
    residual = np.abs(A @ G - np.eye(n)).max() if n else 0.0
    if not residual <= tol or G.min(initial=0.0) < -tol:
        raise SolveFailure(f"Green solve residual {residual:.3g} exceeds {tol:g}")
    return np.clip(G, 0.0, None)


class Model:
    """Branching Markov chain on a finite state space.

    Built through :func:`build_model`.  ``mean_offspring`` and the intensity
    operator ``Q`` are computed at construction; the Green matrix and the
    spectral radius are computed on first access and cached.
    """

    def __init__(self, states, motion, offspring, B=None, name=None,
                 translation_invariant=False):
        self.states = tuple(states)
        self.motion = motion
        self.offspring = tuple(offspring)
        self.B = tuple(B) if B is not None else None
        self.name = name
        self.translation_invariant = translation_invariant
        self._index = {s: i for i, s in enumerate(self.states)}
        self.mean_offspring = np.array([law.mean for law in self.offspring])
        self.Q = self.mean_offspring[:, None] * self.motion
        self.motion.setflags(write=False)
        self.Q.setflags(write=False)
        self.mean_offspring.setflags(write=False)
        self._motion_cdf = []
        for row in self.motion:
            support = np.flatnonzero(row)
            cdf = np.cumsum(row[support])
            cdf[-1] = 1.0
            self._motion_cdf.append((support.tolist(), cdf.tolist()))

    @property
    def n(self):
        return len(self.states)

    def __len__(self):
        return len(self.states)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<Model{tag} with {self.n} states>"

    def index(self, state):
        try:
            return self._index[state]
        except KeyError:
            raise UnknownState(f"unknown state {state!r}") from None

    def indices(self, states):
        """Sorted array of state positions for an iterable of state labels."""
        if isinstance(states, (str, bytes)) or not hasattr(states, "__iter__"):
            states = [states]
        return np.array(sorted({self.index(s) for s in states}), dtype=int)

    def mask(self, states):
        m = np.zeros(self.n, dtype=bool)
        m[self.indices(states)] = True
        return m

    def step(self, x, u):
        """Motion step from position ``x`` driven by a uniform ``u``."""
        support, cdf = self._motion_cdf[x]
        return support[bisect_right(cdf, u)]

    @cached_property
    def spectral_radius(self):
        return spectral_radius(self.Q)

    @cached_property
    def G(self):
        G = green_matrix(self.Q)
        G.setflags(write=False)
        return G

    @property
    def is_sub_markovian(self):
        return bool(np.all(self.mean_offspring <= 1 + ROW_TOL))


def _as_matrix(motion, states, index):
    n = len(states)
    if isinstance(motion, Mapping):
        a = np.zeros((n, n))
        for (x, y), p in motion.items():
            a[index(x), index(y)] += p
        return a
    a = np.asarray(motion, dtype=float)
    if a.ndim == 2 and a.shape[1] == 3 and a.shape != (n, n):
        raise DimensionMismatch("pass triplets as a {(x, y): p} mapping")
    return a


def build_model(states, motion, offspring, B=None, name=None,
                translation_invariant=False):
    """Validate inputs and return a :class:`Model`.

    ``motion`` is a square array or a ``{(x, y): p}`` mapping over state
    labels.  ``offspring`` maps each state to an offspring law (anything
    :class:`OffspringLaw` accepts); a single law is used for every state.
    """
    states = list(states)
    if not states:
        raise EmptyStateSpace("state list is empty")
    if len(set(states)) != len(states):
        raise DimensionMismatch("duplicate state labels")
    index = {s: i for i, s in enumerate(states)}

    def lookup(s):
        try:
            return index[s]
        except KeyError:
            raise UnknownState(f"unknown state {s!r}") from None

    motion = _as_matrix(motion, states, lookup)
    if motion.shape != (len(states), len(states)):
        raise DimensionMismatch(
            f"motion has shape {motion.shape}, expected {(len(states), len(states))}")
    motion = validate_kernel(motion, "stochastic", labels=states).copy()

    per_state = isinstance(offspring, Mapping) and all(
        isinstance(v, (Mapping, OffspringLaw)) for v in offspring.values())
    if not per_state:
        laws = [OffspringLaw(offspring)] * len(states)
    else:
        laws = []
        for s in states:
            if s not in offspring:
                raise MissingOffspringLaw(f"no offspring law for state {s!r}")
            laws.append(OffspringLaw(offspring[s]))
    if B is not None:
        if isinstance(B, (str, bytes)) or not hasattr(B, "__iter__"):
            B = [B]
        for b in B:
            lookup(b)
    return Model(states, motion, laws, B=B, name=name,
                 translation_invariant=translation_invariant)


def intensity_operator(model):
    """``Q(x, y) = m_x p(x, y)``."""
    return np.array(model.Q)


def green_function(model, tol=GREEN_TOL):
    """Expected occupation ``g(x, y)``; raises :class:`DivergentGreen` when the
    spectral radius of ``Q`` is not below ``1 - 1e-9``."""
    if tol == GREEN_TOL:
        return np.array(model.G)
    return green_matrix(model.Q, tol)


def _norming_check(model, B):
    """``B`` must be non-empty and reachable along positive ``Q`` entries
    from every state."""
    idx = model.indices(B)
    if idx.size == 0:
        raise NotNormingRegion([], "B must be non-empty")
    reach = np.zeros(model.n, dtype=bool)
    reach[idx] = True
    frontier = reach.copy()
    positive = np.asarray(model.Q) > 0
    while frontier.any():
        new = positive[:, frontier].any(axis=1) & ~reach
        reach |= new
        frontier = new
    bad = [model.states[i] for i in np.flatnonzero(~reach)]
    if bad:
        raise NotNormingRegion(bad)
    return idx


def h_function(model, B):
    """``h(x) = E^x[#H_B]``: equal to 1 on ``B`` and ``Q``-harmonic off ``B``.

    Only the block of ``Q`` off ``B`` has to be transient, so ``h`` exists
    even when the Green function on the whole space diverges."""
    idx = _norming_check(model, B)
    n = model.n
    inB = np.zeros(n, dtype=bool)
    inB[idx] = True
    out = ~inB
    h = np.ones(n)
    if out.any():
        Q = model.Q
        Qcc = Q[np.ix_(out, out)]
        if spectral_radius(Qcc) >= RADIUS_THRESHOLD:
            raise DivergentGreen("Green function off B diverges")
        A = np.eye(out.sum()) - Qcc
        rhs = Q[np.ix_(out, inB)].sum(axis=1)
        try:
            h[out] = scipy.linalg.solve(A, rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolveFailure(str(exc)) from exc
        residual = np.abs(A @ h[out] - rhs).max()
        if not residual <= GREEN_TOL:
            raise SolveFailure(f"h solve residual {residual:.3g}")
    if np.any(h <= 0):
        raise NotNormingRegion([model.states[i] for i in np.flatnonzero(h <= 0)])
    return h


def h_transform_kernel(model, B, h=None):
    """Spine kernel ``p^h(x, y) = 1_{B^c}(x) Q(x, y) h(y) / h(x)``."""
    if h is None:
        h = h_function(model, B)
    h = np.asarray(h, dtype=float)
    if h.shape != (model.n,):
        raise DimensionMismatch(f"h has shape {h.shape}, expected ({model.n},)")
    ph = model.Q * h[None, :] / h[:, None]
    ph[model.mask(B)] = 0.0
    return ph


@dataclass(frozen=True)
class NormedModel:
    """A model together with a norming region and its derived spine data."""

    model: Model
    B: np.ndarray
    h: np.ndarray
    ph: np.ndarray

    @classmethod
    def of(cls, model, B):
        h = h_function(model, B)
        ph = h_transform_kernel(model, B, h)
        return cls(model, model.indices(B), h, ph)

    @cached_property
    def in_B(self):
        m = np.zeros(self.model.n, dtype=bool)
        m[self.B] = True
        return m

    @cached_property
    def ph_cdf(self):
        rows = []
        for row in self.ph:
            support = np.flatnonzero(row)
            if support.size == 0:
                rows.append(([], []))
                continue
            cdf = np.cumsum(row[support]) / row[support].sum()
            cdf[-1] = 1.0
            rows.append((support.tolist(), cdf.tolist()))
        return rows

    @cached_property
    def size_biased(self):
        return tuple(size_biased_law(law) if law.mean > 0 else None
                     for law in self.model.offspring)

    def spine_step(self, x, u):
        support, cdf = self.ph_cdf[x]
        return support[bisect_right(cdf, u)]


def reference_model(name):
    """The three small reference models used across tests and demos.

    ``"A"``: three states on a path with ``d = {0: 0.6, 2: 0.4}`` and
    ``B = {0}``; ``"B"``: one state, critical binary branching; ``"C"``:
    one state, ``d = {0: 0.6, 2: 0.4}``.
    """
    if name == "A":
        motion = [[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]]
        return build_model([0, 1, 2], motion, {0: 0.6, 2: 0.4}, B=[0], name="A")
    if name == "B":
        return build_model([0], [[1.0]], {0: 0.5, 2: 0.5}, B=[0], name="B")
    if name == "C":
        return build_model([0], [[1.0]], {0: 0.6, 2: 0.4}, B=[0], name="C",
                           translation_invariant=True)
    raise KeyError(f"no reference model {name!r}")


def normed_model(model, B):
    """Cached :class:`NormedModel` for ``(model, B)``."""
    key = tuple(model.indices(B).tolist())
    cache = model.__dict__.setdefault("_normed_cache", {})
    if key not in cache:
        cache[key] = NormedModel.of(model, [model.states[i] for i in key])
    return cache[key]

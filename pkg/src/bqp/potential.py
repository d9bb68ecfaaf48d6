"""Potential theory of a non-negative matrix ``Q`` on a finite state space.

Functions here accept either a :class:`~bqp.model.Model` (its intensity
operator is used and ``B`` is given by state labels) or a bare square array
(``B`` given by positions).  Measures are row vectors.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bmc import DEFAULT_CAPS
from .errors import (
    BackwardNotAlmostSurelyFinite,
    DimensionMismatch,
    DivergentGreen,
    NotExcessive,
    SolveFailure,
    ZeroEntranceMass,
    ZeroMassState,
)
from .model import Model, RADIUS_THRESHOLD, normed_model, spectral_radius, validate_kernel
from .report import TestReport

EXCESS_TOL = 1e-12
CLAMP_TOL = 1e-12
FAMILY_TOL = 1e-9


def _operator(obj):
    if isinstance(obj, Model):
        return np.asarray(obj.Q), obj
    return validate_kernel(obj), None


def _positions(obj, B, n):
    if isinstance(obj, Model):
        return obj.indices(B)
    idx = np.array(sorted({int(b) for b in np.atleast_1d(B)}), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DimensionMismatch(f"B out of range for {n} states")
    return idx


def _measure(nu, n):
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (n,):
        raise DimensionMismatch(f"measure has shape {nu.shape}, expected ({n},)")
    if not np.all(np.isfinite(nu)) or np.any(nu < 0):
        raise DimensionMismatch("measure must be finite and non-negative")
    return nu


def _solve(A, b):
    try:
        return scipy.linalg.solve(A, b)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolveFailure(str(exc)) from exc


def _clamp(v, what):
    if v.size and v.min() < -CLAMP_TOL:
        raise NotExcessive(f"{what} has a negative entry {v.min():.3g}")
    return np.clip(v, 0.0, None)


# -- excessive measures ------------------------------------------------------

def is_excessive(measure, Q):
    """``(ok, slack)`` with ``slack = measure - measure Q``; ``ok`` when every
    slack entry is at least ``-1e-12``."""
    Q, _ = _operator(Q)
    nu = _measure(measure, Q.shape[0])
    slack = nu - nu @ Q
    return bool(np.all(slack >= -EXCESS_TOL)), slack


def _require_excessive(nu, Q):
    ok, slack = is_excessive(nu, Q)
    if not ok:
        bad = np.flatnonzero(slack < -EXCESS_TOL).tolist()
        raise NotExcessive(f"measure is not excessive at positions {bad}")
    return slack


def potential_of(charge, Q):
    """``charge G`` computed on the set reachable from the support of
    ``charge``, so it stays finite when ``Q`` has recurrent parts elsewhere."""
    Q, _ = _operator(Q)
    charge = np.asarray(charge, dtype=float)
    n = Q.shape[0]
    support = charge > 0
    reach = support.copy()
    frontier = support.copy()
    while frontier.any():
        new = (Q[frontier] > 0).any(axis=0) & ~reach
        reach |= new
        frontier = new
    out = np.zeros(n)
    if not reach.any():
        return out
    R = np.flatnonzero(reach)
    QR = Q[np.ix_(R, R)]
    if spectral_radius(QR) >= RADIUS_THRESHOLD:
        raise DivergentGreen("Green's function diverges on the reachable set")
    out[R] = _solve((np.eye(R.size) - QR).T, charge[R])
    return out


@dataclass(frozen=True)
class RieszPair:
    """``nu = inv + pot G`` with ``inv`` invariant and ``pot = nu (I - Q)``."""

    pot: np.ndarray
    inv: np.ndarray


def riesz_decomposition(measure, Q):
    """Split an excessive measure into potential and invariant parts."""
    Q, _ = _operator(Q)
    nu = _measure(measure, Q.shape[0])
    pot = _require_excessive(nu, Q).clip(0.0, None)
    inv = nu - potential_of(pot, Q)
    scale = max(1.0, float(nu.max(initial=0.0)))
    if inv.min(initial=0.0) < -1e-10 * scale:
        raise NotExcessive("negative invariant part")
    inv = np.where(np.abs(inv) <= 1e-12 * scale, 0.0, inv).clip(0.0, None)
    return RieszPair(pot, inv)


def adjoint_kernel(measure, Q):
    """``hat p(x, y) = nu(y) Q(y, x) / nu(x)``; needs ``nu > 0`` everywhere."""
    Q, _ = _operator(Q)
    nu = _measure(measure, Q.shape[0])
    if np.any(nu <= 0):
        raise ZeroMassState(f"measure vanishes at positions {np.flatnonzero(nu <= 0).tolist()}")
    return Q.T * nu[None, :] / nu[:, None]


# -- taboo kernels and entrance measures -----------------------------------

def _split(n, idx):
    inside = np.zeros(n, dtype=bool)
    inside[idx] = True
    return inside, ~inside


def passage_matrix(Q, B):
    """``W(x, y)`` for ``y`` in ``B``: total ``Q``-weight of paths from ``x`` that
    reach ``y`` while avoiding ``B`` at all earlier times (``W = I`` on ``B``).
    Returns an ``n x |B|`` array with columns in sorted ``B`` order."""
    Qa, _ = _operator(Q)
    n = Qa.shape[0]
    idx = _positions(Q, B, n)
    inside, out = _split(n, idx)
    W = np.zeros((n, idx.size))
    W[idx, np.arange(idx.size)] = 1.0
    if out.any():
        Qcc = Qa[np.ix_(out, out)]
        if spectral_radius(Qcc) >= RADIUS_THRESHOLD:
            raise DivergentGreen("Green's function off B diverges")
        W[out] = _solve(np.eye(out.sum()) - Qcc, Qa[np.ix_(out, inside)])
    return W


def taboo_return_kernel(Q, B):
    """First-return kernel ``Q^B`` on ``B`` (rows/columns in sorted ``B`` order):
    ``Q_BB + Q_{B,B^c} (I - Q_{B^c B^c})^{-1} Q_{B^c,B}``."""
    Qa, _ = _operator(Q)
    n = Qa.shape[0]
    idx = _positions(Q, B, n)
    if idx.size == 0:
        raise DimensionMismatch("B must be non-empty")
    W = passage_matrix(Q, B)
    return Qa[idx] @ W


def entrance_measure(measure, Q, B):
    """``nu|_B (I - Q^B)`` as a full-length vector supported on ``B``."""
    Qa, _ = _operator(Q)
    n = Qa.shape[0]
    nu = _measure(measure, n)
    _require_excessive(nu, Qa)
    idx = _positions(Q, B, n)
    QB = taboo_return_kernel(Q, B)
    out = np.zeros(n)
    out[idx] = _clamp(nu[idx] - nu[idx] @ QB, "entrance measure")
    return out


@dataclass(frozen=True)
class EntranceFamily:
    """Increasing sets with one finite measure (full-length vector) per set."""

    sets: tuple
    measures: tuple

    def __post_init__(self):
        if len(self.sets) != len(self.measures):
            raise DimensionMismatch("one measure per set")
        for a, b in zip(self.sets, self.sets[1:]):
            if not set(a) <= set(b):
                raise DimensionMismatch("entrance family sets must increase")


def entrance_family(measure, Q, sets):
    """Entrance measures of an excessive measure along ``sets``."""
    sets = tuple(tuple(s) for s in sets)
    return EntranceFamily(sets, tuple(entrance_measure(measure, Q, s) for s in sets))


def entrance_family_check(family, Q):
    """Consistency of consecutive members:
    ``mu_n(y) = 1_{B_n}(y) sum_x mu_{n+1}(x) W_n(x, y)``."""
    Qa, _ = _operator(Q)
    n = Qa.shape[0]
    worst = 0.0
    for k, (Bn, mu_n, mu_next) in enumerate(zip(family.sets, family.measures, family.measures[1:])):
        idx = _positions(Q, Bn, n)
        predicted = np.zeros(n)
        predicted[idx] = np.asarray(mu_next) @ passage_matrix(Q, Bn)
        worst = max(worst, float(np.abs(predicted - np.asarray(mu_n)).max()))
    return TestReport("entrance family consistency", worst, FAMILY_TOL,
                      notes=f"{len(family.sets)} sets")


# -- occupation measures of the spine chain ----------------------------------

def _green_rows(model, idx):
    return np.asarray(model.G)[idx]


def occupation_to_excessive(mu, model, B):
    """``nu(x) = 1_{B^c}(x) mu(x) / h(x) + sum_{z in B} mu(z) g(z, x)``."""
    nm = normed_model(model, B)
    mu = _measure(mu, model.n)
    nu = np.where(nm.in_B, 0.0, mu / nm.h)
    return nu + mu[nm.B] @ _green_rows(model, nm.B)


def excessive_to_occupation(nu, model, B):
    """Inverse of :func:`occupation_to_excessive`: ``mu|_B = nu|_B (I - Q^B)``,
    then solve for ``mu`` off ``B``."""
    nm = normed_model(model, B)
    nu = _measure(nu, model.n)
    _require_excessive(nu, model.Q)
    mu_B = entrance_measure(nu, model, B)
    from_B = mu_B[nm.B] @ _green_rows(model, nm.B)
    mu = np.where(nm.in_B, mu_B, nm.h * (nu - from_B))
    return _clamp(mu, "occupation measure")


def spine_occupation(model, B, x):
    """``h(x) g_h(x, .)`` where ``g_h = (I - P^h)^{-1}`` is the Green matrix of
    the spine chain."""
    nm = normed_model(model, B)
    x = int(x)
    row = _solve((np.eye(model.n) - nm.ph).T, np.eye(model.n)[x])
    return nm.h[x] * row


# -- one-sided Kuznetsov measure ---------------------------------------------

@dataclass(frozen=True)
class KuznetsovPath:
    """Path anchored at its ``B``-entrance.

    ``backward`` holds the states strictly before the anchor in forward time
    order (earliest first); ``born`` is False when the backward part hit the
    cap before the adjoint chain died.
    """

    backward: tuple
    anchor: int
    forward: tuple = ()
    born: bool = True

    @property
    def states(self):
        return self.backward + (self.anchor,) + self.forward

    def lines(self, states=None):
        k0 = -len(self.backward)
        name = (lambda s: states[s]) if states is not None else (lambda s: s)
        return [f"{k0 + i} {name(s)}" for i, s in enumerate(self.states)]


class AvoidingAdjoint:
    """The ``nu``-adjoint chain conditioned never to return to ``B``.

    ``avoid[x]`` is the probability that the adjoint chain started at ``x``
    never visits ``B`` at positive times; the conditioned chain moves to
    ``y`` outside ``B`` with probability ``hat p(x, y) avoid[y] / avoid[x]`` and
    dies with probability ``death[x] / avoid[x]``.
    """

    def __init__(self, nu, Q, B):
        Qa, _ = _operator(Q)
        n = Qa.shape[0]
        self.nu = _measure(nu, n)
        self.hat = adjoint_kernel(self.nu, Qa)
        self.death = np.clip(1.0 - self.hat.sum(axis=1), 0.0, None)
        idx = _positions(Q, B, n)
        inside, out = _split(n, idx)
        self.inside = inside
        ret = np.zeros(n)
        if out.any():
            Hcc = self.hat[np.ix_(out, out)]
            rhs = self.hat[np.ix_(out, inside)].sum(axis=1)
            if spectral_radius(Hcc) < RADIUS_THRESHOLD:
                ret[out] = _solve(np.eye(out.sum()) - Hcc, rhs)
            else:
                r = np.zeros(out.sum())
                for _ in range(100_000):
                    r_new = rhs + Hcc @ r
                    if np.abs(r_new - r).max() < 1e-15:
                        break
                    r = r_new
                ret[out] = r_new
        ret[inside] = self.hat[np.ix_(inside, inside)].sum(axis=1) + self.hat[np.ix_(inside, out)] @ ret[out]
        self.avoid = np.clip(1.0 - ret, 0.0, 1.0)
        rows = []
        for x in range(n):
            if self.avoid[x] <= 0:
                rows.append(([], []))
                continue
            w = np.where(out, self.hat[x] * self.avoid, 0.0)
            support = np.flatnonzero(w > 0).tolist()
            probs = (w[support] / self.avoid[x]).tolist() + [self.death[x] / self.avoid[x]]
            cdf = np.cumsum(probs)
            cdf /= cdf[-1]
            rows.append((support, cdf.tolist()))
        self._rows = rows

    def walk(self, x, rng, max_steps):
        """Backward states from ``x`` (latest first) and whether the chain died."""
        from bisect import bisect_right
        out = []
        cur = int(x)
        for _ in range(max_steps):
            support, cdf = self._rows[cur]
            if not cdf:
                return out, True
            k = bisect_right(cdf, rng.random())
            if k >= len(support):
                return out, True
            cur = support[k]
            out.append(cur)
        return out, False


class KuznetsovSampler:
    """Draws paths from the one-sided Kuznetsov measure of ``nu`` restricted
    to paths whose time-0 state is their first visit to ``B``, normalised by
    its total mass ``|mu_B|`` (``mu_B = nu|_B (I - Q^B)``)."""

    def __init__(self, nu, model, B, caps=DEFAULT_CAPS, forward="spine"):
        self.model = model
        self.nm = normed_model(model, B)
        self.nu = _measure(nu, model.n)
        self.riesz = riesz_decomposition(self.nu, model.Q)
        self.entrance = entrance_measure(self.nu, model, B)
        self.mass = float(self.entrance.sum())
        if self.mass <= 0:
            raise ZeroEntranceMass("entrance measure has zero mass")
        self.has_invariant_part = bool(self.riesz.inv.max() > 0)
        self.adjoint = AvoidingAdjoint(self.nu, model.Q, self.nm.B)
        self.caps = caps
        self.forward = forward
        p = self.entrance / self.mass
        self._anchor_cdf = np.cumsum(p)
        self._anchor_cdf[-1] = 1.0

    def anchor(self, rng):
        return int(np.searchsorted(self._anchor_cdf, rng.random(), side="right"))

    def backward(self, x, rng):
        back, died = self.adjoint.walk(x, rng, self.caps.max_generations)
        if not died and self.has_invariant_part:
            raise BackwardNotAlmostSurelyFinite(
                "backward path not finished within caps and nu has an invariant part")
        return tuple(reversed(back)), died

    def forward_path(self, x, rng):
        """Forward continuation: the ``p^h`` chain (which is dead on ``B``) or,
        with ``forward="Q"``, the killed sub-Markov ``Q``-chain."""
        model = self.model
        out = []
        cur = x
        truncated = False
        for _ in range(self.caps.max_generations):
            if self.forward == "spine":
                support = self.nm.ph_cdf[cur][0]
                if not support:
                    break
                cur = self.nm.spine_step(cur, rng.random())
            else:
                u = rng.random()
                if u >= model.mean_offspring[cur]:
                    break
                cur = model.step(cur, u / model.mean_offspring[cur])
            out.append(cur)
        else:
            truncated = True
        return tuple(out), truncated

    def __call__(self, rng):
        x = self.anchor(rng)
        back, born = self.backward(x, rng)
        fwd, _ = self.forward_path(x, rng)
        return KuznetsovPath(back, x, fwd, born)


def kuznetsov_sample(nu, model, B, rng, caps=DEFAULT_CAPS):
    """One path of the normalised restricted Kuznetsov measure (see
    :class:`KuznetsovSampler`; build the sampler once for many draws)."""
    _require_excessive(_measure(nu, model.n), model.Q)
    return KuznetsovSampler(nu, model, B, caps)(rng)

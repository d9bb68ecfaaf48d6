"""Ordered forests in point-process representation.

An individual is a record ``(label, predecessor, location, colour)``.
Labels are unsigned 64-bit integers, ``predecessor`` is another label or
``None`` and ``location`` is a state position (an index into
``model.states``).  Children are ordered by label.
"""

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParseError, UnknownLabel

UNCOLOURED, WHITE, BLUE = 0, 1, 2
COLOUR_NAMES = {UNCOLOURED: "uncoloured", WHITE: "white", BLUE: "blue"}
COLOUR_CODES = {v: k for k, v in COLOUR_NAMES.items()}
NONE_TOKEN = "-"

GENERATION_CAPPED = "generation_capped"
POPULATION_CAPPED = "population_capped"


class Individual(NamedTuple):
    label: int
    predecessor: int | None
    location: int
    colour: int = UNCOLOURED


class Forest:
    """Finite ordered forest.

    Construction does not validate; call :func:`validate_forest`.  Samplers
    record truncation in ``flags`` (``generation_capped`` /
    ``population_capped``).
    """

    __slots__ = ("labels", "preds", "locs", "colours", "flags", "_pos", "_children")

    def __init__(self, labels=(), preds=(), locs=(), colours=None, flags=()):
        self.labels = tuple(labels)
        self.preds = tuple(preds)
        self.locs = tuple(locs)
        if colours is None:
            colours = (UNCOLOURED,) * len(self.labels)
        self.colours = tuple(colours)
        if not (len(self.labels) == len(self.preds) == len(self.locs) == len(self.colours)):
            raise ValueError("forest columns have different lengths")
        self.flags = frozenset(flags)
        self._pos = None
        self._children = None

    @classmethod
    def from_individuals(cls, individuals, flags=()):
        individuals = list(individuals)
        if not individuals:
            return cls(flags=flags)
        labels, preds, locs, colours = zip(*individuals)
        return cls(labels, preds, locs, colours, flags)

    def individuals(self):
        return [Individual(*r) for r in zip(self.labels, self.preds, self.locs, self.colours)]

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.individuals())

    def __eq__(self, other):
        if not isinstance(other, Forest):
            return NotImplemented
        return (sorted(zip(self.labels, self.preds, self.locs, self.colours),
                       key=_record_key)
                == sorted(zip(other.labels, other.preds, other.locs, other.colours),
                          key=_record_key)
                and self.flags == other.flags)

    def __repr__(self):
        flags = f", flags={sorted(self.flags)}" if self.flags else ""
        return f"<Forest of {len(self)} individuals{flags}>"

    @property
    def truncated(self):
        return bool(self.flags & {GENERATION_CAPPED, POPULATION_CAPPED})

    def position(self, label):
        if self._pos is None:
            self._pos = {lab: i for i, lab in enumerate(self.labels)}
        try:
            return self._pos[label]
        except KeyError:
            raise UnknownLabel(label) from None

    def __contains__(self, label):
        try:
            self.position(label)
        except UnknownLabel:
            return False
        return True

    def location(self, label):
        return self.locs[self.position(label)]

    def predecessor(self, label):
        return self.preds[self.position(label)]

    def colour(self, label):
        return self.colours[self.position(label)]

    def children(self, label=None):
        """Labels of the children of ``label`` (roots when ``label`` is None),
        ordered by label."""
        if self._children is None:
            ch = {}
            for lab, p in zip(self.labels, self.preds):
                ch.setdefault(p, []).append(lab)
            for v in ch.values():
                v.sort()
            self._children = ch
        return self._children.get(label, [])

    def roots(self):
        return self.children(None)

    def with_colours(self, colours, flags=None):
        return Forest(self.labels, self.preds, self.locs, colours,
                      self.flags if flags is None else flags)

    def uncoloured(self):
        return self.with_colours(None)

    def blue_labels(self):
        """Blue individuals from the top of the spine down."""
        blue = [lab for lab, c in zip(self.labels, self.colours) if c == BLUE]
        return sorted(blue, key=lambda lab: generation(self, lab))


def _record_key(r):
    return (r[0], -1 if r[1] is None else r[1], r[2], r[3])


@dataclass(frozen=True)
class Violation:
    kind: str
    labels: tuple

    def __str__(self):
        return f"{self.kind}: {list(self.labels)}"


def validate_forest(forest, tree=False):
    """Return the list of violated forest invariants (empty when valid).

    Kinds: ``DuplicateLabel``, ``MissingPredecessor``, ``SelfPredecessor``,
    ``CircleViolation`` and, with ``tree=True``, ``NotConnected``.  Finite
    forests are transient and have finitely many children per individual.
    """
    report = []
    seen, dup = set(), set()
    for lab in forest.labels:
        if lab in seen:
            dup.add(lab)
        seen.add(lab)
    if dup:
        report.append(Violation("DuplicateLabel", tuple(sorted(dup))))
    pred_of = dict(zip(forest.labels, forest.preds))
    missing = sorted(lab for lab, p in pred_of.items() if p is not None and p not in pred_of)
    if missing:
        report.append(Violation("MissingPredecessor", tuple(missing)))
    selfp = sorted(lab for lab, p in pred_of.items() if p == lab)
    if selfp:
        report.append(Violation("SelfPredecessor", tuple(selfp)))

    state = {}  # 1 = on current chain, 2 = resolved
    cyc = set()
    for start in pred_of:
        chain = []
        cur = start
        while cur is not None and cur in pred_of and state.get(cur) is None:
            state[cur] = 1
            chain.append(cur)
            cur = pred_of[cur]
        if cur is not None and state.get(cur) == 1:
            i = chain.index(cur)
            cyc.update(chain[i:])
        for c in chain:
            state[c] = 2
    if cyc:
        report.append(Violation("CircleViolation", tuple(sorted(cyc))))

    if tree and forest.labels:
        roots = [lab for lab, p in pred_of.items() if p is None]
        if len(roots) != 1 or cyc or missing:
            report.append(Violation("NotConnected", tuple(sorted(roots))))
    return report


def _descendants(forest, label):
    out = [label]
    queue = deque([label])
    while queue:
        for c in forest.children(queue.popleft()):
            out.append(c)
            queue.append(c)
    return out


def _subforest(forest, labels, roots):
    pos = [forest.position(lab) for lab in labels]
    preds = [None if forest.labels[i] in roots else forest.preds[i] for i in pos]
    return Forest([forest.labels[i] for i in pos], preds,
                  [forest.locs[i] for i in pos], [forest.colours[i] for i in pos],
                  forest.flags)


def entrance_set(forest, B):
    """``[(label, location), ...]`` of individuals located in ``B`` that have
    no strict ancestor in ``B``, in breadth-first order."""
    B = set(int(b) for b in np.atleast_1d(B)) if not isinstance(B, (set, frozenset)) else B
    out = []
    queue = deque(forest.roots())
    while queue:
        lab = queue.popleft()
        loc = forest.location(lab)
        if loc in B:
            out.append((lab, loc))
        else:
            queue.extend(forest.children(lab))
    return out


def progeny(forest, label):
    """Subtree of ``label`` and its iterated descendants, rooted at ``label``."""
    forest.position(label)
    return _subforest(forest, _descendants(forest, label), {label})


def progeny_of_entrance(forest, B):
    """Union of the progenies of the ``B``-entrance individuals."""
    heads = [lab for lab, _ in entrance_set(forest, B)]
    labels = []
    for lab in heads:
        labels.extend(_descendants(forest, lab))
    return _subforest(forest, labels, set(heads))


def generation(forest, label):
    """Number of strict iterated predecessors of ``label``."""
    k = 0
    p = forest.predecessor(label)
    while p is not None:
        k += 1
        p = forest.predecessor(p)
    return k


def occupation_of(forest, n_states=None):
    """Number of individuals per location."""
    locs = np.asarray(forest.locs, dtype=int)
    if n_states is None:
        n_states = int(locs.max()) + 1 if locs.size else 0
    return np.bincount(locs, minlength=n_states).astype(float)


def truncate(forest, depth):
    """Individuals of generation at most ``depth``."""
    keep = []
    level = list(forest.roots())
    d = 0
    while level and d <= depth:
        keep.extend(level)
        level = [c for lab in level for c in forest.children(lab)]
        d += 1
    pos = sorted(forest.position(lab) for lab in keep)
    return Forest([forest.labels[i] for i in pos], [forest.preds[i] for i in pos],
                  [forest.locs[i] for i in pos], [forest.colours[i] for i in pos],
                  forest.flags)


def to_ulam_harris(forest):
    """Map Ulam-Harris words (tuples of 1-based child ranks, per root) to
    ``(label, location)``.  Debugging aid only."""
    out = {}
    for r, root in enumerate(forest.roots(), start=1):
        stack = [((r,), root)]
        while stack:
            word, lab = stack.pop()
            out[word] = (lab, forest.location(lab))
            for k, c in enumerate(forest.children(lab), start=1):
                stack.append((word + (k,), c))
    return out


def concat(*forests):
    """Disjoint union (labels must not clash)."""
    labels, preds, locs, colours, flags = [], [], [], [], set()
    for f in forests:
        labels += f.labels
        preds += f.preds
        locs += f.locs
        colours += f.colours
        flags |= f.flags
    return Forest(labels, preds, locs, colours, flags)


# -- serialization ---------------------------------------------------------

def format_forest(forest, states=None):
    """Lines ``label predecessor location colour``; ``-`` encodes no predecessor."""
    lines = []
    for lab, p, loc, c in zip(forest.labels, forest.preds, forest.locs, forest.colours):
        where = states[loc] if states is not None else loc
        pred = NONE_TOKEN if p is None else str(p)
        lines.append(f"{lab} {pred} {where} {COLOUR_NAMES[c]}")
    return lines


def parse_forest(lines, states=None, flags=()):
    """Inverse of :func:`format_forest`; blank lines and ``#`` comments skip."""
    index = {str(s): i for i, s in enumerate(states)} if states is not None else None
    labels, preds, locs, colours = [], [], [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", lineno)
        try:
            labels.append(int(parts[0]))
            preds.append(None if parts[1] == NONE_TOKEN else int(parts[1]))
            locs.append(index[parts[2]] if index is not None else int(parts[2]))
            colours.append(COLOUR_CODES[parts[3]])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad forest record {line!r}", lineno) from exc
    return Forest(labels, preds, locs, colours, flags)


def write_forest_stream(fh, forests, header=None, states=None):
    """One block per forest, each preceded by a ``# ...`` header line."""
    for f in forests:
        head = dict(header or {})
        head["flags"] = ",".join(sorted(f.flags)) or "none"
        fh.write("# " + " ".join(f"{k}={v}" for k, v in head.items()) + "\n")
        for line in format_forest(f, states):
            fh.write(line + "\n")
        fh.write("\n")


def read_forest_stream(fh, states=None):
    """Parse a stream written by :func:`write_forest_stream`.  Returns a list
    of ``(header_dict, Forest)``."""
    out = []
    head, block = None, []

    def flush():
        if head is not None:
            flags = [] if head.get("flags", "none") == "none" else head["flags"].split(",")
            out.append((head, parse_forest(block, states, flags)))

    for raw in fh:
        line = raw.strip()
        if line.startswith("#"):
            flush()
            head = dict(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
            block = []
        elif line:
            block.append(line)
    flush()
    return out

"""Plain-text model files and measure files.

A model file holds one or more blocks::

    model A
    states 0 1 2
    B 0
    motion
      0 1 1
      1 0 0.5
      1 2 0.5
      2 1 1
    offspring
      *: 0 0.6 2 0.4
    end

``motion`` lines are ``from to probability``; ``offspring`` lines are
``state: count prob count prob ...`` with ``*`` standing for every state not
listed explicitly.  ``translation_invariant yes`` marks the model as such.
``#`` starts a comment.  State tokens that look like integers become ints.
"""

from pathlib import Path

import numpy as np

from .errors import BQPError, ParseError
from .model import build_model, reference_model

KEYS = {"model", "states", "B", "translation_invariant", "motion", "offspring", "end"}


def state_token(tok):
    try:
        return int(tok)
    except ValueError:
        return tok


def _number(tok, lineno, path, what):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"{what} {tok!r} is not a number", lineno, path) from None


def parse_models(text, path=None):
    """``{name: Model}`` for every block in ``text``; errors carry line numbers."""
    models = {}
    block = None
    section = None

    def finish(lineno):
        name = block["name"]
        if block["states"] is None:
            raise ParseError(f"model {name!r} has no states line", lineno, path)
        offspring = dict(block["offspring"])
        if "*" in offspring:
            default = offspring.pop("*")
            offspring = {s: offspring.get(s, default) for s in block["states"]}
        try:
            model = build_model(block["states"], block["motion"], offspring,
                                B=block["B"], name=name,
                                translation_invariant=block["ti"])
        except BQPError as exc:
            raise ParseError(f"model {name!r}: {exc}", block["line"], path) from exc
        models[name] = model

    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        if head in KEYS:
            section = None
            if head == "model":
                if block is not None:
                    raise ParseError("missing 'end' before new model", lineno, path)
                if len(parts) != 2:
                    raise ParseError("expected 'model NAME'", lineno, path)
                if parts[1] in models:
                    raise ParseError(f"duplicate model {parts[1]!r}", lineno, path)
                block = {"name": parts[1], "states": None, "B": None, "ti": False,
                         "motion": {}, "offspring": {}, "line": lineno}
                continue
            if block is None:
                raise ParseError(f"{head!r} outside a model block", lineno, path)
            if head == "end":
                finish(lineno)
                block = None
            elif head == "states":
                block["states"] = [state_token(t) for t in parts[1:]]
            elif head == "B":
                block["B"] = [state_token(t) for t in parts[1:]]
            elif head == "translation_invariant":
                if len(parts) != 2 or parts[1] not in ("yes", "no", "true", "false"):
                    raise ParseError("expected 'translation_invariant yes|no'", lineno, path)
                block["ti"] = parts[1] in ("yes", "true")
            else:
                if len(parts) != 1:
                    raise ParseError(f"{head!r} takes no arguments", lineno, path)
                section = head
            continue
        if block is None or section is None:
            raise ParseError(f"unknown key {head!r}", lineno, path)
        if section == "motion":
            if len(parts) != 3:
                raise ParseError("motion line needs 'from to probability'", lineno, path)
            key = (state_token(parts[0]), state_token(parts[1]))
            if block["states"] is not None:
                for s in key:
                    if s not in block["states"]:
                        raise ParseError(f"unknown state {s!r}", lineno, path)
            block["motion"][key] = block["motion"].get(key, 0.0) + _number(
                parts[2], lineno, path, "probability")
        else:
            if not head.endswith(":"):
                raise ParseError("offspring line needs 'state: count prob ...'", lineno, path)
            state = head[:-1]
            state = state if state == "*" else state_token(state)
            rest = parts[1:]
            if not rest or len(rest) % 2:
                raise ParseError("offspring line needs count/probability pairs", lineno, path)
            law = {}
            for k, p in zip(rest[::2], rest[1::2]):
                try:
                    count = int(k)
                except ValueError:
                    raise ParseError(f"count {k!r} is not an integer", lineno, path) from None
                law[count] = law.get(count, 0.0) + _number(p, lineno, path, "probability")
            block["offspring"][state] = law
    if block is not None:
        raise ParseError(f"model {block['name']!r} is missing 'end'", len(lines), path)
    return models


def load_models(path):
    path = Path(path)
    return parse_models(path.read_text(), str(path))


def format_model(model):
    """Model block text that :func:`parse_models` reads back."""
    out = [f"model {model.name or 'M'}", "states " + " ".join(map(str, model.states))]
    if model.B:
        out.append("B " + " ".join(map(str, model.B)))
    if model.translation_invariant:
        out.append("translation_invariant yes")
    out.append("motion")
    for i, j in zip(*np.nonzero(model.motion)):
        out.append(f"  {model.states[i]} {model.states[j]} {float(model.motion[i, j])!r}")
    out.append("offspring")
    for s, law in zip(model.states, model.offspring):
        pairs = " ".join(f"{int(k)} {float(p)!r}" for k, p in zip(law.counts, law.probs))
        out.append(f"  {s}: {pairs}")
    out.append("end")
    return "\n".join(out) + "\n"


def resolve_model(spec):
    """``A``/``B``/``C`` for the reference models, ``FILE`` for the first
    model in a file, or ``FILE:NAME``."""
    if spec in ("A", "B", "C"):
        return reference_model(spec)
    path, _, name = spec.partition(":") if ":" in spec and not Path(spec).exists() else (spec, "", "")
    models = load_models(path)
    if not models:
        raise ParseError("file defines no model", None, path)
    if name:
        if name not in models:
            raise ParseError(f"no model {name!r} (have {sorted(models)})", None, path)
        return models[name]
    return next(iter(models.values()))


def format_measure(model, nu):
    return "".join(f"{s} {float(v)!r}\n" for s, v in zip(model.states, nu))


def parse_measure(model, text, path=None):
    """``state value`` lines; unlisted states get mass 0."""
    nu = np.zeros(model.n)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError("measure line needs 'state value'", lineno, path)
        s = state_token(parts[0])
        if s not in model.states:
            raise ParseError(f"unknown state {s!r}", lineno, path)
        nu[model.index(s)] += _number(parts[1], lineno, path, "value")
    return nu


def resolve_measure(model, spec):
    """``green-row X`` (or ``green-row:X``) or a measure file path."""
    tokens = spec.replace(":", " ").split()
    if tokens and tokens[0] == "green-row":
        if len(tokens) != 2:
            raise ParseError("expected 'green-row STATE'", None, None)
        return np.array(model.G[model.index(state_token(tokens[1]))])
    path = Path(spec)
    return parse_measure(model, path.read_text(), str(path))

"""Structured outcome of an exact or statistical check."""

from dataclasses import dataclass, field


@dataclass
class TestReport:
    """``passed`` is ``statistic <= threshold``.  Composite reports keep their
    sub-checks in ``parts`` and use the largest ``statistic / threshold``
    ratio as statistic against threshold 1."""

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    threshold: float
    n_samples: int | None = None
    seed: int | None = None
    notes: str = ""
    parts: list = field(default_factory=list)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.statistic <= self.threshold)

    @classmethod
    def combine(cls, name, parts, n_samples=None, seed=None, notes=""):
        ratios = [p.statistic / p.threshold if p.threshold > 0
                  else (0.0 if p.statistic <= 0 else float("inf")) for p in parts]
        return cls(name, max(ratios, default=0.0), 1.0, n_samples, seed, notes, list(parts))

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        extra = []
        if self.n_samples is not None:
            extra.append(f"n={self.n_samples}")
        if self.seed is not None:
            extra.append(f"seed={self.seed}")
        if self.notes:
            extra.append(self.notes)
        tail = f" ({', '.join(extra)})" if extra else ""
        return f"{verdict} {self.name}: {self.statistic:.6g} <= {self.threshold:.6g}{tail}"

    def lines(self, indent=""):
        out = [indent + self.line()]
        for p in self.parts:
            out.extend(p.lines(indent + "  "))
        return out

    def csv_rows(self):
        rows = [(self.name, self.statistic, self.threshold, self.passed,
                 self.n_samples, self.seed)]
        for p in self.parts:
            rows.extend(p.csv_rows())
        return rows

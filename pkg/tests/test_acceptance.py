"""The acceptance matrix at full sample sizes, one line per criterion.

Each test prints ``PASS``/``FAIL`` with the statistic and the pinned
threshold; the lines are repeated in the terminal summary.
"""

import pytest

from bqp.acceptance import CRITERIA

from .conftest import ACCEPTANCE_LINES

SEED = 2024


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_acceptance_criterion(k):
    rep = CRITERIA[k](seed=SEED, scale=1.0, workers=1)
    line = rep.line()
    print(line)
    for sub in rep.lines()[1:]:
        print(sub)
    ACCEPTANCE_LINES.append(line)
    assert rep.passed, "\n".join(rep.lines())

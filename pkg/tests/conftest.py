import itertools

import numpy as np
import pytest


def site_dp_densities(n, steps, p_fill, alternate=True, alignment="sweep"):
    """Exact row densities of classical site directed percolation.

    Enumerates the 2^n row configurations. A target is filled with
    probability ``p_fill`` when at least one parent is filled; parents of
    target j are (j-1, j) with an empty site beyond the left edge, or
    (j, j+1) on right-to-left sweeps when the pad follows the sweep.
    """
    configs = np.array(list(itertools.product([0, 1], repeat=n)))
    probs = np.zeros(len(configs))
    probs[-1] = 1.0
    out = [configs[-1].astype(float)]
    for t in range(steps):
        right = alternate and t % 2 == 1 and alignment == "sweep"
        padded = np.zeros((len(configs), n + 2), dtype=int)
        padded[:, 1:-1] = configs
        if right:
            active = padded[:, 1:-1] | padded[:, 2:]
        else:
            active = padded[:, :-2] | padded[:, 1:-1]
        pf = active * p_fill
        trans = np.prod(
            np.where(configs[None, :, :] == 1, pf[:, None, :], 1 - pf[:, None, :]), axis=2
        )
        probs = probs @ trans
        out.append(probs @ configs)
    return np.array(out)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])

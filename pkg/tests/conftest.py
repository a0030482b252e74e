import numpy as np
import pytest

from xcluster.core import Node, ThresholdTree
from xcluster.samplers import rng_stream


@pytest.fixture
def rng():
    return rng_stream(12345)


def line_tree(*cuts):
    """1-D tree: cut at cuts[0], then each further cut on the right branch."""
    leaves = [Node(center=i, cluster=i) for i in range(len(cuts) + 1)]
    node = leaves[-1]
    for i in range(len(cuts) - 1, -1, -1):
        node = Node(dim=0, theta=cuts[i], left=leaves[i], right=node)
    return ThresholdTree(node, 1)


def random_centers(rng, k, d):
    return rng.normal(size=(k, d))


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, passed: bool, detail: str) -> None:
    """Print and keep a one-line verdict for the acceptance summary."""
    line = f"CRITERION {criterion:>2}: {'PASS' if passed else 'FAIL'} | {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

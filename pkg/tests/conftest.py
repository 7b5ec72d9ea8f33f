import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mocap_gapeval.core import BoneDef, MarkerSequence, SkeletonConfig  # noqa: E402
from mocap_gapeval.io import default_skeleton  # noqa: E402
from mocap_gapeval.synth import template_skeleton  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def random_sequence(rng, T=6, M=4, fps=120.0, ids=None, scale=10.0):
    ids = ids or [f"m{k}" for k in range(M)]
    return MarkerSequence(rng.normal(0, scale, (T, M, 3)), fps, ids)


def tiny_skeleton(M=4):
    """Single actor, markers m0..m{M-1}; parts cover every marker; two bones."""
    ids = [f"m{k}" for k in range(M)]
    parts = {"hips": ids[:1], "torso": ids[1:2] or ids[:1], "head": ids[2:3] or ids[:1],
             "limbs": ids[3:] or ids[:1]}
    bones = [BoneDef("b0", ids[:1], ids[1:2])]
    if M >= 4:
        bones.append(BoneDef("b1", ids[2:3], ids[3:4]))
    return SkeletonConfig(ids, ("A1",), {m: "A1" for m in ids}, {"A1": ids[:1]}, parts, bones)


@pytest.fixture(scope="session")
def skel2():
    return default_skeleton()


@pytest.fixture(scope="session")
def skel1():
    return template_skeleton(("A1",))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_log.summary_lines():
        terminalreporter.write_line(line)

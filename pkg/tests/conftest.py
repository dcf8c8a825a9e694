import numpy as np
import pytest

from sessionknn import Interaction, build_index


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance criterion lines after the run, outside capture."""
    try:
        from test_acceptance import ANNOUNCEMENTS
    except ImportError:
        return
    if ANNOUNCEMENTS:
        terminalreporter.section("acceptance criteria")
        for line in ANNOUNCEMENTS:
            terminalreporter.write_line(line)

# The small click log used throughout: four sessions, six items, eleven
# interactions, with both inverted maps known by hand.
FIXTURE_ROWS = [
    ("i", "a1", 0),
    ("i", "a2", 1),
    ("i", "a3", 2),
    ("i", "a6", 3),
    ("j", "a3", 4),
    ("j", "a4", 5),
    ("k", "a2", 6),
    ("k", "a3", 7),
    ("k", "a4", 8),
    ("l", "a3", 9),
    ("l", "a5", 10),
]


def fixture_interactions():
    return [Interaction(*row) for row in FIXTURE_ROWS]


@pytest.fixture
def fixture_index():
    return build_index(fixture_interactions())


def random_interactions(
    rng: np.random.Generator,
    max_sessions: int = 20,
    max_items: int = 15,
    max_session_length: int = 6,
):
    """Small random click log; may contain repeated pairs and timestamp ties."""
    m = int(rng.integers(1, max_sessions + 1))
    n = int(rng.integers(1, max_items + 1))
    rows = []
    for s in range(m):
        length = int(rng.integers(1, max_session_length + 1))
        start = int(rng.integers(0, 50))
        for pos in range(length):
            item = int(rng.integers(0, n))
            rows.append(Interaction(f"s{s}", f"i{item}", start + pos))
    return rows

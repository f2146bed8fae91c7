import pytest

from joinlb.builder import Table, build_catalog, profile_from_degrees
from joinlb.model import BuildConfig

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def accept():
    """Record an acceptance criterion outcome, then assert it."""

    def check(criterion: str, ok: bool, detail: str = ""):
        _ACCEPTANCE.append((criterion, bool(ok), detail))
        assert ok, f"{criterion}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def toy_tables():
    # A: x1 twice, x2 and x3 once; B: x1 twice, x2 three times, x3 once
    a = Table.from_arrays("A", {"x": [1, 1, 2, 3]}, ["x"])
    b = Table.from_arrays("B", {"x": [1, 1, 2, 2, 2, 3]}, ["x"])
    return [a, b]


@pytest.fixture
def toy_catalog(toy_tables):
    return build_catalog(toy_tables, BuildConfig(partitions=4, mcv_count=5, histogram_buckets=4))


@pytest.fixture
def reverse_example_tables():
    """Degree sequences (1,1,1,2,2,3) and (1,1,2,3,3,4) on keys 1..6 and 3..8.

    With a single partition the joining-key bound is 6 + 6 - 8 = 4.
    """
    a_deg = {1: 3, 2: 2, 3: 1, 4: 1, 5: 1, 6: 2}
    b_deg = {3: 1, 4: 3, 5: 4, 6: 1, 7: 3, 8: 2}
    a = Table.from_arrays("A", {"x": [k for k, d in a_deg.items() for _ in range(d)]}, ["x"])
    b = Table.from_arrays("B", {"x": [k for k, d in b_deg.items() for _ in range(d)]}, ["x"])
    return [a, b]


@pytest.fixture
def stitch_profile():
    return profile_from_degrees([1, 1, 2, 2, 3, 3, 4, 4])

import pytest

from lvts.model import bundled_model, compute_stats, load_model


def toy_document(n=1, m=0, kind="reals", step=1.0, **blocks):
    """Constant-coefficient model document; blocks override entries."""
    doc = {
        "time_scale": {"kind": kind, "step": step} if kind == "lattice" else {"kind": kind},
        "n": n, "m": m,
        "b": ["1"] * n, "r": ["0.1"] * m,
        "a": [["1" if i == l else "0" for l in range(n)] for i in range(n)],
        "c": [["0"] * m for _ in range(n)],
        "d": [["0"] * n for _ in range(m)],
        "e": [["1" if j == h else "0" for h in range(m)] for j in range(m)],
    }
    doc.update(blocks)
    return doc


@pytest.fixture
def toy():
    def make(**kw):
        return load_model(toy_document(**kw))
    return make


@pytest.fixture(scope="session")
def example1():
    return bundled_model("example1")


@pytest.fixture(scope="session")
def example2():
    return bundled_model("example2")


@pytest.fixture(scope="session")
def example1_h2():
    return bundled_model("example1_h2")


@pytest.fixture(scope="session")
def stats1(example1):
    return compute_stats(example1, use_override=True)


@pytest.fixture(scope="session")
def stats2(example2):
    return compute_stats(example2, use_override=True)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from premir import network
from premir.folding import nussinov_fold


def random_sequence(gen, length):
    return "".join(gen.choice(list("ACGU"), length))


def prepared(seq, label, sid="s"):
    return network.PreparedSample.build(sid, seq, nussinov_fold(seq), label)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture
def three_samples():
    """Samples of lengths 1, 20 and 90, as used by the gradient checks."""
    g = np.random.default_rng(7)
    return [
        prepared(random_sequence(g, 1), 0, "a"),
        prepared(random_sequence(g, 20), 1, "b"),
        prepared(random_sequence(g, 90), 0, "c"),
    ]


@pytest.fixture
def write_file(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p
    return _write


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line; echoed live and again in the terminal summary."""
    def _record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
        _VERDICTS.append(line)
        print("\n" + line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)

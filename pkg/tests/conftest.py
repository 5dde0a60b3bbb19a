import io

import numpy as np
import pytest

from see_embedding import build_unit_vocab, parse_lexicon

# Two words from HowNet's English annotations.
SAMPLE_LEXICON = (
    "chair\t-\tComeTogether|manage|fact;furniture|sit\n"
    "power\t-\tphysical|PhysicsPower;AnimalHuman|Power|politics;math|symbol|Quantity;"
    "country|place|politics;machine|function|Strength\n"
)


@pytest.fixture
def sample_text():
    return SAMPLE_LEXICON


@pytest.fixture
def sample_lex():
    return parse_lexicon(io.StringIO(SAMPLE_LEXICON))


@pytest.fixture
def sample_vocab(sample_lex):
    return build_unit_vocab(sample_lex)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting: one pass/fail line per criterion --------------

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): acceptance criterion with a report label")


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        label = dict(report.user_properties).get("acceptance")
        if label:
            _ACCEPTANCE.append((label, report.outcome, report.duration))


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("acceptance")
    if mark:
        item.user_properties.append(("acceptance", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, duration in _ACCEPTANCE:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {label} ({duration:.2f}s)")

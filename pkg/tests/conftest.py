import json
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SCENES = ROOT / "scenes"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow; pass --runslow to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def small_scene_dict(**over):
    """A 4 x 3 m free-field scene with one listener, cheap enough for CLI tests."""
    d = {
        "domain": [4.0, 3.0],
        "source": [1.5, 1.5],
        "f_max": 500.0,
        "sweep": {"f0": 50.0, "f1": 500.0, "duration": 0.05, "fade": 0.005},
        "sim_duration": 0.08,
        "obstacles": [],
        "listeners": [{"id": "A", "position": [2.6, 1.5], "orientation": 0.0}],
        "solver": {"n_pml": 8},
    }
    d.update(over)
    return d


@pytest.fixture
def small_scene_file(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(small_scene_dict()))
    return path


# acceptance reporting: tests tagged @pytest.mark.acceptance("N") get one
# PASS/FAIL line each in the terminal summary, with any detail they recorded
_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): acceptance criterion check")
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def detail(request):
    """Append free-text measurements to this test's acceptance line."""
    notes = []
    request.node.user_properties.append(("detail", notes))
    return notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        notes = next((v for k, v in item.user_properties if k == "detail"), [])
        status = "SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL")
        item.config.stash[_ACCEPTANCE].append(
            (mark.args[0], item.name, status, "; ".join(notes)))


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(_ACCEPTANCE, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for label, name, status, notes in rows:
        line = f"{status} criterion {label}: {name}"
        terminalreporter.write_line(line + (f"  [{notes}]" if notes else ""))

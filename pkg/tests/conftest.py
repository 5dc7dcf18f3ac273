import numpy as np
import pytest

from cul import experiments as ex
from cul.cli import resolve_config
from cul.objective import make_quadratic_pair
from cul.unlearn.data import CropSpec, build_dataset, crop_batch, stack
from cul.unlearn.model import pretrain
from cul.unlearn.task import make_task


def toy_config(**overrides):
    return resolve_config({}, {"problem": "unlearn-toy", **overrides})


def quad_config(**overrides):
    return resolve_config({}, {"problem": "quad", **overrides})


@pytest.fixture
def quad():
    return make_quadratic_pair([0.0, 0.0], [1.0, 0.0])


@pytest.fixture(scope="session")
def toy_setup():
    """Default 8-class toy task with its pretrained original model."""
    return ex.toy_setup(toy_config())


@pytest.fixture(scope="session")
def small_task():
    """Tiny task (2 classes, 4 images each, 16-8-16 model) for fast checks."""
    forget, retain = build_dataset(2, 4, seed=3, size=4)
    spec = CropSpec("Center", 0.25)
    x = np.concatenate([stack(forget), stack(retain)])
    original = pretrain(x, lambda b: crop_batch(b, spec, 4), sizes=(16, 8, 16), epochs=50, seed=3)
    return make_task(original, forget, retain, spec, batch=2)


# -- acceptance summary: one line per criterion ---------------------------------

_CRITERIA: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, secs = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title} ({secs:.2f} s)")

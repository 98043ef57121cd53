import pytest

from surgerr.synthgen import MeanShift, SynthSpec, generate


def small_spec(**overrides):
    base = dict(trials=12, seed=11, min_gestures=8, max_gestures=12, max_frames=400,
                error_rates={"multiple_attempts": 0.5, "needle_drop": 0.05, "needle_orientation": 0.3, "out_of_view": 0.1})
    base.update(overrides)
    return SynthSpec(**base)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Twelve clean trials, enough for a full but quick pipeline run."""
    return generate(small_spec(), tmp_path_factory.mktemp("small"))


@pytest.fixture(scope="session")
def shifted_dataset(tmp_path_factory):
    """Desk-scale dataset with a known shifted group and corrupted transitions."""
    spec = SynthSpec(trials=40, seed=3, corruption_rate=0.1, shifts=[MeanShift("G3", "R Lin Vel", 1.0)])
    return generate(spec, tmp_path_factory.mktemp("shifted"))


# -- acceptance summary -----------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        if rep.skipped and isinstance(rep.longrepr, tuple):
            detail = rep.longrepr[2].removeprefix("Skipped: ")
        _ACCEPTANCE[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        line = f"criterion {number}: {status}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))

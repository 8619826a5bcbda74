import os
import sys
from functools import lru_cache

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@lru_cache(maxsize=None)
def pipeline(experiment, decoder=None, d=3, p=0.01, **kw):
    from tcnot.analysis import Pipeline
    from tcnot.config import RunConfig

    return Pipeline.build(RunConfig(experiment, decoder, d=d, p=p, **kw))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

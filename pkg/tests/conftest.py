import pytest

from sleeping_experts.core import Environment, RoundTrace, make_environment


class ScriptedRng:
    """Returns a fixed sequence of uniforms, then fails loudly."""

    def __init__(self, values):
        self.values = list(values)
        self.used = 0

    def random(self):
        if self.used >= len(self.values):
            raise AssertionError("scripted uniforms exhausted")
        u = self.values[self.used]
        self.used += 1
        return u


def env_from(rounds, N, zero_count_class="unconstrained", K=None):
    """Environment from ``[(available, losses), ...]``."""
    traces = [RoundTrace(t + 1, a, l) for t, (a, l) in enumerate(rounds)]
    return make_environment(traces, N, K, zero_count_class)


@pytest.fixture
def two_round_env() -> Environment:
    return env_from([((0, 1), (1, 0)), ((1, 2), (1, 0))], 3)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)

"""Surface acceptance verdict lines on the live terminal.

Both test suites print one ``[ACCEPTANCE] <criterion>: PASS/FAIL`` line per
acceptance criterion.  Default capture would swallow those on passing runs,
so a small plugin re-emits them through the terminal reporter after each
test's own status line.
"""

import pytest


class _VerdictEcho:
    def __init__(self, config):
        self._config = config

    @pytest.hookimpl(trylast=True)
    def pytest_runtest_logreport(self, report):
        if report.when != "call" or not report.capstdout:
            return
        lines = [line for line in report.capstdout.splitlines()
                 if line.startswith("[ACCEPTANCE]")]
        if not lines:
            return
        reporter = self._config.pluginmanager.get_plugin("terminalreporter")
        for line in lines:
            if reporter is None:
                print(line)
            else:
                reporter.ensure_newline()
                reporter.write_line(line)


def pytest_configure(config):
    config.pluginmanager.register(_VerdictEcho(config))

import pytest

from mmsounder.codebook import build_codebook


@pytest.fixture(scope="session")
def codebook():
    return build_codebook()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])

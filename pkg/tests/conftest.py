import contextlib
import os
import time

import numpy as np
import pytest

from colearn.cli import main


@contextlib.contextmanager
def working_dir(path):
    old = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(old)


def run_cli(cwd, *argv):
    """Run the CLI inside ``cwd`` with an empty environment."""
    with working_dir(cwd):
        return main(list(argv), environ={})


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """``synth`` then ``all`` on the default scenario, with relative directories."""
    root = tmp_path_factory.mktemp("default_run")
    start = time.perf_counter()
    assert run_cli(root, "synth", "--out-dir", "data") == 0
    assert run_cli(root, "all", "--input-dir", "data", "--out-dir", "out") == 0
    (root / "elapsed_seconds").write_text(f"{time.perf_counter() - start:.3f}")
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def two_by_two(tmp_path):
    """Input directory with one firm in each of two provinces and industries."""
    d = tmp_path / "in"
    write(d / "provinces.csv", "id,name,abbreviation\n1,Alpha,AA\n2,Beta,BB\n")
    write(d / "firms.csv",
          "firm_id,province,sector,subsector,list_year,delist_year,year,revenue,employees\n"
          "f1,AA,C,27,2000,,2000,100,10\n"
          "f2,BB,D,30,2000,,2000,300,10\n")
    return d


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda r: int(r.split()[1])):
            terminalreporter.write_line(line)

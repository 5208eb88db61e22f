import itertools
import math

import numpy as np
import pytest


def brute_ising_energies(side):
    """Independent enumeration: site 0 least significant, spin index 1 means +1."""
    n = side * side
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        x = bits[::-1]  # itertools varies the last position fastest
        e = 0
        for r in range(side):
            for c in range(side):
                i = r * side + c
                if c + 1 < side and x[i] == x[i + 1]:
                    e -= 1
                if r + 1 < side and x[i] == x[i + side]:
                    e -= 1
        out.append(e)
    return np.array(out, dtype=float)


def brute_log_z(energies, beta):
    return math.log(math.fsum(math.exp(-beta * e) for e in energies))


def binom_sigma(n, p):
    return math.sqrt(n * p * (1 - p))


@pytest.fixture(scope="session")
def ising2_energies():
    return brute_ising_energies(2)


@pytest.fixture(scope="session")
def ising3_energies():
    return brute_ising_energies(3)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.verdict_lines():
        terminalreporter.write_line(line)

import itertools

import pytest

from coherent_ising import IsingInstance

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def brute_energies(instance):
    """Independent oracle: dict bits -> energy via itertools.product over spins."""
    n = instance.n
    J = {(i, j): v for i, j, v in instance.couplings}
    out = {}
    for spins in itertools.product((1, -1), repeat=n):
        bits = sum(1 << i for i, s in enumerate(spins) if s == -1)
        e = 0
        for i in range(n):
            e += instance.fields[i] * spins[i]
            for j in range(i + 1, n):
                e += J.get((i, j), 0) * spins[i] * spins[j]
        out[bits] = e
    return out


@pytest.fixture
def triangle():
    return IsingInstance(3, ((0, 1, 1), (0, 2, 1), (1, 2, 1)), (0, 0, 0))


@pytest.fixture
def af_pair():
    return IsingInstance(2, ((0, 1, 1),), (0, 0))


@pytest.fixture
def fm_pair():
    return IsingInstance(2, ((0, 1, -1),), (0, 0))


@pytest.fixture
def single_spin():
    return IsingInstance(1, (), (1,))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_RESULTS, key=lambda c: int(c[1:])):
        passed, detail = ACCEPTANCE_RESULTS[cid]
        terminalreporter.write_line(f"{cid:>4} {'PASS' if passed else 'FAIL'}  {detail}")

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_matrix(rng, n, scale=1.0):
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


def taylor_expm(M, tol=1e-14):
    """Truncated Taylor series, scaled and squared so the series converges fast."""
    nrm = np.linalg.norm(M, 1)
    s = max(0, int(np.ceil(np.log2(max(nrm, 1e-300)))) + 1)
    X = M / 2**s
    out = np.eye(len(M), dtype=complex)
    term = np.eye(len(M), dtype=complex)
    for k in range(1, 200):
        term = term @ X / k
        out = out + term
        if np.linalg.norm(term, 1) < tol * 1e-3:
            break
    for _ in range(s):
        out = out @ out
    return out


def power_iteration_norm(M, tol=1e-12, seed=7, max_iter=100000):
    """Largest singular value by power iteration on M^dag M."""
    G = M.conj().T @ M
    v = np.random.default_rng(seed).standard_normal(len(M)).astype(complex)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = G @ v
        new = np.linalg.norm(w)
        if new == 0:
            return 0.0
        v = w / new
        if abs(new - lam) <= tol * new:
            break
        lam = new
    return float(np.sqrt(new))


# --- acceptance verdict lines -------------------------------------------------

_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record, print and assert one acceptance criterion."""
    lines = request.config.stash[_VERDICTS]

    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)

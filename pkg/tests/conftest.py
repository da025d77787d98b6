import functools
import itertools

import numpy as np
import pytest

from corpus_forge import kernels
from corpus_forge.audio import AudioBuffer
from corpus_forge.segmenter import _us

SR = 16000


def _available():
    names = ["numpy"]
    try:
        kernels.implementation("numba")
        names.append("numba")
    except ImportError:
        pass
    return names


BACKENDS = _available()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.implementation(request.param)


def brute_distance(a, b):
    """Plain recursive Levenshtein, memoized on suffix positions."""

    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(d(i + 1, j) + 1, d(i, j + 1) + 1, d(i + 1, j + 1) + (a[i] != b[j]))

    return d(0, 0)


def noise_at(rng, n, level_db):
    x = rng.standard_normal(n)
    return x * 10 ** (level_db / 20) / np.sqrt(np.mean(x * x))


def compose(parts, sr=SR, floor_db=-70.0, seed=0):
    """Concatenate (seconds, level_db or None) pieces; None is near-silence."""
    rng = np.random.default_rng(seed)
    out = []
    for dur, level in parts:
        n = int(round(dur * sr))
        out.append(noise_at(rng, n, floor_db if level is None else level))
    return AudioBuffer.from_float(np.concatenate(out), sr)



def oracle_plan(start, end, sites, cfg):
    """Exhaustive search over every subset of split sites."""
    best = None
    keys = sorted(sites)
    for r in range(len(keys) + 1):
        for subset in itertools.combinations(keys, r):
            times = [start] + [sites[k][0] for k in subset] + [end]
            lengths = [_us(b) - _us(a) for a, b in zip(times, times[1:])]
            if any(L <= 0 or L > _us(cfg.max_s) for L in lengths):
                continue
            score = (r, -sum(sites[k][1] for k in subset), sum(abs(L - _us(cfg.target_s)) for L in lengths), subset)
            if best is None or score < best:
                best = score
    return None if best is None else best[3]

# ------------------------------------------------------------ acceptance lines

_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when == "teardown":
        return
    number, title = mark.args
    if rep.when == "call" or rep.failed or rep.skipped:
        if hasattr(rep, "wasxfail"):
            verdict = "PASS" if rep.passed else "FAIL"
            title = f"{title} [known failure: {rep.wasxfail}]"
        else:
            verdict = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _ACCEPTANCE[number] = (verdict, title, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        verdict, title, secs = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{verdict} {number}. {title} ({secs:.2f} s)")

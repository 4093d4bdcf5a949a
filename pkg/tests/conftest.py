import math

import mpmath
import pytest

_ACCEPTANCE = []


def record_criterion(number, name, passed, detail):
    """Store one acceptance line; printed in the terminal summary."""
    _ACCEPTANCE.append((number, name, passed, detail))
    print(f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}: {name} | {detail}")


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}: {name} | {detail}")


def mp_prabhakar(beta, gamma, delta, w, digits=30):
    """Reference E^delta_{beta,gamma}(w) by direct summation in mpmath.

    Working precision is sized from the largest term so the alternating
    series keeps ``digits`` correct digits after cancellation.
    """
    b, g, d, w = (mpmath.mpf(v) for v in (beta, gamma, delta, w))
    if w == 0:
        return mpmath.rgamma(g)
    with mpmath.workdps(30):
        def log_term(r):
            t = mpmath.rf(d, r) / mpmath.factorial(r) * abs(w) ** r * mpmath.rgamma(b * r + g)
            return float(mpmath.log(abs(t) + mpmath.mpf(10) ** -3000))
        peak, r = -math.inf, 0
        while True:
            v = log_term(r)
            peak = max(peak, v)
            if r > 5 and v < peak - 80 and v < -1500:
                break
            r += 1 if r < 200 else max(1, r // 50)
        n_terms = r
    # the result itself may be far below the largest term, so precision is
    # doubled until two sums agree to ``digits`` digits
    dps, prev = int(digits + max(peak, 0.0) / 2.3026 + 10), None
    while True:
        with mpmath.workdps(dps):
            s, c = mpmath.mpf(0), mpmath.mpf(1)
            for r in range(n_terms + 1):
                s += c * mpmath.rgamma(b * r + g)
                c = c * (d + r) / (r + 1) * w
            if prev is not None and abs(s - prev) <= mpmath.mpf(10) ** -digits * abs(s):
                return +s
        if dps > 20000:
            raise RuntimeError("reference did not stabilise")
        prev, dps = s, 2 * dps

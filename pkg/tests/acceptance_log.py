"""Collects one line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(number: int, title: str, passed: bool, detail: str, seconds: float, limit: float):
    within = seconds < limit
    ok = passed and within
    LINES.append(f"{'PASS' if ok else 'FAIL'} [{number}] {title}: {detail} "
                 f"({seconds:.1f} s, limit {limit:g} s)")
    return ok

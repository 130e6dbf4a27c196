"""Collects one verdict per acceptance criterion for the terminal summary."""
from __future__ import annotations

RESULTS: dict[str, list[tuple[bool, str]]] = {}


def record(criterion: str, passed: bool, detail: str) -> bool:
    RESULTS.setdefault(criterion, []).append((bool(passed), detail))
    return bool(passed)


def lines() -> list[str]:
    out = []
    for criterion in sorted(RESULTS, key=lambda c: int(c.split()[0])):
        checks = RESULTS[criterion]
        verdict = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        out.append(f"{verdict}  {criterion}: " + "; ".join(d for _, d in checks))
    return out

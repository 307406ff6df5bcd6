"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def report(number: int, title: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    LINES.append(f"[{number:02d}] {status}  {title}" + (f"  ({detail})" if detail else ""))

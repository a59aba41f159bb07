from __future__ import annotations

import pytest

_ACCEPTANCE: list[str] = []


def record_criterion(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} - {detail}"
    print(line)
    _ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


def naive_layout(n: int, k: int, edges) -> tuple[str, str]:
    """k^2-tree bitmaps by direct recursive subdivision of the matrix.

    Independent of the library's z-order builder: walks the padded matrix
    level by level, emitting one bit per child submatrix.
    """
    edges = set(edges)
    h, side = 1, k
    while side < max(n, 2):
        side *= k
        h += 1
    if not edges:
        return "0" * (k * k), ""
    levels = [[] for _ in range(h)]
    frontier = [(0, 0, side)]
    for level in range(h):
        sub = frontier[0][2] // k if frontier else 1
        nxt = []
        for r0, c0, _ in frontier:
            for i in range(k):
                for j in range(k):
                    rr, cc = r0 + i * sub, c0 + j * sub
                    hit = any(rr <= u < rr + sub and cc <= v < cc + sub for u, v in edges)
                    levels[level].append("1" if hit else "0")
                    if hit:
                        nxt.append((rr, cc, sub))
        frontier = nxt
    return "".join("".join(x) for x in levels[:-1]), "".join(levels[-1])


@pytest.fixture
def naive_k2_layout():
    return naive_layout

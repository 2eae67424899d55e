"""Regenerate the shipped demo world from an explicit list of wall runs.

Run from the repository root:

    python3 demos/build_fig8_world.py

The world is 12 m x 8 m at 0.25 m cells: a walled room in the north-west
with two doorways, a long free-standing wall across the middle, a spur
hanging from the north wall, and two more walls in the south.  The start
marker sits in the south-west corner.
"""

from pathlib import Path

COLS, ROWS = 48, 32
CELL = 0.25
START = (3, 28)  # (col, row), rows counted from the north

# (kind, fixed index, first, last): H runs fix a row, V runs fix a column
RUNS = [
    ("H", 10, 0, 6),
    ("H", 10, 10, 16),
    ("V", 16, 0, 3),
    ("V", 16, 7, 10),
    ("H", 20, 20, 40),
    ("V", 32, 0, 12),
    ("V", 8, 22, 30),
    ("H", 26, 24, 44),
    ("V", 40, 8, 14),
]


def build() -> str:
    rows = [["."] * COLS for _ in range(ROWS)]
    for kind, fixed, a, b in RUNS:
        for k in range(a, b + 1):
            if kind == "H":
                rows[fixed][k] = "#"
            else:
                rows[k][fixed] = "#"
    c, r = START
    rows[r][c] = "I"
    return f"cell {CELL}\n" + "\n".join("".join(row) for row in rows) + "\n"


if __name__ == "__main__":
    out = Path(__file__).resolve().parent.parent / "src" / "posnec" / "worlds" / "fig8.txt"
    out.write_text(build())
    print(f"wrote {out}")

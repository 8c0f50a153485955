"""Named data sets used by the CLI presets and the test suite."""

from __future__ import annotations

import math

# name -> (s, t, U, reduced)
FIXTURES: dict[str, tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...], bool]] = {
    "coin-small": ((4,), (1,), (2, 2, 2, 2, 2), True),
    "coin": ((4,), (1,), (51, 18, 73, 25, 75), True),
    "swiss": ((1, 1), (3, 3), (4, 2, 2, 2, 2, 4, 2, 2, 2, 2, 4, 2, 2, 2, 2, 4), False),
    "schizophrenic": ((1, 1), (2, 2), (43, 16, 3, 6, 11, 10, 9, 18, 16), False),
}

# fixtures whose runtime is measured in hours
EXTENDED = frozenset({"swiss", "schizophrenic"})


def coin_data(N: int) -> tuple[int, ...]:
    """U_i = N·C(4,i)/16 for the four-coin model; N must be a multiple of 16."""
    if N % 16:
        raise ValueError("N must be a multiple of 16")
    return tuple(N * math.comb(4, i) // 16 for i in range(5))

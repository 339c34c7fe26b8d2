"""Segmented, numeric-aware version comparison.

Versions are split on ``.`` and ``-``. Each segment is compared as a
sequence of digit runs (compared as integers) and letter runs (compared as
strings), so ``1.0.2 < 1.0.2c < 1.0.10``. A digit run sorts before a letter
run at the same position. Missing trailing segments count as ``0``, so
``1.0`` equals ``1.0.0``.

"""
import re
from typing import Tuple, Union

SEPARATORS = re.compile(r'[.\-]')
RUNS = re.compile(r'[0-9]+|[^0-9]+')
ZERO = ((0, 0),)

Run = Tuple[int, Union[int, str]]
Segment = Tuple[Run, ...]


def _segment_key(segment: str) -> Segment:
    return tuple((0, int(run)) if run.isascii() and run.isdigit() else (1, run) for run in RUNS.findall(segment))


def version_key(version: str) -> Tuple[Segment, ...]:
    """A sort key consistent with :func:`compare_versions`."""
    segments = [_segment_key(s) for s in SEPARATORS.split(version.strip())]
    while segments and segments[-1] == ZERO:
        segments.pop()
    return tuple(segments)


def compare_versions(a: str, b: str) -> int:
    """Returns -1, 0 or 1 as ``a`` is older than, equal to or newer than ``b``."""
    key_a, key_b = version_key(a), version_key(b)
    return (key_a > key_b) - (key_a < key_b)

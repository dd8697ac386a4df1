"""Registry of seeded design mutations.

Each entry toggles one deliberate defect in the DUT. With every entry
disabled the design is the reference build.
"""

from __future__ import annotations

import contextlib
from typing import Iterator

BUGS: dict[str, str] = {
    "exec-dontcare-src2": "AND unit reads an unconstrained signal instead of its second source",
    "porq-ignores-opmask": "microsequencer drops the opmask index when expanding PORQ",
    "decode-missing-evex-exception": "decoder accepts zero-masking with opmask k0",
}

_enabled: set[str] = set()


class UnknownBug(KeyError):
    pass


def inject_bug(name: str, enabled: bool = True) -> None:
    if name not in BUGS:
        raise UnknownBug(f"no registered bug {name!r}; known: {', '.join(sorted(BUGS))}")
    if enabled:
        _enabled.add(name)
    else:
        _enabled.discard(name)


def bug_enabled(name: str) -> bool:
    return name in _enabled


def enabled_bugs() -> frozenset[str]:
    return frozenset(_enabled)


def reset_bugs() -> None:
    _enabled.clear()


@contextlib.contextmanager
def bugs_injected(*names: str) -> Iterator[None]:
    before = set(_enabled)
    try:
        for n in names:
            inject_bug(n, True)
        yield
    finally:
        _enabled.clear()
        _enabled.update(before)

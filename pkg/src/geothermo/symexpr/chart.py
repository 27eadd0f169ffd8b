from __future__ import annotations

import re
from dataclasses import dataclass

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names, e.g. ``Chart(("U", "V"))``."""

    coordinates: tuple[str, ...]

    def __post_init__(self):
        coords = tuple(self.coordinates)
        object.__setattr__(self, "coordinates", coords)
        if not coords:
            raise ValueError("a chart needs at least one coordinate")
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names in {coords}")
        for name in coords:
            if not isinstance(name, str) or not _IDENT.match(name):
                raise ValueError(f"invalid coordinate name {name!r}")

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    def index(self, name: str) -> int:
        return self.coordinates.index(name)

    def __iter__(self):
        return iter(self.coordinates)

    def __len__(self):
        return len(self.coordinates)

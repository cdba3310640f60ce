"""Plain-text channel dumps.

Layout::

    # any comment
    kind = sdma                 (or ofdma)
    [g] 4 4                     section name, then the array shape
    1.25e-01,-3.0e-02           one "re,im" line per entry, row-major order
    ...

SDMA dumps carry sections ``g``, ``h``, ``g_cross``, ``c_si``; OFDMA dumps
carry ``g_dl``, ``h_fwd``, ``g_cross``, ``f_bwd``, ``h_si``.  Values are
written with 17 significant digits, so a dump round-trips exactly.
"""

from __future__ import annotations

from typing import Dict, Union

import numpy as np

from .errors import DataError
from .geometry import SdmaChannelSet
from .ofdma import OfdmaChannelSet

SDMA_FIELDS = ("g", "h", "g_cross", "c_si")
OFDMA_FIELDS = ("g_dl", "h_fwd", "g_cross", "f_bwd", "h_si")

ChannelSet = Union[SdmaChannelSet, OfdmaChannelSet]


def dumps(ch: ChannelSet) -> str:
    if isinstance(ch, SdmaChannelSet):
        kind, names = "sdma", SDMA_FIELDS
    elif isinstance(ch, OfdmaChannelSet):
        kind, names = "ofdma", OFDMA_FIELDS
    else:
        raise TypeError(f"cannot dump {type(ch).__name__}")
    lines = [f"kind = {kind}"]
    for name in names:
        arr = np.asarray(getattr(ch, name), dtype=complex)
        lines.append(f"[{name}] " + " ".join(str(d) for d in arr.shape))
        lines.extend(f"{z.real:.17g},{z.imag:.17g}" for z in arr.ravel())
    return "\n".join(lines) + "\n"


def loads(text: str, source: str = "<string>") -> ChannelSet:
    kind = None
    arrays: Dict[str, np.ndarray] = {}
    name, shape, values = None, (), []

    def close(lineno):
        if name is None:
            return
        need = int(np.prod(shape)) if shape else 1
        if len(values) != need:
            raise DataError(f"{source}:{lineno}: section [{name}] has {len(values)} "
                            f"entries, shape {shape} needs {need}")
        arrays[name] = np.array(values, dtype=complex).reshape(shape)

    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("kind"):
            key, _, val = line.partition("=")
            if key.strip() != "kind" or val.strip() not in ("sdma", "ofdma"):
                raise DataError(f"{source}:{lineno}: expected 'kind = sdma' or 'kind = ofdma'")
            kind = val.strip()
        elif line.startswith("["):
            close(lineno)
            head, _, dims = line[1:].partition("]")
            name = head.strip()
            if name in arrays:
                raise DataError(f"{source}:{lineno}: duplicate section [{name}]")
            try:
                shape = tuple(int(d) for d in dims.split())
            except ValueError:
                raise DataError(f"{source}:{lineno}: bad shape {dims.strip()!r}") from None
            values = []
        else:
            if name is None:
                raise DataError(f"{source}:{lineno}: value outside any section")
            try:
                re, im = (float(p) for p in line.split(","))
            except ValueError:
                raise DataError(f"{source}:{lineno}: expected 're,im', got {line!r}") from None
            values.append(complex(re, im))
    close(lineno)

    if kind is None:
        raise DataError(f"{source}: missing 'kind = ...' line")
    names = SDMA_FIELDS if kind == "sdma" else OFDMA_FIELDS
    missing = [n for n in names if n not in arrays]
    extra = [n for n in arrays if n not in names]
    if missing or extra:
        raise DataError(f"{source}: sections missing {missing}, unexpected {extra}")
    if not all(np.all(np.isfinite(a)) for a in arrays.values()):
        raise DataError(f"{source}: non-finite channel entry")
    if kind == "sdma":
        return SdmaChannelSet(*(arrays[n] for n in SDMA_FIELDS))
    return OfdmaChannelSet(*(arrays[n] for n in OFDMA_FIELDS))


def save(ch: ChannelSet, path) -> None:
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(dumps(ch))


def load(path) -> ChannelSet:
    with open(path, encoding="ascii") as fh:
        return loads(fh.read(), str(path))

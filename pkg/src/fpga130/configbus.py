"""Transaction-level model of the asynchronous byte-wide configuration bus.

The host selects a byte with row/column decoders plus a word index and
either writes CDATA[0:7] into it or reads it back.  Stuck-at faults model
non-functional SRAM cells: a faulted bit always reads as its stuck value.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field

import numpy as np

from .arch import BITS_PER_WORD, GRID, PAYLOAD_BYTES, WORDS_PER_BLOCK, ConfigAddress
from .bitstream import ConfigImage
from .errors import BusError, ParseError


@dataclass(frozen=True)
class BusTransaction:
    op: str  # "W" or "R"
    row: int
    col: int
    word: int
    data: int | None = None

    def __post_init__(self):
        if self.op not in ("W", "R"):
            raise BusError(f"unknown bus operation {self.op!r}")
        if not (0 <= self.row < GRID and 0 <= self.col < GRID and 0 <= self.word < WORDS_PER_BLOCK):
            raise BusError(f"address ({self.row},{self.col},{self.word}) out of range")
        if self.op == "W":
            if self.data is None or not 0 <= self.data <= 0xFF:
                raise BusError(f"write needs an 8-bit data value, got {self.data!r}")
        elif self.data is not None:
            raise BusError("read transactions carry no data")

    @property
    def byte_index(self) -> int:
        return (self.row * GRID + self.col) * WORDS_PER_BLOCK + self.word

    def __str__(self):
        if self.op == "W":
            return f"W {self.row} {self.col} {self.word} 0x{self.data:02X}"
        return f"R {self.row} {self.col} {self.word}"


def write(row, col, word, data) -> BusTransaction:
    return BusTransaction("W", row, col, word, data)


def read(row, col, word) -> BusTransaction:
    return BusTransaction("R", row, col, word)


@dataclass
class DeviceState:
    """SRAM array behind the bus. ``faults`` maps flat bit address -> stuck value."""

    sram: bytearray = field(default_factory=lambda: bytearray(PAYLOAD_BYTES))
    faults: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self._refresh_masks()

    def _refresh_masks(self):
        clear = np.full(PAYLOAD_BYTES, 0xFF, dtype=np.uint8)
        force = np.zeros(PAYLOAD_BYTES, dtype=np.uint8)
        for flat, value in self.faults.items():
            byte, bit = divmod(flat, BITS_PER_WORD)
            clear[byte] &= ~np.uint8(1 << bit)
            if value:
                force[byte] |= np.uint8(1 << bit)
        self._clear, self._force = clear, force

    def inject(self, addr: ConfigAddress, value: int) -> None:
        addr.check()
        self.faults[addr.flat] = 1 if value else 0
        self._refresh_masks()

    def with_fault(self, addr: ConfigAddress, value: int) -> "DeviceState":
        """Copy of this device with one more stuck bit (cheap; for sweeps)."""
        dev = DeviceState.__new__(DeviceState)
        dev.sram = self.sram
        dev.faults = {**self.faults, addr.flat: 1 if value else 0}
        byte = addr.byte_index
        dev._clear = self._clear.copy()
        dev._force = self._force.copy()
        dev._clear[byte] &= ~np.uint8(1 << addr.bit)
        if value:
            dev._force[byte] |= np.uint8(1 << addr.bit)
        else:
            dev._force[byte] &= ~np.uint8(1 << addr.bit)
        return dev

    def observed(self, index: int) -> int:
        return (self.sram[index] & int(self._clear[index])) | int(self._force[index])

    def dump(self) -> bytes:
        """Every byte as a full readback would return it."""
        raw = np.frombuffer(bytes(self.sram), dtype=np.uint8)
        return ((raw & self._clear) | self._force).tobytes()


def apply(device: DeviceState, txn: BusTransaction):
    """Execute one transaction; returns the byte read, or None for writes."""
    if txn.op == "W":
        device.sram[txn.byte_index] = txn.data
        return None
    return device.observed(txn.byte_index)


def image_to_transactions(image: ConfigImage) -> list[BusTransaction]:
    txns = []
    i = 0
    for row in range(GRID):
        for col in range(GRID):
            for word in range(WORDS_PER_BLOCK):
                txns.append(BusTransaction("W", row, col, word, image.data[i]))
                i += 1
    return txns


def load(device: DeviceState, image: ConfigImage) -> DeviceState:
    for txn in image_to_transactions(image):
        apply(device, txn)
    return device


def readback_transactions() -> list[BusTransaction]:
    return [read(r, c, w) for r in range(GRID) for c in range(GRID) for w in range(WORDS_PER_BLOCK)]


@dataclass(frozen=True)
class Mismatch:
    address: ConfigAddress
    expected: int
    observed: int


def readback_verify(device: DeviceState, image: ConfigImage) -> list[Mismatch]:
    observed = np.frombuffer(device.dump(), dtype=np.uint8)
    expected = np.frombuffer(image.data, dtype=np.uint8)
    diff = observed ^ expected
    out = []
    for byte in np.flatnonzero(diff):
        d = int(diff[byte])
        for bit in range(BITS_PER_WORD):
            if (d >> bit) & 1:
                addr = ConfigAddress.from_flat(int(byte) * BITS_PER_WORD + bit)
                out.append(Mismatch(addr, (int(expected[byte]) >> bit) & 1,
                                    (int(observed[byte]) >> bit) & 1))
    return out


def mismatch_csv(report: list[Mismatch]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["row", "col", "word", "bit", "expected", "observed"])
    for m in report:
        w.writerow([*m.address, m.expected, m.observed])
    return out.getvalue()


# --- trace files ------------------------------------------------------------

_TRACE = re.compile(r"^(W|R)\s+(\d+)\s+(\d+)\s+(\d+)(?:\s+0x([0-9A-Fa-f]{1,2}))?\s*$")


def write_trace(txns) -> str:
    return "".join(f"{t}\n" for t in txns)


def parse_trace(text: str, source: str | None = None) -> list[BusTransaction]:
    txns = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _TRACE.match(line)
        if not m:
            raise ParseError(f"bad trace line {raw!r}", lineno, 1, source)
        op, r, c, w, data = m.groups()
        if (op == "W") != (data is not None):
            raise ParseError("writes need 0xHH data; reads take none", lineno, 1, source)
        try:
            txns.append(BusTransaction(op, int(r), int(c), int(w), int(data, 16) if data else None))
        except BusError as exc:
            raise ParseError(str(exc), lineno, 1, source) from None
    return txns


def parse_fault_spec(text: str) -> list[tuple[ConfigAddress, int]]:
    """Faults as ``row,col,word,bit=value`` items separated by whitespace, ';' or newlines."""
    faults = []
    body = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    for item in re.split(r"[\s;]+", body):
        if not item:
            continue
        m = re.fullmatch(r"(\d+),(\d+),(\d+),(\d+)=([01])", item)
        if not m:
            raise BusError(f"bad fault spec {item!r}; expected row,col,word,bit=0|1")
        addr = ConfigAddress(*(int(g) for g in m.groups()[:4]))
        addr.check()
        faults.append((addr, int(m.group(5))))
    return faults

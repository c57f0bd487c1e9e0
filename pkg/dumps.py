"""Binary field dumps: one ASCII header line, then little-endian float64 values."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from grid import Grid


PAYLOAD_DTYPE = np.dtype("<f8")


@dataclass(frozen=True, eq=False)
class FieldDump:
    nx: int
    ny: int
    h: float
    n_interior: int
    quantity: str
    payload: np.ndarray

    def __post_init__(self):
        payload = np.asarray(self.payload, dtype=PAYLOAD_DTYPE)
        if payload.shape != (self.n_interior,):
            raise ValueError(f"payload has {payload.size} values, expected {self.n_interior}")
        if not np.all(np.isfinite(payload)):
            raise ValueError("payload must contain finite values only")
        if not self.quantity or any(ch.isspace() for ch in self.quantity):
            raise ValueError(f"quantity tag must be a single word, got {self.quantity!r}")
        object.__setattr__(self, "payload", payload)

    @classmethod
    def from_grid(cls, grid: Grid, values, quantity: str) -> "FieldDump":
        nx, ny = grid.extent()
        return cls(nx=nx, ny=ny, h=grid.h, n_interior=grid.size, quantity=quantity, payload=values)

    def header(self) -> str:
        return f"{self.nx} {self.ny} {self.h!r} {self.n_interior} {self.quantity}\n"

    def to_bytes(self) -> bytes:
        return self.header().encode("ascii") + self.payload.tobytes()

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def from_bytes(cls, data: bytes) -> "FieldDump":
        newline = data.find(b"\n")
        if newline < 0:
            raise ValueError("field dump has no header line")
        parts = data[:newline].decode("ascii").split()
        if len(parts) != 5:
            raise ValueError(f"malformed field dump header: {data[:newline]!r}")
        nx, ny, h, n_interior, quantity = parts
        payload = np.frombuffer(data[newline + 1:], dtype=PAYLOAD_DTYPE)
        return cls(int(nx), int(ny), float(h), int(n_interior), quantity, payload.copy())

    @classmethod
    def read(cls, path) -> "FieldDump":
        return cls.from_bytes(Path(path).read_bytes())

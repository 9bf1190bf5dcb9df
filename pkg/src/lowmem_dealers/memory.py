"""Bit-exact accounting of a structure's state size."""
from dataclasses import dataclass, field


def bits_for(values: int) -> int:
    """Width of a field that must distinguish ``values`` distinct values."""
    return (values - 1).bit_length() if values > 1 else 0


def gamma_len(v: int) -> int:
    """Length of the Elias gamma code of v >= 1."""
    return 2 * v.bit_length() - 1


@dataclass
class MemoryAccount:
    breakdown: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.breakdown.values())

    def add(self, name: str, bits: int):
        self.breakdown[name] = self.breakdown.get(name, 0) + int(bits)
        return self

    def merge(self, prefix: str, other: "MemoryAccount"):
        for k, v in other.breakdown.items():
            self.add(f"{prefix}.{k}", v)
        return self

    def __str__(self):
        rows = [f"  {k}: {v}" for k, v in self.breakdown.items()]
        return "\n".join([f"total {self.total} bits"] + rows)

"""Synthetic uncertain vector data in the ART style.

Object centers are uniform in ``[0, S]^d``; each object's ``m`` instances
are uniform in the axis-aligned cube of side ``UD`` around its center,
clipped to the space, with equal probabilities ``(1 - e) / m``.

Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), drawn
in a fixed order: all centers, then all instance offsets. Output is a
pure function of the parameters for a given NumPy bit generator.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dataset import UncertainDatabase


@dataclass(frozen=True)
class GenParams:
    objects: int
    instances: int
    dims: int = 3
    ud: float = 2.0
    space: float = 10.0
    seed: int = 0
    existential: float = 0.0

    def validate(self) -> None:
        if self.objects < 1 or self.instances < 1 or self.dims < 1:
            raise ValueError("objects, instances and dims must be >= 1")
        if not self.ud >= 0.0:
            raise ValueError(f"ud must be >= 0, got {self.ud}")
        if not self.space > 0.0:
            raise ValueError(f"space must be > 0, got {self.space}")
        if not 0.0 <= self.existential < 1.0:
            raise ValueError(f"existential must be in [0, 1), got {self.existential}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def as_dict(self) -> dict:
        return asdict(self)


def generate(params: GenParams) -> UncertainDatabase:
    params.validate()
    n, m, d = params.objects, params.instances, params.dims
    rng = np.random.default_rng(params.seed)
    centers = rng.uniform(0.0, params.space, size=(n, d))
    half = params.ud / 2.0
    offsets = rng.uniform(-half, half, size=(n, m, d))
    pos = np.clip(centers[:, None, :] + offsets, 0.0, params.space).reshape(n * m, d)
    prob = np.full(n * m, (1.0 - params.existential) / m)
    return UncertainDatabase.from_arrays(np.repeat(np.arange(n, dtype=np.int64), m), prob, pos)

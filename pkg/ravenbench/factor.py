# Factored ground-truth models.
#
# A FactorSpace is an ordered list of categorical factors. A point in the product
# space is a FactorAssignment. Everything in Ravenbench (panels, tasks, codes)
# is indexed by assignments.
#
from __future__ import annotations
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from ravenbench.constant import SPACE_ID, RNG_ALGORITHM
from ravenbench.errors import UnknownSpace, InvalidAssignment

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


# ##########################################
# RANDOMNESS
#
def derive_seed(seed: int, *keys: int) -> int:
    """Derives an independent 64-bit seed from a seed and a path of integer keys.

    Used to shard streams: instance i of a run seeded S gets derive_seed(S, i).
    """
    state = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


class SeededRng:
    """Counter-based random stream.

    Same (seed, algorithm) gives the same draws on every platform. The underlying
    bit generator is Philox, a counter-based generator, so spawned streams are disjoint.
    """

    ALGORITHMS = {"philox": np.random.Philox}

    def __init__(self, seed: int, algorithm: str = RNG_ALGORITHM):
        if algorithm not in self.ALGORITHMS:
            raise ValueError(f"unknown rng algorithm {algorithm}")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.algorithm = algorithm
        self._generator = np.random.Generator(self.ALGORITHMS[algorithm](self.seed))

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, algorithm={self.algorithm})"

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def draw(self, high: int) -> int:
        """Uniform integer in [0, high)"""
        return int(self._generator.integers(0, high))

    def draws(self, high: int | Sequence[int] | np.ndarray, size: int | Tuple[int, ...]) -> np.ndarray:
        """Array of uniform integers in [0, high), high may vary along the last axis"""
        return self._generator.integers(0, np.asarray(high), size=size)

    def sample_without_replacement(self, population: Sequence[int], k: int) -> List[int]:
        pool = list(population)
        chosen = []
        for _ in range(k):
            chosen.append(pool.pop(self.draw(len(pool))))
        return chosen

    def random_state(self) -> int:
        """A 32-bit seed for libraries that take an integer random_state"""
        return self.draw(2**31 - 1)

    def spawn(self, key: int) -> SeededRng:
        """Child stream, disjoint from this one and from other keys"""
        return SeededRng(derive_seed(self.seed, key), algorithm=self.algorithm)


# ##########################################
# FACTOR SPACES
#
@dataclass(frozen=True)
class Factor:
    name: str
    value_labels: Tuple[float, ...]

    @property
    def cardinality(self) -> int:
        return len(self.value_labels)


@dataclass(frozen=True)
class FactorSpace:
    id: str
    factors: Tuple[Factor, ...]

    def __post_init__(self):
        for f in self.factors:
            if f.cardinality < 2:
                raise ValueError(f"space {self.id}: factor {f.name} has cardinality {f.cardinality}")

    @property
    def num_factors(self) -> int:
        return len(self.factors)

    @cached_property
    def cardinalities(self) -> Tuple[int, ...]:
        return tuple(f.cardinality for f in self.factors)

    @cached_property
    def names(self) -> Tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    @property
    def size(self) -> int:
        return int(np.prod(self.cardinalities, dtype=np.int64))

    def factor_index(self, name: str) -> int:
        return self.names.index(name)

    def is_dsprites(self) -> bool:
        return self.id.startswith("dsprites")

    def is_shapes3d(self) -> bool:
        return self.id.startswith("shapes3d")

    def label(self, name: str, index: int) -> float:
        return self.factors[self.factor_index(name)].value_labels[index]


@dataclass(frozen=True)
class FactorAssignment:
    values: Tuple[int, ...]

    def __iter__(self) -> Iterator[int]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int) -> int:
        return self.values[k]

    def replace(self, k: int, value: int) -> FactorAssignment:
        values = list(self.values)
        values[k] = int(value)
        return FactorAssignment(tuple(values))

    def to_list(self) -> List[int]:
        return list(self.values)

    @classmethod
    def of(cls, values) -> FactorAssignment:
        return cls(tuple(int(v) for v in values))


def _linspace(start: float, stop: float, num: int) -> Tuple[float, ...]:
    return tuple(float(v) for v in np.linspace(start, stop, num))


SHAPE_NAMES = {
    "dsprites": ("square", "ellipse", "heart"),
    "shapes3d": ("cube", "cylinder", "sphere", "capsule"),
}

# Original value grids; reasoning spaces keep a visually distinct subset.
_DSPRITES_SCALES = _linspace(0.5, 1.0, 6)
_DSPRITES_POSITIONS = _linspace(0.0, 1.0, 32)
_SHAPES3D_HUES = _linspace(0.0, 0.9, 10)
_SHAPES3D_SCALES = _linspace(0.75, 1.25, 8)
_SHAPES3D_AZIMUTHS = _linspace(-30.0, 30.0, 16)


def _dsprites(space_id: str, full: bool) -> FactorSpace:
    return FactorSpace(
        id=space_id,
        factors=(
            Factor("shape", (1.0, 2.0, 3.0)),
            Factor("scale", _DSPRITES_SCALES if full else _DSPRITES_SCALES[1::2]),
            Factor("pos_x", _DSPRITES_POSITIONS if full else (0.2, 0.4, 0.6, 0.8)),
            Factor("pos_y", _DSPRITES_POSITIONS if full else (0.2, 0.4, 0.6, 0.8)),
            Factor("bg_shade", (0.9, 0.7, 0.5, 0.3, 0.1)),
            Factor("obj_color", tuple(60.0 * k for k in range(6))),
        ),
    )


def _shapes3d(space_id: str, full: bool) -> FactorSpace:
    return FactorSpace(
        id=space_id,
        factors=(
            Factor("floor_hue", _SHAPES3D_HUES),
            Factor("wall_hue", _SHAPES3D_HUES),
            Factor("obj_hue", _SHAPES3D_HUES),
            Factor("scale", _SHAPES3D_SCALES if full else _SHAPES3D_SCALES[::2]),
            Factor("shape", (0.0, 1.0, 2.0, 3.0)),
            Factor("azimuth", _SHAPES3D_AZIMUTHS if full else _SHAPES3D_AZIMUTHS[::4]),
        ),
    )


_SPACES = {
    SPACE_ID.DSPRITES_REASONING.value: lambda: _dsprites(SPACE_ID.DSPRITES_REASONING.value, full=False),
    SPACE_ID.DSPRITES_FULL.value: lambda: _dsprites(SPACE_ID.DSPRITES_FULL.value, full=True),
    SPACE_ID.SHAPES3D_REASONING.value: lambda: _shapes3d(SPACE_ID.SHAPES3D_REASONING.value, full=False),
    SPACE_ID.SHAPES3D_FULL.value: lambda: _shapes3d(SPACE_ID.SHAPES3D_FULL.value, full=True),
}


def make_space(space_id: str | SPACE_ID) -> FactorSpace:
    if isinstance(space_id, SPACE_ID):
        space_id = space_id.value
    builder = _SPACES.get(space_id)
    if builder is None:
        raise UnknownSpace(str(space_id))
    return builder()


def space_ids() -> List[str]:
    return list(_SPACES.keys())


# ##########################################
# ASSIGNMENTS
#
def validate_assignment(space: FactorSpace, a: FactorAssignment | Sequence[int]):
    values = list(a)
    if len(values) != space.num_factors:
        raise InvalidAssignment(f"assignment has {len(values)} values, space {space.id} has {space.num_factors} factors")
    for f, v in zip(space.factors, values):
        if not (0 <= v < f.cardinality):
            raise InvalidAssignment(f"factor {f.name}: value {v} not in [0, {f.cardinality})", factor=f.name)


def sample_assignment(space: FactorSpace, rng: SeededRng) -> FactorAssignment:
    return FactorAssignment(tuple(rng.draw(c) for c in space.cardinalities))


def sample_assignments(space: FactorSpace, rng: SeededRng, n: int) -> np.ndarray:
    """n uniform assignments as an (n, K) integer array"""
    return rng.draws(space.cardinalities, size=(n, space.num_factors))


def sample_fixed_factor_batch(space: FactorSpace, rng: SeededRng, factor: int, n: int) -> np.ndarray:
    """n uniform assignments that share one uniformly drawn value of factor"""
    batch = sample_assignments(space, rng, n)
    batch[:, factor] = rng.draw(space.cardinalities[factor])
    return batch


def assignment_index(space: FactorSpace, a: FactorAssignment | Sequence[int]) -> int:
    """Mixed-radix flat index, row-major in factor order"""
    validate_assignment(space, a)
    index = 0
    for v, c in zip(a, space.cardinalities):
        index = index * c + int(v)
    return index


def assignment_indices(space: FactorSpace, values: np.ndarray) -> np.ndarray:
    """Vectorised assignment_index over an (n, K) array"""
    values = np.asarray(values)
    for k, f in enumerate(space.factors):
        bad = (values[:, k] < 0) | (values[:, k] >= f.cardinality)
        if bad.any():
            raise InvalidAssignment(f"factor {f.name}: value {values[bad, k][0]} not in [0, {f.cardinality})", factor=f.name)
    return np.ravel_multi_index(tuple(values.T), space.cardinalities).astype(np.int64)


def index_assignment(space: FactorSpace, index: int) -> FactorAssignment:
    if not (0 <= index < space.size):
        raise InvalidAssignment(f"flat index {index} not in [0, {space.size})")
    return FactorAssignment(tuple(int(v) for v in np.unravel_index(index, space.cardinalities)))


def enumerate_space(space: FactorSpace) -> np.ndarray:
    """All assignments as an (N, K) array, row i has flat index i"""
    return np.stack(np.unravel_index(np.arange(space.size), space.cardinalities), axis=1).astype(np.int64)

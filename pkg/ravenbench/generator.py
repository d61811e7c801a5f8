# Abstract reasoning task generation.
#
# An instance is built in four steps:
#   1. draw how many factors are fixed (1, 2 or 3, uniformly),
#   2. draw which factors, without replacement,
#   3. draw one value per row for each fixed factor (rows may differ),
#   4. draw 3x3 values for every other factor, rejecting grids where the factor
#      is constant within row 1 and constant within row 2.
# The 9th panel of the grid is the answer. Five distractors are derived from it by
# resampling the non-fixed factors and one fixed factor until row 3 breaks the relation.
#
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Sequence, Tuple

import jsonlines
import numpy as np

from ravenbench.constant import MAX_REJECTIONS, MAX_REGENERATIONS, NUM_ANSWERS, NUM_CONTEXT, GRID_SIDE
from ravenbench.errors import GenerationError, InvalidAssignment
from ravenbench.factor import FactorSpace, FactorAssignment, SeededRng, derive_seed, make_space, validate_assignment

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

MAX_FIXED = 3


@dataclass(frozen=True)
class RelationSpec:
    """AND relation: each fixed factor is constant within each row, at row_values[row][i]"""

    fixed_factors: Tuple[int, ...]
    row_values: Tuple[Tuple[int, ...], ...]  # 3 x len(fixed_factors)

    def validate(self, space: FactorSpace):
        if not (1 <= len(self.fixed_factors) <= MAX_FIXED):
            raise InvalidAssignment(f"relation fixes {len(self.fixed_factors)} factors, expected 1 to {MAX_FIXED}")
        if len(set(self.fixed_factors)) != len(self.fixed_factors):
            raise InvalidAssignment(f"relation has duplicate factors {self.fixed_factors}")
        if len(self.row_values) != GRID_SIDE:
            raise InvalidAssignment(f"relation has {len(self.row_values)} rows")
        for row in self.row_values:
            if len(row) != len(self.fixed_factors):
                raise InvalidAssignment(f"relation row {row} does not match fixed factors {self.fixed_factors}")
            for f, v in zip(self.fixed_factors, row):
                if not (0 <= v < space.cardinalities[f]):
                    raise InvalidAssignment(f"factor {space.names[f]}: row value {v} out of range", factor=space.names[f])

    def row_value(self, row: int, factor: int) -> int:
        return self.row_values[row][self.fixed_factors.index(factor)]


@dataclass(frozen=True)
class RPMInstance:
    space: str
    relation: RelationSpec
    context: Tuple[FactorAssignment, ...]  # 8 panels, row-major, bottom-right absent
    answers: Tuple[FactorAssignment, ...]  # 6 panels
    correct_index: int
    seed: int

    @property
    def solution(self) -> FactorAssignment:
        return self.answers[self.correct_index]

    def to_dict(self) -> dict:
        return {
            "space": self.space,
            "seed": self.seed,
            "fixed_factors": list(self.relation.fixed_factors),
            "row_values": [list(r) for r in self.relation.row_values],
            "context": [a.to_list() for a in self.context],
            "answers": [a.to_list() for a in self.answers],
            "correct_index": self.correct_index,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RPMInstance:
        space = make_space(data["space"])
        relation = RelationSpec(
            fixed_factors=tuple(int(f) for f in data["fixed_factors"]),
            row_values=tuple(tuple(int(v) for v in r) for r in data["row_values"]),
        )
        relation.validate(space)
        context = tuple(FactorAssignment.of(a) for a in data["context"])
        answers = tuple(FactorAssignment.of(a) for a in data["answers"])
        if len(context) != NUM_CONTEXT or len(answers) != NUM_ANSWERS:
            raise InvalidAssignment(f"instance needs {NUM_CONTEXT} context and {NUM_ANSWERS} answer panels")
        for a in context + answers:
            validate_assignment(space, a)
        correct_index = int(data["correct_index"])
        if not (0 <= correct_index < NUM_ANSWERS):
            raise InvalidAssignment(f"correct index {correct_index} out of range")
        return cls(
            space=space.id, relation=relation, context=context, answers=answers, correct_index=correct_index, seed=int(data["seed"])
        )


def _constant(values: Iterable[int]) -> bool:
    return len(set(values)) == 1


# ###############################
# The four steps
#
def sample_relation(space: FactorSpace, rng: SeededRng) -> RelationSpec:
    if space.num_factors < MAX_FIXED:
        raise GenerationError(f"space {space.id} has fewer than {MAX_FIXED} factors", seed=rng.seed, stage="relation")
    size = 1 + rng.draw(MAX_FIXED)
    fixed = tuple(rng.sample_without_replacement(range(space.num_factors), size))
    row_values = tuple(tuple(rng.draw(space.cardinalities[f]) for f in fixed) for _ in range(GRID_SIDE))
    return RelationSpec(fixed_factors=fixed, row_values=row_values)


def sample_solution_grid(space: FactorSpace, relation: RelationSpec, rng: SeededRng) -> List[FactorAssignment]:
    """Full 3x3 grid, row-major, including the true bottom-right panel"""
    grid = np.zeros((GRID_SIDE * GRID_SIDE, space.num_factors), dtype=np.int64)
    for i, f in enumerate(relation.fixed_factors):
        for r in range(GRID_SIDE):
            grid[r * GRID_SIDE : (r + 1) * GRID_SIDE, f] = relation.row_values[r][i]
    for f in range(space.num_factors):
        if f in relation.fixed_factors:
            continue
        for _ in range(MAX_REJECTIONS):
            values = [rng.draw(space.cardinalities[f]) for _ in range(GRID_SIDE * GRID_SIDE)]
            if not (_constant(values[0:3]) and _constant(values[3:6])):
                break
        else:
            raise GenerationError(f"factor {space.names[f]} stays constant over rows 1 and 2", seed=rng.seed, stage="solution")
        grid[:, f] = values
    return [FactorAssignment.of(row) for row in grid]


def _breaks_row3(relation: RelationSpec, candidate: Sequence[int]) -> bool:
    return any(candidate[f] != relation.row_values[GRID_SIDE - 1][i] for i, f in enumerate(relation.fixed_factors))


def sample_distractors(space: FactorSpace, relation: RelationSpec, solution_grid: Sequence[FactorAssignment], rng: SeededRng) -> List[FactorAssignment]:
    correct = solution_grid[-1]
    non_fixed = [f for f in range(space.num_factors) if f not in relation.fixed_factors]
    distractors: List[FactorAssignment] = []
    for _ in range(NUM_ANSWERS - 1):
        for _ in range(MAX_REJECTIONS):
            values = list(correct)
            for f in non_fixed:
                values[f] = rng.draw(space.cardinalities[f])
            f = relation.fixed_factors[rng.draw(len(relation.fixed_factors))]
            values[f] = rng.draw(space.cardinalities[f])
            candidate = FactorAssignment.of(values)
            if _breaks_row3(relation, values) and candidate != correct and candidate not in distractors:
                distractors.append(candidate)
                break
        else:
            raise GenerationError(f"no distractor after {MAX_REJECTIONS} attempts", seed=rng.seed, stage="distractors")
    return distractors


def check_consistency(space: FactorSpace, context: Sequence[FactorAssignment], candidate: FactorAssignment) -> Tuple[bool, FrozenSet[int]]:
    """Solver-side check: factors constant within row 1 and row 2 must be constant in row 3 too.

    Returns the verdict and the set of such factors.
    """
    if len(context) < 2 * GRID_SIDE + 2:
        raise InvalidAssignment(f"context has {len(context)} panels, expected {NUM_CONTEXT}")
    row1, row2 = context[0:3], context[3:6]
    row3 = [context[6], context[7], candidate]
    witness = frozenset(k for k in range(space.num_factors) if _constant(a[k] for a in row1) and _constant(a[k] for a in row2))
    consistent = all(_constant(a[k] for a in row3) for k in witness)
    return consistent, witness


def consistent_answers(space: FactorSpace, instance: RPMInstance) -> List[int]:
    return [j for j, a in enumerate(instance.answers) if check_consistency(space, instance.context, a)[0]]


def generate_instance(space: FactorSpace, rng: SeededRng, strict: bool = False) -> RPMInstance:
    for attempt in range(MAX_REGENERATIONS):
        relation = sample_relation(space, rng)
        grid = sample_solution_grid(space, relation, rng)
        distractors = sample_distractors(space, relation, grid, rng)
        correct_index = rng.draw(NUM_ANSWERS)
        answers = distractors[:correct_index] + [grid[-1]] + distractors[correct_index:]
        instance = RPMInstance(
            space=space.id,
            relation=relation,
            context=tuple(grid[:NUM_CONTEXT]),
            answers=tuple(answers),
            correct_index=correct_index,
            seed=rng.seed,
        )
        if not strict:
            return instance
        found = consistent_answers(space, instance)
        if found == [correct_index]:
            return instance
        logger.warning(f"seed {rng.seed}: {len(found)} consistent answers, regenerating (attempt {attempt + 1})")
    raise GenerationError(f"no unambiguous instance after {MAX_REGENERATIONS} attempts", seed=rng.seed, stage="strict")


def generate_instances(space: FactorSpace, count: int, seed: int, strict: bool = False, start: int = 0) -> List[RPMInstance]:
    """Instances start..start+count-1 of the stream seeded by seed.

    Instance i only depends on (space, seed, i, strict), so ranges can be produced by separate workers.
    """
    return [generate_instance(space, SeededRng(derive_seed(seed, i)), strict=strict) for i in range(start, start + count)]


def instances_to_arrays(instances: Sequence[RPMInstance]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(B, 8, K) context values, (B, 6, K) answer values and (B,) correct indices"""
    context = np.array([[a.values for a in inst.context] for inst in instances], dtype=np.int64)
    answers = np.array([[a.values for a in inst.answers] for inst in instances], dtype=np.int64)
    labels = np.array([inst.correct_index for inst in instances], dtype=np.int64)
    return context, answers, labels


# ###############################
# Instance files
#
def write_instances(path: str, instances: Iterable[RPMInstance]) -> int:
    count = 0
    with jsonlines.open(path, mode="w", compact=True, sort_keys=True) as writer:
        for instance in instances:
            writer.write(instance.to_dict())
            count = count + 1
    logger.debug(f"{count} instances written to {path}")
    return count


def read_instances(path: str) -> List[RPMInstance]:
    with jsonlines.open(path, mode="r") as reader:
        return [RPMInstance.from_dict(data) for data in reader]

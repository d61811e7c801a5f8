# Externally trained representations.
#
# Codes come from a CSV file with header f0,...,f{K-1},z0,...,z{d-1}
# (integer factor values then float codes) and a sidecar <file>.manifest.json
# naming the space: {"space": <id>, "code_dim": d, "coverage": "full" | "sampled"}.
# Codes are treated as deterministic per assignment (posterior means).
#
from __future__ import annotations
import os
import csv
import json
import logging
from dataclasses import dataclass

import numpy as np

from ravenbench.constant import SOURCE_KIND, EXTERNAL_MANIFEST_SUFFIX
from ravenbench.errors import ExternalLookupError, ParseError, SourceError
from ravenbench.factor import FactorSpace, SeededRng, assignment_indices, enumerate_space, make_space
from .source import RepresentationSource

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

COVERAGE_FULL = "full"
COVERAGE_SAMPLED = "sampled"


def manifest_path(path: str) -> str:
    return path + EXTERNAL_MANIFEST_SUFFIX


@dataclass
class RepresentationTable:
    """Rows sorted by flat index, one code per assignment"""

    space: FactorSpace
    indices: np.ndarray  # (n,) sorted flat indices
    values: np.ndarray  # (n, K) factor values
    codes: np.ndarray  # (n, d)
    coverage: str = COVERAGE_FULL

    @property
    def code_dim(self) -> int:
        return self.codes.shape[1]

    def __len__(self) -> int:
        return len(self.indices)

    def is_complete(self) -> bool:
        return len(self.indices) == self.space.size

    def lookup(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        pos = np.searchsorted(self.indices, indices)
        pos = np.minimum(pos, len(self.indices) - 1)
        missing = self.indices[pos] != indices
        if missing.any():
            raise ExternalLookupError(int(indices[missing][0]))
        return self.codes[pos]


def _header(space: FactorSpace, code_dim: int) -> list:
    return [f"f{k}" for k in range(space.num_factors)] + [f"z{j}" for j in range(code_dim)]


def load_external(path: str, space: FactorSpace | str | None = None) -> RepresentationTable:
    """Reads and validates a representation file.

    The space comes from the sidecar manifest, or from the space argument when there is no manifest.
    """
    code_dim = None
    coverage = COVERAGE_FULL
    mpath = manifest_path(path)
    if os.path.exists(mpath):
        with open(mpath, "r") as fp:
            manifest = json.load(fp)
        space = manifest.get("space", space)
        code_dim = manifest.get("code_dim")
        coverage = manifest.get("coverage", COVERAGE_FULL)
    if space is None:
        raise SourceError(f"{path}: no manifest and no space given")
    if isinstance(space, str):
        space = make_space(space)
    if coverage not in (COVERAGE_FULL, COVERAGE_SAMPLED):
        raise SourceError(f"{mpath}: unknown coverage {coverage!r}")

    K = space.num_factors
    with open(path, "r", newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is None or header == []:
            raise ParseError("empty file, header expected", line=1)
        header = [h.strip() for h in header]
        d = len(header) - K
        if d < 1 or header != _header(space, d):
            raise ParseError(f"header must be f0..f{K - 1},z0..z<d-1> for space {space.id}, got {','.join(header)}", line=1)
        if code_dim is not None and int(code_dim) != d:
            raise ParseError(f"header has {d} code columns, manifest says {code_dim}", line=1)
        values = []
        codes = []
        for row in reader:
            line = reader.line_num
            if row == []:
                continue
            if len(row) != K + d:
                raise ParseError(f"{len(row)} columns, expected {K + d}", line=line)
            try:
                v = [int(x) for x in row[:K]]
                z = [float(x) for x in row[K:]]
            except ValueError as e:
                raise ParseError(str(e), line=line)
            for k, (x, c) in enumerate(zip(v, space.cardinalities)):
                if not (0 <= x < c):
                    raise ParseError(f"factor f{k} value {x} not in [0, {c})", line=line)
            values.append(v)
            codes.append(z)

    values = np.asarray(values, dtype=np.int64).reshape(-1, K)
    codes = np.asarray(codes, dtype=np.float64).reshape(-1, d)
    indices = assignment_indices(space, values) if len(values) > 0 else np.zeros(0, dtype=np.int64)
    order = np.argsort(indices, kind="stable")
    indices, values, codes = indices[order], values[order], codes[order]
    dup = np.flatnonzero(np.diff(indices) == 0)
    if len(dup) > 0:
        raise SourceError(f"{path}: duplicate rows for flat index {indices[dup[0]]}")
    table = RepresentationTable(space=space, indices=indices, values=values, codes=codes, coverage=coverage)
    if coverage == COVERAGE_FULL and not table.is_complete():
        logger.warning(f"{path}: declares full coverage but has {len(table)} of {space.size} assignments")
    logger.debug(f"loaded {len(table)} codes of dimension {d} from {path}")
    return table


def save_external(table: RepresentationTable, path: str):
    """Writes the CSV and its manifest, rows in flat index order, floats in shortest round-trip form"""
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(_header(table.space, table.code_dim))
        for v, z in zip(table.values, table.codes):
            writer.writerow([str(int(x)) for x in v] + [repr(float(x)) for x in z])
    with open(manifest_path(path), "w") as fp:
        json.dump({"space": table.space.id, "code_dim": table.code_dim, "coverage": table.coverage}, fp, sort_keys=True)


def table_from_source(source: RepresentationSource, values: np.ndarray | None = None) -> RepresentationTable:
    """Tabulates a source over given assignments, or over the whole space"""
    space = source.space
    values = enumerate_space(space) if values is None else np.asarray(values, dtype=np.int64)
    indices = assignment_indices(space, values)
    order = np.argsort(indices, kind="stable")
    values = values[order]
    coverage = COVERAGE_FULL if len(values) == space.size else COVERAGE_SAMPLED
    return RepresentationTable(space=space, indices=indices[order], values=values, codes=source.encode_batch(values), coverage=coverage)


class ExternalSource(RepresentationSource):

    SOURCE_NAME = SOURCE_KIND.EXTERNAL.value

    def __init__(self, table: RepresentationTable, model_id: str = "external"):
        RepresentationSource.__init__(self, space=table.space)
        if len(table) == 0:
            raise SourceError("external table has no rows")
        self.table = table
        self._model_id = model_id

    @classmethod
    def from_file(cls, path: str, space: FactorSpace | str | None = None) -> ExternalSource:
        model_id = os.path.splitext(os.path.basename(path))[0]
        return cls(load_external(path, space=space), model_id=model_id)

    @property
    def code_dim(self) -> int:
        return self.table.code_dim

    @property
    def model_id(self) -> str:
        return self._model_id

    def covers_space(self) -> bool:
        return self.table.is_complete()

    def encode_batch(self, values: np.ndarray) -> np.ndarray:
        return self.table.lookup(assignment_indices(self.space, values))

    # Sampled tables: draw rows of the table instead of assignments of the space
    def sample_values(self, rng: SeededRng, n: int) -> np.ndarray:
        if self.covers_space():
            return super().sample_values(rng, n)
        return self.table.values[rng.draws(len(self.table), size=n)]

    def sample_fixed_values(self, rng: SeededRng, factor: int, n: int) -> np.ndarray:
        if self.covers_space():
            return super().sample_fixed_values(rng, factor, n)
        present = np.unique(self.table.values[:, factor])
        value = present[rng.draw(len(present))]
        rows = np.flatnonzero(self.table.values[:, factor] == value)
        return self.table.values[rows[rng.draws(len(rows), size=n)]]

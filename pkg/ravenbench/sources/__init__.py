"""
Representation sources.

Oracle sources are named by option strings, "linear_mixed:alpha=0.5,seed=3".
Anything that names an existing file is loaded as an external table.
"""

import os
import logging
from typing import Dict

from ravenbench import parse_options
from ravenbench.constant import OPTION_SEP, SOURCE_KIND
from ravenbench.errors import SourceError
from ravenbench.factor import FactorSpace

from .source import RepresentationSource
from .groundtruth import GroundTruthInteger, GroundTruthOneHot, PermutedScaled, integer_codes
from .mixed import LinearMixed, make_entanglement_ladder, code_factor_correlations
from .external import ExternalSource, RepresentationTable, load_external, save_external, table_from_source

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


def all_sources() -> Dict[str, type]:
    return {s.name(): s for s in RepresentationSource.all_subclasses() if s.name() != "none"}


def _typed(value, default):
    if value is True or default is None:
        return int(value) if isinstance(value, str) and value.lstrip("-").isdigit() else value
    return type(default)(value)


def source_from_spec(spec: str, space: FactorSpace) -> RepresentationSource:
    if os.path.exists(spec):
        source = ExternalSource.from_file(spec, space=space)
        if source.space.id != space.id:
            raise SourceError(f"{spec} holds codes for space {source.space.id}, not {space.id}")
        return source
    name, _, options = spec.partition(OPTION_SEP)
    sources = all_sources()
    if name == SOURCE_KIND.EXTERNAL.value or name not in sources:
        raise SourceError(f"{spec!r} is neither a file nor one of {sorted(k for k in sources if k != SOURCE_KIND.EXTERNAL.value)}")
    cls = sources[name]
    defaults = cls.parameters()
    kwargs = {}
    for key, value in parse_options(options).items():
        if key not in defaults:
            raise SourceError(f"{name}: unknown parameter {key!r}, expected one of {sorted(defaults)}")
        try:
            kwargs[key] = _typed(value, defaults[key])
        except ValueError:
            raise SourceError(f"{name}: bad value {value!r} for {key}")
    source = cls(space, **kwargs)
    logger.debug(f"source {source}")
    return source

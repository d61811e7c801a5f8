# ###############################################
# Ravenbench errors
#
class RavenbenchError(Exception):
    "base class of all errors raised by Ravenbench"
    pass


# ###############################################
# Factor space errors
class UnknownSpace(RavenbenchError):
    "space identifier is not one of the known spaces"

    def __init__(self, name: str):
        self.name = name
        RavenbenchError.__init__(self, f"unknown space {name!r}")


class InvalidAssignment(RavenbenchError):
    "factor assignment does not belong to its space"

    def __init__(self, message: str, factor: str | None = None):
        self.factor = factor
        RavenbenchError.__init__(self, message)


# ###############################################
# Rendering errors
class RenderError(RavenbenchError):
    "panel or task sheet cannot be drawn"
    pass


# ###############################################
# Task generation errors
class GenerationError(RavenbenchError):
    "rejection sampling gave up, carries the seed and the failing stage"

    def __init__(self, message: str, seed: int | None = None, stage: str | None = None):
        self.seed = seed
        self.stage = stage
        RavenbenchError.__init__(self, f"{stage}: {message} (seed={seed})" if stage is not None else f"{message} (seed={seed})")


# ###############################################
# Representation errors
class SourceError(RavenbenchError):
    "representation source cannot be built"
    pass


class ExternalLookupError(SourceError):
    "external representation table has no row for an assignment"

    def __init__(self, index: int):
        self.index = index
        SourceError.__init__(self, f"no external code for flat index {index}")


class ParseError(SourceError):
    "external representation file is malformed"

    def __init__(self, message: str, line: int):
        self.line = line
        SourceError.__init__(self, f"line {line}: {message}")


# ###############################################
# Metric errors
class MetricError(RavenbenchError):
    "disentanglement metric cannot be computed"
    pass


# ###############################################
# Network errors
class ShapeError(RavenbenchError):
    "array shape does not match a layer"

    def __init__(self, message: str, layer: int | None = None):
        self.layer = layer
        RavenbenchError.__init__(self, f"layer {layer}: {message}" if layer is not None else message)


class StaleCache(RavenbenchError):
    "forward cache does not belong to current parameters"
    pass


class NonFiniteError(RavenbenchError):
    "gradient, parameter or loss is nan or infinite"

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        RavenbenchError.__init__(self, f"{message} ({where})" if where is not None else message)


# ###############################################
# Analysis errors
class AnalysisError(RavenbenchError):
    "results table is incomplete or inconsistent"
    pass


# ###############################################
# Command line errors
class ArtifactExists(RavenbenchError):
    "output already exists and --force was not given"
    pass

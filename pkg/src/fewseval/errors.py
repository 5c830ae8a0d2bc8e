"""Exception hierarchy shared by the pipeline stages."""


class FewsEvalError(Exception):
    """Base class for all package errors."""


# ingest
class FormatError(FewsEvalError):
    """File does not parse under its declared format."""


class EmptyLayerError(FewsEvalError):
    """Layer has zero usable features."""


class CrsError(FewsEvalError):
    """Layer declares a coordinate reference system that is not geographic lon/lat."""


class NamingError(FewsEvalError):
    """File name does not follow the catalog naming convention."""


class DuplicateEntryError(FewsEvalError):
    """Two catalog files map to the same (period, kind, region)."""


class MissingAttributeError(FewsEvalError, AttributeError):
    """IPC attribute absent on a feature."""


class RangeError(FewsEvalError, ValueError):
    """IPC value outside 1-5 and not a known no-data sentinel."""


# geometry
class GeometryError(FewsEvalError):
    """Base for geometry failures (CLI exit code 3)."""


class RepairError(GeometryError):
    """Validity repair would change the area beyond tolerance."""


class DegenerateError(GeometryError):
    """Region has zero area."""


class TopologyError(GeometryError):
    """Clipping kernel failed even after a repair retry."""


class EmptyResultError(GeometryError):
    """No overlap survived sliver filtering."""


# scoring
class EmptyJoinError(FewsEvalError):
    """No prediction could be paired with a ground-truth assessment."""

"""Exception types shared across the pipeline."""


class MemeforgeError(Exception):
    """Base class for all pipeline errors."""


# --- vision ---

class MalformedImage(MemeforgeError):
    pass


class UnsupportedFormat(MemeforgeError):
    pass


class ZeroDimension(MemeforgeError):
    pass


class NonPositiveSigma(MemeforgeError):
    pass


class EvenBlock(MemeforgeError):
    pass


class TooSmall(MemeforgeError):
    pass


class BoxOutOfBounds(MemeforgeError):
    pass


# --- ocr ---

class OcrTimeout(MemeforgeError):
    pass


class OcrServiceError(MemeforgeError):
    pass


class MissingCaption(MemeforgeError):
    pass


# --- text ---

class InconsistentDim(MemeforgeError):
    pass


class EmptyFile(MemeforgeError):
    pass


# --- neural engine ---

class ShapeMismatch(MemeforgeError):
    pass


class NonFiniteLoss(MemeforgeError):
    pass


class InvalidGeometry(MemeforgeError):
    pass


class CorruptCheckpoint(MemeforgeError):
    pass


# --- baselines ---

class TooFewRows(MemeforgeError):
    pass


class SingleClass(MemeforgeError):
    pass


class EmptyData(MemeforgeError):
    pass


class DimensionMismatch(MemeforgeError):
    pass


# --- metrics ---

class LabelOutOfRange(MemeforgeError):
    pass


class LengthMismatch(MemeforgeError):
    pass


class TooFewItems(MemeforgeError):
    pass


class EmptyCorpus(MemeforgeError):
    pass


# --- cli / manifest ---

class DuplicateId(MemeforgeError):
    pass


class UnknownLabel(MemeforgeError):
    pass


class MissingImage(MemeforgeError):
    pass


class ConfigError(MemeforgeError):
    pass

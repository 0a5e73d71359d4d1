"""
Exceptions raised by the semdist pipeline.

The CLI maps ParseError to exit code 2 and every other SemdistError to exit code 1.
"""


class SemdistError(Exception):
    """Base class for all pipeline errors"""


class ValidationError(SemdistError):
    """Input data or parameters break an invariant"""


class BadLength(ValidationError):
    """Probability vector has the wrong dimension"""


class OutOfRange(ValidationError):
    """Probability outside [0, 1]"""


class NotNormalized(ValidationError):
    """Probabilities do not sum to 1 under strict validation"""


class BadClassId(ValidationError):
    """Class id outside 1..N"""


class InvalidFeature(ValidationError):
    """Sparse feature with unsorted ids, duplicate ids or non-positive probabilities"""


class DuplicateImageId(ValidationError):
    """The same image id appears twice in one collection"""

    def __init__(self, image_id):
        super().__init__(f"Duplicate image id: {image_id}")
        self.image_id = image_id


class BadImageId(ValidationError):
    """An image id that cannot be written to a flat file and read back unchanged"""

    def __init__(self, image_id):
        super().__init__(f"Image id {image_id!r} is empty or contains whitespace or a comma")
        self.image_id = image_id


class MissingLabels(ValidationError):
    """A ranked or query image has no label set"""

    def __init__(self, image_id):
        super().__init__(f"No labels for image: {image_id}")
        self.image_id = image_id


class InvalidSetting(ValidationError):
    """Configuration value rejected by its validator"""


class EmptyUnion(ValidationError):
    """Both features are empty, nothing to fuse"""


class NoSharedClasses(ValidationError):
    """Every per-class product is zero, the distance denominator vanishes"""


class ParseError(SemdistError):
    """Malformed line in an input file"""

    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason

"""Exception hierarchy shared across the package."""


class DomainError(ValueError):
    """An input violates a documented precondition."""


class SchemaError(DomainError):
    """A file or table is missing a required column/field."""


class FeedError(RuntimeError):
    """Transient failure fetching a feed; the caller may retry."""


class FeedParseError(ValueError):
    """A feed body could not be parsed.

    ``offset`` is the byte offset of a JSON syntax error, ``index`` the
    position of the offending record in ``data.bikes``; either may be None.
    """

    def __init__(self, message, offset=None, index=None):
        super().__init__(message)
        self.offset = offset
        self.index = index


class FitError(RuntimeError):
    """A model could not be fitted."""


class SingularMatrixError(FitError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            "weighted normal equations are singular; collinear columns: "
            + ", ".join(self.columns)
        )


class TrainingDivergedError(FitError):
    pass


class NotFittedError(RuntimeError):
    pass

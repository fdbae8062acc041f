"""Exception types shared across the package."""


class FormatError(ValueError):
    """Malformed model or image file.

    ``offset`` is the byte offset of the offending location when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalInstabilityError(FloatingPointError):
    """A redistribution denominator vanished while contributions did not.

    Raised by the unstabilized rules; switching to the epsilon rule with a
    positive stabilizer removes the singularity.
    """

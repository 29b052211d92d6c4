"""Exception types shared across the toolkit."""


class HefritError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(HefritError, ValueError):
    """Shapes of plant matrices, gains, or signals do not line up."""


class WindowError(HefritError, ValueError):
    """Requested data window does not fit inside the signal log."""


class SingularMatrixError(HefritError, ValueError):
    """Gram matrix is singular or too ill-conditioned to invert."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class CapacityError(HefritError, ValueError):
    """State dimension exceeds the factorial-growth cap."""


class EncodingRangeError(HefritError, ValueError):
    """Value cannot be represented in the plaintext space at this sensitivity."""


class KeyGenError(HefritError, RuntimeError):
    """Key generation failed (e.g. safe-prime search budget exhausted)."""


class DepthError(HefritError, RuntimeError):
    """Ciphertext has no modulus level left for the requested operation."""

    def __init__(self, message: str, required: int | None = None,
                 available: int | None = None):
        super().__init__(message)
        self.required = required
        self.available = available


class AlignmentError(HefritError, ValueError):
    """Ciphertext operands disagree on level or scale bookkeeping."""


class ProtocolError(HefritError, RuntimeError):
    """Dataset or message violates the client/server exchange contract."""


class FrameError(HefritError, RuntimeError):
    """Malformed or oversized wire frame."""


class TransportError(HefritError, RuntimeError):
    """Network failure talking to a tuning server."""

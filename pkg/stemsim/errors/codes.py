class ErrorCode:
    VALIDATION_ERROR = "VALIDATION_ERROR"
    NOT_FOUND = "NOT_FOUND"
    IO_ERROR = "IO_ERROR"
    CORRUPT_AUDIO = "CORRUPT_AUDIO"
    SAMPLE_RATE_MISMATCH = "SAMPLE_RATE_MISMATCH"
    EMPTY_RESULT = "EMPTY_RESULT"
    LENGTH_MISMATCH = "LENGTH_MISMATCH"
    DEGENERATE_INPUT = "DEGENERATE_INPUT"
    DIMENSION_MISMATCH = "DIMENSION_MISMATCH"
    STALE_CACHE = "STALE_CACHE"
    PRECONDITION_FAILED = "PRECONDITION_FAILED"
    NON_FINITE = "NON_FINITE"
    CONSTRUCTION_FAILURE = "CONSTRUCTION_FAILURE"
    INTERNAL_ERROR = "INTERNAL_ERROR"


# Codes that mean "the caller asked for something malformed" (exit 2).
USAGE_CODES = frozenset({ErrorCode.VALIDATION_ERROR})

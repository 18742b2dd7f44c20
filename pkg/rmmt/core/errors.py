"""
Exception hierarchy. Every class carries the error code used in reports and
CLI messages.
"""


class RmmtError(Exception):
    code = "RMMT_ERROR"


class OutOfRangeError(RmmtError, IndexError):
    code = "OUT_OF_RANGE"


class BadRangeError(RmmtError, ValueError):
    code = "BAD_RANGE"


class NotOpenError(RmmtError, ValueError):
    code = "NOT_OPEN"


class NotCloseError(RmmtError, ValueError):
    code = "NOT_CLOSE"


class InvalidWrapError(RmmtError, ValueError):
    code = "INVALID_WRAP"


class ExcessOverflowError(RmmtError, OverflowError):
    code = "EXCESS_OVERFLOW"


class MalformedXmlError(RmmtError, ValueError):
    code = "MALFORMED_XML"


class BadCharError(RmmtError, ValueError):
    code = "BAD_CHAR"


class UnbalancedError(RmmtError, ValueError):
    code = "UNBALANCED"


class ConfigError(RmmtError, ValueError):
    code = "CONFIG_ERROR"


class InputError(RmmtError):
    code = "INPUT_ERROR"


class AccountingError(RmmtError, ValueError):
    code = "ACCOUNTING"

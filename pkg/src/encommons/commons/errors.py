"""encommons.commons.errors

Status codes shared by the in-process API, the HTTP wire protocol and the CLI.
"""

from __future__ import annotations

from enum import IntEnum


class StatusCode(IntEnum):
    OK = 0
    AUTH_FAILURE = 1
    UNKNOWN_TOKEN = 2
    TOKEN_USED = 3
    TOKEN_EXPIRED = 4
    RANGE_VIOLATION = 5
    TRANSPORT = 6


class CommonsError(RuntimeError):
    """Base error for Commons operations."""

    status: StatusCode = StatusCode.TRANSPORT


class AuthenticationError(CommonsError):
    status = StatusCode.AUTH_FAILURE


class UnknownTokenError(CommonsError):
    status = StatusCode.UNKNOWN_TOKEN

    def __init__(self) -> None:
        super().__init__("unknown token")


class TokenUsedError(CommonsError):
    status = StatusCode.TOKEN_USED

    def __init__(self) -> None:
        super().__init__("already used")


class TokenExpiredError(CommonsError):
    status = StatusCode.TOKEN_EXPIRED

    def __init__(self) -> None:
        super().__init__("token expired")


class RangeViolationError(CommonsError):
    status = StatusCode.RANGE_VIOLATION


class TransportError(CommonsError):
    status = StatusCode.TRANSPORT


ERRORS_BY_STATUS: dict[StatusCode, type[CommonsError]] = {
    StatusCode.AUTH_FAILURE: AuthenticationError,
    StatusCode.UNKNOWN_TOKEN: UnknownTokenError,
    StatusCode.TOKEN_USED: TokenUsedError,
    StatusCode.TOKEN_EXPIRED: TokenExpiredError,
    StatusCode.RANGE_VIOLATION: RangeViolationError,
    StatusCode.TRANSPORT: TransportError,
}


def error_for_status(status: int, message: str) -> CommonsError:
    """Rebuild the exception a remote instance raised."""

    cls = ERRORS_BY_STATUS.get(StatusCode(status), TransportError)
    err = cls.__new__(cls)
    CommonsError.__init__(err, message)
    return err

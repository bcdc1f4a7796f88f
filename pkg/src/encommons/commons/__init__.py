"""encommons.commons

The federated diagnosis key exchange: PHA registry, one-time upload
authorizations, provenance-tagged key storage, scoped downloads, and push/pull
replication between instances.
"""

from .auth import ADMIN_SIGNER, Credential, Signer, request_digest, verify_credential
from .errors import (
    AuthenticationError,
    CommonsError,
    RangeViolationError,
    StatusCode,
    TokenExpiredError,
    TokenUsedError,
    TransportError,
    UnknownTokenError,
    error_for_status,
)
from .export import EXPORT_HEADER, ExportFormatError, export_keys, read_export
from .instance import CommonsInstance, Peer, wall_clock
from .models import (
    DownloadFilter,
    KeyStoreRecord,
    OneTimeAuthorization,
    PHARecord,
    Subscription,
    UploadReceipt,
    UploadState,
    UploadStatus,
    assert_closed_schema,
)
from .store import Journal, JournalError, KeyStore

__all__ = [
    "ADMIN_SIGNER",
    "Credential",
    "Signer",
    "request_digest",
    "verify_credential",
    "StatusCode",
    "CommonsError",
    "AuthenticationError",
    "UnknownTokenError",
    "TokenUsedError",
    "TokenExpiredError",
    "RangeViolationError",
    "TransportError",
    "error_for_status",
    "PHARecord",
    "OneTimeAuthorization",
    "KeyStoreRecord",
    "DownloadFilter",
    "Subscription",
    "UploadState",
    "UploadStatus",
    "UploadReceipt",
    "assert_closed_schema",
    "Journal",
    "JournalError",
    "KeyStore",
    "CommonsInstance",
    "Peer",
    "wall_clock",
    "EXPORT_HEADER",
    "ExportFormatError",
    "export_keys",
    "read_export",
]

"""encommons.commons.auth

Request credentials: an Ed25519 signature over the SHA-256 digest of the
canonical JSON form of ``{"method": ..., "params": ...}``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
    PublicFormat,
)

from .errors import AuthenticationError

ADMIN_SIGNER = "admin"


@dataclass(frozen=True, slots=True)
class Credential:
    signer_id: str
    signature: bytes

    def to_dict(self) -> dict[str, str]:
        return {"signer_id": self.signer_id, "signature": self.signature.hex()}

    @classmethod
    def from_dict(cls, d: dict[str, str]) -> Credential:
        try:
            return cls(d["signer_id"], bytes.fromhex(d["signature"]))
        except (KeyError, ValueError) as e:
            raise AuthenticationError("malformed credential") from e


def request_digest(method: str, params: dict[str, Any]) -> bytes:
    canonical = json.dumps(
        {"method": method, "params": params}, sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).digest()


class Signer:
    """Holds a private key; PHAs and the instance administrator each own one."""

    def __init__(self, signer_id: str, private_key: Ed25519PrivateKey | None = None) -> None:
        self.signer_id = signer_id
        self._key = private_key or Ed25519PrivateKey.generate()

    @property
    def public_key(self) -> bytes:
        return self._key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    def private_bytes(self) -> bytes:
        return self._key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())

    @classmethod
    def from_private_bytes(cls, signer_id: str, raw: bytes) -> Signer:
        return cls(signer_id, Ed25519PrivateKey.from_private_bytes(raw))

    def sign(self, method: str, params: dict[str, Any]) -> Credential:
        return Credential(self.signer_id, self._key.sign(request_digest(method, params)))


def verify_credential(
    public_key: bytes, method: str, params: dict[str, Any], credential: Credential
) -> None:
    """Raise ``AuthenticationError`` unless ``credential`` signs this request."""

    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(
            credential.signature, request_digest(method, params)
        )
    except (InvalidSignature, ValueError) as e:
        raise AuthenticationError(f"bad credential for {credential.signer_id!r}") from e

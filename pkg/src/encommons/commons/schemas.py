"""encommons.commons.schemas

Request bodies for the HTTP transport. Byte strings travel as lowercase hex.
"""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from encommons.protocol.intervals import INTERVALS_PER_DAY

from .auth import Credential
from .models import DownloadFilter, filter_from_dict

HEX = r"^[0-9a-f]*$"


class _Body(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CredentialBody(_Body):
    signer_id: str = Field(..., min_length=1)
    signature: str = Field(..., pattern=HEX)

    def to_credential(self) -> Credential:
        return Credential(self.signer_id, bytes.fromhex(self.signature))


class RegisterPHARequest(_Body):
    pha_id: str = Field(..., min_length=1)
    public_key: str = Field(..., min_length=2, pattern=HEX)
    display_name: str = ""
    region_tags: list[str] = Field(default_factory=list)
    credential: CredentialBody


class IssueOTARequest(_Body):
    report_type: str = "confirmed"
    authorized_days: tuple[int, int]
    forward_tags: list[str] = Field(default_factory=list)
    region_tags: list[str] = Field(default_factory=list)
    ttl_days: int = 1
    commons_forwarding: bool = True
    credential: CredentialBody


class TEKBody(_Body):
    tek_hex: str = Field(..., pattern=HEX)
    day_start: int
    rolling_period: int = INTERVALS_PER_DAY


class UploadKeysRequest(_Body):
    token: str = Field(..., pattern=HEX)
    keys: list[TEKBody]


class UploadStatusRequest(_Body):
    token: str = Field(..., pattern=HEX)
    credential: CredentialBody


class FilterBody(_Body):
    since: int | None = None
    pha_ids: list[str] | None = None
    region_tags: list[str] | None = None
    report_types: list[str] | None = None

    def to_filter(self) -> DownloadFilter:
        return filter_from_dict(self.model_dump())


class DownloadKeysRequest(_Body):
    filter: FilterBody | None = None
    cursor: int = Field(0, ge=0)
    limit: int | None = Field(None, ge=1)


class ForwardKeysRequest(_Body):
    sender: str = Field(..., min_length=1)
    records: list[dict[str, Any]]

"""encommons.commons.client

Client for a remote Commons instance over HTTP. It implements the same
methods as ``CommonsInstance`` that federation needs, so a client can be
registered as a peer.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from typing import Any

import httpx

from encommons.logs import get_logger
from encommons.protocol.keys import TemporaryExposureKey
from encommons.protocol.matching import DiagnosisKey, ReportType

from .auth import Signer
from .errors import StatusCode, TransportError, error_for_status
from .instance import Auth, issue_params, register_params, status_params
from .models import (
    DownloadFilter,
    KeyStoreRecord,
    OneTimeAuthorization,
    PHARecord,
    UploadReceipt,
    UploadState,
    UploadStatus,
    filter_to_dict,
    key_from_dict,
    ota_from_dict,
    record_from_dict,
    record_to_dict,
)

logger = get_logger(__name__)

DEFAULT_TIMEOUT = 30.0


def _sign(auth: Auth, method: str, params: dict[str, Any]) -> dict[str, str]:
    cred = auth.sign(method, params) if isinstance(auth, Signer) else auth
    return cred.to_dict()


class CommonsClient:
    """Talks to one instance.

    Parameters
    ----------
    remote:
        Base URL (``http://host:port``) or a ready ``httpx.Client``; FastAPI's
        ``TestClient`` works too.
    """

    def __init__(self, remote: str | httpx.Client, *, timeout: float = DEFAULT_TIMEOUT) -> None:
        if isinstance(remote, httpx.Client):
            self._http = remote
        else:
            self._http = httpx.Client(base_url=remote, timeout=timeout)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> CommonsClient:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def _call(self, method: str, payload: dict[str, Any]) -> dict[str, Any]:
        try:
            resp = self._http.post(f"/{method}", json=payload)
            body = resp.json()
        except (httpx.HTTPError, ValueError) as e:
            logger.warning(f"{method} failed in transport: {e}")
            raise TransportError(f"{method}: {e}") from e
        if not isinstance(body, dict) or "status" not in body:
            raise TransportError(f"{method}: HTTP {resp.status_code} without status")
        status = int(body["status"])
        if status != StatusCode.OK:
            raise error_for_status(status, body.get("error", ""))
        return body

    def info(self) -> dict[str, Any]:
        try:
            return self._http.get("/").json()
        except (httpx.HTTPError, ValueError) as e:
            raise TransportError(str(e)) from e

    def register_pha(self, record: PHARecord, admin_credential: Auth) -> str:
        params = register_params(record)
        body = self._call(
            "register_pha",
            {**params, "credential": _sign(admin_credential, "register_pha", params)},
        )
        return body["pha_id"]

    def issue_ota(
        self,
        pha_auth: Auth,
        report_type: ReportType | str,
        authorized_days: tuple[int, int],
        forward_tags: Iterable[str] = (),
        region_tags: Iterable[str] = (),
        ttl_days: int = 1,
        commons_forwarding: bool = True,
    ) -> OneTimeAuthorization:
        params = issue_params(
            report_type, authorized_days, forward_tags, region_tags, ttl_days, commons_forwarding
        )
        body = self._call(
            "issue_ota", {**params, "credential": _sign(pha_auth, "issue_ota", params)}
        )
        return ota_from_dict(body["ota"])

    def upload_keys(self, token: bytes, teks: Sequence[TemporaryExposureKey]) -> UploadReceipt:
        body = self._call(
            "upload_keys",
            {
                "token": token.hex(),
                "keys": [
                    {"tek_hex": k.hex, "day_start": k.day_start, "rolling_period": k.rolling_period}
                    for k in teks
                ],
            },
        )
        return UploadReceipt(
            token_hex=body["token"],
            accepted=int(body["accepted"]),
            received_at=int(body["received_at"]),
            forwarded_to=tuple(body.get("forwarded_to", ())),
        )

    def check_upload_status(self, pha_auth: Auth, token: bytes) -> UploadStatus:
        params = status_params(token)
        body = self._call(
            "check_upload_status",
            {**params, "credential": _sign(pha_auth, "check_upload_status", params)},
        )
        return UploadStatus(UploadState(body["state"]), body.get("received_at"))

    def _download(
        self, flt: DownloadFilter | None, cursor: int, limit: int | None
    ) -> dict[str, Any]:
        return self._call(
            "download_keys",
            {
                "filter": filter_to_dict(flt) if flt is not None else None,
                "cursor": cursor,
                "limit": limit,
            },
        )

    def download_keys(
        self, flt: DownloadFilter | None = None, cursor: int = 0, limit: int | None = None
    ) -> tuple[list[DiagnosisKey], int]:
        body = self._download(flt, cursor, limit)
        return [key_from_dict(d) for d in body["keys"]], int(body["next_cursor"])

    def download_records(
        self, flt: DownloadFilter | None = None, cursor: int = 0, limit: int | None = None
    ) -> tuple[list[KeyStoreRecord], int]:
        body = self._download(flt, cursor, limit)
        return [record_from_dict(d) for d in body["records"]], int(body["next_cursor"])

    def receive_forwarded(self, sender: str, records: Sequence[KeyStoreRecord]) -> int:
        body = self._call(
            "forward_keys",
            {"sender": sender, "records": [record_to_dict(r) for r in records]},
        )
        return int(body["accepted"])


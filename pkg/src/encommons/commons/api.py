"""encommons.commons.api

HTTP transport: one POST route per wire method, JSON in and out. Every response
body carries ``status`` (0 on success, the ``StatusCode`` of the failure otherwise).
"""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from encommons.logs import get_logger
from encommons.protocol.keys import TemporaryExposureKey

from .errors import CommonsError, StatusCode, UnknownTokenError
from .instance import CommonsInstance
from .models import PHARecord, key_to_dict, ota_to_dict, record_from_dict, record_to_dict
from .schemas import (
    DownloadKeysRequest,
    ForwardKeysRequest,
    IssueOTARequest,
    RegisterPHARequest,
    UploadKeysRequest,
    UploadStatusRequest,
)

logger = get_logger(__name__)

WIRE_METHODS = (
    "register_pha",
    "issue_ota",
    "upload_keys",
    "check_upload_status",
    "download_keys",
    "forward_keys",
)


def _ok(**body: Any) -> dict[str, Any]:
    return {"status": int(StatusCode.OK), **body}


def _token(token_hex: str) -> bytes:
    try:
        return bytes.fromhex(token_hex)
    except ValueError:
        raise UnknownTokenError() from None


def create_app(instance: CommonsInstance) -> FastAPI:
    app = FastAPI(title=f"en-commons {instance.instance_id}")
    app.state.instance = instance

    @app.exception_handler(CommonsError)
    async def _commons_error(request: Request, exc: CommonsError) -> JSONResponse:
        logger.info(f"{request.url.path}: status {int(exc.status)}: {exc}")
        return JSONResponse({"status": int(exc.status), "error": str(exc)}, status_code=200)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            {"status": int(StatusCode.TRANSPORT), "error": f"malformed request: {exc.errors()}"},
            status_code=422,
        )

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(
            {"status": int(StatusCode.RANGE_VIOLATION), "error": str(exc)}, status_code=200
        )

    @app.get("/")
    def info() -> dict[str, Any]:
        return _ok(instance_id=instance.instance_id, methods=list(WIRE_METHODS))

    @app.post("/register_pha")
    def register_pha(body: RegisterPHARequest) -> dict[str, Any]:
        record = PHARecord(
            pha_id=body.pha_id,
            public_key=bytes.fromhex(body.public_key),
            display_name=body.display_name,
            region_tags=frozenset(body.region_tags),
        )
        pha_id = instance.register_pha(record, body.credential.to_credential())
        return _ok(pha_id=pha_id)

    @app.post("/issue_ota")
    def issue_ota(body: IssueOTARequest) -> dict[str, Any]:
        ota = instance.issue_ota(
            body.credential.to_credential(),
            body.report_type,
            body.authorized_days,
            forward_tags=body.forward_tags,
            region_tags=body.region_tags,
            ttl_days=body.ttl_days,
            commons_forwarding=body.commons_forwarding,
        )
        return _ok(ota=ota_to_dict(ota))

    @app.post("/upload_keys")
    def upload_keys(body: UploadKeysRequest) -> dict[str, Any]:
        teks = [
            TemporaryExposureKey.from_hex(k.tek_hex, k.day_start, k.rolling_period)
            for k in body.keys
        ]
        receipt = instance.upload_keys(_token(body.token), teks)
        return _ok(
            token=receipt.token_hex,
            accepted=receipt.accepted,
            received_at=receipt.received_at,
            forwarded_to=list(receipt.forwarded_to),
        )

    @app.post("/check_upload_status")
    def check_upload_status(body: UploadStatusRequest) -> dict[str, Any]:
        st = instance.check_upload_status(
            body.credential.to_credential(), _token(body.token)
        )
        return _ok(state=st.state.value, received_at=st.received_at)

    @app.post("/download_keys")
    def download_keys(body: DownloadKeysRequest) -> dict[str, Any]:
        flt = body.filter.to_filter() if body.filter is not None else None
        batch, next_cursor = instance.download_records(flt, body.cursor, body.limit)
        return _ok(
            keys=[key_to_dict(r.diagnosis_key) for r in batch],
            records=[record_to_dict(r) for r in batch],
            next_cursor=next_cursor,
        )

    @app.post("/forward_keys")
    def forward_keys(body: ForwardKeysRequest) -> dict[str, Any]:
        try:
            records = [record_from_dict(d) for d in body.records]
        except KeyError as e:
            raise ValueError(f"record missing field {e}") from e
        accepted = instance.receive_forwarded(body.sender, records)
        return _ok(accepted=accepted)

    return app

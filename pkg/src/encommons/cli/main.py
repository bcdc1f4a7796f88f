"""encommons.cli.main

``en-commons`` executable.

Exit codes: 0 success; 1-6 the Commons status code of a failed request
(1 auth, 2 unknown token, 3 token used, 4 token expired, 5 range violation,
6 transport); 2 is also argparse's usage error; 10 bad local input (file,
hex, config); 11 a scenario or vector check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

import numpy as np

from encommons.commons.auth import ADMIN_SIGNER, Signer
from encommons.commons.errors import CommonsError
from encommons.commons.export import (
    EXPORT_HEADER,
    ExportFormatError,
    export_frame,
    export_keys,
    read_export,
)
from encommons.commons.instance import CommonsInstance
from encommons.commons.models import DownloadFilter, PHARecord
from encommons.config import ConfigError, Settings
from encommons.device.receipts import ReceiptCodeError, check_receipt_code, make_receipt_code
from encommons.device.state import DeviceRole, DeviceState
from encommons.logs import configure_logging, get_logger
from encommons.protocol.intervals import IntervalError, day_start_of
from encommons.protocol.io import (
    ProtocolFileError,
    golden_rows,
    read_observation_log,
    verify_vectors,
    write_vectors,
)
from encommons.protocol.keys import (
    EntropySource,
    KeyScheduleError,
    SystemEntropy,
    TemporaryExposureKey,
    generate_tek,
)
from encommons.protocol.matching import ExposurePolicy, ReportType, match_exposures, score_risk
from encommons.reporting.export import to_csv, to_json
from encommons.sim.config import WorldConfigError, load_world_config, save_world_config
from encommons.sim.scenarios import ScenarioError, scenario_avery_bernie
from encommons.sim.sweep import sweep_slope, sweep_table
from encommons.sim.truth import random_world
from encommons.sim.world import run_world

from .estimate import estimate_bandwidth

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_BAD_INPUT = 10
EXIT_CHECK_FAILED = 11

_LOCAL_ERRORS = (
    ProtocolFileError,
    ExportFormatError,
    KeyScheduleError,
    IntervalError,
    ReceiptCodeError,
    WorldConfigError,
    ConfigError,
    OSError,
    ValueError,
)


def _entropy(seed: int | None) -> EntropySource:
    return np.random.default_rng(seed) if seed is not None else SystemEntropy()


def _client(remote: str):
    from encommons.commons.client import CommonsClient

    return CommonsClient(remote)


def _remote(args: argparse.Namespace, settings: Settings) -> str:
    return args.remote or f"http://{settings.host}:{settings.port}"


def _fmt(x: float) -> str:
    return f"{x:g}" if abs(x) < 1e6 else f"{x:.1f}"


"""
=== protocol tooling ===
"""


def cmd_keygen(args: argparse.Namespace, settings: Settings) -> int:
    tek = generate_tek(_entropy(args.seed), args.day)
    print(tek.hex)
    return EXIT_OK


def cmd_derive(args: argparse.Namespace, settings: Settings) -> int:
    tek = TemporaryExposureKey.from_hex(args.tek, args.day)
    body = golden_rows([tek]).to_csv(index=False, header=False, lineterminator="\n")
    sys.stdout.write(body)
    return EXIT_OK


def cmd_vectors(args: argparse.Namespace, settings: Settings) -> int:
    if args.action == "write":
        rng = _entropy(args.seed)
        teks = [generate_tek(rng, args.day + 96 * (k % 3)) for k in range(args.count)]
        p = write_vectors(golden_rows(teks), args.path)
        print(f"wrote {args.count * 96} vectors to {p}")
        return EXIT_OK

    mismatches = verify_vectors(args.path)
    for m in mismatches:
        print(f"line {m.line}: expected {m.expected_rpi_hex} got {m.actual_rpi_hex}")
    print(f"mismatches={len(mismatches)}")
    return EXIT_OK if not mismatches else EXIT_CHECK_FAILED


def _policy(args: argparse.Namespace) -> ExposurePolicy:
    return ExposurePolicy(
        max_attenuation_db=args.max_attenuation,
        min_total_duration_s=args.min_duration,
    )


def cmd_match(args: argparse.Namespace, settings: Settings) -> int:
    keys = read_export(args.keys)
    log = read_observation_log(args.log)
    policy = _policy(args)
    matches = match_exposures(keys, log, policy)
    for m in matches:
        print(
            f"match {m.key.tek.hex} day={m.key.tek.day_start} "
            f"type={m.key.report_type.value} pha={m.key.pha_id or '-'} "
            f"intervals={len(m.matched_intervals)} duration_s={_fmt(m.total_duration_s)} "
            f"min_attenuation_db={_fmt(m.min_attenuation_db)}"
        )
    print(f"risk {_fmt(float(score_risk(matches, policy)))}")
    return EXIT_OK


def cmd_receipt(args: argparse.Namespace, settings: Settings) -> int:
    if args.action == "make":
        tek = TemporaryExposureKey.from_hex(args.tek, day_start_of(args.interval))
        device = DeviceState(role=DeviceRole.LIGHTHOUSE_PASSIVE, current_tek=tek)
        print(make_receipt_code(device, args.interval))
        return EXIT_OK

    matched = check_receipt_code(args.code, read_export(args.keys))
    print(f"matched={'true' if matched else 'false'}")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace, settings: Settings) -> int:
    est = estimate_bandwidth(
        args.diagnoses_per_day, args.teks_per_diagnosis, args.bytes_per_tek, args.overhead
    )
    for line in est.lines():
        print(line)
    return EXIT_OK


"""
=== commons ===
"""


def _admin(settings: Settings) -> Signer:
    raw = settings.admin_key_path.read_text(encoding="utf-8").strip()
    return Signer.from_private_bytes(ADMIN_SIGNER, bytes.fromhex(raw))


def _pha(settings: Settings, pha_id: str) -> Signer:
    raw = settings.pha_key_path(pha_id).read_text(encoding="utf-8").strip()
    return Signer.from_private_bytes(pha_id, bytes.fromhex(raw))


def _new_signer(signer_id: str, seed: int | None) -> Signer:
    if seed is None:
        return Signer(signer_id)
    rng = np.random.default_rng([seed, *signer_id.encode("utf-8")])
    return Signer.from_private_bytes(signer_id, rng.bytes(32))


def open_instance(settings: Settings, seed: int | None = None) -> CommonsInstance:
    """Open the instance in ``settings.data_dir``, replaying its journal.

    With ``seed`` set, OTA tokens come from a seeded generator instead of the OS.
    """

    meta = json.loads(settings.instance_file.read_text(encoding="utf-8"))
    return CommonsInstance.create(
        meta["instance_id"],
        bytes.fromhex(meta["admin_public_key"]),
        journal_path=settings.journal_path,
        entropy=_entropy(seed) if seed is not None else None,
    )


def _filter(args: argparse.Namespace) -> DownloadFilter:
    types = None
    if args.report_type:
        types = frozenset(ReportType.parse(t) for t in args.report_type)
    return DownloadFilter(
        since=args.since,
        pha_ids=frozenset(args.pha) if args.pha else None,
        region_tags=frozenset(args.region) if args.region else None,
        report_types=types,
    )


def _parse_peer(spec: str) -> tuple[str, str]:
    name, sep, url = spec.partition("=")
    if not sep or not name or not url:
        raise ValueError(f"peer must look like ID=URL, got {spec!r}")
    return name, url


def cmd_commons(args: argparse.Namespace, settings: Settings) -> int:
    action = args.action

    if action == "init":
        if settings.instance_file.exists():
            raise ValueError(f"{settings.data_dir} already holds an instance")
        settings.data_dir.mkdir(parents=True, exist_ok=True)
        admin = _new_signer(ADMIN_SIGNER, args.seed)
        settings.admin_key_path.write_text(admin.private_bytes().hex() + "\n", encoding="utf-8")
        instance_id = args.instance or settings.instance_id
        meta = {"instance_id": instance_id, "admin_public_key": admin.public_key.hex()}
        to_json(meta, settings.instance_file)
        print(f"instance={instance_id} data_dir={settings.data_dir}")
        return EXIT_OK

    if action == "serve":
        import uvicorn

        from encommons.commons.api import create_app

        instance = open_instance(settings, args.seed)
        for spec in args.peer or ():
            name, url = _parse_peer(spec)
            instance.add_peer(name, _client(url))
        logger.info(f"serving {instance.instance_id} on {settings.host}:{settings.port}")
        uvicorn.run(
            create_app(instance),
            host=args.host or settings.host,
            port=args.port or settings.port,
        )
        return EXIT_OK

    if action == "subscribe":
        instance = open_instance(settings, args.seed)
        name, url = _parse_peer(args.peer)
        instance.add_peer(name, _client(url))
        flt = _filter(args)
        sub = next(
            (s for s in instance.subscriptions if s.remote_instance == name and s.filter == flt),
            None,
        ) or instance.subscribe(name, flt)
        pulled = instance.run_subscription(sub)
        cursor = next(
            s.cursor for s in instance.subscriptions if s.subscription_id == sub.subscription_id
        )
        print(f"pulled={pulled} cursor={cursor}")
        return EXIT_OK

    client = _client(_remote(args, settings))

    if action == "register":
        signer = _new_signer(args.pha, args.seed)
        record = PHARecord(
            pha_id=args.pha,
            public_key=signer.public_key,
            display_name=args.display_name,
            region_tags=frozenset(args.region or ()),
        )
        client.register_pha(record, _admin(settings))
        key_path = settings.pha_key_path(args.pha)
        key_path.parent.mkdir(parents=True, exist_ok=True)
        key_path.write_text(signer.private_bytes().hex() + "\n", encoding="utf-8")
        print(f"registered={args.pha}")
        return EXIT_OK

    if action == "issue":
        ota = client.issue_ota(
            _pha(settings, args.pha),
            ReportType.PROBABLE if args.probable else ReportType.CONFIRMED,
            (args.first, args.last),
            forward_tags=args.forward or (),
            region_tags=args.region or (),
            ttl_days=args.ttl_days,
            commons_forwarding=not args.no_forwarding,
        )
        print(f"token={ota.token.hex()} expiry={ota.expiry}")
        return EXIT_OK

    if action == "upload":
        teks = [k.tek for k in read_export(args.keys)] if args.keys else []
        tek_args = args.tek or []
        day_args = args.day or []
        if len(tek_args) != len(day_args):
            raise ValueError("every --tek needs a matching --day")
        teks += [
            TemporaryExposureKey.from_hex(t, d) for t, d in zip(tek_args, day_args, strict=True)
        ]
        receipt = client.upload_keys(bytes.fromhex(args.token), teks)
        forwarded = ",".join(receipt.forwarded_to) or "-"
        print(
            f"accepted={receipt.accepted} received_at={receipt.received_at} "
            f"forwarded={forwarded}"
        )
        return EXIT_OK

    if action == "status":
        st = client.check_upload_status(_pha(settings, args.pha), bytes.fromhex(args.token))
        line = f"state={st.state.value}"
        if st.received_at is not None:
            line += f" received_at={st.received_at}"
        print(line)
        return EXIT_OK

    if action == "download":
        records, cursor = client.download_records(_filter(args), args.cursor, args.limit)
        if args.out:
            export_keys(records, args.out)
        else:
            sys.stdout.write(EXPORT_HEADER + "\n")
            sys.stdout.write(
                export_frame(records).to_csv(index=False, header=False, lineterminator="\n")
            )
        print(f"next_cursor={cursor}", file=sys.stderr)
        return EXIT_OK

    if action == "forward":
        source = _client(args.source)
        records, _ = source.download_records(_filter(args), args.cursor, args.limit)
        accepted = client.receive_forwarded(args.sender, records)
        print(f"sent={len(records)} accepted={accepted}")
        return EXIT_OK

    raise ValueError(f"unknown commons action {action!r}")


"""
=== simulation ===
"""


def _world(args: argparse.Namespace):
    if args.config:
        cfg = load_world_config(args.config)
    else:
        cfg = random_world(
            args.seed if args.seed is not None else 0,
            n_people=args.people,
            n_places=args.places,
            days=args.days,
            n_diagnosed=args.diagnosed,
            lighthouse_fraction=args.lighthouses,
        )
    if args.seed is not None and cfg.seed != args.seed:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_sim(args: argparse.Namespace, settings: Settings) -> int:
    if args.action == "avery-bernie":
        try:
            result = scenario_avery_bernie(args.seed if args.seed is not None else 7)
        except ScenarioError as e:
            print(f"scenario failed: {e}", file=sys.stderr)
            return EXIT_CHECK_FAILED
        for line in result.lines():
            print(line)
        return EXIT_OK

    if args.action == "generate":
        cfg = _world(args)
        save_world_config(cfg, args.out)
        print(f"wrote {args.out}")
        return EXIT_OK

    if args.action == "run":
        metrics = run_world(_world(args))
        if args.out:
            to_json(metrics.to_dict(), args.out)
        print(json.dumps(metrics.to_dict(), sort_keys=True))
        return EXIT_OK

    # sweep
    base = _world(args)
    table = sweep_table(base, args.p or [0.2, 0.4, 0.8], args.trials, workers=args.workers)
    if args.out:
        to_csv(table, args.out)
    for p, rate in table.groupby("p")["detection_rate"].mean().items():
        print(f"p={p:g} mean_detection_rate={rate:.6f}")
    fit = sweep_slope(table)
    print(f"slope={fit.slope:.4f}")
    return EXIT_OK


"""
=== parser ===
"""


def _add_filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pha", action="append", help="only keys from this PHA (repeatable)")
    p.add_argument("--region", action="append", help="only keys with this region tag")
    p.add_argument("--report-type", action="append", choices=["confirmed", "probable"])
    p.add_argument("--since", type=int, help="only records received at or after this interval")
    p.add_argument("--cursor", type=int, default=0)
    p.add_argument("--limit", type=int)


def _add_world_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="world config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--people", type=int, default=1000)
    p.add_argument("--places", type=int, default=100)
    p.add_argument("--days", type=int, default=2)
    p.add_argument("--diagnosed", type=int, default=50)
    p.add_argument("--lighthouses", type=float, default=0.0, help="fraction of places")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="en-commons",
        description="Exposure notification keys, lighthouses and the federated Commons.",
    )
    parser.add_argument("--log-level", default="WARNING")
    parser.add_argument("--data-dir", type=Path, help="instance data directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="print a fresh TEK")
    p.add_argument("--day", type=int, default=0, help="day start interval")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("derive", help="print a TEK's 96 RPIs as vector lines")
    p.add_argument("--tek", required=True)
    p.add_argument("--day", type=int, required=True)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("vectors", help="write or verify a golden vector file")
    p.add_argument("action", choices=["write", "verify"])
    p.add_argument("path", type=Path)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--day", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_vectors)

    p = sub.add_parser("match", help="match an observation log against a key export")
    p.add_argument("--keys", type=Path, required=True)
    p.add_argument("--log", type=Path, required=True)
    p.add_argument("--max-attenuation", type=float, default=63.0)
    p.add_argument("--min-duration", type=float, default=300.0)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("receipt", help="make or check a lighthouse receipt code")
    rsub = p.add_subparsers(dest="action", required=True)
    r = rsub.add_parser("make")
    r.add_argument("--tek", required=True)
    r.add_argument("--interval", type=int, required=True)
    r = rsub.add_parser("check")
    r.add_argument("--code", required=True)
    r.add_argument("--keys", type=Path, required=True)
    p.set_defaults(func=cmd_receipt)

    p = sub.add_parser("estimate", help="daily download volume and matching work")
    p.add_argument("diagnoses_per_day", type=int)
    p.add_argument("teks_per_diagnosis", type=int)
    p.add_argument("--bytes-per-tek", type=int, default=16)
    p.add_argument("--overhead", type=float, default=1.0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("commons", help="run or talk to a Commons instance")
    csub = p.add_subparsers(dest="action", required=True)

    c = csub.add_parser("init")
    c.add_argument("--instance")
    c = csub.add_parser("serve")
    c.add_argument("--host")
    c.add_argument("--port", type=int)
    c.add_argument("--peer", action="append", help="ID=URL (repeatable)")
    c = csub.add_parser("subscribe")
    c.add_argument("--peer", required=True, help="ID=URL")
    _add_filter_flags(c)

    c = csub.add_parser("register")
    c.add_argument("--pha", required=True)
    c.add_argument("--display-name", default="")
    c.add_argument("--region", action="append")
    c = csub.add_parser("issue")
    c.add_argument("--pha", required=True)
    c.add_argument("--first", type=int, required=True)
    c.add_argument("--last", type=int, required=True)
    c.add_argument("--probable", action="store_true")
    c.add_argument("--forward", action="append")
    c.add_argument("--region", action="append")
    c.add_argument("--ttl-days", type=int, default=1)
    c.add_argument("--no-forwarding", action="store_true")
    c = csub.add_parser("upload")
    c.add_argument("--token", required=True)
    c.add_argument("--keys", type=Path, help="key export file")
    c.add_argument("--tek", action="append")
    c.add_argument("--day", type=int, action="append")
    c = csub.add_parser("status")
    c.add_argument("--pha", required=True)
    c.add_argument("--token", required=True)
    c = csub.add_parser("download")
    _add_filter_flags(c)
    c.add_argument("--out", type=Path)
    c = csub.add_parser("forward")
    c.add_argument("--source", required=True, help="URL to read records from")
    c.add_argument("--sender", required=True, help="instance id the records come from")
    _add_filter_flags(c)

    for name in ("register", "issue", "upload", "status", "download", "forward"):
        csub.choices[name].add_argument("--remote", help="instance URL")
    for c in csub.choices.values():
        c.add_argument("--seed", type=int, help="seed for signing keys and OTA tokens")
    p.set_defaults(func=cmd_commons)

    p = sub.add_parser("sim", help="run simulations")
    ssub = p.add_subparsers(dest="action", required=True)
    s = ssub.add_parser("avery-bernie")
    s.add_argument("--seed", type=int)
    s = ssub.add_parser("generate")
    _add_world_flags(s)
    s.add_argument("--out", type=Path, required=True)
    s = ssub.add_parser("run")
    _add_world_flags(s)
    s.add_argument("--out", type=Path)
    s = ssub.add_parser("sweep")
    _add_world_flags(s)
    s.add_argument("--p", type=float, action="append")
    s.add_argument("--trials", type=int, default=30)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", type=Path, help="CSV: p,trial,detection_rate")
    p.set_defaults(func=cmd_sim)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        settings = Settings.from_env().with_data_dir(args.data_dir)
        return int(args.func(args, settings))
    except CommonsError as e:
        print(f"error: {e}", file=sys.stderr)
        return int(e.status)
    except _LOCAL_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT

"""Command line entry points.

Subcommands: ``server`` (run a campaign), ``client`` (connect and apply
changes), ``mock-target`` (run the controllable target), ``plan`` (dry-run
the change schedule), ``export`` (store -> CSV, optionally with figures).

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .client import ClientConfig, load_client_config, run_client
from .definition import DefinitionError, load_definition, render_scalar, validate_definition
from .generator import iter_changes
from .mocktarget import MockTarget, MockTargetState
from .server import ServerConfig, run_server
from .store import StoreError, export_csv, open_store


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="configfuzz",
        description="Configuration fuzzer: push config changes to a target and record test results.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_server = sub.add_parser("server", help="run a campaign server")
    p_server.add_argument("--port", type=int, required=True, help="TCP port to listen on")
    p_server.add_argument("--definition", required=True, help="path to the definition JSON")
    p_server.add_argument("--store", required=True, help="path of the results database")
    p_server.add_argument("--host", default="127.0.0.1", help="address to bind (default loopback)")

    p_client = sub.add_parser("client", help="run a campaign client")
    p_client.add_argument("--config", help="path to the client config JSON")
    p_client.add_argument("--server-host", help="server address (alternative to --config)")
    p_client.add_argument("--server-port", type=int, help="server port")
    p_client.add_argument("--communicator", help="communicator script path or builtin:mock")
    p_client.add_argument(
        "--communicator-arg",
        action="append",
        default=[],
        metavar="ARG",
        help="argument passed to the communicator (repeatable)",
    )

    p_mock = sub.add_parser("mock-target", help="run the controllable mock target")
    p_mock.add_argument("--control-port", type=int, required=True)
    p_mock.add_argument(
        "--initial-state",
        help='JSON object, e.g. {"enabled":true,"service_port":80,"banner":"...","signature":"..."}',
    )

    p_plan = sub.add_parser("plan", help="print the change schedule without running")
    p_plan.add_argument("--definition", required=True)

    p_export = sub.add_parser("export", help="export a results store as CSV")
    p_export.add_argument("--store", required=True)
    p_export.add_argument("--out", required=True, help="CSV output path")
    p_export.add_argument("--figures", metavar="DIR", help="also render figures into DIR")

    return parser


def _cmd_server(args: argparse.Namespace) -> int:
    cfg = ServerConfig(
        bind_port=args.port,
        definition_path=args.definition,
        store_path=args.store,
        bind_host=args.host,
    )
    try:
        return run_server(cfg)
    except OSError as exc:
        logging.error("server failed: %s", exc)
        return 1


def _cmd_client(args: argparse.Namespace) -> int:
    if args.config:
        try:
            cfg = load_client_config(args.config)
        except (OSError, DefinitionError) as exc:
            print(f"client config: {exc}", file=sys.stderr)
            return 2
    else:
        if not (args.server_host and args.server_port and args.communicator):
            print(
                "client needs --config or all of --server-host/--server-port/--communicator",
                file=sys.stderr,
            )
            return 2
        cfg = ClientConfig(
            server_host=args.server_host,
            server_port=args.server_port,
            communicator=args.communicator,
            communicator_args=tuple(args.communicator_arg),
        )
    return run_client(cfg)


def _cmd_mock_target(args: argparse.Namespace) -> int:
    initial = MockTargetState()
    if args.initial_state:
        try:
            doc = json.loads(args.initial_state)
            initial = MockTargetState(
                enabled=bool(doc.get("enabled", initial.enabled)),
                service_port=int(doc.get("service_port", initial.service_port)),
                banner=str(doc.get("banner", initial.banner)),
                signature=str(doc.get("signature", initial.signature)),
            )
        except (ValueError, AttributeError) as exc:
            print(f"bad --initial-state: {exc}", file=sys.stderr)
            return 2
    try:
        target = MockTarget(args.control_port, initial)
        target.start()
    except OSError as exc:
        print(f"mock target: {exc}", file=sys.stderr)
        return 1
    print(f"mock target: control on 127.0.0.1:{target.control_port}", file=sys.stderr)
    try:
        import threading

        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        target.close()
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    try:
        definition = load_definition(args.definition)
    except (OSError, DefinitionError) as exc:
        print(f"definition: {exc}", file=sys.stderr)
        return 2
    violations = validate_definition(definition)
    if violations:
        for violation in violations:
            print(f"definition: {violation}", file=sys.stderr)
        return 2
    for change in iter_changes(definition):
        print(f"{change.change_id}\t{change.name}\t{render_scalar(change.value)}")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    try:
        with open_store(args.store) as store:
            csv_text = export_csv(store)
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(csv_text)
            if args.figures:
                from .report import render_figures

                for path in render_figures(store, args.figures):
                    print(path, file=sys.stderr)
    except (OSError, StoreError) as exc:
        print(f"export: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {
        "server": _cmd_server,
        "client": _cmd_client,
        "mock-target": _cmd_mock_target,
        "plan": _cmd_plan,
        "export": _cmd_export,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line client for the pipeline service.

The CLI does no modeling work itself: it assembles a request from the JSON
config file plus flag overrides, posts it to the service (in-process by
default, or a remote base URL via --server), and writes the returned
artifact files into the output directory.

Exit codes: 0 success, 1 config/schema error, 2 IO error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys
import warnings
from pathlib import Path

EXIT_CODES = {"config": 1, "io": 2, "numeric": 3}


class ServiceError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class ServiceClient:
    """Thin POST wrapper; in-process ASGI unless a server URL is given."""

    def __init__(self, server: str | None = None):
        if server is None:
            with warnings.catch_warnings():
                # the bundled test client import warns about its httpx pairing
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)
        else:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)

    def post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        if response.status_code == 200:
            return response.json()
        body = response.json()
        detail = body.get("detail")
        if isinstance(detail, dict) and "kind" in detail:
            raise ServiceError(detail["kind"], detail["message"])
        raise ServiceError("config", f"request rejected: {detail}")

    def close(self) -> None:
        self._client.close()


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--T", type=int, dest="T", help="override the MC sample size")
    common.add_argument("--quiet", action="store_true", help="suppress stdout messages")
    common.add_argument("--server", help="service base URL; default runs in process")

    parser = argparse.ArgumentParser(
        prog="elicitd",
        description="Elicit Beta-distribution uncertainty from binary decision records.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="generate a synthetic panel dataset")
    sub.add_parser("train", parents=[common], help="train a network on a dataset")

    p_elicit = sub.add_parser("elicit", parents=[common], help="elicit one distribution")
    p_elicit.add_argument("--input-id", help="record id to elicit from the dataset")
    p_elicit.add_argument("--input-file", type=Path, help="JSON array of feature values")
    p_elicit.add_argument("--params", type=Path, help="trained parameters file")
    p_elicit.add_argument("--network", type=Path, help="network description JSON")

    p_eval = sub.add_parser("evaluate", parents=[common], help="train/test diagnostics")
    p_eval.add_argument("--params", type=Path, help="skip training, use these parameters")
    p_eval.add_argument("--network", type=Path, help="network description JSON")

    p_report = sub.add_parser("report", parents=[common], help="plot-data CSVs from a report")
    p_report.add_argument("--input", type=Path, help="evaluation report.json path")
    p_report.add_argument(
        "--record", action="append", default=[], help="record id for a density curve (repeatable)"
    )
    return parser


def _load_config(args) -> dict:
    if args.config is None:
        return {}
    text = Path(args.config).read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ServiceError("config", f"config file is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ServiceError("config", "config file must hold a JSON object")
    return cfg


def _resolve_out(args, cfg: dict) -> Path:
    if args.out is not None:
        return args.out
    if cfg.get("out_dir"):
        return Path(cfg["out_dir"])
    env = os.environ.get("ELICITD_OUT")
    if env:
        return Path(env)
    return Path("out")


def _apply_overrides(args, cfg: dict) -> dict:
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.T is not None:
        for section in ("elicit", "evaluate"):
            cfg.setdefault(section, {})["T"] = args.T
    return cfg


def _read_json_file(path: Path, what: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ServiceError("io", f"{what} is not valid JSON: {exc}") from exc


def _params_b64(path: Path) -> str:
    return base64.b64encode(Path(path).read_bytes()).decode("ascii")


def _write_artifacts(bundle: dict, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in sorted(bundle.get("text", {}).items()):
        path = out_dir / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        written.append(path)
    for name, blob in sorted(bundle.get("binary_b64", {}).items()):
        path = out_dir / name
        path.write_bytes(base64.b64decode(blob))
        written.append(path)
    return written


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _cmd_synth(args, cfg, client, out_dir):
    payload = {"seed": cfg.get("seed", 0), "synth": cfg.get("synth") or {}}
    result = client.post("/synth", payload)
    written = _write_artifacts(result["artifacts"], out_dir)
    _say(args, f"synth: wrote {', '.join(p.name for p in written)} to {out_dir}")


def _cmd_train(args, cfg, client, out_dir):
    payload = {
        "seed": cfg.get("seed", 0),
        "dataset": cfg.get("dataset") or {},
        "network": cfg.get("network") or {},
        "train": cfg.get("train") or {},
    }
    result = client.post("/train", payload)
    written = _write_artifacts(result["artifacts"], out_dir)
    _say(args, f"train: final mean loss {result['final_loss']:.6f}")
    _say(args, f"train: wrote {', '.join(p.name for p in written)} to {out_dir}")


def _elicit_payload(args, cfg) -> dict:
    e = dict(cfg.get("elicit") or {})
    if args.input_id:
        e["record_id"] = args.input_id
        e.pop("features", None)
    input_file = args.input_file or e.pop("input_file", None)
    if input_file and "record_id" not in e:
        features = _read_json_file(Path(input_file), "input file")
        e["features"] = features
    params_path = args.params or e.pop("params", None)
    if params_path is None:
        raise ServiceError("config", "elicit needs a parameters file (--params or elicit.params)")
    network_path = args.network or e.pop("network", None)
    network = cfg.get("network") or {}
    if network_path is not None:
        network = _read_json_file(Path(network_path), "network description")
    e.pop("input_file", None)
    e.pop("params", None)
    e.pop("network", None)
    payload = {
        "seed": cfg.get("seed", 0),
        "params_b64": _params_b64(Path(params_path)),
        "network": network,
        "elicit": e,
    }
    if cfg.get("dataset"):
        payload["dataset"] = cfg["dataset"]
    return payload


def _cmd_elicit(args, cfg, client, out_dir):
    result = client.post("/elicit", _elicit_payload(args, cfg))
    written = _write_artifacts(result["artifacts"], out_dir)
    s = result["summary"]
    _say(
        args,
        f"elicit: alpha={s['alpha']:.6f} beta={s['beta']:.6f} "
        f"ci95=[{s['ci95'][0]:.6f}, {s['ci95'][1]:.6f}]",
    )
    if s["degenerate"]:
        print(
            "warning: degenerate fit (sample variance outside the Beta-fit range); "
            "alpha/beta are a flagged spike surrogate",
            file=sys.stderr,
        )
    _say(args, f"elicit: wrote {', '.join(p.name for p in written)} to {out_dir}")


def _cmd_evaluate(args, cfg, client, out_dir):
    e = dict(cfg.get("evaluate") or {})
    params_path = args.params or e.pop("params", None)
    network_path = args.network or e.pop("network", None)
    network = cfg.get("network") or {}
    if network_path is not None:
        network = _read_json_file(Path(network_path), "network description")
    payload = {
        "seed": cfg.get("seed", 0),
        "dataset": cfg.get("dataset") or {},
        "network": network,
        "train": cfg.get("train") or {},
        "evaluate": e,
    }
    if params_path is not None:
        payload["params_b64"] = _params_b64(Path(params_path))
    result = client.post("/evaluate", payload)
    written = _write_artifacts(result["artifacts"], out_dir)
    s = result["summary"]
    _say(
        args,
        f"evaluate: n={s['n_records']:g} splits={s['splits']} "
        f"mean-rule {s['accuracy_mean']:.2f}% ci95-rule {s['accuracy_ci95']:.2f}% "
        f"f={s['f_score']:.4f}",
    )
    _say(args, f"evaluate: wrote {', '.join(p.name for p in written)} to {out_dir}")


def _cmd_report(args, cfg, client, out_dir):
    r = dict(cfg.get("report") or {})
    input_path = args.input or r.pop("input", None) or (out_dir / "report.json")
    report_text = Path(input_path).read_text(encoding="utf-8")
    record_ids = list(r.get("record_ids", [])) + list(args.record)
    payload = {
        "report_json": report_text,
        "report": {
            "record_ids": record_ids,
            "density_points": r.get("density_points", 512),
        },
    }
    result = client.post("/report", payload)
    written = _write_artifacts(result["artifacts"], out_dir)
    _say(args, f"report: wrote {', '.join(p.name for p in written)} to {out_dir}")


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "elicit": _cmd_elicit,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    client = None
    try:
        cfg = _apply_overrides(args, _load_config(args))
        out_dir = _resolve_out(args, cfg)
        client = ServiceClient(args.server)
        _COMMANDS[args.command](args, cfg, client, out_dir)
        return 0
    except ServiceError as exc:
        print(f"error ({exc.kind}): {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.kind, 1)
    except OSError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return 2
    finally:
        if client is not None:
            client.close()


if __name__ == "__main__":
    sys.exit(main())

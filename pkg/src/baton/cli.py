"""Operator CLI. Every subcommand is a thin client over the HTTP service:
by default requests run against an in-process app; pass --server to target a
running instance. Config precedence: flags > --config file > defaults.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path
from typing import Any, Optional

import httpx

from .service.app import create_app


async def _post_async(server: Optional[str], path: str, payload: dict[str, Any]) -> httpx.Response:
    if server:
        async with httpx.AsyncClient(base_url=server.rstrip("/"), timeout=None) as client:
            return await client.post(path, json=payload)
    transport = httpx.ASGITransport(app=create_app())
    async with httpx.AsyncClient(
        transport=transport, base_url="http://baton.local", timeout=None
    ) as client:
        return await client.post(path, json=payload)


def _post(args: argparse.Namespace, path: str, payload: dict[str, Any]) -> int:
    resp = asyncio.run(_post_async(args.server, path, payload))
    if resp.status_code >= 400:
        try:
            body = resp.json()
        except json.JSONDecodeError:
            body = {"error": "HTTPError", "message": resp.text}
        detail = body.get("detail", body)
        print(json.dumps({"status": resp.status_code, **detail}, sort_keys=True), file=sys.stderr)
        return 1
    print(json.dumps(resp.json(), indent=2, sort_keys=True))
    return 0


def _load_config(path: Optional[str]) -> dict[str, Any]:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _setting(args: argparse.Namespace, config: dict[str, Any], name: str, default: Any) -> Any:
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _backend_spec(args: argparse.Namespace, config: dict[str, Any]) -> dict[str, Any]:
    path = _setting(args, config, "backend_config", None)
    if path is None and "backend" in config:
        return config["backend"]
    if path is None:
        raise SystemExit("--backend-config is required (JSON file with backend settings)")
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _budget(args: argparse.Namespace, config: dict[str, Any]) -> dict[str, int]:
    return {
        "h_r": int(_setting(args, config, "h_r", 16384)),
        "h_s": int(_setting(args, config, "h_s", 2048)),
        "turns_t": int(_setting(args, config, "turns", 12)),
    }


def _params(args: argparse.Namespace, config: dict[str, Any]) -> dict[str, Any]:
    params: dict[str, Any] = {
        "temperature": float(_setting(args, config, "temperature", 1.0)),
        "top_p": float(_setting(args, config, "top_p", 1.0)),
    }
    max_tokens = _setting(args, config, "max_tokens", None)
    if max_tokens is not None:
        params["max_tokens"] = int(max_tokens)
    return params


def cmd_decode(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    options: dict[str, Any] = dict(config.get("decoder_options", {}))
    if args.h_chunk is not None:
        options["h_chunk"] = args.h_chunk
    if args.force_phrase is not None:
        options["force_phrase"] = args.force_phrase
    if args.stop_on_stable is not None:
        options["stop_on_stable_answer"] = args.stop_on_stable
    rsa_opts = dict(options.get("rsa", {}))
    dsm_opts = dict(options.get("dsm", {}))
    for key, value in (
        ("pool_m", args.pool_m), ("sample_k", args.sample_k), ("rounds", args.rsa_rounds),
        ("inner", args.inner),
    ):
        if value is not None:
            rsa_opts[key] = value
    for key, value in (
        ("n_gen", args.n_gen), ("n_verify", args.n_verify), ("rounds", args.dsm_rounds),
        ("inner", args.inner),
    ):
        if value is not None:
            dsm_opts[key] = value
    if rsa_opts:
        options["rsa"] = rsa_opts
    if dsm_opts:
        options["dsm"] = dsm_opts

    payload = {
        "dataset": _setting(args, config, "dataset", None),
        "out_dir": _setting(args, config, "out", None),
        "decoder": _setting(args, config, "decoder", "rc"),
        "budget": _budget(args, config),
        "params": _params(args, config),
        "samples": int(_setting(args, config, "samples", 1)),
        "seed": int(_setting(args, config, "seed", 0)),
        "backend": _backend_spec(args, config),
        "templates_dir": _setting(args, config, "templates", None),
        "summary_detail": _setting(args, config, "summary_detail", "two_paragraphs"),
        "decoder_options": options,
        "concurrency": int(_setting(args, config, "concurrency", 1)),
    }
    if not payload["dataset"] or not payload["out_dir"]:
        raise SystemExit("--dataset and --out are required")
    return _post(args, "/v1/decode", payload)


def cmd_rollouts(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    payload = {
        "dataset": _setting(args, config, "dataset", None),
        "out_dir": _setting(args, config, "out", None),
        "t_train": int(_setting(args, config, "t_train", 3)),
        "n_summ": int(_setting(args, config, "n_summ", 2)),
        "k_group": int(_setting(args, config, "k", 8)),
        "budget": _budget(args, config),
        "params": _params(args, config),
        "mode": str(_setting(args, config, "mode", "rc")).replace("-", "_"),
        "use_replay": bool(_setting(args, config, "use_replay", False)),
        "epoch": int(_setting(args, config, "epoch", 1)),
        "seed": int(_setting(args, config, "seed", 0)),
        "backend": _backend_spec(args, config),
        "buffer_path": _setting(args, config, "replay", None),
        "buffer_capacity": _setting(args, config, "buffer_capacity", None),
        "baseline_kind": _setting(args, config, "baseline_kind", "self_refine"),
        "templates_dir": _setting(args, config, "templates", None),
        "summary_detail": _setting(args, config, "summary_detail", "two_paragraphs"),
    }
    if not payload["dataset"] or not payload["out_dir"]:
        raise SystemExit("--dataset and --out are required")
    return _post(args, "/v1/rollouts", payload)


def cmd_eval(args: argparse.Namespace) -> int:
    return _post(args, "/v1/eval", {"run_dir": args.run_dir})


def cmd_cost(args: argparse.Namespace) -> int:
    t_min, t_max = 1, 12
    if args.t:
        if ".." in args.t:
            lo, hi = args.t.split("..", 1)
            t_min, t_max = int(lo), int(hi)
        else:
            t_min = t_max = int(args.t)
    payload = {
        "c": args.c,
        "h_r": args.h_r if args.h_r is not None else 16384,
        "h_s": args.h_s if args.h_s is not None else 2048,
        "t_min": t_min,
        "t_max": t_max,
        "out_path": args.out,
    }
    return _post(args, "/v1/cost/sweep", payload)


def cmd_score(args: argparse.Namespace) -> int:
    return _post(args, "/v1/score", {"trace": args.trace, "answer": args.answer})


def cmd_annotate_strategies(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    payload = {
        "run_dir": args.run_dir,
        "backend": _backend_spec(args, config),
        "templates_dir": _setting(args, config, "templates", None),
        "max_tokens": int(_setting(args, config, "max_tokens", 512)),
    }
    return _post(args, "/v1/annotate/strategies", payload)


def cmd_annotate_difficulty(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    payload = {
        "dataset": _setting(args, config, "dataset", None),
        "out_path": _setting(args, config, "out", None),
        "backend": _backend_spec(args, config),
        "k": int(_setting(args, config, "k", 64)),
        "seed": int(_setting(args, config, "seed", 0)),
        "budget": _budget(args, config),
        "params": _params(args, config),
        "templates_dir": _setting(args, config, "templates", None),
    }
    if not payload["dataset"] or not payload["out_path"]:
        raise SystemExit("--dataset and --out are required")
    return _post(args, "/v1/annotate/difficulty", payload)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="baton")
    parser.add_argument("--server", help="base URL of a running service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file supplying defaults for any flag")
        p.add_argument("--dataset")
        p.add_argument("--out")
        p.add_argument("--backend-config", dest="backend_config")
        p.add_argument("--templates")
        p.add_argument("--seed", type=int)
        p.add_argument("--h-r", dest="h_r", type=int)
        p.add_argument("--h-s", dest="h_s", type=int)
        p.add_argument("--turns", type=int)
        p.add_argument("--temperature", type=float)
        p.add_argument("--top-p", dest="top_p", type=float)
        p.add_argument("--max-tokens", dest="max_tokens", type=int)
        p.add_argument("--summary-detail", dest="summary_detail",
                       choices=["answer_only", "one_paragraph", "two_paragraphs", "multi_paragraph"])

    p_decode = sub.add_parser("decode", help="run a decoder over a dataset")
    common(p_decode)
    p_decode.add_argument("--decoder", choices=[
        "rc", "self_refine", "self_verify", "budget_force", "delethink", "rsa", "dsm"])
    p_decode.add_argument("--samples", type=int)
    p_decode.add_argument("--concurrency", type=int)
    p_decode.add_argument("--stop-on-stable", dest="stop_on_stable", type=int)
    p_decode.add_argument("--h-chunk", dest="h_chunk", type=int)
    p_decode.add_argument("--force-phrase", dest="force_phrase")
    p_decode.add_argument("--inner", choices=["plain", "rc"])
    p_decode.add_argument("--pool-m", dest="pool_m", type=int)
    p_decode.add_argument("--sample-k", dest="sample_k", type=int)
    p_decode.add_argument("--rsa-rounds", dest="rsa_rounds", type=int)
    p_decode.add_argument("--n-gen", dest="n_gen", type=int)
    p_decode.add_argument("--n-verify", dest="n_verify", type=int)
    p_decode.add_argument("--dsm-rounds", dest="dsm_rounds", type=int)
    p_decode.set_defaults(func=cmd_decode)

    p_roll = sub.add_parser("rollouts", help="export a GRPO-ready training batch")
    common(p_roll)
    p_roll.add_argument("--t-train", dest="t_train", type=int)
    p_roll.add_argument("--n-summ", dest="n_summ", type=int)
    p_roll.add_argument("--k", type=int)
    p_roll.add_argument("--mode", choices=[
        "rc", "baseline_trace", "baseline-trace", "summary_reward", "summary-reward", "both"])
    p_roll.add_argument("--use-replay", dest="use_replay", action="store_const", const=True)
    p_roll.add_argument("--epoch", type=int)
    p_roll.add_argument("--replay", help="replay buffer path (default <out>/buffer.jsonl)")
    p_roll.add_argument("--buffer-capacity", dest="buffer_capacity", type=int)
    p_roll.add_argument("--baseline-kind", dest="baseline_kind",
                        choices=["self_refine", "self_verify"])
    p_roll.set_defaults(func=cmd_rollouts)

    p_eval = sub.add_parser("eval", help="emit metric CSVs for a finished run")
    p_eval.add_argument("run_dir")
    p_eval.set_defaults(func=cmd_eval)

    p_cost = sub.add_parser("cost", help="emit an analytic cost sweep")
    p_cost.add_argument("--c", type=int, default=1000)
    p_cost.add_argument("--h-r", dest="h_r", type=int)
    p_cost.add_argument("--h-s", dest="h_s", type=int)
    p_cost.add_argument("--t", help="turn range, e.g. 1..12 or 12")
    p_cost.add_argument("--out", help="CSV output path")
    p_cost.set_defaults(func=cmd_cost)

    p_score = sub.add_parser("score", help="score a trace against a reference answer")
    p_score.add_argument("trace")
    p_score.add_argument("answer")
    p_score.set_defaults(func=cmd_score)

    p_ann = sub.add_parser("annotate-strategies", help="label summary-use strategies in a run")
    p_ann.add_argument("run_dir")
    p_ann.add_argument("--config")
    p_ann.add_argument("--backend-config", dest="backend_config")
    p_ann.add_argument("--templates")
    p_ann.add_argument("--max-tokens", dest="max_tokens", type=int)
    p_ann.set_defaults(func=cmd_annotate_strategies)

    p_diff = sub.add_parser("annotate-difficulty",
                            help="per-problem mean reward over k attempts (weight file)")
    common(p_diff)
    p_diff.add_argument("--k", type=int)
    p_diff.set_defaults(func=cmd_annotate_difficulty)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8321)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

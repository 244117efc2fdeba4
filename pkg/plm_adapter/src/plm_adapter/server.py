"""Long-running plugin process speaking the model wire protocol.

Reads line-delimited JSON requests on stdin and answers one JSON line per
request on stdout:

  {"op": "hello", "role": "ner"|"re", "version": 1}  -> {"ok": true}
  {"op": "train", "examples": [...]}                 -> {"ok": true}
  {"op": "predict", "input": ...}                    -> {"spans": [...]} | {"relation", "p", "dist"}
  {"op": "save"|"load", "path": ...}                 -> {"ok": true}

Failures (including out-of-memory) are reported as {"error": "..."} replies;
the process never exits silently on a handled request.
"""

from __future__ import annotations

import argparse
import json
import sys

import torch

from .config import AdapterConfig
from .models import NerAdapter, ReAdapter

PROTOCOL_VERSION = 1


def build_config(argv: list[str] | None = None) -> AdapterConfig:
    parser = argparse.ArgumentParser(prog="plm-adapter", description=__doc__)
    parser.add_argument("--model", default=AdapterConfig.model_name,
                        help="scratch://tiny or a locally cached checkpoint")
    parser.add_argument("--lr", type=float, default=AdapterConfig.learning_rate)
    parser.add_argument("--batch-size", type=int, default=AdapterConfig.batch_size)
    parser.add_argument("--epochs", type=int, default=AdapterConfig.epochs)
    parser.add_argument("--device", default=AdapterConfig.device)
    parser.add_argument("--seed", type=int, default=AdapterConfig.seed)
    parser.add_argument("--max-len", type=int, default=AdapterConfig.max_len)
    parser.add_argument("--hidden-size", type=int, default=AdapterConfig.hidden_size)
    parser.add_argument("--num-layers", type=int, default=AdapterConfig.num_layers)
    args = parser.parse_args(argv)
    return AdapterConfig(
        model_name=args.model, learning_rate=args.lr,
        batch_size=args.batch_size, epochs=args.epochs, device=args.device,
        seed=args.seed, max_len=args.max_len, hidden_size=args.hidden_size,
        num_layers=args.num_layers,
    )


def handle_request(msg: dict, state: dict, config: AdapterConfig) -> dict:
    op = msg.get("op")
    if op == "hello":
        role = msg.get("role")
        if role not in ("ner", "re"):
            return {"error": f"unsupported role {role!r}"}
        if msg.get("version") != PROTOCOL_VERSION:
            return {"error": f"unsupported protocol version {msg.get('version')!r}"}
        state["role"] = role
        state["model"] = NerAdapter(config) if role == "ner" else ReAdapter(config)
        return {"ok": True}

    model = state.get("model")
    if model is None:
        return {"error": "handshake required before any other request"}

    if op == "train":
        model.train(msg["examples"])
        return {"ok": True}
    if op == "predict":
        if state["role"] == "ner":
            return {"spans": model.predict(msg["input"]["tokens"])}
        return model.predict(msg["input"]["text"])
    if op == "save":
        torch.save(model.state(), msg["path"])
        return {"ok": True}
    if op == "load":
        blob = torch.load(msg["path"], weights_only=False)
        if blob["kind"] != state["role"]:
            return {"error": f"saved state is {blob['kind']!r}, "
                             f"process role is {state['role']!r}"}
        model.load_state(blob)
        return {"ok": True}
    return {"error": f"unknown op {op!r}"}


def serve(config: AdapterConfig,
          stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    state: dict = {}
    for line in stdin:
        if not line.strip():
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            reply = {"error": f"malformed request: {exc}"}
        else:
            try:
                reply = handle_request(msg, state, config)
            except torch.cuda.OutOfMemoryError as exc:
                reply = {"error": f"out of memory: {exc}"}
            except Exception as exc:  # noqa: BLE001 - structured, never silent
                reply = {"error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
    return 0


def main(argv: list[str] | None = None) -> int:
    return serve(build_config(argv))


if __name__ == "__main__":
    sys.exit(main())

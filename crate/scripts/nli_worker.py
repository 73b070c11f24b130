#!/usr/bin/env python3
"""NLI classification worker for faithnli.

Request body:  {"pairs": [[premise, hypothesis], ...], "dropout": bool, "seeds": [int, ...]}
Response body: {"probs": [[entailment, neutral, contradiction], ...]}

seeds[i] belongs to pairs[i]. With dropout on, every dropout layer is
active and torch is reseeded before each pair, so a pair's output depends
only on (pair, seed) and not on the batch it arrives in.

  --stdio        one JSON request per line on stdin, one response per line on stdout
  --serve PORT   the same bodies over HTTP POST
  --fake         deterministic hash-based probabilities, no model (protocol
                 tests); also selected by --checkpoint fake
"""

import argparse
import hashlib
import json
import math
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from threading import Lock


class FakeModel:
    def classify(self, pairs, dropout, seeds):
        out = []
        for (premise, hypothesis), seed in zip(pairs, seeds):
            key = f"{premise}\0{hypothesis}"
            if dropout:
                key += f"\0{seed}"
            digest = hashlib.sha256(key.encode()).digest()
            logits = [(b / 255.0 - 0.5) * 6.0 for b in digest[:3]]
            m = max(logits)
            exp = [math.exp(x - m) for x in logits]
            total = sum(exp)
            out.append([x / total for x in exp])
        return out


class TorchModel:
    def __init__(self, checkpoint, device, max_length, batch_size):
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self.torch = torch
        self.device = device or ("cuda" if torch.cuda.is_available() else "cpu")
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        self.model = AutoModelForSequenceClassification.from_pretrained(checkpoint).to(self.device)
        self.model.eval()
        self.max_length = max_length
        self.batch_size = batch_size
        names = {i: n.lower() for i, n in self.model.config.id2label.items()}
        try:
            self.order = [
                next(i for i, n in names.items() if n.startswith(prefix))
                for prefix in ("entail", "neutral", "contra")
            ]
        except StopIteration:
            sys.exit(f"cannot map labels {names} to entailment/neutral/contradiction")

    def _forward(self, pairs):
        enc = self.tokenizer(
            [p for p, _ in pairs],
            [h for _, h in pairs],
            truncation="only_first",
            max_length=self.max_length,
            padding=True,
            return_tensors="pt",
        ).to(self.device)
        with self.torch.no_grad():
            logits = self.model(**enc).logits.float()
        probs = self.torch.softmax(logits, dim=-1)[:, self.order]
        return probs.cpu().tolist()

    def classify(self, pairs, dropout, seeds):
        if not dropout:
            self.model.eval()
            out = []
            for i in range(0, len(pairs), self.batch_size):
                out.extend(self._forward(pairs[i : i + self.batch_size]))
            return out
        self.model.train()
        try:
            out = []
            for pair, seed in zip(pairs, seeds):
                self.torch.manual_seed(seed)
                out.extend(self._forward([pair]))
            return out
        finally:
            self.model.eval()


def renormalise(rows):
    return [[x / sum(row) for x in row] for row in rows]


def handle(model, body):
    pairs = body["pairs"]
    seeds = body.get("seeds") or [0] * len(pairs)
    if len(seeds) != len(pairs):
        raise ValueError(f"{len(seeds)} seeds for {len(pairs)} pairs")
    return {"probs": renormalise(model.classify(pairs, bool(body.get("dropout")), seeds))}


def serve_stdio(model):
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            reply = handle(model, json.loads(line))
        except Exception as e:  # reported to the caller, worker keeps running
            reply = {"error": str(e)}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


def serve_http(model, port):
    lock = Lock()

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length))
                with lock:
                    reply, status = handle(model, body), 200
            except (ValueError, KeyError, TypeError) as e:
                reply, status = {"error": str(e)}, 400
            except Exception as e:
                reply, status = {"error": str(e)}, 500
            data = json.dumps(reply).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, fmt, *args):
            sys.stderr.write(fmt % args + "\n")

    ThreadingHTTPServer(("0.0.0.0", port), Handler).serve_forever()


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--checkpoint", default="MoritzLaurer/DeBERTa-v3-large-mnli-fever-anli-ling-wanli")
    ap.add_argument("--device")
    ap.add_argument("--max-length", type=int, default=512)
    ap.add_argument("--batch-size", type=int, default=16)
    ap.add_argument("--fake", action="store_true")
    mode = ap.add_mutually_exclusive_group(required=True)
    mode.add_argument("--stdio", action="store_true")
    mode.add_argument("--serve", type=int, metavar="PORT")
    args = ap.parse_args()

    if args.fake or args.checkpoint == "fake":
        model = FakeModel()
    else:
        model = TorchModel(args.checkpoint, args.device, args.max_length, args.batch_size)
    if args.stdio:
        serve_stdio(model)
    else:
        serve_http(model, args.serve)


if __name__ == "__main__":
    main()

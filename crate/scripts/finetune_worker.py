#!/usr/bin/env python3
"""Fine-tuning worker for faithnli.

Reads one JSON command per line on stdin and answers each with one JSON
line on stdout:

  {"cmd": "begin", "init", "train", "val", "run_dir", "config", "warmup_steps"}
  {"cmd": "train_until", "step"}   -> {"ok": true, "loss": mean train loss since the last call}
  {"cmd": "val_loss"}              -> {"ok": true, "loss": mean validation loss}
  {"cmd": "save", "step"}          -> {"ok": true, "checkpoint": path}

Failures are answered with {"ok": false, "error": message}. A non-finite
loss is sent as null.
"""

import argparse
import json
import math
import os
import random
import sys

LABELS = {"entailment": "entail", "neutral": "neutral", "contradiction": "contra"}


def read_jsonl(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


class Trainer:
    def __init__(self, micro_batch, max_length, device):
        self.micro_batch = micro_batch
        self.max_length = max_length
        self.device = device
        self.state = None

    def begin(self, msg):
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer, get_linear_schedule_with_warmup

        cfg = msg["config"]
        torch.manual_seed(cfg["seed"])
        random.seed(cfg["seed"])
        device = self.device or ("cuda" if torch.cuda.is_available() else "cpu")
        tok = AutoTokenizer.from_pretrained(msg["init"])
        model = AutoModelForSequenceClassification.from_pretrained(msg["init"]).to(device)
        names = {i: n.lower() for i, n in model.config.id2label.items()}
        label_ids = {
            label: next(i for i, n in names.items() if n.startswith(prefix)) for label, prefix in LABELS.items()
        }
        decay = [p for n, p in model.named_parameters() if not any(k in n for k in ("bias", "LayerNorm"))]
        no_decay = [p for n, p in model.named_parameters() if any(k in n for k in ("bias", "LayerNorm"))]
        opt = torch.optim.AdamW(
            [{"params": decay, "weight_decay": cfg["weight_decay"]}, {"params": no_decay, "weight_decay": 0.0}],
            lr=cfg["learning_rate"],
        )
        sched = get_linear_schedule_with_warmup(opt, msg["warmup_steps"], max(cfg["total_steps"], 1))
        self.state = {
            "torch": torch,
            "tok": tok,
            "model": model,
            "device": device,
            "opt": opt,
            "sched": sched,
            "labels": label_ids,
            "train": read_jsonl(msg["train"]),
            "val": read_jsonl(msg["val"]),
            "batch": cfg["effective_batch_size"],
            "run_dir": msg["run_dir"],
            "step": 0,
            "cursor": 0,
            "order": [],
        }
        os.makedirs(msg["run_dir"], exist_ok=True)
        return {}

    def _encode(self, rows):
        s = self.state
        enc = s["tok"](
            [r["premise"] for r in rows],
            [r["hypothesis"] for r in rows],
            truncation="only_first",
            max_length=self.max_length,
            padding=True,
            return_tensors="pt",
        ).to(s["device"])
        labels = s["torch"].tensor([s["labels"][r["label"]] for r in rows], device=s["device"])
        return enc, labels

    def _next_rows(self, n):
        s = self.state
        rows = []
        while len(rows) < n:
            if s["cursor"] >= len(s["order"]):
                s["order"] = list(range(len(s["train"])))
                random.shuffle(s["order"])
                s["cursor"] = 0
            rows.append(s["train"][s["order"][s["cursor"]]])
            s["cursor"] += 1
        return rows

    def train_until(self, msg):
        s = self.state
        model, opt, sched = s["model"], s["opt"], s["sched"]
        model.train()
        losses = []
        while s["step"] < msg["step"]:
            rows = self._next_rows(s["batch"])
            opt.zero_grad()
            total = 0.0
            for i in range(0, len(rows), self.micro_batch):
                chunk = rows[i : i + self.micro_batch]
                enc, labels = self._encode(chunk)
                loss = model(**enc, labels=labels).loss * (len(chunk) / len(rows))
                loss.backward()
                total += loss.item()
            if not math.isfinite(total):
                return {"loss": None}
            s["torch"].nn.utils.clip_grad_norm_(model.parameters(), 1.0)
            opt.step()
            sched.step()
            s["step"] += 1
            losses.append(total)
        return {"loss": sum(losses) / len(losses) if losses else 0.0}

    def val_loss(self, msg):
        s = self.state
        model = s["model"]
        model.eval()
        total, n = 0.0, 0
        with s["torch"].no_grad():
            for i in range(0, len(s["val"]), self.micro_batch):
                chunk = s["val"][i : i + self.micro_batch]
                enc, labels = self._encode(chunk)
                total += model(**enc, labels=labels).loss.item() * len(chunk)
                n += len(chunk)
        loss = total / max(n, 1)
        return {"loss": loss if math.isfinite(loss) else None}

    def save(self, msg):
        s = self.state
        path = os.path.join(s["run_dir"], f"checkpoint-{msg['step']}")
        s["model"].save_pretrained(path)
        s["tok"].save_pretrained(path)
        return {"checkpoint": path}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--micro-batch", type=int, default=8, help="examples per forward pass; gradients accumulate")
    ap.add_argument("--max-length", type=int, default=512)
    ap.add_argument("--device")
    args = ap.parse_args()
    trainer = Trainer(args.micro_batch, args.max_length, args.device)
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            msg = json.loads(line)
            cmd = msg["cmd"]
            if cmd != "begin" and trainer.state is None:
                raise RuntimeError("begin must come first")
            reply = getattr(trainer, cmd)(msg)
            reply["ok"] = True
        except Exception as e:  # reported to the caller
            reply = {"ok": False, "error": f"{type(e).__name__}: {e}"}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""End-to-end pipeline demo against an in-process mock inference server.

Spins up a tiny HTTP server that speaks the generation/embedding protocol,
then drives the real CLI through generate -> aggregate -> score -> analyze
on the bundled fixture data.  Everything lands in ./demo_output/.

Usage: python3 scripts/run_mock_pipeline.py [--out demo_output]
"""

import argparse
import hashlib
import json
import random
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURE = REPO_ROOT / "tests" / "fixtures" / "test_split.tsv"

from defgen.cli import main as cli_main  # noqa: E402


def stable_vector(text: str, dimension: int = 8) -> list[float]:
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
    rng = random.Random(seed)
    return [rng.uniform(-1.0, 1.0) for _ in range(dimension)]


class DemoHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        if self.path == "/generate":
            prompt = body["prompt"]
            # a fake definition generator: the target word plus a
            # prompt-dependent template, so senses get competing candidates
            word = prompt.rstrip("?").split()[-1]
            variants = [
                f"asia joka liittyy sanaan {word}",
                f"väline tai ilmiö nimeltä {word}",
                f"{word} arkisessa merkityksessä",
            ]
            pick = int(hashlib.sha256(prompt.encode()).hexdigest(), 16) % len(variants)
            payload = {"text": variants[pick]}
        elif self.path == "/v1/embeddings":
            payload = {
                "data": [
                    {"index": i, "embedding": stable_vector(t)}
                    for i, t in enumerate(body["input"])
                ]
            }
        elif self.path == "/embed_tokens":
            tokens = body["text"].split()
            payload = {"tokens": tokens,
                       "embeddings": [stable_vector(t) for t in tokens]}
        else:
            self.send_response(404)
            self.end_headers()
            return
        data = json.dumps(payload).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def run(out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    httpd = ThreadingHTTPServer(("127.0.0.1", 0), DemoHandler)
    base_url = f"http://127.0.0.1:{httpd.server_address[1]}"
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    print(f"mock inference server at {base_url}")

    generations = out_dir / "generations.tsv"
    predictions = out_dir / "predictions.tsv"
    report = out_dir / "report.json"
    analysis = out_dir / "analysis.json"

    steps = [
        ["generate", "--split", str(FIXTURE), "--out", str(generations),
         "--url", base_url, "--model", "demo-gen",
         "--cache", str(out_dir / "gen_cache.jsonl")],
        ["aggregate", "--generations", str(generations), "--out", str(predictions),
         "--url", base_url, "--model", "demo-emb",
         "--cache", str(out_dir / "emb_cache.jsonl")],
        ["score", "--pred", str(predictions), "--gold", str(FIXTURE),
         "--out", str(report), "--emb-url", base_url, "--emb-model", "demo-emb"],
        ["analyze", "--pred", str(predictions), "--gold", str(FIXTURE),
         "--out", str(analysis)],
    ]
    try:
        for step in steps:
            print(f"\n$ defgen {' '.join(step)}")
            code = cli_main(step)
            if code != 0:
                return code
    finally:
        httpd.shutdown()
        httpd.server_close()
    print(f"\nwrote {generations}, {predictions}, {report}, {analysis}")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("demo_output"))
    args = parser.parse_args()
    sys.exit(run(args.out))

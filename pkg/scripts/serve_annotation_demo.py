#!/usr/bin/env python3
"""Serve the annotation backend on demo data from the bundled fixture.

Builds slightly-off predictions for every gold sense (so there is something
to criticize), samples them into tasks, and serves the REST API.  Point the
browser frontend (frontend/) at the printed URL.

Usage: python3 scripts/serve_annotation_demo.py [--port 8000] [--store labels.jsonl]
"""

import argparse
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURE = REPO_ROOT / "tests" / "fixtures" / "test_split.tsv"

from defgen.aggregation import Triplet  # noqa: E402
from defgen.annotation import AnnotationSession, LabelStore, sample_tasks, serve  # noqa: E402
from defgen.corpus import read_split  # noqa: E402
from defgen.harness import load_gold  # noqa: E402


def run(port: int, store: str | None, sample_n: int, seed: int) -> int:
    split = read_split(FIXTURE)
    gold = load_gold(split)
    predictions = [
        Triplet(g.word, g.sense_id, f"{g.word} eli {g.definition}") for g in gold
    ]
    usages = {}
    for rec in split.records:
        usages.setdefault((rec.word, rec.sense_id), rec.usage)
    tasks = sample_tasks(predictions, gold, sample_n, seed, "demo-system", usages)
    session = AnnotationSession(tasks=tasks, store=LabelStore(store))
    serve(session, port)
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--store", default=None, help="Label store JSONL path.")
    parser.add_argument("--sample-n", type=int, default=0)
    parser.add_argument("--seed", type=int, default=13)
    args = parser.parse_args()
    sys.exit(run(args.port, args.store, args.sample_n, args.seed))

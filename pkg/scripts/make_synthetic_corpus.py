#!/usr/bin/env python3
"""Generate the synthetic tri-lingual corpus used by the demo pipeline.

Writes documents, topics, qrels, per-language translation tables, and
passage/query token embeddings under --output. Same seed, same bytes.
"""

import argparse
from pathlib import Path

from xlir.synthetic import generate, write_corpus


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--num-docs", type=int, default=500)
    parser.add_argument("--num-topics", type=int, default=10)
    args = parser.parse_args()

    corpus = generate(seed=args.seed, num_docs=args.num_docs, num_topics=args.num_topics)
    paths = write_corpus(Path(args.output), corpus)
    for name, path in sorted(paths.items()):
        print(f"{name}\t{path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

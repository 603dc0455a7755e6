#!/usr/bin/env python3
"""Token-count plugin for `orbit stats --tokenizer exec:...`.

Reads one JSON string per line on stdin and prints one token count per line.
Needs the `tiktoken` package and its encoding files (downloaded on first use
unless TIKTOKEN_CACHE_DIR already holds them).
"""
import argparse
import json
import sys


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--encoding", default="cl100k_base")
    args = parser.parse_args()
    try:
        import tiktoken
    except ImportError:
        print("tiktoken is not installed (pip install tiktoken)", file=sys.stderr)
        return 2
    enc = tiktoken.get_encoding(args.encoding)
    out = sys.stdout
    for line in sys.stdin:
        if not line.strip():
            continue
        out.write(f"{len(enc.encode(json.loads(line), disallowed_special=()))}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())

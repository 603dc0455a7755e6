"""Largest-remainder (Hamilton) apportionment oracle for the mixer.

Exact rational arithmetic; leftover units go to the largest fractional
remainders, ties to the lower index.
"""
import json
import pathlib
import random
from fractions import Fraction


def apportion(weights, total):
    s = sum(weights)
    quotas = [Fraction(total * w, s) for w in weights]
    counts = [q.numerator // q.denominator for q in quotas]
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def main() -> None:
    rng = random.Random(20250301)
    out = pathlib.Path(__file__).resolve().parents[2] / "fixtures" / "mix" / "cases.jsonl"
    cases = [([1, 1, 1], 30), ([1, 2, 4], 35), ([1, 1, 1], 10), ([3, 3], 7), ([5], 0)]
    while len(cases) < 200:
        n = rng.randint(1, 8)
        weights = [rng.choice([1, 2, 3, 4, 7, 10, 13, 100, rng.randint(1, 1000)]) for _ in range(n)]
        total = rng.choice([0, 1, rng.randint(0, 50), rng.randint(0, 5000), rng.randint(0, 10**6)])
        cases.append((weights, total))
    with out.open("w") as f:
        for weights, total in cases:
            f.write(json.dumps({"weights": weights, "total": total, "counts": apportion(weights, total)}) + "\n")


if __name__ == "__main__":
    main()

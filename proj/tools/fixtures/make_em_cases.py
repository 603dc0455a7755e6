#!/usr/bin/env python3
"""Writes fixtures/em/cases.jsonl: 50 (predicted, golds) pairs labelled by the
reference exact-match normalizer used by open-domain QA evaluation scripts."""
import json
import pathlib
import random
import re
import string

ROOT = pathlib.Path(__file__).resolve().parents[2]


def normalize_answer(s):
    def remove_articles(text):
        return re.sub(r"\b(a|an|the)\b", " ", text)

    def white_space_fix(text):
        return " ".join(text.split())

    def remove_punc(text):
        exclude = set(string.punctuation)
        return "".join(ch for ch in text if ch not in exclude)

    return white_space_fix(remove_articles(remove_punc(s.lower())))


def em_check(prediction, golden_answers):
    p = normalize_answer(prediction)
    return int(any(normalize_answer(g) == p for g in golden_answers))


FIXED = [
    ("Southeast", ["Southeast"]),
    ("The Immense Journey", ["Immense Journey"]),
    ("Beijing", ["Sydney and Athens"]),
    ("  sydney AND athens. ", ["Sydney and Athens"]),
    ("86 minutes", ["86 min"]),
    ("U.S.A.", ["USA"]),
    ("an apple", ["apple", "pear"]),
    ("Theatre", ["the atre"]),
    ("A-ha", ["aha"]),
    ("the", ["a"]),
    ("", [""]),
    ("Loren Eiseley", ["loren eiseley", "Eiseley"]),
    ("Cheyenne, Wyoming", ["Cheyenne Wyoming"]),
    ("Cheyenne", ["Cheyenne, Wyoming"]),
    ("1957", ["1957."]),
    ("café", ["cafe"]),
    ("Rock 'n' roll", ["rock n roll"]),
    ("Anne of Green Gables", ["Anne of Green Gables"]),
    ("another one", ["other one"]),
    ("The The", [""]),
    ("the\u2014end", ["\u2014end"]),
    ("\u00c9COLE normale", ["\u00e9cole normale"]),
    ("the\u00a0Beatles", ["Beatles"]),
]

WORDS = ["the", "a", "an", "Paris", "Tony", "Leondis", "journey", "Immense", "86", "minutes", "U.S.", "state's",
         "capital", "Wyoming", "(film)", "2017", "and", "of", "North-East", "an!", "A.", "\tTHE"]


def main():
    rng = random.Random(7)
    cases = [{"predicted": p, "golds": g} for p, g in FIXED]
    while len(cases) < 50:
        base = [rng.choice(WORDS) for _ in range(rng.randint(1, 4))]
        pred = " ".join(base)
        golds = []
        for _ in range(rng.randint(1, 3)):
            variant = list(base)
            op = rng.randint(0, 3)
            if op == 0:
                variant = [w.upper() for w in variant]
            elif op == 1:
                variant.insert(0, rng.choice(["the", "a", "an"]))
            elif op == 2:
                variant.append(rng.choice([".", ",", "!", "?"]))
            else:
                variant = [rng.choice(WORDS) for _ in range(rng.randint(1, 3))]
            golds.append(" ".join(variant))
        cases.append({"predicted": pred, "golds": golds})
    out = ROOT / "fixtures" / "em" / "cases.jsonl"
    with out.open("w") as f:
        for c in cases:
            c["normalized"] = normalize_answer(c["predicted"])
            c["em"] = em_check(c["predicted"], c["golds"])
            f.write(json.dumps(c, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()

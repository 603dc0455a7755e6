#!/usr/bin/env python3
"""Builds the agent case-study fixtures: scripted model emissions and the
search caches the replays read. Run from the repository root."""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parents[2]
FIX = ROOT / "fixtures"
TS = "2025-03-01T00:00:00Z"

FRAMES_Q = ("What compass direction (of the 4 cardinal and 4 ordinal directions) is the capital city of the "
            "state which houses the Jackson Hole Mountain Resort in relation to the centre of the state?")
ORBIT_Q = ("In which 1957 nature essay collection does a chapter describing a boy's unexpected discovery of a "
           "sunfish in a city creek---illustrating how preconceptions blind observers to novel phenomena---appear, "
           "written by an anthropologist-naturalist who later became president of the American Institute of "
           "Human Paleontology?")

CASES = {
    "frames": {
        "question": FRAMES_Q,
        "golds": ["Southeast"],
        "backend": "frames.json",
        "emissions": [
            "<think>Three hops: the state with Jackson Hole Mountain Resort, its capital, then the capital's "
            "direction from the state's centre. Jackson Hole is in Wyoming; check the capital.</think>\n"
            "<search>capital of Wyoming</search>",
            "<think>The capital is Cheyenne. Now the centre of Wyoming.</think>\n"
            "<search>geographic center of Wyoming</search>",
            "<think>No explicit centre. Ask where Cheyenne lies within the state instead.</think>\n"
            "<search>direction of Cheyenne, Wyoming relative to center of state</search>",
            "<think>Cheyenne sits near the southeast corner, so it is southeast of the centre.</think>\n"
            "<answer>Southeast</answer>",
        ],
    },
    "orbit": {
        "question": ORBIT_Q,
        "golds": ["The Immense Journey"],
        "backend": "orbit.json",
        "emissions": [
            "<think>Find the 1957 collection with the sunfish chapter; start from the essay content.</think>\n"
            "<search>1957 nature essay collection sunfish city creek</search>",
            "<think>Only almanac pages. Try the episode itself.</think>\n"
            "<search>sunfish in a city creek essay 1957</search>",
            "<think>The results are about the sailboat. Anchor on the author instead.</think>\n"
            "<search>anthropologist-naturalist who became president of American Institute of Human Paleontology"
            "</search>",
            "<think>Loren Eiseley and The Immense Journey appear. Confirm the year.</think>\n"
            "<search>Loren Eiseley 1957 essay collection</search>",
            "<think>Published in 1957 by Loren Eiseley; every clue fits.</think>\n"
            "<answer>The Immense Journey</answer>",
        ],
    },
}


def norm(q):
    return " ".join(q.split()).lower()


def cache_lines(backend_file, k=5):
    data = json.loads((FIX / "search" / backend_file).read_text())
    lines = []
    for query, results in data["queries"].items():
        rows = []
        for i, r in enumerate(results[:k]):
            rows.append({"title": r["title"], "snippet": r["snippet"], "url": r["url"], "backend": "ddgs", "rank": i + 1})
        lines.append(json.dumps({"query_norm": norm(query), "k": k, "results": rows, "ts": TS}, ensure_ascii=False))
    return lines


def main():
    out = FIX / "agent"
    out.mkdir(exist_ok=True)
    questions = []
    for name, case in CASES.items():
        scenario = {"entries": [{"match": {"any": True}, "response": e} for e in case["emissions"]]}
        (out / f"{name}_scenario.json").write_text(json.dumps(scenario, indent=2, ensure_ascii=False) + "\n")
        (out / f"{name}_search_cache.jsonl").write_text("\n".join(cache_lines(case["backend"])) + "\n")
        questions.append(json.dumps({"id": name, "question": case["question"], "golds": case["golds"]},
                                    ensure_ascii=False))
    (out / "case_questions.jsonl").write_text("\n".join(questions) + "\n")


if __name__ == "__main__":
    main()

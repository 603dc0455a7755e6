#!/usr/bin/env python3
"""Writes fixtures/pipeline/: an offline end-to-end run over the wiki fixture.

20 harvested seeds -> 13 candidates (7 discarded by the generation gates)
-> 8 self-verified (8 FULL, 3 PARTIAL, 2 INCORRECT) -> 8 externally
verified (6 in round one, 2 after escalation). Every provider is scripted and
every web page is a fixture route, so reruns are byte-identical.
"""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parents[2]
OUT = ROOT / "fixtures" / "pipeline"

FILMS = ["The Emoji Movie", "Cars 3", "Coco (2017 film)", "Despicable Me 3", "The Boss Baby",
         "The Lego Batman Movie", "The Lego Ninjago Movie"]
SCOPES = ["Hubble Space Telescope", "James Webb Space Telescope", "Spitzer Space Telescope",
          "Chandra X-ray Observatory", "Kepler space telescope", "Herschel Space Observatory",
          "Planck (spacecraft)"]
ESSAYS = ["The Immense Journey", "Notes of a Native Son", "Slouching Towards Bethlehem",
          "A Room of One's Own", "Pilgrim at Tinker Creek", "The Sea Around Us"]


def seeds_in_harvest_order():
    out = []
    for i in range(7):
        for group in (FILMS, SCOPES, ESSAYS):
            if i < len(group):
                out.append(group[i])
    return out[:20]


def wiki(title):
    return "https://en.wikipedia.org/wiki/" + title.replace(" ", "_")


# Valid candidates: seed -> (answer, clues, extra evidence URLs).
VALID = {
    "The Emoji Movie": ("86 minutes",
                        ["set inside a smartphone messaging app", "directed by Tony Leondis",
                         "protagonist with a malfunctioning expression", "voice cast includes T.J. Miller",
                         "studio later won an Oscar for Spider-Verse"],
                        ["https://en.wikipedia.org/wiki/Tony_Leondis", "https://en.wikipedia.org/wiki/T._J._Miller",
                         "https://www.britannica.com/topic/Sony-Pictures-Animation", "https://www.imdb.com/title/tt4877122/"]),
    "Hubble Space Telescope": ("Edwin Hubble",
                               ["namesake of a telescope launched in 1990", "astronomer who measured galactic recession",
                                "born in Marshfield, Missouri", "worked at Mount Wilson Observatory",
                                "a law of cosmic expansion bears his name"],
                               ["https://en.wikipedia.org/wiki/Edwin_Hubble", "https://www.nasa.gov/mission/hubble/",
                                "https://www.britannica.com/biography/Edwin-Hubble", "https://hubblesite.org/about"]),
    "The Immense Journey": ("Loren Eiseley",
                            ["author of a 1957 essay collection", "anthropologist at the University of Pennsylvania",
                             "wrote about a fish-like ancestor leaving the water", "born in Lincoln, Nebraska",
                             "later wrote The Night Country"],
                            ["https://en.wikipedia.org/wiki/Loren_Eiseley", "https://www.britannica.com/biography/Loren-Eiseley",
                             "https://www.upenn.edu/about/history", "https://www.poetryfoundation.org/poets/loren-eiseley"]),
    "Cars 3": ("Chris Cooper",
               ["voiced a veteran mentor in a 2017 racing sequel", "won an Academy Award for Adaptation",
                "appeared in American Beauty", "born in Kansas City, Missouri", "played a scientist in Lone Star"],
               ["https://en.wikipedia.org/wiki/Chris_Cooper", "https://www.imdb.com/name/nm0177896/",
                "https://www.britannica.com/biography/Chris-Cooper", "https://www.oscars.org/oscars/ceremonies/2003"]),
    "James Webb Space Telescope": ("Ariane 5",
                                   ["launched an infrared observatory on Christmas Day 2021",
                                    "heavy-lift rocket flown from Kourou", "retired in 2023",
                                    "developed under the European Space Agency", "carried the Rosetta probe"],
                                   ["https://en.wikipedia.org/wiki/Ariane_5", "https://www.esa.int/Enabling_Support/Space_Transportation/Ariane",
                                    "https://www.nasa.gov/mission/webb/", "https://www.britannica.com/technology/Ariane-rocket"]),
    "Notes of a Native Son": ("Harlem",
                              ["birthplace of the author of a 1955 essay collection", "neighborhood in Upper Manhattan",
                               "center of a 1920s cultural renaissance", "home of the Apollo Theater",
                               "site of riots in 1943 described in the title essay"],
                              ["https://en.wikipedia.org/wiki/Harlem", "https://en.wikipedia.org/wiki/James_Baldwin",
                               "https://www.britannica.com/place/Harlem-New-York-City", "https://www.apollotheater.org/about/history/"]),
    "Coco (2017 film)": ("Día de Muertos",
                         ["holiday central to a 2017 Pixar film", "celebrated on November 1 and 2",
                          "features marigold offerings", "inscribed by UNESCO in 2008",
                          "associated with sugar skulls"],
                         ["https://en.wikipedia.org/wiki/Day_of_the_Dead", "https://ich.unesco.org/en/RL/00054",
                          "https://www.britannica.com/topic/Day-of-the-Dead", "https://www.nationalgeographic.com/culture/article/dia-de-los-muertos"]),
    "Spitzer Space Telescope": ("Lyman Spitzer",
                                ["namesake of an infrared observatory retired in 2020",
                                 "proposed space telescopes in 1946", "Princeton astrophysicist",
                                 "founded the Princeton Plasma Physics Laboratory", "born in Toledo, Ohio"],
                                ["https://en.wikipedia.org/wiki/Lyman_Spitzer", "https://www.pppl.gov/about/history",
                                 "https://www.britannica.com/biography/Lyman-Spitzer-Jr", "https://www.nasa.gov/mission/spitzer/"]),
    "Slouching Towards Bethlehem": ("Joan Didion",
                                    ["author of a 1968 essay collection", "wrote The Year of Magical Thinking",
                                     "born in Sacramento, California", "worked at Vogue",
                                     "title borrowed from a Yeats poem"],
                                    ["https://en.wikipedia.org/wiki/Joan_Didion", "https://www.britannica.com/biography/Joan-Didion",
                                     "https://www.poetryfoundation.org/poems/43290/the-second-coming", "https://www.vogue.com/article/joan-didion"]),
    "Despicable Me 3": ("Balthazar Bratt",
                        ["villain of a 2017 animated sequel", "former 1980s child star",
                         "voiced by Trey Parker", "fights with a keytar", "wears a purple jumpsuit"],
                        ["https://en.wikipedia.org/wiki/Trey_Parker", "https://www.imdb.com/title/tt3469046/",
                         "https://www.britannica.com/topic/Despicable-Me-3", "https://www.illumination.com/movie/despicable-me-3/"]),
    "Chandra X-ray Observatory": ("Subrahmanyan Chandrasekhar",
                                  ["namesake of an X-ray observatory launched in 1999", "Nobel laureate in Physics 1983",
                                   "derived a white dwarf mass limit", "born in Lahore",
                                   "taught at the University of Chicago"],
                                  ["https://en.wikipedia.org/wiki/Subrahmanyan_Chandrasekhar",
                                   "https://www.nobelprize.org/prizes/physics/1983/chandrasekhar/facts/",
                                   "https://www.britannica.com/biography/Subrahmanyan-Chandrasekhar", "https://chandra.harvard.edu/about/"]),
    "A Room of One's Own": ("Girton College",
                            ["women's college where lectures behind a 1929 essay were given", "part of the University of Cambridge",
                             "founded in 1869", "admitted men from 1979", "sister lectures given at Newnham"],
                            ["https://en.wikipedia.org/wiki/Girton_College,_Cambridge", "https://www.girton.cam.ac.uk/about",
                             "https://www.britannica.com/topic/A-Room-of-Ones-Own", "https://www.cam.ac.uk/about-the-university/history"]),
    "Kepler space telescope": ("Johannes Kepler",
                               ["namesake of an exoplanet-hunting telescope", "formulated three laws of planetary motion",
                                "assistant to Tycho Brahe", "born in Weil der Stadt",
                                "wrote Astronomia nova"],
                               ["https://en.wikipedia.org/wiki/Johannes_Kepler", "https://www.britannica.com/biography/Johannes-Kepler",
                                "https://www.nasa.gov/mission/kepler/", "https://pubmed.ncbi.nlm.nih.gov/00000001/"]),
}
# Discarded by the generation gates: seed -> kind.
DISCARDED = {
    "The Boss Baby": "too_few_evidence",
    "Herschel Space Observatory": "too_few_evidence",
    "Pilgrim at Tinker Creek": "too_few_evidence",
    "The Lego Batman Movie": "parse_failure",
    "Planck (spacecraft)": "parse_failure",
    "The Sea Around Us": "answer_equals_seed",
    "The Lego Ninjago Movie": "missing_section",
}
PARTIAL = {"Cars 3", "Coco (2017 film)", "Despicable Me 3"}
INCORRECT = {"A Room of One's Own", "Kepler space telescope"}
ESCALATED = {"Notes of a Native Son", "Chandra X-ray Observatory"}  # round one says INCORRECT
REASKED = "Spitzer Space Telescope"  # round one verdict needs one re-ask
REVISED = {"The Immense Journey": "Loren C. Eiseley"}  # adopted revised answer
DEAD_URL = "https://www.vogue.com/article/joan-didion"  # 404 in the web fixture

DOMAIN_OF = {**{t: "TV Shows & Movies" for t in FILMS}, **{t: "Science & Technology" for t in SCOPES},
             **{t: "Art" for t in ESSAYS}}


def question_for(seed, clues):
    return ("Which answer fits all of the following: " + "; ".join(clues) +
            "? (Each clue must be verified separately.)")


def escape(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_output(question, answer, clues, urls):
    items = "\n".join(f"        <item>{escape(c)} :cite[{min(i + 1, len(urls))}]</item>" for i, c in enumerate(clues))
    ev = ", ".join(f"[{i + 1}]: {u}" for i, u in enumerate(urls))
    return (f"<output>\n    <inverted_question>{escape(question)}</inverted_question>\n"
            f"    <answer>{escape(answer)}</answer>\n    <verification_checklist>\n{items}\n"
            f"    </verification_checklist>\n    <evidence_urls>{ev}</evidence_urls>\n</output>")


def contains(pattern, response, error=None):
    e = {"match": {"contains": pattern}, "response": response}
    if error:
        e["error"] = error
    return e


def main():
    seeds = seeds_in_harvest_order()
    assert set(seeds) == set(VALID) | set(DISCARDED), set(seeds) ^ (set(VALID) | set(DISCARDED))
    generator, verifier, classifier, judge_s, judge_l, labeler, decomposer = ([] for _ in range(7))
    pages = {}
    final = []
    for seed in seeds:
        gen_key = "SEED: " + seed
        if seed in DISCARDED:
            kind = DISCARDED[seed]
            if kind == "too_few_evidence":
                urls = [wiki(seed), "https://www.britannica.com/x", "https://example.org/a"]
                generator.append(contains(gen_key, render_output("Q about hidden seed?", "Some answer",
                                                                 ["c1", "c2", "c3"], urls)))
            elif kind == "parse_failure":
                for _ in range(3):
                    generator.append(contains(gen_key, "I could not produce the requested format this time."))
            elif kind == "missing_section":
                for _ in range(3):
                    generator.append(contains(gen_key, "<output><inverted_question>Q?</inverted_question></output>"))
            else:
                urls = [wiki(seed)] + [f"https://example.org/{k}" for k in range(5)]
                generator.append(contains(gen_key, render_output("Which book is hidden here?", seed,
                                                                 ["a", "b", "c", "d", "e"], urls)))
            continue
        answer, clues, extra = VALID[seed]
        urls = [wiki(seed)] + extra
        question = question_for(seed, clues)
        generator.append(contains(gen_key, render_output(question, answer, clues, urls)))
        qa = f"QUESTION: {question}\nANSWER: {answer}\n"
        revised = REVISED.get(seed, "none")
        report = (f"Searched the web and Wikipedia.\n" +
                  "\n".join(f"{i + 1}. {c}: confirmed by {urls[min(i, len(urls) - 1)]}" for i, c in enumerate(clues)) +
                  f"\nRevised answer: {revised}\n")
        verifier.append(contains(qa, report))
        verdict = "PARTIAL" if seed in PARTIAL else "INCORRECT" if seed in INCORRECT else "FULL"
        classifier.append(contains(qa, f"The report checks each criterion.\nVERDICT: {verdict}"))
        if verdict != "FULL":
            continue
        final_answer = REVISED.get(seed, answer)
        final.append(seed)
        for u in urls:
            if u == DEAD_URL:
                continue
            pages[u] = (f"<html><head><title>{escape(seed)} - source</title></head><body>"
                        f"<nav>Main menu</nav><h1>{escape(seed)}</h1>"
                        f"<p>{escape(seed)} is connected to {escape(final_answer)}.</p>"
                        + "".join(f"<p>{escape(c)}.</p>" for c in clues) +
                        "<footer>Footer links</footer></body></html>")
        ans_key = f"QUESTION: {question}\n\nEVIDENCE:"
        verdict_key = f"QUESTION: {question}\n\nGROUND TRUTH ANSWER: {final_answer}\n"
        judge_s.append(contains(ans_key, f"Based on the evidence, the answer is {final_answer}."))
        if seed in ESCALATED:
            judge_s.append(contains(verdict_key, "The response is vague.\nJudge: INCORRECT"))
            judge_l.append(contains(ans_key, f"The evidence points to {final_answer}."))
            judge_l.append(contains(verdict_key, "Matches the ground truth.\nJudge: CORRECT"))
        elif seed == REASKED:
            judge_s.append(contains(verdict_key, "The response looks right to me."))
            judge_s.append(contains(verdict_key, "Matches.\nJudge: CORRECT"))
        else:
            judge_s.append(contains(verdict_key, "The candidate matches the ground truth.\nJudge: CORRECT"))
        labeler.append(contains(f"ANSWER: {final_answer}\n", "Named entity.\nTYPE: Person"))
        decomposer.append(contains(f"QUESTION: {question}\n", "\n".join(f"{i + 1}. {c}?" for i, c in enumerate(clues))))

    scen = OUT / "scenarios"
    scen.mkdir(parents=True, exist_ok=True)
    for name, entries in [("generator", generator), ("verifier", verifier), ("classifier", classifier),
                          ("judge_small", judge_s), ("judge_large", judge_l), ("labeler", labeler),
                          ("decomposer", decomposer)]:
        (scen / f"{name}.json").write_text(json.dumps({"entries": entries}, indent=1, ensure_ascii=False) + "\n")

    routes = [{"url": u, "status": 200, "headers": {"content-type": "text/html; charset=utf-8"}, "body": body}
              for u, body in sorted(pages.items())]
    routes.append({"url": DEAD_URL, "status": 404, "headers": {"content-type": "text/html"}, "body": "gone"})
    (OUT / "web_routes.json").write_text(json.dumps({"routes": routes}, indent=1, ensure_ascii=False) + "\n")

    (OUT / "catalog.tsv").write_text(
        "# domain\tcategory\n"
        "TV Shows & Movies\tCategory:2017 animated films\n"
        "Science & Technology\tCategory:Space telescopes\n"
        "Art\tCategory:Essay collections\n")

    profiles = [
        {"name": "generator", "model": "gen-model", "scenario": "scenarios/generator.json"},
        {"name": "verifier", "model": "gen-model-search", "capabilities": {"web_search": True},
         "scenario": "scenarios/verifier.json"},
        {"name": "classifier", "model": "classifier-model", "scenario": "scenarios/classifier.json"},
        {"name": "judge_small", "model": "judge-small-model", "scenario": "scenarios/judge_small.json"},
        {"name": "judge_large", "model": "judge-large-model", "scenario": "scenarios/judge_large.json"},
        {"name": "labeler", "model": "labeler-model", "scenario": "scenarios/labeler.json"},
        {"name": "decomposer", "model": "decomposer-model", "scenario": "scenarios/decomposer.json"},
    ]
    config = {
        "profiles": profiles,
        "http": {"fixture_routes": ["../wiki/routes.json", "web_routes.json"]},
        "harvest": {"global_budget": 20, "recursion_depth": 0, "interval_ms": 0},
        "genesis": {"profile": "generator", "min_evidence": 5, "max_attempts": 3, "rng_seed": 11},
        "self_verify": {"verifier_profile": "verifier", "classifier_profile": "classifier", "accept": ["FULL"]},
        "fetch": {"per_host_interval_ms": 0, "respect_robots": True},
        "cascade": {"round_profiles": ["judge_small", "judge_large"]},
        "labels": {"answer_type_profile": "labeler", "decompose_profile": "decomposer"},
    }
    (OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    expected = {"seeds": 20, "candidates": 13, "discarded": 7, "self_verified": 8, "self_rejected": 5,
                "accepted": 8, "accepted_in_round": [6, 2], "final_seeds": final}
    (OUT / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Writes fixtures/wiki/routes.json: category-member responses for the offline
harvest. URLs use the same encoding as the C++ client (RFC 3986 unreserved)."""
import json
import pathlib
from urllib.parse import quote

ENDPOINT = "https://en.wikipedia.org/w/api.php"

CATEGORIES = {
    "Category:2017 animated films": [
        "The Emoji Movie", "Cars 3", "Coco (2017 film)", "Despicable Me 3", "The Boss Baby",
        "The Lego Batman Movie", "The Lego Ninjago Movie", "Ferdinand (film)",
        "Captain Underpants: The First Epic Movie", "Smurfs: The Lost Village",
        "My Little Pony: The Movie (2017 film)", "Loving Vincent", "The Breadwinner (2017 film)",
        "Mary and the Witch's Flower",
    ],
    "Category:Space telescopes": [
        "Hubble Space Telescope", "James Webb Space Telescope", "Spitzer Space Telescope",
        "Chandra X-ray Observatory", "Kepler space telescope", "Herschel Space Observatory",
        "Planck (spacecraft)", "Gaia (spacecraft)", "Transiting Exoplanet Survey Satellite",
        "Compton Gamma Ray Observatory", "Fermi Gamma-ray Space Telescope", "Euclid (spacecraft)",
    ],
    "Category:Essay collections": [
        "The Immense Journey", "Notes of a Native Son", "Slouching Towards Bethlehem",
        "A Room of One's Own", "Pilgrim at Tinker Creek", "The Sea Around Us",
    ],
    "Category:Empty fixture category": [],
}
PAGE_SIZE = 5  # responses are split into pages to exercise continuation


def url(params):
    return ENDPOINT + "?" + "&".join(f"{quote(k, safe='-_.~')}={quote(v, safe='-_.~')}" for k, v in params)


def members_params(category, ns, cont=None):
    p = [("action", "query"), ("format", "json"), ("list", "categorymembers"), ("cmtitle", category),
         ("cmnamespace", str(ns)), ("cmlimit", "500")]
    if cont:
        p.append(("cmcontinue", cont))
    return p


def main():
    routes = []
    page_id = 1000
    for category, titles in CATEGORIES.items():
        chunks = [titles[i:i + PAGE_SIZE] for i in range(0, len(titles), PAGE_SIZE)] or [[]]
        for n, chunk in enumerate(chunks):
            cont = None if n == 0 else f"page|{n:04d}|{category}"
            members = []
            for t in chunk:
                page_id += 1
                members.append({"pageid": page_id, "ns": 0, "title": t})
            body = {"batchcomplete": "", "query": {"categorymembers": members}}
            if n + 1 < len(chunks):
                body["continue"] = {"cmcontinue": f"page|{n + 1:04d}|{category}", "continue": "-||"}
            routes.append({"url": url(members_params(category, 0, cont)), "status": 200,
                           "headers": {"content-type": "application/json"}, "body": json.dumps(body)})
        routes.append({"url": url(members_params(category, 14)), "status": 200,
                       "headers": {"content-type": "application/json"},
                       "body": json.dumps({"batchcomplete": "", "query": {"categorymembers": []}})})
        routes.append({"url": url([("action", "query"), ("format", "json"), ("titles", category)]), "status": 200,
                       "headers": {"content-type": "application/json"},
                       "body": json.dumps({"query": {"pages": {str(page_id): {"pageid": page_id, "ns": 14,
                                                                             "title": category}}}})})
    missing = "Category:No such category anywhere"
    routes.append({"url": url(members_params(missing, 0)), "status": 200,
                   "headers": {"content-type": "application/json"},
                   "body": json.dumps({"batchcomplete": "", "query": {"categorymembers": []}})})
    routes.append({"url": url([("action", "query"), ("format", "json"), ("titles", missing)]), "status": 200,
                   "headers": {"content-type": "application/json"},
                   "body": json.dumps({"query": {"pages": {"-1": {"ns": 14, "title": missing, "missing": ""}}}})})
    out = pathlib.Path(__file__).resolve().parents[2] / "fixtures" / "wiki" / "routes.json"
    out.write_text(json.dumps({"routes": routes}, indent=1, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()

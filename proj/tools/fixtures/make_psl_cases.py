"""Registrable-domain oracle for classify_url, labelled by tldextract.

tldextract is run offline against the suffix list snapshot it bundles, ICANN
section only, which is the same list vendored in data/.
"""
import json
import pathlib

import tldextract

HOSTS = [
    "en.wikipedia.org", "wikipedia.org", "pubmed.ncbi.nlm.nih.gov", "www.nih.gov",
    "a.b.example.co.uk", "example.co.uk", "www.bbc.co.uk", "news.bbc.co.uk",
    "www.sciencedirect.com", "www.britannica.com", "kids.britannica.com",
    "www.imdb.com", "m.imdb.com", "docs.python.org", "github.com", "user.github.io",
    "www.abc.net.au", "www.smh.com.au", "www.parliament.nz", "www.stuff.co.nz",
    "www.asahi.com", "www.city.shinjuku.lg.jp", "www.u-tokyo.ac.jp", "example.kawasaki.jp",
    "city.kawasaki.jp", "www.gov.br", "g1.globo.com", "www.folha.uol.com.br",
    "www.ox.ac.uk", "www.gov.uk", "service.gov.uk", "www.example.ck", "www.ck",
    "foo.bar.sch.uk", "mit.edu", "ocw.mit.edu", "www.loc.gov", "www.nasa.gov",
    "www.lemonde.fr", "de.wikipedia.org", "www.spiegel.de", "www.bundestag.de",
    "www.elpais.es", "www.unam.mx", "www.gob.mx", "www.iitb.ac.in", "www.thehindu.com",
    "www.xinhuanet.com", "www.gov.cn", "www.tsinghua.edu.cn", "example.com.cn",
    "www.nature.com", "link.springer.com", "journals.plos.org", "arxiv.org",
    "www.example.co.za", "www.example.org.za", "example.blogspot.com", "a.b.c.d.example.com",
    "localhost", "co.uk", "example.com.", "EXAMPLE.COM", "shop.example.co.jp",
]


def main() -> None:
    ex = tldextract.TLDExtract(suffix_list_urls=(), cache_dir=None, include_psl_private_domains=False)
    out = pathlib.Path(__file__).resolve().parents[2] / "fixtures" / "psl" / "cases.jsonl"
    with out.open("w") as f:
        for host in HOSTS:
            r = ex("http://" + host + "/")
            if r.domain and r.suffix:
                domain = f"{r.domain}.{r.suffix}"
            else:
                domain = host.lower().rstrip(".")
            f.write(json.dumps({"host": host, "registrable": domain.lower()}) + "\n")


if __name__ == "__main__":
    main()

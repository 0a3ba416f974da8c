"""Generate the Frederick Douglass case-study fixture under src/inses/data/case_study/.

The graph holds the six triples the two reference traces select plus six
filler triples, so every node named in the traces exists. Embeddings are
rows of a Cholesky factor of a hand-designed cosine (Gram) matrix: pairs
that the traces show as similarity hops get cosines above 0.80, everything
else stays below, and each node's designed argmax matches the trace.

Run from the repo root:  python scripts/build_case_study_fixture.py
"""

from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "inses" / "data" / "case_study"

QUERY = ("Who was the spouse of a leading speaker against slavery and publisher "
         "of an antislavery newspaper?")
ENTITIES = ["leading speaker against slavery", "antislavery newspaper", "spouse", "publisher"]

TRIPLES = [
    # selected somewhere in the traces
    ("Thomas spottswood hinde", "Occupation", "Opponent of slavery",
     "Thomas Spottswood Hinde was a noted opponent of slavery."),
    ("The north star", "Is", "Anti-slavery newspaper",
     "The North Star was an anti-slavery newspaper."),
    ("Enos bronson", "Was", "Newspaper publisher",
     "Enos Bronson was a newspaper publisher in Philadelphia."),
    ("The north star", "Published by", "Frederick douglass",
     "The North Star was published by Frederick Douglass."),
    ("Helen pitts douglass", "Created", "Frederick douglass memorial and historical association",
     "Helen Pitts Douglass created the Frederick Douglass Memorial and Historical Association."),
    ("Helen pitts douglass", "Is", "Second wife of frederick douglass",
     "Helen Pitts Douglass is the second wife of Frederick Douglass."),
    # filler: gives every node reached by similarity an explicit edge
    ("Liberty party paper", "Criticized", "Pro-slavery southerner", None),
    ("Husbands and wives", "Plural of", "Husband and wife", None),
    ("The toronto star", "Employs", "Newspaper editor", None),
    ("Country's newspaper of record", "Is a", "Newspaper of record", None),
    ("Federalists", "Members of", "Federalist party", None),
    ("English language weekly newspaper", "Type of", "Weekly newspaper", None),
]

# designed cosines; unlisted pairs are 0
CLUSTERS = {
    "a": (["Opponent of slavery", "Pro-slavery southerner"], {(0, 1): 0.90}),
    "b": (["Anti-slavery newspaper", "Liberty party paper", "Federalist party", "Federalists"],
          {(0, 1): 0.82, (1, 2): 0.86, (2, 3): 0.92, (0, 2): 0.65, (0, 3): 0.60, (1, 3): 0.75}),
    "c": (["Husband and wife", "Husbands and wives"], {(0, 1): 0.93}),
    "d": (["Newspaper publisher", "Newspaper of record", "Country's newspaper of record",
           "Enos bronson", "Newspaper editor"],
          {(0, 1): 0.84, (1, 2): 0.91, (3, 4): 0.81, (4, 1): 0.85,
           (0, 2): 0.75, (0, 4): 0.70, (4, 2): 0.75, (3, 1): 0.70, (3, 0): 0.60, (3, 2): 0.60}),
    "e": (["The north star", "The toronto star", "Weekly newspaper",
           "English language weekly newspaper"],
          {(0, 1): 0.81, (1, 2): 0.87, (2, 3): 0.93, (0, 2): 0.70, (0, 3): 0.60, (1, 3): 0.78}),
    "f": (["Frederick douglass", "Frederick douglass memorial and historical association"],
          {(0, 1): 0.88}),
}

# mention -> node it should anchor to, with the designed cosine
MENTIONS = {
    "leading speaker against slavery": ("Opponent of slavery", 0.95),
    "antislavery newspaper": ("Anti-slavery newspaper", 0.97),
    "spouse": ("Husband and wife", 0.90),
    "publisher": ("Newspaper publisher", 0.92),
}

# nearest neighbor each trace needs (None: best cosine must stay under 0.80)
EXPECTED_ARGMAX = {
    "Opponent of slavery": "Pro-slavery southerner",
    "Anti-slavery newspaper": "Liberty party paper",
    "Husband and wife": "Husbands and wives",
    "Newspaper publisher": "Newspaper of record",
    "Thomas spottswood hinde": None,
    "The north star": "The toronto star",
    "Enos bronson": "Newspaper editor",
    "Pro-slavery southerner": "Opponent of slavery",
    "Liberty party paper": "Federalist party",
    "Husbands and wives": "Husband and wife",
    "Newspaper of record": "Country's newspaper of record",
    "Frederick douglass": "Frederick douglass memorial and historical association",
    "Newspaper editor": "Newspaper of record",
    "The toronto star": "Weekly newspaper",
    "Federalist party": "Federalists",
    "Country's newspaper of record": "Newspaper of record",
    "Frederick douglass memorial and historical association": "Frederick douglass",
    "Weekly newspaper": "English language weekly newspaper",
    "Federalists": "Federalist party",
}

TAU = 0.80

SCRIPT_NO_EXPANSION = [
    ("insufficient", [TRIPLES[0][:3], TRIPLES[1][:3], TRIPLES[2][:3]]),
    ("insufficient", [TRIPLES[3][:3]]),
    ("insufficient", [TRIPLES[3][:3]]),
]
SCRIPT_WITH_EXPANSION = [
    ("insufficient", [TRIPLES[0][:3], TRIPLES[1][:3], TRIPLES[2][:3]]),
    ("insufficient", [TRIPLES[3][:3]]),
    ("insufficient", [TRIPLES[3][:3]]),
    ("insufficient", [TRIPLES[4][:3]]),
    ("sufficient", [TRIPLES[5][:3]]),
]


def gram_matrix():
    names = list(dict.fromkeys(n for h, _, t, _ in TRIPLES for n in (h, t)))
    names += [m for m in MENTIONS]
    pos = {n: i for i, n in enumerate(names)}
    G = np.eye(len(names))
    for members, pairs in CLUSTERS.values():
        for (i, j), c in pairs.items():
            a, b = pos[members[i]], pos[members[j]]
            G[a, b] = G[b, a] = c
    for m, (node, c) in MENTIONS.items():
        a, b = pos[m], pos[node]
        G[a, b] = G[b, a] = c
        # the mention inherits the node's neighborhood, scaled down
        for k in range(len(names)):
            if k not in (a, b) and G[b, k] and names[k] not in MENTIONS:
                G[a, k] = G[k, a] = G[b, k] * c * 0.95
    return names, G


def check(names, vecs):
    pos = {n: i for i, n in enumerate(names)}
    nodes = [n for n in names if n not in MENTIONS]
    U = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
    for u, want in EXPECTED_ARGMAX.items():
        sims = [(float(U[pos[u]] @ U[pos[v]]), v) for v in nodes if v != u]
        best_s, best = max(sims)
        if want is None:
            assert best_s < TAU, (u, best, best_s)
        else:
            assert best == want and best_s >= TAU, (u, best, best_s, want)
            runner = sorted(sims, reverse=True)[1][0]
            assert best_s - runner > 1e-6, (u, "near tie")
    for m, (node, _) in MENTIONS.items():
        sims = [(float(U[pos[m]] @ U[pos[v]]), v) for v in nodes]
        assert max(sims)[1] == node, (m, max(sims))
    for a, b in itertools.combinations(nodes, 2):
        assert float(U[pos[a]] @ U[pos[b]]) < 1.0 - 1e-9, (a, b)


def main():
    names, G = gram_matrix()
    L = np.linalg.cholesky(G)  # raises if the design is not positive definite
    check(names, L)
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "triples.jsonl", "w", encoding="utf-8") as fh:
        for h, r, t, src in TRIPLES:
            rec = {"head": h, "relation": r, "tail": t}
            if src:
                rec["source_text"] = src
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    table = {n: [round(float(x), 12) for x in row] for n, row in zip(names, L)}
    with open(OUT / "embeddings.json", "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=1, ensure_ascii=False)
        fh.write("\n")
    rounded = np.array([table[n] for n in names])
    check(names, rounded)
    for fname, script in (("script_no_expansion.json", SCRIPT_NO_EXPANSION),
                          ("script_with_expansion.json", SCRIPT_WITH_EXPANSION)):
        doc = {"query": QUERY, "entities": ENTITIES,
               "steps": [{"determination": d, "selection": [list(t) for t in sel]}
                         for d, sel in script]}
        with open(OUT / fname, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, ensure_ascii=False)
            fh.write("\n")
    print(f"wrote fixture for {len(names)} texts to {OUT}")


if __name__ == "__main__":
    main()

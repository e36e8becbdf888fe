#!/usr/bin/env python3
"""Independent reimplementation of hash embedding, descriptive sentences and
both entity-embedding strategies. Writes tests/golden/mini_embeddings.json
from fixtures/mini_kg.jsonl.

Run from the crate root: python3 tests/oracles/embed_oracle.py
"""
import json
import math
import re

DIM = 384
PREFIXES = ["title: ", "field: ", "content: ", "in references: ", "out references: "]
DEFAULT_W = [0.5, 0.3, 0.1, 0.05, 0.05]
BUDGET = 4096


def fnv1a(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def normalize(v):
    n = math.sqrt(sum(x * x for x in v))
    if not n >= 1e-12:
        raise ValueError("degenerate")
    return [x / n for x in v]


def hash_embed(text):
    v = [0.0] * DIM
    for tok in re.findall(r"[^\W_]+", text):
        h = fnv1a(tok.lower().encode("utf-8"))
        v[h % DIM] += -1.0 if h >> 63 else 1.0
    return normalize(v)


def refs_sentence(refs):
    parts = []
    for title in sorted(refs):
        tactic = refs[title]
        parts.append(f"{title} ({tactic})" if tactic else title)
    return "; ".join(parts)


def sentences(e):
    values = [
        e["title"],
        e["field"] or "",
        " ".join(e["contents"]),
        refs_sentence(e["in_refs"]),
        refs_sentence(e["out_refs"]),
    ]
    return [(p + v)[:BUDGET] for p, v in zip(PREFIXES, values)]


def strategy1(e):
    return normalize(hash_embed(" ".join(sentences(e))))


def strategy2(e, w=DEFAULT_W):
    s = sentences(e)
    acc = [0.0] * DIM
    for wj, text in zip(w, s):
        if wj == 0.0:
            continue
        for i, x in enumerate(hash_embed(text)):
            acc[i] += wj * x
    return normalize(acc)


def top_k(vectors, qid, k):
    q = vectors[qid]
    scored = []
    for eid, v in vectors.items():
        if eid == qid:
            continue
        scored.append((-sum(a * b for a, b in zip(q, v)), eid))
    scored.sort()
    return [[eid, -s] for s, eid in scored[:k]]


def normalize_title(t):
    collapsed = " ".join(t.lower().split())
    return ":".join(part.strip() for part in collapsed.split(":"))


RETRIEVAL_POINTS = [
    ("Group", "definition"),
    ("Lagrange", "theorem"),
    ("order of an element divides the group order", "unspecified"),
    ("Symmetric Group", "unspecified"),
]
RETRIEVAL_EXCLUDE = {10}
FUZZY_K = 3


def retrieve(entities, vecs):
    """Exact title stage, then top-3 cosine per point text and per exact hit."""
    titles = {normalize_title(e["title"]): e["id"] for e in entities if e["title"]}
    prefixes = {"definition": ["", "Definition:"], "theorem": ["", "Theorem:"],
                "unspecified": ["", "Definition:", "Theorem:"]}
    exact = []
    for text, kind in RETRIEVAL_POINTS:
        for pre in prefixes[kind]:
            hit = titles.get(normalize_title(pre + text))
            if hit is not None:
                if hit not in RETRIEVAL_EXCLUDE and hit not in exact:
                    exact.append(hit)
                break
    seeds = [(hash_embed(text), None) for text, _ in RETRIEVAL_POINTS]
    seeds += [(vecs[h], h) for h in exact]
    best = {}
    for q, seed in seeds:
        skip = RETRIEVAL_EXCLUDE | ({seed} if seed is not None else set())
        qn = math.sqrt(sum(x * x for x in q))
        scored = []
        for eid, v in vecs.items():
            if eid in skip:
                continue
            vn = math.sqrt(sum(x * x for x in v))
            scored.append((-sum(a * b for a, b in zip(q, v)) / (qn * vn), eid))
        scored.sort()
        for s, eid in scored[:FUZZY_K]:
            best[eid] = max(best.get(eid, -2.0), -s)
    fuzzy = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    selected = list(exact) + [eid for eid, _ in fuzzy if eid not in exact]
    return {"exact_hits": exact, "fuzzy_hits": [[e, s] for e, s in fuzzy], "selected": selected}


def main():
    with open("fixtures/mini_kg.jsonl", encoding="utf-8") as f:
        lines = f.read().splitlines()[1:]
    entities = [json.loads(l) for l in lines]
    out = {
        "hash_embed": {t: hash_embed(t) for t in ["symmetric group", "Set union is associative", "title: Definition:Set"]},
        "sentences": {str(e["id"]): sentences(e) for e in entities},
    }
    for name, fn in [("strategy1", strategy1), ("strategy2", strategy2)]:
        vecs = {e["id"]: fn(e) for e in entities}
        out[name] = {
            "vectors": {str(k): v for k, v in vecs.items()},
            "top5": {str(k): top_k(vecs, k, 5) for k in vecs},
        }
    s2 = {e["id"]: strategy2(e) for e in entities}
    out["retrieval"] = retrieve(entities, s2)
    with open("tests/golden/mini_embeddings.json", "w", encoding="utf-8") as f:
        json.dump(out, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()

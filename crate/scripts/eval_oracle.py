#!/usr/bin/env python3
"""Brute-force recount of the lexical refinement accuracies.

Written independently of the Rust scorer: rebuilds the theme documents from
the fixture, computes TF-IDF cosine by direct summation and takes the argmax
with ties going to the theme created first.
"""
import json
import math
import re
import sys


def tokens(text):
    return [t.lower() for t in re.split(r"[^0-9A-Za-z]+", text) if t]


def cosine(q, d, docs):
    n = len(docs)
    df = {}
    for doc in docs:
        for t in set(doc):
            df[t] = df.get(t, 0) + 1

    def vec(toks):
        v = {}
        for t in toks:
            v[t] = v.get(t, 0) + 1
        v = {t: c * (math.log((n + 1) / (df.get(t, 0) + 1)) + 1) for t, c in v.items()}
        norm = math.sqrt(sum(w * w for w in v.values()))
        return {t: w / norm for t, w in v.items()} if norm else {}

    a, b = vec(q), vec(d)
    return sum(w * b.get(t, 0.0) for t, w in a.items())


def main(path):
    fx = json.load(open(path))
    # themes in creation order: [name, [member texts]]
    themes = [[t["name"], list(t["evidence"])] for t in fx["themes"]]
    labels = {l.lower() for l in fx["gold"]["labels"]}
    for it in fx["iterations"]:
        for e in it["edits"]:
            find = lambda name: next(t for t in themes if t[0] == name)
            if e["op"] == "rename":
                find(e["theme"])[0] = e["name"]
            elif e["op"] == "merge":
                s, a = find(e["survivor"]), find(e["absorbed"])
                s[1].extend(a[1])
                themes.remove(a)
            elif e["op"] == "add_evidence":
                find(e["theme"])[1].append(e["text"])
        docs = [tokens("\n".join([name] + members)) for name, members in themes]
        correct = 0
        for item in fx["gold"]["items"]:
            q = tokens(item["text"])
            scores = [cosine(q, d, docs) for d in docs]
            best = max(range(len(docs)), key=lambda i: (scores[i], -i))
            name = themes[best][0]
            ok = name.lower() in labels and name.lower() == item["gold_theme"].lower()
            correct += ok
            print(f"  {it['tag']} {item['item_id']} -> {name} {scores[best]:.4f} {'ok' if ok else ''}")
        print(f"{it['tag']}: {correct}/{len(fx['gold']['items'])}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/fixtures/refinement.json")

"""Regenerates reward_golden_expected.jsonl from reward_golden.jsonl.

Independent scalar oracle: regex format check, math.erfc for Phi, and the
reward formulas written out directly. Run from this directory.
"""
import json
import math
import re

ALPHA, SIGMA, DELTA, TAU, EPS, K = 0.8, 0.5, 0.3, 0.5, 1e-8, 4
LABELS = {"g3": 3.0}
TAGS = ("<think>", "</think>", "<answer>", "</answer>")
PATTERN = re.compile(r"^\s*<think>(.*?)</think>\s*<answer>(.*?)</answer>\s*$", re.S)


def number(s):
    s = s.strip()
    if not re.fullmatch(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?", s):
        return None
    v = float(s)
    return v if math.isfinite(v) else None


def fmt(text):
    m = PATTERN.match(text)
    if not m or not m.group(1).strip() or any(t in m.group(1) for t in TAGS):
        return 0.0
    return 1.0 if number(m.group(2)) is not None else 0.0


def score(text):
    m = re.search(r"<answer>(.*?)</answer>", text, re.S)
    return number(m.group(1)) if m else None


def phi(x):
    return 0.5 * math.erfc(-x / math.sqrt(2))


def stats(scores):
    s = [v for v in scores if v is not None]
    if not s:
        return None
    mean = sum(s) / len(s)
    return mean, sum((v - mean) ** 2 for v in s) / len(s)


def rank_reward(p, gs, go):
    if gs == go:
        return math.sqrt(0.5 * p + EPS) + math.sqrt(0.5 * (1 - p) + EPS)
    return math.sqrt(p * (gs > go) + EPS) + math.sqrt((1 - p) * (gs < go) + EPS)


def per_response(scores, g, partner, g_partner):
    own = stats(scores)
    out = []
    for s in scores:
        if s is None:
            out.append((0.0, 0.0))
            continue
        reg = ALPHA * math.exp(-((s - g) ** 2) / (2 * SIGMA ** 2))
        rank = 0.0
        if partner is not None and own is not None:
            p = phi((s - partner[0]) / math.sqrt(own[1] + partner[1] + EPS))
            rank = rank_reward(p, g, g_partner)
        out.append((reg, rank))
    return out


def sub(mu_raw, mu_pert):
    return DELTA if mu_raw >= mu_pert and mu_raw > TAU else 0.0


records = [json.loads(l) for l in open("reward_golden.jsonl") if l.strip()]
groups = {}
for i, r in enumerate(records):
    g = groups.setdefault(r["group_id"], {"raw": [], "twin": [], "mos": None, "pair": None})
    if r.get("mos") is not None:
        g["mos"] = r["mos"]
    if r.get("pair_id") is not None:
        g["pair"] = r["pair_id"]
    g["twin" if r.get("perturbed") else "raw"].append((i, r["response_text"]))
for gid, g in groups.items():
    assert len(g["raw"]) == K
    if g["mos"] is None:
        g["mos"] = LABELS[gid]
    g["stats"] = stats([score(t) for _, t in g["raw"]])

rows = []
for gid, g in groups.items():
    partner = groups[g["pair"]] if g["pair"] else None
    pstats = partner["stats"] if partner else None
    gp = partner["mos"] if partner else g["mos"]
    scores = [score(t) for _, t in g["raw"]]
    rr = per_response(scores, g["mos"], pstats, gp)
    temp = 0.0
    if g["twin"]:
        tr = per_response([score(t) for _, t in g["twin"]], g["mos"], pstats, gp)
        mean = lambda xs: sum(xs) / len(xs)
        temp = sub(mean([a for a, _ in rr]), mean([a for a, _ in tr])) + sub(
            mean([b for _, b in rr]), mean([b for _, b in tr]))
    for k, ((line, text), (reg, rank)) in enumerate(zip(g["raw"], rr)):
        f = fmt(text)
        rows.append((line, {"group_id": gid, "index": k, "fmt": f, "reg": reg, "rank": rank, "temp": temp,
                            "total": ((f + reg) + rank) + temp, "parsed_score": scores[k]}))

with open("reward_golden_expected.jsonl", "w") as out:
    for _, row in sorted(rows, key=lambda r: r[0]):
        out.write(json.dumps(row) + "\n")

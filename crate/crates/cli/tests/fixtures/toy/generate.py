"""Writes the toy fixture: a synthetic English/Chinese corpus with a gazetteer.

Exactly 50 of the 200 sentences mention an entity that has both a URI and a
hypernym; 20 more mention entities without a hypernym. Target sentences are
word-for-word translations in source order, with articles dropped.
"""

import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
RNG = random.Random(2021)

WORDS = {
    "we": "我们", "they": "他们", "people": "人们", "students": "学生",
    "visited": "访问", "saw": "看见", "travel": "旅行", "to": "去",
    "yesterday": "昨天", "today": "今天", "is": "是", "are": "都",
    "was": "曾", "very": "很", "old": "古老", "quiet": "安静",
    "friendly": "友好", "big": "大", "in": "在", "near": "附近",
    "from": "来自", "report": "报告", "river": "河", "market": "市场",
    "village": "村庄", "school": "学校", "many": "许多", "place": "地方",
    "often": "常常", "like": "喜欢", ".": "。",
    "the": None, "a": None,
}

# surface, target, uri, hypernym, where the hypernym is recorded
ELIGIBLE = [
    ("myanmar", "缅甸", "http://dbpedia.org/resource/Myanmar", "state", "gazetteer"),
    ("gambia", "冈比亚", "http://dbpedia.org/resource/The_Gambia", "country", "map"),
    ("paris", "巴黎", "http://dbpedia.org/resource/Paris", "city", "gazetteer"),
    ("london", "伦敦", "http://dbpedia.org/resource/London", "city", "map"),
    ("tokyo", "东京", "http://dbpedia.org/resource/Tokyo", "city", "gazetteer"),
    ("new york", "纽约", "http://dbpedia.org/resource/New_York_City", "city", "map"),
    ("kenya", "肯尼亚", "http://dbpedia.org/resource/Kenya", "country", "gazetteer"),
    ("lima", "利马", "http://dbpedia.org/resource/Lima", "capital city", "map"),
    ("oslo", "奥斯陆", "http://dbpedia.org/resource/Oslo", "city", "gazetteer"),
    ("nigeria", "尼日利亚", "http://dbpedia.org/resource/Nigeria", "country", "map"),
]
NO_HYPERNYM = [
    ("zorbia", "佐比亚", "http://dbpedia.org/resource/Zorbia"),
    ("acme", "艾克米", "http://dbpedia.org/resource/Acme_Corporation"),
    ("quill", "奎尔", "http://dbpedia.org/resource/Quill"),
    ("vantor", "万托", "http://dbpedia.org/resource/Vantor"),
]

TEMPLATES = [
    "we visited {} yesterday .",
    "{} is a very old place .",
    "many students travel to {} .",
    "the report from {} was quiet .",
    "they saw the river near {} today .",
    "people in {} are friendly .",
    "we often like {} .",
    "they visited the big market in {} .",
]
FILLERS = ["the market", "the village", "the school", "the river", "a big village"]


def translate(tokens, entity):
    out = []
    i = 0
    while i < len(tokens):
        if entity and tokens[i : i + len(entity[0])] == entity[0]:
            out.append(entity[1])
            i += len(entity[0])
            continue
        t = WORDS[tokens[i]]
        if t is not None:
            out.append(t)
        i += 1
    return out


def main():
    kinds = ["eligible"] * 50 + ["no_hypernym"] * 20 + ["plain"] * 130
    RNG.shuffle(kinds)
    src_lines, tgt_lines, expected = [], [], []
    for line_no, kind in enumerate(kinds):
        template = RNG.choice(TEMPLATES)
        if kind == "eligible":
            surface, target = ELIGIBLE[len(expected) % len(ELIGIBLE)][:2]
        elif kind == "no_hypernym":
            surface, target = RNG.choice(NO_HYPERNYM)[:2]
        else:
            surface, target = RNG.choice(FILLERS), None
        text = template.format(surface)
        tokens = text.split()
        entity = None
        if target is not None:
            ent = surface.split()
            start = next(i for i in range(len(tokens)) if tokens[i : i + len(ent)] == ent)
            entity = (ent, target)
            if kind == "eligible":
                expected.append((line_no, start, start + len(ent)))
        src_lines.append(text)
        tgt_lines.append(" ".join(translate(tokens, entity)))

    (HERE / "corpus.en").write_text("\n".join(src_lines) + "\n", encoding="utf-8")
    (HERE / "corpus.zh").write_text("\n".join(tgt_lines) + "\n", encoding="utf-8")

    gaz = ["# surface\turi\thypernym"]
    hyp = []
    for surface, _, uri, h, where in ELIGIBLE:
        if where == "gazetteer":
            gaz.append(f"{surface}\t{uri}\t{h}")
        else:
            gaz.append(f"{surface}\t{uri}")
            hyp.append(f"{uri}\t{h}")
    for surface, _, uri in NO_HYPERNYM:
        gaz.append(f"{surface}\t{uri}")
    (HERE / "gazetteer.tsv").write_text("\n".join(gaz) + "\n", encoding="utf-8")
    (HERE / "hypernyms.tsv").write_text("\n".join(hyp) + "\n", encoding="utf-8")

    exp = HERE / "expected"
    exp.mkdir(exist_ok=True)
    (exp / "eligible.tsv").write_text(
        "line_no\tstart\tend\n" + "".join(f"{l}\t{s}\t{e}\n" for l, s, e in expected),
        encoding="utf-8",
    )
    (exp / "tag_stats.tsv").write_text(
        "total_pairs\ttagged_pairs\ttag_fraction\n"
        f"{len(kinds)}\t{len(expected)}\t{len(expected) / len(kinds):.4f}\n",
        encoding="utf-8",
    )


if __name__ == "__main__":
    main()

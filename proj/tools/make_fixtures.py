#!/usr/bin/env python3
"""Regenerate the committed test fixtures under tests/fixtures.

Everything is synthetic and seeded, so rerunning this script reproduces the
files byte for byte. Words are random syllable strings in Cyrillic (news) or
Arabic script (tweets); documents draw most of their words from a small topic
vocabulary so that BM25 finds topically close but distinct passages.
"""

import argparse
import json
import random
from pathlib import Path

CYR_C = list("бвгдзклмнпрстфхцчшж")
CYR_V = list("аеиоуыя")
FAS_C = list("بپتسجچحخدرزژشفقکگلمنوهی")
FAS_V = list("اوی")


def make_word(rng, cons, vows, min_syl=2, max_syl=4):
    return "".join(rng.choice(cons) + rng.choice(vows) for _ in range(rng.randint(min_syl, max_syl)))


def make_vocab(rng, cons, vows, n, **kw):
    seen = set()
    out = []
    while len(out) < n:
        w = make_word(rng, cons, vows, **kw)
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


class TopicModel:
    def __init__(self, rng, cons, vows, topics, topic_words, global_words, **kw):
        self.rng = rng
        vocab = make_vocab(rng, cons, vows, topics * topic_words + global_words, **kw)
        self.topics = [vocab[i * topic_words:(i + 1) * topic_words] for i in range(topics)]
        self.general = vocab[topics * topic_words:]
        acc = 0.0
        self.cum = []
        for r in range(topic_words):
            acc += 1.0 / (r + 2)
            self.cum.append(acc)

    def words(self, topic, n, topic_share=0.55):
        out = []
        for _ in range(n):
            if self.rng.random() < topic_share:
                # Zipf-like skew inside a topic.
                out.append(self.rng.choices(self.topics[topic], cum_weights=self.cum)[0])
            else:
                out.append(self.rng.choice(self.general))
        return out


def sentences(rng, words):
    out = []
    i = 0
    while i < len(words):
        n = rng.randint(6, 14)
        chunk = words[i:i + n]
        i += n
        s = " ".join(chunk)
        out.append(s[:1].upper() + s[1:] + ".")
    return " ".join(out)


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def news_corpus(seed, docs, lengths, topics):
    rng = random.Random(seed)
    model = TopicModel(rng, CYR_C, CYR_V, topics, 80, 1500)
    out = []
    for i in range(docs):
        topic = i % topics
        n = rng.randint(*lengths)
        words = model.words(topic, n)
        title = " ".join(model.words(topic, 5))
        out.append({"id": f"ru-{seed}-{i:04d}", "title": title, "text": sentences(rng, words),
                    "url": f"https://example.org/ru/{i}"})
    return out, model


def tweet_corpus(seed, threads, topics, with_noise=True):
    rng = random.Random(seed)
    model = TopicModel(rng, FAS_C, FAS_V, topics, 40, 800, min_syl=1, max_syl=3)
    out = []
    for i in range(threads):
        topic = i % topics
        tweets = []
        for _ in range(rng.randint(3, 6)):
            t = " ".join(model.words(topic, rng.randint(8, 18), topic_share=0.6))
            if with_noise and rng.random() < 0.3:
                t += f" https://t.co/{rng.randrange(16**8):08x}"
            if with_noise and rng.random() < 0.1:
                t = f"www.example.ir/p/{rng.randrange(1000)} " + t
            tweets.append(t)
        out.append({"id": f"tw-{seed}-{i:04d}", "text": "\n".join(tweets)})
    return out, model


def tweet_seeds(seed, model, count):
    rng = random.Random(seed)
    lines = []
    for i in range(count):
        topic = i % len(model.topics)
        words = [rng.choice(model.topics[topic][:12]) for _ in range(3)]
        lines.append(f"seed-{i:03d}\t{' '.join(words)}")
    return lines


def labels_fixture():
    cats = (["both_correct"] * 41 + ["underspecified"] * 3 + ["relevance_wrong"] * 7
            + ["nonrelevance_wrong"] * 6 + ["both_wrong"] * 4)
    rng = random.Random(61)
    rng.shuffle(cats)
    out = []
    for i, c in enumerate(cats):
        r = {"triple_id": f"pair-{i // 8:06d}-q{i % 8}", "category": c}
        if c == "underspecified":
            r["note"] = "generic noun phrase"
        out.append(r)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests" / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    # End-to-end news corpus: 200 documents of varying length.
    docs, _ = news_corpus(11, 200, (120, 420), 25)
    write_jsonl(out / "news_rus.jsonl", docs)

    # Mining corpora: exactly 1000 passages each at window 180 / stride 90.
    # 361..450 tokens always gives four windows.
    docs, _ = news_corpus(23, 250, (361, 450), 30)
    write_jsonl(out / "mining_news_rus.jsonl", docs)
    tweets, model = tweet_corpus(29, 1000, 60, with_noise=False)
    write_jsonl(out / "mining_tweets_fas.jsonl", tweets)
    (out / "mining_tweet_seeds.tsv").write_text("\n".join(tweet_seeds(31, model, 180)) + "\n",
                                                encoding="utf-8")

    # End-to-end tweet corpus with URLs to strip.
    tweets, model = tweet_corpus(37, 300, 20)
    write_jsonl(out / "tweets_fas.jsonl", tweets)
    (out / "tweet_seeds.tsv").write_text("\n".join(tweet_seeds(41, model, 60)) + "\n",
                                         encoding="utf-8")

    write_jsonl(out / "assessment_labels.jsonl", labels_fixture())


if __name__ == "__main__":
    main()

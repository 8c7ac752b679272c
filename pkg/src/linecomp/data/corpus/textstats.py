import re
import sys
from collections import Counter

WORD_RE = re.compile(r"[a-z']+")
STOP_WORDS = set(["the", "a", "an", "and", "or", "of", "to", "in"])


def words(text):
    return WORD_RE.findall(text.lower())


def count_words(text, skip_stop=True):
    counts = Counter()
    for word in words(text):
        if skip_stop and word in STOP_WORDS:
            continue
        counts[word] += 1
    return counts


def top_words(counts, n=10):
    pairs = sorted(counts.items(), key=itemgetter(1), reverse=True)
    return pairs[:n]


def itemgetter(index):
    def getter(pair):
        return pair[index]
    return getter


def average_length(tokens):
    if not tokens:
        return 0.0
    total = sum([len(t) for t in tokens])
    return total / float(len(tokens))


def sentences(text):
    parts = re.split(r"[.!?]+", text)
    return [p.strip() for p in parts if p.strip()]


def longest_sentence(text):
    best = None
    best_len = -1
    for sentence in sentences(text):
        n = len(words(sentence))
        if n > best_len:
            best = sentence
            best_len = n
    return best, best_len


def histogram(counts, width=40):
    if not counts:
        return []
    peak = max(counts.values())
    lines = []
    for word, count in sorted(counts.items()):
        bar = "#" * int(width * count / peak)
        lines.append("%-12s %s" % (word, bar))
    return lines


def summarize(path):
    with open(path) as handle:
        text = handle.read()
    counts = count_words(text)
    tokens = words(text)
    report = {
        "words": len(tokens),
        "unique": len(counts),
        "avg_len": average_length(tokens),
        "top": top_words(counts, 5)
    }
    return report


if __name__ == "__main__":
    for path in sys.argv[1:]:
        report = summarize(path)
        print(path, report["words"], report["unique"])
        for line in histogram(count_words(open(path).read())):
            print(line)

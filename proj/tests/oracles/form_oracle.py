#!/usr/bin/env python3
"""Reference computation of S/B/E form codes for the fixture tunes.

Written separately from the C++ sources; used to freeze the expected codes in
tests/data/*.expected. Usage:

    form_oracle.py tests/data/annotated20.abc > tests/data/annotated20.expected
"""

import sys
from fractions import Fraction

SYMBOLS = ["[|", "||", "|]", "|:", "::", ":|"]


def tunes_of(text):
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    chunk, out = [], []
    for line in text.split("\n") + [""]:
        if line.strip() == "":
            if chunk and not all(l.startswith("%") for l in chunk):
                out.append(chunk)
            chunk = []
        else:
            chunk.append(line)
    return out


def body_of(lines):
    lines = [l.rstrip() for l in lines if l.strip() and not l.startswith("%")]
    for i, l in enumerate(lines):
        if l.startswith("K:"):
            return "\n".join(lines[i + 1:])
    raise ValueError("no K: line")


def opaque_end(s, i):
    if s[i] == '"':
        j = s.find('"', i + 1)
        return len(s) if j < 0 else j + 1
    if s[i] == "[" and i + 2 < len(s) and s[i + 1].isalpha() and s[i + 2] == ":":
        j = s.find("]", i + 3)
        return len(s) if j < 0 else j + 1
    return i


def sections(body):
    out, start, i = [], 0, 0
    while i < len(body):
        j = opaque_end(body, i)
        if j != i:
            i = j
            continue
        if body[i:i + 2] in SYMBOLS:
            out.append(body[start:i])
            i += 2
            start = i
            continue
        i += 1
    out.append(body[start:])
    return [s for s in out if s.strip()]


def bars(section):
    out, cur, i = [], "", 0
    while i < len(section):
        j = opaque_end(section, i)
        if j != i:
            cur += section[i:j]
            i = j
            continue
        if section[i] == "|":
            out.append(cur)
            cur = ""
        else:
            cur += section[i]
        i += 1
    out.append(cur)
    return [b for b in out if b.strip()]


def lev(a, b):
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[len(a)][len(b)]


def level(c, p):
    m = max(len(c), len(p))
    if m == 0:
        return 10
    x = Fraction(10 * (m - lev(c, p)), m)
    return int(x + Fraction(1, 2))  # round half up; x >= 0


def codes(body):
    secs = sections(body)
    out = ["S:%d" % len(secs)]
    for k, s in enumerate(secs):
        out.append("B:%d" % len(bars(s)))
        out += ["E:%d" % level(s, secs[j]) for j in range(k)]
    return out


def main(path):
    with open(path, newline="") as f:
        for chunk in tunes_of(f.read()):
            x = next(l for l in chunk if l.startswith("X:")).rstrip()
            print(x + "\t" + " ".join(codes(body_of(chunk))))


if __name__ == "__main__":
    main(sys.argv[1])

#!/usr/bin/env python3
"""Fetch and flatten the public evaluation data bundled in gensim's test suite.

Produces, under data/public/:
  wiki_slice.txt     plain text of ~200 English Wikipedia articles (CC BY-SA),
                     one paragraph per line, markup stripped
  lee_background.txt Lee news corpus background documents
  wordsim353.tsv     canonical w1<TAB>w2<TAB>score
  simlex999.tsv      canonical w1<TAB>w2<TAB>score
  questions-words.txt Google analogy set, native format

Requires pip access to download the gensim wheel (no install needed).
"""
import bz2
import glob
import html
import os
import re
import subprocess
import sys
import tempfile
import zipfile

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "data", "public")
PREFIX = "gensim/test/test_data/"


def fetch_wheel(tmp):
    subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps",
                           "--only-binary", ":all:", "-d", tmp, "gensim==4.4.0"])
    return glob.glob(os.path.join(tmp, "gensim-*.whl"))[0]


def strip_wiki(markup):
    text = html.unescape(markup)
    text = re.sub(r"<!--.*?-->", " ", text, flags=re.S)
    text = re.sub(r"<ref[^>]*/>", " ", text)
    text = re.sub(r"<ref.*?</ref>", " ", text, flags=re.S)
    # nested templates and tables, innermost first
    for _ in range(8):
        text = re.sub(r"\{\{[^{}]*\}\}", " ", text)
        text = re.sub(r"\{\|[^{}]*?\|\}", " ", text, flags=re.S)
    text = re.sub(r"\[\[(?:File|Image|Category|[a-z\-]{2,12}):[^\[\]]*(?:\[\[[^\]]*\]\][^\[\]]*)*\]\]", " ", text)
    text = re.sub(r"\[\[[^\]|]*\|([^\]]*)\]\]", r"\1", text)
    text = re.sub(r"\[\[([^\]]*)\]\]", r"\1", text)
    text = re.sub(r"\[https?://[^\s\]]+\s*([^\]]*)\]", r"\1", text)
    text = re.sub(r"<[^>]+>", " ", text)
    text = re.sub(r"'{2,}", "", text)
    out = []
    for line in text.split("\n"):
        line = line.strip()
        if not line or line[0] in "=|!{}*#:;" or line.startswith("}}"):
            continue
        if len(line.split()) < 6:
            continue
        out.append(re.sub(r"\s+", " ", line))
    return out


def main():
    os.makedirs(OUT, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        whl = zipfile.ZipFile(fetch_wheel(tmp))
        raw = bz2.decompress(whl.read(PREFIX + "enwiki-latest-pages-articles1.xml-p000000010p000030302-shortened.bz2")).decode("utf-8")
        lines = []
        for page in re.findall(r"<text[^>]*>(.*?)</text>", raw, flags=re.S):
            if page.lstrip().lower().startswith("#redirect"):
                continue
            lines.extend(strip_wiki(page))
        with open(os.path.join(OUT, "wiki_slice.txt"), "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        with open(os.path.join(OUT, "lee_background.txt"), "wb") as f:
            f.write(whl.read(PREFIX + "lee_background.cor"))
        with open(os.path.join(OUT, "questions-words.txt"), "wb") as f:
            f.write(whl.read(PREFIX + "questions-words.txt"))
        for src, dst in (("wordsim353.tsv", "wordsim353.tsv"), ("simlex999.txt", "simlex999.tsv")):
            rows = []
            for line in whl.read(PREFIX + src).decode("utf-8").splitlines():
                if not line.strip() or line.startswith("#"):
                    continue
                w1, w2, score = line.split("\t")[:3]
                rows.append(f"{w1.lower()}\t{w2.lower()}\t{score}")
            with open(os.path.join(OUT, dst), "w", encoding="utf-8") as f:
                f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()

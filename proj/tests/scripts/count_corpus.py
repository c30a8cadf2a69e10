#!/usr/bin/env python3
# Copyright 2026 The MEGA-ABSA Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Counts aspect records per polarity, independently of the C++ readers.

usage: count_corpus.py semeval|twitter FILE
prints: "<positive> <neutral> <negative> <conflict>"
"""
import sys
import xml.etree.ElementTree as ET


def semeval(path):
    counts = {"positive": 0, "neutral": 0, "negative": 0, "conflict": 0}
    for term in ET.parse(path).getroot().iter("aspectTerm"):
        counts[term.get("polarity")] += 1
    return counts


def twitter(path):
    with open(path, encoding="utf-8") as f:
        lines = [l.rstrip("\r\n") for l in f]
    while lines and not lines[-1].strip():
        lines.pop()
    counts = {"positive": 0, "neutral": 0, "negative": 0, "conflict": 0}
    names = {"1": "positive", "0": "neutral", "-1": "negative"}
    for i in range(0, len(lines), 3):
        counts[names[lines[i + 2].strip()]] += 1
    return counts


if __name__ == "__main__":
    c = {"semeval": semeval, "twitter": twitter}[sys.argv[1]](sys.argv[2])
    print(c["positive"], c["neutral"], c["negative"], c["conflict"])

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
"""Brute-force accuracy and macro-F1.

Reads pairs of lines (gold labels, predicted labels; space separated ints in
{0,1,2}) from stdin and prints "<accuracy> <macro_f1>" per pair with 17
significant digits. A class with no true positives scores F1 = 0.
"""
import sys


def scores(gold, pred):
    correct = sum(1 for g, p in zip(gold, pred) if g == p)
    f1s = []
    for c in range(3):
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp = sum(1 for g, p in zip(gold, pred) if g != c and p == c)
        fn = sum(1 for g, p in zip(gold, pred) if g == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return correct / len(gold), sum(f1s) / 3


def main():
    lines = [l.split() for l in sys.stdin.read().splitlines() if l.strip()]
    for i in range(0, len(lines), 2):
        acc, f1 = scores([int(x) for x in lines[i]], [int(x) for x in lines[i + 1]])
        print(f"{acc:.17g} {f1:.17g}")


if __name__ == "__main__":
    main()

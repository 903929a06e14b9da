#!/usr/bin/env python3
"""Emit a frequency list (one word per line, most frequent first) for a
language using the wordfreq package: `pip install wordfreq`.

Usage: make_frequency_list.py <lang> <count> > <lang>_freq.txt
"""
import sys

from wordfreq import top_n_list

lang = sys.argv[1]
count = int(sys.argv[2]) if len(sys.argv) > 2 else 200_000
for word in top_n_list(lang, count):
    # embedding tokens never contain whitespace; skip oddities
    if word and not any(c.isspace() for c in word):
        print(word)

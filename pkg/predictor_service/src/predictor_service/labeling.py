"""Character-offset text labeling.

The wire contract speaks in character offsets, so every classifier here
reduces to the same tiling rule: a text splits into units, each unit starting
at its first word's start and running to the next unit's first word start.
The first unit absorbs any leading whitespace by starting at offset 0 and the
last unit extends to the end of the text, so the units always tile the whole
string. A text with no words at all is a single capability unit.

The keep decision for a target is the start of the first unit labeled
differently from that target; if no unit differs, the whole text is kept.
"""

import re

WORD_RE = re.compile(r"\S+")

STYLE = "style"
CAPABILITY = "capability"
TARGETS = (STYLE, CAPABILITY)

DEFAULT_LEXICON = (
    "okay",
    "wait",
    "hmm",
    "so",
    "let's",
    "but",
    "let me",
    "i think",
    "alright",
    "now",
)


def normalize_word(word: str) -> str:
    """Lowercase and strip non-alphanumeric characters from both ends."""
    word = word.lower()
    start = 0
    end = len(word)
    while start < end and not word[start].isalnum():
        start += 1
    while end > start and not word[end - 1].isalnum():
        end -= 1
    return word[start:end]


class LexiconClassifier:
    """Greedy matcher over a fixed set of words and multi-word phrases.

    Longer phrases win over shorter ones and over single words; a matched
    phrase becomes one multi-word style unit.
    """

    def __init__(self, entries=DEFAULT_LEXICON):
        singles = set()
        phrases = []
        for entry in entries:
            parts = tuple(p for p in (normalize_word(w) for w in entry.split()) if p)
            if not parts:
                continue
            if len(parts) == 1:
                singles.add(parts[0])
            else:
                phrases.append(parts)
        self.singles = frozenset(singles)
        self.phrases = tuple(sorted(phrases, key=len, reverse=True))

    def group_words(self, normalized):
        groups = []
        i = 0
        n = len(normalized)
        while i < n:
            width = 1
            label = CAPABILITY
            for phrase in self.phrases:
                k = len(phrase)
                if i + k <= n and tuple(normalized[i:i + k]) == phrase:
                    width = k
                    label = STYLE
                    break
            if width == 1 and normalized[i] in self.singles:
                label = STYLE
            groups.append((width, label))
            i += width
        return groups


def label_text(text: str, classifier) -> tuple[tuple[int, int, str], ...]:
    """Tile text into (start, end, label) units via the classifier's groups.

    ``classifier.group_words`` receives the normalized word list and returns
    (word_count, label) runs covering it in order.
    """
    words = [m.span() for m in WORD_RE.finditer(text)]
    if not words:
        return ((0, len(text), CAPABILITY),)
    normalized = [normalize_word(text[s:e]) for s, e in words]
    units = []
    i = 0
    for width, label in classifier.group_words(normalized):
        j = i + width
        start = 0 if i == 0 else words[i][0]
        end = len(text) if j == len(words) else words[j][0]
        units.append((start, end, label))
        i = j
    if i != len(words):
        raise ValueError("classifier groups did not cover every word")
    return tuple(units)


def keep_prefix(units, target: str, text_length: int) -> int:
    for start, _end, label in units:
        if label != target:
            return start
    return text_length

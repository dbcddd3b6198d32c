"""Regenerate the shared label test vectors for the predictor service.

Runs the engine's built-in lexicon predictor over a deterministic mix of
texts and freezes each verdict (keep decision plus unit tiling) as JSON
Lines. The predictor service's parity suite replays the file without
importing the engine, so the two implementations stay comparable through
data alone.

Usage: python3 scripts/make_label_vectors.py
"""

import json
import random
from pathlib import Path

from tessy.boundary import BoundaryTarget, LexiconPredictor

STYLE_WORDS = ["okay", "Okay,", "WAIT", "hmm...", "so", "Let's", "but",
               "Now!", "alright", "(so)"]
PHRASE_PARTS = [("let", "me"), ("Let", "ME,"), ("i", "think"), ("I", "THINK!")]
CAP_WORDS = ["compute", "gcd(a,b)", "prime", "arbol", "f(n)", "x7", "sum,",
             "modulo", "Proof:", "42", "naive", "ou?"]
SEPARATORS = [" ", " ", " ", "  ", "\n", "\t", " \n "]
ODDBALLS = ["?!?", "...", "-", "***"]


def build_text(rng):
    if rng.random() < 0.04:
        # no words at all: the contract says one capability unit
        return rng.choice(ODDBALLS)
    parts = []
    if rng.random() < 0.2:
        parts.append(rng.choice(("  ", "\n", "\t")))
    first = True
    for _ in range(rng.randint(1, 18)):
        if not first:
            parts.append(rng.choice(SEPARATORS))
        first = False
        roll = rng.random()
        if roll < 0.35:
            parts.append(rng.choice(STYLE_WORDS))
        elif roll < 0.5:
            a, b = rng.choice(PHRASE_PARTS)
            parts.append(a + rng.choice((" ", "  ", "\n")) + b)
        elif roll < 0.55:
            parts.append(rng.choice(ODDBALLS))
        else:
            parts.append(rng.choice(CAP_WORDS))
    if rng.random() < 0.15:
        parts.append(rng.choice(("  ", "\n")))
    return "".join(parts)


def main():
    rng = random.Random(20260815)
    predictor = LexiconPredictor()
    out = (Path(__file__).resolve().parents[1] / "predictor_service" / "tests"
           / "data" / "label_vectors.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for _ in range(500):
        text = build_text(rng)
        target = rng.choice((BoundaryTarget.STYLE, BoundaryTarget.CAPABILITY))
        verdict = predictor.predict(text, target)
        lines.append(json.dumps(
            {
                "text": text,
                "target": target.value,
                "keep_prefix_chars": verdict.keep_prefix_chars,
                "units": [
                    {"start": u.start, "end": u.end, "label": u.label.value}
                    for u in verdict.units
                ],
            },
            ensure_ascii=False,
            separators=(",", ":"),
        ))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} vectors to {out}")


if __name__ == "__main__":
    main()

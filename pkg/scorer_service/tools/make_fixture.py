"""Generate the committed 40-snippet scoring fixture and its manifest.

Run once from the package root; the outputs are committed so tests never
regenerate them:

    python tools/make_fixture.py

Human snippets are public-domain literary passages.  Generated snippets
are sampled from the service's own performer model with a fixed seed —
the same small LM the service scores with, which is exactly the kind of
text the detector must rank below human prose.  The manifest freezes the
scores, token counts, and ranking AUC measured at generation time.
"""
from __future__ import annotations

import json
import random
from pathlib import Path

from scorer_service.config import ServiceConfig
from scorer_service.lm import build_models, sample_text
from scorer_service.scoring import PerplexityRatioScorer, auc_human_over_generated
from scorer_service.tokenizer import count_tokens

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "scorer_service" / "data"

HUMAN_SNIPPETS = [
    "It was the best of times, it was the worst of times, it was the age "
    "of wisdom, it was the age of foolishness, it was the epoch of belief, "
    "it was the epoch of incredulity.",
    "Call me Ishmael. Some years ago, never mind how long precisely, "
    "having little or no money in my purse, and nothing particular to "
    "interest me on shore, I thought I would sail about a little and see "
    "the watery part of the world.",
    "It is a truth universally acknowledged, that a single man in "
    "possession of a good fortune must be in want of a wife.",
    "Whether I shall turn out to be the hero of my own life, or whether "
    "that station will be held by anybody else, these pages must show.",
    "Alice was beginning to get very tired of sitting by her sister on the "
    "bank, and of having nothing to do: once or twice she had peeped into "
    "the book her sister was reading, but it had no pictures or "
    "conversations in it.",
    "I went to the woods because I wished to live deliberately, to front "
    "only the essential facts of life, and see if I could not learn what "
    "it had to teach, and not, when I came to die, discover that I had "
    "not lived.",
    "Four score and seven years ago our fathers brought forth on this "
    "continent a new nation, conceived in liberty, and dedicated to the "
    "proposition that all men are created equal.",
    "You don't know about me without you have read a book by the name of "
    "The Adventures of Tom Sawyer; but that ain't no matter. That book "
    "was made by Mr. Mark Twain, and he told the truth, mainly.",
    "All happy families are alike; each unhappy family is unhappy in its "
    "own way. Everything was in confusion in the Oblonskys' house.",
    "In the beginning God created the heaven and the earth. And the earth "
    "was without form, and void; and darkness was upon the face of the "
    "deep.",
    "It was a bright cold day in April, and the clocks were striking "
    "thirteen. Winston Smith, his chin nuzzled into his breast in an "
    "effort to escape the vile wind, slipped quickly through the glass "
    "doors of Victory Mansions.",
    "Happy families are all alike, but a man who keeps a diary of his own "
    "journeys soon finds that no two roads, however often traveled, are "
    "ever quite the same from one season to the next.",
    "The studio was filled with the rich odour of roses, and when the "
    "light summer wind stirred amidst the trees of the garden, there came "
    "through the open door the heavy scent of the lilac.",
    "When Gregor Samsa woke one morning from uneasy dreams he found "
    "himself transformed in his bed into a gigantic insect, and for a "
    "while he lay still, wondering what had happened to him.",
    "It was a pleasure to walk out on a fine morning in May, when the "
    "hedges were white with blossom and the larks rose singing from the "
    "young corn, and to feel that the long winter was over at last.",
    "There was no possibility of taking a walk that day. We had been "
    "wandering, indeed, in the leafless shrubbery an hour in the morning; "
    "but since dinner the cold winter wind had brought with it clouds so "
    "sombre, and a rain so penetrating, that further out-door exercise "
    "was now out of the question.",
    "The sea is everything. It covers seven tenths of the terrestrial "
    "globe. Its breath is pure and healthy. It is an immense desert, "
    "where man is never lonely, for he feels life stirring on all sides.",
    "I am an invisible man. No, I am not a spook like those who haunted "
    "Edgar Allan Poe; nor am I one of your Hollywood-movie ectoplasms. I "
    "am a man of substance, of flesh and bone, fiber and liquids.",
    "We hold these truths to be self-evident, that all men are created "
    "equal, that they are endowed by their Creator with certain "
    "unalienable Rights, that among these are Life, Liberty and the "
    "pursuit of Happiness.",
    "Last night I dreamt I went to Manderley again. It seemed to me I "
    "stood by the iron gate leading to the drive, and for a while I could "
    "not enter, for the way was barred to me.",
]

GENERATION_SEED = 20240614


def main() -> None:
    config = ServiceConfig()
    observer, performer = build_models(config.observer_model,
                                       config.performer_model)
    scorer = PerplexityRatioScorer(observer=observer, performer=performer,
                                   max_input_tokens=config.max_input_tokens)

    rng = random.Random(GENERATION_SEED)
    generated = [sample_text(performer, rng, max_tokens=110,
                             stop_sentences=4) for _ in range(20)]

    human_scores = scorer.score_texts(HUMAN_SNIPPETS)
    generated_scores = scorer.score_texts(generated)
    auc = auc_human_over_generated(human_scores, generated_scores)

    snippets = {"human": HUMAN_SNIPPETS, "generated": generated}
    manifest = {
        "observer_model": config.observer_model,
        "performer_model": config.performer_model,
        "max_input_tokens": config.max_input_tokens,
        "generation_seed": GENERATION_SEED,
        "auc_human_over_generated": auc,
        "mean_human_score": sum(human_scores) / len(human_scores),
        "mean_generated_score": sum(generated_scores) / len(generated_scores),
        "human_scores": human_scores,
        "generated_scores": generated_scores,
        "human_token_counts": [count_tokens(t) for t in HUMAN_SNIPPETS],
        "generated_token_counts": [count_tokens(t) for t in generated],
    }

    (DATA_DIR / "fixture_snippets.json").write_text(
        json.dumps(snippets, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8")
    (DATA_DIR / "fixture_manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"AUC {auc:.4f}  mean human {manifest['mean_human_score']:.4f}  "
          f"mean generated {manifest['mean_generated_score']:.4f}")


if __name__ == "__main__":
    main()

"""Regenerates data/toy_embeddings.txt and data/toy_vocab.tsv.

Word vectors are a semantic-family centre plus small seeded noise, so the
toy clustering produces recognisable groups. Counts follow Visual Genome's
50-predicate frequency profile.
"""
import random
from pathlib import Path

DIM = 8
FAMILIES = {
    "spatial": ["on", "above", "over", "under", "behind", "front", "near", "between", "along",
                "across", "against", "back", "at", "in", "into"],
    "possession": ["has", "of", "with", "belonging", "part", "made", "for", "and", "to", "from"],
    "clothing": ["wearing", "wears", "covered", "covering"],
    "posture": ["sitting", "standing", "laying", "lying", "hanging", "mounted", "attached",
                "parked", "growing", "painted"],
    "action": ["holding", "carrying", "riding", "using", "eating", "playing", "looking",
               "watching", "walking", "flying", "says"],
}

COUNTS = [
    ("on", 712409), ("has", 277936), ("wearing", 136099), ("of", 146339), ("in", 86027),
    ("near", 96589), ("with", 66425), ("above", 47341), ("holding", 42722), ("behind", 41356),
    ("under", 22596), ("sitting on", 18643), ("wears", 15457), ("standing on", 14185),
    ("in front of", 13715), ("attached to", 10190), ("at", 9903), ("hanging from", 9894),
    ("over", 9317), ("for", 9145), ("riding", 8856), ("carrying", 5213), ("eating", 4688),
    ("walking on", 4613), ("playing", 3810), ("covering", 3806), ("laying on", 3739),
    ("along", 3624), ("watching", 3490), ("and", 3477), ("between", 3411),
    ("belonging to", 3288), ("painted on", 3095), ("against", 3092), ("looking at", 3083),
    ("from", 2945), ("parked on", 2721), ("to", 2517), ("made of", 2380), ("covered in", 2312),
    ("mounted on", 2253), ("says", 2241), ("part of", 2065), ("across", 1996),
    ("flying in", 1973), ("on back of", 1914), ("lying on", 1869), ("growing on", 1853),
    ("walking in", 1740), ("using", 1925),
]


def main() -> None:
    rng = random.Random(20240601)
    root = Path(__file__).resolve().parent.parent / "data"
    centres = {name: [rng.gauss(0.0, 1.0) for _ in range(DIM)] for name in FAMILIES}
    lines = []
    for family, words in FAMILIES.items():
        for word in words:
            vec = [c + rng.gauss(0.0, 0.35) for c in centres[family]]
            lines.append(word + " " + " ".join(f"{v:.4f}" for v in vec))
    assert len(lines) == 50, len(lines)
    (root / "toy_embeddings.txt").write_text("\n".join(lines) + "\n")
    (root / "toy_vocab.tsv").write_text("".join(f"{p}\t{n}\n" for p, n in COUNTS))


if __name__ == "__main__":
    main()

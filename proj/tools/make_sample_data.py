#!/usr/bin/env python3
"""Regenerates the sample drawings and the sample scorer exemplar bundle.

The drawings are synthetic stand-ins (no real children's artwork ships with
the repository). Output is deterministic.
"""
import json
import math
import random
from pathlib import Path

from PIL import Image, ImageDraw

ROOT = Path(__file__).resolve().parent.parent
SAMPLES = ROOT / "data" / "samples"
BUNDLE = ROOT / "data" / "scorer_bundle"


def canvas():
    return Image.new("RGB", (320, 240), "white")


def rainbow():
    im = canvas()
    d = ImageDraw.Draw(im)
    colors = ["red", "orange", "yellow", "green", "blue", "purple"]
    for i, c in enumerate(colors):
        r = 140 - i * 14
        d.arc([160 - r, 200 - r, 160 + r, 200 + r], 180, 360, fill=c, width=12)
    return im


def abstract():
    im = canvas()
    d = ImageDraw.Draw(im)
    rng = random.Random(7)
    for _ in range(14):
        x, y = rng.randrange(300), rng.randrange(220)
        w, h = rng.randrange(20, 90), rng.randrange(10, 60)
        d.rectangle([x, y, x + w, y + h], fill=rng.choice(["blue", "red", "white", "navy"]),
                    outline="black")
    return im


def people():
    im = canvas()
    d = ImageDraw.Draw(im)
    for i, c in enumerate(["pink", "gold", "skyblue"]):
        cx = 70 + i * 90
        d.ellipse([cx - 20, 50, cx + 20, 90], outline="black", fill=c, width=3)
        d.line([cx, 90, cx, 160], fill="black", width=3)
        d.line([cx - 25, 115, cx + 25, 115], fill="black", width=3)
        d.line([cx, 160, cx - 18, 205], fill="black", width=3)
        d.line([cx, 160, cx + 18, 205], fill="black", width=3)
    return im


def sun_house():
    im = canvas()
    d = ImageDraw.Draw(im)
    d.rectangle([90, 120, 210, 220], outline="brown", fill="tan", width=3)
    d.polygon([(80, 120), (150, 60), (220, 120)], outline="brown", fill="firebrick")
    d.ellipse([250, 20, 300, 70], fill="yellow", outline="orange")
    for k in range(8):
        a = k * math.pi / 4
        d.line([275 + 30 * math.cos(a), 45 + 30 * math.sin(a),
                275 + 42 * math.cos(a), 45 + 42 * math.sin(a)], fill="orange", width=3)
    return im


def ocean():
    im = canvas()
    d = ImageDraw.Draw(im)
    for row in range(6):
        pts = [(x, 120 + row * 18 + 8 * math.sin(x / 18 + row)) for x in range(0, 321, 8)]
        d.line(pts, fill="teal" if row % 2 else "blue", width=4)
    d.ellipse([40, 60, 110, 90], fill="gray", outline="black")
    return im


DRAWINGS = {
    "rainbow": rainbow,
    "abstract": abstract,
    "peeps": people,
    "sun_house": sun_house,
    "ocean": ocean,
}

EXEMPLARS = [
    ("rainbow", "Rainbow",
     "This artwork shows a rainbow drawn with thick arcs of red, orange, yellow, green, blue and "
     "purple, stacked from the outside in. The arcs start at the bottom edge of the page and "
     "curve up across most of the white paper.",
     (4, 4, 4, 4, 0), {},
     "Accurate, complete and neutral: every arc and its color order is named without guessing "
     "at meaning."),
    ("abstract", "Abstract blue white red",
     "This vibrant piece expresses the child's joyful feelings about their country through bold "
     "patriotic blocks of color.",
     (1, 2, 2, 2, 0),
     {"presumptive": "Assumes patriotic intent and emotions the image does not show.",
      "reductive": "Reduces overlapping shapes to 'blocks of color'.",
      "detail": "No positions, sizes or outlines are given.",
      "coverage": "Misses the black outlines and the navy rectangles."},
     "Mostly interpretation; little of what is actually on the page is described."),
    ("peeps", "People",
     "Three stick figures stand in a row. Each has a round head colored pink, gold or light "
     "blue, a straight body, outstretched arms and two legs. They are drawn in black lines on "
     "white paper, evenly spaced across the middle.",
     (4, 4, 3, 4, 0),
     {"detail": "Does not mention that the figures have no facial features."},
     "Neutral and complete; one small detail is missing."),
    ("sun_house", "House and sun",
     "A house with a tan square front and a dark red triangular roof sits at the bottom center. "
     "In the top right corner a yellow sun has short orange rays. Here is a bulleted summary: "
     "- house - sun.",
     (4, 4, 4, 4, 1),
     {"misc": "Ends with an unnecessary bulleted list that repeats the description."},
     "Good description, one point removed for the redundant list."),
    ("ocean", "Ocean",
     "Wavy lines.",
     (4, 1, 0, 1, 0),
     {"reductive": "Reduces the whole drawing to two words.",
      "detail": "No colors, count of waves or the gray shape are mentioned.",
      "coverage": "The gray oval above the waves is missing."},
     "Not presumptive, but far too brief to be useful."),
]


def main():
    SAMPLES.mkdir(parents=True, exist_ok=True)
    BUNDLE.mkdir(parents=True, exist_ok=True)
    for name, fn in DRAWINGS.items():
        fn().save(SAMPLES / f"{name}.png", optimize=False)

    manifest = [{"id": name, "image_path": f"{name}.png"} for name in DRAWINGS]
    (SAMPLES / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    entries = []
    for key, label, text, (a, b, c, d, misc), rationale, overall in EXEMPLARS:
        card = {"presumptive": a, "reductive": b, "detail": c, "coverage": d,
                "misc_subtraction": misc, "total": max(0, a + b + c + d - misc),
                "rationale": rationale, "scored_by": "llm"}
        (BUNDLE / f"{key}.description.txt").write_text(text + "\n")
        (BUNDLE / f"{key}.scorecard.json").write_text(json.dumps(card, indent=2) + "\n")
        (BUNDLE / f"{key}.rationale.txt").write_text(overall + "\n")
        entries.append({"image": f"../samples/{key}.png", "label": label,
                        "description": f"{key}.description.txt",
                        "scorecard": f"{key}.scorecard.json",
                        "rationale": f"{key}.rationale.txt"})
    (BUNDLE / "manifest.json").write_text(json.dumps({"exemplars": entries}, indent=2) + "\n")


if __name__ == "__main__":
    main()

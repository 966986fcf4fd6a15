#!/usr/bin/env python3
"""Writes the bundled sample phone corpus to data/sample/.

Output is fully determined by SEED; rerunning reproduces the same files.
"""

import json
import random
from pathlib import Path

SEED = 20240611
OUT = Path(__file__).resolve().parent.parent / "data" / "sample"

PHONES = [
    ("Samsung", "Galaxy S4", "Android", "16GB", "Black"),
    ("Samsung", "Galaxy S5", "Android", "16GB", "Black"),
    ("Samsung", "Galaxy S6", "Android", "32GB", "Gold"),
    ("Samsung", "Galaxy Alpha", "Android", "32GB", "Silver"),
    ("Samsung", "Galaxy Note 3", "Android", "32GB", "Silver"),
    ("Samsung", "Galaxy S", "Android", "16GB", None),
    ("LG", "G2", "Android", "32GB", "Black"),
    ("LG", "G3", "Android", "32GB", "Black"),
    ("LG", "G5", "Android", "32GB", "Silver"),
    ("LG", "G Stylo", "Android", "16GB", "Blue"),
    ("LG", "Optimus L90", "Android", "8GB", "Black"),
    ("Motorola", "Moto G", "Android", "8GB", "Black"),
    ("Motorola", "Moto X", "Android", "8GB", "Black"),
    ("Motorola", "Droid Turbo", "Android", "32GB", "Black"),
    ("HTC", "One M8", "Android", "32GB", "Silver"),
    ("HTC", "One M9", "Android", "32GB", "Silver"),
    ("HTC", "Desire 816", "Android", "8GB", "White"),
    ("Apple", "iPhone 5s", "iOS", "16GB", "Silver"),
    ("Apple", "iPhone 6", "iOS", "64GB", "Silver"),
    ("Apple", "iPhone 6 Plus", "iOS", "64GB", "Silver"),
    ("Apple", "iPhone SE", "iOS", "16GB", None),
    ("Nokia", "Lumia 920", "Windows Phone", "32GB", "Blue"),
    ("Nokia", "Lumia 1020", "Windows Phone", "32GB", "Blue"),
    ("Microsoft", "Lumia 640", "Windows Phone", "8GB", "Blue"),
    ("Microsoft", "Lumia 950", "Windows Phone", "32GB", "White"),
    ("BlackBerry", "Q10", "BlackBerry OS", "16GB", "Black"),
    ("BlackBerry", "Z10", "BlackBerry OS", "16GB", "Black"),
    ("BlackBerry", "Passport", "BlackBerry OS", "32GB", None),
    ("ZTE", "Axon 7", "Android", "64GB", "Gold"),
    ("ZTE", "ZMax Pro", "Android", "32GB", "Black"),
    ("OnePlus", "OnePlus 3", "Android", "64GB", "Black"),
    ("OnePlus", "OnePlus 2", "Android", "64GB", "Black"),
    ("Sony", "Xperia Z3", "Android", "32GB", "Black"),
    ("Sony", "Xperia Z5", "Android", "32GB", "black"),
    ("Huawei", "Nexus 6P", "Android", "32GB", "Silver"),
    (None, "Unlocked Basic Phone", None, None, "Black"),
]

FEATURES = [
    "battery",
    "battery life",
    "screen",
    "display",
    "camera",
    "speakers",
    "sound quality",
    "design",
    "signal",
    "performance",
    "software",
    "price",
    "storage",
    "size",
    "keyboard",
    "apps",
    "call quality",
    "resolution",
]

POSITIVE = [
    "The {f} is great.",
    "I love the {f} on this phone.",
    "The {f} is excellent and works well.",
    "Honestly the {f} is really nice.",
    "The {f} is amazing for the money.",
    "I am very impressed with the {f}.",
    "The {f} seems to be pretty good.",
    "Its {f} is fantastic, no complaints here.",
    "The {f} is solid and reliable.",
    "My favorite thing is the {f}, it is superb.",
    "The {f} is simply awesome.",
    "I was happy with the {f} from day one.",
]

NEGATIVE = [
    "The {f} is terrible.",
    "I am disappointed with the {f}.",
    "The {f} is not good at all.",
    "Sadly the {f} is poor.",
    "The {f} is awful and frustrating.",
    "The {f} is mediocre.",
    "The {f} is really bad.",
    "Unfortunately the {f} is weak.",
    "The {f} is unreliable and annoying.",
    "I hate the {f} on this one.",
]

FILLER = [
    "I bought this phone for my wife.",
    "It arrived two days after I ordered it.",
    "I have been using it for a month now.",
    "This is my second phone from this brand.",
    "Shipping was on time.",
    "I switched from an older model.",
]

# Messy spacing and punctuation the normalizer has to repair.
MESSES = [
    lambda t: t.replace(". ", ".", 1),
    lambda t: t.replace(" ", "  ", 2),
    lambda t: t.rstrip(".") + " .",
    lambda t: t.rstrip("."),
    lambda t: t,
]


def main() -> None:
    rng = random.Random(SEED)
    OUT.mkdir(parents=True, exist_ok=True)
    ids = [f"B00{1000 + i}" for i in range(len(PHONES))]

    meta_lines = []
    for i, (brand, model, os_name, memory, color) in enumerate(PHONES):
        title = model if brand is None or model.startswith(("OnePlus", "Axon")) else f"{brand} {model}"
        others = [p for p in ids if p != ids[i]]
        also = rng.sample(others, 3)
        if i % 7 == 0:
            also.append("B00XXXXX")  # not in the catalog
        if i % 11 == 0:
            also.append(ids[i])  # self reference, dropped at ingest
        record = {
            "id": ids[i],
            "title": title,
            "category_path": ["Cell Phones & Accessories", "Cell Phones"],
            "brand": brand,
            "os": os_name,
            "memory": memory,
            "color": color,
            "price": round(rng.uniform(79, 799), 2),
            "also_viewed": also,
        }
        meta_lines.append(json.dumps({k: v for k, v in record.items() if v is not None}))

    review_lines = []
    n = 0
    feature_names = FEATURES
    for i, pid in enumerate(ids):
        count = 4 if i == len(ids) - 1 else 12
        focus = rng.sample(feature_names, 6)
        for _ in range(count):
            sentences = []
            if rng.random() < 0.4:
                sentences.append(rng.choice(FILLER))
            for _ in range(rng.choice([1, 2, 2, 3])):
                feature = rng.choice(focus) if rng.random() < 0.75 else rng.choice(feature_names)
                pool = POSITIVE if rng.random() < 0.62 else NEGATIVE
                sentence = rng.choice(pool).format(f=feature)
                if feature.endswith("s"):
                    sentence = sentence.replace(" is ", " are ")
                sentences.append(sentence)
            text = " ".join(sentences)
            text = rng.choice(MESSES)(text)
            rating = rng.randint(1, 5)
            review_lines.append(json.dumps({"id": f"R{n:05d}", "product_id": pid, "text": text, "rating": rating}))
            n += 1

    (OUT / "meta.jsonl").write_text("\n".join(meta_lines) + "\n", encoding="utf-8")
    (OUT / "reviews.jsonl").write_text("\n".join(review_lines) + "\n", encoding="utf-8")
    print(f"wrote {len(meta_lines)} products and {len(review_lines)} reviews to {OUT}")


if __name__ == "__main__":
    main()

"""Structured-extraction benchmark instances and their deterministic scorer.

Instances interleave entity "cards" (3-20 per instance) with filler passages
(3-10), joined by blank lines. The scorer aligns predicted records to gold by
exact name match (after NFC normalization and whitespace trim), grants
partial per-field credit to matched entries, and normalizes by matched +
false positives + false negatives. Everything is seeded and hermetic: entity
facts come from local template pools, not from any external source.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field

import numpy as np

SUBSETS = ("doctors", "movies", "organizations", "products")

REQUIRED_FIELDS = {
    "doctors": ("specialization", "city"),
    "movies": ("country", "year"),
    "organizations": ("address", "site"),
    "products": ("material", "color"),
}

MIN_ENTRIES, MAX_ENTRIES = 3, 20
MIN_PASSAGES, MAX_PASSAGES = 3, 10

EXTRACTION_PROMPTS = {
    "doctors": (
        "Find all doctor review cards in the text and compose a JSON object "
        "with the following fields: name --- doctor's name; specialization "
        "--- specialization; city --- city. There is no need to reproduce "
        "the reviews. Output only JSON. Do not skip cards and do not produce "
        "duplicates."
    ),
    "movies": (
        "Find all movie review cards in the text and compose a JSON object "
        "with the following fields: name --- movie title; country --- "
        "country of production; year --- year of release. There is no need "
        "to reproduce the reviews. Output only JSON. Do not skip cards and "
        "do not produce duplicates."
    ),
    "organizations": (
        "Find all organization cards in the text and compose a JSON object "
        "with the following fields: name --- the name of the organization "
        "(exactly as written in the card); address --- the address; site "
        "--- the website. There is no need to reproduce the reviews. Output "
        "only JSON. Do not skip cards and do not produce duplicates."
    ),
    "products": (
        "Find all product cards in the text and compose a JSON object with "
        "the following fields: name --- product name (exactly as written in "
        "the card); material --- material; color --- color. There is no "
        "need to reproduce the descriptions. Output only JSON. Do not skip "
        "cards and do not produce duplicates."
    ),
}


@dataclass(frozen=True)
class EntryRecord:
    name: str
    fields: dict

    def flat(self) -> dict:
        return {"name": self.name, **self.fields}


@dataclass(frozen=True)
class Text2JsonInstance:
    prompt_text: str
    gold: tuple
    subset: str


@dataclass
class ScoreReport:
    score: float
    matched: int
    false_positives: int
    false_negatives: int
    per_entry: list = field(default_factory=list)
    parse_error: bool = False

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "matched": self.matched,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "per_entry": [{"name": n, "entry_score": s} for n, s in self.per_entry],
            "parse_error": self.parse_error,
        }


# ---------------------------------------------------------------------------
# template pools

_FIRST = [
    "Emma", "Lukas", "Sofia", "Mateo", "Hana", "Viktor", "Amara", "Jonas",
    "Leila", "Tomas", "Ingrid", "Rafael", "Noor", "Stefan", "Priya", "Galina",
    "Omar", "Beatriz", "Henrik", "Yuki", "Carmen", "Dmitri", "Alice", "Farid",
]
_LAST = [
    "Kovacs", "Lindqvist", "Moreau", "Takahashi", "Petrov", "Silva", "Haugen",
    "Rossi", "Nowak", "Fernandez", "Bergman", "Okafor", "Dubois", "Keller",
    "Andersen", "Marino", "Sato", "Vasquez", "Novotny", "Janssen", "Costa",
    "Weber", "Olsen", "Ibrahim",
]
_SPECIALIZATIONS = [
    "Cardiology", "Dermatology", "Neurology", "Pediatrics", "Orthopedics",
    "Oncology", "Psychiatry", "Radiology", "Endocrinology", "Ophthalmology",
    "Gastroenterology", "Rheumatology", "Urology", "Nephrology", "Pulmonology",
    "Allergology", "Hematology", "Geriatrics", "Anesthesiology", "Immunology",
]
_CITIES = [
    "Zurich", "Porto", "Krakow", "Tallinn", "Lyon", "Graz", "Malmo", "Bergen",
    "Valencia", "Leipzig", "Utrecht", "Brno", "Turku", "Ghent", "Padua",
    "Aarhus", "Bilbao", "Gdansk", "Basel", "Nantes", "Riga", "Cork",
    "Salzburg", "Trieste",
]
_DOCTOR_REVIEWS = [
    "Patients mention short waiting times and clear explanations.",
    "The practice handles follow-up appointments within a week.",
    "Reviewers describe the consultations as thorough and unhurried.",
    "Several visitors note that test results were discussed in detail.",
    "The clinic staff is described as well organized and attentive.",
    "Appointments reportedly start on schedule most of the time.",
]

_MOVIE_ADJ = [
    "Silent", "Crimson", "Endless", "Hollow", "Distant", "Golden", "Broken",
    "Winter", "Restless", "Hidden", "Burning", "Paper", "Northern", "Glass",
    "Midnight", "Forgotten", "Electric", "Quiet", "Iron", "Amber", "Violet",
    "Last", "Wandering", "Salt",
]
_MOVIE_NOUN = [
    "Harbor", "Orchard", "Meridian", "Lantern", "Causeway", "Archive",
    "Compass", "Station", "Garden", "Frontier", "Cartographer", "Tide",
    "Signal", "Vineyard", "Summit", "Courier", "Labyrinth", "Monsoon",
    "Parallel", "Observatory", "Crossing", "Pavilion", "Current", "Antler",
]
_COUNTRIES = [
    "France", "Japan", "Brazil", "Canada", "Italy", "South Korea", "Spain",
    "Germany", "Argentina", "Sweden", "Poland", "Australia", "Mexico",
    "Netherlands", "Norway", "Portugal", "Denmark", "Ireland", "Finland",
    "Austria",
]
_MOVIE_REVIEWS = [
    "Critics point to the restrained cinematography and patient pacing.",
    "The ensemble cast earned praise at several festival screenings.",
    "Reviewers highlight the score and the sparse, deliberate dialogue.",
    "The film drew attention for its long unbroken takes.",
    "Audiences responded to the understated ending.",
    "The screenplay was adapted from an unpublished short story.",
]

_ORG_PREFIX = [
    "Northbridge", "Bluefield", "Stonegate", "Clearwater", "Ironwood",
    "Summitview", "Redmoor", "Lakeshore", "Fairhaven", "Westerly",
    "Granite Hill", "Silverbirch", "Oakline", "Brightwater", "Eastvale",
    "Copperfield", "Harborview", "Greenmont", "Ashford", "Millbrook",
]
_ORG_KIND = [
    "Analytics", "Logistics", "Consulting", "Laboratories", "Publishing",
    "Engineering", "Robotics", "Textiles", "Foods", "Energy", "Optics",
    "Software", "Materials", "Acoustics", "Instruments", "Diagnostics",
]
_ORG_SUFFIX = ["Group", "Partners", "Institute", "Collective", "Works", "Bureau"]
_STREETS = [
    "Alder", "Birch", "Cedar", "Dorset", "Elm", "Foxglove", "Garnet",
    "Hazel", "Juniper", "Kestrel", "Linden", "Mulberry", "Nutmeg", "Osprey",
    "Primrose", "Quarry", "Rowan", "Sycamore", "Thistle", "Willow",
]
_ORG_BLURBS = [
    "The organization maintains regional offices and a small research arm.",
    "Founded as a family business, it now serves clients in several countries.",
    "Its public reports emphasize long-term supplier relationships.",
    "The team publishes an annual survey of its industry segment.",
    "Recent filings show steady headcount and modest expansion.",
]

_PRODUCT_ADJ = [
    "Folding", "Compact", "Heavy-Duty", "Adjustable", "Portable", "Stackable",
    "Insulated", "Modular", "Ergonomic", "Weatherproof", "Reinforced",
    "Collapsible", "Magnetic", "Ventilated", "Slimline", "Swivel",
    "Quick-Release", "Double-Walled", "Low-Profile", "Wide-Base",
]
_PRODUCT_NOUN = [
    "Desk Organizer", "Garden Trowel", "Reading Lamp", "Storage Crate",
    "Laptop Stand", "Water Bottle", "Tool Chest", "Picture Frame",
    "Coat Rack", "Mixing Bowl", "Camping Stool", "Spice Rack", "Bookend",
    "Cable Reel", "Plant Stand", "Serving Tray", "Step Ladder", "Wall Shelf",
    "Knife Block", "Utility Cart", "Shoe Bench", "Drawer Divider",
    "Magazine Holder", "Tablet Easel",
]
_COLORS = [
    "Black", "White", "Graphite", "Navy", "Olive", "Burgundy", "Sand",
    "Charcoal", "Ivory", "Forest Green", "Slate Blue", "Copper", "Mustard",
    "Terracotta", "Pearl Grey", "Midnight Blue",
]
_MATERIALS = [
    "Oak", "Bamboo", "Stainless Steel", "Walnut", "Aluminium", "Beech",
    "Recycled Plastic", "Powder-Coated Steel", "Cork", "Birch Plywood",
    "Anodized Aluminium", "Ash", "Tempered Glass", "Carbon Steel", "Rattan",
    "Silicone",
]
_CATEGORIES = [
    "Home Office", "Garden", "Kitchen", "Storage", "Lighting", "Furniture",
    "Outdoor", "Workshop",
]

_FILLER_POOL = [
    "Tidal marshes act as natural buffers between open water and dry land. "
    "Their grasses slow incoming waves, trap suspended sediment, and over "
    "decades raise the ground surface fast enough to keep pace with gradual "
    "changes in sea level.",
    "Early mechanical clocks kept time with a verge escapement, a device "
    "that let a toothed wheel advance one tick at a time. Accuracy improved "
    "dramatically once pendulums replaced balance bars, shrinking daily "
    "drift from minutes to seconds.",
    "Sourdough cultures are stable communities of wild yeast and lactic "
    "acid bacteria. The bacteria acidify the dough, which strengthens the "
    "gluten network, lengthens shelf life, and gives the crumb its "
    "characteristic tang.",
    "The freight container standardized in the 1960s reduced port labor "
    "per ton by an order of magnitude. Ships, cranes, trucks, and rail cars "
    "could finally be engineered around a single interchangeable unit.",
    "Alpine glaciers move by two mechanisms: the slow creep of ice crystals "
    "under pressure and basal sliding where meltwater lubricates the bed. "
    "Seasonal velocity changes mostly reflect the second mechanism.",
    "Movable type spread unevenly because scripts differ in how many "
    "distinct characters a printer must stock. Alphabets needed a few "
    "dozen punches; logographic systems required thousands of individually "
    "cast pieces.",
    "A suspension bridge carries its deck from vertical hangers attached to "
    "main cables, which transfer load to towers and anchorages. Stiffening "
    "trusses keep the deck from twisting in gusty crosswinds.",
    "Honeybee colonies regulate hive temperature within a narrow band. "
    "Workers fan their wings to move air in summer and cluster tightly in "
    "winter, shivering their flight muscles to generate heat.",
    "Lighthouse lenses designed by Fresnel replaced thick glass domes with "
    "concentric prismatic rings. The design captured far more of the lamp's "
    "light and could be shipped in sections and assembled on site.",
    "Peat forms where waterlogged ground starves plant debris of oxygen, "
    "slowing decay to a near standstill. A meter of peat can represent a "
    "thousand years of accumulated growth.",
    "Transcontinental telegraph lines collapsed message delivery times from "
    "weeks to minutes. Operators developed compact abbreviations and "
    "relay procedures that anticipated modern network protocols.",
    "Terraced farming converts steep slopes into sequences of level fields. "
    "Each terrace wall slows runoff, giving water time to soak in and "
    "carrying overflow safely to the level below.",
]


def _pick_unique_pairs(rng: np.random.Generator, pool_a, pool_b, count: int):
    total = len(pool_a) * len(pool_b)
    idx = rng.choice(total, size=count, replace=False)
    return [(pool_a[int(i) // len(pool_b)], pool_b[int(i) % len(pool_b)]) for i in idx]


def _make_entries(subset: str, rng: np.random.Generator, count: int) -> list[EntryRecord]:
    entries = []
    if subset == "doctors":
        for first, last in _pick_unique_pairs(rng, _FIRST, _LAST, count):
            entries.append(
                EntryRecord(
                    name=f"{first} {last}",
                    fields={
                        "specialization": str(rng.choice(_SPECIALIZATIONS)),
                        "city": str(rng.choice(_CITIES)),
                    },
                )
            )
    elif subset == "movies":
        for adj, noun in _pick_unique_pairs(rng, _MOVIE_ADJ, _MOVIE_NOUN, count):
            entries.append(
                EntryRecord(
                    name=f"The {adj} {noun}",
                    fields={
                        "country": str(rng.choice(_COUNTRIES)),
                        "year": str(int(rng.integers(1950, 2025))),
                    },
                )
            )
    elif subset == "organizations":
        for prefix, kind in _pick_unique_pairs(rng, _ORG_PREFIX, _ORG_KIND, count):
            suffix = str(rng.choice(_ORG_SUFFIX))
            number = int(rng.integers(1, 200))
            street = str(rng.choice(_STREETS))
            city = str(rng.choice(_CITIES))
            slug = (prefix + kind).replace(" ", "").lower()
            entries.append(
                EntryRecord(
                    name=f"{prefix} {kind} {suffix}",
                    fields={
                        "address": f"{number} {street} Street, {city}",
                        "site": f"www.{slug}.com",
                    },
                )
            )
    elif subset == "products":
        for adj, noun in _pick_unique_pairs(rng, _PRODUCT_ADJ, _PRODUCT_NOUN, count):
            entries.append(
                EntryRecord(
                    name=f"{adj} {noun}",
                    fields={
                        "material": str(rng.choice(_MATERIALS)),
                        "color": str(rng.choice(_COLORS)),
                    },
                )
            )
    else:
        raise ValueError(f"unknown subset {subset!r}")
    return entries


def _render_card(subset: str, entry: EntryRecord, rng: np.random.Generator) -> str:
    f = entry.fields
    if subset == "doctors":
        review = str(rng.choice(_DOCTOR_REVIEWS))
        return f"{entry.name}, {f['specialization']}, {f['city']}.\n{review}"
    if subset == "movies":
        review = str(rng.choice(_MOVIE_REVIEWS))
        return f"{entry.name}, {f['country']}, {f['year']}.\n{review}"
    if subset == "organizations":
        blurb = str(rng.choice(_ORG_BLURBS))
        return f"{entry.name}, {f['address']}, {f['site']}\n{blurb}"
    if subset == "products":
        length = f"{int(rng.integers(10, 200))} cm"
        category = str(rng.choice(_CATEGORIES))
        return (
            f"Product name: {entry.name}\n"
            f"* Color: {f['color']}\n"
            f"* Material: {f['material']}\n"
            f"* Length: {length}\n"
            f"* Category: {category}"
        )
    raise ValueError(f"unknown subset {subset!r}")


def _filler_passages(rng: np.random.Generator, count: int, filler_corpus=None) -> list[str]:
    if filler_corpus is None:
        pool = _FILLER_POOL
    else:
        with open(filler_corpus, encoding="utf-8") as fh:
            pool = [p.strip() for p in fh.read().split("\n\n") if p.strip()]
        if not pool:
            raise ValueError(f"filler corpus {filler_corpus!r} contains no passages")
    idx = rng.choice(len(pool), size=count, replace=count > len(pool))
    return [pool[int(i)] for i in idx]


def generate_instance(subset: str, seed: int, filler_corpus=None) -> Text2JsonInstance:
    """Seeded instance: entity cards mixed with filler passages, joined by
    blank lines. Every gold name appears verbatim in the prompt text."""
    if subset not in SUBSETS:
        raise ValueError(f"unknown subset {subset!r}, expected one of {SUBSETS}")
    rng = np.random.default_rng(seed)
    n_entries = int(rng.integers(MIN_ENTRIES, MAX_ENTRIES + 1))
    n_passages = int(rng.integers(MIN_PASSAGES, MAX_PASSAGES + 1))
    entries = _make_entries(subset, rng, n_entries)
    segments = [_render_card(subset, e, rng) for e in entries]
    segments += _filler_passages(rng, n_passages, filler_corpus)
    order = rng.permutation(len(segments))
    prompt = "\n\n".join(segments[int(i)] for i in order)
    return Text2JsonInstance(prompt_text=prompt, gold=tuple(entries), subset=subset)


def extraction_prompt(subset: str) -> str:
    if subset not in EXTRACTION_PROMPTS:
        raise ValueError(f"unknown subset {subset!r}, expected one of {SUBSETS}")
    return EXTRACTION_PROMPTS[subset]


# ---------------------------------------------------------------------------
# scoring


def _norm(value) -> str | None:
    if isinstance(value, str):
        return unicodedata.normalize("NFC", value).strip()
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return str(value)
    return None


def _extract_records(parsed) -> list[dict] | None:
    if isinstance(parsed, list):
        return [r for r in parsed if isinstance(r, dict)] if all(
            isinstance(r, dict) for r in parsed
        ) else None
    if isinstance(parsed, dict):
        if parsed and all(isinstance(v, dict) for v in parsed.values()):
            # name -> fields mapping
            return [{"name": k, **v} for k, v in parsed.items()]
        if len(parsed) == 1:
            (inner,) = parsed.values()
            if isinstance(inner, list) and all(isinstance(r, dict) for r in inner):
                return inner
    return None


def score(prediction_text: str, gold) -> ScoreReport:
    """Name-anchored soft-IoU entity score.

    Matched entries earn (1 + correct_fields) / (1 + required_fields);
    unmatched predictions are false positives (duplicates beyond the first
    count too), unmatched gold entries are false negatives. The total is the
    per-entry sum divided by matched + FP + FN. Unparseable input scores 0
    with parse_error set instead of raising.
    """
    gold = list(gold)
    try:
        parsed = json.loads(prediction_text)
    except (json.JSONDecodeError, TypeError):
        return ScoreReport(
            score=0.0, matched=0, false_positives=0,
            false_negatives=len(gold), parse_error=True,
        )
    records = _extract_records(parsed)
    if records is None:
        return ScoreReport(
            score=0.0, matched=0, false_positives=0,
            false_negatives=len(gold), parse_error=True,
        )

    by_name = {}
    for entry in gold:
        key = _norm(entry.name)
        by_name[key] = entry

    matched: dict[str, float] = {}
    false_positives = 0
    per_entry = []
    for rec in records:
        name = _norm(rec.get("name"))
        if name is None or name not in by_name or name in matched:
            false_positives += 1
            continue
        entry = by_name[name]
        required = list(entry.fields.keys())
        correct = 0
        for fname in required:
            if _norm(rec.get(fname)) == _norm(entry.fields[fname]):
                correct += 1
        entry_score = (1 + correct) / (1 + len(required))
        matched[name] = entry_score
        per_entry.append((entry.name, entry_score))

    false_negatives = len(gold) - len(matched)
    denom = len(matched) + false_positives + false_negatives
    total = sum(matched.values()) / denom if denom else 1.0
    return ScoreReport(
        score=total,
        matched=len(matched),
        false_positives=false_positives,
        false_negatives=false_negatives,
        per_entry=per_entry,
    )


# ---------------------------------------------------------------------------
# file interchange


def save_instance(instance: Text2JsonInstance, prompt_path, gold_path) -> None:
    with open(prompt_path, "w", encoding="utf-8") as f:
        f.write(instance.prompt_text)
    with open(gold_path, "w", encoding="utf-8") as f:
        json.dump([e.flat() for e in instance.gold], f, indent=1, ensure_ascii=False)


def load_gold(path) -> list[EntryRecord]:
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    out = []
    for rec in raw:
        fields = {k: v for k, v in rec.items() if k != "name"}
        out.append(EntryRecord(name=rec["name"], fields=fields))
    return out

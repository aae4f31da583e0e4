"""Desk-scale fixture generators for the selection engine.

"redundant-needle": every document buries one answer-bearing sentence
under R near-duplicate sentences that all score higher on query similarity,
so similarity-only selection misses the answer at tight budgets while
diversity-aware selection recovers it. "tiny-qa": 50 hand-authored QA
pairs over small documents. Embeddings come from the hash-based pseudo
encoder, so generation needs no ML runtime.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .demb import write_demb_atomic
from .encoders import PseudoEncoder

FIXTURE_NAMES = ("redundant-needle", "tiny-qa")


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    m = matrix.astype(np.float64)
    return (m / np.linalg.norm(m, axis=1, keepdims=True)).astype(np.float32)


def make_redundant_needle(out_dir: Path, n_docs: int = 200,
                          redundancy: int = 10, n_fillers: int = 49,
                          seed: int = 7, dim: int = 256) -> dict:
    """Token-wise construction; ten-token sentences throughout.

    Redundant sentences share 9 of 10 tokens with each other and 6 with
    the query; the needle shares 5 tokens with the query but only 1 with
    the redundant block. Under the bag-of-words pseudo encoder that pins
    cos(query, redundant) > cos(query, needle) >> cos(query, filler), with
    the redundant block mutually near-identical.
    """
    encoder = PseudoEncoder(dim)
    rng = np.random.default_rng(seed)
    segment_rows: list[dict] = []
    example_rows: list[dict] = []
    texts: list[str] = []
    query_texts: list[str] = []

    for d in range(n_docs):
        common = [f"topic{d}word{k}" for k in range(9)]
        bridge = [f"link{d}a", f"link{d}b", f"link{d}c", f"link{d}d"]
        # query shares 6 tokens with every redundant sentence but only 4
        # with the needle, so similarity alone always prefers the block
        query_tokens = common[:6] + bridge
        needle_tokens = ([common[0], f"answer{d}"] + bridge[:3]
                         + [f"detail{d}x{k}" for k in range(5)])

        doc_texts: list[str] = []
        for i in range(redundancy):
            doc_texts.append(" ".join(common + [f"variant{d}n{i}"]))
        doc_texts.append(" ".join(needle_tokens))
        for i in range(n_fillers):
            doc_texts.append(" ".join(f"noise{d}f{i}t{k}" for k in range(10)))

        perm = rng.permutation(len(doc_texts))
        for seg_index, j in enumerate(perm):
            segment_rows.append({"doc_id": f"doc{d}", "seg_index": seg_index,
                                 "text": doc_texts[j], "n_tokens": 10})
            texts.append(doc_texts[j])
        example_rows.append({"query": " ".join(query_tokens),
                             "answers": [f"answer{d}"],
                             "doc_ids": [f"doc{d}"]})
        query_texts.append(" ".join(query_tokens))

    out_dir.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out_dir / "segments.jsonl", segment_rows)
    _write_jsonl(out_dir / "examples.jsonl", example_rows)
    write_demb_atomic(out_dir / "embeddings.demb",
                      _normalize_rows(encoder.encode(texts)))
    write_demb_atomic(out_dir / "queries.demb",
                      _normalize_rows(encoder.encode(query_texts)))
    meta = {"name": "redundant-needle", "n_docs": n_docs,
            "redundancy": redundancy, "n_fillers": n_fillers, "seed": seed,
            "dim": dim, "model_id": f"pseudo:{dim}"}
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return meta


TINY_QA_FACTS = [
    ("Which river flows through London?", "Thames", "London grew along a river. The river through London is the Thames. Bridges cross it often."),
    ("Which river flows through Paris?", "Seine", "Paris has famous banks. The river through Paris is the Seine. Boats tour it daily."),
    ("Which river flows through Cairo?", "Nile", "Cairo is ancient. The river through Cairo is the Nile. Floods once fed its fields."),
    ("Which river flows through Vienna?", "Danube", "Vienna loves music. The river through Vienna is the Danube. A waltz is named for it."),
    ("Which river flows through Rome?", "Tiber", "Rome has seven hills. The river through Rome is the Tiber. Legends start at its banks."),
    ("What currency is used in Japan?", "yen", "Japan mints coins. The currency of Japan is the yen. Notes show famous figures."),
    ("What currency is used in the United Kingdom?", "pound", "The UK kept its money. The currency of the United Kingdom is the pound. Pence divide it."),
    ("What currency is used in Mexico?", "peso", "Mexico trades widely. The currency of Mexico is the peso. Markets quote it daily."),
    ("What currency is used in India?", "rupee", "India has busy markets. The currency of India is the rupee. Coins jingle everywhere."),
    ("What currency is used in Switzerland?", "franc", "Switzerland is alpine. The currency of Switzerland is the franc. Banks value stability."),
    ("What is the boiling point of water in Celsius?", "100", "Water changes phase. Water boils at 100 degrees Celsius at sea level. Altitude lowers it."),
    ("What is the freezing point of water in Celsius?", "0", "Cold turns water solid. Water freezes at 0 degrees Celsius normally. Salt shifts the point."),
    ("How many bones are in the adult human body?", "206", "Skeletons support us. An adult human body has 206 bones in total. Babies have more."),
    ("How many chambers does the human heart have?", "four", "Hearts pump in stages. The human heart has four chambers inside. Valves separate them."),
    ("How many teeth does an adult human have?", "32", "Dentists count carefully. An adult human has 32 teeth including wisdom teeth. Some remove four."),
    ("What planet is called the morning star?", "Venus", "Planets earn nicknames. The morning star is Venus shining early. It is very hot."),
    ("What is the smallest planet?", "Mercury", "Sizes vary a lot. The smallest planet is Mercury by diameter. It hugs the sun."),
    ("What galaxy contains Earth?", "Milky Way", "Galaxies hold billions of stars. Earth sits in the Milky Way galaxy. Its band crosses the night sky."),
    ("What force keeps planets in orbit?", "gravity", "Motion needs a cause. Planets stay in orbit because of gravity alone. Mass bends space."),
    ("What star is at the center of our solar system?", "sun", "Systems have centers. The star at our center is the sun itself. It fuses hydrogen."),
    ("What is the largest desert?", "Sahara", "Deserts are dry. The largest hot desert is the Sahara in Africa. Dunes drift with wind."),
    ("What is the highest mountain?", "Everest", "Peaks attract climbers. The highest mountain is Everest in the Himalayas. Oxygen is thin up there."),
    ("What is the deepest ocean trench?", "Mariana", "Oceans hide depth. The deepest trench is the Mariana in the Pacific. Few have visited."),
    ("What is the largest rainforest?", "Amazon", "Forests breathe for us. The largest rainforest is the Amazon in South America. Rivers lace it."),
    ("What is the coldest continent?", "Antarctica", "Continents differ wildly. The coldest continent is Antarctica by far. Ice covers almost all."),
    ("Who invented the telephone?", "Bell", "Inventions change life. The telephone was invented by Bell in 1876. Wires soon spanned cities."),
    ("Who invented the light bulb?", "Edison", "Light changed nights. The practical light bulb came from Edison and his lab. Filaments glowed long."),
    ("Who proposed evolution by natural selection?", "Darwin", "Biology has theories. Natural selection was proposed by Darwin after his voyage. Finches helped."),
    ("Who formulated the laws of motion?", "Newton", "Physics began with motion. The laws of motion came from Newton in Principia. An apple stars in the tale."),
    ("Who discovered radioactivity with polonium and radium?", "Curie", "Elements can glow. Polonium and radium were discovered by Curie and her husband. Two Nobel prizes followed."),
    ("What language is spoken in Brazil?", "Portuguese", "Languages map history. Brazil speaks Portuguese from colonial times. Accents vary by region."),
    ("What language is spoken in Austria?", "German", "Borders share tongues. Austria speaks German with its own flavor. Dialects differ by valley."),
    ("What language has the most native speakers?", "Mandarin", "Counts favor size. The most native speakers belong to Mandarin Chinese. Tones carry meaning."),
    ("What alphabet does Russian use?", "Cyrillic", "Scripts differ worldwide. Russian is written in the Cyrillic alphabet. It has 33 letters."),
    ("What ancient language did the Romans speak?", "Latin", "Empires leave words. The Romans spoke Latin across their empire. Law still quotes it."),
    ("What is the hardest natural substance?", "diamond", "Hardness is measured. The hardest natural substance is diamond on the Mohs scale. It cuts glass."),
    ("What metal is liquid at room temperature?", "mercury", "Metals are usually solid. The liquid metal at room temperature is mercury. Old thermometers used it."),
    ("What gas makes up most of the atmosphere?", "nitrogen", "Air is mixed. Most of the atmosphere is nitrogen at 78 percent. Oxygen comes second."),
    ("What vitamin does sunlight help produce?", "vitamin D", "Skin does chemistry. Sunlight helps the body make vitamin D naturally. Winter limits it."),
    ("What blood cells carry oxygen?", "red", "Blood has types of cells. Oxygen is carried by red blood cells using hemoglobin. They lack nuclei."),
    ("What instrument measures temperature?", "thermometer", "Instruments quantify. Temperature is measured by a thermometer in degrees. Mercury ones retired."),
    ("What instrument measures atmospheric pressure?", "barometer", "Weather needs data. Pressure is measured by a barometer at stations. Storms drop it."),
    ("What device tells direction using magnetism?", "compass", "Travel needs bearings. Direction comes from a compass needle pointing north. Sailors trusted it."),
    ("What machine lifts water uphill in old farms?", "pump", "Farms move water. Water is lifted by a pump through pipes. Windmills drove some."),
    ("What tool drives nails into wood?", "hammer", "Workshops hold tools. Nails are driven by a hammer swung by hand. Claws pull them too."),
    ("What is the first month of the year?", "January", "Calendars begin somewhere. The first month is January with 31 days. Resolutions start then."),
    ("What day follows Friday?", "Saturday", "Weeks cycle on. The day after Friday is Saturday for rest. Markets open early."),
    ("What meal is eaten in the morning?", "breakfast", "Meals mark the day. The morning meal is breakfast before work. Some skip it."),
    ("What do caterpillars become?", "butterflies", "Insects transform fully. Caterpillars become butterflies after the chrysalis. Wings dry slowly."),
    ("What do tadpoles become?", "frogs", "Ponds raise younglings. Tadpoles become frogs as legs grow. Tails shrink away."),
]


def _split_sentences_simple(text: str) -> list[str]:
    # the engine has the real splitter; fixtures only need ". " boundaries
    parts = [p.strip() for p in text.split(". ")]
    return [p if p.endswith(".") else p + "." for p in parts if p]


def make_tiny_qa(out_dir: Path, dim: int = 256) -> dict:
    encoder = PseudoEncoder(dim)
    segment_rows: list[dict] = []
    example_rows: list[dict] = []
    texts: list[str] = []
    query_texts: list[str] = []
    for i, (question, answer, context) in enumerate(TINY_QA_FACTS):
        doc_id = f"fact{i}"
        for seg_index, sentence in enumerate(_split_sentences_simple(context)):
            segment_rows.append({"doc_id": doc_id, "seg_index": seg_index,
                                 "text": sentence,
                                 "n_tokens": len(sentence.split())})
            texts.append(sentence)
        example_rows.append({"query": question, "answers": [answer],
                             "doc_ids": [doc_id]})
        query_texts.append(question)

    out_dir.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out_dir / "segments.jsonl", segment_rows)
    _write_jsonl(out_dir / "examples.jsonl", example_rows)
    write_demb_atomic(out_dir / "embeddings.demb",
                      _normalize_rows(encoder.encode(texts)))
    write_demb_atomic(out_dir / "queries.demb",
                      _normalize_rows(encoder.encode(query_texts)))
    meta = {"name": "tiny-qa", "n_examples": len(example_rows), "dim": dim,
            "model_id": f"pseudo:{dim}"}
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return meta


def make_fixture(name: str, out_dir: str | Path, **kwargs) -> dict:
    out = Path(out_dir)
    if name == "redundant-needle":
        return make_redundant_needle(out, **kwargs)
    if name == "tiny-qa":
        return make_tiny_qa(out, **{k: v for k, v in kwargs.items()
                                    if k == "dim"})
    raise ValueError(f"unknown fixture {name!r}; available: {FIXTURE_NAMES}")

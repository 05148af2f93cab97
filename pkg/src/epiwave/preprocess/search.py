"""Symptom lexicon and per-district symptom query counting."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

SYMPTOMS = (
    "Abdominal pain", "Ageusia", "Anosmia", "Anxiety", "Arthralgia", "Body ache",
    "Chest pain", "Chest tightness", "Chills", "Confusion", "Cough", "Dehydration",
    "Diarrhea", "Disorientation", "Dizziness", "Dyspnea", "Ear infection", "Ear pain",
    "Eye infection", "Eye pain", "Fatigue", "Headache", "Hot flush", "Hyperhidrosis",
    "Insomnia", "Lethargic", "Loss of appetite", "Mental health symptoms", "Migraine",
    "Nasal dryness", "Nausea", "Oropharyngeal pain", "Pain", "Palpitation", "Pyrexia",
    "Rash", "Rhinorrhea", "Sinusitis", "Sleep disturbance", "Sneezing", "Stress",
    "Sweating", "URTI", "Vomiting",
)

# lay terms people actually type
ALIASES = {
    "Pyrexia": ("fever",),
    "Dyspnea": ("shortness of breath", "breathless"),
    "Rhinorrhea": ("runny nose",),
    "Oropharyngeal pain": ("sore throat",),
    "Ageusia": ("loss of taste",),
    "Anosmia": ("loss of smell",),
    "Arthralgia": ("joint pain",),
    "URTI": ("upper respiratory",),
    "Lethargic": ("lethargy",),
    "Hot flush": ("hot flash",),
    "Sneezing": ("sneeze",),
}


@dataclass(frozen=True)
class Symptom:
    name: str
    tokens: tuple = field(default=())

    def matches(self, query: str) -> bool:
        q = query.lower()
        return any(tok in q for tok in self.tokens)


class Lexicon:
    """Ordered symptoms, each matched by case-insensitive substring of any token."""

    def __init__(self, symptoms):
        self.symptoms = list(symptoms)

    @classmethod
    def default(cls, names=None) -> "Lexicon":
        names = SYMPTOMS if names is None else names
        unknown = [n for n in names if n not in SYMPTOMS]
        if unknown:
            raise ValueError(f"not in the symptom list: {unknown}")
        return cls(Symptom(n, (n.lower(),) + ALIASES.get(n, ())) for n in names)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.symptoms]

    def __len__(self):
        return len(self.symptoms)

    def match(self, query: str) -> list[int]:
        return [k for k, s in enumerate(self.symptoms) if s.matches(query)]


@dataclass
class SearchCounts:
    matrices: np.ndarray  # (days, n, n_w)
    skipped_no_home: int
    matched_records: int


def count_symptom_queries(user_ids, times, queries, lexicon: Lexicon, homes: dict,
                          n_districts: int, dates) -> SearchCounts:
    """H_t for each date in ``dates`` (ISO strings).

    A record counts once toward (home district of its user, symptom) for
    every symptom it matches. Records of users without a home are skipped
    and counted in ``skipped_no_home``.
    """
    dates = list(dates)
    out = np.zeros((len(dates), n_districts, len(lexicon)))
    if len(user_ids) == 0:
        return SearchCounts(out, 0, 0)
    df = pd.DataFrame({"id": np.asarray(user_ids), "time": np.asarray(times, dtype=str),
                       "q": pd.Series(np.asarray(queries, dtype=str)).str.lower()})
    home_d = {u: h.district for u, h in homes.items()}
    df["home"] = df["id"].map(home_d)
    skipped = int(df["home"].isna().sum())
    df = df[df["home"].notna()]
    day_pos = {d: i for i, d in enumerate(dates)}
    df["day"] = df["time"].str.slice(0, 10).map(day_pos)
    df = df[df["day"].notna()]
    day = df["day"].to_numpy(dtype=np.int64)
    home = df["home"].to_numpy(dtype=np.int64)
    qs = df["q"]
    matched = np.zeros(len(df), dtype=bool)
    for k, sym in enumerate(lexicon.symptoms):
        hit = np.zeros(len(df), dtype=bool)
        for tok in sym.tokens:
            hit |= qs.str.contains(tok, regex=False).to_numpy()
        matched |= hit
        np.add.at(out[:, :, k], (day[hit], home[hit]), 1.0)
    return SearchCounts(out, skipped, int(matched.sum()))

"""Best-effort preparation of ProPublica's COMPAS two-year recidivism file.

Rows go through ProPublica's published filter (screening within 30 days of
arrest, known recidivism status, no ordinary traffic offences, a score
present), which leaves 6172 defendants. The baseline prediction is an
unpenalized logistic regression on the categorical decile score. With one
indicator per decile that model is saturated, so its fitted probabilities are
exactly the per-decile recidivism rates; they are computed that way.

Prior counts are bucketed as 0, 1-5 and >5, and age uses ProPublica's three
bands; neither is a published recipe for this analysis.
"""

from __future__ import annotations

from pathlib import Path

import pandas as pd

from .data import ConfigError, DataError

RAW_COLUMNS = [
    "age_cat", "race", "sex", "priors_count", "c_charge_degree", "decile_score",
    "days_b_screening_arrest", "is_recid", "score_text", "two_year_recid",
]

FEATURES = ["age", "race", "sex", "priors", "charge", "decile"]
OUTCOME = "two_year_recid"
PREDICTION = "p_decile"

_AGE = {"Less than 25": "<25", "25 - 45": "25-45", "Greater than 45": ">45"}


def priors_bucket(count: int) -> str:
    if count == 0:
        return "0"
    return "1-5" if count <= 5 else ">5"


def prepare_compas(raw_path) -> pd.DataFrame:
    raw_path = Path(raw_path)
    if not raw_path.is_file():
        raise ConfigError(f"COMPAS file not found: {raw_path}")
    df = pd.read_csv(raw_path)
    missing = [c for c in RAW_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"{raw_path} lacks columns {missing}")
    df = df[
        (df.days_b_screening_arrest <= 30)
        & (df.days_b_screening_arrest >= -30)
        & (df.is_recid != -1)
        & (df.c_charge_degree != "O")
        & (df.score_text != "N/A")
    ]
    out = pd.DataFrame({
        "age": df.age_cat.map(_AGE),
        "race": df.race,
        "sex": df.sex,
        "priors": df.priors_count.astype(int).map(priors_bucket),
        "charge": df.c_charge_degree.map({"F": "felony", "M": "misdemeanor"}),
        "decile": df.decile_score.astype(int).astype(str),
        OUTCOME: df.two_year_recid.astype(int),
    })
    out[PREDICTION] = out.groupby("decile")[OUTCOME].transform("mean")
    return out.reset_index(drop=True)

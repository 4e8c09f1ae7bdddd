from __future__ import annotations

import pytest

from prmeval.corpus import JudgmentPair, RelevanceScale

# 20 doubly judged results on a 3-level scale (0=Non, 1=Rel, 2=HRel).
# Worked-example fixture: histograms are {0:6, 1:10, 2:4} for U1 and
# {0:7, 1:7, 2:6} for U2; at theta=2 the symmetric estimates are exactly
# 4/10, 5/17, 1/13 and the one-sided estimates 2/4, 3/10, 1/6 (on U1)
# and 2/6, 2/7, 0/7 (on U2).
U1_LABELS = (2, 2, 1, 0, 1, 1, 0, 1, 2, 1, 1, 1, 2, 0, 1, 0, 1, 1, 0, 0)
U2_LABELS = (1, 2, 1, 1, 2, 0, 0, 1, 2, 2, 0, 2, 1, 0, 1, 2, 0, 1, 0, 0)
PAIR_TOPIC = "201"


@pytest.fixture()
def scale3() -> RelevanceScale:
    return RelevanceScale(("Non", "Rel", "HRel"))


@pytest.fixture()
def scale4() -> RelevanceScale:
    return RelevanceScale(("Non", "Rel", "HRel", "Key"))


@pytest.fixture()
def golden_pairs() -> list[JudgmentPair]:
    return [
        JudgmentPair(PAIR_TOPIC, f"d{i}", a, b)
        for i, (a, b) in enumerate(zip(U1_LABELS, U2_LABELS), start=1)
    ]


@pytest.fixture()
def golden_qrels_u1() -> str:
    return "".join(
        f"{PAIR_TOPIC} 0 d{i} {lvl}\n" for i, lvl in enumerate(U1_LABELS, start=1)
    )


@pytest.fixture()
def golden_qrels_u2() -> str:
    return "".join(
        f"{PAIR_TOPIC} 0 d{i} {lvl}\n" for i, lvl in enumerate(U2_LABELS, start=1)
    )


@pytest.fixture()
def golden_paired_text() -> str:
    return "".join(
        f"{PAIR_TOPIC} d{i} {a} {b}\n"
        for i, (a, b) in enumerate(zip(U1_LABELS, U2_LABELS), start=1)
    )


@pytest.fixture()
def scale3_json() -> str:
    return '{"levels": {"0": "Non", "1": "Rel", "2": "HRel"}}'

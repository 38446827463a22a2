import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lingconv.corpus import PublicationRecord


def _rec(pub_id, title, year, fields, journal="J1", countries=("DE",), jif=2.0):
    return PublicationRecord(
        id=pub_id,
        title=title,
        abstract="",
        year=year,
        journal_id=journal,
        journal_if=jif,
        scopus_fields=list(fields),
        author_countries=list(countries),
    )


@pytest.fixture(scope="session")
def detector_fixture():
    """12-record corpus with hand-computed field-year marker frequencies.

    Chemistry, document mode, base 2021 (4 docs) vs end 2024 (4 docs):
      crucial  1/4 -> 3/4  fold 3   (kept only at threshold 3)
      meticul  1/4 -> 4/4  fold 4   (kept at 3 and 4)
      pivotal  0   -> 2/4  zero-base, end hits 2 (kept at all thresholds)
      tapestry 0   -> 1/4  end hits 1 < min_support 2 (never kept)
    Computer Science, base 2021 (2 docs) vs end 2024 (3 docs, incl. the
    cross-listed C7):
      delv     0   -> 2/3  zero-base, end hits 2 (kept at all thresholds)
      while    1/2 -> 1/3  fold < 1 and below support (never kept)
    """
    return [
        _rec("C1", "Acid data from many sites", 2021, ["Chemistry"]),
        _rec("C2", "A crucial meticulous catalyst", 2021, ["Chemistry"]),
        _rec("C3", "Notes on salts", 2021, ["Chemistry"]),
        _rec("C4", "More acid data", 2021, ["Chemistry"]),
        _rec("C5", "Meticulous and crucial results in acid work", 2024, ["Chemistry"]),
        _rec("C6", "Meticulous and crucial pivotal findings", 2024, ["Chemistry"]),
        _rec(
            "C7",
            "A meticulous crucial pivotal tapestry",
            2024,
            ["Chemistry", "Computer Science"],
        ),
        _rec("C8", "Meticulous acid report again", 2024, ["Chemistry"]),
        _rec("S1", "While loops in code", 2021, ["Computer Science"]),
        _rec("S2", "Sorting data fast", 2021, ["Computer Science"]),
        _rec("S3", "While systems delve deeper", 2024, ["Computer Science"]),
        _rec("S4", "Delving into code", 2024, ["Computer Science"]),
    ]

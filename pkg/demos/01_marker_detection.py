"""Walk through the lexical detector on a synthetic corpus.

Generates publication records with known GenAI-style marker injection,
computes field-stratified document frequencies, filters the vocabulary by
fold change between 2021 and 2024, and flags individual publications.

Run from the repository root:  python3 demos/01_marker_detection.py
"""

from lingconv import detector as det
from lingconv import synth

# A small corpus where ~20% of 2023 records and ~35% of 2024 records carry
# two injected marker words; truth tells us which.
params = synth.CorpusParams(n_pubs_per_field_year=80, seed=7)
records, truth = synth.gen_text_corpus(params)
print(f"corpus: {len(records)} records across {len(params.fields)} fields")

vocabulary = det.load_vocabulary()
print(f"vocabulary: {len(vocabulary)} patterns "
      f"({sum(p.prefix_match for p in vocabulary)} prefix, "
      f"{sum(not p.prefix_match for p in vocabulary)} exact)")

# Document frequencies per (field, year), then the fold-change filter.
pairs = [(rec, rec.scopus_fields) for rec in records]
table = det.compute_frequencies(pairs, vocabulary)
markers = det.filter_markers(
    table, vocabulary, threshold_fold=4.0, min_support=2
)
for fld in params.fields:
    stems = sorted(p.stem for p in markers.patterns_for(fld))
    print(f"  {fld}: {len(stems)} retained markers -> {stems}")

# Flag every record and compare with the generator's ground truth.
flags = det.flag_corpus(pairs, markers)
flagged = {pid for pid, f in flags.items() if f.flagged_any_field}
assisted = {pid for pid, was in truth.items() if was}
post = {r.id for r in records if r.year >= 2023}
caught = len(flagged & assisted)
print(f"\nflagged {len(flagged)} records; "
      f"{caught}/{len(assisted)} known-assisted records caught")
false_pos = len((flagged - assisted) & post)
print(f"false positives among post-2022 records: {false_pos}")

# Strict mode requires two distinct markers; single-hit records are
# excluded from analysis entirely rather than treated as controls.
strict_in = sum(1 for f in flags.values() if det.effective_flag(f, 2) is True)
strict_out = sum(1 for f in flags.values() if det.effective_flag(f, 2) is None)
print(f"strict mode: {strict_in} treated, {strict_out} excluded single-hit")

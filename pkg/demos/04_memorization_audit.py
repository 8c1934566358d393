"""Quantifying verbatim memorization in model outputs.

A prediction is compared word-by-word against every training entry; all
maximal common runs of at least n words become intervals, their union on
the prediction side gives the absolute score (words captured) and the
relative score (fraction captured). Longer n thresholds only shrink the
score. Multiple predictions for one query merge on the training side so
repeated captures count once.
"""

from acserve import common_substrings, merge_predictions, score_prediction, tokenize
from acserve.audit import audit_corpus, write_csv
import io
import sys

training = [
    tokenize(
        "the enclave attestation report binds the launch measurement to the "
        "signing key and the platform firmware version before any secret is released"
    ),
    tokenize(
        "key rotation happens every ninety days and the old key is kept only "
        "for verifying previously issued attestation reports"
    ),
]

prediction = tokenize(
    "as described above the enclave attestation report binds the launch measurement "
    "to the signing key and the platform firmware version which means key rotation "
    "happens every ninety days and the old key is kept in escrow"
)

# every maximal shared run of >= 4 words against entry 0
for p_iv, s_iv in common_substrings(prediction, training[0], 4):
    print(f"p[{p_iv.start},{p_iv.end}] == t0[{s_iv.start},{s_iv.end}]:",
          " ".join(prediction[p_iv.start : p_iv.end + 1]))

report = score_prediction(prediction, training, 4, prediction_id="demo")
print(f"\nabsolute score: {report.absolute} of {len(prediction)} words")
print(f"relative score: {report.relative:.3f}")
print("covered intervals:", [(iv.start, iv.end) for iv in report.global_intervals])

# the sweep over n: stricter minimum run lengths capture less
for n in (4, 8, 12, 15, 18):
    print(f"n={n:2d}: absolute={score_prediction(prediction, training, n).absolute}")

# three sampled predictions of the same query: overlaps are not double counted
variants = [
    prediction,
    tokenize("the enclave attestation report binds the launch measurement to the signing key period"),
    tokenize("unrelated text about gearbox maintenance schedules and torque limits"),
]
reports = [score_prediction(v, training, 4) for v in variants]
print("\nper-prediction absolutes:", [r.absolute for r in reports])
print("merged cumulative (training-side, deduplicated):", merge_predictions(reports))

# the batch door: same scoring, CSV out
rows = audit_corpus([("p0", prediction)], training, n_values=(4, 8))
buf = io.StringIO()
write_csv(rows, buf)
sys.stdout.write("\n" + buf.getvalue())

"""Convert the ASSISTments 2009-2010 skill-builder CSV to the ingest layout.

The raw file has one row per (attempt, skill): a problem tagged with several
skills appears once per skill under the same ``order_id``.  Those rows are
merged into one record whose ``skill_ids`` lists every tag.  Rows without a
skill are dropped.  The ``original`` column is kept so main problems can be
selected with ``--filter-column original=1``.

    python3 scripts/convert_assist09.py skill_builder_data.csv assist09.csv
"""

import argparse
import csv
import sys

OUT_COLUMNS = ["student_id", "question_id", "skill_ids", "correct", "response_time_ms", "question_type",
               "original"]


def convert(src, dst) -> tuple[int, int]:
    attempts: dict[str, dict] = {}
    skipped = 0
    with open(src, newline="", encoding="latin-1") as fh:
        for row in csv.DictReader(fh):
            skill = (row.get("skill_id") or "").strip()
            if not skill:
                skipped += 1
                continue
            key = row["order_id"]
            rec = attempts.get(key)
            if rec is None:
                attempts[key] = {
                    "order": int(key),
                    "student_id": row["user_id"],
                    "question_id": row["problem_id"],
                    "skills": [skill],
                    "correct": row["correct"],
                    "response_time_ms": row.get("ms_first_response", ""),
                    "question_type": row.get("answer_type", ""),
                    "original": row.get("original", ""),
                }
            elif skill not in rec["skills"]:
                rec["skills"].append(skill)
    records = sorted(attempts.values(), key=lambda r: (r["student_id"], r["order"]))
    with open(dst, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OUT_COLUMNS)
        for r in records:
            w.writerow([r["student_id"], r["question_id"], ";".join(r["skills"]), r["correct"],
                        r["response_time_ms"], r["question_type"], r["original"]])
    return len(records), skipped


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("source")
    p.add_argument("output")
    args = p.parse_args(argv)
    n, skipped = convert(args.source, args.output)
    print(f"wrote {n} attempts ({skipped} rows without a skill dropped)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

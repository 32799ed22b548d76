#!/usr/bin/env python3
"""Check that the winner row of summary.csv is the argmin of mean wall time in raw.csv.

Usage: verify_argmin.py RAW_CSV SUMMARY_CSV
Exits 0 when the winner matches, 1 otherwise.
"""

import csv
import sys
from collections import defaultdict


def mean_times(raw_path):
    sums = defaultdict(float)
    counts = defaultdict(int)
    with open(raw_path, newline="") as f:
        for row in csv.DictReader(f):
            key = (row["proc_technique"], row["thread_technique"])
            sums[key] += float(row["wall_time_s"])
            counts[key] += 1
    return {k: sums[k] / counts[k] for k in sums}


def winner(summary_path):
    with open(summary_path, newline="") as f:
        for row in csv.DictReader(f):
            if row["role"] == "winner":
                return (row["proc_technique"], row["thread_technique"]), float(row["mean_s"])
    return None, None


def main(argv):
    if len(argv) != 3:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    means = mean_times(argv[1])
    if not means:
        print("no measurements in raw table", file=sys.stderr)
        return 1
    best = min(means, key=lambda k: (means[k], k))
    pair, mean = winner(argv[2])
    if pair is None:
        print("no winner row in summary", file=sys.stderr)
        return 1
    tol = 1e-9 * max(1.0, abs(means[best]))
    ok = pair in means and abs(means[pair] - means[best]) <= tol and abs(mean - means[pair]) <= tol
    print(
        f"cells={len(means)} argmin={best[0]}/{best[1]} mean={means[best]:.9g} "
        f"winner={pair[0]}/{pair[1]} mean={mean:.9g} {'ok' if ok else 'MISMATCH'}"
    )
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv))

#!/usr/bin/env python3
"""Convert KEEL .dat files into the bundled libsvm files under data/.

Usage: convert_keel.py KEEL_RAW_DIR OUT_DIR

The KEEL "balanced" raw files ship with the `keel-ds` package on PyPI
(keel_ds/data/balanced/raw/). Labels are mapped to +1/-1 as listed in
DATASETS; features are written unchanged (standardization happens per
trial on the training split).
"""
import os
import sys

# bundled name -> (KEEL file stem, labels mapped to +1; everything else -> -1)
DATASETS = {
    "breast": ("wisconsin", {"4"}),
    "heart": ("heart", {"2"}),
    "ionosphere": ("ionosphere", {"g"}),
    "sonar": ("sonar", {"M"}),
    "wdbc": ("wdbc", {"M"}),
    "wine": ("wine", {"2"}),
    "pima": ("pima", {"tested_positive"}),
    "australian": ("australian", {"1"}),
}


def fmt(v):
    x = float(v)
    return repr(x) if x != int(x) else str(int(x)) if abs(x) < 1e15 else repr(x)


def convert(src, positive, dst):
    rows = []
    with open(src) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("@"):
                continue
            parts = [p.strip() for p in line.split(",")]
            label = "+1" if parts[-1] in positive else "-1"
            feats = " ".join(
                f"{j + 1}:{fmt(v)}" for j, v in enumerate(parts[:-1]) if float(v) != 0.0
            )
            rows.append(f"{label} {feats}".rstrip())
    with open(dst, "w", newline="\n") as f:
        f.write("\n".join(rows) + "\n")
    return len(rows)


def main():
    raw, out = sys.argv[1], sys.argv[2]
    os.makedirs(out, exist_ok=True)
    for name, (stem, positive) in DATASETS.items():
        n = convert(os.path.join(raw, stem + ".dat"), positive, os.path.join(out, name + ".libsvm"))
        print(f"{name}: {n} rows")


if __name__ == "__main__":
    main()

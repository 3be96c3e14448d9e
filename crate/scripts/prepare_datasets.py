#!/usr/bin/env python3
"""Rebuild the benchmark CSVs under data/ from locally available archives.

Sources (all obtained through package registries, no direct UCI access):
  * keel-ds wheel (PyPI): pima, tic-tac-toe, ionosphere, ring, car-good, car-vgood
  * linfa-datasets crate (crates.io): winequality-red.csv.gz
  * scikit-learn (installed): breast_cancer.csv, digits.csv.gz

Usage:
  python3 scripts/prepare_datasets.py --keel-wheel keel_ds-0.2.5-py3-none-any.whl \
      --linfa-crate linfa-datasets-0.8.1.crate --out data
"""
import argparse
import collections
import csv
import gzip
import io
import itertools
import os
import tarfile
import zipfile


def keel_rows(wheel, member):
    with zipfile.ZipFile(wheel) as z:
        text = z.read(member).decode("utf-8")
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([c.strip() for c in line.split(",")])
    return rows


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"{path}: {len(rows)} rows")


def car_rows(wheel):
    """Recover the four-class car labels from the two one-vs-rest KEEL files.

    good/vgood come straight from the KEEL files. The remaining rows are split
    into unacc/acc with the hierarchical evaluation model that the class
    counts (1210/384/69/65) force:
      price level unacceptable for (vhigh,vhigh), (vhigh,high), (high,vhigh)
      price level low for (low,low), (low,med), (med,low)
      price level medium for (low,high), (med,med); high for the rest
      tech: persons=2 or safety=low -> bad; comfort low -> bad;
            exc/good/acc as observed from the vgood/good rows.
    """
    base = "keel_ds/data/imbalanced/raw/"
    good = keel_rows(wheel, base + "car-good.dat")
    vgood = keel_rows(wheel, base + "car-vgood.dat")
    assert [r[:6] for r in good] == [r[:6] for r in vgood]

    label = {}
    for g, v in zip(good, vgood):
        key = tuple(g[:6])
        if g[6] == "positive":
            label[key] = "good"
        elif v[6] == "positive":
            label[key] = "vgood"
        else:
            label[key] = None

    # Tech grade per (doors, persons, lug_boot, safety), read off the rows
    # where price is low: vgood <=> tech exc, good <=> tech good.
    tech = {}
    for key, lab in label.items():
        buying, maint, doors, persons, lug, safety = key
        if (buying, maint) != ("low", "low"):
            continue
        t = (doors, persons, lug, safety)
        if persons == "2" or safety == "low":
            tech[t] = "bad"
        elif lab == "vgood":
            tech[t] = "exc"
        elif lab == "good":
            tech[t] = "good"
        elif safety == "med":
            # comfort medium with medium safety
            tech[t] = "acc"
        else:
            tech[t] = None
    # comfort level: high <=> tech exc at high safety, medium <=> tech good.
    for t, grade in list(tech.items()):
        doors, persons, lug, safety = t
        if grade is None or (grade == "acc"):
            high = tech.get((doors, persons, lug, "high"))
            tech[t] = "acc" if high in ("exc", "good") else "bad"

    unacc_price = {("vhigh", "vhigh"), ("vhigh", "high"), ("high", "vhigh")}
    low_price = {("low", "low"), ("low", "med"), ("med", "low")}
    med_price = {("low", "high"), ("med", "med")}
    table = {
        "low": {"exc": "vgood", "good": "good", "acc": "acc", "bad": "unacc"},
        "med": {"exc": "vgood", "good": "acc", "acc": "acc", "bad": "unacc"},
        "high": {"exc": "acc", "good": "acc", "acc": "unacc", "bad": "unacc"},
        "unacc": {"exc": "unacc", "good": "unacc", "acc": "unacc", "bad": "unacc"},
    }
    rows = []
    for key in (tuple(r[:6]) for r in good):
        buying, maint, doors, persons, lug, safety = key
        if (buying, maint) in unacc_price:
            level = "unacc"
        elif (buying, maint) in low_price:
            level = "low"
        elif (buying, maint) in med_price:
            level = "med"
        else:
            level = "high"
        cls = table[level][tech[(doors, persons, lug, safety)]]
        if label[key] is not None:
            assert cls == label[key], (key, cls, label[key])
        else:
            assert cls in ("unacc", "acc"), (key, cls)
        rows.append(list(key) + [cls])
    counts = collections.Counter(r[-1] for r in rows)
    assert counts == {"unacc": 1210, "acc": 384, "good": 69, "vgood": 65}, counts
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--keel-wheel", required=True)
    ap.add_argument("--linfa-crate", required=True)
    ap.add_argument("--out", default="data")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    out = lambda name: os.path.join(args.out, name)
    bal = "keel_ds/data/balanced/raw/"

    pima = keel_rows(args.keel_wheel, bal + "pima.dat")
    write_csv(
        out("pima.csv"),
        ["preg", "plas", "pres", "skin", "insu", "mass", "pedi", "age", "class"],
        pima,
    )

    ttt = keel_rows(args.keel_wheel, bal + "tic-tac-toe.dat")
    squares = ["tl", "tm", "tr", "ml", "mm", "mr", "bl", "bm", "br"]
    write_csv(out("tic_tac_toe.csv"), squares + ["class"], ttt)

    iono = keel_rows(args.keel_wheel, bal + "ionosphere.dat")
    # KEEL drops UCI attribute 2, which is constant zero.
    write_csv(out("ionosphere.csv"), ["a1"] + [f"a{i}" for i in range(3, 35)] + ["class"], iono)

    ring = keel_rows(args.keel_wheel, bal + "ring.dat")
    write_csv(out("ring.csv"), [f"a{i}" for i in range(1, 21)] + ["class"], ring)

    car = car_rows(args.keel_wheel)
    write_csv(
        out("car.csv"),
        ["buying", "maint", "doors", "persons", "lug_boot", "safety", "class"],
        car,
    )

    with tarfile.open(args.linfa_crate) as t:
        member = next(m for m in t.getmembers() if m.name.endswith("winequality-red.csv.gz"))
        raw = gzip.decompress(t.extractfile(member).read()).decode("utf-8")
    reader = csv.reader(io.StringIO(raw))
    header = next(reader)
    wine = []
    for r in reader:
        quality = int(r[-1])
        wine.append(r[:-1] + ["good" if quality >= 7 else "not_good"])
    write_csv(out("red_wine.csv"), [h.replace(" ", "_") for h in header[:-1]] + ["class"], wine)

    import sklearn.datasets as skd

    bc = skd.load_breast_cancer()
    write_csv(
        out("breast_cancer.csv"),
        [n.replace(" ", "_") for n in bc.feature_names] + ["class"],
        [[repr(float(v)) for v in x] + [bc.target_names[y]] for x, y in zip(bc.data, bc.target)],
    )
    dg = skd.load_digits()
    write_csv(
        out("digits.csv"),
        [f"p{i}" for i in range(64)] + ["class"],
        [[str(int(v)) for v in x] + [str(y)] for x, y in zip(dg.data, dg.target)],
    )


if __name__ == "__main__":
    main()

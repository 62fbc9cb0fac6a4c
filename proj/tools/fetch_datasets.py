#!/usr/bin/env python3
"""Prepare dataset files under data/ (or $SEPSA_DATA_DIR).

  diabetes  data/diabetes.csv from the copy bundled with scikit-learn
            (columns AGE,SEX,BMI,BP,S1..S6,Y; unscaled values).
  energy    data/energy.csv from the UCI "Energy efficiency" table
            https://archive.ics.uci.edu/static/public/242/energy+efficiency.zip
            (ENB2012_data.xlsx; columns X1..X8,Y1,Y2). Needs network and openpyxl.
  mnist     data/{train,t10k}-{images-idx3,labels-idx1}-ubyte, gunzipped from
            https://storage.googleapis.com/cvdf-datasets/mnist/

Usage: tools/fetch_datasets.py [diabetes] [energy] [mnist]   (default: all)
"""

import csv
import gzip
import io
import os
import sys
import urllib.request
import zipfile

ENERGY_URL = "https://archive.ics.uci.edu/static/public/242/energy+efficiency.zip"
MNIST_URL = "https://storage.googleapis.com/cvdf-datasets/mnist/"
MNIST_FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]


def data_dir():
    root = os.environ.get("SEPSA_DATA_DIR") or os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data")
    os.makedirs(root, exist_ok=True)
    return root


def fetch_diabetes(root):
    import sklearn.datasets
    base = os.path.join(os.path.dirname(sklearn.datasets.__file__), "data")
    with gzip.open(os.path.join(base, "diabetes_data_raw.csv.gz"), "rt") as f:
        rows = [line.split() for line in f if line.strip()]
    with gzip.open(os.path.join(base, "diabetes_target.csv.gz"), "rt") as f:
        targets = [line.strip() for line in f if line.strip()]
    if len(rows) != len(targets):
        raise SystemExit("diabetes: row count mismatch")
    out = os.path.join(root, "diabetes.csv")
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["AGE", "SEX", "BMI", "BP", "S1", "S2", "S3", "S4", "S5", "S6", "Y"])
        for r, y in zip(rows, targets):
            w.writerow(r + [y])
    print(f"wrote {out} ({len(rows)} rows)")


def fetch_energy(root):
    import openpyxl
    with urllib.request.urlopen(ENERGY_URL, timeout=60) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    name = next(n for n in archive.namelist() if n.endswith(".xlsx"))
    sheet = openpyxl.load_workbook(io.BytesIO(archive.read(name)), read_only=True).active
    out = os.path.join(root, "energy.csv")
    count = 0
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"X{i}" for i in range(1, 9)] + ["Y1", "Y2"])
        for row in sheet.iter_rows(min_row=2, values_only=True):
            values = [v for v in row[:10]]
            if any(v is None for v in values):
                continue
            w.writerow(values)
            count += 1
    print(f"wrote {out} ({count} rows)")


def fetch_mnist(root):
    for name in MNIST_FILES:
        with urllib.request.urlopen(MNIST_URL + name + ".gz", timeout=120) as resp:
            payload = gzip.decompress(resp.read())
        with open(os.path.join(root, name), "wb") as f:
            f.write(payload)
        print(f"wrote {os.path.join(root, name)}")


def main(argv):
    wanted = argv[1:] or ["diabetes", "energy", "mnist"]
    root = data_dir()
    actions = {"diabetes": fetch_diabetes, "energy": fetch_energy, "mnist": fetch_mnist}
    status = 0
    for name in wanted:
        if name not in actions:
            raise SystemExit(f"unknown dataset {name}")
        try:
            actions[name](root)
        except Exception as exc:  # report and continue with the rest
            print(f"{name}: {exc}", file=sys.stderr)
            status = 1
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv))

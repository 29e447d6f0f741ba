"""Rebuild the bundled benchmark CSVs from redistributable package archives.

Usage:
    pip download keel-ds==0.2.5 pydataset==0.2.0 ckd==0.1.0 --no-deps -d /tmp/src
    python3 data/prepare_datasets.py /tmp/src data/
"""
import io
import sys
import tarfile
import zipfile
from pathlib import Path

import pandas as pd


def diabetes(src: Path, out: Path) -> None:
    whl = next(src.glob("keel_ds-*.whl"))
    raw = zipfile.ZipFile(whl).read("keel_ds/data/balanced/raw/pima.dat").decode()
    cols = ["Pregnancies", "Glucose", "BloodPressure", "SkinThickness", "Insulin",
            "BMI", "DiabetesPedigreeFunction", "Age", "Outcome"]
    df = pd.read_csv(io.StringIO(raw), header=None, names=cols, dtype=str)
    df["Outcome"] = df["Outcome"].map({"tested_positive": "1", "tested_negative": "0"})
    df.to_csv(out / "diabetes.csv", index=False)


def cirrhosis(src: Path, out: Path) -> None:
    sdist = next(src.glob("pydataset-*.tar.gz"))
    outer = tarfile.open(sdist)
    res = outer.extractfile(next(n for n in outer.getnames() if n.endswith("resources.tar.gz")))
    inner = tarfile.open(fileobj=io.BytesIO(res.read()))
    pbc = pd.read_csv(inner.extractfile("resources/rdata/csv/survival/pbc.csv"), index_col=0)
    pbc = pbc[pbc["trt"].notna()]
    df = pd.DataFrame({
        "ID": pbc["id"].astype(int),
        "N_Days": pbc["time"].astype(int),
        "Status": pbc["status"].map({0: "C", 1: "CL", 2: "D"}),
        "Drug": pbc["trt"].map({1: 1, 2: 0}).astype(int),
        "Age": (pbc["age"] * 365.25).round().astype(int),
        "Sex": pbc["sex"].str.upper(),
        "Ascites": pbc["ascites"].astype(int),
        "Hepatomegaly": pbc["hepato"].astype(int),
        "Spiders": pbc["spiders"].astype(int),
        "Edema": pbc["edema"],
        "Bilirubin": pbc["bili"],
        "Cholesterol": pbc["chol"],
        "Albumin": pbc["albumin"],
        "Copper": pbc["copper"],
        "Alk_Phos": pbc["alk.phos"],
        "SGOT": pbc["ast"],
        "Tryglicerides": pbc["trig"],
        "Platelets": pbc["platelet"],
        "Prothrombin": pbc["protime"],
        "Stage": pbc["stage"].astype(int),
    })
    df.to_csv(out / "cirrhosis.csv", index=False, na_rep="NA")


def ckd(src: Path, out: Path) -> None:
    whl = next(src.glob("ckd-*.whl"))
    raw = zipfile.ZipFile(whl).read("ckd/files/data/ckd_raw.csv").decode()
    df = pd.read_csv(io.StringIO(raw), index_col=0, dtype=str)
    df = df.dropna()
    df.to_csv(out / "ckd.csv", index=False)


if __name__ == "__main__":
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    diabetes(src, out)
    cirrhosis(src, out)
    ckd(src, out)

"""Download the UCI datasets used by the acceptance suite and write them as ARFF.

Usage: python scripts/fetch_datasets.py [--out DIR] [--only NAME ...]
"""
import argparse
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

UCI = "https://archive.ics.uci.edu/static/public"

SEGMENT_ATTRS = [
    "region-centroid-col", "region-centroid-row", "region-pixel-count", "short-line-density-5",
    "short-line-density-2", "vedge-mean", "vedge-sd", "hedge-mean", "hedge-sd", "intensity-mean",
    "rawred-mean", "rawblue-mean", "rawgreen-mean", "exred-mean", "exblue-mean", "exgreen-mean",
    "value-mean", "saturation-mean", "hue-mean",
]
SEGMENT_CLASSES = ["brickface", "sky", "foliage", "cement", "window", "path", "grass"]
TTT_ATTRS = [f"{r}-{c}-square" for r in ("top", "middle", "bottom") for c in ("left", "middle", "right")]


def fetch(url, timeout=60):
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def member(blob, suffix):
    with zipfile.ZipFile(io.BytesIO(blob)) as z:
        name = next(n for n in z.namelist() if n.endswith(suffix))
        return z.read(name).decode()


def write_arff(path, relation, attrs, rows):
    lines = [f"@relation {relation}", ""]
    for name, spec in attrs:
        lines.append(f"@attribute {name} {spec}")
    lines += ["", "@data"] + [",".join(r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(rows)} records)")


def banknote(out):
    text = member(fetch(f"{UCI}/267/banknote+authentication.zip"), "data_banknote_authentication.txt")
    rows = [line.split(",") for line in text.split() if line]
    attrs = [(a, "numeric") for a in ("variance", "skewness", "curtosis", "entropy")] + [("class", "{0,1}")]
    write_arff(out / "banknote.arff", "banknote", attrs, rows)


def segment(out):
    blob = fetch(f"{UCI}/50/image+segmentation.zip")
    rows = []
    for part in ("segmentation.data", "segmentation.test"):
        for line in member(blob, part).splitlines():
            cells = line.split(",")
            if len(cells) == 20 and cells[0].isupper():
                rows.append(cells[1:] + [cells[0].lower()])
    attrs = [(a, "numeric") for a in SEGMENT_ATTRS] + [("class", "{" + ",".join(SEGMENT_CLASSES) + "}")]
    write_arff(out / "segment.arff", "segment", attrs, rows)


def tic_tac_toe(out):
    text = member(fetch(f"{UCI}/101/tic+tac+toe+endgame.zip"), "tic-tac-toe.data")
    rows = [line.split(",") for line in text.split() if line]
    attrs = [(a, "{x,o,b}") for a in TTT_ATTRS] + [("Class", "{positive,negative}")]
    write_arff(out / "tic-tac-toe.arff", "tic-tac-toe", attrs, rows)


SOURCES = {"banknote": banknote, "segment": segment, "tic-tac-toe": tic_tac_toe}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="data", help="target directory (default: data)")
    p.add_argument("--only", nargs="+", choices=sorted(SOURCES), help="subset to fetch (default: all)")
    args = p.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for name in args.only or SOURCES:
        try:
            SOURCES[name](out)
        except Exception as exc:  # network or format trouble: report and continue
            print(f"{name}: {exc}", file=sys.stderr)
            failed += 1
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())

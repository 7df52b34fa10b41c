"""Dataset container, ARFF/CSV ingestion and stratified fold generation.

A :class:`Dataset` stores every cell in one float64 matrix. Numeric cells
hold their value, categorical cells hold the integer id of the value in the
attribute's value list, and missing cells hold NaN.
"""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MISSING = math.nan


class DatasetError(ValueError):
    """Raised for malformed dataset files or invalid dataset contents."""

    def __init__(self, message, line=None, path=None):
        self.message = message
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class Attribute:
    name: str
    index: int
    values: tuple[str, ...] | None = None  # None for numeric

    def __post_init__(self):
        if self.values is not None:
            if len(self.values) == 0:
                raise DatasetError(f"categorical attribute {self.name!r} has no values")
            if len(set(self.values)) != len(self.values):
                raise DatasetError(f"categorical attribute {self.name!r} has duplicate values")

    @property
    def is_numeric(self) -> bool:
        return self.values is None

    @property
    def kind(self) -> str:
        return "numeric" if self.values is None else "categorical"

    def code(self, token: str) -> int:
        return self.values.index(token)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column-typed record table with a designated class attribute."""

    attributes: tuple[Attribute, ...]
    class_index: int
    values: np.ndarray
    name: str = "dataset"
    _y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape[1] != len(self.attributes):
            raise DatasetError(
                f"values must have shape (n, {len(self.attributes)}), got {values.shape}"
            )
        for i, attr in enumerate(self.attributes):
            if attr.index != i:
                raise DatasetError(f"attribute {attr.name!r} has index {attr.index}, expected {i}")
            if attr.values is not None:
                col = values[:, i]
                ok = np.isnan(col) | ((col >= 0) & (col < len(attr.values)) & (col == np.floor(col)))
                if not ok.all():
                    raise DatasetError(f"invalid value id in categorical attribute {attr.name!r}")
        cls = self.attributes[self.class_index]
        if cls.is_numeric:
            raise DatasetError(f"class attribute {cls.name!r} must be categorical")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        ycol = values[:, self.class_index]
        y = np.where(np.isnan(ycol), -1, ycol).astype(np.int64)
        y.setflags(write=False)
        object.__setattr__(self, "_y", y)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def class_attribute(self) -> Attribute:
        return self.attributes[self.class_index]

    @property
    def classes(self) -> tuple[str, ...]:
        return self.class_attribute.values

    @property
    def n_classes(self) -> int:
        return len(self.class_attribute.values)

    @property
    def y(self) -> np.ndarray:
        """Class ids per record; -1 marks a missing class cell."""
        return self._y

    @property
    def feature_indices(self) -> list[int]:
        return [a.index for a in self.attributes if a.index != self.class_index]

    def class_counts(self, indices=None) -> np.ndarray:
        y = self._y if indices is None else self._y[indices]
        return np.bincount(y[y >= 0], minlength=self.n_classes).astype(np.int64)

    def check_trainable(self):
        if self.n == 0:
            raise DatasetError("no records")
        missing = np.flatnonzero(self._y < 0)
        if missing.size:
            raise DatasetError(f"record {int(missing[0])} has a missing class value")

    def subset(self, rows) -> "Dataset":
        """New dataset holding ``rows`` (in the given order) of this one."""
        return Dataset(self.attributes, self.class_index, self.values[np.asarray(rows, dtype=np.int64)], self.name)

    def fingerprint(self) -> str:
        """Stable description of the schema, used to match models to data."""
        parts = [f"class={self.class_index}"]
        for a in self.attributes:
            parts.append(a.name + ":" + ("numeric" if a.values is None else "{" + ",".join(a.values) + "}"))
        return "|".join(parts)

    def same_as(self, other: "Dataset") -> bool:
        return (
            self.attributes == other.attributes
            and self.class_index == other.class_index
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def format_cell(self, row: int, col: int) -> str:
        v = self.values[row, col]
        if math.isnan(v):
            return ""
        attr = self.attributes[col]
        if attr.values is not None:
            return attr.values[int(v)]
        return repr(float(v))


# ---------------------------------------------------------------------------
# loading


def load_dataset(path, format=None, class_spec="last", categorical=None, name=None) -> Dataset:
    """Load a dataset from an ARFF or CSV file.

    Parameters
    ----------
    path : str or Path
        File to read.
    format : {"arff", "csv"}, optional
        Inferred from the file extension when omitted.
    class_spec : str
        Name of the class attribute, or ``"last"``.
    categorical : iterable of str, optional
        CSV only. Column names forced to categorical regardless of inference.
        A ``<file>.schema.json`` sidecar, when present, takes the same role.
    """
    path = Path(path)
    if format is None:
        format = "arff" if path.suffix.lower() == ".arff" else "csv"
    if format not in ("arff", "csv"):
        raise DatasetError(f"unknown format {format!r}")
    if not path.exists():
        raise DatasetError("file not found", path=path)
    text = path.read_text(encoding="utf-8-sig")
    if name is None:
        name = path.stem
    try:
        if format == "arff":
            return _parse_arff(text, class_spec, name)
        sidecar, declared_class = _read_sidecar(path) or (None, None)
        if class_spec == "last" and declared_class:
            class_spec = declared_class
        return _parse_csv(text, class_spec, name, categorical, sidecar)
    except DatasetError as exc:
        if exc.path is None:
            raise DatasetError(exc.message, line=exc.line, path=path) from None
        raise


def _resolve_class(names, class_spec):
    if class_spec == "last":
        return len(names) - 1
    try:
        return names.index(class_spec)
    except ValueError:
        raise DatasetError(f"class attribute {class_spec!r} not found") from None


_ATTR_RE = re.compile(r"@attribute\s+('(?:[^']*)'|\"(?:[^\"]*)\"|\S+)\s+(.*)$", re.IGNORECASE)


def _unquote(tok: str) -> str:
    tok = tok.strip()
    if len(tok) >= 2 and tok[0] == tok[-1] and tok[0] in "'\"":
        return tok[1:-1]
    return tok


def _split_arff_row(line: str) -> list[str]:
    return [_unquote(t) for t in next(csv.reader([line], quotechar="'", skipinitialspace=True))]


def _parse_arff(text, class_spec, name) -> Dataset:
    attrs = []
    rows = []
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if not in_data:
            low = line.lower()
            if low.startswith("@relation"):
                continue
            if low.startswith("@attribute"):
                m = _ATTR_RE.match(line)
                if m is None:
                    raise DatasetError(f"malformed attribute line: {line!r}", line=lineno)
                aname, spec = _unquote(m.group(1)), m.group(2).strip()
                if spec.startswith("{"):
                    if not spec.endswith("}"):
                        raise DatasetError(f"unterminated value list for {aname!r}", line=lineno)
                    inner = spec[1:-1].strip()
                    vals = tuple(_split_arff_row(inner)) if inner else ()
                    try:
                        attrs.append(Attribute(aname, len(attrs), vals))
                    except DatasetError as exc:
                        raise DatasetError(str(exc), line=lineno) from None
                elif spec.lower() in ("numeric", "real", "integer"):
                    attrs.append(Attribute(aname, len(attrs)))
                else:
                    raise DatasetError(f"unsupported attribute type {spec!r}", line=lineno)
                continue
            if low.startswith("@data"):
                if not attrs:
                    raise DatasetError("@data before any @attribute", line=lineno)
                in_data = True
                continue
            raise DatasetError(f"unexpected header line: {line!r}", line=lineno)
        if line.startswith("{"):
            raise DatasetError("sparse ARFF rows are not supported", line=lineno)
        cells = _split_arff_row(line)
        if len(cells) != len(attrs):
            raise DatasetError(f"ragged row: expected {len(attrs)} cells, got {len(cells)}", line=lineno)
        rows.append((lineno, cells))
    if not in_data:
        raise DatasetError("missing @data section")
    class_index = _resolve_class([a.name for a in attrs], class_spec)
    if attrs[class_index].is_numeric:
        raise DatasetError(f"class attribute {attrs[class_index].name!r} must be nominal")
    return _build(attrs, class_index, rows, name, missing_tokens=("?",))


def _build(attrs, class_index, rows, name, missing_tokens) -> Dataset:
    if not rows:
        raise DatasetError("no records")
    values = np.empty((len(rows), len(attrs)), dtype=np.float64)
    lookups = [None if a.values is None else {v: i for i, v in enumerate(a.values)} for a in attrs]
    for r, (lineno, cells) in enumerate(rows):
        for c, tok in enumerate(cells):
            tok = tok.strip()
            if tok in missing_tokens:
                if c == class_index:
                    raise DatasetError("missing class value", line=lineno)
                values[r, c] = MISSING
                continue
            lut = lookups[c]
            if lut is None:
                try:
                    values[r, c] = float(tok)
                except ValueError:
                    raise DatasetError(
                        f"non-numeric value {tok!r} for numeric attribute {attrs[c].name!r}", line=lineno
                    ) from None
            else:
                try:
                    values[r, c] = lut[tok]
                except KeyError:
                    raise DatasetError(
                        f"unknown value {tok!r} for attribute {attrs[c].name!r}", line=lineno
                    ) from None
    return Dataset(tuple(attrs), class_index, values, name=name)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _read_sidecar(path: Path):
    side = path.with_name(path.name + ".schema.json")
    if not side.exists():
        return None
    doc = json.loads(side.read_text())
    return {a["name"]: a.get("values") for a in doc["attributes"]}, doc.get("class")


def _parse_csv(text, class_spec, name, categorical, sidecar) -> Dataset:
    reader = csv.reader(text.splitlines())
    rows = []
    header = None
    for lineno, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if header is None:
            header = [c.strip() for c in cells]
            if len(set(header)) != len(header):
                raise DatasetError("duplicate column names in header", line=lineno)
            continue
        if len(cells) != len(header):
            raise DatasetError(f"ragged row: expected {len(header)} cells, got {len(cells)}", line=lineno)
        rows.append((lineno, [c.strip() for c in cells]))
    if header is None:
        raise DatasetError("empty file: no header")
    if not rows:
        raise DatasetError("no records")
    class_index = _resolve_class(header, class_spec)
    forced = set(categorical or ())
    unknown = forced - set(header)
    if unknown:
        raise DatasetError(f"unknown categorical columns: {sorted(unknown)}")
    attrs = []
    for c, col in enumerate(header):
        present = [cells[c] for _, cells in rows if cells[c] != ""]
        if sidecar is not None and col in sidecar:
            declared = sidecar[col]
            attrs.append(Attribute(col, c, None if declared is None else tuple(declared)))
            continue
        numeric = c != class_index and col not in forced and all(_is_number(t) for t in present)
        if numeric:
            attrs.append(Attribute(col, c))
        else:
            seen = dict.fromkeys(present)
            if not seen:
                raise DatasetError(f"column {col!r} has no values")
            attrs.append(Attribute(col, c, tuple(seen)))
    return _build(attrs, class_index, rows, name, missing_tokens=("",))


def write_csv(ds: Dataset, path, sidecar=True):
    """Write ``ds`` as CSV with a header row; optionally write the schema sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([a.name for a in ds.attributes])
        for r in range(ds.n):
            w.writerow([ds.format_cell(r, c) for c in range(len(ds.attributes))])
    if sidecar:
        doc = {
            "schema": "fastforest-csv-schema/1",
            "class": ds.class_attribute.name,
            "attributes": [
                {"name": a.name, "values": None if a.values is None else list(a.values)}
                for a in ds.attributes
            ],
        }
        path.with_name(path.name + ".schema.json").write_text(json.dumps(doc, indent=1))


def write_arff(ds: Dataset, path):
    def q(s):
        return f"'{s}'" if re.search(r"[\s,{}'%]", s) else s

    lines = [f"@relation {q(ds.name)}", ""]
    for a in ds.attributes:
        spec = "numeric" if a.values is None else "{" + ",".join(q(v) for v in a.values) + "}"
        lines.append(f"@attribute {q(a.name)} {spec}")
    lines += ["", "@data"]
    for r in range(ds.n):
        cells = []
        for c, a in enumerate(ds.attributes):
            tok = ds.format_cell(r, c)
            cells.append("?" if tok == "" else (q(tok) if a.values is not None else tok))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# cross-validation folds


@dataclass(frozen=True)
class FoldPlan:
    folds: list  # (train_indices, test_indices) pairs
    seed: int

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def stratified_folds(ds: Dataset, k: int, seed: int) -> FoldPlan:
    """Stratified k-fold split.

    Records are grouped by class, each group is shuffled, and the groups are
    dealt round-robin into the folds with the dealing position carried from
    one class to the next, so fold sizes stay within one record of each other.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > ds.n:
        raise ValueError(f"k={k} exceeds the number of records ({ds.n})")
    rng = np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    y = ds.y
    buckets = [[] for _ in range(k)]
    pos = 0
    for c in range(ds.n_classes):
        members = rng.permutation(np.flatnonzero(y == c))
        for idx in members:
            buckets[pos].append(int(idx))
            pos = (pos + 1) % k
    all_idx = np.arange(ds.n)
    folds = []
    for b in buckets:
        test = np.sort(np.asarray(b, dtype=np.int64))
        mask = np.ones(ds.n, dtype=bool)
        mask[test] = False
        folds.append((all_idx[mask], test))
    return FoldPlan(folds, seed)

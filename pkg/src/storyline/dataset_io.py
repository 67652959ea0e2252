"""On-disk dataset artifacts: manifests, per-video feature matrices, annotations,
vocabularies and the taxonomy used for semantic scoring.

All loaders are pure functions returning immutable-after-construction objects,
so they are safe to call concurrently on distinct files.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import SLOTS

# Binary feature file: three little-endian int64 (magic, T, d), then T*d
# float64 values row-major. CSV is the human-inspectable alternative.
FEATURE_MAGIC = int.from_bytes(b"FEATMAT\0", "little")
_HEADER = struct.Struct("<qqq")


class DataError(ValueError):
    """Malformed or inconsistent on-disk data."""


@dataclass(frozen=True)
class FeatureSequence:
    """One video as a T x d matrix of non-negative per-frame activations."""

    video_id: str
    features: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class AnnotationSet:
    """Human (subject, verb, object) triplets for one video, one per annotator."""

    video_id: str
    triplets: tuple[tuple[str, str, str], ...]


@dataclass(frozen=True)
class Vocabulary:
    slot: str
    words: tuple[str, ...]
    index: dict[str, int] = field(hash=False, default_factory=dict)

    def __post_init__(self):
        if self.slot not in SLOTS:
            raise DataError(f"unknown slot {self.slot!r}")
        if len(set(self.words)) != len(self.words):
            raise DataError(f"duplicate words in {self.slot} vocabulary")
        object.__setattr__(self, "index", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    def lookup(self, word: str) -> int:
        try:
            return self.index[word]
        except KeyError:
            raise DataError(f"word {word!r} not in {self.slot} vocabulary") from None

    def word_at(self, i: int) -> str:
        return self.words[i]


class Taxonomy:
    """Rooted tree over words and internal concepts; depth(root) = 1."""

    def __init__(self, parent: dict[str, str], root: str):
        self.parent = dict(parent)
        self.root = root
        self.depth: dict[str, int] = {root: 1}
        # children index for a BFS depth sweep
        children: dict[str, list[str]] = {}
        for child, par in self.parent.items():
            children.setdefault(par, []).append(child)
        queue = [root]
        while queue:
            node = queue.pop()
            for ch in children.get(node, ()):
                self.depth[ch] = self.depth[node] + 1
                queue.append(ch)
        unreachable = set(self.parent) - set(self.depth)
        if unreachable:
            raise DataError(
                f"taxonomy cycle: nodes unreachable from root: {sorted(unreachable)[:5]}"
            )

    def __contains__(self, node: str) -> bool:
        return node in self.depth

    def ancestors(self, node: str) -> list[str]:
        """Path from node up to the root, inclusive."""
        path = [node]
        while path[-1] != self.root:
            path.append(self.parent[path[-1]])
        return path

    def lca(self, a: str, b: str) -> str:
        on_a_path = set(self.ancestors(a))
        for node in self.ancestors(b):
            if node in on_a_path:
                return node
        return self.root


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    split: str
    feature_path: str
    has_annotations: bool


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    d: int

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]


def save_features(seq: FeatureSequence, path) -> None:
    """Write a feature matrix; `.csv` suffix selects the CSV form, else binary."""
    path = Path(path)
    m = np.ascontiguousarray(seq.features, dtype=np.float64)
    if path.suffix == ".csv":
        with open(path, "w") as fh:
            for row in m:
                fh.write(",".join(repr(v) for v in row.tolist()) + "\n")
    else:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(FEATURE_MAGIC, m.shape[0], m.shape[1]))
            fh.write(m.tobytes())


def load_features(path, expected_d: int | None = None,
                  allow_negative: bool = False) -> FeatureSequence:
    """Load one video's feature matrix (binary or CSV) and validate it.

    Rejects empty, non-finite and (by default) negative matrices; with
    `expected_d` also enforces the manifest-declared column count.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"feature file not found: {path}")
    if path.suffix == ".csv":
        m = _read_csv_features(path)
    else:
        m = _read_binary_features(path)
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise DataError(f"{path}: empty feature matrix {m.shape}")
    if expected_d is not None and m.shape[1] != expected_d:
        raise DataError(f"{path}: has {m.shape[1]} columns, manifest declares {expected_d}")
    bad = ~np.isfinite(m)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataError(f"{path}: non-finite value at row {r}, column {c}")
    if not allow_negative:
        neg = m < 0
        if neg.any():
            r, c = np.argwhere(neg)[0]
            raise DataError(f"{path}: negative value at row {r}, column {c}")
    m.setflags(write=False)
    return FeatureSequence(video_id=path.stem, features=m)


def _read_binary_features(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, t, d = _HEADER.unpack_from(raw)
    if magic != FEATURE_MAGIC:
        raise DataError(f"{path}: bad magic {magic:#x}")
    if t < 1 or d < 1:
        raise DataError(f"{path}: invalid shape {t}x{d}")
    expected = _HEADER.size + 8 * t * d
    if len(raw) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(raw)}")
    m = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(t, d)
    return m.astype(np.float64, copy=True)


def _read_csv_features(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataError(f"{path}:{lineno}: expected {width} columns, found {len(cells)}")
            row = []
            for col, cell in enumerate(cells):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell at row {lineno - 1}, column {col}: {cell!r}"
                    ) from None
                if v != v:  # NaN parses as float; report it like a bad cell
                    raise DataError(f"{path}: non-finite value at row {lineno - 1}, column {col}")
                row.append(v)
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: empty feature matrix")
    return np.array(rows, dtype=np.float64)


def load_manifest(path) -> DatasetManifest:
    """Parse a JSON-lines manifest: header {"d": N}, then one entry per line.

    Feature files are stat-checked for existence; their contents are not read.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    d = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from None
            if d is None:
                if not (isinstance(obj, dict) and isinstance(obj.get("d"), int) and obj["d"] >= 1):
                    raise DataError(f"{path}:{lineno}: first line must be a header {{\"d\": N}}")
                d = obj["d"]
                continue
            try:
                vid = obj["video_id"]
                split = obj["split"]
                feat = obj["features"]
            except (TypeError, KeyError) as exc:
                raise DataError(f"{path}:{lineno}: entry missing field {exc}") from None
            if split not in ("train", "test"):
                raise DataError(f"{path}:{lineno}: split must be train or test, got {split!r}")
            if vid in seen:
                raise DataError(f"{path}:{lineno}: duplicate video_id {vid!r}")
            seen.add(vid)
            fpath = base / feat
            if not fpath.exists():
                raise DataError(f"{path}:{lineno}: missing feature file {fpath}")
            entries.append(ManifestEntry(vid, split, feat, bool(obj.get("annotations", False))))
    if d is None:
        raise DataError(f"{path}: empty manifest (no header line)")
    return DatasetManifest(entries=tuple(entries), d=d)


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"d": manifest.d}) + "\n")
        for e in manifest.entries:
            obj = {"video_id": e.video_id, "split": e.split, "features": e.feature_path}
            if e.has_annotations:
                obj["annotations"] = True
            fh.write(json.dumps(obj) + "\n")


def load_annotations(path) -> dict[str, AnnotationSet]:
    path = Path(path)
    out: dict[str, AnnotationSet] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from None
            vid = obj.get("video_id")
            triplets = obj.get("triplets")
            if not isinstance(vid, str) or not isinstance(triplets, list) or not triplets:
                raise DataError(f"{path}:{lineno}: entry needs video_id and non-empty triplets")
            if vid in out:
                raise DataError(f"{path}:{lineno}: duplicate video_id {vid!r}")
            clean = []
            for t in triplets:
                if not (isinstance(t, list) and len(t) == 3 and all(isinstance(w, str) for w in t)):
                    raise DataError(f"{path}:{lineno}: triplet must be [subject, verb, object]")
                clean.append(tuple(t))
            out[vid] = AnnotationSet(video_id=vid, triplets=tuple(clean))
    return out


def save_annotations(annotations: dict[str, AnnotationSet], path) -> None:
    with open(path, "w") as fh:
        for vid in annotations:
            obj = {"video_id": vid, "triplets": [list(t) for t in annotations[vid].triplets]}
            fh.write(json.dumps(obj) + "\n")


def load_vocabulary(path, slot: str) -> Vocabulary:
    words = []
    with open(path) as fh:
        for line in fh:
            w = line.strip()
            if w:
                words.append(w)
    if not words:
        raise DataError(f"{path}: empty vocabulary")
    return Vocabulary(slot=slot, words=tuple(words))


def save_vocabulary(vocab: Vocabulary, path) -> None:
    with open(path, "w") as fh:
        for w in vocab.words:
            fh.write(w + "\n")


def load_taxonomy(path) -> Taxonomy:
    """Parse child<TAB>parent pairs into a rooted tree with precomputed depths."""
    path = Path(path)
    parent: dict[str, str] = {}
    nodes: set[str] = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataError(f"{path}:{lineno}: expected 'child<TAB>parent'")
            child, par = parts
            if child == par:
                raise DataError(f"{path}:{lineno}: self-loop on {child!r}")
            if child in parent:
                raise DataError(f"{path}:{lineno}: node {child!r} has two parents "
                                f"({parent[child]!r} and {par!r})")
            parent[child] = par
            nodes.update((child, par))
    if not parent:
        raise DataError(f"{path}: empty taxonomy")
    roots = sorted(nodes - set(parent))
    if len(roots) > 1:
        raise DataError(f"{path}: multiple roots: {roots}")
    if not roots:
        raise DataError(f"{path}: cycle detected (every node has a parent)")
    return Taxonomy(parent=parent, root=roots[0])


def save_taxonomy(taxonomy: Taxonomy, path) -> None:
    with open(path, "w") as fh:
        for child in sorted(taxonomy.parent):
            fh.write(f"{child}\t{taxonomy.parent[child]}\n")


def most_common_word(annotations: AnnotationSet, slot: str) -> str:
    """Modal word for one slot across annotators; ties favor the smaller word."""
    col = SLOTS.index(slot)
    counts = Counter(t[col] for t in annotations.triplets)
    top = max(counts.values())
    return min(w for w, n in counts.items() if n == top)


def validate_annotations(annotations: dict[str, AnnotationSet],
                         vocabs: dict[str, Vocabulary]) -> None:
    """Check every annotated word against its slot vocabulary."""
    for vid, ann in annotations.items():
        for t in ann.triplets:
            for slot, word in zip(SLOTS, t):
                if word not in vocabs[slot].index:
                    raise DataError(
                        f"video {vid!r}: {slot} word {word!r} not in vocabulary"
                    )


@dataclass(frozen=True)
class Dataset:
    """A dataset directory: manifest.jsonl plus annotations, vocabularies and
    taxonomy where present. Feature matrices are loaded per split on demand."""

    root: Path
    manifest: DatasetManifest
    annotations: dict[str, AnnotationSet]
    vocabs: dict[str, Vocabulary] | None
    taxonomy: Taxonomy | None

    def load_split(self, split: str, allow_negative: bool = False,
                   threads: int = 1) -> list[FeatureSequence]:
        from .parallel import parallel_map

        def load_one(entry: ManifestEntry) -> FeatureSequence:
            seq = load_features(self.root / entry.feature_path,
                                expected_d=self.manifest.d,
                                allow_negative=allow_negative)
            if seq.video_id != entry.video_id:
                seq = FeatureSequence(video_id=entry.video_id, features=seq.features)
            return seq

        return parallel_map(load_one, self.manifest.split(split), threads=threads)


def load_dataset(root, allow_negative: bool = False) -> Dataset:
    """Open a dataset directory laid out as written by the generator:
    manifest.jsonl, features/, annotations.jsonl, taxonomy.txt, vocab_<slot>.txt.

    Vocabularies fall back to the sorted distinct annotated words of the train
    split when the vocab files are absent.
    """
    root = Path(root)
    manifest = load_manifest(root / "manifest.jsonl")
    ann_path = root / "annotations.jsonl"
    annotations = load_annotations(ann_path) if ann_path.exists() else {}
    vocabs: dict[str, Vocabulary] | None = None
    if all((root / f"vocab_{slot}.txt").exists() for slot in SLOTS):
        vocabs = {slot: load_vocabulary(root / f"vocab_{slot}.txt", slot)
                  for slot in SLOTS}
    elif annotations:
        train_ids = {e.video_id for e in manifest.split("train")}
        words: dict[str, set[str]] = {slot: set() for slot in SLOTS}
        for vid, ann in annotations.items():
            if vid in train_ids:
                for t in ann.triplets:
                    for slot, w in zip(SLOTS, t):
                        words[slot].add(w)
        if all(words[slot] for slot in SLOTS):
            vocabs = {slot: Vocabulary(slot=slot, words=tuple(sorted(words[slot])))
                      for slot in SLOTS}
    tax_path = root / "taxonomy.txt"
    taxonomy = load_taxonomy(tax_path) if tax_path.exists() else None
    return Dataset(root=root, manifest=manifest, annotations=annotations,
                   vocabs=vocabs, taxonomy=taxonomy)

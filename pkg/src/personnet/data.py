"""Dataset ingestion, augmentation, balanced pair sampling and a synthetic corpus."""
import os
import shutil
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, IngestionError, SamplingError

# ---------------------------------------------------------------- manifest


@dataclass(frozen=True)
class Record:
    path: str
    identity: int
    camera: int


@dataclass
class DatasetManifest:
    """Image records plus an ``identity -> camera -> [record index]`` index.

    ``root`` is the directory image paths are resolved against.
    """
    records: list
    root: Path = Path(".")
    index: dict = field(init=False, repr=False)
    _images: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        self.index = defaultdict(lambda: defaultdict(list))
        for i, r in enumerate(self.records):
            self.index[r.identity][r.camera].append(i)
        self.index = {k: dict(v) for k, v in self.index.items()}

    def __len__(self):
        return len(self.records)

    @property
    def identities(self):
        return sorted(self.index)

    @property
    def cameras(self):
        return sorted({r.camera for r in self.records})

    def eligible_identities(self):
        """Identities with images under at least two cameras."""
        return [k for k in self.identities if len(self.index[k]) >= 2]

    def image(self, i):
        """Decoded image of record ``i`` (cached after the first read)."""
        img = self._images.get(i)
        if img is None:
            img = self._images[i] = decode_image(self.root / self.records[i].path)
        return img

    def subset(self, identities):
        keep = set(identities)
        return DatasetManifest([r for r in self.records if r.identity in keep], self.root)


def load_manifest(path):
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"manifest {path} does not exist")
    records, seen = [], {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise IngestionError(
                    f"{path}:{lineno}: expected 3 comma-separated fields, got {len(parts)}")
            img, ident, cam = parts
            try:
                rec = Record(img, int(ident), int(cam))
            except ValueError:
                raise IngestionError(f"{path}:{lineno}: identity and camera must be integers") from None
            if img in seen:
                raise IngestionError(f"{path}:{lineno}: duplicate path {img!r} (first on line {seen[img]})")
            seen[img] = lineno
            records.append(rec)
    return DatasetManifest(records, path.parent)


def write_manifest(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(f"{r.path},{r.identity},{r.camera}\n")


# ---------------------------------------------------------------- P6 pixmaps

def _read_header(buf):
    """Parse the P6 header; returns ``(width, height, maxval, payload offset)``."""
    if buf[:2] != b"P6":
        raise FormatError(f"bad magic {buf[:2]!r}, expected b'P6'", 0)
    pos, tokens = 2, []
    while len(tokens) < 3:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(buf):
            raise FormatError("truncated header", pos)
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and buf[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError(f"unexpected byte {buf[pos:pos + 1]!r} in header", pos)
        tokens.append(int(buf[start:pos]))
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise FormatError("missing whitespace after header", pos)
    width, height, maxval = tokens
    return width, height, maxval, pos + 1


def decode_pixmap(buf):
    """Decode 8-bit binary pixmap bytes to a ``[H, W, 3]`` float32 array in [0, 1]."""
    width, height, maxval, offset = _read_header(buf)
    if width < 1 or height < 1:
        raise FormatError(f"image extents {width}x{height} must be positive", 3)
    if maxval != 255:
        raise FormatError(f"only 8-bit pixmaps (maxval 255) are supported, got {maxval}", offset - 1)
    need = width * height * 3
    if len(buf) - offset < need:
        raise FormatError(f"truncated payload: {len(buf) - offset} of {need} bytes", len(buf))
    px = np.frombuffer(buf, dtype=np.uint8, count=need, offset=offset)
    return px.reshape(height, width, 3).astype(np.float32) / np.float32(255.0)


def decode_image(path):
    with open(path, "rb") as fh:
        return decode_pixmap(fh.read())


def encode_pixmap(img):
    """Encode a ``[H, W, 3]`` array in [0, 1] as P6 bytes."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected [H,W,3] image, got {img.shape}")
    px = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + px.tobytes()


# ---------------------------------------------------------------- augmentation

def translation_range(height, width, fraction=0.05):
    return int(round(fraction * height)), int(round(fraction * width))


def shift_image(img, dy, dx):
    """Translate by ``(dy, dx)`` pixels; vacated pixels become zero."""
    h, w = img.shape[:2]
    out = np.zeros_like(img)
    if abs(dy) >= h or abs(dx) >= w:
        return out
    src_y = slice(max(0, -dy), h - max(0, dy))
    dst_y = slice(max(0, dy), h - max(0, -dy))
    src_x = slice(max(0, -dx), w - max(0, dx))
    dst_x = slice(max(0, dx), w - max(0, -dx))
    out[dst_y, dst_x] = img[src_y, src_x]
    return out


def draw_shifts(height, width, count, rng):
    my, mx = translation_range(height, width)
    return np.stack([rng.integers(-my, my + 1, size=count),
                     rng.integers(-mx, mx + 1, size=count)], axis=1)


def augment_translate(img, count=5, rng=None):
    """``count`` randomly translated copies, shifts uniform over +-5% of each extent."""
    h, w = img.shape[:2]
    return [shift_image(img, int(dy), int(dx)) for dy, dx in draw_shifts(h, w, count, rng)]


def augment_reflect(img):
    return img[:, ::-1].copy()


# ---------------------------------------------------------------- pair sampling

@dataclass
class PairBatch:
    pairs: list            # (img_a, img_b, label) with label 1 = same person
    meta: list             # (record index a, record index b) per pair

    @property
    def size(self):
        return len(self.pairs)

    @property
    def labels(self):
        return [p[2] for p in self.pairs]


def _augmented(manifest, i, rng, translate, reflect):
    img = manifest.image(i)
    if translate:
        img = augment_translate(img, 1, rng)[0]
    if reflect and rng.random() < 0.5:
        img = augment_reflect(img)
    return img


def sample_pair_indices(manifest, rng, positive, eligible=None):
    """Record indices ``(a, b)`` of one cross-camera pair.

    Positives share an identity; negatives come from two distinct identities
    chosen uniformly over identity pairs.
    """
    eligible = manifest.eligible_identities() if eligible is None else eligible
    if len(eligible) < 2:
        raise SamplingError(f"need at least 2 identities seen by two cameras, have {len(eligible)}")
    if positive:
        ident = eligible[rng.integers(len(eligible))]
        cams = sorted(manifest.index[ident])
        ca, cb = rng.choice(len(cams), size=2, replace=False)
        a_list, b_list = manifest.index[ident][cams[ca]], manifest.index[ident][cams[cb]]
    else:
        ia, ib = rng.choice(len(eligible), size=2, replace=False)
        id_a, id_b = eligible[ia], eligible[ib]
        cams_a = sorted(manifest.index[id_a])
        cam_a = cams_a[rng.integers(len(cams_a))]
        cams_b = [c for c in sorted(manifest.index[id_b]) if c != cam_a]
        cam_b = cams_b[rng.integers(len(cams_b))]
        a_list, b_list = manifest.index[id_a][cam_a], manifest.index[id_b][cam_b]
    a = a_list[rng.integers(len(a_list))]
    b = b_list[rng.integers(len(b_list))]
    if rng.random() < 0.5:
        a, b = b, a
    return a, b


def sample_balanced_pairs(manifest, batch_size, rng, augment=False, reflect=False):
    """Draw ``batch_size / 2`` positive and as many negative pairs.

    Each pair's branch order is randomised. With ``augment`` every image gets
    a random translation; with ``reflect`` it is mirrored with probability 0.5.
    """
    if batch_size < 2 or batch_size % 2:
        raise SamplingError(f"batch size must be a positive even number, got {batch_size}")
    eligible = manifest.eligible_identities()
    pairs, meta = [], []
    for k in range(batch_size):
        positive = k < batch_size // 2
        a, b = sample_pair_indices(manifest, rng, positive, eligible)
        pairs.append((_augmented(manifest, a, rng, augment, reflect),
                      _augmented(manifest, b, rng, augment, reflect),
                      int(positive)))
        meta.append((a, b))
    return PairBatch(pairs, meta)


# ---------------------------------------------------------------- synthetic corpus

def _render_identity(rng, height, width):
    """Color bands (head/torso/legs/feet) plus a coarse per-identity texture."""
    cuts = np.sort(rng.integers(int(0.15 * height), int(0.9 * height), size=3))
    bounds = [0, *cuts, height]
    img = np.empty((height, width, 3))
    for i in range(4):
        img[bounds[i]:bounds[i + 1]] = rng.uniform(0.1, 0.9, size=3)
    cell = 4
    tex = rng.normal(0.0, 0.12, size=(-(-height // cell), -(-width // cell), 3))
    img += np.kron(tex, np.ones((cell, cell, 1)))[:height, :width]
    # a silhouette: darker margins left and right
    margin = max(1, width // 6)
    img[:, :margin] *= 0.5
    img[:, -margin:] *= 0.5
    return img


def _view(img, tint, shift, rng, jitter, noise):
    """One observation: view tint and offset, plus per-image jitter, gain,
    sensor noise and a random occluding block."""
    h, w = img.shape[:2]
    dy, dx = shift
    dy += int(rng.integers(-jitter, jitter + 1))
    dx += int(rng.integers(-jitter, jitter + 1))
    out = shift_image(img * tint * rng.uniform(0.7, 1.3), dy, dx)
    oh, ow = int(rng.integers(h // 10, h // 5)), int(rng.integers(w // 5, w // 3))
    y0, x0 = int(rng.integers(0, h - oh)), int(rng.integers(0, w - ow))
    out[y0:y0 + oh, x0:x0 + ow] = rng.uniform(0.0, 1.0, size=3)
    out = out + rng.normal(0.0, noise, size=out.shape)
    return np.clip(out, 0.0, 1.0)


def synth_images(identities, per_view, height, width, seed):
    """Yield ``(identity, camera, k, image)`` for the synthetic corpus."""
    if identities < 2 or per_view < 1:
        raise ValueError("need at least 2 identities and 1 image per view")
    if height < 8 or width < 8:
        raise ValueError("synthetic images must be at least 8x8")
    rng = np.random.default_rng(seed)
    tints = [np.ones(3), rng.uniform(0.75, 1.25, size=3)]
    shifts = [(0, 0), (max(1, height // 20), -max(1, width // 20))]
    jitter = max(1, height // 20)
    for ident in range(identities):
        base = _render_identity(rng, height, width)
        for cam in range(2):
            for k in range(per_view):
                yield ident, cam, k, _view(base, tints[cam], shifts[cam], rng, jitter, 0.05)


def synth_dataset(out_dir, identities, per_view, height, width, seed, force=False):
    """Write ``identities * per_view * 2`` P6 images plus ``manifest.csv``.

    Output is byte-identical for a given seed. Files are written to a sibling
    temporary directory that is renamed into place on success.
    """
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise FileExistsError(f"{out_dir} is not empty (use force to overwrite)")
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".synth-", dir=out_dir.parent))
    try:
        records = []
        for ident, cam, k, img in synth_images(identities, per_view, height, width, seed):
            name = f"id{ident:04d}_c{cam}_{k:02d}.ppm"
            (tmp / name).write_bytes(encode_pixmap(img))
            records.append(Record(name, ident, cam))
        write_manifest(records, tmp / "manifest.csv")
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out_dir / "manifest.csv"

"""
MNIST-family ingestion: IDX parsing, class-balanced subsampling, patch
extraction, fixed per-position PCA and [0, pi] feature scaling.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from sklearn.decomposition import PCA

from qcsam.errors import ConfigError, DataError, IdxFormatError, StateError
from qcsam.model import SUPPORTED_GRIDS

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
IMAGE_HEADER = 16
LABEL_HEADER = 8
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ImageSet:
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.uint8)
        labels = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        if images.ndim != 3:
            raise DataError(f"images must be (N, rows, cols), got shape {images.shape}")
        if images.shape[0] != labels.shape[0]:
            raise DataError(
                f"{images.shape[0]} images but {labels.shape[0]} labels"
            )
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def take(self, indices: np.ndarray) -> "ImageSet":
        return ImageSet(self.images[indices], self.labels[indices])


def _read_header(src: bytes, magic: int, header_len: int, path: Path) -> List[int]:
    if len(src) < header_len:
        raise IdxFormatError(
            f"{path}: header needs {header_len} bytes, file has {len(src)}",
            offset=len(src),
        )
    found = int.from_bytes(src[0:4], "big")
    if found != magic:
        raise IdxFormatError(
            f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}", offset=0
        )
    return [int.from_bytes(src[i:i + 4], "big") for i in range(4, header_len, 4)]


def read_idx_images(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    src = path.read_bytes()
    num, rows, cols = _read_header(src, IMAGE_MAGIC, IMAGE_HEADER, path)
    expected = num * rows * cols
    actual = len(src) - IMAGE_HEADER
    if actual < expected:
        raise IdxFormatError(
            f"{path}: truncated payload, expected {expected} bytes, found {actual}",
            offset=len(src),
        )
    payload = np.frombuffer(src, dtype=np.uint8, count=expected, offset=IMAGE_HEADER)
    return payload.reshape(num, rows, cols)


def read_idx_labels(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    src = path.read_bytes()
    (num,) = _read_header(src, LABEL_MAGIC, LABEL_HEADER, path)
    actual = len(src) - LABEL_HEADER
    if actual < num:
        raise IdxFormatError(
            f"{path}: truncated payload, expected {num} bytes, found {actual}",
            offset=len(src),
        )
    return np.frombuffer(src, dtype=np.uint8, count=num, offset=LABEL_HEADER)


def load_idx(images_path: Union[str, Path], labels_path: Union[str, Path]) -> ImageSet:
    """Missing files raise OSError; malformed ones IdxFormatError."""
    return ImageSet(read_idx_images(images_path), read_idx_labels(labels_path))


def write_idx(images_path: Union[str, Path], labels_path: Union[str, Path], images: np.ndarray, labels: np.ndarray):
    """Write an ImageSet back in IDX form (fixtures and tooling)."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    num, rows, cols = images.shape
    header = b"".join(v.to_bytes(4, "big") for v in (IMAGE_MAGIC, num, rows, cols))
    Path(images_path).write_bytes(header + images.tobytes())
    header = b"".join(v.to_bytes(4, "big") for v in (LABEL_MAGIC, labels.shape[0]))
    Path(labels_path).write_bytes(header + labels.tobytes())


def _draw(images: ImageSet, classes: Sequence[int], per_class: int, rng: np.random.Generator, split: str) -> ImageSet:
    chosen = []
    for label in classes:
        pool = np.flatnonzero(images.labels == label)
        if pool.shape[0] < per_class:
            raise DataError(
                f"{split} split has {pool.shape[0]} samples of class {label}, "
                f"{per_class} requested"
            )
        chosen.append(np.sort(rng.choice(pool, size=per_class, replace=False)))
    return images.take(np.concatenate(chosen))


def subsample(
    train_set: ImageSet,
    test_set: ImageSet,
    classes: Sequence[int],
    per_class_train: int,
    per_class_test: int,
    seed: int,
) -> Tuple[ImageSet, ImageSet]:
    """Class-balanced draws from the train and test partitions respectively."""
    rng = np.random.default_rng(seed)
    train = _draw(train_set, classes, per_class_train, rng, "train")
    test = _draw(test_set, classes, per_class_test, rng, "test")
    return train, test


def _check_grid(shape: Tuple[int, int], grid: Tuple[int, int]):
    grid = tuple(grid)
    if grid not in SUPPORTED_GRIDS:
        raise ConfigError(f"unsupported patch grid {grid}", field="head_grids")
    if shape[0] % grid[0] or shape[1] % grid[1]:
        raise ConfigError(
            f"image of shape {shape} cannot be split into a {grid} grid",
            field="head_grids",
        )


def patchify_batch(images: np.ndarray, grid: Tuple[int, int]) -> np.ndarray:
    """(N, rows, cols) bytes -> (N, M, patch_dim) in [0, 1], patches row-major."""
    images = np.asarray(images)
    n, h, w = images.shape
    _check_grid((h, w), grid)
    r, c = grid
    blocks = images.reshape(n, r, h // r, c, w // c).transpose(0, 1, 3, 2, 4)
    return blocks.reshape(n, r * c, (h // r) * (w // c)).astype(float) / 255.0


def patchify(image: np.ndarray, grid: Tuple[int, int]) -> np.ndarray:
    return patchify_batch(np.asarray(image)[None], grid)[0]


def unpatchify(patches: np.ndarray, grid: Tuple[int, int], shape: Tuple[int, int]) -> np.ndarray:
    """Inverse of patchify (values stay in [0, 1])."""
    r, c = grid
    h, w = shape
    blocks = np.asarray(patches).reshape(r, c, h // r, w // c).transpose(0, 2, 1, 3)
    return blocks.reshape(h, w)


@dataclass(eq=False)
class PcaModel:
    """
    Per patch position: mean (M, d), components (M, n, d) with orthonormal
    rows, their variances, and the train-set min/max of every feature.
    """

    grid: Tuple[int, int]
    n_features: int
    means: np.ndarray = None
    components: np.ndarray = None
    variances: np.ndarray = None
    feature_min: np.ndarray = None
    feature_max: np.ndarray = None
    fitted: bool = False

    def project(self, patches: np.ndarray) -> np.ndarray:
        """(N, M, d) patches -> (N, M, n) raw PCA coordinates."""
        if not self.fitted:
            raise StateError("PCA model used before fit_pca")
        centered = np.asarray(patches, dtype=float) - self.means[None]
        return np.einsum("bmd,mnd->bmn", centered, self.components)

    def scale(self, projected: np.ndarray) -> np.ndarray:
        """Min-max map onto [0, pi] with train-set bounds, clamping outliers."""
        if not self.fitted:
            raise StateError("PCA model used before fit_pca")
        span = self.feature_max - self.feature_min
        safe = np.where(span > 0, span, 1.0)
        unit = np.where(span > 0, (projected - self.feature_min) / safe, 0.0)
        return np.clip(unit, 0.0, 1.0) * np.pi

    def transform(self, images: np.ndarray) -> np.ndarray:
        """(N, rows, cols) images -> (N, M, n) features in [0, pi]."""
        return self.scale(self.project(patchify_batch(images, self.grid)))


def _fit_position(x: np.ndarray, n_features: int, position: int):
    pca = PCA(n_components=n_features, svd_solver="full", whiten=False)
    pca.fit(x)
    variances = pca.explained_variance_
    rank = int(np.sum(variances > RANK_TOL * max(variances[0], RANK_TOL)))
    if rank < n_features:
        raise DataError(
            f"patch position {position} has rank {rank} < {n_features} features; "
            f"use at most {rank} qubits"
        )
    comps = pca.components_.copy()
    # deterministic sign: largest-magnitude entry of every component is positive
    pivots = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(n_features), pivots])
    comps *= signs[:, None]
    return pca.mean_, comps, variances.copy()


def fit_pca(patches: np.ndarray, n_features: int, grid: Tuple[int, int]) -> PcaModel:
    """
    Fit one PCA per patch position on train patches (N, M, d) and record the
    min/max of the projected train features.
    """
    patches = np.asarray(patches, dtype=float)
    if patches.ndim != 3:
        raise DataError(f"patches must be (N, M, d), got shape {patches.shape}")
    n_samples, n_positions, dim = patches.shape
    if n_samples < n_features:
        raise DataError(f"{n_samples} samples cannot support {n_features} PCA features")
    if dim < n_features:
        raise DataError(f"patches of {dim} values cannot give {n_features} features")
    means = np.zeros((n_positions, dim))
    components = np.zeros((n_positions, n_features, dim))
    variances = np.zeros((n_positions, n_features))
    for m in range(n_positions):
        means[m], components[m], variances[m] = _fit_position(patches[:, m], n_features, m)
    model = PcaModel(tuple(grid), n_features, means, components, variances, fitted=True)
    projected = model.project(patches)
    model.feature_min = projected.min(axis=0)
    model.feature_max = projected.max(axis=0)
    return model


@dataclass(frozen=True, eq=False)
class PreparedSample:
    """Per-head (M, n) feature arrays in [0, pi] and the class index."""

    features: Tuple[np.ndarray, ...]
    label: int


def fit_pipeline(train: ImageSet, grids: Sequence[Tuple[int, int]], n_features: int) -> List[PcaModel]:
    """One PcaModel per head grid, fitted on training images only."""
    return [fit_pca(patchify_batch(train.images, g), n_features, g) for g in grids]


def prepare(image: np.ndarray, pcas: Sequence[PcaModel], label: int) -> PreparedSample:
    feats = tuple(p.transform(np.asarray(image)[None])[0] for p in pcas)
    return PreparedSample(feats, int(label))


def prepare_set(images: ImageSet, pcas: Sequence[PcaModel], classes: Sequence[int]) -> List[PreparedSample]:
    """Prepare a whole split; labels become indices into ``classes``."""
    index = {int(c): i for i, c in enumerate(classes)}
    try:
        labels = [index[int(lab)] for lab in images.labels]
    except KeyError as e:
        raise DataError(f"label {e.args[0]} is not among classes {list(classes)}") from e
    per_head = [p.transform(images.images) for p in pcas]
    return [
        PreparedSample(tuple(head[i] for head in per_head), labels[i])
        for i in range(len(images))
    ]

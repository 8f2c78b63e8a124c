import numpy as np
import pytest
import pytest_asyncio

from qcsam.data import ImageSet, write_idx
from qcsam.model import QcsamModel
from results_orm import Base, ResultsStore
from utils.config import ExperimentConfig
from utils.helpers import IDX_FILENAMES


@pytest_asyncio.fixture(scope="function")
async def test_store():
    """Fixture to set up and tear down the in-memory results store for each test."""
    store = ResultsStore(database_url="sqlite+aiosqlite:///:memory:", for_testing=True)

    # Create tables before each test
    await store.initialize()

    yield store

    # Drop all tables after each test
    async with store.engine.begin() as conn:
        await conn.run_sync(Base.metadata.drop_all)
    await store.close()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_images(labels, seed: int = 0) -> ImageSet:
    """28x28 noise images with a class-dependent bright band, so classes are separable."""
    gen = np.random.default_rng(seed)
    labels = np.asarray(labels, dtype=np.uint8)
    images = gen.integers(0, 96, size=(labels.shape[0], 28, 28))
    for i, label in enumerate(labels):
        row = 2 + 2 * int(label)
        images[i, row:row + 4, :] += 150
    return ImageSet(np.clip(images, 0, 255).astype(np.uint8), labels)


@pytest.fixture
def synthetic_sets():
    """(train, test) ImageSets with 20 train and 8 test images per digit 0-3."""
    train = make_images(np.repeat(np.arange(4), 20), seed=1)
    test = make_images(np.repeat(np.arange(4), 8), seed=2)
    return train, test


@pytest.fixture
def idx_dir(tmp_path, synthetic_sets):
    """Directory laid out as <dir>/mnist/<standard IDX file names>."""
    train, test = synthetic_sets
    target = tmp_path / "data" / "mnist"
    target.mkdir(parents=True)
    write_idx(
        target / IDX_FILENAMES["train_images"],
        target / IDX_FILENAMES["train_labels"],
        train.images,
        train.labels,
    )
    write_idx(
        target / IDX_FILENAMES["test_images"],
        target / IDX_FILENAMES["test_labels"],
        test.images,
        test.labels,
    )
    return tmp_path / "data"


@pytest.fixture
def tiny_config(tmp_path, idx_dir):
    """Smallest realistic run: 3 qubits, 2 classes, one short epoch, one seed."""
    base = idx_dir / "mnist"
    return ExperimentConfig(
        name="tiny",
        classes=(0, 1),
        n_qubits=3,
        epochs=1,
        batch_size=4,
        seeds=(0,),
        per_class_train=6,
        per_class_test=3,
        train_images=str(base / IDX_FILENAMES["train_images"]),
        train_labels=str(base / IDX_FILENAMES["train_labels"]),
        test_images=str(base / IDX_FILENAMES["test_images"]),
        test_labels=str(base / IDX_FILENAMES["test_labels"]),
        output_dir=str(tmp_path / "out"),
    )


@pytest.fixture
def small_model():
    """Two qubits, two classes, one head over a 1x2 patch grid."""
    return QcsamModel(2, 2, ((1, 2),))


def random_sample(model: QcsamModel, gen: np.random.Generator):
    return [gen.uniform(0.0, np.pi, size=(h.n_patches, model.n_qubits)) for h in model.heads]

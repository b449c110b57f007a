"""数据集读写测试."""
import gzip
import struct

import numpy as np
import pytest

from core.exceptions import DatasetError
from models.dataset import Dataset
from models.experiment_config import DatasetConfig, DatasetName
from repositories import DatasetRepository
from utils.synthetic import gaussian_mixture_2d, two_moons


@pytest.fixture
def repo() -> DatasetRepository:
    return DatasetRepository.get_instance()


def write_idx(directory, images, labels, compress=False):
    """按 IDX 格式写出图像与标签文件."""
    opener = gzip.open if compress else open
    suffix = '.gz' if compress else ''
    image_path = directory / f'images-idx3-ubyte{suffix}'
    label_path = directory / f'labels-idx1-ubyte{suffix}'
    with opener(image_path, 'wb') as f:
        f.write(struct.pack('>IIII', 0x803, *images.shape))
        f.write(images.astype(np.uint8).tobytes())
    with opener(label_path, 'wb') as f:
        f.write(struct.pack('>II', 0x801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())
    return image_path, label_path


class TestCsv:

    def test_write_then_read(self, repo, moons, tmp_path):
        path = repo.write_dataset_csv(moons, tmp_path / 'moons.csv')
        assert path.read_text().splitlines()[0] == 'x0,x1,label'
        x, y = repo.read_csv(path)
        np.testing.assert_array_equal(x, moons.x)
        np.testing.assert_array_equal(y, moons.y)

    def test_lf_line_endings(self, repo, moons, tmp_path):
        path = repo.write_dataset_csv(moons, tmp_path / 'moons.csv')
        assert b'\r\n' not in path.read_bytes()

    @pytest.mark.parametrize('content', [
        'a,b,label\n1,2,0\n',
        'x0,x1,y\n1,2,0\n',
        'x0,x1,label\n1,2\n',
        'x0,x1,label\n1,2,0.5\n',
        'x0,x1,label\n1,two,0\n',
    ])
    def test_malformed(self, repo, tmp_path, content):
        path = tmp_path / 'bad.csv'
        path.write_text(content)
        with pytest.raises(DatasetError, match='bad.csv'):
            repo.read_csv(path)

    def test_missing_file(self, repo, tmp_path):
        with pytest.raises(DatasetError):
            repo.read_csv(tmp_path / 'nope.csv')

    def test_header_only(self, repo, tmp_path):
        path = tmp_path / 'empty.csv'
        path.write_text('x0,x1,x2,label\n')
        x, y = repo.read_csv(path)
        assert x.shape == (0, 3) and y.shape == (0,)


class TestIdx:

    @pytest.mark.parametrize('compress', [False, True])
    def test_read(self, repo, tmp_path, compress):
        images = np.arange(2 * 3 * 4).reshape(2, 3, 4)
        image_path, label_path = write_idx(
            tmp_path, images, [7, 1], compress
        )
        np.testing.assert_array_equal(repo.read_idx_images(image_path),
                                      images)
        np.testing.assert_array_equal(repo.read_idx_labels(label_path),
                                      [7, 1])

    def test_bad_magic(self, repo, tmp_path):
        image_path, label_path = write_idx(
            tmp_path, np.zeros((1, 2, 2)), [0] * 10
        )
        with pytest.raises(DatasetError, match='magic'):
            repo.read_idx_images(label_path)
        with pytest.raises(DatasetError, match='magic'):
            repo.read_idx_labels(image_path)

    def test_truncated(self, repo, tmp_path):
        image_path, _ = write_idx(tmp_path, np.zeros((3, 2, 2)), [0, 0, 0])
        image_path.write_bytes(image_path.read_bytes()[:-1])
        with pytest.raises(DatasetError, match='pixels'):
            repo.read_idx_images(image_path)

    def test_scale_pixels(self, repo):
        np.testing.assert_array_equal(
            repo.scale_pixels(np.array([0, 255], dtype=np.uint8)),
            [-1.0, 1.0],
        )

    def test_load_file_shapes(self, repo, tmp_path):
        image_path, label_path = write_idx(
            tmp_path, np.full((4, 3, 3), 255), [0, 1, 2, 1]
        )
        flat = repo.load_file(image_path, label_path)
        assert flat.x.shape == (4, 9) and flat.num_classes == 3
        images = repo.load_file(image_path, label_path, flatten=False)
        assert images.input_shape == (1, 3, 3)
        assert np.all(images.x == 1.0)

    def test_domain_bounds(self, repo, moons):
        pixels = Dataset(np.zeros((3, 4)), [0, 1, 0], 2)
        assert repo.domain_of(DatasetName.IDX, pixels) == (-1.0, 1.0)
        low, high = repo.domain_of(DatasetName.TWO_MOONS, moons)
        assert low == moons.x.min() and high == moons.x.max()
        assert repo.file_kind('a/train.CSV') == DatasetName.CSV
        assert repo.file_kind('a/train-images.gz') == DatasetName.IDX


class TestLoad:

    def test_synthetic_sizes(self, repo):
        train, evaluation = repo.load(
            DatasetConfig(n_train=50, n_eval=20), seed=1
        )
        assert len(train) == 50 and len(evaluation) == 20
        assert train.num_classes == 2

    def test_mixture(self, repo):
        train, _ = repo.load(
            DatasetConfig(name=DatasetName.GAUSSIAN_MIXTURE, components=3,
                          n_train=30, n_eval=6),
            seed=0,
        )
        assert train.num_classes == 3

    def test_csv_split_is_deterministic(self, repo, tmp_path):
        path = repo.write_dataset_csv(
            two_moons(100, seed=3), tmp_path / 'moons.csv'
        )
        cfg = DatasetConfig(name=DatasetName.CSV, path=str(path),
                            eval_fraction=0.25)
        first = repo.load(cfg, seed=4)
        second = repo.load(cfg, seed=4)
        assert len(first[0]) == 75 and len(first[1]) == 25
        np.testing.assert_array_equal(first[1].x, second[1].x)
        other = repo.load(cfg, seed=5)
        assert not np.array_equal(first[1].x, other[1].x)

    def test_max_samples(self, repo):
        train, evaluation = repo.load(
            DatasetConfig(n_train=50, n_eval=20, max_samples=10), seed=0
        )
        assert len(train) == 10 and len(evaluation) == 10

    def test_missing_path_is_reported(self, repo, tmp_path):
        cfg = DatasetConfig(name=DatasetName.IDX,
                            path=str(tmp_path / 'missing-images'))
        with pytest.raises(DatasetError, match='missing-images'):
            repo.load(cfg, seed=0)

    def test_label_count_mismatch(self, repo, tmp_path):
        image_path, _ = write_idx(tmp_path, np.zeros((3, 2, 2)), [0, 1, 0])
        other = tmp_path / 'other'
        other.mkdir()
        _, label_path = write_idx(other, np.zeros((1, 2, 2)), [0])
        cfg = DatasetConfig(name=DatasetName.IDX, path=str(image_path),
                            labels_path=str(label_path))
        with pytest.raises(DatasetError, match='labels'):
            repo.load(cfg, seed=0)


class TestSynthetic:

    def test_two_moons_reproducible(self):
        a, b = two_moons(40, seed=2), two_moons(40, seed=2)
        np.testing.assert_array_equal(a.x, b.x)
        assert set(a.y) == {0, 1}

    def test_mixture_classes(self):
        data = gaussian_mixture_2d(60, 4, seed=0)
        assert isinstance(data, Dataset)
        assert data.num_classes == 4
        assert data.x.shape == (60, 2)

import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stdpsim.errors import IdxParseError
from stdpsim.idx import IdxDataset, encode_images, encode_labels, load_idx, parse_images, parse_labels, write_idx


def fixture_images(pixels):
    """Independent writer: magic, n, rows, cols as big-endian u32, then raw bytes."""
    n = len(pixels)
    out = struct.pack(">IIII", 0x00000803, n, 28, 28)
    for img in pixels:
        out += bytes(img)
    return out


def fixture_labels(labels):
    return struct.pack(">II", 0x00000801, len(labels)) + bytes(labels)


PIX = [[(3 * i + 7 * k) % 256 for i in range(784)] for k in range(2)]


def test_two_image_fixture(tmp_path):
    (tmp_path / "i").write_bytes(fixture_images(PIX))
    (tmp_path / "l").write_bytes(fixture_labels([4, 9]))
    ds = load_idx(tmp_path / "i", tmp_path / "l")
    assert len(ds) == 2
    assert ds.images.shape == (2, 28, 28) and ds.images.dtype == np.uint8
    assert ds.images.reshape(2, -1).tolist() == PIX
    assert ds.labels.tolist() == [4, 9]


def test_gzip_files_accepted(tmp_path):
    (tmp_path / "i.gz").write_bytes(gzip.compress(fixture_images(PIX)))
    (tmp_path / "l.gz").write_bytes(gzip.compress(fixture_labels([4, 9])))
    assert len(load_idx(tmp_path / "i.gz", tmp_path / "l.gz")) == 2


def test_writer_matches_independent_fixture():
    imgs = np.array(PIX, dtype=np.uint8).reshape(2, 28, 28)
    assert encode_images(imgs) == fixture_images(PIX)
    assert encode_labels(np.array([4, 9])) == fixture_labels([4, 9])


def test_labels_magic_on_labels_path():
    with pytest.raises(IdxParseError, match="wrong magic") as ei:
        parse_labels(fixture_images(PIX))
    assert ei.value.offset == 0


def test_zero_images_accepted():
    assert parse_images(fixture_images([])).shape == (0, 28, 28)
    assert parse_labels(fixture_labels([])).shape == (0,)


def test_truncated_payload_names_offset():
    data = fixture_images(PIX)[:-10]
    with pytest.raises(IdxParseError, match="truncated") as ei:
        parse_images(data)
    assert ei.value.offset == len(data)


def test_count_mismatch(tmp_path):
    (tmp_path / "i").write_bytes(fixture_images(PIX))
    (tmp_path / "l").write_bytes(fixture_labels([4]))
    with pytest.raises(IdxParseError, match="count mismatch"):
        load_idx(tmp_path / "i", tmp_path / "l")


def test_label_out_of_range():
    with pytest.raises(IdxParseError):
        parse_labels(fixture_labels([1, 12]))


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    ds = IdxDataset(rng.integers(0, 256, (5, 28, 28), dtype=np.uint8), rng.integers(0, 10, 5).astype(np.uint8))
    write_idx(ds, tmp_path / "i", tmp_path / "l")
    back = load_idx(tmp_path / "i", tmp_path / "l")
    assert np.array_equal(back.images, ds.images) and np.array_equal(back.labels, ds.labels)


VALID_IMG = fixture_images(PIX)
VALID_LAB = fixture_labels([4, 9])


@settings(max_examples=200, deadline=None)
@given(pos=st.integers(0, 15), flip=st.integers(1, 255))
def test_header_mutations_rejected(pos, flip):
    data = bytearray(VALID_IMG)
    data[pos] ^= flip
    with pytest.raises(IdxParseError):
        parse_images(bytes(data))


@settings(max_examples=200, deadline=None)
@given(cut=st.integers(1, len(VALID_IMG)))
def test_truncations_rejected(cut):
    with pytest.raises(IdxParseError):
        parse_images(VALID_IMG[:-cut])


@settings(max_examples=100, deadline=None)
@given(pos=st.integers(0, 7), flip=st.integers(1, 255))
def test_label_header_mutations_rejected(pos, flip):
    data = bytearray(VALID_LAB)
    data[pos] ^= flip
    with pytest.raises(IdxParseError):
        parse_labels(bytes(data))


@pytest.mark.parametrize("cut", [1, 2, 5, 9])
def test_label_truncations_rejected(cut):
    with pytest.raises(IdxParseError):
        parse_labels(VALID_LAB[:-cut])


@settings(max_examples=50, deadline=None)
@given(extra=st.binary(min_size=1, max_size=20))
def test_trailing_bytes_rejected(extra):
    with pytest.raises(IdxParseError):
        parse_images(VALID_IMG + extra)

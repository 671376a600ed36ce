import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as nps

from artishape.cache import MAGIC, ArrayCache, CacheFormatError, decode_arrays, encode_arrays, make_key

dtypes = st.sampled_from([np.float64, np.int32, np.int64, np.uint8, np.bool_])


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.text(min_size=1, max_size=8),
                       dtypes.flatmap(lambda dt: nps.arrays(dt, nps.array_shapes(min_dims=0, max_dims=3))),
                       max_size=4))
def test_roundtrip(arrays):
    back = decode_arrays(encode_arrays(arrays))
    assert list(back) == list(arrays)
    for k, v in arrays.items():
        assert back[k].dtype == v.dtype and back[k].shape == v.shape
        np.testing.assert_array_equal(back[k], v)


def test_header_layout():
    data = encode_arrays({"a": np.arange(3, dtype="<f8")})
    assert data.startswith(MAGIC)
    assert data[len(MAGIC)] == 1
    assert data.endswith(np.arange(3, dtype="<f8").tobytes())


def test_bad_magic_and_version():
    data = encode_arrays({"a": np.zeros(2)})
    with pytest.raises(CacheFormatError):
        decode_arrays(b"NOTMAGIC" + data[8:])
    with pytest.raises(CacheFormatError):
        decode_arrays(data[:8] + bytes([99]) + data[9:])


def test_store_and_counters(tmp_path):
    cache = ArrayCache(tmp_path)
    key = make_key("features", "abc", 1e-8)
    assert cache.get("features", key) is None
    cache.put("features", key, {"D": np.eye(3)})
    got = cache.get("features", key)
    np.testing.assert_array_equal(got["D"], np.eye(3))
    assert cache.hits["features"] == 1 and cache.misses["features"] == 1
    assert [p.name for p in (tmp_path / "features").iterdir()] == [f"{key}.bin"]


def test_corrupt_entry_is_a_miss(tmp_path):
    cache = ArrayCache(tmp_path)
    cache.put("rpca", "k", {"S": np.ones(4)})
    (tmp_path / "rpca" / "k.bin").write_bytes(b"ARTSHAPE\x01garbage")
    assert cache.get("rpca", "k") is None


def test_disabled_cache_never_writes(tmp_path):
    cache = ArrayCache(None)
    cache.put("x", "k", {"a": np.ones(1)})
    assert cache.get("x", "k") is None
    assert cache.misses["x"] == 1


def test_keys():
    assert make_key("a", 1, 2.5) == make_key("a", 1, 2.5)
    assert make_key("a", 1, 2.5) != make_key("a", 1, 2.50000001)
    assert len(make_key("x")) == 64

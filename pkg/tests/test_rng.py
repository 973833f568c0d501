import hashlib

import numpy as np
import pytest

from linespec2d.rng import Stream, stream_key


def reference_uniforms(seed, trial, label, count):
    key = int.from_bytes(hashlib.sha256(f"{seed}/{trial}/{label}".encode()).digest()[:16], "little")
    bits = np.random.Philox(key=key).random_raw(count)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def reference_choose(us, population, k):
    perm = list(range(population))
    for i in range(k):
        j = i + int(np.floor(us[i] * (population - i)))
        perm[i], perm[j] = perm[j], perm[i]
    return perm[:k]


def test_key_is_documented_hash():
    digest = hashlib.sha256(b"7/3/signal").digest()
    assert stream_key(7, 3, "signal") == int.from_bytes(digest[:16], "little")
    assert stream_key(7, 3, "signal") != stream_key(7, 4, "signal")


def test_uniforms_match_raw_philox():
    np.testing.assert_array_equal(Stream(11, 2, "x").uniform(64), reference_uniforms(11, 2, "x", 64))


def test_box_muller_reference():
    u = reference_uniforms(5, 0, "n", 20).reshape(10, 2)
    ref = np.sqrt(-2.0 * np.log(1.0 - u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])
    np.testing.assert_allclose(Stream(5, 0, "n").normal(10), ref, rtol=1e-14)
    np.testing.assert_allclose(Stream(5, 0, "n").chi2_1(10), ref ** 2, rtol=1e-13)


def test_normal_moments():
    z = Stream(0, 0, "moments").normal(200_000)
    assert abs(z.mean()) < 0.01 and abs(z.var() - 1.0) < 0.01


def test_choose_matches_fisher_yates():
    us = reference_uniforms(3, 9, "samples/25", 25)
    got = Stream(3, 9, "samples/25").choose(49, 25)
    assert got.tolist() == reference_choose(us, 49, 25)
    assert len(set(got.tolist())) == 25


def test_choose_bounds():
    assert sorted(Stream(0, 0, "a").choose(6, 6).tolist()) == list(range(6))
    with pytest.raises(ValueError):
        Stream(0, 0, "a").choose(3, 4)

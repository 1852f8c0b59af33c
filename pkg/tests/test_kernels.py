"""Random streams of the compiled kernel against a pure-Python reference."""

import numpy as np
import pytest
from scipy import stats

from merws import _kernels

MASK = (1 << 64) - 1


def ref_mix64(x):
    z = (x + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def ref_xoshiro(seed, count):
    def rotl(x, k):
        return ((x << k) | (x >> (64 - k))) & MASK

    s = []
    x = seed
    for _ in range(4):
        s.append(ref_mix64(x))
        x = (x + 0x9E3779B97F4A7C15) & MASK
    out = []
    for _ in range(count):
        out.append((rotl((s[1] * 5) & MASK, 7) * 9) & MASK)
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
    return out


def test_splitmix_reference_vector():
    # published SplitMix64 outputs for seed 1234567
    expected = [6457827717110365317, 3203168211198807973, 9817491932198370423,
                4593380528125082431, 16408922859458223821]
    got = [ref_mix64((1234567 + k * 0x9E3779B97F4A7C15) & MASK) for k in range(5)]
    assert got == expected
    kern = [int(_kernels.mix64(np.uint64((1234567 + k * 0x9E3779B97F4A7C15) & MASK))) for k in range(5)]
    assert kern == expected


@pytest.mark.parametrize("seed", [0, 1, 42, 2**63 + 12345, MASK])
def test_stream_matches_reference(seed):
    ref = ref_xoshiro(seed, 64)
    doubles = _kernels.stream_doubles(np.uint64(seed), 64)
    assert np.array_equal(doubles, np.array([(v >> 11) * 2.0**-53 for v in ref]))


def test_derived_seeds_are_mix64_of_index():
    master = 987654321
    seeds = _kernels.derive_seeds(np.uint64(master), 100)
    assert [int(s) for s in seeds] == [ref_mix64(master ^ i) for i in range(100)]


def test_bounded_is_unbiased():
    n = 7
    draws = _kernels.stream_bounded(np.uint64(3), n, 700000)
    assert draws.min() == 0 and draws.max() == n - 1
    counts = np.bincount(draws, minlength=n)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_bounded_large_range_stays_in_range():
    n = 2**32 - 5
    draws = _kernels.stream_bounded(np.uint64(11), n, 100000)
    assert draws.min() >= 0 and draws.max() < n
    # uniform on [0, n): the scaled sample is uniform on [0, 1)
    assert stats.kstest(draws / n, "uniform").pvalue > 1e-3


@pytest.mark.parametrize("d", [1, 2, 3])
def test_memory_code_law(d):
    # the compiled collapsed rule, driven by exact quantiles of u
    p, r = 0.5, 0.1
    q = (1 - p - r) / (2 * d - 1)
    n_dir = 2 * d
    remembered = 2  # -e_0
    grid = (np.arange(200000) + 0.5) / 200000
    codes = np.array([_kernels.memory_code(remembered, u, n_dir, r, r + p, q) for u in grid])
    freq = np.bincount(codes, minlength=n_dir + 1) / grid.size
    expected = np.full(n_dir + 1, q)
    expected[0] = r
    expected[remembered] = p
    assert np.allclose(freq, expected, atol=1e-4)

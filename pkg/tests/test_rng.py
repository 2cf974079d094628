import numpy as np

from boundseg.rng import SplitMix64


class TestStream:
    def test_scalar_vector_equivalence(self):
        a = SplitMix64(12345)
        b = SplitMix64(12345)
        scalar = np.array([a.uniform() for _ in range(257)])
        vector = b.uniforms(257)
        np.testing.assert_array_equal(scalar, vector)

    def test_resumes_mid_stream(self):
        a = SplitMix64(7)
        first = a.uniforms(10)
        second = a.uniforms(10)
        b = SplitMix64(7)
        np.testing.assert_array_equal(np.concatenate([first, second]), b.uniforms(20))

    def test_deterministic_across_instances(self):
        assert SplitMix64(99).next_uint64() == SplitMix64(99).next_uint64()
        assert SplitMix64(1).next_uint64() != SplitMix64(2).next_uint64()

    def test_uniform_range(self):
        u = SplitMix64(3).uniforms(10000)
        assert u.min() >= 0.0
        assert u.max() < 1.0

    def test_uniform_mean(self):
        u = SplitMix64(4).uniforms(200000)
        assert abs(u.mean() - 0.5) < 0.005


class TestGaussians:
    def test_moments(self):
        g = SplitMix64(11).gaussians(200000)
        assert abs(g.mean()) < 0.01
        assert abs(g.std() - 1.0) < 0.01

    def test_deterministic(self):
        np.testing.assert_array_equal(
            SplitMix64(8).gaussians(101), SplitMix64(8).gaussians(101)
        )

    def test_odd_count(self):
        assert SplitMix64(8).gaussians(7).shape == (7,)


class TestShuffle:
    def test_permutation(self):
        order = SplitMix64(5).shuffled(100)
        assert sorted(order.tolist()) == list(range(100))

    def test_deterministic(self):
        np.testing.assert_array_equal(SplitMix64(5).shuffled(50), SplitMix64(5).shuffled(50))

    def test_varies_with_seed(self):
        assert not np.array_equal(SplitMix64(5).shuffled(50), SplitMix64(6).shuffled(50))

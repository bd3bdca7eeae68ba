import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from recolat.measures import Distribution, Metapopulation, TypeSpace, recombinator, tensor
from recolat.partitions import LabelledPartition, whole_labelled

import oracles

RNG = np.random.default_rng(20260815)


def random_dist(space, support, rng=RNG):
    w = rng.dirichlet(np.ones(space.dim(support)))
    return Distribution(space, support, w)


def random_metapop(space, locations, support=None, rng=RNG):
    sup = space.sites if support is None else support
    return Metapopulation(random_dist(space, sup, rng) for _ in range(locations))


class TestTypeSpace:
    def test_shape_and_dim(self):
        ts = TypeSpace((2, 3, 2))
        assert ts.num_sites == 3
        assert ts.shape((0, 2)) == (2, 2)
        assert ts.dim((0, 1, 2)) == 12
        assert ts.dim(()) == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            TypeSpace(())
        with pytest.raises(ValueError):
            TypeSpace((2, 0))


class TestDistributionConstruction:
    def test_mixed_radix_first_site_slowest(self):
        ts = TypeSpace((2, 2, 2))
        d = Distribution.point_mass(ts, (0, 1, 2), (1, 0, 1))
        assert d.weights[5] == 1.0  # 1*4 + 0*2 + 1
        ts2 = TypeSpace((2, 3))
        d2 = Distribution.point_mass(ts2, (0, 1), (1, 2))
        assert d2.weights[5] == 1.0  # 1*3 + 2

    def test_rejects_unnormalised(self):
        ts = TypeSpace((2,))
        with pytest.raises(ValueError, match="sum"):
            Distribution(ts, (0,), [0.5, 0.5 + 1e-9])
        # within tolerance is fine
        Distribution(ts, (0,), [0.5, 0.5 + 1e-13])

    def test_rejects_negative(self):
        ts = TypeSpace((2,))
        with pytest.raises(ValueError, match="negative"):
            Distribution(ts, (0,), [1.5, -0.5])

    def test_rejects_wrong_length(self):
        ts = TypeSpace((2, 2))
        with pytest.raises(ValueError, match="length"):
            Distribution(ts, (0, 1), [1.0, 0.0])

    def test_rejects_bad_support(self):
        ts = TypeSpace((2, 2))
        with pytest.raises(ValueError, match="ascending"):
            Distribution(ts, (1, 0), np.full(4, 0.25))
        with pytest.raises(ValueError, match="support"):
            Distribution(ts, (0, 5), np.full(4, 0.25))

    def test_weights_read_only(self):
        ts = TypeSpace((2,))
        d = Distribution(ts, (0,), [0.25, 0.75])
        with pytest.raises(ValueError):
            d.weights[0] = 0.0

    def test_scalar_one(self):
        ts = TypeSpace((2, 2))
        one = Distribution.scalar_one(ts)
        assert one.support == ()
        assert one.weights.tolist() == [1.0]


class TestMarginalise:
    @pytest.mark.parametrize("sizes", [(2, 2, 2), (2, 3, 2), (3, 2, 4)])
    def test_against_brute_force(self, sizes):
        ts = TypeSpace(sizes)
        d = random_dist(ts, ts.sites)
        for r in range(1, len(sizes) + 1):
            for keep in itertools.combinations(ts.sites, r):
                got = d.marginalise(keep)
                want = oracles.brute_marginal(d.weights, list(ts.sites), dict(enumerate(sizes)), list(keep))
                assert got.support == keep
                np.testing.assert_allclose(got.weights, want, atol=1e-14)

    def test_preserves_mass(self):
        ts = TypeSpace((2, 3, 2, 2))
        d = random_dist(ts, ts.sites)
        for keep in [(0,), (1, 3), (0, 1, 2, 3)]:
            assert abs(d.marginalise(keep).weights.sum() - 1.0) <= 1e-12

    def test_full_support_is_identity(self):
        ts = TypeSpace((2, 2))
        d = random_dist(ts, ts.sites)
        np.testing.assert_array_equal(d.marginalise(ts.sites).weights, d.weights)

    def test_tower_property(self):
        ts = TypeSpace((2, 2, 3, 2))
        d = random_dist(ts, ts.sites)
        via = d.marginalise((0, 2, 3)).marginalise((2,))
        direct = d.marginalise((2,))
        np.testing.assert_allclose(via.weights, direct.weights, atol=1e-14)

    def test_empty_keep_gives_scalar(self):
        ts = TypeSpace((2, 2))
        d = random_dist(ts, ts.sites)
        one = d.marginalise(())
        assert one.support == ()
        assert abs(one.weights[0] - 1.0) < 1e-12

    def test_outside_support_rejected(self):
        ts = TypeSpace((2, 2, 2))
        d = random_dist(ts, (0, 1))
        with pytest.raises(ValueError, match="not in support"):
            d.marginalise((2,))


class TestTensor:
    def test_against_brute_force(self):
        ts = TypeSpace((2, 3, 2, 2))
        a = random_dist(ts, (0, 2))
        b = random_dist(ts, (1,))
        c = random_dist(ts, (3,))
        got = tensor([a, b, c])
        want = oracles.brute_tensor(
            [(list(a.support), a.weights), (list(b.support), b.weights), (list(c.support), c.weights)],
            dict(enumerate(ts.alphabet_sizes)),
        )
        assert got.support == (0, 1, 2, 3)
        np.testing.assert_allclose(got.weights, want, atol=1e-14)

    def test_factor_order_irrelevant(self):
        ts = TypeSpace((2, 2, 3))
        a, b = random_dist(ts, (1,)), random_dist(ts, (0, 2))
        np.testing.assert_allclose(tensor([a, b]).weights, tensor([b, a]).weights)

    def test_scalar_one_neutral(self):
        ts = TypeSpace((2, 2))
        d = random_dist(ts, ts.sites)
        got = tensor([Distribution.scalar_one(ts), d])
        np.testing.assert_allclose(got.weights, d.weights)

    def test_marginal_onto_factor_recovers_it(self):
        ts = TypeSpace((2, 3, 2))
        a, b = random_dist(ts, (0, 2)), random_dist(ts, (1,))
        prod = tensor([a, b])
        np.testing.assert_allclose(prod.marginalise((0, 2)).weights, a.weights, atol=1e-14)
        np.testing.assert_allclose(prod.marginalise((1,)).weights, b.weights, atol=1e-14)

    def test_product_marginalisation_splits(self):
        # marginal of a product = product of the factor marginals
        ts = TypeSpace((2, 2, 3, 2, 2))
        a, b = random_dist(ts, (0, 2, 4)), random_dist(ts, (1, 3))
        for w in [(0, 1), (2, 3, 4), (0,), (1, 2)]:
            lhs = tensor([a, b]).marginalise(w)
            ua = tuple(s for s in a.support if s in w)
            ub = tuple(s for s in b.support if s in w)
            rhs = tensor([a.marginalise(ua), b.marginalise(ub)])
            np.testing.assert_allclose(lhs.weights, rhs.weights, atol=1e-14)

    def test_overlap_rejected(self):
        ts = TypeSpace((2, 2))
        a, b = random_dist(ts, (0, 1)), random_dist(ts, (1,))
        with pytest.raises(ValueError, match="overlap"):
            tensor([a, b])


class TestMetapopulation:
    def test_support_consistency(self):
        ts = TypeSpace((2, 2))
        with pytest.raises(ValueError, match="support"):
            Metapopulation([random_dist(ts, (0, 1)), random_dist(ts, (0,))])

    def test_stack_round_trip(self):
        ts = TypeSpace((2, 2))
        mu = random_metapop(ts, 3)
        again = Metapopulation.from_stack(ts, mu.support, mu.stack())
        for a in range(3):
            np.testing.assert_array_equal(again[a].weights, mu[a].weights)


class TestRecombinator:
    def brute(self, bdelta, mu):
        ts = mu.space
        sizes = dict(enumerate(ts.alphabet_sizes))
        base = bdelta.base_set
        out = np.zeros(ts.dim(base))
        for letters in itertools.product(*(range(sizes[s]) for s in base)):
            by_site = dict(zip(base, letters))
            val = 1.0
            for block, label in bdelta.items:
                marg = oracles.brute_marginal(
                    mu[label].weights, list(mu.support), sizes, list(block)
                )
                sub = tuple(by_site[s] for s in block)
                val *= marg[oracles.brute_index(sub, [sizes[s] for s in block])]
            out[oracles.brute_index(letters, [sizes[s] for s in base])] = val
        return out

    def test_against_brute_force(self):
        ts = TypeSpace((2, 2, 3))
        mu = random_metapop(ts, 2)
        cases = [
            LabelledPartition([((0, 1, 2), 0)]),
            LabelledPartition([((0, 2), 1), ((1,), 0)]),
            LabelledPartition([((0,), 0), ((1,), 1), ((2,), 0)]),
            LabelledPartition([((1, 2), 1)]),
        ]
        for bdelta in cases:
            got = recombinator(bdelta, mu)
            assert got.support == bdelta.base_set
            np.testing.assert_allclose(got.weights, self.brute(bdelta, mu), atol=1e-14)

    def test_single_whole_block_is_marginal(self):
        ts = TypeSpace((2, 2))
        mu = random_metapop(ts, 3)
        got = recombinator(whole_labelled((0, 1), 2), mu)
        np.testing.assert_array_equal(got.weights, mu[2].weights)

    def test_normalised(self):
        ts = TypeSpace((2, 2, 2, 2))
        mu = random_metapop(ts, 2)
        bdelta = LabelledPartition([((0, 3), 0), ((1,), 1), ((2,), 1)])
        assert abs(recombinator(bdelta, mu).weights.sum() - 1.0) <= 1e-12

    def test_blockwise_product_rule(self):
        # gluing labelled partitions of disjoint site sets multiplies their outputs
        ts = TypeSpace((2, 2, 2))
        mu = random_metapop(ts, 2)
        left = LabelledPartition([((0,), 1), ((1,), 0)])
        right = LabelledPartition([((2,), 1)])
        glued = LabelledPartition(list(left.items) + list(right.items))
        lhs = recombinator(glued, mu)
        rhs = tensor([recombinator(left, mu), recombinator(right, mu)])
        np.testing.assert_allclose(lhs.weights, rhs.weights, atol=1e-14)

    def test_label_out_of_range(self):
        ts = TypeSpace((2, 2))
        mu = random_metapop(ts, 2)
        with pytest.raises(ValueError, match="location"):
            recombinator(whole_labelled((0, 1), 5), mu)


@given(st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=8, max_size=8))
def test_marginal_mass_preserved_random(ws):
    ts = TypeSpace((2, 2, 2))
    w = np.array(ws)
    d = Distribution(ts, ts.sites, w / w.sum())
    for keep in [(0,), (0, 2), (1,)]:
        assert abs(d.marginalise(keep).weights.sum() - 1.0) <= 1e-12

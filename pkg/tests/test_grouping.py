import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from wxclear.errors import DimensionError, PartitionError, SelectorError
from wxclear.grouping import MaskGenerator, gather, partition, scatter, select_partner

from util import brute_force_partners, naive_conv2d_reflect


def test_mask_generator_shape_and_zero():
    gen = MaskGenerator(6)
    x = torch.randn(2, 6, 10, 12)
    assert gen(x).shape == (2, 1, 10, 12)
    assert torch.equal(gen(torch.zeros(1, 6, 8, 8)), torch.zeros(1, 1, 8, 8))


def test_mask_generator_matches_dense_oracle():
    rng = np.random.default_rng(0)
    gen = MaskGenerator(3)
    with torch.no_grad():
        gen.conv.weight.copy_(torch.tensor(rng.normal(size=(1, 3, 7, 7)), dtype=torch.float32))
    gen = gen.double()
    x = rng.normal(size=(3, 9, 11))
    with torch.no_grad():
        got = gen(torch.tensor(x).unsqueeze(0))[0].numpy()
    expected = naive_conv2d_reflect(x, gen.conv.weight.detach().numpy())
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)


def test_partition_sorts_by_mask_value():
    mask = torch.tensor([0.1, 0.9, 0.4, 0.6])  # 2x2 raster order
    part = partition(mask, 2)
    assert part.order.tolist() == [0, 2, 3, 1]
    assert part.group_count == 2 and part.group_size == 2


def test_partition_ties_keep_raster_order():
    part = partition(torch.zeros(8), 4)
    assert part.order.tolist() == list(range(8))


def test_partition_single_group_is_argsort():
    mask = torch.tensor([3.0, 1.0, 2.0, 0.0])
    part = partition(mask, 1)
    assert part.order.tolist() == [3, 1, 2, 0]


def test_partition_divisibility_error():
    with pytest.raises(PartitionError):
        partition(torch.zeros(10), 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.sampled_from([1, 2, 4]))
def test_partition_properties(seed, g):
    rng = np.random.default_rng(seed)
    n = 16
    # mix of continuous and heavily tied masks
    vals = rng.choice([0.0, 0.5, 1.0], size=n) if seed % 3 == 0 else rng.uniform(size=n)
    mask = torch.tensor(vals)
    part = partition(mask, g)
    order = part.order.tolist()
    assert sorted(order) == list(range(n))  # bijection
    sorted_vals = mask[part.order]
    assert (sorted_vals[1:] >= sorted_vals[:-1]).all()  # non-decreasing along order
    # group monotonicity: max of group m <= min of group m+1
    chunks = sorted_vals.reshape(g, n // g)
    for m in range(g - 1):
        assert chunks[m].max() <= chunks[m + 1].min()


def test_gather_scatter_round_trip():
    rng = np.random.default_rng(1)
    tokens = torch.tensor(rng.normal(size=(12, 5)))
    part = partition(torch.tensor(rng.uniform(size=12)), 3)
    groups = gather(tokens, part)
    assert groups.shape == (3, 4, 5)
    assert torch.equal(scatter(groups, part), tokens)


def test_gather_single_group_is_permutation():
    rng = np.random.default_rng(2)
    tokens = torch.tensor(rng.normal(size=(6, 3)))
    mask = torch.tensor(rng.uniform(size=6))
    part = partition(mask, 1)
    groups = gather(tokens, part)
    expected = tokens[part.order]
    assert torch.equal(groups[0], expected)


def test_scatter_matches_index_loop_oracle():
    rng = np.random.default_rng(3)
    tokens = rng.normal(size=(8, 4))
    mask = rng.uniform(size=8)
    part = partition(torch.tensor(mask), 2)
    groups = torch.tensor(rng.normal(size=(2, 4, 4)))
    got = scatter(groups, part).numpy()
    expected = np.zeros_like(got)
    flat = groups.reshape(8, 4).numpy()
    for i, tok in enumerate(part.order.tolist()):
        expected[tok] = flat[i]
    np.testing.assert_array_equal(got, expected)
    assert torch.equal(scatter(torch.zeros(2, 4, 4), part), torch.zeros(8, 4))


def test_gather_batched():
    rng = np.random.default_rng(4)
    tokens = torch.tensor(rng.normal(size=(2, 6, 3)))
    mask = torch.tensor(rng.uniform(size=(2, 6)))
    part = partition(mask, 2)
    groups = gather(tokens, part)
    assert groups.shape == (2, 2, 3, 3)
    assert torch.equal(scatter(groups, part), tokens)
    for b in range(2):
        single = gather(tokens[b], partition(mask[b], 2))
        assert torch.equal(groups[b], single)


def test_gather_size_mismatch():
    part = partition(torch.zeros(8), 2)
    with pytest.raises(DimensionError):
        gather(torch.zeros(6, 3), part)
    with pytest.raises(DimensionError):
        scatter(torch.zeros(3, 4, 2), part)


def test_select_partner_two_groups_forced():
    v = torch.randn(2, 3, 4)
    assert select_partner(v).tolist() == [1, 0]


def test_select_partner_tie_breaks_to_lowest_index():
    r = torch.tensor([[1.0, 0.0], [0.0, 1.0], [2.0**-0.5, 2.0**-0.5]])
    v = r.unsqueeze(1)  # one token per group, representative = the row itself
    assert select_partner(v).tolist() == [2, 2, 0]


def test_select_partner_scale_invariance():
    rng = np.random.default_rng(5)
    v = torch.tensor(rng.normal(size=(4, 3, 6)))
    base = select_partner(v)
    for c in (0.01, 3.0, 250.0):
        assert torch.equal(select_partner(c * v), base)


def test_select_partner_matches_brute_force():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        g = int(rng.integers(2, 7))
        v = rng.normal(size=(g, 5, 8))
        got = select_partner(torch.tensor(v)).numpy()
        expected = brute_force_partners(v)
        np.testing.assert_array_equal(got, expected)
        assert not np.any(got == np.arange(g))  # never self


def test_select_partner_zero_norm_representative():
    v = torch.zeros(3, 2, 4)
    v[1, :, 0] = 1.0
    v[2, :, 1] = 1.0
    # group 0 has a zero representative: similarity 0 to everyone, pick lowest index != 0
    assert select_partner(v).tolist()[0] == 1


def test_select_partner_needs_two_groups():
    with pytest.raises(SelectorError):
        select_partner(torch.randn(1, 4, 4))


def test_partition_and_partner_determinism():
    rng = np.random.default_rng(6)
    mask = torch.tensor(rng.uniform(size=16))
    v = torch.tensor(rng.normal(size=(4, 4, 8)))
    p1, p2 = partition(mask, 4), partition(mask, 4)
    assert torch.equal(p1.order, p2.order)
    assert torch.equal(select_partner(v), select_partner(v))

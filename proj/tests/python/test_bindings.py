import random

import pytest

import ariann


def open_bits(y0, y1, out_bits):
    mask = (1 << out_bits) - 1
    return [(a + b) & mask for a, b in zip(y0, y1)]


@pytest.mark.parametrize("n_bits,out_bits", [(8, 8), (8, 64), (32, 32)])
def test_comparison_keys_open_to_indicator(n_bits, out_bits):
    rnd = random.Random(n_bits * 100 + out_bits)
    for alpha in [0, 1, (1 << n_bits) - 1, rnd.getrandbits(n_bits)]:
        xs = [alpha, (alpha + 1) % (1 << n_bits), (alpha - 1) % (1 << n_bits)]
        xs += [rnd.getrandbits(n_bits) for _ in range(50)]
        y0, y1 = ariann.eval_cmp_pair(n_bits, out_bits, alpha, xs, seed=alpha + 7)
        assert open_bits(y0, y1, out_bits) == [int(x <= alpha) for x in xs]
        e0, e1 = ariann.eval_eq_pair(n_bits, out_bits, alpha, xs, seed=alpha + 9)
        assert open_bits(e0, e1, out_bits) == [int(x == alpha) for x in xs]


def test_single_party_view_is_not_the_indicator():
    xs = list(range(256))
    y0, _ = ariann.eval_cmp_pair(8, 64, 100, xs, seed=3)
    assert y0 != [int(x <= 100) for x in xs]


def test_bad_alpha_rejected():
    with pytest.raises(ValueError):
        ariann.eval_cmp_pair(8, 8, 256, [0])


def test_key_sizes():
    assert ariann.cmp_key_bytes(32, 32) == 824
    assert ariann.cmp_key_bytes(32, 64) == 1084
    assert ariann.eq_key_bytes(32, 64) == 572
    assert ariann.cmp_key_bytes(16, 64) < ariann.cmp_key_bytes(32, 64)


def test_share_round_trip():
    values = [0.0, 1.5, -2.25, 1234.567, -0.001]
    s0, s1 = ariann.share(values, precision=3, seed=11)
    assert s0 != [round(v * 1000) % (1 << 64) for v in values]
    assert ariann.reconstruct(s0, s1, precision=3) == pytest.approx(values, abs=1e-3)
    with pytest.raises(ValueError):
        ariann.reconstruct(s0, s1[:-1])


@pytest.mark.parametrize("op", ["compare", "relu", "argmax", "maxpool", "maxpool-k2", "matmul", "conv"])
def test_bench_matches_oracle_and_round_count(op):
    assert op in ariann.op_names()
    r = ariann.bench(op, 4, seed=2)
    assert r["op"] == op
    assert r["mismatches"] == 0
    assert r["rounds"] == r["expected_rounds"] == ariann.expected_rounds(op)


def test_bench_bundles_agree_with_stream():
    a = ariann.bench("relu", 8, seed=4)
    b = ariann.bench("relu", 8, seed=4, bundles=True)
    assert (a["rounds"], a["bytes"], a["mismatches"]) == (b["rounds"], b["bytes"], b["mismatches"])


def test_compare_exhaustive_small():
    r = ariann.compare_exhaustive(4)
    assert r["cases"] == 256
    assert r["mismatches"] == 0


def test_train_zero_epochs_is_chance_and_model_stays_hidden():
    r = ariann.train("xor", epochs=0)
    assert r["private_accuracy"] == pytest.approx(0.5, abs=0.05)
    assert r["model_opened_during_training"] is False


def test_infer_agrees_with_plaintext():
    r = ariann.infer("moons", samples=200)
    assert r["agreement"] >= 0.99


def test_precision_sweep_records():
    rs = ariann.precision_sweep([16, 32], [3])
    assert [r["fss_bits"] for r in rs] == [16, 32]
    assert rs[1]["agreement"] >= rs[0]["agreement"]


def test_fl_masks_and_round():
    sweep = ariann.fl_mask_sweep(4)
    assert sweep["mask_failures"] == 0 and sweep["aggregate_failures"] == 0
    rs = ariann.fl_demo(clients=2, k=1, rounds=1)
    assert rs[-1]["op"] == "fl_demo"
    assert rs[-1]["model_opened_during_rounds"] is False

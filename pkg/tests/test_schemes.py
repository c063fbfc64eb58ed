import math

import numpy as np
import pytest
from conftest import quad_moments, safe_pdf
from scipy import stats

from mtbged_rss import model
from mtbged_rss.concomitants import ConcomitantLaw
from mtbged_rss.model import ModelParams
from mtbged_rss.schemes import (
    KINDS,
    RankedSample,
    SchemeSpec,
    draw,
    draw_batch,
    draw_direct,
    draw_direct_batch,
)

P = ModelParams(1.0, 2.0, 1.0, 1.0, 0.8)

SPECS = [
    SchemeSpec.rss(4),
    SchemeSpec.crss(5, [1, 3, 4]),
    SchemeSpec.lrss(6, k=2),
    SchemeSpec.erss1(4),
    SchemeSpec.erss2(5),
    SchemeSpec.erss3(5),
    SchemeSpec.merss(3),
    SchemeSpec.urss(3),
    SchemeSpec.msrss(2, 3),
    SchemeSpec.ussrss(4),
]


@pytest.mark.parametrize(
    "build",
    [
        lambda: SchemeSpec("srs", 3),
        lambda: SchemeSpec.rss(1),
        lambda: SchemeSpec.rss(2.5),
        lambda: SchemeSpec.crss(4, [2, 2]),
        lambda: SchemeSpec.crss(4, [3, 1]),
        lambda: SchemeSpec.crss(4, [0, 2]),
        lambda: SchemeSpec.crss(4, [2, 5]),
        lambda: SchemeSpec.crss(4, []),
        lambda: SchemeSpec.lrss(6, k=3),
        lambda: SchemeSpec.lrss(6, gamma=0.5),
        lambda: SchemeSpec.lrss(6, k=-1),
        lambda: SchemeSpec.erss1(5),
        lambda: SchemeSpec.erss2(4),
        lambda: SchemeSpec.erss3(6),
        lambda: SchemeSpec.msrss(3, 0),
        lambda: SchemeSpec("rss", 3, k=1),
        lambda: SchemeSpec("rss", 3, retained=(1,)),
        lambda: SchemeSpec("rss", 3, l=2),
    ],
)
def test_invalid_specs_rejected(build):
    with pytest.raises(ValueError):
        build()


def test_parity_message_names_the_rule():
    with pytest.raises(ValueError, match="odd"):
        SchemeSpec.erss2(4)
    with pytest.raises(ValueError, match="even"):
        SchemeSpec.erss1(3)


def test_lrss_coefficient_from_gamma():
    assert SchemeSpec.lrss(10, gamma=0.25).k == 2
    assert SchemeSpec.lrss(7, gamma=0.0).k == 0
    assert SchemeSpec.lrss(7, gamma=0.49).k == 3


def test_layouts():
    assert SchemeSpec.rss(3).layout() == [(1, 1), (2, 2), (3, 3)]
    assert SchemeSpec.crss(3, [2, 3]).layout() == [(2, 2), (3, 3)]
    assert SchemeSpec.lrss(5, k=0).layout() == SchemeSpec.rss(5).layout()
    assert [r for _, r in SchemeSpec.lrss(5, k=2).layout()] == [3, 3, 3, 3, 3]
    assert [r for _, r in SchemeSpec.lrss(7, k=2).layout()] == [3, 3, 3, 4, 5, 5, 5]
    assert [r for _, r in SchemeSpec.erss1(4).layout()] == [1, 4, 1, 4]
    assert SchemeSpec.erss2(5).layout() == [(1, 1), (2, 5), (3, 1), (4, 5), (5, 1), (5, 5)]
    assert [r for _, r in SchemeSpec.erss3(5).layout()] == [1, 5, 1, 5, 3]
    assert [r for _, r in SchemeSpec.merss(3).layout()] == [1, 1, 1, 3, 3, 3]
    assert [r for _, r in SchemeSpec.msrss(3, 2).layout()] == [3, 3, 3]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_budgets(spec):
    n = spec.n
    expected_obs = {"merss": 2 * n, "erss2": n + 1, "crss": len(spec.retained or ())}.get(spec.kind, n)
    assert spec.n_observations == expected_obs
    raw = {"merss": 2 * n * n, "ussrss": None}
    if spec.kind in ("urss", "msrss"):
        assert spec.raw_units() == n ** (spec.stages + 1)
    elif spec.kind == "crss":
        assert spec.raw_units() == len(spec.retained) * n
    else:
        assert spec.raw_units() == raw.get(spec.kind, n * n)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_dict_round_trip(spec):
    assert SchemeSpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize("spec", [s for s in SPECS if s.kind != "ussrss"], ids=lambda s: s.kind)
def test_protocol_invariant(spec, rng):
    for _ in range(5):
        sample = draw(spec, P, rng, keep_sets=True)
        sample.check_layout()
        for i, (s, r) in enumerate(spec.layout()):
            xs, ys = sample.raw_sets[s]
            order = np.argsort(xs)
            j = order[r - 1] if spec.kind not in ("urss", "msrss") else int(np.argmax(xs))
            assert sample.x[i] == xs[j]
            assert sample.y[i] == ys[j]
            assert len(xs) == (spec.n ** spec.stages if spec.kind in ("urss", "msrss") else spec.n)


def test_sets_use_their_own_spawned_streams():
    spec = SchemeSpec.rss(3)
    sample = draw(spec, P, np.random.default_rng(99), keep_sets=True)
    children = np.random.default_rng(99).spawn(3)
    for s, child in zip((1, 2, 3), children):
        u, v = model.copula_uniforms(P.lam, child, (1, 3))
        assert np.array_equal(sample.raw_sets[s][0], model.marginal_quantile(1.0, 1.0, u[0]))
        assert np.array_equal(sample.raw_sets[s][1], model.marginal_quantile(2.0, 1.0, v[0]))


def test_literal_staging_selects_the_overall_maximum(rng):
    spec = SchemeSpec.msrss(3, 3)
    for _ in range(5):
        sample = draw(spec, P, rng, keep_sets=True, literal_stages=True)
        for i, s in enumerate(range(1, 4)):
            xs, ys = sample.raw_sets[s]
            assert sample.x[i] == xs.max()
            assert sample.y[i] == ys[np.argmax(xs)]


def test_literal_staging_matches_one_step_selection():
    spec = SchemeSpec.msrss(2, 3)
    a = draw_batch(spec, P, np.random.default_rng(5), 20_000, literal_stages=True)
    b = draw_batch(spec, P, np.random.default_rng(5), 20_000)
    # maximum selection is unique, so both paths pick the same unit
    assert np.array_equal(a.y, b.y)


def test_literal_staging_size_limit():
    with pytest.raises(ValueError, match="literal staging"):
        draw(SchemeSpec.msrss(10, 5), P, np.random.default_rng(0), literal_stages=True)


@pytest.mark.parametrize("kind", ["urss", "ussrss"])
@pytest.mark.parametrize("lam", [0.0, -0.5])
def test_unbalanced_require_positive_lambda(kind, lam):
    spec = SchemeSpec(kind, 3)
    p = ModelParams(1.0, 1.0, 1.0, 1.0, lam)
    with pytest.raises(ValueError, match="λ must be positive for unbalanced schemes"):
        draw(spec, p, np.random.default_rng(0))
    with pytest.raises(ValueError, match="λ must be positive"):
        draw_direct(spec, p, np.random.default_rng(0))


def test_direct_sampler_rejects_erss2():
    with pytest.raises(ValueError, match="erss2"):
        draw_direct(SchemeSpec.erss2(3), P, np.random.default_rng(0))


def test_rank_one_mean_example():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 1.0)
    batch = draw_batch(SchemeSpec.rss(2), p, np.random.default_rng(11), 100_000)
    y = batch.y[:, 0]
    se = y.std(ddof=1) / math.sqrt(len(y))
    assert abs(y.mean() - 5 / 6) <= 4 * se


def test_ussrss_direct_moments():
    p = ModelParams(1.0, 2.0, 1.0, 1.0, 0.8)
    batch = draw_direct_batch(SchemeSpec.ussrss(3), p, np.random.default_rng(3), 100_000)
    law = ConcomitantLaw.steady_state(2.0, 1.0, 0.8)
    _, mean, var = quad_moments(safe_pdf(law.pdf), 2.0, 1.0)
    y = batch.y.ravel()
    assert abs(y.mean() - mean) <= 4 * math.sqrt(var / len(y))
    assert y.var(ddof=1) == pytest.approx(var, rel=0.02)


def test_independence_reduces_to_marginal():
    p = ModelParams(1.0, 0.8, 1.0, 2.0, 0.0)
    spec = SchemeSpec.rss(4)
    phys = draw_batch(spec, p, np.random.default_rng(1), 25_000).y.ravel()
    direct = draw_direct_batch(spec, p, np.random.default_rng(2), 25_000).y.ravel()
    for y in (phys, direct):
        res = stats.kstest(y, lambda t: model.marginal_cdf(0.8, 2.0, t))
        assert res.statistic < 1.628 / math.sqrt(len(y))


@pytest.mark.parametrize("spec", [s for s in SPECS if s.kind != "erss2"], ids=lambda s: s.kind)
def test_direct_output_shape(spec, rng):
    sample = draw_direct(spec, P, rng)
    sample.check_layout()
    assert sample.x is None
    assert np.all(sample.y > 0)


def test_draw_is_deterministic():
    spec = SchemeSpec.merss(4)
    a = draw(spec, P, np.random.default_rng(123))
    b = draw(spec, P, np.random.default_rng(123))
    assert np.array_equal(a.y, b.y) and np.array_equal(a.x, b.x)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_csv_and_json_round_trip(spec, rng):
    sample = draw(spec, P, rng)
    back = RankedSample.from_csv(sample.to_csv(), spec)
    assert np.array_equal(back.y, sample.y)
    assert np.array_equal(back.rank_label, sample.rank_label)
    assert np.array_equal(back.set_index, sample.set_index)
    again = RankedSample.from_json(sample.to_json())
    assert again.scheme == spec
    assert np.array_equal(again.y, sample.y)


def test_csv_schema_errors():
    spec = SchemeSpec.crss(3, [2, 3])
    with pytest.raises(ValueError, match="rank_label"):
        RankedSample.from_csv("set_index,y\n2,1.0\n3,1.0\n", spec)
    with pytest.raises(ValueError, match="unknown column"):
        RankedSample.from_csv("set_index,rank_label,y,z\n2,2,1.0,0\n", spec)
    with pytest.raises(ValueError, match="malformed"):
        RankedSample.from_csv("set_index,rank_label,y\n2,2,abc\n", spec)
    with pytest.raises(ValueError, match="no observations"):
        RankedSample.from_csv("set_index,rank_label,y\n", spec)


def test_layout_mismatch_detected():
    sample = RankedSample(SchemeSpec.rss(3), [1.0, 2.0, 3.0], [1, 3, 2], [1, 2, 3])
    with pytest.raises(ValueError, match="layout"):
        sample.check_layout()


def test_kinds_are_all_covered():
    assert {s.kind for s in SPECS} == set(KINDS)

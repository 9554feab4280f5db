"""Factor groups on synthetic universes: a planted signal must sort the groups, no signal must not."""

import collections
import itertools

import pytest

from sentibench.config import load_config
from sentibench.fixtures import gen_fixture
from sentibench.runners.runner import RunContext, StageResult, backtest, build_factor, groups, load_market

SEEDS = range(100)


def _final_levels(seed, rho, root):
    out = root / f"seed{seed}"
    gen_fixture(seed, 50, 120, rho, out)
    cfg = load_config(out / "config.yaml")
    cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"plots": False, "html": False})})
    ctx = RunContext(cfg, out)
    for stage in (load_market, build_factor, backtest, groups):
        stage(ctx, StageResult(stage.__name__))
    assert ctx.curves.active_days > 100
    return ctx.curves.final()


@pytest.mark.slow
@pytest.mark.parametrize("rho", [0.5, 0.8])
def test_planted_signal_orders_groups(rho, tmp_path_factory):
    root = tmp_path_factory.mktemp(f"planted{rho}")
    ordered = 0
    for seed in SEEDS:
        g1, g2, g3 = _final_levels(seed, rho, root)
        ordered += g3 > g2 > g1
    assert ordered >= 95


@pytest.mark.slow
def test_no_signal_gives_uniform_orderings(tmp_path_factory):
    root = tmp_path_factory.mktemp("null")
    counts = collections.Counter()
    for seed in SEEDS:
        levels = _final_levels(seed, 0.0, root)
        counts[tuple(sorted(range(3), key=lambda g: levels[g]))] += 1
    # 100 draws over 6 orderings: mean 16.67, sd 3.73
    for order in itertools.permutations(range(3)):
        assert 5 <= counts[order] <= 28, dict(counts)

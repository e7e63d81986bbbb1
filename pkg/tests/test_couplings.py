
import pytest

from migrasim.core import RngSeed, ValidationError, derive_params
from migrasim.couplings import (CouplingViolationError,
                                coupled_alpha_monotonicity,
                                coupled_beta_monotonicity,
                                coupled_p_monotonicity, three_color_run,
                                write_violation_trace)


def params(lam=1.0, mu=1.0, alpha=1.0, beta=1.0, p=0.5):
    return derive_params(lam=lam, mu=mu, alpha=alpha, beta=beta, p=p)


def test_p_monotonicity_dominates_pathwise():
    tr = coupled_p_monotonicity(0.3, 0.7, params(), 4000, RngSeed(1))
    assert tr.violations == 0
    assert tr.n_cycles == 4000
    assert tr.d_i_low <= tr.d_i_high
    assert tr.strict_events > 0
    assert 0.0 < tr.strict_fraction <= 1.0


def test_p_monotonicity_equal_p_is_identical():
    tr = coupled_p_monotonicity(0.5, 0.5, params(), 2000, RngSeed(2))
    assert tr.violations == 0
    assert tr.d_i_low == tr.d_i_high
    assert tr.strict_events == 0


def test_alpha_monotonicity_open_and_closed():
    tr = coupled_alpha_monotonicity(0.5, 2.0, params(), 5000, RngSeed(3))
    assert tr.violations == 0 and tr.strict_events > 0
    trc = coupled_alpha_monotonicity(0.5, 2.0, params(), 5000, RngSeed(4),
                                     closed=True, N=8, K=12)
    assert trc.violations == 0 and trc.strict_events > 0


def test_beta_monotonicity_open_and_closed():
    tr = coupled_beta_monotonicity(2.0, 0.5, params(), 5000, RngSeed(5))
    assert tr.violations == 0 and tr.strict_events > 0
    trc = coupled_beta_monotonicity(2.0, 0.5, params(), 5000, RngSeed(6),
                                    closed=True, N=8, K=12)
    assert trc.violations == 0 and trc.strict_events > 0


def test_coupling_parameter_validation():
    with pytest.raises(ValidationError):
        coupled_p_monotonicity(0.7, 0.3, params(), 100, RngSeed(0))
    with pytest.raises(ValidationError):
        coupled_alpha_monotonicity(2.0, 0.5, params(), 100, RngSeed(0))
    with pytest.raises(ValidationError):
        coupled_beta_monotonicity(0.5, 2.0, params(), 100, RngSeed(0))


def test_three_color_merges_and_dominance():
    tr = three_color_run(0.4, 0.2, params(), 3000, RngSeed(7), p_hat=0.55)
    assert tr.violations == 0
    assert tr.merge_checks > 0
    assert tr.strict_events > 0
    assert tr.d_magenta <= tr.d_total and tr.d_green <= tr.d_total
    # The magenta-departure share of the lower model bounds the share that
    # the higher model can add, the pathwise form of concavity of g.
    assert tr.gap_low >= tr.gap_high - 0.05


def test_three_color_validation():
    with pytest.raises(ValidationError):
        three_color_run(0.9, 0.2, params(), 100, RngSeed(0))
    with pytest.raises(ValidationError):
        three_color_run(0.4, 0.0, params(), 100, RngSeed(0))


def test_violation_trace_roundtrip(tmp_path):
    err = CouplingViolationError("order broke", trace=[(0.1, "event", "1>2")])
    path = tmp_path / "trace.csv"
    write_violation_trace(str(path), err.trace)
    import csv
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "event", "detail"]
    assert rows[1][1] == "event"

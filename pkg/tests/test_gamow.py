import math

import numpy as np
import pytest

from pesinlab import (BiorthOperator, GamowSpec, ResourceLimitError,
                      chain_trace, decay_bounds, eigenvalues,
                      evolution_factors, evolve_matrix_oracle,
                      evolve_operator, make_cell_operators, off_mass_ratio)


def _chain_ops(rng, count, n_max=32, lead_lo=0.3, lead_hi=0.7, off=3e-4):
    """Per-step operators with prescribed lead range and small decaying tails."""
    r = np.arange(n_max)
    falloff = 0.5 ** np.maximum(r[:, None] + r[None, :] - 1, 0)
    ops = []
    for i in range(count):
        mags = off * (0.5 + 0.5 * rng.random((n_max, n_max))) * falloff
        phases = np.exp(2j * np.pi * rng.random((n_max, n_max)))
        c = mags * phases
        c[0, 0] = rng.uniform(lead_lo, lead_hi)
        ops.append(BiorthOperator(c, f"step-{i}"))
    return ops


# --- spectrum and spec ------------------------------------------------------

def test_eigenvalue_ladder():
    z = eigenvalues(GamowSpec())
    assert z[0] == 1.0 + 0j
    assert z[1] == 1.0 - 0.1j
    assert z[5] == 5.0 - 0.5j


def test_relaxation_time():
    assert GamowSpec().t_r == 10.0
    assert GamowSpec(gamma0=0.5, hbar=2.0).t_r == 4.0


def test_spec_validation():
    with pytest.raises(ValueError):
        GamowSpec(gamma0=0.0)
    with pytest.raises(ValueError):
        GamowSpec(omega0=-1.0)
    with pytest.raises(ValueError):
        GamowSpec(n_max=1)


def test_operator_must_be_square():
    with pytest.raises(ValueError):
        BiorthOperator(np.zeros((3, 4)))


# --- evolution --------------------------------------------------------------

def test_factors_fix_the_lead_entry():
    f = evolution_factors(GamowSpec(), 7)
    assert f[0, 0] == 1.0 + 0j


def test_factors_damp_the_diagonal():
    f = evolution_factors(GamowSpec(), 1)
    assert abs(f[1, 1] - math.exp(-0.2)) < 1e-15
    assert abs(f[2, 2] - math.exp(-0.4)) < 1e-15
    assert f[1, 1].imag == 0.0


def test_factors_first_row_magnitude_and_phase():
    j = 5
    f = evolution_factors(GamowSpec(), j)
    for s in (1, 2, 3):
        expect = np.exp(1j * (s - 1) * j) * math.exp(-0.1 * s * j)
        assert abs(f[0, s] - expect) < 1e-14


def test_evolve_zero_steps_is_identity():
    op = BiorthOperator(np.eye(32) * 0.5)
    assert evolve_operator(GamowSpec(), op, 0) is op


def test_evolve_keeps_diagonal_operators_diagonal():
    spec = GamowSpec(n_max=8)
    op = BiorthOperator(np.diag(np.linspace(0.5, 0.1, 8)))
    out = evolve_operator(spec, op, 3)
    assert np.all(out.coeffs == np.diag(np.diag(out.coeffs)))
    assert np.all(out.coeffs.imag == 0.0)
    assert out.coeffs[0, 0] == 0.5


def test_evolve_rejects_negative_steps():
    op = BiorthOperator(np.eye(32))
    with pytest.raises(ValueError):
        evolve_operator(GamowSpec(), op, -1)


def test_evolve_rejects_dimension_mismatch():
    op = BiorthOperator(np.eye(8))
    with pytest.raises(ValueError):
        evolve_operator(GamowSpec(), op, 1)


@pytest.mark.parametrize("seed", range(15))
def test_matrix_oracle_agrees(seed):
    rng = np.random.default_rng(seed)
    n_max = int(rng.integers(2, 33))
    spec = GamowSpec(omega0=float(rng.uniform(0.5, 2.0)),
                     gamma0=float(rng.uniform(0.05, 0.5)), n_max=n_max)
    c = rng.standard_normal((n_max, n_max)) + 1j * rng.standard_normal((n_max, n_max))
    op = BiorthOperator(c)
    j = int(rng.integers(0, 11))
    fast = evolve_operator(spec, op, j).coeffs
    dense = evolve_matrix_oracle(spec, op, j).coeffs
    scale = np.max(np.abs(dense))
    assert np.max(np.abs(fast - dense)) <= 1e-10 * scale


def test_oracle_dimension_cap():
    spec = GamowSpec(n_max=256)
    op = BiorthOperator(np.eye(256))
    with pytest.raises(ResourceLimitError):
        evolve_matrix_oracle(spec, op, 1)


def test_off_mass_decays_past_relaxation():
    spec = GamowSpec()
    [op] = make_cell_operators(spec, 2, seed=7)[:1]
    ratios = [off_mass_ratio(evolve_operator(spec, op, j))
              for j in (0, 50, 100, 200)]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] < 1e-6


def test_off_mass_needs_lead():
    with pytest.raises(ValueError):
        off_mass_ratio(BiorthOperator(np.diag([0.0, 0.5])))


# --- chain traces -----------------------------------------------------------

def test_chain_single_operator_is_plain_trace():
    spec = GamowSpec(n_max=4)
    c = np.diag([0.4, 0.1, 0.05, 0.02])
    res = chain_trace(spec, [BiorthOperator(c)], 0)
    assert res.trace == complex(np.trace(c))
    assert res.n == 0


def test_chain_rank_one_projectors_exact():
    spec = GamowSpec()
    c = np.zeros((32, 32))
    c[0, 0] = 0.5
    ops = [BiorthOperator(c)] * 21
    res = chain_trace(spec, ops, 20)
    assert res.trace == 0.5 ** 21
    assert res.diagonal_product == 0.5 ** 21
    assert res.rel_error == 0.0


def test_chain_start_step_offsets_evolution():
    spec = GamowSpec(n_max=8)
    rng = np.random.default_rng(12)
    op = BiorthOperator(rng.standard_normal((8, 8)) * 0.1 + np.diag([0.5] + [0.0] * 7))
    shifted = chain_trace(spec, [op], 0, start_step=5)
    direct = complex(np.trace(evolve_operator(spec, op, 5).coeffs))
    assert shifted.trace == direct


def test_chain_length_and_start_validation():
    spec = GamowSpec(n_max=4)
    op = BiorthOperator(np.eye(4) * 0.2)
    with pytest.raises(ValueError):
        chain_trace(spec, [op, op], 0)
    with pytest.raises(ValueError):
        chain_trace(spec, [op], 0, start_step=-1)


def test_long_chain_tracks_diagonal_product():
    spec = GamowSpec()
    ops = _chain_ops(np.random.default_rng(7), 61)
    res = chain_trace(spec, ops, 60)
    assert res.rel_error < 1e-3
    assert res.imag_ratio < 1e-3


def test_long_chain_trace_inside_decay_envelope():
    spec = GamowSpec()
    ops = _chain_ops(np.random.default_rng(7), 61)
    res = chain_trace(spec, ops, 60)
    d1, d2 = decay_bounds(ops)
    lt = math.log(abs(res.trace))
    assert 61 * math.log(d1) < lt < 61 * math.log(d2)


@pytest.mark.parametrize("seed", range(5))
def test_chain_error_plateaus_past_relaxation(seed):
    # beyond n = 10 t_R / alpha every factor is effectively rank one, so the
    # accumulated relative error freezes; allow plateau-level noise only
    spec = GamowSpec()
    ops = _chain_ops(np.random.default_rng(100 + seed), 141)
    errs = [chain_trace(spec, ops[:n + 1], n).rel_error for n in (100, 120, 140)]
    assert errs[1] <= errs[0] * (1 + 1e-3)
    assert errs[2] <= errs[0] * (1 + 1e-3)


# --- decay bounds -----------------------------------------------------------

def test_bounds_degenerate():
    c = np.zeros((4, 4))
    c[0, 0] = 0.5
    assert decay_bounds([BiorthOperator(c)] * 3) == (0.5, 0.5)


def test_bounds_min_max():
    ops = []
    for v in (0.3, 0.5, 0.7):
        c = np.zeros((4, 4))
        c[0, 0] = v
        ops.append(BiorthOperator(c))
    assert decay_bounds(ops) == (0.3, 0.7)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.5, 0.5 + 0.1j])
def test_bounds_reject_out_of_range_leads(bad):
    c = np.zeros((4, 4), dtype=complex)
    c[0, 0] = bad
    with pytest.raises(ValueError):
        decay_bounds([BiorthOperator(c)])


def test_bounds_reject_empty():
    with pytest.raises(ValueError):
        decay_bounds([])


# --- cell operator generation -----------------------------------------------

def test_random_cells_reproducible():
    spec = GamowSpec()
    a = make_cell_operators(spec, 4, seed=7)
    b = make_cell_operators(spec, 4, seed=7)
    c = make_cell_operators(spec, 4, seed=8)
    for x, y in zip(a, b):
        assert np.array_equal(x.coeffs, y.coeffs)
    assert not np.array_equal(a[0].coeffs, c[0].coeffs)


def test_random_cells_subnormalized():
    for seed in range(10):
        ops = make_cell_operators(GamowSpec(), 4, seed=seed)
        leads = [op.coeffs[0, 0].real for op in ops]
        assert all(0.0 < v < 1.0 for v in leads)
        assert math.fsum(leads) <= 1.0 + 1e-12
        d1, d2 = decay_bounds(ops)
        assert 0.0 < d1 <= d2 < 1.0


def test_random_cells_off_entries_small():
    ops = make_cell_operators(GamowSpec(), 4, seed=7)
    for op in ops:
        assert off_mass_ratio(op) < 0.05


def test_prescribed_cells_echoed_verbatim():
    spec = GamowSpec(n_max=4)
    tables = []
    for v in (0.4, 0.3):
        t = np.zeros((4, 4), dtype=complex)
        t[0, 0] = v
        t[1, 2] = 0.001j
        tables.append(t)
    ops = make_cell_operators(spec, 2, "prescribed", tables=tables,
                              labels=["a", "b"])
    assert np.array_equal(ops[0].coeffs, tables[0])
    assert np.array_equal(ops[1].coeffs, tables[1])
    assert [op.label for op in ops] == ["a", "b"]


def test_prescribed_cells_validation():
    spec = GamowSpec(n_max=4)
    good = np.zeros((4, 4))
    good[0, 0] = 0.6
    with pytest.raises(ValueError):
        make_cell_operators(spec, 2, "prescribed")
    with pytest.raises(ValueError):
        make_cell_operators(spec, 2, "prescribed", tables=[good])
    with pytest.raises(ValueError):
        make_cell_operators(spec, 2, "prescribed", tables=[good[:2, :2]] * 2)
    with pytest.raises(ValueError):
        # two leads of 0.6 break sub-normalization
        make_cell_operators(spec, 2, "prescribed", tables=[good, good])


def test_generation_mode_validation():
    with pytest.raises(ValueError):
        make_cell_operators(GamowSpec(), 4, "adversarial")
    with pytest.raises(ValueError):
        make_cell_operators(GamowSpec(), 1)


def test_support_is_truncation_stable():
    small = GamowSpec(n_max=16)
    big = GamowSpec(n_max=32)
    ops_s = make_cell_operators(small, 3, seed=5, support=8)
    ops_b = make_cell_operators(big, 3, seed=5, support=8)
    for a, b in zip(ops_s, ops_b):
        assert np.array_equal(a.coeffs[:8, :8], b.coeffs[:8, :8])
        assert np.all(b.coeffs[8:, :] == 0) and np.all(b.coeffs[:, 8:] == 0)
    chain_s = chain_trace(small, [ops_s[i % 3] for i in range(11)], 10)
    chain_b = chain_trace(big, [ops_b[i % 3] for i in range(11)], 10)
    rel = abs(chain_s.trace - chain_b.trace) / abs(chain_b.trace)
    assert rel < 1e-8

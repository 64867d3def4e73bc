import warnings

import numpy as np
import pytest

from nmloc import (
    GOLDEN_MEAN,
    DiagonalOperator,
    HoppingSpec,
    LatticeBox,
    LatticeOperator,
    PotentialSpec,
    SchemeParams,
    SchemeResult,
    TameConstants,
    build_hopping,
    build_potential,
    check_theory_conditions,
    hopping_slice,
    initial_step,
    ledger_to_csv,
    run,
    unitarize,
)
from nmloc.errors import SymmetryDefectError


def maryland_setup(radius=16, epsilon=0.1, s0=4.0, **kw):
    box = LatticeBox(1, radius, max(2, int(radius * 0.75)))
    D = build_potential(PotentialSpec("maryland", omega=(GOLDEN_MEAN,)), box)
    T = build_hopping(HoppingSpec(s_exponent=s0, epsilon=epsilon), box)
    params = SchemeParams(
        tau=1.0, delta=0.05, alpha0=0.6, theta0=2.0, Theta=2.0,
        s_hopping=s0, epsilon=epsilon, **kw,
    )
    return box, D, T, params


@pytest.fixture(autouse=True)
def quiet_contraction_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*contraction.*")
        yield


def test_slices_telescope_exactly():
    box, D, T, params = maryland_setup(radius=8)
    p = params.resolved(1)
    acc = LatticeOperator.zeros(box)
    k = 0
    while p.theta(k - 1) < 2 * box.radius:
        acc = acc + hopping_slice(T, k, p)
        k += 1
    np.testing.assert_array_equal(acc.entries, T.entries)
    partial = hopping_slice(T, 0, p) + hopping_slice(T, 1, p)
    np.testing.assert_array_equal(partial.entries, T.smooth(p.theta(1)).entries)


def test_slice_one_contains_offsets_three_and_four():
    box, D, T, params = maryland_setup(radius=8)
    t1 = hopping_slice(T, 1, params.resolved(1))
    present = {
        box.offset_vector(int(f))[0]
        for f in np.unique(box.pair_offset_flat[np.abs(t1.entries) > 0])
    }
    assert present == {-4, -3, 3, 4}


def test_initial_step_zero_hopping():
    box, D, T, params = maryland_setup(epsilon=0.0)
    p = params.resolved(1)
    tc = TameConstants(1, p.alpha0)
    T0 = hopping_slice(T, 0, p)
    V1, V1inv, R1, H1, row = initial_step(T0, D, p, tc, gamma=1.0)
    eye = LatticeOperator.identity(box)
    np.testing.assert_array_equal(V1.entries, eye.entries)
    assert np.all(R1.entries == 0.0)


def test_initial_step_single_entry_formula():
    box = LatticeBox(1, 2, 1)
    dvals = np.array([0.3, 1.1, 2.9, 4.1, 5.7])
    D = DiagonalOperator.from_values(box, dvals)
    e = np.zeros((5, 5), complex)
    e[1, 3] = 0.25
    T0 = LatticeOperator(box, e)
    params = SchemeParams(tau=1.0, delta=0.05, alpha0=0.6, theta0=2.0, Theta=2.0,
                          alpha=2.0).resolved(1)
    tc = TameConstants(1, 0.6)
    V1, V1inv, R1, H1, row = initial_step(T0, D, params, tc, gamma=1.0)
    W = V1.entries - np.eye(5)
    assert W[1, 3] == pytest.approx(0.25 / (dvals[3] - dvals[1]), rel=1e-14)
    assert np.count_nonzero(W) == 1
    # exact defect equals the closed form V^-1 T0 W
    closed = V1inv.entries @ e @ W
    np.testing.assert_allclose(R1.entries, closed, atol=1e-15)


def test_trivial_run_is_exact_for_every_model():
    box = LatticeBox(1, 16, 12)
    T = build_hopping(HoppingSpec(s_exponent=4.0, epsilon=0.0), box)
    kinds = [
        PotentialSpec("maryland", omega=(GOLDEN_MEAN,)),
        PotentialSpec("sarnak", omega=(GOLDEN_MEAN,)),
        PotentialSpec("craig_mod1", omega=(GOLDEN_MEAN,)),
        PotentialSpec("limit_periodic_binary"),
        PotentialSpec("limit_periodic_ternary"),
    ]
    eye = LatticeOperator.identity(box)
    for spec in kinds:
        D = build_potential(spec, box)
        params = SchemeParams(tau=1.0, delta=0.05, alpha0=0.6, theta0=2.0,
                              Theta=2.0, s_hopping=4.0)
        res = run(T, D, params)
        assert res.converged
        assert np.array_equal(res.qplus.entries, eye.entries)
        assert np.all(res.dplus.values == 0.0)
        assert np.all(res.final_residual.entries == 0.0)
        # with the trivial input every recorded margin is nonnegative
        for row in res.ledger:
            assert all(m >= 0.0 for m in row.margins.values())


def test_maryland_regression_small_box():
    box, D, T, params = maryland_setup(radius=16, epsilon=0.1)
    res = run(T, D, params)
    assert res.converged
    assert res.steps == 5  # frozen baseline: coverage at theta_4 = 32
    r_seq = [row.norms["R@0.6"] for row in res.ledger]
    assert all(b < a for a, b in zip(r_seq, r_seq[1:]))
    assert res.final_residual.sobolev_norm(0.0) <= 1e-10
    for row in res.ledger:
        assert row.norms["conj_residual"] <= 1e-9
        assert row.norms["decomp_residual"] <= 1e-9
    assert res.master_residual <= 1e-12
    # real symmetric input: the unitarized transform is attached
    assert res.U is not None and res.unitarity_defect <= 1e-9


def test_direct_mode_master_identity():
    box, D, T, params = maryland_setup(radius=16, epsilon=0.05, mode="direct")
    res = run(T, D, params)
    assert res.converged
    lhs = res.qplus_inv @ (T + D.as_operator()) @ res.qplus
    rhs = D.as_operator() + res.dplus.as_operator()
    assert (lhs - rhs).sobolev_norm(0.0) <= 1e-10
    assert res.dplus.sobolev_norm() > 0.0


def test_direct_and_inverse_corrections_compose():
    # feeding the direct run's corrected diagonal to an inverse run must
    # undo the correction, up to the two conjugation defects
    box, D, T, params = maryland_setup(radius=16, epsilon=0.05, mode="direct")
    rd = run(T, D, params)
    D2 = DiagonalOperator.from_values(box, D.values + rd.dplus.values)
    ri = run(T, D2, SchemeParams(
        tau=1.0, delta=0.05, alpha0=0.6, theta0=2.0, Theta=2.0,
        s_hopping=4.0, epsilon=0.05, mode="inverse",
    ))
    tol = (rd.final_residual.sobolev_norm(0.0)
           + ri.final_residual.sobolev_norm(0.0))
    assert np.max(np.abs(ri.dplus.values + rd.dplus.values)) <= tol


def test_two_dimensional_run_end_to_end():
    box = LatticeBox(2, 6, 4)
    omega = (GOLDEN_MEAN, np.sqrt(2.0) - 1.0)
    D = build_potential(PotentialSpec("maryland", omega=omega), box)
    T = build_hopping(HoppingSpec(s_exponent=5.0, epsilon=0.02), box)
    params = SchemeParams(tau=2.0, delta=0.05, alpha0=1.2, theta0=2.0,
                          Theta=2.0, s_hopping=5.0, epsilon=0.02)
    res = run(T, D, params)
    assert res.converged
    assert res.master_residual <= 1e-12
    from nmloc import completeness_check, eigenfunctions

    reports = eigenfunctions(res)
    assert all(r.decay_envelope_margin >= 0.0 for r in reports if r.interior)
    assert completeness_check(res)[0] >= 0.9


def test_ledger_csv_layout():
    box, D, T, params = maryland_setup(radius=8)
    res = run(T, D, params)
    csv = ledger_to_csv(res.ledger)
    lines = csv.strip().split("\n")
    header = lines[0].split(",")
    assert header[0] == "k" and header[1] == "theta_k"
    assert any(col.startswith("W@") for col in header)
    assert any(col.startswith("margin:R@") for col in header)
    assert len(lines) == len(res.ledger) + 1
    assert all(len(line.split(",")) == len(header) for line in lines[1:])


def test_checkpoints_written(tmp_path):
    box, D, T, params = maryland_setup(radius=8)
    res = run(T, D, params, checkpoint_dir=tmp_path)
    files = sorted(tmp_path.glob("step_*.npz"))
    assert len(files) == res.steps
    with np.load(files[-1]) as data:
        np.testing.assert_array_equal(data["Q"], res.qplus.entries)


# -- unitarization -------------------------------------------------------------


def synthetic_result(box, Q_entries):
    eye = LatticeOperator.identity(box)
    Q = LatticeOperator(box, Q_entries)
    D = DiagonalOperator.from_values(box, np.arange(box.n_sites, dtype=float))
    return SchemeResult(
        qplus=Q,
        qplus_inv=LatticeOperator(box, np.linalg.inv(Q_entries)),
        dplus=DiagonalOperator.zeros(box),
        final_residual=LatticeOperator.zeros(box),
        ledger=[], converged=True, steps=0, mode="inverse", box=box,
        params=SchemeParams(tau=1.0, delta=0.05, alpha0=0.6, theta0=2.0,
                            Theta=2.0, alpha=2.0).resolved(1),
        T=LatticeOperator.zeros(box), D=D, gamma_used=1.0,
        master_residual=0.0, qq_inverse_defect=0.0,
    )


def test_unitarize_identity_and_scaling(box1d):
    res = synthetic_result(box1d, np.eye(box1d.n_sites, dtype=complex))
    U = unitarize(res)
    np.testing.assert_array_equal(U.entries, np.eye(box1d.n_sites))
    res2 = synthetic_result(box1d, 2.0 * np.eye(box1d.n_sites, dtype=complex))
    U2 = unitarize(res2)
    np.testing.assert_allclose(U2.entries, np.eye(box1d.n_sites), atol=1e-15)


def test_unitarize_rejects_skew_transform(box1d, rng):
    q = np.eye(box1d.n_sites, dtype=complex)
    q[0, 3] = 0.2  # Gram matrix picks up an off-diagonal entry
    res = synthetic_result(box1d, q)
    with pytest.raises(SymmetryDefectError, match="symmetry defect"):
        unitarize(res)


# -- sufficient-condition checker ------------------------------------------------


def test_kappa1_boundary_is_strict():
    # binary-exact parameters put kappa1 at exactly zero
    tc = TameConstants(1, 0.625)
    params = SchemeParams(
        tau=1.0, delta=0.0625, alpha0=0.625, theta0=2.0, Theta=2.0,
        alpha=0.625 + 1.0 + 7 * 0.0625, alpha1=10.0, gamma=1.0,
    )
    rows = {c.name: c for c in check_theory_conditions(params, {}, tc)}
    assert rows["alpha3"].margin == 0.0
    assert rows["alpha3"].holds is False


def test_small_delta_forces_astronomical_band_ratio():
    tc = TameConstants(1, 0.6)
    params = SchemeParams(
        tau=1.0, delta=0.05, alpha0=0.6, theta0=2.0, Theta=2.0,
        alpha=3.25, alpha1=6.55, gamma=1.0,
    )
    rows = {c.name: c for c in check_theory_conditions(params, {}, tc)}
    theta_row = rows["Theta"]
    assert theta_row.data["binding"] == "8^(2/delta)*c0^(4/delta)"
    assert theta_row.data["required_log10"] > 20.0
    assert not theta_row.holds


def witness_params():
    # all sufficient inequalities hold; the admissible coupling is then far
    # below float resolution, so the witness hopping is zero
    return SchemeParams(
        tau=0.5, gamma=0.25, delta=4.0, alpha0=0.6,
        alpha=100.0, alpha1=204.0, theta0=1e54, Theta=70.0,
        theory_checks=True,
    )


def test_witness_configuration_passes_everything():
    tc = TameConstants(1, 0.6)
    t_norms = {100.0 + 16.0: 0.0, 100.0 + 12.0: 0.0}
    rows = check_theory_conditions(witness_params(), t_norms, tc)
    for c in rows:
        assert c.holds, f"{c.name} fails with margin {c.margin}"


def test_theory_mode_runs_with_witness():
    box = LatticeBox(1, 8, 6)
    D = build_potential(PotentialSpec("maryland", omega=(GOLDEN_MEAN,)), box)
    T = build_hopping(HoppingSpec(s_exponent=4.0, epsilon=0.0), box)
    res = run(T, D, witness_params())
    assert res.converged
    assert np.all(res.final_residual.entries == 0.0)

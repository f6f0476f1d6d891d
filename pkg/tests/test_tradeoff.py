import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qetqit.entropy import relative_entropy, two_qubit_ef, von_neumann
from qetqit.linalg import haar_unitary, random_ket
from qetqit.protocol import bell_state, coarse_grain, make_measurement, run_protocol
from qetqit.sweep import derive_seed
from qetqit.thermal import Hamiltonian, gibbs_state, tfd_state
from qetqit.tradeoff import (
    SweepConfig,
    averaged_rb_state,
    decoder_dominance,
    ef_variant_check,
    optimal_qet_scheme,
    pareto_sweep,
    product_gap,
    proof_step_check,
    theorem1_check,
    theorem1_sweep,
    theorem2_finite_n,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)

# H = diag(0, 1), beta = 1
S_TAU = 0.5822031088882179
LOG_Z = 0.31326168751822286
BETA_E_PRODUCT = 0.2689414213699951


def qubit_benchmark():
    h = Hamiltonian.from_eigenvalues([0.0, 1.0])
    return h, gibbs_state(h, 1.0), tfd_state(h, 1.0)


def test_qubit_benchmark_values():
    h, gibbs, tfd = qubit_benchmark()
    bell = theorem1_check(run_protocol(tfd, h, make_measurement("bell", 2)), gibbs)
    assert bell.bound == pytest.approx(S_TAU, abs=1e-12)
    assert bell.S == pytest.approx(S_TAU, abs=1e-12)
    assert bell.beta_E == pytest.approx(0.0, abs=1e-12)
    assert bell.slack == pytest.approx(0.0, abs=1e-12)
    prod = theorem1_check(run_protocol(tfd, h, optimal_qet_scheme(h)), gibbs)
    assert prod.beta_E == pytest.approx(BETA_E_PRODUCT, abs=1e-12)
    assert prod.S == pytest.approx(0.0, abs=1e-12)
    assert prod.slack == pytest.approx(LOG_Z, abs=1e-12)
    # four-decimal figures
    assert round(S_TAU, 4) == 0.5822 and round(BETA_E_PRODUCT, 4) == 0.2689 and round(LOG_Z, 4) == 0.3133


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_bell_saturates_and_product_gap_is_log_z(d, beta):
    for k in range(3):
        h = Hamiltonian.random(d, 31 * d + k)
        gibbs, tfd = gibbs_state(h, beta), tfd_state(h, beta)
        bell = theorem1_check(run_protocol(tfd, h, make_measurement("bell", d)), gibbs)
        assert bell.slack == pytest.approx(0.0, abs=1e-8)
        assert product_gap(h, beta) == pytest.approx(gibbs.log_Z, abs=1e-8)


def test_theorem1_check_rejects_non_thermal_resource():
    h, gibbs, _ = qubit_benchmark()
    rep = run_protocol(bell_state(2), h, make_measurement("haar", 2, seed=1))
    with pytest.raises(ValueError):
        theorem1_check(rep, gibbs)
    with pytest.raises(ValueError):
        theorem1_check(rep, gibbs_state(Hamiltonian.random(3, 0), 1.0))


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_bound_and_proof_steps_on_random_schemes(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    beta = float(rng.choice([0.5, 1.0, 2.0]))
    h = Hamiltonian.random(d, rng)
    gibbs, tfd = gibbs_state(h, beta), tfd_state(h, beta)
    rep = run_protocol(tfd, h, make_measurement("haar", d, seed=seed))
    assert theorem1_check(rep, gibbs).passed
    steps = proof_step_check(rep, gibbs)
    assert steps.passed, steps.worst
    # on the thermofield double the bound is exactly the averaged Klein term
    assert steps.finite_bound_slack == pytest.approx(theorem1_check(rep, gibbs).slack, abs=1e-10)


def test_relative_entropy_step_per_outcome_oracle():
    h = Hamiltonian.random(3, 4)
    gibbs, tfd = gibbs_state(h, 0.8), tfd_state(h, 0.8)
    rep = run_protocol(tfd, h, make_measurement("haar", 3, seed=2))
    steps = proof_step_check(rep, gibbs)
    for x, out in enumerate(rep.outcomes):
        rel = relative_entropy(out.rho, gibbs.tau)
        assert steps.relent_bound_slack[x] == pytest.approx(rel / 0.8 - out.energy, abs=1e-10)
    assert steps.chain_residual <= 1e-10
    assert steps.smax_vs_rel_gap == pytest.approx(0.0, abs=1e-10)  # rho_B = tau


def test_proof_steps_against_a_mismatched_reference():
    h = Hamiltonian.random(2, 8)
    rep = run_protocol(random_ket(4, 3), h, make_measurement("haar", 2, seed=4))
    steps = proof_step_check(rep, gibbs_state(h, 1.3))
    assert steps.passed, steps.worst
    assert steps.smax_vs_rel_gap > 0.0
    with pytest.raises(ValueError):
        proof_step_check(rep, gibbs_state(h, math.inf))
    with pytest.raises(ValueError):
        proof_step_check(rep, gibbs_state(h, 0.0))


def test_ergotropy_decoder_dominates_other_decoders():
    h = Hamiltonian.random(3, 1)
    tfd = tfd_state(h, 1.0)
    scheme = make_measurement("haar", 3, seed=7)
    best = run_protocol(tfd, h, scheme)
    for k in range(10):
        other = run_protocol(tfd, h, scheme, decoder=np.stack([haar_unitary(3, 100 * k + x) for x in range(9)]))
        assert decoder_dominance(best, other) <= 1e-10


def test_theorem1_sweep_small_run_is_clean_and_thread_independent():
    one = theorem1_sweep(3, 1.0, 50, seed=5, workers=1)
    many = theorem1_sweep(3, 1.0, 50, seed=5, workers=4)
    assert one.failures == 0 and one.proof_step_failures == 0
    assert one.to_dict() == many.to_dict()
    assert one.worst_steps["klein_slack"] >= -1e-10


def test_pareto_sweep_endpoints_and_bound_line():
    res = pareto_sweep(SweepConfig(d=2, beta=1.0, families=("interpolated", "haar", "kraus"), samples=20))
    assert res.failures == 0
    assert res.endpoints["qit"].beta_E == pytest.approx(0.0, abs=1e-10)
    assert res.endpoints["qit"].S == pytest.approx(S_TAU, abs=1e-10)
    assert res.endpoints["qet"].beta_E == pytest.approx(BETA_E_PRODUCT, abs=1e-10)
    assert res.endpoints["qet"].S == pytest.approx(0.0, abs=1e-10)
    assert res.bound_line["log_Z"] == pytest.approx(LOG_Z, abs=1e-12)
    interp = [p for p in res.points if p.family == "interpolated"]
    assert interp[0].slack == pytest.approx(0.0, abs=1e-8)  # theta = 0 is the Bell basis
    assert len(res.points) == 60
    with pytest.raises(ValueError):
        pareto_sweep(SweepConfig(d=2, families=("nope",)))
    with pytest.raises(ValueError):
        pareto_sweep(SweepConfig(d=3, hamiltonian=Hamiltonian.random(2, 0)))


@pytest.mark.parametrize("d, beta", [(2, 1.0), (3, 0.5), (2, 5.0)])
def test_interpolated_family_traces_a_continuous_curve(d, beta):
    # 101 points on [0, pi/2] gives a step of pi/200
    res = pareto_sweep(SweepConfig(d=d, beta=beta, families=("interpolated",), samples=101))
    xy = np.array([[p.beta_E, p.S] for p in res.points])
    assert len(xy) == 101 and res.failures == 0
    assert np.abs(np.diff(xy, axis=0)).max() < 0.05
    np.testing.assert_allclose(xy[0], [0.0, res.endpoints["qit"].S], atol=1e-8)
    np.testing.assert_allclose(xy[-1], [res.endpoints["qet"].beta_E, res.endpoints["qet"].S], atol=1e-8)


def test_pareto_sweep_with_proof_steps():
    res = pareto_sweep(SweepConfig(d=3, beta=0.5, families=("haar",), samples=10), with_proof_steps=True)
    assert len(res.proof_steps) == 10 and all(s.passed for s in res.proof_steps)


def test_theorem2_on_thermal_resource_reproduces_theorem1():
    h = Hamiltonian.random(2, 3)
    beta = 1.0
    tfd = tfd_state(h, beta)
    records = theorem2_finite_n(tfd, h, n_max=2, samples=3, seed=9)
    assert len(records) == 6
    for r in records:
        assert r.beta_star == pytest.approx(beta, abs=1e-8)
        assert r.ergotropy_per_copy == pytest.approx(0.0, abs=1e-10)
        assert r.passed and r.proof_steps_passed
        assert r.finite_bound_slack == pytest.approx(r.surrogate_slack, abs=1e-8)
    first = records[0]
    scheme = make_measurement("haar", 2, seed=derive_seed(9, 1_000_003))
    t1 = theorem1_check(run_protocol(tfd, h, scheme), gibbs_state(h, beta))
    assert first.surrogate_slack == pytest.approx(t1.slack, abs=1e-8)


def test_theorem2_on_non_thermal_resource():
    h = Hamiltonian.random(2, 6)
    for seed in range(4):
        ket = random_ket(4, seed)
        for r in theorem2_finite_n(ket, h, n_max=2, samples=5, seed=seed):
            assert r.flag == ""
            assert r.proof_steps_passed
            assert r.finite_bound_slack >= -1e-8
            assert r.bound == pytest.approx(von_neumann(ket.reshape(2, 2).T @ ket.reshape(2, 2).conj()), abs=1e-12)


def test_theorem2_flags_degenerate_temperatures():
    h = Hamiltonian.from_eigenvalues([0.0, 1.0])
    hot = theorem2_finite_n(bell_state(2), h, n_max=1, family="bell")
    assert hot[0].flag == "beta_star_zero" and hot[0].beta_star == 0.0
    cold = theorem2_finite_n(np.kron([0.6, 0.8], [1.0, 0.0]).astype(complex), h, n_max=1, family="product")
    assert cold[0].flag == "beta_star_infinite"
    with pytest.raises(ValueError):
        theorem2_finite_n(bell_state(2), h, n_max=1, family="interpolated")


def test_entanglement_of_formation_bound_on_random_protocols():
    h, gibbs, tfd = qubit_benchmark()
    for seed in range(30):
        rep = run_protocol(tfd, h, make_measurement("haar", 2, seed=seed))
        assert ef_variant_check(rep, gibbs).passed
        kraus = coarse_grain(make_measurement("haar", 2, seed=seed), 2, seed=seed)
        assert ef_variant_check(run_protocol(tfd, h, kraus), gibbs).passed


def test_entanglement_of_formation_is_tight_for_aligned_corrections():
    # at beta = 0 the resource is maximally entangled, so Bob-side Pauli fixes realign every outcome
    h = Hamiltonian.from_eigenvalues([0.0, 1.0])
    gibbs, tfd = gibbs_state(h, 0.0), tfd_state(h, 0.0)
    scheme = make_measurement("bell", 2)
    raw = run_protocol(tfd, h, scheme, decoder="none")
    ref = raw.outcomes[0].rb_state
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    fixes = []
    for out in raw.outcomes:
        rb = out.rb_state.reshape(2, 2)
        fixes.append(max(paulis, key=lambda u: abs(np.vdot(ref, (rb @ u.T).reshape(-1)))))
    rep = run_protocol(tfd, h, scheme, decoder=np.stack(fixes).astype(complex))
    rho_bar = averaged_rb_state(rep)
    assert np.trace(rho_bar @ rho_bar).real == pytest.approx(1.0, abs=1e-10)
    assert two_qubit_ef(rho_bar) == pytest.approx(rep.avg_S, abs=1e-7)
    assert rep.avg_S == pytest.approx(math.log(2), abs=1e-10)
    rec = ef_variant_check(rep, gibbs)
    assert rec.passed and rec.ef + rec.beta_E == pytest.approx(rec.bound, abs=1e-7)


def test_ef_check_needs_qubits():
    h = Hamiltonian.random(3, 0)
    rep = run_protocol(tfd_state(h, 1.0), h, make_measurement("haar", 3, seed=0))
    with pytest.raises(ValueError):
        ef_variant_check(rep, gibbs_state(h, 1.0))


def test_proof_step_per_outcome_values_for_bell_and_product():
    h, gibbs, tfd = qubit_benchmark()
    bell = proof_step_check(run_protocol(tfd, h, make_measurement("bell", 2)), gibbs)
    np.testing.assert_allclose(bell.relent_bound_slack, 0.0, atol=1e-12)
    prod = proof_step_check(run_protocol(tfd, h, optimal_qet_scheme(h)), gibbs)
    np.testing.assert_allclose(prod.relent_bound_slack, LOG_Z, atol=1e-12)  # log Z / beta at beta = 1


@pytest.mark.parametrize("weights", [(0.8, 0.2), (0.2, 0.8)])
def test_theorem2_schmidt_resources(weights):
    h = Hamiltonian.from_eigenvalues([0.0, 1.0])
    ket = np.diag(np.sqrt(weights)).astype(complex).reshape(-1)
    records = theorem2_finite_n(ket, h, n_max=3, samples=30, seed=1)
    assert {r.n for r in records} == {1, 2, 3}
    for r in records:
        assert r.surrogate_sum <= r.bound + 1e-8
        assert r.proof_steps_passed
    # a diagonal qubit marginal with more weight on the ground level is itself thermal
    if weights[0] > weights[1]:
        assert records[0].beta_star == pytest.approx(math.log(4), abs=1e-8)
        assert all(r.ergotropy_per_copy == pytest.approx(0.0, abs=1e-12) for r in records)


def test_theorem2_bell_pair_reports_entropy_only_bound():
    h = Hamiltonian.from_eigenvalues([0.0, 1.0])
    for r in theorem2_finite_n(bell_state(2), h, n_max=2, samples=5, family="haar"):
        assert r.flag == "beta_star_zero"
        assert r.bound == pytest.approx(math.log(2), abs=1e-12)
        assert r.per_copy_S <= math.log(2) + 1e-8

"""Trade-off bound checks, proof-step inequalities and achievable-region sweeps.

Conventions: every quantity is in nats. A report produced on n copies is
compared with Gibbs data for the n-copy Hamiltonian, so its bound is n S(tau)
and the per-copy numbers are obtained by dividing by n.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .entropy import (
    max_relative_entropy,
    relative_entropies,
    relative_entropy,
    two_qubit_ef,
    von_neumann,
)
from .linalg import DensityMatrix
from .protocol import (
    KRAUS,
    ProtocolReport,
    coarse_grain,
    make_measurement,
    run_protocol,
    run_tensor_protocol,
    tensor_scheme,
)
from .sweep import derive_seed, ordered_map
from .thermal import (
    GibbsData,
    Hamiltonian,
    effective_beta,
    gibbs_state,
    regularized_ergotropy,
    tensor_power_ergotropy_per_copy,
    tfd_state,
)

SLACK_TOL = 1e-8
STEP_TOL = 1e-9
KLEIN_TOL = 1e-10
ENSEMBLE_TOL = 1e-8
MARGINAL_TOL = 1e-8


@dataclass
class TradeoffPoint:
    beta_E: float
    S: float
    bound: float
    slack: float
    family: str = ""
    theta: float | None = None
    seed: int | None = None
    n: int = 1

    @property
    def passed(self) -> bool:
        return self.slack >= -SLACK_TOL

    def csv_row(self) -> list:
        return [self.family, self.theta, self.seed, self.n, self.beta_E, self.S, self.bound, self.slack]


CSV_HEADER = ["family", "theta", "seed", "n", "beta_E", "S", "bound", "slack"]


def _check_resource(report: ProtocolReport, gibbs: GibbsData) -> None:
    if report.hamiltonian.dim != gibbs.hamiltonian.dim:
        raise ValueError("report and Gibbs data live on different dimensions")
    err = float(np.abs(report.resource_marginal - gibbs.tau.matrix).max())
    if err > MARGINAL_TOL:
        raise ValueError(f"resource marginal differs from tau_beta by {err:.2e}; not a TFD at this beta")


def theorem1_check(report: ProtocolReport, gibbs: GibbsData) -> TradeoffPoint:
    """Evaluate S(B) + beta E against S(tau_beta) for a run on the thermofield double."""
    _check_resource(report, gibbs)
    beta_e = gibbs.beta * report.avg_E if report.avg_E != 0.0 else 0.0
    bound = von_neumann(gibbs.tau)
    s = report.avg_S
    meta = report.scheme.metadata
    return TradeoffPoint(
        beta_E=beta_e,
        S=s,
        bound=bound,
        slack=bound - beta_e - s,
        family=report.scheme.family,
        theta=meta.get("theta"),
        seed=meta.get("seed"),
        n=report.n_copies,
    )


@dataclass
class ProofStepReport:
    relent_bound_slack: np.ndarray  # S(rho_x || tau)/beta - E_x, per outcome
    klein_slack: np.ndarray  # S(U_x rho_x U_x^dag || tau), per outcome
    ensemble_identity_error: float
    smax_vs_rel_gap: float  # S_max(rho_B || tau) - S(rho_B || tau)
    operator_ineq_min_eig: float  # min eig of exp(S_max) tau - rho_B
    finite_bound_slack: float  # S(rho_B) + S(rho_B || tau) - (avg S + beta avg E)
    chain_residual: float  # |finite_bound_slack - sum_x p_x klein_x|

    @property
    def worst(self) -> dict:
        return {
            "relent_bound_slack": float(self.relent_bound_slack.min(initial=math.inf)),
            "klein_slack": float(self.klein_slack.min(initial=math.inf)),
            "ensemble_identity_error": self.ensemble_identity_error,
            "smax_vs_rel_gap": self.smax_vs_rel_gap,
            "operator_ineq_min_eig": self.operator_ineq_min_eig,
            "finite_bound_slack": self.finite_bound_slack,
            "chain_residual": self.chain_residual,
        }

    @property
    def passed(self) -> bool:
        w = self.worst
        return (
            w["relent_bound_slack"] >= -STEP_TOL
            and w["klein_slack"] >= -KLEIN_TOL
            and w["ensemble_identity_error"] <= ENSEMBLE_TOL
            and w["smax_vs_rel_gap"] >= -STEP_TOL
            and w["operator_ineq_min_eig"] >= -STEP_TOL
            and w["finite_bound_slack"] >= -SLACK_TOL
            and w["chain_residual"] <= 1e-7
        )


def proof_step_check(report: ProtocolReport, gibbs: GibbsData) -> ProofStepReport:
    """Every inequality of the converse proof, evaluated against reference tau = gibbs.tau.

    The reference need not be the resource marginal; with rho_B != tau the
    ensemble identity is checked against rho_B and the bound picks up
    S(rho_B || tau).
    """
    beta = gibbs.beta
    if not (0.0 < beta < math.inf):
        raise ValueError("proof-step check needs a finite positive beta")
    if report.hamiltonian.dim != gibbs.hamiltonian.dim:
        raise ValueError("report and Gibbs data live on different dimensions")
    tau = gibbs.tau
    v = report.valid
    rho = report.rho[v]
    u = report.unitaries[v]
    p = report.p[v]
    rel = relative_entropies(rho, tau)
    rotated = np.einsum("xij,xjk,xlk->xil", u, rho, u.conj())
    klein = relative_entropies(rotated, tau)
    relent_slack = rel / beta - report.energy[v]

    rho_b = DensityMatrix(report.resource_marginal / np.trace(report.resource_marginal).real)
    ens_err = float(np.abs(report.ensemble_average - rho_b.matrix).max())
    s_rel = relative_entropy(rho_b, tau)
    s_max = max_relative_entropy(rho_b, tau)
    op_min = float(np.linalg.eigvalsh(math.exp(s_max) * tau.matrix - rho_b.matrix).min())
    lhs = report.avg_S + beta * report.avg_E
    finite = von_neumann(rho_b) + s_rel - lhs
    residual = abs(finite - float(p @ klein))
    return ProofStepReport(relent_slack, klein, ens_err, s_max - s_rel, op_min, finite, residual)


# -- finite-n surrogate of the general-resource bound -----------------------------


@dataclass
class Theorem2Record:
    n: int
    family: str
    seed: int | None
    beta_star: float
    per_copy_S: float
    per_copy_E: float
    ergotropy_per_copy: float  # exact n-copy ergotropy of rho_B, per copy
    regularized_ergotropy: float
    surrogate_sum: float  # per_copy_S + beta* (per_copy_E - ergotropy_per_copy)
    bound: float  # S(rho_B)
    surrogate_slack: float
    finite_bound_slack: float  # rigorous finite-n slack with S(rho_B || tau*) subtracted
    flag: str = ""  # "", "beta_star_zero" or "beta_star_infinite"
    proof_steps_passed: bool = True

    @property
    def passed(self) -> bool:
        return self.surrogate_slack >= -SLACK_TOL


def _schemes_for(family: str, d: int, n: int, seed: int | None):
    if family == "haar":
        return make_measurement("haar", d**n, seed=seed)
    if family in ("bell", "product"):
        return tensor_scheme([make_measurement(family, d)] * n)
    raise ValueError(f"theorem-2 sweeps support haar, bell and product families, not {family!r}")


def theorem2_finite_n(
    resource,
    h: Hamiltonian,
    n_max: int,
    family: str = "haar",
    samples: int = 1,
    seed: int = 0,
    workers: int | None = None,
) -> list[Theorem2Record]:
    """Per-copy surrogate of the general-resource bound for n = 1..n_max.

    The energy term subtracts the exact n-copy ergotropy of rho_B; the
    rigorous finite-n statement (with S(rho_B || tau*)/beta* subtracted)
    is carried alongside as ``finite_bound_slack``.
    """
    ket = resource.ket if hasattr(resource, "ket") else np.asarray(resource, dtype=complex).reshape(-1)
    d = h.dim
    m = ket.reshape(d, d)
    rho_b = DensityMatrix(m.T @ m.conj())
    s_b = von_neumann(rho_b)
    beta_star = effective_beta(rho_b, h)
    flag = ""
    if beta_star == 0.0:
        flag = "beta_star_zero"
    elif math.isinf(beta_star):
        flag = "beta_star_infinite"
    reg = regularized_ergotropy(rho_b, h)

    jobs = []
    for n in range(1, n_max + 1):
        count = samples if family == "haar" else 1
        for k in range(count):
            jobs.append((n, derive_seed(seed, n * 1_000_003 + k) if family == "haar" else None))

    def run(job):
        n, sd = job
        scheme = _schemes_for(family, d, n, sd)
        rep = run_tensor_protocol(ket, h, n, scheme)
        erg_n = tensor_power_ergotropy_per_copy(rho_b, h, n)
        s_pc, e_pc = rep.per_copy_S, rep.per_copy_E
        if flag:
            total = s_pc
            finite = s_b - s_pc
            steps_ok = rep.ensemble_error <= ENSEMBLE_TOL
        else:
            total = s_pc + beta_star * (e_pc - erg_n)
            hn = h.tensor_sum(n) if n > 1 else h
            steps = proof_step_check(rep, gibbs_state(hn, beta_star))
            finite = steps.finite_bound_slack / n
            steps_ok = steps.passed
        return Theorem2Record(
            n=n,
            family=family,
            seed=sd,
            beta_star=beta_star,
            per_copy_S=s_pc,
            per_copy_E=e_pc,
            ergotropy_per_copy=erg_n,
            regularized_ergotropy=reg,
            surrogate_sum=total,
            bound=s_b,
            surrogate_slack=s_b - total,
            finite_bound_slack=finite,
            flag=flag,
            proof_steps_passed=steps_ok,
        )

    return ordered_map(run, jobs, workers)


# -- achievable region ----------------------------------------------------------------


@dataclass
class SweepConfig:
    d: int = 2
    beta: float = 1.0
    families: Sequence[str] = ("interpolated",)
    samples: int = 200
    seed: int = 0
    hamiltonian: Hamiltonian | None = None
    decoder: str = "ergotropy_optimal"

    def resolved_hamiltonian(self) -> Hamiltonian:
        if self.hamiltonian is not None:
            return self.hamiltonian
        return Hamiltonian.from_eigenvalues(np.arange(self.d, dtype=float))


@dataclass
class SweepResult:
    points: list[TradeoffPoint]
    endpoints: dict[str, TradeoffPoint]
    bound_line: dict = field(default_factory=dict)
    proof_steps: list[ProofStepReport] = field(default_factory=list)

    @property
    def worst_slack(self) -> float:
        return min(p.slack for p in self.points)

    @property
    def failures(self) -> int:
        return sum(not p.passed for p in self.points)


def optimal_qet_scheme(h: Hamiltonian):
    """Product measurement in Alice's half of the TFD Schmidt basis."""
    return make_measurement("product", h.dim, a_basis=h.basis.conj())


def pareto_sweep(config: SweepConfig, workers: int | None = None, with_proof_steps: bool = False) -> SweepResult:
    """Sample (beta E, S) points of every requested family plus both optimal endpoints."""
    h = config.resolved_hamiltonian()
    if h.dim != config.d:
        raise ValueError(f"Hamiltonian dimension {h.dim} does not match d = {config.d}")
    gibbs = gibbs_state(h, config.beta)
    tfd = tfd_state(h, config.beta)

    def evaluate(scheme):
        rep = run_protocol(tfd, h, scheme, config.decoder)
        pt = theorem1_check(rep, gibbs)
        steps = proof_step_check(rep, gibbs) if with_proof_steps else None
        return pt, steps

    jobs = []
    for fam in config.families:
        if fam == "interpolated":
            count = max(config.samples, 2)
            thetas = np.linspace(0.0, math.pi / 2, count)
            jobs += [("interpolated", float(t), None) for t in thetas]
        elif fam == "haar":
            jobs += [("haar", None, derive_seed(config.seed, k)) for k in range(config.samples)]
        elif fam in ("bell", "product"):
            jobs.append((fam, None, None))
        elif fam == "kraus":
            jobs += [("kraus", None, derive_seed(config.seed, k)) for k in range(config.samples)]
        else:
            raise ValueError(f"unknown family {fam!r}")

    def build(job):
        fam, theta, sd = job
        if fam == "product":
            return optimal_qet_scheme(h)
        if fam == "kraus":
            base = make_measurement("haar", config.d, seed=sd)
            group = 2 if config.d % 2 == 0 else config.d
            return coarse_grain(base, group, seed=sd)
        return make_measurement(fam, config.d, theta=theta, seed=sd)

    results = ordered_map(lambda job: evaluate(build(job)), jobs, workers)
    points = [r[0] for r in results]
    steps = [r[1] for r in results if r[1] is not None]

    qit = theorem1_check(run_protocol(tfd, h, make_measurement("bell", config.d)), gibbs)
    qet = theorem1_check(run_protocol(tfd, h, optimal_qet_scheme(h)), gibbs)
    bound = von_neumann(gibbs.tau)
    line = {
        "bound": bound,
        "log_Z": gibbs.log_Z,
        "beta": config.beta,
        "max_beta_E": config.beta * gibbs.energy,
        "qit_endpoint": [qit.beta_E, qit.S],
        "qet_endpoint": [qet.beta_E, qet.S],
    }
    return SweepResult(points, {"qit": qit, "qet": qet}, line, steps)


# -- general measurements and entanglement of formation -------------------------


@dataclass
class EFRecord:
    ef: float
    avg_S: float
    beta_E: float
    bound: float
    ef_below_entropy: bool
    ef_bound_holds: bool

    @property
    def passed(self) -> bool:
        return self.ef_below_entropy and self.ef_bound_holds


def averaged_rb_state(report: ProtocolReport) -> np.ndarray:
    """sum_x p_x (1_R (x) U_x) rho_{RB|x} (1_R (x) U_x)^dag on R (x) B."""
    d = report.hamiltonian.dim
    v = report.valid
    u = report.unitaries[v]
    if report.scheme.kind == KRAUS:
        rho_rb = report.rho_rb[v]
    else:
        w = report.rb_amplitudes[v]  # [b, r], unnormalised
        psi = w.transpose(0, 2, 1).reshape(-1, d * d) / np.sqrt(report.p[v])[:, None]
        rho_rb = np.einsum("xi,xj->xij", psi, psi.conj())
    big_u = np.einsum("ij,xkl->xikjl", np.eye(d), u).reshape(-1, d * d, d * d)
    out = np.einsum("xij,xjk,xlk->xil", big_u, rho_rb, big_u.conj())
    return np.einsum("x,xij->ij", report.p[v], out)


def ef_variant_check(report: ProtocolReport, gibbs: GibbsData) -> EFRecord:
    """Entanglement-of-formation form of the bound for a two-qubit resource."""
    if report.hamiltonian.dim != 2:
        raise ValueError("entanglement-of-formation check needs a qubit Bob")
    _check_resource(report, gibbs)
    rho_bar = averaged_rb_state(report)
    ef = two_qubit_ef(rho_bar)
    beta_e = gibbs.beta * report.avg_E
    bound = von_neumann(gibbs.tau)
    return EFRecord(
        ef=ef,
        avg_S=report.avg_S,
        beta_E=beta_e,
        bound=bound,
        ef_below_entropy=ef <= report.avg_S + SLACK_TOL,
        ef_bound_holds=ef + beta_e <= bound + SLACK_TOL,
    )


# -- sweep drivers shared by the CLI and the acceptance suite ---------------------


@dataclass
class Theorem1Summary:
    d: int
    beta: float
    samples: int
    failures: int
    worst_slack: float
    proof_step_failures: int
    worst_steps: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _merge_worst(acc: dict, w: dict) -> dict:
    lower_is_worse = {"ensemble_identity_error": False, "chain_residual": False}
    for k, val in w.items():
        if k not in acc:
            acc[k] = val
        elif lower_is_worse.get(k, True):
            acc[k] = min(acc[k], val)
        else:
            acc[k] = max(acc[k], val)
    return acc


def theorem1_sweep(
    d: int,
    beta: float,
    samples: int,
    seed: int = 0,
    h: Hamiltonian | None = None,
    workers: int | None = None,
    proof_steps: bool = True,
    tolerance: float = SLACK_TOL,
) -> Theorem1Summary:
    """Haar-random rank-one schemes on the TFD: bound slack and proof-step suite."""
    if h is None:
        h = Hamiltonian.random(d, seed=derive_seed(seed, 10**9 + d))
    gibbs = gibbs_state(h, beta)
    tfd = tfd_state(h, beta)

    def one(k):
        scheme = make_measurement("haar", d, seed=derive_seed(seed, k))
        rep = run_protocol(tfd, h, scheme)
        pt = theorem1_check(rep, gibbs)
        steps = proof_step_check(rep, gibbs) if proof_steps else None
        return pt.slack, steps

    out = ordered_map(one, range(samples), workers)
    worst: dict = {}
    step_fail = 0
    for _, st in out:
        if st is not None:
            worst = _merge_worst(worst, st.worst)
            step_fail += not st.passed
    slacks = np.array([s for s, _ in out])
    return Theorem1Summary(
        d=d,
        beta=beta,
        samples=samples,
        failures=int((slacks < -tolerance).sum()),
        worst_slack=float(slacks.min()),
        proof_step_failures=step_fail,
        worst_steps=worst,
    )


def decoder_dominance(report_opt: ProtocolReport, report_other: ProtocolReport) -> float:
    """Largest per-outcome excess of an alternative decoder over the ergotropy decoder."""
    v = report_opt.valid & report_other.valid
    return float((report_other.energy[v] - report_opt.energy[v]).max(initial=-math.inf))


def product_gap(h: Hamiltonian, beta: float) -> float:
    """Slack of the optimal energy-teleportation endpoint (equals log Z)."""
    rep = run_protocol(tfd_state(h, beta), h, optimal_qet_scheme(h))
    return theorem1_check(rep, gibbs_state(h, beta)).slack

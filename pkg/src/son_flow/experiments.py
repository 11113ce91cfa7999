"""Batch experiments: basin statistics, saddle-escape runs, structural
checks of the cost, and the bundled validation suite.

All experiments are deterministic for a fixed seed.  Trials are independent;
they run vectorized in contiguous chunks (optionally across a thread pool),
and per-trial arithmetic does not depend on the chunking, so reports are
byte-identical no matter how work is scheduled.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BadIndex
from .critical import (
    CriticalPointInfo,
    classify,
    component_dimension,
    connect_in_component,
    make_critical,
    tangent_projector_at,
)
from .flow import (
    CONVERGED,
    BatchResult,
    FlowConfig,
    Trajectory,
    integrate,
    integrate_batch,
    so2_reference,
)
from .linearize import (
    EXPONENTIALLY_STABLE,
    hessian_linearization_consistency,
    linearize,
    operator_matrix,
    unstable_direction,
)
from .manifold import (
    RotationMatrix,
    SkewMatrix,
    TangentVector,
    expm_skew,
    haar_sample_batch,
    metric,
    random_tangent,
    skew_dim,
    skew_to_coords,
    coords_to_skew,
)
from .objective import (
    cost,
    differential,
    gradient,
    hessian_at,
    hessian_kernel_dimension,
)

SCHEMA_VERSION = 1

PERTURBATION_KINDS = ("unstable", "kernel", "random")

# The kernel-direction outcome contract: terminal membership residual stays
# below this multiple of the perturbation size.
KERNEL_RESIDUAL_FACTOR = 10.0


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        return max(1, os.cpu_count() or 1)
    return max(1, int(threads))


def config_to_dict(cfg: FlowConfig) -> dict:
    return {
        "scale": float(cfg.scale),
        "method": cfg.method,
        "h": float(cfg.h),
        "t_max": float(cfg.t_max),
        "grad_tol": float(cfg.grad_tol),
        "ortho_check_every": int(cfg.ortho_check_every),
    }


def _integrate_chunked(
    initials: np.ndarray,
    cfg: FlowConfig,
    threads: int | None,
    cost_threshold: float | None = None,
) -> BatchResult:
    """Run `integrate_batch` over contiguous chunks, merged in trial order."""
    b = initials.shape[0]
    workers = min(resolve_threads(threads), max(b, 1))
    if b == 0 or workers == 1:
        return integrate_batch(initials, cfg, cost_threshold=cost_threshold)
    bounds = np.linspace(0, b, workers + 1).astype(int)
    chunks = [
        initials[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
    ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(
            pool.map(
                lambda c: integrate_batch(c, cfg, cost_threshold=cost_threshold),
                chunks,
            )
        )
    return BatchResult(
        final_states=np.concatenate([p.final_states for p in parts]),
        projected=np.concatenate([p.projected for p in parts]),
        kinds=[k for p in parts for k in p.kinds],
        components=np.concatenate([p.components for p in parts]),
        nearest=np.concatenate([p.nearest for p in parts]),
        final_costs=np.concatenate([p.final_costs for p in parts]),
        final_grad_norms=np.concatenate([p.final_grad_norms for p in parts]),
        steps=np.concatenate([p.steps for p in parts]),
        times=np.concatenate([p.times for p in parts]),
        first_crossing=np.concatenate([p.first_crossing for p in parts]),
        max_ortho_residual=max(p.max_ortho_residual for p in parts),
    )


# --------------------------------------------------------------------------
# Basin statistics
# --------------------------------------------------------------------------

@dataclass
class BasinReport:
    """Outcome counts of flow runs from Haar-random starts.

    wall_time is informational only and deliberately left out of the
    serialized form so reports stay byte-identical across reruns.
    """

    n: int
    trials: int
    seed: int
    counts: dict[int, int]
    failures: int
    config: FlowConfig
    wall_time: float

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "report": "basin",
            "n": self.n,
            "trials": self.trials,
            "seed": self.seed,
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "failures": self.failures,
            "config": config_to_dict(self.config),
        }


def run_basin(
    n: int,
    trials: int,
    cfg: FlowConfig,
    seed: int,
    threads: int | None = None,
) -> BasinReport:
    """Integrate `trials` Haar-random starts and tally terminal components.

    Non-converged or failed runs are recorded in `failures`, never retried:
    with the default configuration every Haar start is expected to reach the
    identity component, and any other outcome is a finding, not noise.
    """
    start = time.perf_counter()
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    counts = {k: 0 for k in range(0, n // 2 + 1)}
    failures = 0
    if trials > 0:
        initials = haar_sample_batch(n, trials, seed)
        result = _integrate_chunked(initials, cfg, threads)
        for kind, comp in zip(result.kinds, result.components):
            if kind == CONVERGED and comp >= 0:
                counts[int(comp)] += 1
            else:
                failures += 1
    return BasinReport(
        n=n,
        trials=trials,
        seed=seed,
        counts=counts,
        failures=failures,
        config=cfg,
        wall_time=time.perf_counter() - start,
    )


# --------------------------------------------------------------------------
# Saddle escape
# --------------------------------------------------------------------------

@dataclass
class SaddleEscapeReport:
    """Terminal components of runs started near a saddle component."""

    n: int
    k: int
    eps: float
    kind: str
    trials: int
    seed: int
    outcomes: list[int]
    escape_times: list[float | None]
    membership_residuals: list[float]
    config: FlowConfig
    wall_time: float

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "report": "saddle_escape",
            "n": self.n,
            "k": self.k,
            "eps": self.eps,
            "kind": self.kind,
            "trials": self.trials,
            "seed": self.seed,
            "outcomes": self.outcomes,
            "escape_times": self.escape_times,
            "membership_residuals": self.membership_residuals,
            "config": config_to_dict(self.config),
        }


def _perturbation(info: CriticalPointInfo, kind: str, seed: int) -> np.ndarray:
    """Unit-norm skew direction for the requested perturbation kind."""
    n = info.n
    if kind == "unstable":
        u = unstable_direction(info).coord.entries
    elif kind == "kernel":
        proj = tangent_projector_at(info)
        rng = np.random.default_rng(seed)
        coords = proj @ rng.standard_normal(skew_dim(n))
        u = coords_to_skew(coords, n)
    elif kind == "random":
        u = random_tangent(info.theta, seed).coord.entries
    else:
        raise ValueError(f"kind must be one of {PERTURBATION_KINDS}")
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise ValueError("degenerate perturbation direction")
    return u / norm


def run_saddle_escape(
    n: int,
    k: int,
    eps: float,
    kind: str,
    trials: int,
    cfg: FlowConfig,
    seed: int,
    threads: int | None = None,
) -> SaddleEscapeReport:
    """Perturb Haar-framed points of the component k and integrate.

    eps = 0 leaves the points untouched (exact equilibria).  Escape time is
    the first time the cost drops below 4k - 2*eps; None when it never does.
    """
    start = time.perf_counter()
    if k < 1:
        raise BadIndex("saddle escape needs k >= 1")
    if not 0.0 <= eps <= 0.1:
        raise ValueError("eps must lie in [0, 0.1]")
    if kind not in PERTURBATION_KINDS:
        raise ValueError(f"kind must be one of {PERTURBATION_KINDS}")
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    rng = np.random.default_rng(seed)
    initials = np.empty((trials, n, n))
    for i in range(trials):
        frame_seed = int(rng.integers(2**63))
        direction_seed = int(rng.integers(2**63))
        info = make_critical(n, k, frame=frame_seed)
        if eps == 0.0:
            initials[i] = info.theta.entries
        else:
            u = _perturbation(info, kind, direction_seed)
            initials[i] = expm_skew(eps * u) @ info.theta.entries
    result = _integrate_chunked(
        initials, cfg, threads, cost_threshold=4.0 * k - 2.0 * eps
    )
    outcomes = []
    for kind_j, comp, near in zip(result.kinds, result.components, result.nearest):
        outcomes.append(int(comp) if (kind_j == CONVERGED and comp >= 0) else int(near))
    residuals = []
    for state in result.final_states:
        residuals.append(
            float(
                np.linalg.norm(state - state.T)
                + abs(np.trace(state) - (n - 4 * k))
            )
        )
    escape = [None if math.isnan(t) else float(t) for t in result.first_crossing]
    return SaddleEscapeReport(
        n=n,
        k=k,
        eps=eps,
        kind=kind,
        trials=trials,
        seed=seed,
        outcomes=outcomes,
        escape_times=escape,
        membership_residuals=residuals,
        config=cfg,
        wall_time=time.perf_counter() - start,
    )


# --------------------------------------------------------------------------
# Structural checks and the validation suite
# --------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float
    tolerance: float

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "error": self.error,
            "tolerance": self.tolerance,
        }


@dataclass
class ConditionsReport:
    """Shared shape of the Morse-type check and validation suite reports."""

    kind: str
    n_list: list[int]
    seed: int
    checks: list[CheckResult]
    wall_time: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "report": self.kind,
            "n_list": self.n_list,
            "seed": self.seed,
            "checks": [c.to_json_dict() for c in self.checks],
            "passed": self.passed,
        }


def _valid_pairs(n_list: list[int], k_min: int = 0) -> list[tuple[int, int]]:
    return [(n, k) for n in n_list for k in range(k_min, n // 2 + 1)]


def check_morse_bott(n: int, seeds: int = 5) -> ConditionsReport:
    """Structural conditions on the cost over the component with index k:
    bounded range achieving its maximum on the top component, a constant
    value 4k on each component, and Hessian kernel dimension equal to the
    component dimension."""
    start = time.perf_counter()
    checks = []
    seeds = max(1, int(seeds))
    k_top = n // 2
    max_value = 2 * n - 2 if n % 2 else 2 * n

    err = 0.0
    for s in range(seeds):
        theta = RotationMatrix(haar_sample_batch(n, 1, 1000 + s)[0])
        f = cost(theta)
        err = max(err, max(0.0 - f, f - 2 * n, 0.0))
        top = cost(make_critical(n, k_top, frame=2000 + s).theta)
        err = max(err, abs(top - max_value))
    checks.append(CheckResult("range_and_max_value", err <= 1e-9, err, 1e-9))

    err = 0.0
    for k in range(k_top + 1):
        for s in range(seeds):
            err = max(err, abs(cost(make_critical(n, k, frame=3000 + s).theta) - 4.0 * k))
    checks.append(CheckResult("constant_on_components", err <= 1e-9, err, 1e-9))

    err = 0.0
    for k in range(k_top + 1):
        info = make_critical(n, k, frame=4000 + k)
        dim = hessian_kernel_dimension(hessian_at(info))
        err = max(err, abs(dim - component_dimension(n, k)))
    checks.append(CheckResult("kernel_equals_component_dimension", err == 0.0, err, 0.0))

    return ConditionsReport(
        kind="morse_bott",
        n_list=[n],
        seed=seeds,
        checks=checks,
        wall_time=time.perf_counter() - start,
    )


def run_validation_suite(n_list: list[int], seed: int = 0) -> ConditionsReport:
    """Execute the invariant checks of the objective, critical-set, flow and
    linearization modules at the given dimensions.

    Deterministic for a fixed seed; each check reports its worst measured
    error against the pinned tolerance.  A check that raises is recorded as
    failed with an infinite error.
    """
    start = time.perf_counter()
    n_list = sorted(set(int(n) for n in n_list))
    if not n_list:
        return ConditionsReport(
            kind="validation", n_list=[], seed=seed, checks=[],
            wall_time=time.perf_counter() - start,
        )
    rng = np.random.default_rng(seed)
    checks: list[CheckResult] = []

    def run(name: str, fn, tolerance: float):
        try:
            error = float(fn())
            passed = error <= tolerance
        except Exception:
            error = float("inf")
            passed = False
        checks.append(CheckResult(name, passed, error, tolerance))

    seed_pool = iter(rng.integers(2**63, size=4096))

    def next_seed() -> int:
        return int(next(seed_pool))

    # ---- objective --------------------------------------------------------
    def gradient_metric_compatibility():
        worst = 0.0
        for n in n_list:
            allowance = 1e-12 * (1.0 + math.sqrt(n))
            for _ in range(200):
                theta = RotationMatrix(haar_sample_batch(n, 1, next_seed())[0])
                x = random_tangent(theta, next_seed())
                err = abs(differential(theta, x) - metric(gradient(theta), x))
                worst = max(worst, err / allowance)
        return worst

    run("objective/gradient_metric_compatibility", gradient_metric_compatibility, 1.0)

    def gradient_finite_difference():
        worst = 0.0
        h = 1e-5
        for n in n_list:
            for _ in range(25):
                theta = RotationMatrix(haar_sample_batch(n, 1, next_seed())[0])
                om = random_tangent(theta, next_seed()).coord.entries
                fp = n - np.trace(expm_skew(h * om) @ theta.entries)
                fm = n - np.trace(expm_skew(-h * om) @ theta.entries)
                fd = (fp - fm) / (2 * h)
                df = differential(theta, TangentVector(theta, SkewMatrix(om)))
                worst = max(worst, abs(fd - df) / max(1.0, abs(df)))
        return worst

    run("objective/gradient_finite_difference", gradient_finite_difference, 1e-6)

    def hessian_finite_difference():
        worst = 0.0
        h = 1e-4
        for n, k in _valid_pairs(n_list):
            info = make_critical(n, k, frame=next_seed())
            form = hessian_at(info)
            t0 = info.theta.entries
            for _ in range(3):
                om = random_tangent(info.theta, next_seed()).coord.entries
                f0 = n - np.trace(t0)
                fp = n - np.trace(expm_skew(h * om) @ t0)
                fm = n - np.trace(expm_skew(-h * om) @ t0)
                fd = (fp - 2 * f0 + fm) / (h * h)
                hv = form.evaluator(om, om)
                worst = max(worst, abs(fd - hv) / max(1.0, abs(hv)))
        return worst

    run("objective/hessian_finite_difference", hessian_finite_difference, 1e-4)

    def hessian_definiteness():
        worst = 0.0
        for n, k in _valid_pairs(n_list):
            info = make_critical(n, k, frame=next_seed())
            ev = np.linalg.eigvalsh(hessian_at(info).matrix)
            if k == 0:
                worst = max(worst, float(np.max(np.abs(ev - 2.0))))
            else:
                worst = max(worst, float(ev.min() + 2.0), 0.0)
                if n - 2 * k >= 2:
                    worst = max(worst, float(2.0 - ev.max()))
                else:
                    # top components are maxima: no expanding cost direction
                    worst = max(worst, float(ev.max()))
        return worst

    run("objective/hessian_definiteness", hessian_definiteness, 1e-10)

    def hessian_frame_invariance():
        worst = 0.0
        for n, k in _valid_pairs(n_list):
            ev0 = np.sort(np.linalg.eigvalsh(
                hessian_at(make_critical(n, k, frame=next_seed())).matrix))
            ev1 = np.sort(np.linalg.eigvalsh(
                hessian_at(make_critical(n, k, frame=next_seed())).matrix))
            worst = max(worst, float(np.max(np.abs(ev0 - ev1))))
        return worst

    run("objective/hessian_frame_invariance", hessian_frame_invariance, 1e-9)

    # ---- critical set -----------------------------------------------------
    def classify_roundtrip():
        worst = 0.0
        for n, k in _valid_pairs(n_list):
            for _ in range(20):
                got = classify(make_critical(n, k, frame=next_seed()).theta)
                worst = max(worst, abs((got if got is not None else -99) - k))
        return worst

    run("critical/classify_roundtrip", classify_roundtrip, 0.0)

    def component_cost_value():
        worst = 0.0
        for n, k in _valid_pairs(n_list):
            for _ in range(5):
                worst = max(worst, abs(
                    cost(make_critical(n, k, frame=next_seed()).theta) - 4.0 * k))
        return worst

    run("critical/component_cost_value", component_cost_value, 1e-9)

    def kernel_tangent_angles():
        from scipy.linalg import subspace_angles

        worst = 0.0
        for n, k in _valid_pairs(n_list, k_min=1):
            if component_dimension(n, k) == 0:
                continue
            info = make_critical(n, k, frame=next_seed())
            proj = tangent_projector_at(info)
            w, v = np.linalg.eigh(proj)
            rng_basis = v[:, w > 0.5]
            hw, hv = np.linalg.eigh(hessian_at(info).matrix)
            ker_basis = hv[:, np.abs(hw) < 1e-8]
            if rng_basis.shape[1] != ker_basis.shape[1]:
                return float("inf")
            worst = max(worst, float(np.max(subspace_angles(rng_basis, ker_basis))))
        return worst

    run("critical/kernel_tangent_angles", kernel_tangent_angles, 1e-6)

    def isolation_cost_gap():
        worst = 0.0
        for n in n_list:
            values = [cost(make_critical(n, k, frame=next_seed()).theta)
                      for k in range(n // 2 + 1)]
            for ka in range(len(values)):
                for kb in range(ka + 1, len(values)):
                    worst = max(worst, abs(abs(values[kb] - values[ka]) - 4.0 * (kb - ka)))
            for k in range(n // 2 + 1):
                got = classify(make_critical(n, k, frame=next_seed()).theta, tol=1e-8)
                worst = max(worst, abs((got if got is not None else -99) - k))
        return worst

    run("critical/isolation_cost_gap", isolation_cost_gap, 1e-9)

    def critical_rhs_vanishes():
        worst = 0.0
        for n, k in _valid_pairs(n_list):
            t0 = make_critical(n, k, frame=next_seed()).theta.entries
            worst = max(worst, float(np.linalg.norm((t0.T - t0) @ t0)))
        return worst

    run("critical/rhs_vanishes_on_critical_points", critical_rhs_vanishes, 1e-12)

    def connecting_curve_membership():
        worst = 0.0
        for n, k in _valid_pairs(n_list, k_min=1):
            a = make_critical(n, k, frame=next_seed())
            b = make_critical(n, k, frame=next_seed())
            curve = connect_in_component(a, b, steps=20)
            worst = max(worst, float(np.linalg.norm(curve[0].entries - a.theta.entries)))
            worst = max(worst, float(np.linalg.norm(curve[-1].entries - b.theta.entries)))
            for sample in curve:
                got = classify(sample, tol=1e-7)
                if got != k:
                    return float("inf")
        return worst

    run("critical/connecting_curve_membership", connecting_curve_membership, 1e-8)

    # ---- flow -------------------------------------------------------------
    flow_trajs: dict[tuple[int, str], Trajectory] = {}

    def structure_preservation():
        worst = 0.0
        for n in n_list:
            for method in ("lie_euler", "lie_rk4"):
                theta0 = RotationMatrix(haar_sample_batch(n, 1, next_seed())[0])
                cfg = FlowConfig(method=method, h=1e-2, t_max=50.0, grad_tol=1e-14)
                traj = integrate(theta0, cfg)
                flow_trajs[(n, method)] = traj
                for state in traj.states:
                    res = np.linalg.norm(
                        state.entries.T @ state.entries - np.eye(n))
                    worst = max(worst, float(res))
        return worst

    run("flow/structure_preservation", structure_preservation, 1e-9)

    def lyapunov_monotonicity():
        worst = 0.0
        for traj in flow_trajs.values():
            if len(traj) > 1:
                worst = max(worst, float(np.max(np.diff(traj.costs))))
        return max(worst, 0.0)

    run("flow/lyapunov_monotonicity", lyapunov_monotonicity, 1e-10)

    def energy_identity_slope():
        n = max(n_list)
        theta0 = RotationMatrix(haar_sample_batch(n, 1, next_seed())[0])
        residuals = []
        for h in (1e-2, 1e-3):
            cfg = FlowConfig(h=h, t_max=2.0, grad_tol=1e-14)
            traj = integrate(theta0, cfg)
            r = 0.0
            for i in range(len(traj) - 1):
                g2 = traj.grad_norms[i] ** 2
                if traj.grad_norms[i] < 1e-3:
                    break
                r = max(r, abs((traj.costs[i + 1] - traj.costs[i]) / h
                               + cfg.scale * g2))
            residuals.append(r)
        slope = math.log(residuals[0] / residuals[1]) / math.log(10.0)
        return abs(slope - 1.0)

    run("flow/energy_identity_slope", energy_identity_slope, 0.2)

    def conjugation_equivariance():
        worst = 0.0
        n = max(n_list)
        theta0 = haar_sample_batch(n, 1, next_seed())[0]
        p = haar_sample_batch(n, 1, next_seed())[0]
        p[:, 0] *= -1.0  # an orthogonal conjugator with determinant -1
        cfg = FlowConfig(h=1e-2, t_max=5.0, grad_tol=1e-14)
        t1 = integrate(RotationMatrix(theta0), cfg)
        t2 = integrate(RotationMatrix(p @ theta0 @ p.T), cfg)
        for s1, s2 in zip(t1.states, t2.states):
            worst = max(worst, float(np.linalg.norm(
                p @ s1.entries @ p.T - s2.entries)))
        return worst

    run("flow/conjugation_equivariance", conjugation_equivariance, 1e-8)

    def rk4_order_so2():
        theta0 = 2.0
        t_end = 1.0
        errors = []
        for h in (1e-1, 5e-2, 2.5e-2):
            state = np.array([[math.cos(theta0), -math.sin(theta0)],
                              [math.sin(theta0), math.cos(theta0)]])
            cfg = FlowConfig(h=h, t_max=t_end, grad_tol=1e-15)
            traj = integrate(RotationMatrix(state), cfg)
            angle = math.atan2(traj.states[-1].entries[1, 0],
                               traj.states[-1].entries[0, 0])
            errors.append(abs(angle - float(so2_reference(theta0, t_end))))
        worst = 0.0
        for e0, e1 in zip(errors[:-1], errors[1:]):
            worst = max(worst, abs(math.log2(e0 / e1) - 4.0))
        return worst

    run("flow/rk4_order_so2", rk4_order_so2, 1.0)

    def omega_limit_single_point():
        n = max(n_list)
        base = RotationMatrix.identity(n)
        om = random_tangent(base, next_seed()).coord.entries
        om = om * (0.01 / np.linalg.norm(om))
        cfg = FlowConfig()
        traj = integrate(RotationMatrix(expm_skew(om)), cfg)
        tail = traj.states[max(0, int(0.9 * len(traj))):]
        worst = max(
            float(np.linalg.norm(s.entries - traj.states[-1].entries))
            for s in tail
        )
        return worst / (10.0 * cfg.grad_tol)

    run("flow/omega_limit_single_point", omega_limit_single_point, 1.0)

    # ---- linearization ----------------------------------------------------
    def linearization_counts():
        worst = 0.0
        for n, k in _valid_pairs(n_list):
            for scale in (1.0, 2.0):
                rep = linearize(make_critical(n, k, frame=next_seed()), scale)
                ns, nu, nz = rep.counts
                worst = max(worst, abs(ns + nu + nz - skew_dim(n)))
                worst = max(worst, abs(nz - component_dimension(n, k)))
                if k == 0:
                    if rep.verdict != EXPONENTIALLY_STABLE:
                        return float("inf")
                    worst = max(worst, float(np.max(np.abs(rep.eigenvalues + scale))))
                elif nu < 1:
                    return float("inf")
        return worst

    run("linearize/count_bookkeeping", linearization_counts, 1e-9)

    def linearization_finite_difference():
        worst = 0.0
        eps = 1e-6
        scale = 2.0
        for n, k in _valid_pairs(n_list):
            info = make_critical(n, k, frame=next_seed())
            op = operator_matrix(info, scale)
            t0 = info.theta.entries
            for _ in range(3):
                om = random_tangent(info.theta, next_seed()).coord.entries
                om = om / np.linalg.norm(om)
                moved = expm_skew(eps * om) @ t0
                gen = (scale / 2.0) * (moved.T - moved)
                fd = skew_to_coords(gen) / eps
                ref = op @ skew_to_coords(om)
                denom = max(1.0, float(np.linalg.norm(ref)))
                worst = max(worst, float(np.linalg.norm(fd - ref)) / denom)
        return worst

    run("linearize/finite_difference_consistency", linearization_finite_difference, 1e-5)

    def hessian_operator_consistency():
        worst = 0.0
        for n, k in _valid_pairs(n_list):
            worst = max(worst, hessian_linearization_consistency(
                make_critical(n, k, frame=next_seed())))
        return worst

    run("linearize/hessian_consistency", hessian_operator_consistency, 1e-10)

    def unstable_direction_residual():
        worst = 0.0
        for n, k in _valid_pairs(n_list, k_min=1):
            for scale in (1.0, 2.0):
                info = make_critical(n, k, frame=next_seed())
                op = operator_matrix(info, scale)
                u = skew_to_coords(unstable_direction(info).coord.entries)
                worst = max(worst, float(
                    np.linalg.norm(op @ u - scale * u) / np.linalg.norm(u)))
        return worst

    run("linearize/unstable_direction_residual", unstable_direction_residual, 1e-10)

    return ConditionsReport(
        kind="validation",
        n_list=n_list,
        seed=seed,
        checks=checks,
        wall_time=time.perf_counter() - start,
    )

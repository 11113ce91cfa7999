"""Acceptance gate: one test per criterion, each printing a PASS line with
its measured worst-case numbers (run with -s to see them).

Criterion 4 carries one documented carve-out: components with n - 2k < 2
(the top component of each dimension) maximize the cost, so they have no
expanding direction with value +2; for them the complementary exact fact
(spectrum <= 0) is asserted instead.  tests/test_objective.py keeps the
literal universal claim as a strict expected failure.
"""

import math
import time

import numpy as np

from son_flow import (
    FlowConfig,
    RotationMatrix,
    differential,
    expm_skew,
    gradient,
    haar_sample_batch,
    hessian_at,
    hessian_kernel_dimension,
    integrate,
    integrate_batch,
    linearize,
    make_critical,
    metric,
    random_tangent,
    so2_reference,
    unstable_direction,
)
from son_flow.cli import main as cli_main
from son_flow.critical import classify, connect_in_component
from son_flow.flow import CONVERGED
from son_flow.linearize import hessian_linearization_consistency, operator_matrix
from son_flow.manifold import skew_to_coords
from son_flow.objective import cost


def report(number: int, label: str, detail: str = "") -> None:
    suffix = f" [{detail}]" if detail else ""
    print(f"ACCEPTANCE criterion {number:2d} ({label}): PASS{suffix}")


def all_components(n_max, k_min=0):
    return [(n, k) for n in range(2, n_max + 1) for k in range(k_min, n // 2 + 1)]


def test_criterion_01_gradient_correctness():
    start = time.perf_counter()
    h = 1e-5
    worst_fd = 0.0
    worst_compat = 0.0
    for n in range(2, 9):
        thetas = haar_sample_batch(n, 200, 1000 + n)
        for i in range(200):
            theta = RotationMatrix(thetas[i])
            x = random_tangent(theta, 2000 * n + i)
            om = x.coord.entries
            fp = n - np.trace(expm_skew(h * om) @ thetas[i])
            fm = n - np.trace(expm_skew(-h * om) @ thetas[i])
            fd = (fp - fm) / (2.0 * h)
            df = differential(theta, x)
            worst_fd = max(worst_fd, abs(fd - df) / max(1.0, abs(df)))
            worst_compat = max(worst_compat, abs(df - metric(gradient(theta), x)))
    elapsed = time.perf_counter() - start
    assert worst_fd <= 1e-6
    assert worst_compat <= 1e-12
    assert elapsed < 10.0
    report(1, "gradient correctness",
           f"fd rel {worst_fd:.2e}, compat {worst_compat:.2e}, {elapsed:.1f}s")


def test_criterion_02_hessian_correctness():
    h = 1e-4
    worst = 0.0
    for n, k in all_components(8):
        for seed in range(20):
            info = make_critical(n, k, frame=3000 + 100 * n + 10 * k + seed)
            form = hessian_at(info)
            t0 = info.theta.entries
            f0 = n - np.trace(t0)
            for d in range(2):
                om = random_tangent(info.theta, 7000 + seed + d).coord.entries
                fp = n - np.trace(expm_skew(h * om) @ t0)
                fm = n - np.trace(expm_skew(-h * om) @ t0)
                fd = (fp - 2.0 * f0 + fm) / (h * h)
                hv = form.evaluator(om, om)
                worst = max(worst, abs(fd - hv) / max(1.0, abs(hv)))
    assert worst <= 1e-4
    report(2, "Hessian correctness", f"fd rel {worst:.2e}")


def test_criterion_03_critical_set_geometry():
    worst_trace = 0.0
    worst_cost = 0.0
    for n, k in all_components(10):
        info = make_critical(n, k, frame=41 + n + k)
        worst_trace = max(
            worst_trace, abs(np.trace(info.theta.entries) - (n - 4 * k)))
        worst_cost = max(worst_cost, abs(cost(info.theta) - 4.0 * k))
        assert hessian_kernel_dimension(hessian_at(info)) == 2 * k * (n - 2 * k)
    assert worst_trace <= 1e-9
    assert worst_cost <= 1e-9
    worst_membership = 0.0
    for n, k in [(3, 1), (4, 1), (4, 2), (5, 2), (6, 3)]:
        a = make_critical(n, k, frame=52 + n)
        b = make_critical(n, k, frame=76 + k)
        curve = connect_in_component(a, b, steps=100)
        assert len(curve) == 101
        for sample in curve:
            assert classify(sample, tol=1e-7) == k
            s = sample.entries
            worst_membership = max(
                worst_membership,
                float(np.linalg.norm(s - s.T)),
                float(np.linalg.norm(s @ s - np.eye(n))),
            )
    assert worst_membership <= 1e-7
    report(3, "critical-set geometry",
           f"trace {worst_trace:.2e}, cost {worst_cost:.2e}, "
           f"curve residual {worst_membership:.2e}")


def test_criterion_04_saddle_classification():
    worst_id = 0.0
    for n in range(2, 9):
        ev = np.linalg.eigvalsh(hessian_at(make_critical(n, 0)).matrix)
        worst_id = max(worst_id, float(np.max(np.abs(ev - 2.0))))
    assert worst_id <= 1e-10
    saddles = tops = 0
    for n, k in all_components(8, k_min=1):
        ev = np.linalg.eigvalsh(
            hessian_at(make_critical(n, k, frame=99 + n + k)).matrix)
        assert ev.min() <= -2.0 + 1e-10
        if n - 2 * k >= 2:
            assert ev.max() >= 2.0 - 1e-10
            saddles += 1
        else:
            # carve-out: the top component maximizes the cost
            assert ev.max() <= 1e-10
            tops += 1
    report(4, "saddle classification",
           f"identity dev {worst_id:.2e}; {saddles} saddle and {tops} "
           "maximum components verified")


def test_criterion_05_linearization():
    worst_id = 0.0
    for n in range(2, 9):
        for scale in (1.0, 2.0):
            rep = linearize(make_critical(n, 0), scale)
            worst_id = max(worst_id, float(np.max(np.abs(rep.eigenvalues + scale))))
    assert worst_id <= 1e-10
    worst_dir = 0.0
    for n, k in all_components(8, k_min=1):
        info = make_critical(n, k, frame=123 + 10 * n + k)
        for scale in (1.0, 2.0):
            op = operator_matrix(info, scale)
            u = skew_to_coords(unstable_direction(info).coord.entries)
            worst_dir = max(
                worst_dir,
                float(np.linalg.norm(op @ u - scale * u) / np.linalg.norm(u)),
            )
    assert worst_dir <= 1e-10
    worst_consistency = 0.0
    for n, k in all_components(8):
        info = make_critical(n, k, frame=321 + 10 * n + k)
        worst_consistency = max(
            worst_consistency, hessian_linearization_consistency(info))
    assert worst_consistency <= 1e-10
    report(5, "linearization",
           f"identity dev {worst_id:.2e}, direction residual {worst_dir:.2e}, "
           f"Hessian consistency {worst_consistency:.2e}")


def test_criterion_06_integrator_quality():
    worst_drift = 0.0
    worst_rise = 0.0
    for n in range(2, 9):
        theta0 = RotationMatrix(haar_sample_batch(n, 1, 555 + n)[0])
        cfg = FlowConfig(h=1e-2, t_max=50.0, grad_tol=1e-14)
        traj = integrate(theta0, cfg)
        for s in traj.states:
            worst_drift = max(worst_drift, float(np.linalg.norm(
                s.entries.T @ s.entries - np.eye(n))))
        if len(traj) > 1:
            worst_rise = max(worst_rise, float(np.max(np.diff(traj.costs))))
    assert worst_drift <= 1e-9
    assert worst_rise <= 1e-10
    errors = []
    theta0 = 2.0
    for h in (1e-1, 5e-2, 2.5e-2):
        state = np.array([[math.cos(theta0), -math.sin(theta0)],
                          [math.sin(theta0), math.cos(theta0)]])
        traj = integrate(RotationMatrix(state), FlowConfig(h=h, t_max=1.0,
                                                           grad_tol=1e-15))
        angle = math.atan2(traj.states[-1].entries[1, 0],
                           traj.states[-1].entries[0, 0])
        errors.append(abs(angle - float(so2_reference(theta0, 1.0))))
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    for r in ratios:
        assert 8.0 <= r <= 32.0  # 16 within a factor of two
    report(6, "integrator quality",
           f"drift {worst_drift:.2e}, cost rise {worst_rise:.2e}, "
           f"order ratios {[f'{r:.1f}' for r in ratios]}")


def test_criterion_07_so2_closed_form():
    theta0 = 2.5
    cfg = FlowConfig(h=1e-3, t_max=5.0, grad_tol=1e-14)
    state = np.array([[math.cos(theta0), -math.sin(theta0)],
                      [math.sin(theta0), math.cos(theta0)]])
    traj = integrate(RotationMatrix(state), cfg)
    worst = 0.0
    for t, s in zip(traj.times, traj.states):
        angle = math.atan2(s.entries[1, 0], s.entries[0, 0])
        worst = max(worst, abs(angle - float(so2_reference(theta0, float(t)))))
    assert worst <= 1e-6
    report(7, "SO(2) closed form", f"pointwise {worst:.2e} over {len(traj)} steps")


def test_criterion_08_almost_global_convergence():
    start = time.perf_counter()
    cfg = FlowConfig()
    worst_dist = 0.0
    for n in (3, 4, 5, 6):
        initials = haar_sample_batch(n, 500, 42_000 + n)
        result = integrate_batch(initials, cfg)
        assert all(kind == CONVERGED for kind in result.kinds)
        assert np.all(result.components == 0)
        dists = np.linalg.norm(result.projected - np.eye(n), axis=(1, 2))
        worst_dist = max(worst_dist, float(dists.max()))
    elapsed = time.perf_counter() - start
    assert worst_dist <= 1e-6
    assert elapsed < 300.0
    report(8, "almost-global convergence",
           f"2000 trials, max |limit - I| {worst_dist:.2e}, {elapsed:.0f}s")


def test_criterion_09_saddle_escape():
    from son_flow import run_saddle_escape

    cfg = FlowConfig(t_max=100.0)
    pairs = all_components(6, k_min=1)
    for n, k in pairs:
        rep = run_saddle_escape(n, k, 1e-3, "unstable", 50, cfg, seed=7 * n + k)
        assert rep.outcomes == [0] * 50, f"escape failed at n={n} k={k}"
    stay_cfg = FlowConfig(t_max=5.0)
    for n, k in pairs:
        theta = make_critical(n, k, frame=500 + n).theta
        traj = integrate(theta, stay_cfg)
        assert traj.verdict.kind == CONVERGED and traj.verdict.component == k
        assert np.all(traj.grad_norms <= 1e-12)
        rep = run_saddle_escape(n, k, 0.0, "unstable", 3, stay_cfg, seed=11 * n + k)
        assert rep.outcomes == [k] * 3
    report(9, "saddle escape",
           f"{len(pairs)} components: 100% escape at eps=1e-3, 100% stay at eps=0")


def test_criterion_10_determinism(tmp_path):
    args_verify = ["verify", "--n", "2,3", "--seed", "5"]
    va = tmp_path / "va.json"
    vb = tmp_path / "vb.json"
    assert cli_main(args_verify + ["--out", str(va)]) == 0
    assert cli_main(args_verify + ["--out", str(vb)]) == 0
    assert va.read_bytes() == vb.read_bytes()
    args_basin = ["basin", "--n", "3", "--trials", "50", "--seed", "6",
                  "--t-max", "40"]
    ba = tmp_path / "ba.json"
    bb = tmp_path / "bb.json"
    assert cli_main(args_basin + ["--out", str(ba)]) == 0
    assert cli_main(args_basin + ["--out", str(bb)]) == 0
    assert ba.read_bytes() == bb.read_bytes()
    report(10, "determinism", "verify and basin reports byte-identical")

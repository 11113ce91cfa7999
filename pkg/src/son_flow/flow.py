"""Numerical integration of the descent flow on SO(n).

The flow is T' = -s * grad f(T) = (s/2)(T^t - T) T with s the `scale`
(s = 2 reproduces T' = (T^t - T) T, the descent flow of twice the cost).
Three one-step methods are provided; the Lie methods update by group
exponentials and so stay on the manifold to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissionError, NumericalFailure
from .manifold import DEFAULT_ORTHO_TOL, RotationMatrix, expm_skew
from .objective import gradient_coord

METHODS = ("lie_euler", "lie_rk4", "ambient_rk4_project")

# Verdict kinds
CONVERGED = "converged"
MAX_TIME = "max_time"
FAILED = "numerical_failure"

# Tolerance for classifying the polar-projected terminal state.
TERMINAL_CLASSIFY_TOL = 1e-6

# Allowed per-step increase of the cost before the monotonicity guard trips.
MONOTONE_SLACK = 1e-10


@dataclass(frozen=True)
class FlowConfig:
    """Integration parameters.

    scale selects T' = -scale * grad f(T); 2 is the plain descent equation
    (T^t - T) T, 1 the gradient flow of the cost itself.
    """

    scale: float = 2.0
    method: str = "lie_rk4"
    h: float = 1e-2
    t_max: float = 100.0
    grad_tol: float = 1e-10
    ortho_check_every: int = 10

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step size must be positive")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.scale not in (1, 2):
            raise ValueError("scale must be 1 or 2")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.ortho_check_every < 1:
            raise ValueError("ortho_check_every must be at least 1")

    @property
    def max_steps(self) -> int:
        return max(1, int(round(self.t_max / self.h)))


@dataclass(frozen=True)
class Verdict:
    """Outcome of an integration run."""

    kind: str
    component: int | None = None
    limit: RotationMatrix | None = None

    @property
    def converged(self) -> bool:
        return self.kind == CONVERGED


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped record of one flow run."""

    times: np.ndarray
    states: list[RotationMatrix]
    costs: np.ndarray
    grad_norms: np.ndarray
    verdict: Verdict

    def __len__(self) -> int:
        return len(self.states)


def vector_field(theta: RotationMatrix, scale: float = 2.0) -> np.ndarray:
    """Right-hand side (scale/2)(T^t - T) T, the ambient velocity matrix."""
    t = theta.entries
    return (scale / 2.0) * (t.T - t) @ t


def so2_reference(theta0: float, t: float | np.ndarray):
    """Closed-form angle of the n=2 flow at scale 2, angle(t) for angle(0)=theta0.

    On SO(2) the equation reduces to angle' = -2 sin(angle), solved by
    tan(angle/2) = tan(theta0/2) * exp(-2 t).  Valid for theta0 in (-pi, pi).
    """
    return 2.0 * np.arctan(np.tan(theta0 / 2.0) * np.exp(-2.0 * np.asarray(t, dtype=float)))


# --------------------------------------------------------------------------
# Batched stepping kernels on raw (B, n, n) arrays.
# --------------------------------------------------------------------------

def _generator(state: np.ndarray, scale: float) -> np.ndarray:
    """Skew generator A with T' = A T."""
    return (scale / 2.0) * (np.swapaxes(state, -2, -1) - state)


def _step_lie_euler(state: np.ndarray, h: float, scale: float) -> np.ndarray:
    return expm_skew(h * _generator(state, scale)) @ state


def _step_lie_rk4(state: np.ndarray, h: float, scale: float) -> np.ndarray:
    # commutator-free 4th-order scheme (two exponentials in the update)
    a1 = _generator(state, scale)
    y2 = expm_skew(0.5 * h * a1) @ state
    a2 = _generator(y2, scale)
    y3 = expm_skew(0.5 * h * a2) @ state
    a3 = _generator(y3, scale)
    y4 = expm_skew(h * a3 - 0.5 * h * a1) @ y2
    a4 = _generator(y4, scale)
    left = expm_skew((h / 12.0) * (3.0 * a1 + 2.0 * a2 + 2.0 * a3 - a4))
    right = expm_skew((h / 12.0) * (-a1 + 2.0 * a2 + 2.0 * a3 + 3.0 * a4))
    return left @ right @ state


def _polar_project(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    det = np.linalg.det(r)
    if r.ndim == 2:
        if det < 0:
            u = u.copy()
            u[:, -1] *= -1.0
            r = u @ vt
    else:
        bad = det < 0
        if np.any(bad):
            u = u.copy()
            u[bad, :, -1] *= -1.0
            r = u @ vt
    return r


def _step_ambient_rk4(state: np.ndarray, h: float, scale: float) -> np.ndarray:
    def f(m):
        return (scale / 2.0) * (np.swapaxes(m, -2, -1) - m) @ m

    k1 = f(state)
    k2 = f(state + 0.5 * h * k1)
    k3 = f(state + 0.5 * h * k2)
    k4 = f(state + h * k3)
    return _polar_project(state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


_KERNELS = {
    "lie_euler": _step_lie_euler,
    "lie_rk4": _step_lie_rk4,
    "ambient_rk4_project": _step_ambient_rk4,
}


def _grad_norms(state: np.ndarray) -> np.ndarray:
    return np.linalg.norm(gradient_coord(state), axis=(-2, -1))


def _costs(state: np.ndarray) -> np.ndarray:
    n = state.shape[-1]
    return n - np.einsum("...ii->...", state)


def _ortho_residuals(state: np.ndarray) -> np.ndarray:
    n = state.shape[-1]
    return np.linalg.norm(
        np.swapaxes(state, -2, -1) @ state - np.eye(n), axis=(-2, -1)
    )


def _nearest_component(state: np.ndarray) -> np.ndarray:
    """round((n - tr)/4) clipped to the valid index range, per slice."""
    n = state.shape[-1]
    tr = np.einsum("...ii->...", state)
    k = np.rint((n - tr) / 4.0).astype(np.int64)
    return np.clip(k, 0, n // 2)


def _classify_batch(state: np.ndarray, tol: float) -> np.ndarray:
    """Component index per slice, -1 where not critical within `tol`."""
    n = state.shape[-1]
    sym = np.linalg.norm(state - np.swapaxes(state, -2, -1), axis=(-2, -1))
    invol = np.linalg.norm(state @ state - np.eye(n), axis=(-2, -1))
    k = _nearest_component(state)
    tr = np.einsum("...ii->...", state)
    ok = (sym <= tol) & (invol <= tol) & (np.abs(tr - (n - 4 * k)) <= 0.5)
    return np.where(ok, k, -1)


def step(theta: RotationMatrix, cfg: FlowConfig) -> RotationMatrix:
    """Advance one step of length cfg.h from `theta`.

    Raises:
        NumericalFailure: the stepped state fails rotation admission.
    """
    new = _KERNELS[cfg.method](theta.entries, cfg.h, cfg.scale)
    try:
        return RotationMatrix(new, ortho_tol=theta.ortho_tol)
    except AdmissionError as exc:
        raise NumericalFailure(str(exc)) from exc


# --------------------------------------------------------------------------
# Drivers
# --------------------------------------------------------------------------

@dataclass
class BatchResult:
    """Terminal data of a batched run (no per-step recording)."""

    final_states: np.ndarray       # raw terminal states, (B, n, n)
    projected: np.ndarray          # polar-projected terminal states
    kinds: list[str]               # verdict kind per trial
    components: np.ndarray         # classified component, -1 if none
    nearest: np.ndarray            # nearest component by trace, always valid
    final_costs: np.ndarray
    final_grad_norms: np.ndarray
    steps: np.ndarray
    times: np.ndarray
    first_crossing: np.ndarray     # first time cost < cost_threshold (NaN: never)
    max_ortho_residual: float


def integrate_batch(
    thetas: np.ndarray,
    cfg: FlowConfig,
    cost_threshold: float | None = None,
    ortho_tol: float = DEFAULT_ORTHO_TOL,
) -> BatchResult:
    """Integrate a batch of initial states until convergence or t_max.

    Convergence requires the gradient norm to fall below cfg.grad_tol; at a
    point whose nearby critical component has an unstable direction (k >= 1,
    a saddle for the descent flow) integration continues to t_max, since only
    the minimum is a legitimate early stop.  Per-slice arithmetic is
    independent of the batch composition, so results do not depend on how
    trials are grouped.
    """
    b = thetas.shape[0]
    state = np.array(thetas, dtype=float)
    n = state.shape[-1] if b else 0
    kinds = [MAX_TIME] * b
    steps_done = np.zeros(b, dtype=np.int64)
    crossing = np.full(b, np.nan)
    active = np.ones(b, dtype=bool)
    kernel = _KERNELS[cfg.method]
    nmax = cfg.max_steps
    max_drift = 0.0
    i = 0
    if b:
        prev_costs = _costs(state)
        if cost_threshold is not None:
            crossing[prev_costs < cost_threshold] = 0.0
    while np.any(active):
        idx = np.where(active)[0]
        sub = state[idx]
        g = _grad_norms(sub)
        below = g <= cfg.grad_tol
        if np.any(below):
            cand = idx[below]
            ks = _classify_batch(_polar_project(state[cand]), TERMINAL_CLASSIFY_TOL)
            # k = 0 is the exponentially stable minimum: stop. Saddles (k >= 1)
            # stall finite-precision orbits, so keep integrating until t_max.
            settle = ks == 0
            if np.any(settle):
                done = cand[settle]
                for j in done:
                    kinds[j] = CONVERGED
                steps_done[done] = i
                active[done] = False
        if i >= nmax:
            rest = np.where(active)[0]
            g = _grad_norms(state[rest])
            ks = _classify_batch(
                _polar_project(state[rest]), TERMINAL_CLASSIFY_TOL
            )
            settled = (g <= cfg.grad_tol) & (ks >= 0)
            for j, ok in zip(rest, settled):
                kinds[j] = CONVERGED if ok else MAX_TIME
            steps_done[rest] = i
            active[rest] = False
            break
        idx = np.where(active)[0]
        if idx.size == 0:
            break
        new = kernel(state[idx], cfg.h, cfg.scale)
        new_costs = _costs(new)
        old_costs = prev_costs[idx]
        check_ortho = (i % cfg.ortho_check_every == 0) or (i + 1 >= nmax)
        bad = ~np.all(np.isfinite(new), axis=(-2, -1))
        bad |= new_costs - old_costs > MONOTONE_SLACK
        if check_ortho:
            res = _ortho_residuals(new)
            max_drift = max(max_drift, float(res.max(initial=0.0)))
            bad |= res > ortho_tol
        if np.any(bad):
            failed = idx[bad]
            for j in failed:
                kinds[j] = FAILED
            steps_done[failed] = i + 1
            active[failed] = False
            keep = ~bad
            idx = idx[keep]
            new = new[keep]
            new_costs = new_costs[keep]
        state[idx] = new
        prev_costs[idx] = new_costs
        i += 1
        if cost_threshold is not None and idx.size:
            hit = new_costs < cost_threshold
            tnow = i * cfg.h
            for j in idx[hit]:
                if np.isnan(crossing[j]):
                    crossing[j] = tnow
    projected = _polar_project(state) if b else state.copy()
    comps = _classify_batch(projected, TERMINAL_CLASSIFY_TOL) if b else np.zeros(0, np.int64)
    nearest = _nearest_component(projected) if b else np.zeros(0, np.int64)
    for j in range(b):
        if kinds[j] == FAILED:
            comps[j] = -1
    return BatchResult(
        final_states=state,
        projected=projected,
        kinds=kinds,
        components=comps,
        nearest=nearest,
        final_costs=_costs(state) if b else np.zeros(0),
        final_grad_norms=_grad_norms(state) if b else np.zeros(0),
        steps=steps_done,
        times=steps_done * cfg.h,
        first_crossing=crossing,
        max_ortho_residual=max_drift,
    )


def integrate(theta0: RotationMatrix, cfg: FlowConfig) -> Trajectory:
    """Integrate from `theta0`, recording every step.

    Stops once the gradient norm falls below cfg.grad_tol at a point nearest
    the minimum component; near a saddle the run continues to t_max (the
    verdict still reports the saddle if the orbit never leaves it).  A state
    failing admission, or a cost increase beyond the monotonicity guard,
    yields a NumericalFailure verdict with the trajectory recorded so far.
    """
    kernel = _KERNELS[cfg.method]
    state = theta0.entries.copy()
    times = [0.0]
    states = [theta0]
    costs = [float(_costs(state))]
    grads = [float(_grad_norms(state))]
    verdict: Verdict | None = None
    nmax = cfg.max_steps
    i = 0
    while True:
        g = grads[-1]
        if g <= cfg.grad_tol:
            proj = _polar_project(state)
            k = int(_classify_batch(proj, TERMINAL_CLASSIFY_TOL))
            if k == 0:
                verdict = Verdict(CONVERGED, 0, RotationMatrix(proj))
                break
            if i >= nmax and k >= 0:
                verdict = Verdict(CONVERGED, k, RotationMatrix(proj))
                break
        if i >= nmax:
            verdict = Verdict(MAX_TIME)
            break
        new = kernel(state, cfg.h, cfg.scale)
        i += 1
        new_cost = float(_costs(new))
        ok = np.all(np.isfinite(new)) and new_cost - costs[-1] <= MONOTONE_SLACK
        if ok and (i % cfg.ortho_check_every == 0 or i >= nmax):
            ok = float(_ortho_residuals(new)) <= theta0.ortho_tol
        if not ok:
            verdict = Verdict(FAILED)
            break
        try:
            wrapped = RotationMatrix(new, ortho_tol=theta0.ortho_tol)
        except AdmissionError:
            verdict = Verdict(FAILED)
            break
        state = new
        states.append(wrapped)
        times.append(i * cfg.h)
        costs.append(new_cost)
        grads.append(float(_grad_norms(state)))
    return Trajectory(
        times=np.asarray(times),
        states=states,
        costs=np.asarray(costs),
        grad_norms=np.asarray(grads),
        verdict=verdict,
    )


# --------------------------------------------------------------------------
# Serialization: CSV and JSON-lines with shortest round-trip decimals.
# --------------------------------------------------------------------------

def trajectory_field_names(n: int) -> list[str]:
    return ["t", "f", "grad_norm"] + [f"s{i}_{j}" for i in range(n) for j in range(n)]


def trajectory_to_csv(traj: Trajectory) -> str:
    n = traj.states[0].n if traj.states else 0
    lines = [",".join(trajectory_field_names(n))]
    for t, state, f, g in zip(traj.times, traj.states, traj.costs, traj.grad_norms):
        vals = [repr(float(t)), repr(float(f)), repr(float(g))]
        vals += [repr(float(x)) for x in state.entries.ravel()]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def trajectory_to_jsonl(traj: Trajectory) -> str:
    import json

    lines = []
    for t, state, f, g in zip(traj.times, traj.states, traj.costs, traj.grad_norms):
        rec = {
            "t": float(t),
            "f": float(f),
            "grad_norm": float(g),
            "state": [float(x) for x in state.entries.ravel()],
        }
        lines.append(json.dumps(rec, sort_keys=True))
    return "\n".join(lines) + "\n"


def trajectory_records_from_csv(text: str) -> list[dict]:
    """Parse the CSV produced by `trajectory_to_csv` into step records."""
    lines = [ln for ln in text.split("\n") if ln]
    header = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        vals = [float(v) for v in ln.split(",")]
        rec = dict(zip(header[:3], vals[:3]))
        rec["state"] = vals[3:]
        out.append(rec)
    return out


def trajectory_records_from_jsonl(text: str) -> list[dict]:
    import json

    out = []
    for ln in text.split("\n"):
        if not ln:
            continue
        rec = json.loads(ln)
        out.append(
            {
                "t": rec["t"],
                "f": rec["f"],
                "grad_norm": rec["grad_norm"],
                "state": rec["state"],
            }
        )
    return out

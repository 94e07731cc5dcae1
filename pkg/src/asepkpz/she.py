"""Mild-solution sampler for the stochastic heat equation with Robin
boundaries, deterministic moment oracles, and the ASEP comparison harness.

The sampler applies the exact discrete Robin propagator every step to the
Ito update Z <- P [Z (1 + xi)], with xi iid N(0, dt/dX) per site, which
keeps the boundary condition exact and confines the scheme error to the
noise term.  The propagator comes from the grid Laplacian's spectral data
with mu = 1 - dX * slope, the lattice version of dZ = A Z dX at the wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Lattice, Trajectory, replica_rng, run_replicas
from .gartner import z_field
from .kernels import SpectralData, interval_kernel_spectral, solve_interval_spectrum
from .params import ModelParams

__all__ = [
    "SheGrid",
    "FieldPath",
    "TestFunction",
    "build_grid",
    "sample_she",
    "sample_she_ensemble",
    "mean_field",
    "second_moment",
    "neumann_cosine",
    "robin_test_function",
    "martingale_functionals",
    "martingale_diagnostics",
    "asep_mean_prediction",
    "asep_she_compare",
    "run_interval_ensemble",
    "lognormal_mean",
    "lognormal_second_moment",
    "lognormal_sampler",
]


@dataclass(frozen=True)
class SheGrid:
    """Uniform grid on [0, length] with M cells and Robin slopes (A, B).

    Stability of the noise term requires dt <= dX^2 / 2 (the propagator
    itself is exact).  micro_time(T) = T / dX^2 converts a macroscopic time
    to the grid Laplacian's clock.
    """

    length: float
    m: int
    dt: float
    robin_a: float
    robin_b: float
    spec: SpectralData = field(repr=False)

    @property
    def dx(self) -> float:
        return self.length / self.m

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.m + 1)

    def micro_time(self, T: float) -> float:
        return T / (self.dx * self.dx)

    def propagator(self, T: float) -> np.ndarray:
        """Exact Robin propagator over macroscopic time T on the grid."""
        return interval_kernel_spectral(self.spec, self.micro_time(T)).values


def build_grid(length: float, m: int, robin_a: float, robin_b: float,
               dt: float | None = None) -> SheGrid:
    if m < 8:
        raise ValueError("grid needs at least 8 cells")
    dx = length / m
    if dt is None:
        dt = dx * dx / 2.0
    if dt > dx * dx / 2.0 + 1e-15:
        raise ValueError(f"dt = {dt} violates the stability margin dX^2/2 = {dx*dx/2}")
    mu_a = 1.0 - dx * robin_a
    mu_b = 1.0 - dx * robin_b
    if not (0.0 < mu_a <= 1.0 and 0.0 < mu_b <= 1.0):
        raise ValueError("grid too coarse for the Robin slopes (mu outside (0,1])")
    spec = solve_interval_spectrum(m, mu_a, mu_b)
    return SheGrid(length=length, m=m, dt=dt, robin_a=robin_a, robin_b=robin_b, spec=spec)


@dataclass
class FieldPath:
    """Solution samples at the requested output times (rows)."""

    times: np.ndarray
    values: np.ndarray
    seed: object
    positivity_fault: bool = False


def _step_schedule(output_times, dt: float) -> list[list[float]]:
    """Per output segment, equal step sizes <= dt landing exactly on each time."""
    times = [0.0] + [float(t) for t in output_times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("output times must be nondecreasing")
    segments = []
    for a, b in zip(times, times[1:]):
        span = b - a
        if span <= 0:
            segments.append([])
            continue
        n = max(1, int(math.ceil(span / dt - 1e-12)))
        segments.append([span / n] * n)
    return segments


def sample_she(z0: np.ndarray, grid: SheGrid, seed, output_times,
               zero_noise: bool = False) -> FieldPath:
    """One Ito path of the multiplicative SHE on the grid.

    The noise multiplies the field before propagation (left-endpoint
    evaluation); each step applies the exact propagator for its own step
    size (steps are <= grid.dt and land exactly on the output times).  A
    step driving any site of 1 + xi below 0 marks the path as a positivity
    fault (counted by callers, never clamped).  With zero_noise=True the
    path reduces exactly to the deterministic mean flow.
    """
    z = np.asarray(z0, dtype=float).copy()
    if len(z) != grid.m + 1:
        raise ValueError("initial data does not match the grid")
    if np.any(z <= 0):
        raise ValueError("initial data must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else replica_rng(seed, 0)
    output_times = np.asarray(output_times, dtype=float)
    segments = _step_schedule(output_times, grid.dt)
    props: dict[float, np.ndarray] = {}
    out = np.empty((len(output_times), grid.m + 1))
    fault = False
    for k, seg in enumerate(segments):
        for h in seg:
            if h not in props:
                props[h] = grid.propagator(h)
            if zero_noise:
                z = props[h] @ z
            else:
                xi = rng.normal(0.0, math.sqrt(h / grid.dx), size=grid.m + 1)
                if np.any(xi <= -1.0):
                    fault = True
                z = props[h] @ (z * (1.0 + xi))
        out[k] = z
    return FieldPath(times=output_times, values=out, seed=seed, positivity_fault=fault)


def sample_she_ensemble(z0, grid: SheGrid, n_replicas: int, master_seed,
                        output_times, threads: int = 1) -> dict:
    """Moment accumulators over replicas; z0 may be an array or rng -> array sampler.

    Faulted replicas are excluded from the moments and counted; the fault
    rate must stay below 1e-3 at the default step size.
    """
    def task(i, rng):
        z0_i = z0(rng) if callable(z0) else z0
        return sample_she(z0_i, grid, rng, output_times)

    paths = run_replicas(task, n_replicas, master_seed, threads=threads)
    ok = [p for p in paths if not p.positivity_fault]
    faults = n_replicas - len(ok)
    stack = np.stack([p.values for p in ok])
    return {
        "times": np.asarray(output_times, dtype=float),
        "mean": stack.mean(axis=0),
        "second_moment": (stack ** 2).mean(axis=0),
        "std_error": stack.std(axis=0, ddof=1) / math.sqrt(len(ok)),
        "n_effective": len(ok),
        "fault_rate": faults / n_replicas,
    }


def mean_field(z0: np.ndarray, grid: SheGrid, T: float) -> np.ndarray:
    """E[Z_T] = P^R_T z0 (the stochastic convolution has zero mean)."""
    if T < 0:
        raise ValueError("T must be >= 0")
    if T == 0:
        return np.asarray(z0, dtype=float).copy()
    return grid.propagator(T) @ np.asarray(z0, dtype=float)


def second_moment(m2_0: np.ndarray, grid: SheGrid, T: float,
                  tol: float = 1e-8, max_sweeps: int = 50) -> np.ndarray:
    """Two-point function m2(T; X, X') by Picard iteration of the Duhamel form.

    m2 = (P (x) P) m2(0) + int_0^T (P_{T-S} (x) P_{T-S}) diag(m2(S)) dS / dX,
    discretized on the solver's time grid; each sweep re-propagates the
    diagonal source from the previous sweep and stops when two sweeps agree
    below tol in max norm.
    """
    if grid.m > 128:
        raise ValueError("second moment restricted to grids with M <= 128")
    m2_0 = np.asarray(m2_0, dtype=float)
    (seg,) = _step_schedule([T], grid.dt)
    if not seg:
        return m2_0.copy()
    h = seg[0]
    steps = len(seg)
    P = grid.propagator(h)
    lam = h / grid.dx
    homo = [m2_0]
    for _ in range(steps):
        homo.append(P @ homo[-1] @ P.T)
    m2 = [m.copy() for m in homo]
    for _sweep in range(max_sweeps):
        prev_final = m2[-1].copy()
        integ = np.zeros_like(m2_0)
        new = [homo[0]]
        for s in range(steps):
            integ = P @ (integ + lam * np.diag(np.diag(m2[s]))) @ P.T
            new.append(homo[s + 1] + integ)
        m2 = new
        if float(np.max(np.abs(m2[-1] - prev_final))) < tol:
            return m2[-1]
    raise RuntimeError(f"second-moment iteration did not converge in {max_sweeps} sweeps")


# ---------------------------------------------------------------------------
# test functions

@dataclass(frozen=True)
class TestFunction:
    """Smooth test function with the Robin-compatible boundary slopes.

    phi'(0) = A phi(0), and phi'(1) = -B phi(1) on the interval; slope
    compliance is validated by high-order one-sided differences on a fine
    auxiliary grid.
    """

    fn: object
    robin_a: float
    robin_b: float | None
    label: str = ""

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def boundary_slope_errors(self, length: float = 1.0, h: float = 2e-4) -> tuple:
        def one_sided(x0, sgn):
            xs = x0 + sgn * h * np.arange(5)
            f = self(xs)
            d = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
            return sgn * d
        left = abs(one_sided(0.0, +1) - self.robin_a * float(self(0.0)))
        if self.robin_b is None:
            return (left,)
        right = abs(one_sided(length, -1) + self.robin_b * float(self(length)))
        return (left, right)

    def validate(self, length: float = 1.0, tol: float = 1e-8) -> None:
        errs = self.boundary_slope_errors(length)
        if max(errs) > tol:
            raise ValueError(f"test function violates boundary slopes: {errs}")


def neumann_cosine(k: int) -> TestFunction:
    """cos(k pi X) on [0, 1]: the A = B = 0 test-function family."""
    return TestFunction(fn=(lambda x, k=k: np.cos(k * math.pi * x)),
                        robin_a=0.0, robin_b=0.0, label=f"cos({k} pi X)")


def robin_test_function(A: float, B: float, k: int) -> TestFunction:
    """k-th trigonometric mode c1 cos(w X) + c2 sin(w X) matching both slopes.

    The frequencies solve the continuum secular equation
    (w^2 - AB) sin w = (A + B) w cos w, bracketed inside (k pi, (k+1) pi).
    """
    from scipy.optimize import brentq
    if A == 0.0 and B == 0.0:
        return neumann_cosine(k)

    def secular(w):
        return (w * w - A * B) * math.sin(w) - (A + B) * w * math.cos(w)

    lo, hi = k * math.pi + 1e-9, (k + 1) * math.pi - 1e-9
    if secular(lo) * secular(hi) > 0:
        raise ValueError(f"no Robin mode bracketed in (k pi, (k+1) pi) for k={k}")
    w = brentq(secular, lo, hi, xtol=1e-14)
    c1, c2 = 1.0, A / w

    def fn(x, w=w, c1=c1, c2=c2):
        return c1 * np.cos(w * x) + c2 * np.sin(w * x)

    tf = TestFunction(fn=fn, robin_a=A, robin_b=B, label=f"robin mode {k}")
    tf.validate()
    return tf


# ---------------------------------------------------------------------------
# microscopic martingale functionals

def martingale_functionals(traj: Trajectory, params: ModelParams,
                           phi: TestFunction, T: float) -> tuple[float, float]:
    """(N_T(phi), quadratic compensator gap) for one replica.

    N_T(phi) = (Z_t, phi)_eps - (Z_0, phi)_eps - (1/2) int_0^t (Lap Z_s, phi)_eps ds
    at t = eps^{-2} T, with the Robin-ghost Laplacian; the gap is
    N_T^2 - eps^2 int (Z_s^2, phi^2)_eps ds.  Time integrals come from the
    trajectory's exact exponential accumulators when present, else from a
    trapezoid over snapshots whose spacing must resolve eps^{-2} 1e-3.
    """
    eps = params.epsilon
    t_micro = T / (eps * eps)
    times = np.asarray(traj.sample_times)
    i_T = int(np.argmin(np.abs(times - t_micro)))
    if abs(times[i_T] - t_micro) > 1e-6 * max(t_micro, 1.0):
        raise ValueError(f"time eps^-2 T = {t_micro} not among trajectory samples")
    i_0 = int(np.argmin(np.abs(times - 0.0)))
    if times[i_0] != 0.0:
        raise ValueError("trajectory must include a sample at time 0")
    n_heights = len(traj.heights[0])
    xs = np.arange(n_heights)
    w = phi(eps * xs)
    w2 = w * w

    def pair(vec, weights):
        return eps * float(weights @ vec)

    def lap_weights(weights):
        # (Lap Z, phi) = sum_x phi(x) [Z(x-1) + Z(x+1) - 2 Z(x)] with ghosts
        out = np.zeros(n_heights)
        out += -2.0 * weights
        out[1:] += weights[:-1]    # Z(x) appearing as (x+1)-neighbor of x
        out[:-1] += weights[1:]
        out[0] += params.mu_a * weights[0]
        out[-1] += params.mu_b * weights[-1]
        return out

    z_T = z_field(traj.height_field(i_T), times[i_T], params).z
    z_0 = z_field(traj.height_field(i_0), 0.0, params).z

    lw = lap_weights(w)
    if traj.z_int is not None:
        theta, rho = traj.exp_integral_constants
        if abs(theta + params.lam) > 1e-12 or abs(rho - params.nu) > 1e-12:
            raise ValueError("trajectory integrals tracked with different constants")
        int_lap = eps * float(lw @ traj.z_int[i_T])
        int_z2 = eps * float(w2 @ traj.z2_int[i_T])
    else:
        dt_max = float(np.max(np.diff(times[:i_T + 1]))) if i_T > 0 else 0.0
        if dt_max > 1e-3 / (eps * eps) + 1e-9:
            raise ValueError("snapshot spacing too coarse to resolve the time integral")
        zs = np.stack([z_field(traj.height_field(i), times[i], params).z
                       for i in range(i_T + 1)])
        vals_lap = zs @ lw * eps
        vals_z2 = (zs ** 2) @ w2 * eps
        int_lap = float(np.trapezoid(vals_lap, times[:i_T + 1]))
        int_z2 = float(np.trapezoid(vals_z2, times[:i_T + 1]))

    n_T = pair(z_T, w) - pair(z_0, w) - 0.5 * int_lap
    gap = n_T * n_T - eps * eps * int_z2
    return n_T, gap


def martingale_diagnostics(trajs: list[Trajectory], params: ModelParams,
                           phis: list[TestFunction], T: float) -> list[dict]:
    """Ensemble means of N_T(phi) and of the quadratic gap, with z-scores."""
    out = []
    for phi in phis:
        vals = np.array([martingale_functionals(tr, params, phi, T) for tr in trajs])
        n_vals, gaps = vals[:, 0], vals[:, 1]
        m = len(trajs)
        out.append({
            "phi": phi.label,
            "T": T,
            "n_replicas": m,
            "mean_N": float(n_vals.mean()),
            "se_N": float(n_vals.std(ddof=1) / math.sqrt(m)),
            "z_N": float(abs(n_vals.mean()) / (n_vals.std(ddof=1) / math.sqrt(m))),
            "mean_gap": float(gaps.mean()),
            "se_gap": float(gaps.std(ddof=1) / math.sqrt(m)),
            "z_gap": float(abs(gaps.mean()) / (gaps.std(ddof=1) / math.sqrt(m))),
        })
    return out


# ---------------------------------------------------------------------------
# ASEP vs SHE comparison

def lognormal_mean(x: np.ndarray) -> np.ndarray:
    """E Z0(X) = e^{X/2} for the Brownian exponential matched to Bernoulli(1/2)."""
    return np.exp(0.5 * np.asarray(x, dtype=float))


def lognormal_second_moment(x: np.ndarray) -> np.ndarray:
    """E[Z0(X) Z0(X')] = exp((X + X')/2 + min(X, X'))."""
    x = np.asarray(x, dtype=float)
    return np.exp(0.5 * (x[:, None] + x[None, :]) + np.minimum(x[:, None], x[None, :]))


def lognormal_sampler(grid: SheGrid):
    """Per-replica Z0(X) = exp(W(X)) with W a standard Brownian path on the grid."""
    def draw(rng: np.random.Generator) -> np.ndarray:
        incr = rng.normal(0.0, math.sqrt(grid.dx), size=grid.m)
        w = np.concatenate([[0.0], np.cumsum(incr)])
        return np.exp(w)
    return draw


def asep_mean_prediction(spec: SpectralData, t_micro: float, params: ModelParams,
                         e_z0: np.ndarray) -> np.ndarray:
    """Exact discrete mean E Z_t = p^R_t E Z_0 (integrated microscopic heat equation)."""
    return interval_kernel_spectral(spec, t_micro).values @ e_z0


def run_interval_ensemble(n: int, slope_a: float, slope_b: float, T: float,
                          n_replicas: int, master_seed, threads: int = 1,
                          keep_trajectories: bool = False,
                          var_batches: int = 10) -> dict:
    """Bernoulli(1/2)-start interval ensemble with scaled-field moments at T.

    Returns per-height-site arrays: empirical mean/variance of Z at the
    microscopic time eps^{-2} T, their standard errors (variance errors via
    batch means), and the exact kernel prediction of the mean,
    E Z_t = p^R_t cosh(sqrt(eps))^x.  Trajectories carry time-0 and time-T
    snapshots plus exact exponential integrals, so martingale functionals
    can be evaluated from the same runs.
    """
    from .engine import Lattice, bernoulli_eta, simulate
    from .params import ScalingParams, build_params

    eps = 1.0 / n
    params = build_params(ScalingParams.interval(n, slope_a, slope_b))
    lattice = Lattice.interval(n)
    horizon = T / (eps * eps)
    spec = solve_interval_spectrum(n, params.mu_a, params.mu_b)

    def task(i, rng):
        init = bernoulli_eta(n, rng)
        return simulate(init, params, lattice, horizon, [0.0, horizon], rng,
                        track_exp_integrals=(-params.lam, params.nu))

    trajs = run_replicas(task, n_replicas, master_seed, threads=threads)
    zs = np.stack([z_field(tr.height_field(1), horizon, params).z for tr in trajs])
    e_z0 = np.cosh(math.sqrt(eps)) ** np.arange(n + 1)
    pred = asep_mean_prediction(spec, horizon, params, e_z0)
    m = zs.shape[0]
    nb = max(1, min(var_batches, m // 2))
    if nb >= 2:
        bvars = np.stack([zs[b::nb].var(axis=0, ddof=1) for b in range(nb)])
        se_var = bvars.std(axis=0, ddof=1) / math.sqrt(nb)
    else:
        se_var = np.full(n + 1, np.nan)
    out = {
        "eps": eps,
        "n": n,
        "T": T,
        "params": params,
        "spec": spec,
        "mean": zs.mean(axis=0),
        "var": zs.var(axis=0, ddof=1),
        "se_mean": zs.std(axis=0, ddof=1) / math.sqrt(m),
        "se_var": se_var,
        "mean_prediction": pred,
        "n_replicas": m,
    }
    if keep_trajectories:
        out["trajectories"] = trajs
    return out


def asep_she_compare(ensembles: dict, she_grid: SheGrid, T: float,
                     X: np.ndarray, m2_0=None, z0_mean=None) -> list[dict]:
    """Moment-gap table between scaled ASEP ensembles and the SHE oracles.

    ensembles maps eps -> dict with keys mean, var, se_mean, se_var, x_grid
    (per macroscopic X), built by the caller from replica Z fields.  The SHE
    side is deterministic: mean_field and second_moment with matched
    (lognormal, by default) initial data.
    """
    z0_mean = z0_mean if z0_mean is not None else lognormal_mean(she_grid.x)
    m2_0 = m2_0 if m2_0 is not None else lognormal_second_moment(she_grid.x)
    she_mean = mean_field(z0_mean, she_grid, T)
    she_m2 = second_moment(m2_0, she_grid, T)
    she_var = np.diag(she_m2) - she_mean ** 2
    she_mean_at = np.interp(X, she_grid.x, she_mean)
    she_var_at = np.interp(X, she_grid.x, she_var)
    rows = []
    for eps in sorted(ensembles, reverse=True):
        e = ensembles[eps]
        for j, xv in enumerate(X):
            rows.append({
                "epsilon": eps, "T": T, "X": float(xv),
                "asep_mean": float(e["mean"][j]),
                "she_mean": float(e["mean_prediction"][j]),
                "mean_gap": float(abs(e["mean"][j] - e["mean_prediction"][j])),
                "asep_var": float(e["var"][j]),
                "she_var": float(she_var_at[j]),
                "var_gap": float(abs(e["var"][j] - she_var_at[j])),
                "mc_sigma": float(e["se_mean"][j]),
                "var_sigma": float(e["se_var"][j]),
                "she_mean_continuum": float(she_mean_at[j]),
            })
    return rows

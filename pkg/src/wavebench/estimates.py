"""Empirical verification harness for the quantitative estimates.

Each check samples random configurations from a seeded spec, computes the
two sides of one inequality (or the defining quantities of one geometric
statement), and reports ratio statistics against a declared bracket.  Hard
inequalities with exact constants admit zero violations; soft two-sided
comparisons assert only uniform brackets and trends, with every implicit
constant measured and reported rather than assumed.

Checks are deterministic given (spec, seed): each trial draws from an RNG
seeded by the pair (seed, trial index).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError, RangeError
from .grids import (
    FrequencyGrid,
    SpaceTimeField,
    SpatialField,
    TimeGrid,
    mixed_norm,
)
from .multipliers import (
    adapted_conjugate,
    cap_cover,
    cap_symbols,
    cube_cover,
    cube_symbol,
    littlewood_paley,
)
from .variation import (
    Partition,
    StepFunction,
    dual_pairing,
    make_atom,
    p_variation,
    up_lower_bound,
    s_norm_proxy,
    vp_norm,
)
from .wavemaps import duhamel_pair, free_flow


DEFAULT_BRACKET = (0.05, 20.0)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """The declared stream-splitting rule: one child stream per trial."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


@dataclass
class SamplingSpec:
    """Knobs for one check: dimension, dyadic scales, counts, seed, window."""

    dimension: int = 2
    scales: dict = dc_field(default_factory=dict)
    samples: int = 100
    seed: int = 0
    window: float = 4.0
    bracket: tuple = DEFAULT_BRACKET
    options: dict = dc_field(default_factory=dict)

    def scale(self, key: str, default: float) -> float:
        return float(self.scales.get(key, default))

    def opt(self, key: str, default):
        return self.options.get(key, default)


@dataclass
class EstimateReport:
    """Outcome of one check: ratio statistics, fitted slope, verdict."""

    estimate_id: str
    spec: dict
    stats: dict
    bracket: tuple
    verdict: str  # "pass" | "fail" | "infeasible"
    slope: float = None
    details: dict = dc_field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "id": self.estimate_id,
            "spec": self.spec,
            "stats": self.stats,
            "bracket": list(self.bracket),
            "slope": self.slope,
            "verdict": self.verdict,
            "details": self.details,
        }


def _ratio_stats(ratios: np.ndarray) -> dict:
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        return {"count": 0}
    return {
        "count": int(ratios.size),
        "min": float(np.min(ratios)),
        "median": float(np.median(ratios)),
        "max": float(np.max(ratios)),
    }


def _spec_dict(spec: SamplingSpec) -> dict:
    return {
        "dimension": spec.dimension,
        "scales": {k: float(v) for k, v in spec.scales.items()},
        "samples": spec.samples,
        "seed": spec.seed,
        "window": spec.window,
        "bracket": list(spec.bracket),
        "options": {k: (list(v) if isinstance(v, (tuple, list)) else v)
                    for k, v in spec.options.items()},
    }


# ---------------------------------------------------------------------------
# resonance geometry (pure arithmetic, no grid)
# ---------------------------------------------------------------------------

def _unit_vectors(n: int, count: int, rng) -> np.ndarray:
    v = rng.normal(size=(count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _rotate_towards(omega: np.ndarray, theta: np.ndarray, rng) -> np.ndarray:
    """Unit vectors at angle theta from each row of omega."""
    n = omega.shape[1]
    perp = rng.normal(size=omega.shape)
    perp -= np.sum(perp * omega, axis=1, keepdims=True) * omega
    norms = np.linalg.norm(perp, axis=1, keepdims=True)
    # degenerate draws are measure zero; renormalize defensively
    perp = perp / np.where(norms > 0, norms, 1.0)
    th = theta[:, None]
    return np.cos(th) * omega + np.sin(th) * perp


def _angle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    dot = np.sum(a * b, axis=1)
    return np.arccos(np.clip(dot / (na * nb), -1.0, 1.0))


def _sample_resonant(lam0, lam1, lam2, d, mod_frac, n, count, rng):
    """Construct (tau, xi, tau', eta) with annulus, modulation, and output
    band constraints.  Returns a dict of exact per-sample quantities."""
    r1 = lam1 * (1.0 + rng.random(count))
    r2 = lam2 * (1.0 + rng.random(count))
    s1 = rng.choice([-1.0, 1.0], size=count)
    s2 = rng.choice([-1.0, 1.0], size=count)
    d1 = mod_frac * d * (2.0 * rng.random(count) - 1.0)
    d2 = mod_frac * d * (2.0 * rng.random(count) - 1.0)
    tau1 = s1 * (r1 + d1)
    tau2 = s2 * (r2 + d2)
    sum_abs = np.abs(tau1 + tau2)
    target = d * (0.5 + 1.5 * rng.random(count))
    side = rng.choice([-1.0, 1.0], size=count)
    r0 = sum_abs - side * target
    feas = (
        (r0 >= lam0)
        & (r0 < 2.0 * lam0)
        & (r0 <= r1 + r2)
        & (r0 >= np.abs(r1 - r2))
    )
    if not np.any(feas):
        return None
    r0, r1, r2 = r0[feas], r1[feas], r2[feas]
    tau1, tau2 = tau1[feas], tau2[feas]
    m = r0.size
    cos_t = np.clip((r0 ** 2 - r1 ** 2 - r2 ** 2) / (2.0 * r1 * r2), -1.0, 1.0)
    theta = np.arccos(cos_t)
    omega = _unit_vectors(n, m, rng)
    xi = r1[:, None] * omega
    eta = r2[:, None] * _rotate_towards(omega, theta, rng)
    sig = xi + eta
    mod_out = np.abs(np.abs(tau1 + tau2) - np.linalg.norm(sig, axis=1))
    good = (mod_out >= d / 2.0) & (mod_out <= 2.0 * d)
    if not np.any(good):
        return None
    return {
        "xi": xi[good],
        "eta": eta[good],
        "tau1": tau1[good],
        "tau2": tau2[good],
        "sig": sig[good],
        "mod_out": mod_out[good],
    }


def _dyadic_triples(base: float, octaves: int):
    vals = [base * 2.0 ** j for j in range(octaves)]
    for l0 in vals:
        for l1 in vals:
            for l2 in vals:
                yield l0, l1, l2


def check_resonance(spec: SamplingSpec) -> EstimateReport:
    """Angle geometry of near-cone interactions.

    Low-modulation branch: the angle between sgn(tau) xi and sgn(tau') eta
    tracks (d lam0 / (lam1 lam2))^{1/2}, with the two companion angles
    bounded by the matching expressions.  High branch (d >> min scale): the
    only feasible configurations have equal temporal signs, angle of order
    one, and output modulation at the top scale.
    """
    lo, hi = spec.bracket
    octaves = int(spec.opt("octaves", 3))
    base = spec.scale("lambda_base", 1.0)
    per_triple = int(spec.opt("per_triple", spec.samples))
    batch = int(spec.opt("batch", 1 << 15))
    budget = int(spec.opt("budget", 10 ** 6))
    n = spec.dimension

    ratios_main = []
    sup_companion = 0.0
    infeasible_low = []
    high_sign_ok = True
    high_angles = []
    high_mod_over_max = []
    infeasible_high = []

    trial = 0
    for l0, l1, l2 in _dyadic_triples(base, octaves):
        mu = min(l0, l1, l2)
        # low branch: d below mu by the declared separation factor
        d = mu / 8.0
        rng = trial_rng(spec.seed, trial)
        trial += 1
        found = 0
        spent = 0
        while found < per_triple and spent < budget:
            out = _sample_resonant(l0, l1, l2, d, 1.0 / 8.0, n, batch, rng)
            spent += batch
            if out is None:
                continue
            xi, eta = out["xi"], out["eta"]
            tau1, tau2 = out["tau1"], out["tau2"]
            sig, mod_out = out["sig"], out["mod_out"]
            r0 = np.linalg.norm(sig, axis=1)
            r1 = np.linalg.norm(xi, axis=1)
            r2 = np.linalg.norm(eta, axis=1)
            ang = _angle(np.sign(tau1)[:, None] * xi, np.sign(tau2)[:, None] * eta)
            predicted = np.sqrt(mod_out * r0 / (r1 * r2))
            keep = predicted > 0
            ratios_main.append(ang[keep] / predicted[keep])
            s_out = np.sign(tau1 + tau2)
            ang1 = _angle(s_out[:, None] * sig, np.sign(tau1)[:, None] * xi)
            ang2 = _angle(s_out[:, None] * sig, np.sign(tau2)[:, None] * eta)
            pred1 = np.sqrt(mod_out * r2 / (r0 * r1))
            pred2 = np.sqrt(mod_out * r1 / (r0 * r2))
            sup_companion = max(
                sup_companion,
                float(np.max(ang1[keep] / pred1[keep], initial=0.0)),
                float(np.max(ang2[keep] / pred2[keep], initial=0.0)),
            )
            found += int(np.sum(keep))
        if found == 0:
            infeasible_low.append((l0, l1, l2))

        # high branch: d far above mu
        d_high = 8.0 * mu
        rng = trial_rng(spec.seed, trial)
        trial += 1
        found_high = 0
        spent = 0
        while found_high < per_triple and spent < budget:
            out = _sample_resonant(l0, l1, l2, d_high, 1.0 / 8.0, n, batch, rng)
            spent += batch
            if out is None:
                continue
            same = np.sign(out["tau1"]) == np.sign(out["tau2"])
            if np.any(~same):
                high_sign_ok = False
            high_angles.append(_angle(out["xi"], out["eta"]))
            lam_max = max(l0, l1, l2)
            high_mod_over_max.append(out["mod_out"] / lam_max)
            found_high += out["xi"].shape[0]
        if found_high == 0:
            infeasible_high.append((l0, l1, l2))

    ratios = np.concatenate(ratios_main) if ratios_main else np.array([])
    angles = np.concatenate(high_angles) if high_angles else np.array([])
    mod_ratio = np.concatenate(high_mod_over_max) if high_mod_over_max else np.array([])
    ok = ratios.size > 0 and lo <= np.min(ratios) and np.max(ratios) <= hi
    ok = ok and sup_companion <= hi
    if angles.size:
        ok = ok and high_sign_ok and np.min(angles) >= lo and np.max(mod_ratio) <= hi \
            and np.min(mod_ratio) >= lo
    stats = _ratio_stats(ratios)
    stats["companion_sup"] = sup_companion
    return EstimateReport(
        estimate_id="resonance-angle",
        spec=_spec_dict(spec),
        stats=stats,
        bracket=spec.bracket,
        verdict="pass" if ok else "fail",
        details={
            "low_branch_infeasible": [list(t) for t in infeasible_low],
            "high_branch_infeasible": [list(t) for t in infeasible_high],
            "high_branch_equal_signs": bool(high_sign_ok),
            "high_branch_angle_stats": _ratio_stats(angles),
            "high_branch_mod_over_lambda_max": _ratio_stats(mod_ratio),
        },
    )


def check_resonance_lower(spec: SamplingSpec) -> EstimateReport:
    """Sum of the three pairwise angles against (d / min scale)^{1/2}."""
    lo, hi = spec.bracket
    octaves = int(spec.opt("octaves", 3))
    base = spec.scale("lambda_base", 1.0)
    per_triple = int(spec.opt("per_triple", spec.samples))
    batch = int(spec.opt("batch", 1 << 15))
    budget = int(spec.opt("budget", 10 ** 6))
    n = spec.dimension
    sup_ratio = 0.0
    count = 0
    infeasible = []
    trial = 10_000
    for l0, l1, l2 in _dyadic_triples(base, octaves):
        mu = min(l0, l1, l2)
        d = mu / 4.0
        rng = trial_rng(spec.seed, trial)
        trial += 1
        found = 0
        spent = 0
        while found < per_triple and spent < budget:
            out = _sample_resonant(l0, l1, l2, d, 1.0, n, batch, rng)
            spent += batch
            if out is None:
                continue
            # here every modulation is only required to be <= d
            mod_ok = out["mod_out"] <= d
            if not np.any(mod_ok):
                continue
            xi = out["xi"][mod_ok]
            eta = out["eta"][mod_ok]
            sig = out["sig"][mod_ok]
            tau1 = out["tau1"][mod_ok]
            tau2 = out["tau2"][mod_ok]
            s_out = np.sign(tau1 + tau2)
            total = (
                _angle(np.sign(tau1)[:, None] * xi, np.sign(tau2)[:, None] * eta)
                + _angle(np.sign(tau1)[:, None] * xi, s_out[:, None] * sig)
                + _angle(np.sign(tau2)[:, None] * eta, s_out[:, None] * sig)
            )
            mu_exact = np.minimum(
                np.linalg.norm(sig, axis=1),
                np.minimum(np.linalg.norm(xi, axis=1), np.linalg.norm(eta, axis=1)),
            )
            ratio = total / np.sqrt(d / mu_exact)
            sup_ratio = max(sup_ratio, float(np.max(ratio)))
            found += ratio.size
            count += ratio.size
        if found == 0:
            infeasible.append((l0, l1, l2))
    ok = count > 0 and sup_ratio <= hi
    return EstimateReport(
        estimate_id="resonance-lower",
        spec=_spec_dict(spec),
        stats={"count": count, "sup": sup_ratio},
        bracket=spec.bracket,
        verdict="pass" if ok else "fail",
        details={"infeasible": [list(t) for t in infeasible]},
    )


# ---------------------------------------------------------------------------
# bilinear estimates on the grid
# ---------------------------------------------------------------------------

def _bilinear_grid(spec: SamplingSpec) -> FrequencyGrid:
    n = spec.dimension
    N = int(spec.opt("grid_points", 128))
    L = float(spec.opt("period", 4.0 * np.pi))
    return FrequencyGrid(n, N, L)


def _modes_in_ball(grid: FrequencyGrid, center: np.ndarray, radius: float) -> list:
    """Lattice modes within the given frequency ball."""
    xi = np.stack(grid.xi_components, axis=-1)
    dist = np.linalg.norm(xi - center, axis=-1)
    return list(zip(*np.nonzero(dist < radius)))


def _random_ball_field(grid, modes, rng) -> SpatialField:
    vals = np.zeros((1,) + grid.shape, dtype=complex)
    spec_arr = np.zeros(grid.shape, dtype=complex)
    coeffs = rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))
    for c, m in zip(coeffs, modes):
        spec_arr[m] = c
    vals[0] = np.fft.ifftn(spec_arr)
    f = SpatialField(grid, vals)
    norm = f.l2()
    return SpatialField(grid, f.values / norm)


def _free_wave_window(f: SpatialField, tg: TimeGrid, sign: int) -> SpaceTimeField:
    """e^{-sign it|grad|} f over the window, one batched transform."""
    grid = f.grid
    axes = tuple(range(1, grid.n + 1))
    fhat = np.fft.fftn(f.values, axes=axes)[np.newaxis]
    xi = grid.xi_norm[np.newaxis, np.newaxis]
    t = tg.times.reshape((tg.M,) + (1,) * (grid.n + 1))
    phases = np.exp(-1j * sign * t * xi)
    ax2 = tuple(range(2, grid.n + 2))
    return SpaceTimeField(tg, grid, np.fft.ifftn(phases * fhat, axes=ax2))


def _window_l2(u: SpaceTimeField) -> float:
    return mixed_norm(u, 2.0)


def bilinear_supports(grid: FrequencyGrid, lam: float, spec: SamplingSpec):
    """The two transversal frequency balls: unit scale around e1, scale lam
    around lam e2, with radii resolved on the lattice (declared widening of
    the 1/100 aperture to the grid scale)."""
    n = grid.n
    e1 = np.zeros(n)
    e1[0] = 1.0
    e2 = np.zeros(n)
    e2[min(1, n - 1)] = 1.0
    r1 = max(lam_aperture(1.0, spec), 1.1 * grid.xi_min)
    r2 = max(lam_aperture(lam, spec), 1.1 * grid.xi_min)
    if (lam + r2) > grid.xi_max:
        raise RangeError(f"scale {lam} plus aperture exceeds the grid range")
    return (e1, r1), (lam * e2, r2)


def lam_aperture(lam: float, spec: SamplingSpec) -> float:
    return float(spec.opt("aperture", 0.125)) * lam


def check_bilinear_free(spec: SamplingSpec) -> EstimateReport:
    """Window L2 norm of products of transversal free waves against the
    product of the data norms, swept over the high scale."""
    grid = _bilinear_grid(spec)
    lams = spec.opt("lambdas", (1.0, 2.0, 4.0, 8.0, 16.0))
    per_lam = int(spec.opt("per_lambda", 50))
    M = int(spec.opt("time_samples", 257))
    tg = TimeGrid(0.0, spec.window / (M - 1), M)
    sign = int(spec.opt("sign", -1))
    spread_limit = float(spec.opt("spread_limit", 8.0))
    ratios_by_lam = {}
    trial = 0
    for lam in lams:
        (c1, r1), (c2, r2) = bilinear_supports(grid, lam, spec)
        modes1 = _modes_in_ball(grid, c1, r1)
        modes2 = _modes_in_ball(grid, c2, r2)
        rs = []
        for _ in range(per_lam):
            rng = trial_rng(spec.seed, trial)
            trial += 1
            f = _random_ball_field(grid, modes1, rng)
            g = _random_ball_field(grid, modes2, rng)
            u = _free_wave_window(f, tg, +1)
            v = _free_wave_window(g, tg, sign)
            uv = SpaceTimeField(tg, grid, u.values * v.values)
            rs.append(_window_l2(uv) / (f.l2() * g.l2()))
        ratios_by_lam[float(lam)] = rs
    allr = np.concatenate([np.asarray(v) for v in ratios_by_lam.values()])
    spread = float(np.max(allr) / np.min(allr))
    ok = spread < spread_limit
    stats = _ratio_stats(allr)
    stats["spread"] = spread
    return EstimateReport(
        estimate_id="bilinear-free",
        spec=_spec_dict(spec),
        stats=stats,
        bracket=(0.0, spread_limit),
        verdict="pass" if ok else "fail",
        details={"per_lambda": {str(k): _ratio_stats(np.asarray(v)) for k, v in ratios_by_lam.items()}},
    )


def _atomic_wave(grid, tg, modes, pieces, exponent, sign, rng):
    """Random atomic wave: per-interval free waves, l^exponent normalization."""
    cuts = np.sort(rng.choice(np.arange(1, tg.M - 1), size=pieces - 1, replace=False)) if pieces > 1 else np.array([], dtype=int)
    bounds = np.concatenate([[0], cuts, [tg.M]]).astype(int)
    vals = np.empty((tg.M, 1) + grid.shape, dtype=complex)
    piece_norms = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        f = _random_ball_field(grid, modes, rng)
        scale = np.exp(rng.normal())
        f = SpatialField(grid, scale * f.values)
        sub = TimeGrid(tg.times[a], tg.dt, b - a)
        vals[a:b] = _free_wave_window(f, sub, sign).values
        piece_norms.append(f.l2())
    norm = float(np.sum(np.asarray(piece_norms) ** exponent) ** (1.0 / exponent))
    return SpaceTimeField(tg, grid, vals / norm), 1.0


def check_bilinear_atomic(spec: SamplingSpec, a: float = 2.0, b: float = 2.0) -> EstimateReport:
    """Product bound for atomic waves with transversal supports.

    The normalized ratio divides out the theorem scaling
    lam^{(n+1)(1/2 - 1/a)}; the fitted slope of the unnormalized ratio over
    the scale sweep is compared against that exponent plus a declared margin.
    """
    n = spec.dimension
    if not (1.0 / (n + 1) < 1.0 / b <= 1.0 / a <= 0.5):
        raise ConfigError(f"exponents outside the admissible range: a={a}, b={b}")
    if 1.0 / a + 1.0 / b < 0.5:
        raise ConfigError("exponent pair violates 1/a + 1/b >= 1/2")
    grid = _bilinear_grid(spec)
    lams = spec.opt("lambdas", (2.0, 4.0, 8.0, 16.0))
    per_lam = int(spec.opt("per_lambda", 20))
    pieces = int(spec.opt("pieces", 4))
    M = int(spec.opt("time_samples", 257))
    tg = TimeGrid(0.0, spec.window / (M - 1), M)
    sign = int(spec.opt("sign", -1))
    exponent = (n + 1) * (0.5 - 1.0 / a)
    margin = float(spec.opt("slope_margin", 0.3))

    raw_by_lam = {}
    norm_ratios = []
    trial = 50_000
    for lam in lams:
        (c1, r1), (c2, r2) = bilinear_supports(grid, lam, spec)
        modes1 = _modes_in_ball(grid, c1, r1)
        modes2 = _modes_in_ball(grid, c2, r2)
        rs = []
        for _ in range(per_lam):
            rng = trial_rng(spec.seed, trial)
            trial += 1
            u, nu = _atomic_wave(grid, tg, modes1, pieces, a, +1, rng)
            v, nv = _atomic_wave(grid, tg, modes2, pieces, b, sign, rng)
            uv = SpaceTimeField(tg, grid, u.values * v.values)
            raw = _window_l2(uv) / (nu * nv)
            rs.append(raw)
            norm_ratios.append(raw / lam ** exponent)
        raw_by_lam[float(lam)] = rs
    logs = np.log2(np.array(sorted(raw_by_lam)))
    medians = np.log2([np.median(raw_by_lam[k]) for k in sorted(raw_by_lam)])
    slope, intercept = np.polyfit(logs, medians, 1)
    residual = float(np.sqrt(np.mean((medians - (slope * logs + intercept)) ** 2)))
    ok = slope <= exponent + margin
    stats = _ratio_stats(np.asarray(norm_ratios))
    return EstimateReport(
        estimate_id="bilinear-atomic",
        spec=_spec_dict(spec),
        stats=stats,
        bracket=(0.0, exponent + margin),
        verdict="pass" if ok else "fail",
        slope=float(slope),
        details={
            "exponents": {"a": a, "b": b, "theorem_exponent": exponent},
            "fit_residual": residual,
            "per_lambda_raw": {str(k): _ratio_stats(np.asarray(v)) for k, v in raw_by_lam.items()},
        },
    )


# ---------------------------------------------------------------------------
# variation-space estimates
# ---------------------------------------------------------------------------

def _banded_series(grid, tg, d, rng, spatial_band=None, c=1) -> SpaceTimeField:
    """Random series with temporal lattice frequencies in [d, 2d)."""
    taus = tg.tau_axis
    idx = np.nonzero((np.abs(taus) >= d) & (np.abs(taus) < 2.0 * d))[0]
    if idx.size == 0:
        raise RangeError(f"no temporal lattice modes in [{d}, {2*d})")
    pick = rng.choice(idx, size=min(6, idx.size), replace=False)
    vals = np.zeros((tg.M, c) + grid.shape, dtype=complex)
    for m in pick:
        f = rng.normal(size=(c,) + grid.shape) + 1j * rng.normal(size=(c,) + grid.shape)
        if spatial_band is not None:
            f = littlewood_paley(SpatialField(grid, f), spatial_band).values
        vals += np.exp(1j * taus[m] * tg.times)[(...,) + (np.newaxis,) * (grid.n + 1)] * f[np.newaxis]
    return SpaceTimeField(tg, grid, vals)


def check_besov(spec: SamplingSpec, p: float = 2.0) -> EstimateReport:
    """Variation against d^{1/p} times the L^p_t L^2_x norm on temporal bands."""
    lo, hi = spec.bracket
    grid = FrequencyGrid(spec.dimension, int(spec.opt("grid_points", 16)), 2.0 * np.pi)
    M = int(spec.opt("time_samples", 256))
    tg = TimeGrid(0.0, spec.window / M, M)
    octaves = int(spec.opt("octaves", 4))
    per_cell = int(spec.opt("per_cell", 50))
    d0 = spec.scale("d", 4.0 * tg.tau_spacing)
    ratios = {}
    trial = 100_000
    for j in range(octaves):
        d = d0 * 2.0 ** j
        rs = []
        for _ in range(per_cell):
            rng = trial_rng(spec.seed, trial)
            trial += 1
            u = _banded_series(grid, tg, d, rng)
            denom = d ** (1.0 / p) * mixed_norm(u, p)
            if denom == 0:
                continue
            rs.append(p_variation(u, p) / denom)
        ratios[d] = rs
    allr = np.concatenate([np.asarray(v) for v in ratios.values()])
    ok = allr.size > 0 and np.min(allr) >= lo and np.max(allr) <= hi
    return EstimateReport(
        estimate_id=f"besov-equivalence-p{p:g}",
        spec=_spec_dict(spec),
        stats=_ratio_stats(allr),
        bracket=spec.bracket,
        verdict="pass" if ok else "fail",
        details={"per_band": {f"{k:g}": _ratio_stats(np.asarray(v)) for k, v in ratios.items()},
                 "p": p},
    )


def _low_band_factor(grid, tg, d0, rng) -> SpaceTimeField:
    """Bounded factor with temporal spectrum inside (-d0, d0)."""
    taus = tg.tau_axis
    idx = np.nonzero(np.abs(taus) < d0)[0]
    vals = np.zeros((tg.M, 1) + grid.shape, dtype=complex)
    for m in idx:
        if rng.random() < 0.5 and taus[m] != 0:
            continue
        f = rng.normal(size=(1,) + grid.shape) + 1j * rng.normal(size=(1,) + grid.shape)
        sm = np.fft.ifftn(np.fft.fftn(f, axes=(1, 2)) * np.exp(-grid.xi_norm ** 2), axes=(1, 2))
        vals += np.exp(1j * taus[m] * tg.times)[:, None, None, None] * sm
    return SpaceTimeField(tg, grid, vals)


def check_highlow(spec: SamplingSpec, p: float = 2.0) -> EstimateReport:
    """Product stability: a low temporal band times a high-band V^p factor.

    Ratio vp(fg) / (sup|f| vp(g)) over random admissible pairs, plus the
    adapted-phase bilinear multiplier variant with the resonance condition
    checked on the sampled supports.
    """
    lo, hi = spec.bracket
    n = spec.dimension
    grid = FrequencyGrid(n, int(spec.opt("grid_points", 16)), 2.0 * np.pi)
    M = int(spec.opt("time_samples", 128))
    tg = TimeGrid(0.0, spec.window / M, M)
    d0 = spec.scale("band", max(1.0, 2.0 * tg.tau_spacing))
    pairs = int(spec.opt("pairs", spec.samples))
    ratios = []
    for trial in range(pairs):
        rng = trial_rng(spec.seed, 200_000 + trial)
        f = _low_band_factor(grid, tg, d0, rng)
        g = _banded_series(grid, tg, 4.0 * d0, rng)
        prod = SpaceTimeField(tg, grid, f.values * g.values)
        denom = float(np.max(np.abs(f.values))) * vp_norm(g, p)
        if denom == 0:
            continue
        ratios.append(vp_norm(prod, p) / denom)
    ratios = np.asarray(ratios)
    ok = ratios.size > 0 and np.max(ratios) <= hi

    adapted = _adapted_product_trials(spec, grid, tg, d0, p)
    ok = ok and adapted["max_ratio"] <= hi
    stats = _ratio_stats(ratios)
    stats["adapted_max"] = adapted["max_ratio"]
    return EstimateReport(
        estimate_id=f"high-low-product-p{p:g}",
        spec=_spec_dict(spec),
        stats=stats,
        bracket=spec.bracket,
        verdict="pass" if ok else "fail",
        details={"adapted": adapted, "p": p},
    )


def bilinear_multiplier(u: SpaceTimeField, v: SpaceTimeField, m_table: np.ndarray) -> SpaceTimeField:
    """Spatial bilinear multiplier with symbol m(xi - eta, eta) given as a
    table over flattened lattice pairs (first index xi - eta, second eta)."""
    grid = u.grid
    K = grid.N ** grid.n
    axes = tuple(range(2, u.values.ndim))
    U = np.fft.fftn(u.values, axes=axes).reshape(u.timegrid.M, K)
    V = np.fft.fftn(v.values, axes=axes).reshape(v.timegrid.M, K)
    # index arithmetic: flat index of (xi - eta) for each (xi, eta)
    coords = np.unravel_index(np.arange(K), grid.shape)
    out = np.zeros_like(U)
    for axis in range(grid.n):
        xi_c = coords[axis][:, None]
        eta_c = coords[axis][None, :]
        d = (xi_c - eta_c) % grid.N
        if axis == 0:
            acc = d
        else:
            acc = acc * grid.N + d
    diff_index = acc
    for j in range(u.timegrid.M):
        out[j] = np.sum(m_table * U[j][diff_index] * V[j][None, :], axis=1)
    res = np.fft.ifftn(out.reshape((u.timegrid.M, 1) + grid.shape), axes=axes)
    return SpaceTimeField(u.timegrid, grid, res)


def _adapted_product_trials(spec, grid, tg, d0, p) -> dict:
    """Wave-phase bilinear multiplier restricted to the low-resonance set."""
    n = grid.n
    xi_flat = np.stack([c.ravel() for c in grid.xi_components], axis=-1)
    K = xi_flat.shape[0]
    norm = np.linalg.norm
    # resonance |xi + eta| - |xi| - |eta| on all pairs (xi index, eta index)
    sums = xi_flat[:, None, :] + xi_flat[None, :, :]
    res = np.abs(norm(sums, axis=-1) - norm(xi_flat, axis=-1)[:, None]
                 - norm(xi_flat, axis=-1)[None, :])
    m_table = np.where(res <= 1.0, 1.0, 0.0)
    # the symbol norm: best of the two mixed lattice norms, with dual-cell measure
    cell = (2.0 * np.pi / grid.L) ** n
    norm_a = np.max(np.sqrt(np.sum(m_table ** 2, axis=1) * cell))
    norm_b = np.max(np.sqrt(np.sum(m_table ** 2, axis=0) * cell))
    m_norm = min(norm_a, norm_b)
    max_res_on_support = float(np.max(res[m_table > 0])) if np.any(m_table) else 0.0

    phase = grid.xi_norm
    trials = int(spec.opt("adapted_pairs", 12))
    worst = 0.0
    for k in range(trials):
        rng = trial_rng(spec.seed, 300_000 + k)
        h = _banded_series(grid, tg, 4.0 * d0, rng)
        u = adapted_conjugate(h, phase, -1)  # e^{-it|xi|} h: high adapted modulation
        w = _low_band_factor(grid, tg, d0, rng)
        v = adapted_conjugate(w, phase, -1)
        prod = bilinear_multiplier(u, v, m_table)
        nu = vp_norm(adapted_conjugate(u, phase, +1), p)
        nv = vp_norm(adapted_conjugate(v, phase, +1), p)
        np0 = vp_norm(adapted_conjugate(prod, phase, +1), p)
        denom = m_norm * nu * nv
        if denom > 0:
            worst = max(worst, np0 / denom)
    return {
        "max_ratio": float(worst),
        "symbol_norm": float(m_norm),
        "max_resonance_on_support": max_res_on_support,
        "trials": trials,
    }


# ---------------------------------------------------------------------------
# orthogonality, duality, and the product-inversion sweep
# ---------------------------------------------------------------------------

def _random_atom(grid, tg, p, rng, band=None, pieces=None) -> "UpAtom":
    K = pieces if pieces is not None else int(rng.integers(1, 5))
    idx = tuple(sorted(rng.choice(tg.M, size=K, replace=False)))
    vals = []
    for _ in range(K):
        f = rng.normal(size=(1,) + grid.shape) + 1j * rng.normal(size=(1,) + grid.shape)
        fld = SpatialField(grid, f)
        if band is not None:
            fld = littlewood_paley(fld, band)
        vals.append(fld)
    return make_atom(Partition(tg, idx), vals, p)


def _random_step(grid, tg, rng) -> StepFunction:
    K = int(rng.integers(1, 5))
    idx = tuple(sorted(rng.choice(tg.M, size=K, replace=False)))
    vals = [
        SpatialField(grid, rng.normal(size=(1,) + grid.shape) + 1j * rng.normal(size=(1,) + grid.shape))
        for _ in range(K)
    ]
    return StepFunction(Partition(tg, idx), vals)


def check_duality(spec: SamplingSpec) -> EstimateReport:
    """Hard duality inequality |B(w, u)| <= |w|_{V^q} for atoms u.

    Zero violations are permitted beyond the declared slack; the adversary
    bound on atoms must stay below 1 as well.
    """
    grid = FrequencyGrid(spec.dimension, int(spec.opt("grid_points", 8)), 2.0 * np.pi)
    M = int(spec.opt("time_samples", 24))
    tg = TimeGrid(0.0, spec.window / M, M)
    p_list = spec.opt("p_values", (4.0 / 3.0, 2.0, 4.0))
    per_p = int(spec.opt("per_p", spec.samples))
    slack = float(spec.opt("slack", 1e-12))
    violations = 0
    worst_margin = -np.inf
    adversary_max = 0.0
    gaps = []
    trial = 400_000
    for p in p_list:
        q = p / (p - 1.0)
        for k in range(per_p):
            rng = trial_rng(spec.seed, trial)
            trial += 1
            atom = _random_atom(grid, tg, p, rng)
            w = _random_step(grid, tg, rng)
            series = atom.to_series()
            lhs = abs(dual_pairing(w, series))
            rhs = w.variation(q)
            margin = lhs - rhs
            worst_margin = max(worst_margin, margin)
            if lhs > rhs * (1.0 + slack) + slack:
                violations += 1
            if k < max(2, per_p // 100):
                lb = up_lower_bound(series, p, adversary_budget=6, rng=rng)
                adversary_max = max(adversary_max, lb)
                gaps.append(1.0 - lb)
    ok = violations == 0 and adversary_max <= 1.0 + 1e-10
    return EstimateReport(
        estimate_id="dual-pairing",
        spec=_spec_dict(spec),
        stats={
            "count": len(p_list) * per_p,
            "violations": violations,
            "worst_margin": float(worst_margin),
            "adversary_max": float(adversary_max),
        },
        bracket=(0.0, 1.0),
        verdict="pass" if ok else "fail",
        details={"extremizer_gaps": gaps, "p_values": list(p_list)},
    )


def check_orthogonality(spec: SamplingSpec) -> EstimateReport:
    """Square sums over cap and cube families.

    Atomic branch (p <= 2): the l^2 sum of projected atomic norms against
    the fixed-time frame constant of the symbol family.  Variation branch
    (p >= 2): the variation of the reassembled sum against the l^2 sum of
    projected variations, with the measured frame constant on the annulus.
    """
    grid = FrequencyGrid(spec.dimension, int(spec.opt("grid_points", 32)), 2.0 * np.pi)
    M = int(spec.opt("time_samples", 24))
    tg = TimeGrid(0.0, spec.window / M, M)
    alpha = spec.scale("alpha", 2.0 * np.pi / 64.0)
    band = spec.scale("lambda", 8.0)
    trials = int(spec.opt("trials", 40))
    p_atom = float(spec.opt("p_atom", 2.0))
    p_var = float(spec.opt("p_var", 2.0))

    caps = cap_cover(grid.n, alpha)
    syms = cap_symbols(grid, caps)
    sq = sum(s ** 2 for s in syms)
    annulus = (grid.xi_norm >= band / 2.0) & (grid.xi_norm <= 2.0 * band)
    m2 = float(np.sqrt(np.max(sq)))
    m1 = float(np.sqrt(np.min(sq[annulus])))

    mu = spec.scale("mu", 4.0)
    cubes = cube_cover(grid, mu)
    cube_syms = [cube_symbol(grid, q) for q in cubes]
    sq_cubes = sum(s ** 2 for s in cube_syms)
    m2_cube = float(np.sqrt(np.max(sq_cubes)))

    atom_violation = 0
    var_violation = 0
    worst_atom = 0.0
    worst_var = 0.0
    for k in range(trials):
        rng = trial_rng(spec.seed, 500_000 + k)
        atom = _random_atom(grid, tg, p_atom, rng, band=band, pieces=3)
        # atomic-construction norms of the projected step functions
        lhs_sq = 0.0
        for s in syms:
            piece = sum(
                SpatialField(grid, np.fft.ifftn(s * np.fft.fftn(f.values, axes=(1, 2)), axes=(1, 2))).l2() ** p_atom
                for f in atom.step.pieces
            )
            lhs_sq += piece ** (2.0 / p_atom)
        lhs = np.sqrt(lhs_sq)
        worst_atom = max(worst_atom, lhs / m2)
        if lhs > m2 * (1.0 + 1e-10):
            atom_violation += 1

        series = _banded_series(grid, tg, 4.0 * tg.tau_spacing, rng, spatial_band=band)
        total = vp_norm(series, p_var)
        parts = 0.0
        for s in syms:
            axes = tuple(range(2, series.values.ndim))
            proj = SpaceTimeField(tg, grid, np.fft.ifftn(s * np.fft.fftn(series.values, axes=axes), axes=axes))
            parts += vp_norm(proj, p_var) ** 2
        rhs = np.sqrt(parts) / m1
        worst_var = max(worst_var, total / rhs if rhs > 0 else 0.0)
        if total > rhs * (1.0 + 1e-10):
            var_violation += 1
    ok = atom_violation == 0 and var_violation == 0
    return EstimateReport(
        estimate_id="almost-orthogonality",
        spec=_spec_dict(spec),
        stats={
            "count": trials,
            "atom_violations": atom_violation,
            "variation_violations": var_violation,
            "worst_atom_ratio": float(worst_atom),
            "worst_variation_ratio": float(worst_var),
        },
        bracket=(0.0, 1.0),
        verdict="pass" if ok else "fail",
        details={
            "cap_count": len(caps),
            "frame_upper": m2,
            "frame_lower_on_annulus": m1,
            "cube_frame_upper": m2_cube,
        },
    )


def check_division(spec: SamplingSpec) -> EstimateReport:
    """Product and inverted-product mapping ratios over dyadic triples.

    Both sides use the computable two-sided norm proxies; the scaling
    lam0^{n/2} ... / (lam1 lam2)^{n/2} is divided out and the resulting
    ratios must stay inside the declared bracket, with a trend table
    emitted per triple.
    """
    lo, hi = spec.bracket
    n = spec.dimension
    grid = FrequencyGrid(n, int(spec.opt("grid_points", 32)), 2.0 * np.pi)
    M = int(spec.opt("time_samples", 129))
    tg = TimeGrid(0.0, spec.window / (M - 1), M)
    octaves = int(spec.opt("octaves", 3))
    base = spec.scale("lambda_base", 1.0)
    per_triple = int(spec.opt("per_triple", 2))
    table = []
    ratios_alg = []
    ratios_div = []
    trial = 600_000
    for l0, l1, l2 in _dyadic_triples(base, octaves):
        if 2.0 * (l1 + l2) > grid.xi_max:
            continue
        for _ in range(per_triple):
            rng = trial_rng(spec.seed, trial)
            trial += 1
            u, ut = _chi_truncated_wave(grid, tg, l1, rng)
            v, vt, box_v = _forced_wave(grid, tg, l2, rng)
            pu = s_norm_proxy(u, ut, max_times=65)
            pv = s_norm_proxy(v, vt, max_times=65)
            prod = SpaceTimeField(tg, grid, u.values * v.values)
            prod_t = SpaceTimeField(tg, grid, ut.values * v.values + u.values * vt.values)
            proj = _lp_window(prod, l0)
            proj_t = _lp_window(prod_t, l0)
            pp = s_norm_proxy(proj, proj_t, max_times=65)
            denom = (l1 * l2) ** (n / 2.0) * pu.upper * pv.upper
            forcing = _lp_window(
                SpaceTimeField(tg, grid, u.values * box_v.values), l0
            )
            box_u, box_ut = duhamel_pair(forcing, zero_mode="drop")
            pb = s_norm_proxy(box_u, box_ut, max_times=65)
            r_alg = l0 ** (n / 2.0) * pp.upper / denom if denom > 0 else None
            r_div = l0 ** (n / 2.0) * pb.upper / denom if denom > 0 else None
            if r_alg is not None:
                ratios_alg.append(r_alg)
            if r_div is not None:
                ratios_div.append(r_div)
            table.append({"triple": [l0, l1, l2], "algebra": r_alg, "division": r_div})
    ra = np.asarray(ratios_alg)
    rd = np.asarray(ratios_div)
    ok = ra.size > 0 and np.min(ra) >= lo and np.max(ra) <= hi
    ok = ok and rd.size > 0 and np.max(rd) <= hi
    stats = {"algebra": _ratio_stats(ra), "division": _ratio_stats(rd)}
    return EstimateReport(
        estimate_id="division-problem",
        spec=_spec_dict(spec),
        stats=stats,
        bracket=spec.bracket,
        verdict="pass" if ok else "fail",
        details={"trend_table": table},
    )


def _annulus_field(grid, lam, rng, c=1) -> SpatialField:
    f = SpatialField(grid, rng.normal(size=(c,) + grid.shape) + 1j * rng.normal(size=(c,) + grid.shape))
    f = littlewood_paley(f, lam)
    norm = f.l2()
    return SpatialField(grid, f.values / max(norm, 1e-300))


def _chi_truncated_wave(grid, tg, lam, rng):
    f = _annulus_field(grid, lam, rng)
    g = _annulus_field(grid, lam, rng)
    g = SpatialField(grid, lam * g.values)
    data = CauchyData3(f, g)
    u, ut = free_flow(data, tg, zero_mode="drop")
    return u, ut


def _forced_wave(grid, tg, lam, rng):
    u, ut = _chi_truncated_wave(grid, tg, lam, rng)
    h = _banded_series(grid, tg, 2.0 * tg.tau_spacing, rng, spatial_band=lam)
    h = SpaceTimeField(tg, grid, h.values / max(mixed_norm(h, 2.0), 1e-300))
    du, dut = duhamel_pair(h, zero_mode="drop")
    return (
        SpaceTimeField(tg, grid, u.values + du.values),
        SpaceTimeField(tg, grid, ut.values + dut.values),
        h,
    )


def _lp_window(u: SpaceTimeField, lam: float) -> SpaceTimeField:
    axes = tuple(range(2, u.values.ndim))
    from .multipliers import lp_symbol

    sym = lp_symbol(u.grid, lam)
    return SpaceTimeField(u.timegrid, u.grid, np.fft.ifftn(sym * np.fft.fftn(u.values, axes=axes), axes=axes))


class CauchyData3:
    """Loose (f, g) pair for the scalar free flow (no sphere constraint)."""

    def __init__(self, f: SpatialField, g: SpatialField):
        self.f = f
        self.g = g

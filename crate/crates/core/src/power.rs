//! Continuous power allocation over all (user, BS, band) links.
//!
//! `log(1 + z)` is replaced by its tangent lower bound `α·log z + β` at the
//! current SINR, which makes the sum-rate problem concave in log-powers. Each
//! surrogate is maximized by the fixed-point iteration
//!
//! ```text
//! p(u,b,k) ← W_k·α(u,b,k) / (λ_u·ln2 + W_k·Σ_{(ũ,b̃)≠(u,b)} α(ũ,b̃,k)·g(u,b̃,k)/I(ũ,b̃,k))
//! ```
//!
//! where `I` is the noise-plus-interference of a link and `λ_u ≥ 0` is chosen
//! so the user's budget holds (zero when it already does). Surrogates are
//! refitted at the new SINRs until the true sum rate settles.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rate::{leave_one_out_rows, link_interference_into, link_sum_rate, InterferenceScratch, sinr, CellView, ChannelAssignment, PowerMatrix};
use crate::tensor::Tensor3;

/// Consecutive sweeps a link may sit at the power floor before it is frozen at zero.
pub const FREEZE_AFTER_SWEEPS: u32 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("non-finite power for user {user}, bs {bs}, band {band}; check power_floor")]
    NonFinite { user: usize, bs: usize, band: usize },
    #[error("invalid solver settings: {0}")]
    BadSettings(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Maximum surrogate refits.
    pub outer_max: usize,
    /// Maximum fixed-point sweeps per surrogate.
    pub inner_max: usize,
    /// Relative tolerance on power change (relative to the user's budget)
    /// and on the change of the true sum rate between refits.
    pub fp_tol: f64,
    /// Minimum power of a live link, mW.
    pub power_floor: f64,
    /// Relative budget residual accepted by the multiplier search.
    pub lambda_tol: f64,
    /// Record a per-sweep trace.
    pub trace: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            outer_max: 30,
            inner_max: 200,
            fp_tol: 1e-6,
            power_floor: 1e-12,
            lambda_tol: 1e-9,
            trace: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.outer_max == 0 || self.inner_max == 0 {
            return Err(SolverError::BadSettings("iteration limits must be positive"));
        }
        for v in [self.fp_tol, self.power_floor, self.lambda_tol] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SolverError::BadSettings("tolerances and floor must be positive"));
            }
        }
        Ok(())
    }
}

/// Tangent coefficients of `log(1+z) ≥ α·log z + β` at `z0` (natural log).
/// Non-positive `z0` is clamped to the smallest positive double.
pub fn alpha_beta(z0: f64) -> (f64, f64) {
    let z0 = z0.max(f64::MIN_POSITIVE);
    let alpha = z0 / (1.0 + z0);
    let beta = z0.ln_1p() - alpha * z0.ln();
    (alpha, beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateCoefficients {
    pub alpha: Tensor3<f64>,
    pub beta: Tensor3<f64>,
}

impl SurrogateCoefficients {
    /// `α ≡ 1`, `β ≡ 0`: the starting point of the continuous scheme.
    pub fn ones(dims: [usize; 3]) -> Self {
        SurrogateCoefficients {
            alpha: Tensor3::filled(dims, 1.0),
            beta: Tensor3::filled(dims, 0.0),
        }
    }

    /// `α = γ`: the starting point when the power step follows a channel allocation.
    pub fn from_assignment(gamma: &ChannelAssignment) -> Self {
        let dims = gamma.dims();
        SurrogateCoefficients {
            alpha: Tensor3::from_fn(dims, |u, b, k| if gamma.is_set(u, b, k) { 1.0 } else { 0.0 }),
            beta: Tensor3::filled(dims, 0.0),
        }
    }

    pub fn fit(sinr: &Tensor3<f64>) -> Self {
        let dims = sinr.dims();
        let mut alpha = Tensor3::filled(dims, 0.0);
        let mut beta = Tensor3::filled(dims, 0.0);
        for (i, &z) in sinr.as_slice().iter().enumerate() {
            let (a, b) = alpha_beta(z);
            alpha.as_mut_slice()[i] = a;
            beta.as_mut_slice()[i] = b;
        }
        SurrogateCoefficients { alpha, beta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVariables {
    pub lambda: Vec<f64>,
}

/// Multiplier `λ ≥ 0` solving `Σ_j n_j / (λ·ln2 + d_j) = budget`.
///
/// Returns 0 when `λ = 0` is already within budget. Otherwise Newton's method
/// runs upward from a lower bound on the root; the sum is convex and
/// decreasing in `λ`, so every iterate stays at or below the root and the
/// returned value overshoots the budget by at most `tol·budget`.
pub fn solve_lambda(budget: f64, denominators: &[f64], numerators: &[f64], tol: f64) -> f64 {
    solve_lambda_from(budget, denominators, numerators, tol, 0.0)
}

/// [`solve_lambda`] seeded with a guess. A single Newton step from any point
/// of a convex decreasing function lands at or below its root, so the guess
/// only has to be close, not on a particular side.
fn solve_lambda_from(budget: f64, denominators: &[f64], numerators: &[f64], tol: f64, guess: f64) -> f64 {
    use std::f64::consts::LN_2;
    debug_assert_eq!(denominators.len(), numerators.len());
    let terms = || numerators.iter().zip(denominators).filter(|(n, _)| **n > 0.0);
    let total = |lambda: f64| -> (f64, f64) {
        let mut t = 0.0;
        let mut slope = 0.0;
        for (n, d) in terms() {
            let inv = 1.0 / (lambda * LN_2 + d);
            let q = n * inv;
            t += q;
            slope += q * inv * LN_2;
        }
        (t, slope)
    };
    let mut num_sum = 0.0;
    let mut d_max: f64 = 0.0;
    let mut d_min = f64::INFINITY;
    let mut lower: f64 = 0.0;
    for (n, d) in terms() {
        num_sum += n;
        d_max = d_max.max(*d);
        d_min = d_min.min(*d);
        // Each term alone must fit the budget at the root.
        lower = lower.max((n / budget - d) / LN_2);
    }
    if num_sum == 0.0 {
        return 0.0;
    }
    if d_min > 0.0 && total(0.0).0 <= budget {
        return 0.0;
    }
    // So must the sum with every denominator raised to the largest one.
    lower = lower.max((num_sum / budget - d_max) / LN_2);

    let mut lambda = lower;
    if guess > lower {
        let (t, slope) = total(guess);
        let excess = t - budget;
        if excess >= 0.0 && excess <= tol * budget {
            return guess;
        }
        lambda = (guess + excess / slope).max(lower);
    }
    for _ in 0..200 {
        let (t, slope) = total(lambda);
        let excess = t - budget;
        if excess <= tol * budget {
            break;
        }
        let next = lambda + excess / slope;
        if !(next > lambda) {
            break;
        }
        lambda = next;
    }
    lambda
}

/// Result of one fixed-point sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub power: PowerMatrix,
    pub duals: DualVariables,
}

/// One application of the fixed-point update to every live link.
///
/// Links with `p == 0` are treated as frozen: they neither receive power nor
/// contribute to the interference terms. Live links come back floored at
/// `settings.power_floor`.
pub fn fixed_point_sweep(
    view: &CellView,
    p: &PowerMatrix,
    coeffs: &SurrogateCoefficients,
    settings: &SolverSettings,
) -> Result<SweepOutcome, SolverError> {
    let (raw, duals) = raw_sweep(view, &p.p, &coeffs.alpha, settings.lambda_tol, None, &mut SweepWorkspace::default())?;
    let mut out = raw;
    for (x, &old) in out.as_mut_slice().iter_mut().zip(p.p.as_slice()) {
        if old > 0.0 {
            *x = x.max(settings.power_floor);
        } else {
            *x = 0.0;
        }
    }
    Ok(SweepOutcome {
        power: PowerMatrix { p: out },
        duals,
    })
}

/// Buffers reused across sweeps of one solve.
#[derive(Debug, Default)]
struct SweepWorkspace {
    interference: Vec<f64>,
    scratch: InterferenceScratch,
    a: Vec<f64>,
    others: Vec<f64>,
    own: Vec<f64>,
    own_loo: Vec<f64>,
    acc: Vec<f64>,
    nums: Vec<f64>,
    dens: Vec<f64>,
}

/// Unfloored update; frozen links (`p == 0`) map to 0.
fn raw_sweep(
    view: &CellView,
    p: &Tensor3<f64>,
    alpha: &Tensor3<f64>,
    lambda_tol: f64,
    guess: Option<&[f64]>,
    ws: &mut SweepWorkspace,
) -> Result<(Tensor3<f64>, DualVariables), SolverError> {
    use std::f64::consts::LN_2;
    let [nu, nb, nk] = view.dims();
    let n = nu * nb * nk;
    let block = nb * nk;
    link_interference_into(&view.gain, &view.noise, p, &mut ws.scratch, &mut ws.interference);
    let (g, pv, al) = (view.gain.as_slice(), p.as_slice(), alpha.as_slice());
    let w = &view.band_widths;

    // a(u,b,k) = α/I for live links: the marginal penalty weight of interference at (b,k).
    ws.a.resize(n, 0.0);
    for (((a, &p), &al), &i) in ws.a.iter_mut().zip(pv).zip(al).zip(&ws.interference) {
        *a = if p > 0.0 { al / i } else { 0.0 };
    }

    // others(u,b̃,k) = Σ_{ũ≠u} a(ũ,b̃,k)
    ws.others.resize(n, 0.0);
    ws.acc.resize(block.max(nk), 0.0);
    leave_one_out_rows(&ws.a, nu, block, &mut ws.others, &mut ws.acc);

    // D(u,b,k) = W_k [Σ_b̃ g(u,b̃,k)·others(u,b̃,k) + Σ_{b̃≠b} g(u,b̃,k)·a(u,b̃,k)]
    ws.own.resize(block, 0.0);
    ws.own_loo.resize(block, 0.0);
    ws.nums.resize(block, 0.0);
    ws.dens.resize(block, 0.0);
    let mut cross = vec![0.0; nk];
    let mut out = vec![0.0; n];
    let mut lambda = vec![0.0; nu];
    for u in 0..nu {
        let r = u * block..(u + 1) * block;
        let (gu, au, ou, pu, alu) = (&g[r.clone()], &ws.a[r.clone()], &ws.others[r.clone()], &pv[r.clone()], &al[r.clone()]);
        cross.fill(0.0);
        for (gr, or) in gu.chunks_exact(nk).zip(ou.chunks_exact(nk)) {
            for ((c, &g), &o) in cross.iter_mut().zip(gr).zip(or) {
                *c += g * o;
            }
        }
        for ((own, &g), &a) in ws.own.iter_mut().zip(gu).zip(au) {
            *own = g * a;
        }
        leave_one_out_rows(&ws.own, nb, nk, &mut ws.own_loo, &mut ws.acc);
        for ((((dr, nr), lr), pr), alr) in ws
            .dens
            .chunks_exact_mut(nk)
            .zip(ws.nums.chunks_exact_mut(nk))
            .zip(ws.own_loo.chunks_exact(nk))
            .zip(pu.chunks_exact(nk))
            .zip(alu.chunks_exact(nk))
        {
            for k in 0..nk {
                dr[k] = w[k] * (cross[k] + lr[k]);
                nr[k] = if pr[k] > 0.0 { w[k] * alr[k] } else { 0.0 };
            }
        }
        let start = guess.map_or(0.0, |g| g[u]);
        let lam = solve_lambda_from(view.budgets[u], &ws.dens, &ws.nums, lambda_tol, start);
        lambda[u] = lam;
        let shift = lam * LN_2;
        for ((o, &num), &d) in out[r].iter_mut().zip(&ws.nums).zip(&ws.dens) {
            *o = if num > 0.0 { num / (shift + d) } else { 0.0 };
        }
        if let Some(j) = out[u * block..(u + 1) * block].iter().position(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { user: u, bs: j / nk, band: j % nk });
        }
    }
    let out = Tensor3::from_vec([nu, nb, nk], out).expect("sized above");
    Ok((out, DualVariables { lambda }))
}

/// One row of the optional solver trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub outer: usize,
    pub inner: usize,
    pub true_rate: f64,
    pub max_change: f64,
    pub lambda: Vec<f64>,
}

pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "outer,inner,true_rate_bps,max_change,lambda")?;
    for r in rows {
        let lambdas: Vec<String> = r.lambda.iter().map(|l| l.to_string()).collect();
        writeln!(
            f,
            "{},{},{},{},{}",
            r.outer,
            r.inner,
            r.true_rate,
            r.max_change,
            lambdas.join(";")
        )?;
    }
    f.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    /// Best iterate by true sum rate.
    pub power: PowerMatrix,
    /// True sum rate of `power` (over the masked links when an assignment was given).
    pub rate: f64,
    /// Multipliers that produced `power`.
    pub duals: DualVariables,
    /// Surrogate in force when `power` was produced.
    pub coeffs: SurrogateCoefficients,
    /// The true rate settled before `outer_max`.
    pub converged: bool,
    pub outer_iterations: usize,
    pub total_sweeps: usize,
    /// Largest `|α log z0 + β − log(1+z0)|` at a refit point.
    pub max_tangency_gap: f64,
    /// Largest `α log z + β − log(1+z)` observed after re-solving a surrogate
    /// (positive would mean the bound was violated).
    pub max_bound_violation: f64,
    pub trace: Vec<TraceRow>,
}

impl PowerSolution {
    /// `max_u |λ_u·(P̄_u − Σ p)| / P̄_u`.
    pub fn complementary_slackness(&self, budgets: &[f64]) -> f64 {
        budgets
            .iter()
            .enumerate()
            .map(|(u, &b)| (self.duals.lambda[u] * (b - self.power.user_total(u))).abs() / b)
            .fold(0.0, f64::max)
    }
}

fn initial_power(view: &CellView, mask: Option<&ChannelAssignment>, floor: f64) -> PowerMatrix {
    let [nu, nb, nk] = view.dims();
    let mut p = PowerMatrix::zeros([nu, nb, nk]);
    for u in 0..nu {
        let links = match mask {
            None => nb * nk,
            Some(g) => (0..nb)
                .flat_map(|b| (0..nk).map(move |k| (b, k)))
                .filter(|&(b, k)| g.is_set(u, b, k))
                .count(),
        };
        let share = if links > 0 { view.budgets[u] / links as f64 } else { 0.0 };
        for b in 0..nb {
            for k in 0..nk {
                let on = mask.is_none_or(|g| g.is_set(u, b, k));
                p.p.set(u, b, k, if on { share.max(floor) } else { floor });
            }
        }
    }
    p
}

fn surrogate_gap(coeffs: &SurrogateCoefficients, s: &Tensor3<f64>, p: &Tensor3<f64>) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (i, &z) in s.as_slice().iter().enumerate() {
        if p.as_slice()[i] <= 0.0 || z <= 0.0 {
            continue;
        }
        let bound = coeffs.alpha.as_slice()[i] * z.ln() + coeffs.beta.as_slice()[i];
        worst = worst.max(bound - z.ln_1p());
    }
    worst
}

/// Maximizes the cell's link sum rate over the power tensor by successive
/// surrogate refits.
///
/// With `init = None` every link starts with `α = 1` and an equal share of the
/// budget. With `init = Some(γ)` the surrogate starts at `α = γ`, power
/// starts evenly spread over the user's assigned links, and the reported rate
/// counts the assigned links only.
pub fn solve_power_continuous(
    view: &CellView,
    settings: &SolverSettings,
    init: Option<&ChannelAssignment>,
) -> Result<PowerSolution, SolverError> {
    settings.validate()?;
    let dims = view.dims();
    let mut coeffs = match init {
        None => SurrogateCoefficients::ones(dims),
        Some(g) => SurrogateCoefficients::from_assignment(g),
    };
    let mut p = initial_power(view, init, settings.power_floor);
    let mut at_floor = vec![0u32; p.p.as_slice().len()];
    let mut duals = DualVariables {
        lambda: vec![0.0; dims[0]],
    };
    let mut best: Option<(f64, PowerMatrix, DualVariables, SurrogateCoefficients)> = None;
    let mut prev_rate: Option<f64> = None;
    let mut converged = false;
    let mut total_sweeps = 0;
    let mut outer_iterations = 0;
    let mut max_tangency_gap: f64 = 0.0;
    let mut max_bound_violation = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut ws = SweepWorkspace::default();
    let block = dims[1] * dims[2];

    for outer in 0..settings.outer_max {
        outer_iterations = outer + 1;
        if outer > 0 {
            let s = sinr(view, &p);
            coeffs = SurrogateCoefficients::fit(&s);
            for (i, &z) in s.as_slice().iter().enumerate() {
                if p.p.as_slice()[i] > 0.0 && z > 0.0 {
                    let gap = coeffs.alpha.as_slice()[i] * z.ln() + coeffs.beta.as_slice()[i] - z.ln_1p();
                    max_tangency_gap = max_tangency_gap.max(gap.abs() / z.ln_1p().max(1e-300));
                }
            }
        }

        for inner in 0..settings.inner_max {
            let (raw, new_duals) = raw_sweep(view, &p.p, &coeffs.alpha, settings.lambda_tol, Some(&duals.lambda), &mut ws)?;
            total_sweeps += 1;
            let mut next = raw;
            let mut max_change: f64 = 0.0;
            for (i, x) in next.as_mut_slice().iter_mut().enumerate() {
                let old = p.p.as_slice()[i];
                if old <= 0.0 {
                    *x = 0.0;
                    continue;
                }
                if *x <= settings.power_floor {
                    at_floor[i] += 1;
                    *x = if at_floor[i] >= FREEZE_AFTER_SWEEPS { 0.0 } else { settings.power_floor };
                } else {
                    at_floor[i] = 0;
                }
                let u = i / block;
                max_change = max_change.max((*x - old).abs() / view.budgets[u]);
            }
            p = PowerMatrix { p: next };
            duals = new_duals;
            if settings.trace {
                trace.push(TraceRow {
                    outer,
                    inner,
                    true_rate: link_sum_rate(view, &p, init),
                    max_change,
                    lambda: duals.lambda.clone(),
                });
            }
            if max_change < settings.fp_tol {
                break;
            }
        }

        if outer > 0 {
            let s = sinr(view, &p);
            max_bound_violation = max_bound_violation.max(surrogate_gap(&coeffs, &s, &p.p));
        }

        let rate = link_sum_rate(view, &p, init);
        if best.as_ref().is_none_or(|b| rate > b.0) {
            best = Some((rate, p.clone(), duals.clone(), coeffs.clone()));
        }
        if let Some(prev) = prev_rate {
            if (rate - prev).abs() <= settings.fp_tol * prev.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        prev_rate = Some(rate);
    }

    let (rate, power, duals, coeffs) = best.expect("outer_max >= 1");
    Ok(PowerSolution {
        power,
        rate,
        duals,
        coeffs,
        converged,
        outer_iterations,
        total_sweeps,
        max_tangency_gap,
        max_bound_violation,
        trace,
    })
}

/// For each `(u,k)` with positive power, the share carried by its strongest
/// link: `max_b p(u,b,k) / Σ_b p(u,b,k)`.
pub fn concentration_report(p: &PowerMatrix) -> Vec<Option<f64>> {
    let [nu, nb, nk] = p.dims();
    let mut out = Vec::with_capacity(nu * nk);
    for u in 0..nu {
        for k in 0..nk {
            let row: Vec<f64> = (0..nb).map(|b| p.p.at(u, b, k)).collect();
            let total: f64 = row.iter().sum();
            out.push((total > 0.0).then(|| row.iter().copied().fold(0.0, f64::max) / total));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;
    use crate::tensor::Matrix;

    fn single_cell(gain: Vec<f64>, dims: [usize; 3], noise: f64, w: f64, budget: f64) -> CellView {
        let [nu, nb, nk] = dims;
        CellView::from_parts(
            Tensor3::from_vec(dims, gain).unwrap(),
            Matrix::from_fn(nb, nk, |_, _| noise),
            vec![w; nk],
            vec![budget; nu],
        )
    }

    #[test]
    fn alpha_beta_at_one() {
        let (a, b) = alpha_beta(1.0);
        assert_eq!(a, 0.5);
        assert!((b - LN_2).abs() < 1e-15);
    }

    #[test]
    fn alpha_beta_tangency() {
        for z0 in [1e-6, 0.3, 1.0, 7.5, 1e4] {
            let (a, b) = alpha_beta(z0);
            assert!((a * z0.ln() + b - z0.ln_1p()).abs() < 1e-12 * z0.ln_1p().max(1.0));
        }
    }

    #[test]
    fn lambda_closed_form_single_term() {
        // n/(λ ln2 + d) = B  =>  λ = (n/B − d)/ln2
        let (n, d, budget) = (10.0, 0.5, 2.0);
        let lam = solve_lambda(budget, &[d], &[n], 1e-12);
        let expected = (n / budget - d) / LN_2;
        assert!((lam - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn lambda_matches_bisection() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let len = rng.random_range(1..12);
            let nums: Vec<f64> = (0..len).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.1..1e4) }).collect();
            let dens: Vec<f64> = (0..len).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1e3) }).collect();
            let budget = rng.random_range(0.01..500.0);
            let lam = solve_lambda(budget, &dens, &nums, 1e-12);
            let total = |l: f64| -> f64 {
                nums.iter().zip(&dens).filter(|(n, _)| **n > 0.0).map(|(n, d)| n / (l * LN_2 + d)).sum()
            };
            if lam == 0.0 {
                assert!(total(0.0) <= budget);
                continue;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            while total(hi) > budget {
                hi *= 2.0;
            }
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                if total(mid) > budget { lo = mid } else { hi = mid }
            }
            assert!((lam - hi).abs() <= 1e-9 * hi, "{lam} vs {hi}");
            assert!(total(lam) >= budget * (1.0 - 1e-12) && total(lam) <= budget * (1.0 + 1e-9));
        }
    }

    #[test]
    fn lambda_zero_when_feasible() {
        assert_eq!(solve_lambda(100.0, &[1.0, 2.0], &[1.0, 1.0], 1e-9), 0.0);
        assert_eq!(solve_lambda(1.0, &[0.0], &[0.0], 1e-9), 0.0);
    }

    #[test]
    fn single_link_gets_full_budget() {
        let v = single_cell(vec![2.0], [1, 1, 1], 0.5, 1000.0, 3.0);
        let p = PowerMatrix { p: Tensor3::filled([1, 1, 1], 1.0) };
        let out = fixed_point_sweep(&v, &p, &SurrogateCoefficients::ones([1, 1, 1]), &SolverSettings::default())
            .unwrap();
        assert!((out.power.p.at(0, 0, 0) - 3.0).abs() < 1e-8);
        assert!(out.duals.lambda[0] > 0.0);

        let sol = solve_power_continuous(&v, &SolverSettings::default(), None).unwrap();
        assert!((sol.power.p.at(0, 0, 0) - 3.0).abs() < 1e-8);
        let expected = 1000.0 * (1.0f64 + 2.0 * 3.0 / 0.5).log2();
        assert!((sol.rate - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn empty_competition_gives_budget_only_update() {
        // Two users on different bands of one BS never interfere: each update is W α/(λ ln2).
        let v = single_cell(vec![1.0, 0.0, 0.0, 1.0], [2, 1, 2], 1.0, 10.0, 4.0);
        let mut coeffs = SurrogateCoefficients::ones([2, 1, 2]);
        coeffs.alpha.set(0, 0, 1, 0.0);
        coeffs.alpha.set(1, 0, 0, 0.0);
        let p = PowerMatrix { p: Tensor3::filled([2, 1, 2], 1.0) };
        let out = fixed_point_sweep(&v, &p, &coeffs, &SolverSettings::default()).unwrap();
        let lam = out.duals.lambda[0];
        assert!((out.power.p.at(0, 0, 0) - 10.0 / (lam * LN_2)).abs() < 1e-9);
        assert!((out.power.p.at(0, 0, 0) - 4.0).abs() < 1e-8);
        // α = 0 link is driven to the floor.
        assert_eq!(out.power.p.at(0, 0, 1), SolverSettings::default().power_floor);
    }

    #[test]
    fn symmetric_bands_are_a_fixed_point() {
        let k = 4;
        let v = single_cell(vec![1e-9; k], [1, 1, k], 1e-13, 20e3, 200.0);
        let p = PowerMatrix { p: Tensor3::filled([1, 1, k], 200.0 / k as f64) };
        let s = sinr(&v, &p);
        let coeffs = SurrogateCoefficients::fit(&s);
        let out = fixed_point_sweep(&v, &p, &coeffs, &SolverSettings::default()).unwrap();
        for kk in 0..k {
            assert!((out.power.p.at(0, 0, kk) - 50.0).abs() < 1e-6);
        }
    }

    #[test]
    fn frozen_links_stay_off() {
        let v = single_cell(vec![1.0, 1.0], [1, 2, 1], 1.0, 1.0, 1.0);
        let p = PowerMatrix { p: Tensor3::from_vec([1, 2, 1], vec![0.5, 0.0]).unwrap() };
        let out = fixed_point_sweep(&v, &p, &SurrogateCoefficients::ones([1, 2, 1]), &SolverSettings::default())
            .unwrap();
        assert_eq!(out.power.p.at(0, 1, 0), 0.0);
        assert!((out.power.p.at(0, 0, 0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn concentration_shares() {
        let p = PowerMatrix { p: Tensor3::from_vec([2, 2, 1], vec![3.0, 0.0, 1.0, 1.0]).unwrap() };
        assert_eq!(concentration_report(&p), vec![Some(1.0), Some(0.5)]);
        assert_eq!(concentration_report(&PowerMatrix::zeros([1, 2, 1])), vec![None]);
    }

    #[test]
    fn settings_validation() {
        let s = SolverSettings { fp_tol: 0.0, ..SolverSettings::default() };
        assert!(s.validate().is_err());
        let s = SolverSettings { outer_max: 0, ..SolverSettings::default() };
        assert!(s.validate().is_err());
    }
}

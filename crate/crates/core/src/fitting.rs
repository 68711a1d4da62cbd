//! Projection of unconstrained greedy weights onto realizable metasurface
//! configurations: frequency-flat amplitudes and Lorentzian resonators.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dma::{lorentzian_denominator, FlatSet, FrequencyGrid, LorentzianParams};
use crate::error::{Error, Result};
use crate::numerics::{cplx, CVector};

/// `alpha = q^T q_hat^* / ||q_hat||^2`, the minimizer of `||q - alpha q_hat||`.
pub fn optimal_alpha(q_fixed: &CVector, q_hat: &CVector) -> Result<Complex64> {
    let norm = q_hat.norm_squared();
    if !(norm > 0.0) {
        return Err(Error::ZeroTarget);
    }
    Ok(q_hat.dotc(q_fixed) / norm)
}

fn alpha_or_zero(q_fixed: &CVector, q_hat: &CVector) -> Complex64 {
    optimal_alpha(q_fixed, q_hat).unwrap_or(cplx(0.0, 0.0))
}

/// How the per-bin scalars `alpha_m` are refreshed between fitting steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaScaling {
    /// Per-bin closed form only; the objective is `sum_m ||q_m - alpha_m q_hat_m||^2`.
    /// Shrinking `q` and `alpha` together lowers this objective, so long runs
    /// drift toward vanishing weights.
    Literal,
    /// Per-bin closed form times the common factor
    /// `sum_m ||q_m||^2 / sum_m |alpha_m|^2 ||q_hat_m||^2`, which minimizes the
    /// objective divided by the target energy `sum_m |alpha_m|^2 ||q_hat_m||^2`.
    Normalized,
    /// Common magnitude, per-bin phase `arg(q_hat_m^H q_m)`; the magnitude
    /// minimizes the energy-normalized objective. Keeps the per-bin target
    /// norms of the greedy weights.
    #[default]
    PhaseAligned,
}

/// `sum_m ||q_m - alpha_m q_hat_m||^2`.
pub fn projection_objective(q: &[CVector], alphas: &[Complex64], q_hat: &[CVector]) -> f64 {
    q.iter()
        .zip(alphas)
        .zip(q_hat)
        .map(|((qm, a), h)| (qm - h * *a).norm_squared())
        .sum()
}

/// Target energy `sum_m |alpha_m|^2 ||q_hat_m||^2`.
pub fn target_energy(alphas: &[Complex64], q_hat: &[CVector]) -> f64 {
    alphas
        .iter()
        .zip(q_hat)
        .map(|(a, h)| a.norm_sqr() * h.norm_squared())
        .sum()
}

/// The objective tracked under `scaling`.
pub fn scaled_objective(q: &[CVector], alphas: &[Complex64], q_hat: &[CVector], scaling: AlphaScaling) -> f64 {
    let raw = projection_objective(q, alphas, q_hat);
    match scaling {
        AlphaScaling::Literal => raw,
        AlphaScaling::Normalized | AlphaScaling::PhaseAligned => {
            let e = target_energy(alphas, q_hat);
            if e > 0.0 {
                raw / e
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Refreshes `alphas` for fixed responses `q`. Under
/// [`AlphaScaling::Normalized`] the previous values are kept when `q` is
/// orthogonal to every target.
pub fn update_alphas(q: &[CVector], q_hat: &[CVector], alphas: &mut [Complex64], scaling: AlphaScaling) {
    let fresh: Vec<Complex64> = q.iter().zip(q_hat).map(|(qm, h)| alpha_or_zero(qm, h)).collect();
    match scaling {
        AlphaScaling::Literal => alphas.copy_from_slice(&fresh),
        AlphaScaling::Normalized => {
            let e = target_energy(&fresh, q_hat);
            if e > 0.0 {
                let c = q.iter().map(|v| v.norm_squared()).sum::<f64>() / e;
                alphas.iter_mut().zip(&fresh).for_each(|(a, f)| *a = f * c);
            }
        }
        AlphaScaling::PhaseAligned => {
            let inner: Vec<Complex64> = q.iter().zip(q_hat).map(|(qm, h)| h.dotc(qm)).collect();
            let b: f64 = inner.iter().map(|z| z.norm()).sum();
            if b > 0.0 {
                let c = q.iter().map(|v| v.norm_squared()).sum::<f64>() / b;
                for (a, z) in alphas.iter_mut().zip(&inner) {
                    *a = if z.norm() > 0.0 { z / z.norm() * c } else { cplx(c, 0.0) };
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatProjection {
    pub weights: Vec<Complex64>,
    pub alphas: Vec<Complex64>,
    /// Objective after each outer iteration.
    pub objective_trace: Vec<f64>,
}

/// Alternating projection of one microstrip's per-bin weights onto a single
/// frequency-flat vector in `set`, starting from `alpha = 1`.
pub fn project_flat(q_hat: &[CVector], set: FlatSet, iters: usize, scaling: AlphaScaling) -> Result<FlatProjection> {
    if q_hat.is_empty() {
        return Err(Error::Dimension("no bins to project".into()));
    }
    if iters == 0 {
        return Err(Error::InvalidConfig("projection needs at least one iteration".into()));
    }
    let bins = q_hat.len();
    let ne = q_hat[0].len();
    let mut alphas = vec![cplx(1.0, 0.0); bins];
    let mut q = CVector::zeros(ne);
    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mut mean = CVector::zeros(ne);
        for (h, a) in q_hat.iter().zip(&alphas) {
            mean.axpy(*a, h, cplx(1.0, 0.0));
        }
        mean.unscale_mut(bins as f64);
        q = mean.map(|z| set.project(z));
        let repeated = vec![q.clone(); bins];
        update_alphas(&repeated, q_hat, &mut alphas, scaling);
        trace.push(scaled_objective(&repeated, &alphas, q_hat, scaling));
    }
    Ok(FlatProjection {
        weights: q.iter().copied().collect(),
        alphas,
        objective_trace: trace,
    })
}

/// `Omega^2 / (Omega_R^2 - Omega^2 - j Omega chi)`: the unit-strength response.
#[inline]
fn unit_profile(resonance: f64, damping: f64, omega: f64) -> Complex64 {
    omega * omega / lorentzian_denominator(resonance, damping, omega)
}

/// Least-squares oscillator strength for fixed `chi` and `Omega_R`, clipped
/// at zero.
pub fn oscillator_strength(damping: f64, resonance: f64, targets: &[Complex64], omega: &[f64]) -> Result<f64> {
    if targets.len() != omega.len() {
        return Err(Error::Dimension("targets and grid differ in length".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (t, &w) in targets.iter().zip(omega) {
        let g = unit_profile(resonance, damping, w);
        if !g.is_finite() {
            return Err(Error::DegenerateResponse { omega: w });
        }
        num += (g.conj() * t).re;
        den += g.norm_sqr();
    }
    if !(den > 0.0) {
        return Ok(0.0);
    }
    Ok(num.max(0.0) / den)
}

/// Element-wise curve-fitting problem `min_F,chi,Omega_R sum_m |F g_m - t_m|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitProblem {
    pub targets: Vec<Complex64>,
    pub omega: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartId {
    BelowBand,
    AboveBand,
    InBandPeak,
    /// Parameters carried over from the previous outer iteration.
    Incumbent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: LorentzianParams,
    pub residual: f64,
    pub start: StartId,
    pub iterations: usize,
}

/// Curve-fit termination settings.
const FIT_MAX_ITERS: usize = 200;
const FIT_REL_TOL: f64 = 1e-8;
const FIT_MAX_DAMPING: f64 = 1e16;

impl FitProblem {
    pub fn new(targets: Vec<Complex64>, grid: &FrequencyGrid) -> Result<Self> {
        if targets.len() != grid.bins() {
            return Err(Error::Dimension("one target per bin required".into()));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("fit targets"));
        }
        Ok(Self {
            targets,
            omega: grid.omega.clone(),
        })
    }

    pub fn target_energy(&self) -> f64 {
        self.targets.iter().map(|t| t.norm_sqr()).sum()
    }

    /// Objective at fully specified parameters.
    pub fn residual(&self, p: &LorentzianParams) -> f64 {
        self.targets
            .iter()
            .zip(&self.omega)
            .map(|(t, &w)| (unit_profile(p.resonance, p.damping, w) * p.strength - t).norm_sqr())
            .sum()
    }

    /// Fills `out` with residual components (re, im interleaved) for the
    /// optimal strength at the given shape; returns `(F, sum of squares)`.
    fn profile_residual(&self, scale: f64, r: f64, c: f64, out: &mut Vec<f64>) -> (f64, f64) {
        out.clear();
        let (mut num, mut den) = (0.0, 0.0);
        let g: Vec<Complex64> = self.omega.iter().map(|&w| unit_profile(r, c, w / scale)).collect();
        for (gm, t) in g.iter().zip(&self.targets) {
            num += (gm.conj() * t).re;
            den += gm.norm_sqr();
        }
        let f = if den > 0.0 && den.is_finite() {
            num.max(0.0) / den
        } else {
            0.0
        };
        let mut ss = 0.0;
        for (gm, t) in g.iter().zip(&self.targets) {
            let e = gm * f - t;
            out.push(e.re);
            out.push(e.im);
            ss += e.norm_sqr();
        }
        (f, ss)
    }

    fn scale(&self) -> f64 {
        self.omega
            .iter()
            .map(|w| w.abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    }
}

/// Damped Gauss-Newton (Levenberg-Marquardt) fit. With `quality` set, only
/// `Omega_R` is free and `chi = Omega_R / quality`; otherwise `Omega_R` and
/// `chi` are both free. `F` is eliminated through [`oscillator_strength`].
pub fn curve_fit_lorentzian(
    problem: &FitProblem,
    start: &LorentzianParams,
    quality: Option<f64>,
    start_id: StartId,
) -> Result<FitResult> {
    if let Some(qf) = quality {
        if !(qf > 0.0) {
            return Err(Error::InvalidConfig(format!("quality factor {qf} must be positive")));
        }
    }
    if !(start.resonance > 0.0) || (quality.is_none() && !(start.damping > 0.0)) {
        return Err(Error::Infeasible(format!("fit start {start:?}")));
    }
    let scale = problem.scale();
    let free = if quality.is_some() { 1 } else { 2 };
    let shape = |x: &[f64; 2]| -> (f64, f64) {
        match quality {
            Some(qf) => (x[0], x[0] / qf),
            None => (x[0], x[1]),
        }
    };
    let feasible = |x: &[f64; 2]| x[0] > 0.0 && (free == 1 || x[1] > 0.0) && x.iter().all(|v| v.is_finite());

    let mut x = [start.resonance / scale, start.damping / scale];
    let mut res = Vec::with_capacity(2 * problem.targets.len());
    let (r0, c0) = shape(&x);
    let (_, mut cost) = problem.profile_residual(1.0 * scale, r0, c0, &mut res);
    let energy = problem.target_energy();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut jac = vec![Vec::new(); free];
    let mut probe = Vec::with_capacity(res.len());

    while iterations < FIT_MAX_ITERS && cost > 1e-30 * energy.max(f64::MIN_POSITIVE) {
        iterations += 1;
        for (k, col) in jac.iter_mut().enumerate() {
            let h = 1e-7 * x[k].abs().max(1e-6);
            let mut xp = x;
            xp[k] += h;
            let (r, c) = shape(&xp);
            problem.profile_residual(scale, r, c, col);
            col.iter_mut().zip(&res).for_each(|(j, r0)| *j = (*j - r0) / h);
        }
        let mut jtj = Matrix2::<f64>::zeros();
        let mut jtr = Vector2::<f64>::zeros();
        for a in 0..free {
            jtr[a] = jac[a].iter().zip(&res).map(|(j, r)| j * r).sum();
            for b in 0..free {
                jtj[(a, b)] = jac[a].iter().zip(&jac[b]).map(|(p, q)| p * q).sum();
            }
        }
        let mut accepted = false;
        while lambda <= FIT_MAX_DAMPING {
            let mut lhs = jtj;
            for a in 0..free {
                lhs[(a, a)] += lambda * jtj[(a, a)].max(1e-300);
            }
            let step = if free == 1 {
                Vector2::new(-jtr[0] / lhs[(0, 0)], 0.0)
            } else {
                match lhs.try_inverse() {
                    Some(inv) => -(inv * jtr),
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                }
            };
            let trial = [x[0] + step[0], x[1] + step[1]];
            if !feasible(&trial) {
                lambda *= 10.0;
                continue;
            }
            let (r, c) = shape(&trial);
            let (_, trial_cost) = problem.profile_residual(scale, r, c, &mut probe);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                x = trial;
                cost = trial_cost;
                std::mem::swap(&mut res, &mut probe);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < FIT_REL_TOL {
                    lambda = f64::INFINITY;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || lambda.is_infinite() {
            break;
        }
    }

    let (r, c) = shape(&x);
    let resonance = r * scale;
    let damping = match quality {
        Some(qf) => resonance / qf,
        None => c * scale,
    };
    let strength = oscillator_strength(damping, resonance, &problem.targets, &problem.omega)?;
    let params = LorentzianParams {
        strength,
        damping,
        resonance,
    };
    let residual = problem.residual(&params);
    if !residual.is_finite() {
        return Err(Error::NonFinite("curve fit residual"));
    }
    Ok(FitResult {
        params,
        residual,
        start: start_id,
        iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianOptions {
    /// Offset of the out-of-band starting resonances from the band edges (rad/s).
    pub offset: f64,
    /// Allowed `Omega_R / chi`; `None` leaves `chi` free.
    pub quality_factors: Option<Vec<f64>>,
    pub iters: usize,
    pub scaling: AlphaScaling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianProjection {
    pub params: Vec<LorentzianParams>,
    pub alphas: Vec<Complex64>,
    pub starts: Vec<StartId>,
    pub objective_trace: Vec<f64>,
}

/// Fits every element of one microstrip to its scaled targets
/// `alpha_m (q_hat_m)_l` from three starting resonances (below the band,
/// above it and at the strongest bin), alternating with `alpha` updates.
pub fn project_lorentzian(
    q_hat: &[CVector],
    grid: &FrequencyGrid,
    opts: &LorentzianOptions,
) -> Result<LorentzianProjection> {
    if q_hat.len() != grid.bins() || q_hat.is_empty() {
        return Err(Error::Dimension("one weight vector per bin required".into()));
    }
    if !(opts.offset > 0.0) {
        return Err(Error::InvalidConfig("start offset must be positive".into()));
    }
    if opts.iters == 0 {
        return Err(Error::InvalidConfig("projection needs at least one iteration".into()));
    }
    let bins = grid.bins();
    let ne = q_hat[0].len();
    let qualities: Vec<Option<f64>> = match &opts.quality_factors {
        Some(set) if !set.is_empty() => set.iter().map(|&q| Some(q)).collect(),
        Some(_) => return Err(Error::InvalidConfig("empty quality-factor set".into())),
        None => vec![None],
    };
    // free-damping fits start at half the band's angular width
    let free_damping = std::f64::consts::PI * grid.bandwidth;
    let mut alphas = vec![cplx(1.0, 0.0); bins];
    let mut params: Vec<Option<LorentzianParams>> = vec![None; ne];
    let mut starts = vec![StartId::BelowBand; ne];
    let mut trace = Vec::with_capacity(opts.iters);

    for _ in 0..opts.iters {
        for l in 0..ne {
            let targets: Vec<Complex64> = (0..bins).map(|m| alphas[m] * q_hat[m][l]).collect();
            let peak = targets
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .map(|(m, _)| m)
                .unwrap_or(0);
            let problem = FitProblem::new(targets, grid)?;
            let margin = 1e-12 * problem.target_energy();
            let mut best: Option<FitResult> = None;
            let consider = |cand: FitResult, best: &mut Option<FitResult>| {
                let better = match best {
                    None => true,
                    Some(b) => cand.residual < b.residual - margin,
                };
                if better {
                    *best = Some(cand);
                }
            };
            if let Some(p) = params[l] {
                let strength = oscillator_strength(p.damping, p.resonance, &problem.targets, &problem.omega)?;
                let refit = LorentzianParams { strength, ..p };
                consider(
                    FitResult {
                        residual: problem.residual(&refit),
                        params: refit,
                        start: StartId::Incumbent,
                        iterations: 0,
                    },
                    &mut best,
                );
            }
            let seeds = [
                (StartId::BelowBand, grid.band_low() - opts.offset),
                (StartId::AboveBand, grid.band_high() + opts.offset),
                (StartId::InBandPeak, grid.omega[peak]),
            ];
            for (id, resonance) in seeds {
                if !(resonance > 0.0) {
                    continue;
                }
                for &qf in &qualities {
                    let damping = qf.map_or(free_damping, |q| resonance / q);
                    let start = LorentzianParams {
                        strength: 0.0,
                        damping,
                        resonance,
                    };
                    let fit = curve_fit_lorentzian(&problem, &start, qf, id)?;
                    consider(fit, &mut best);
                }
            }
            let winner = best.ok_or_else(|| Error::Infeasible("no feasible Lorentzian start".into()))?;
            params[l] = Some(winner.params);
            starts[l] = winner.start;
        }
        let fitted: Vec<LorentzianParams> = params.iter().map(|p| p.expect("every element fitted")).collect();
        let responses = element_responses(&fitted, grid)?;
        update_alphas(&responses, q_hat, &mut alphas, opts.scaling);
        trace.push(scaled_objective(&responses, &alphas, q_hat, opts.scaling));
    }
    Ok(LorentzianProjection {
        params: params.into_iter().map(|p| p.expect("every element fitted")).collect(),
        alphas,
        starts,
        objective_trace: trace,
    })
}

/// Per-bin response vectors of one microstrip's elements.
pub fn element_responses(params: &[LorentzianParams], grid: &FrequencyGrid) -> Result<Vec<CVector>> {
    grid.omega
        .iter()
        .map(|&w| {
            params
                .iter()
                .map(|p| p.response(w))
                .collect::<Result<Vec<_>>>()
                .map(CVector::from_vec)
        })
        .collect()
}

//! Fast runtime self-checks of the core invariants, used by `dmaq verify`.

use serde::Serialize;

use crate::channel::{generate_channel, ChannelConfig};
use crate::dma::{
    assemble_weights, build_frequency_grid, build_propagation, equivalent_channel, EquivalentChannel, FlatSet,
    FrequencyGrid, LorentzianParams,
};
use crate::error::Result;
use crate::experiment::{run_experiment, ExperimentConfig, ReceiverId};
use crate::fitting::{oscillator_strength, project_flat, project_lorentzian, AlphaScaling, LorentzianOptions};
use crate::numerics::{quad_form, CMatrix, CVector, RngStream};
use crate::quantization::{quantize_real, QuantizerSpec};
use crate::receiver::{
    excess_mse, excess_mse_stacked, greedy_configure, model_mse, optimal_digital_filter, solve_microstrip_weights,
    to_unconstrained, GreedyState,
};

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, result: Result<(bool, String)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

struct Instance {
    grid: FrequencyGrid,
    eq: EquivalentChannel,
}

fn instance(nd: usize, ne: usize, k: usize, m: usize, rng: &mut RngStream) -> Result<Instance> {
    let cfg = ChannelConfig {
        microstrips: nd,
        elements_per_strip: ne,
        users: k,
        subcarriers: m,
        taps: m.min(3),
        noise_power: rng.uniform_in(0.1, 2.0),
        ..ChannelConfig::default()
    };
    let ch = generate_channel(&cfg, rng)?;
    let grid = build_frequency_grid(1.9e9, 320e6, m)?;
    let prop = build_propagation(&cfg, &grid, 0.006, 1.592)?;
    let eq = equivalent_channel(&ch, &prop)?;
    Ok(Instance { grid, eq })
}

fn random_combiners(inst: &Instance, rng: &mut RngStream) -> Result<Vec<CMatrix>> {
    let nd = inst.eq.microstrips();
    let ne = inst.eq.elements_per_strip;
    let per_bin: Vec<Vec<CVector>> = (0..inst.grid.bins())
        .map(|_| (0..nd).map(|_| rng.complex_normal_vector(ne)).collect())
        .collect();
    assemble_weights(&to_unconstrained(&per_bin), &inst.grid)
}

fn quantizer_table() -> Result<(bool, String)> {
    let s = QuantizerSpec::new(1.0, 4, 2.0)?;
    let cases = [
        (0.1, 0.25),
        (5.0, 0.75),
        (-5.0, -0.75),
        (-0.6, -0.75),
        (1.0, 0.75),
        (0.5, 0.75),
        (-0.5, -0.25),
    ];
    let bad: Vec<_> = cases.iter().filter(|(x, y)| quantize_real(*x, &s) != *y).collect();
    Ok((
        bad.is_empty(),
        format!("{} of {} table entries differ", bad.len(), cases.len()),
    ))
}

fn quantizer_granular(rng: &mut RngStream) -> Result<(bool, String)> {
    let s = QuantizerSpec::new(1.3, 16, 2.0)?;
    let worst = (0..100_000)
        .map(|_| {
            let x = rng.uniform_in(-s.support, s.support);
            (quantize_real(x, &s) - x).abs()
        })
        .fold(0.0, f64::max);
    let bound = s.support / s.levels as f64;
    Ok((worst <= bound, format!("max error {worst:.3e}, bound {bound:.3e}")))
}

fn emse_forms(rng: &mut RngStream) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let inst = instance(3, 4, 2, 4, rng)?;
        let q = random_combiners(&inst, rng)?;
        let sigma = rng.uniform_in(0.01, 1.0);
        let a = excess_mse(&q, &inst.eq, sigma)?;
        let b = excess_mse_stacked(&q, &inst.eq, sigma)?;
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
    }
    Ok((worst <= 1e-9, format!("max relative gap {worst:.2e}")))
}

fn strip_quotient(rng: &mut RngStream) -> Result<(bool, String)> {
    let mut violations = 0;
    for _ in 0..20 {
        let a = rng.complex_normal_matrix(3, 2);
        let xi = &a * a.adjoint();
        let c = rng.complex_normal_matrix(3, 3);
        let psi = &c * c.adjoint() + CMatrix::identity(3, 3).scale(0.1);
        let d = rng.complex_normal_matrix(3, 3);
        let ups = &d * d.adjoint();
        let k = rng.uniform_in(0.01, 1.0);
        let sol = solve_microstrip_weights(&xi, &psi, &ups, k)?;
        let b = ups.scale(k) + &psi;
        for _ in 0..1000 {
            let q = rng.complex_normal_vector(3).conjugate();
            if quad_form(&xi, &q) / quad_form(&b, &q) > sol.quotient * (1.0 + 1e-10) {
                violations += 1;
            }
        }
    }
    Ok((
        violations == 0,
        format!("{violations} random directions beat the eigenvector"),
    ))
}

fn greedy_monotone(rng: &mut RngStream) -> Result<(bool, String)> {
    let inst = instance(4, 3, 2, 4, rng)?;
    let outcome = greedy_configure(&inst.eq, 0.05, None)?;
    let negative = outcome
        .objective_drops
        .iter()
        .flatten()
        .filter(|d| **d < -1e-12)
        .count();
    let state = GreedyState::new(&inst.eq, 0.05)?;
    let start = state.objective(0, &inst.eq)?;
    Ok((
        negative == 0 && start >= 0.0,
        format!("{negative} negative objective steps"),
    ))
}

fn filter_optimality(rng: &mut RngStream) -> Result<(bool, String)> {
    let inst = instance(3, 3, 2, 3, rng)?;
    let q = random_combiners(&inst, rng)?;
    let sigma = 0.2;
    let a = optimal_digital_filter(&q, &inst.eq, sigma)?;
    let base = model_mse(&a, &q, &inst.eq, sigma);
    let mut worse = 0;
    for _ in 0..200 {
        let pert: Vec<CMatrix> = a
            .iter()
            .map(|am| {
                let d = rng.complex_normal_matrix(am.nrows(), am.ncols());
                am + d.scale(1e-3 / d.norm())
            })
            .collect();
        if model_mse(&pert, &q, &inst.eq, sigma) < base - 1e-12 * base.abs() {
            worse += 1;
        }
    }
    Ok((
        worse == 0,
        format!("{worse} perturbations improved on the optimal filter"),
    ))
}

fn strength_self_consistency() -> Result<(bool, String)> {
    let grid = build_frequency_grid(1.9e9, 320e6, 16)?;
    let p = LorentzianParams {
        strength: 2.0,
        damping: 2.0 * std::f64::consts::PI * 1.88e9 / 5.0,
        resonance: 2.0 * std::f64::consts::PI * 1.88e9,
    };
    let t: Vec<_> = grid.omega.iter().map(|&w| p.response(w)).collect::<Result<_>>()?;
    let f = oscillator_strength(p.damping, p.resonance, &t, &grid.omega)?;
    let neg: Vec<_> = t.iter().map(|z| -z).collect();
    let f_neg = oscillator_strength(p.damping, p.resonance, &neg, &grid.omega)?;
    Ok((
        (f - 2.0).abs() <= 1e-10 && f_neg == 0.0,
        format!("F = {f}, negated F = {f_neg}"),
    ))
}

fn projections_monotone(rng: &mut RngStream) -> Result<(bool, String)> {
    let grid = build_frequency_grid(1.9e9, 320e6, 16)?;
    let opts = LorentzianOptions {
        offset: 2.0 * std::f64::consts::PI * 20e6,
        quality_factors: Some(vec![0.1, 5.0, 30.0]),
        iters: 5,
        scaling: AlphaScaling::Normalized,
    };
    let mut rises = 0;
    for _ in 0..5 {
        let q_hat: Vec<CVector> = (0..16).map(|_| rng.complex_normal_vector(4)).collect();
        let traces = [
            project_flat(&q_hat, FlatSet::default(), 10, AlphaScaling::Normalized)?.objective_trace,
            project_lorentzian(&q_hat, &grid, &opts)?.objective_trace,
        ];
        rises += traces
            .iter()
            .flat_map(|t| t.windows(2))
            .filter(|w| w[1] > w[0] * (1.0 + 1e-12))
            .count();
    }
    Ok((rises == 0, format!("{rises} objective increases")))
}

fn reproducibility(seed: u64) -> Result<(bool, String)> {
    let cfg = ExperimentConfig {
        channel: ChannelConfig {
            microstrips: 3,
            elements_per_strip: 3,
            users: 2,
            subcarriers: 4,
            taps: 2,
            ..ChannelConfig::default()
        },
        snr_db: vec![5.0],
        budgets: vec![24],
        trials: 2,
        seed,
        receivers: ReceiverId::ALL.to_vec(),
        projection_iters: 2,
        ..ExperimentConfig::default()
    };
    let strip = |mut v: Vec<crate::experiment::ResultRecord>| {
        v.iter_mut().for_each(|r| r.wall_time = 0.0);
        v
    };
    let a = strip(run_experiment(&cfg)?);
    let b = strip(run_experiment(&cfg)?);
    Ok((a == b, format!("{} records compared", a.len())))
}

/// Runs every check; never panics.
pub fn run_invariant_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = RngStream::new(seed);
    vec![
        outcome("quantizer table", quantizer_table()),
        outcome("quantizer granular bound", quantizer_granular(&mut rng)),
        outcome("per-bin and stacked excess MSE agree", emse_forms(&mut rng)),
        outcome("generalized eigenvector maximizes quotient", strip_quotient(&mut rng)),
        outcome("greedy objective non-increasing", greedy_monotone(&mut rng)),
        outcome("digital filter is optimal", filter_optimality(&mut rng)),
        outcome("oscillator strength self-consistent", strength_self_consistency()),
        outcome("projection objectives non-increasing", projections_monotone(&mut rng)),
        outcome("experiments reproducible", reproducibility(seed)),
    ]
}

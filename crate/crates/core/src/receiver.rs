//! Task-based receiver design: the MSE-optimal digital filter, the excess-MSE
//! objective, the greedy microstrip-by-microstrip weight design and the two
//! reference receivers.

use base64::Engine;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, OfdmBlock};
use crate::dma::{
    assemble_weights, equivalent_channel, strip_row, DmaWeights, EquivalentChannel, FlatSet, FrequencyGrid,
    MicrostripPropagation,
};
use crate::error::{Error, Result};
use crate::numerics::{
    block_diag, blocks_to_freq, blocks_to_time, cplx, dft_matrix, fix_phase, hermitian_eigen, hermitian_part, identity,
    kron, max_generalized_eigvec, CMatrix, CVector, HermitianFactor, RngStream,
};
use crate::quantization::{adc_support, noise_energy, overload_fraction, quantize_vector, row_power, QuantizerSpec};

/// Update denominators below this mean the microstrip produces no output.
pub const ZERO_POWER_FLOOR: f64 = 1e-30;

/// Per-bin filters `A_m = G_hat^H Q^H (sigma_q^2 I + Q Upsilon Q^H)^{-1}`,
/// each `K x N_d`.
pub fn optimal_digital_filter(q: &[CMatrix], eq: &EquivalentChannel, noise_energy: f64) -> Result<Vec<CMatrix>> {
    check_bins(q, eq)?;
    q.iter()
        .zip(eq.g_hat.iter().zip(&eq.upsilon))
        .map(|(qm, (g, u))| {
            let inner = inner_covariance(qm, u, noise_energy);
            let factor = HermitianFactor::new(&inner, "digital filter").map_err(|e| match e {
                Error::NotPositiveDefinite(_) => Error::Singular("digital filter"),
                other => other,
            })?;
            Ok(factor.solve(&(qm * g)).adjoint())
        })
        .collect()
}

fn check_bins(q: &[CMatrix], eq: &EquivalentChannel) -> Result<()> {
    if q.len() != eq.bins() || q.iter().any(|m| m.ncols() != eq.elements()) {
        return Err(Error::Dimension(format!(
            "{} weight matrices for {} bins of {} elements",
            q.len(),
            eq.bins(),
            eq.elements()
        )));
    }
    Ok(())
}

/// `sigma_q^2 I + Q Upsilon Q^H`.
fn inner_covariance(q: &CMatrix, upsilon: &CMatrix, noise_energy: f64) -> CMatrix {
    let mut inner = hermitian_part(&(q * upsilon * q.adjoint()));
    for k in 0..inner.nrows() {
        inner[(k, k)] += noise_energy;
    }
    inner
}

/// Full `M K x M N_d` filter `V_2^H blkdiag(A_m) V_1^H`.
pub fn stacked_filter(filters: &[CMatrix]) -> CMatrix {
    let m = filters.len();
    let (k, nd) = filters[0].shape();
    let f = dft_matrix(m);
    let v2h = kron(&f.adjoint(), &identity(k));
    let v1h = kron(&f, &identity(nd));
    v2h * block_diag(filters) * v1h
}

/// Inverse of [`stacked_filter`].
pub fn unstack_filter(a: &CMatrix, bins: usize, users: usize, microstrips: usize) -> Result<Vec<CMatrix>> {
    if a.shape() != (bins * users, bins * microstrips) {
        return Err(Error::Dimension(format!("stacked filter is {:?}", a.shape())));
    }
    let f = dft_matrix(bins);
    let blocks = kron(&f, &identity(users)) * a * kron(&f.adjoint(), &identity(microstrips));
    Ok((0..bins)
        .map(|m| {
            blocks
                .view((m * users, m * microstrips), (users, microstrips))
                .into_owned()
        })
        .collect())
}

/// Per-bin excess MSE
/// `tr[G_hat^H Y^-1 (Y^-1 + sigma_q^-2 Q^H Q)^-1 Y^-1 G_hat]`, `Y = Upsilon_m`.
pub fn excess_mse_bins(q: &[CMatrix], eq: &EquivalentChannel, noise_energy: f64) -> Result<Vec<f64>> {
    check_bins(q, eq)?;
    if !(noise_energy > 0.0) {
        return Err(Error::InvalidConfig(
            "excess MSE needs a positive quantization noise energy".into(),
        ));
    }
    q.iter()
        .zip(eq.g_hat.iter().zip(&eq.upsilon))
        .map(|(qm, (g, u))| {
            let uf = HermitianFactor::new(u, "Upsilon")?;
            let u_inv = uf.inverse();
            let x = uf.solve(g);
            let inner = hermitian_part(&(&u_inv + (qm.adjoint() * qm).unscale(noise_energy)));
            let y = HermitianFactor::new(&inner, "excess MSE inner")?.solve(&x);
            Ok(x.adjoint().component_mul(&y.transpose()).sum().re)
        })
        .collect()
}

pub fn excess_mse(q: &[CMatrix], eq: &EquivalentChannel, noise_energy: f64) -> Result<f64> {
    Ok(excess_mse_bins(q, eq, noise_energy)?.iter().sum())
}

/// Excess MSE from the stacked matrices
/// `tr[G^H S^-1 (S^-1 + sigma_q^-2 Q^H Q)^-1 S^-1 G]` with `G`, `S`, `Q`
/// block diagonal over bins. Uses general LU inverses throughout.
pub fn excess_mse_stacked(q: &[CMatrix], eq: &EquivalentChannel, noise_energy: f64) -> Result<f64> {
    check_bins(q, eq)?;
    let g = block_diag(&eq.g_hat);
    let sigma = block_diag(&eq.upsilon);
    let qb = block_diag(q);
    let sigma_inv = sigma.try_inverse().ok_or(Error::Singular("stacked covariance"))?;
    let inner = &sigma_inv + (qb.adjoint() * &qb).unscale(noise_energy);
    let inner_inv = inner.try_inverse().ok_or(Error::Singular("stacked inner matrix"))?;
    Ok((g.adjoint() * &sigma_inv * inner_inv * &sigma_inv * g).trace().re)
}

/// Unquantized MMSE `sum_m tr[I - G_hat^H Upsilon^-1 G_hat]`; with an
/// invertible `H_m` this equals the MMSE from the raw antenna outputs.
pub fn unquantized_mmse(eq: &EquivalentChannel) -> Result<f64> {
    let mut total = 0.0;
    for (g, u) in eq.g_hat.iter().zip(&eq.upsilon) {
        let x = HermitianFactor::new(u, "Upsilon")?.solve(g);
        total += g.ncols() as f64 - (g.adjoint() * x).trace().re;
    }
    Ok(total)
}

/// MSE of arbitrary per-bin filters under the additive quantization-noise
/// model `r_m = Q_m x_m + e_m`, `e_m ~ (0, sigma_q^2 I)`.
pub fn model_mse(filters: &[CMatrix], q: &[CMatrix], eq: &EquivalentChannel, noise_energy: f64) -> f64 {
    let mut total = 0.0;
    for ((a, qm), (g, u)) in filters.iter().zip(q).zip(eq.g_hat.iter().zip(&eq.upsilon)) {
        let cross = (a * qm * g).trace().re;
        let spread = (a * inner_covariance(qm, u, noise_energy) * a.adjoint()).trace().re;
        total += g.ncols() as f64 - 2.0 * cross + spread;
    }
    total
}

/// Greedy design state. Instead of `U_{m,i}` the inverse `W = U^{-1}` and
/// `Y = W Upsilon^{-1} G_hat` are carried and updated by Sherman-Morrison,
/// which needs no factorization of `Upsilon` at all (`W_0 = Upsilon`,
/// `Y_0 = G_hat`).
#[derive(Clone, Debug)]
pub struct GreedyState {
    kappa: f64,
    elements_per_strip: usize,
    next_strip: usize,
    inv_u: Vec<CMatrix>,
    y: Vec<CMatrix>,
}

impl GreedyState {
    pub fn new(eq: &EquivalentChannel, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidConfig("kappa must be positive".into()));
        }
        Ok(Self {
            kappa,
            elements_per_strip: eq.elements_per_strip,
            next_strip: 0,
            inv_u: eq.upsilon.clone(),
            y: eq.g_hat.clone(),
        })
    }

    /// Zero-based index of the microstrip to be designed next.
    pub fn next_strip(&self) -> usize {
        self.next_strip
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Current `U_{m,i}^{-1}`.
    pub fn inverse_u(&self, m: usize) -> &CMatrix {
        &self.inv_u[m]
    }

    /// `(Xi, Psi)` for the next microstrip at bin `m`.
    pub fn objective_terms(&self, m: usize) -> (CMatrix, CMatrix) {
        let ne = self.elements_per_strip;
        let start = self.next_strip * ne;
        let ys = self.y[m].rows(start, ne);
        let xi = hermitian_part(&(ys * ys.adjoint()));
        let psi = hermitian_part(&self.inv_u[m].view((start, start), (ne, ne)).into_owned());
        (xi, psi)
    }

    /// Rank-one update `U += (kappa q^T Ups_ii q^*)^{-1} E q^* q^T E^T` for the
    /// next microstrip at bin `m`; returns the objective decrease.
    pub fn apply(&mut self, m: usize, upsilon: &CMatrix, q: &CVector) -> Result<f64> {
        let ne = self.elements_per_strip;
        let start = self.next_strip * ne;
        let v = q.conjugate();
        let ups_ii = upsilon.view((start, start), (ne, ne));
        let power = v.dotc(&(ups_ii * &v)).re;
        let energy = self.kappa * power;
        if !(energy > ZERO_POWER_FLOOR) {
            return Err(Error::ZeroPower {
                strip: self.next_strip,
                bin: m,
            });
        }
        let w = &mut self.inv_u[m];
        let we: CVector = w.columns(start, ne) * &v;
        let ewe = v.dotc(&we.rows(start, ne)).re;
        let ey: nalgebra::RowDVector<Complex64> = v.adjoint() * self.y[m].rows(start, ne);
        let gain = ey.norm_squared() / (energy + ewe);
        let scale = cplx(1.0 / (energy + ewe), 0.0);
        w.gerc(-scale, &we, &we, cplx(1.0, 0.0));
        self.y[m] -= (&we * ey) * scale;
        Ok(gain)
    }

    fn advance(&mut self) {
        self.next_strip += 1;
    }

    /// `tr[G_hat^H Ups^-1 U^-1 Ups^-1 G_hat]`, recomputed with a fresh solve.
    pub fn objective(&self, m: usize, eq: &EquivalentChannel) -> Result<f64> {
        let x = HermitianFactor::new(&eq.upsilon[m], "Upsilon")?.solve(&eq.g_hat[m]);
        Ok((x.adjoint() * &self.y[m]).trace().re)
    }
}

/// `(Xi_{m,i}, Psi_{m,i})` for microstrip `i` (zero-based).
pub fn greedy_objective_terms(state: &GreedyState, i: usize, m: usize) -> Result<(CMatrix, CMatrix)> {
    if i != state.next_strip {
        return Err(Error::Dimension(format!(
            "greedy state is at microstrip {}, not {i}",
            state.next_strip
        )));
    }
    Ok(state.objective_terms(m))
}

/// Outcome of [`solve_microstrip_weights`].
#[derive(Clone, Debug)]
pub struct StripSolution {
    /// Unit-norm weights `q` (the conjugate generalized eigenvector).
    pub weights: CVector,
    /// Maximal quotient `q^T Xi q^* / q^T B q^*`.
    pub quotient: f64,
    /// `Xi` vanished; weights are an arbitrary valid choice.
    pub degenerate: bool,
}

/// Maximizes `q^T Xi q^* / q^T (kappa E^T Ups E + Psi) q^*`.
pub fn solve_microstrip_weights(xi: &CMatrix, psi: &CMatrix, ups_slice: &CMatrix, kappa: f64) -> Result<StripSolution> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidConfig("kappa must be positive".into()));
    }
    let b = hermitian_part(&(ups_slice.scale(kappa) + psi));
    let scale_b = b.trace().re;
    if xi.trace().re <= 1e-14 * scale_b {
        // principal eigenvector of Psi^{-1}
        let (_, vectors) = hermitian_eigen(psi);
        let mut v: CVector = vectors.column(0).into_owned();
        fix_phase(&mut v);
        return Ok(StripSolution {
            weights: v.conjugate(),
            quotient: 0.0,
            degenerate: true,
        });
    }
    let (v, quotient) = max_generalized_eigvec(xi, &b)?;
    Ok(StripSolution {
        weights: v.conjugate(),
        quotient,
        degenerate: false,
    })
}

/// Per-microstrip hook used by the interleaved design: receives the greedy
/// weights of microstrip `i` for every bin and returns the weights to commit.
pub type StripProjector<'a> = dyn FnMut(usize, &[CVector]) -> Result<Vec<CVector>> + 'a;

#[derive(Clone, Debug)]
pub struct GreedyOutcome {
    /// Greedy (unprojected) weights `[m][i]`.
    pub unconstrained: Vec<Vec<CVector>>,
    /// Weights committed to the state `[m][i]`; equal to `unconstrained`
    /// without a projector.
    pub committed: Vec<Vec<CVector>>,
    /// Bins `(m, i)` where `Xi` vanished.
    pub degenerate: Vec<(usize, usize)>,
    /// Objective decrease contributed by each microstrip, `[m][i]`.
    pub objective_drops: Vec<Vec<f64>>,
}

impl GreedyOutcome {
    pub fn weights(&self) -> DmaWeights {
        to_unconstrained(&self.unconstrained)
    }

    pub fn committed_weights(&self) -> DmaWeights {
        to_unconstrained(&self.committed)
    }
}

pub fn to_unconstrained(per_bin: &[Vec<CVector>]) -> DmaWeights {
    DmaWeights::Unconstrained {
        bins: per_bin
            .iter()
            .map(|strips| strips.iter().map(|v| v.iter().copied().collect()).collect())
            .collect(),
    }
}

/// Greedy unconstrained configuration, microstrips in order, every bin
/// handled independently. With a projector, each microstrip's weights are
/// replaced by the projector's output before the state update.
pub fn greedy_configure(
    eq: &EquivalentChannel,
    kappa: f64,
    mut projector: Option<&mut StripProjector<'_>>,
) -> Result<GreedyOutcome> {
    let bins = eq.bins();
    let nd = eq.microstrips();
    let ne = eq.elements_per_strip;
    let mut state = GreedyState::new(eq, kappa)?;
    let mut unconstrained = vec![Vec::with_capacity(nd); bins];
    let mut committed = vec![Vec::with_capacity(nd); bins];
    let mut drops = vec![Vec::with_capacity(nd); bins];
    let mut degenerate = Vec::new();
    for i in 0..nd {
        let mut strip = Vec::with_capacity(bins);
        for m in 0..bins {
            let (xi, psi) = state.objective_terms(m);
            let ups = eq.upsilon[m].view((i * ne, i * ne), (ne, ne)).into_owned();
            let sol = solve_microstrip_weights(&xi, &psi, &ups, kappa)?;
            if sol.degenerate {
                log::debug!("bin {m}, microstrip {i}: vanishing signal term");
                degenerate.push((m, i));
            }
            strip.push(sol.weights);
        }
        let applied = match projector.as_deref_mut() {
            Some(project) => {
                let out = project(i, &strip)?;
                if out.len() != bins || out.iter().any(|v| v.len() != ne) {
                    return Err(Error::Dimension("projector output shape".into()));
                }
                out
            }
            None => strip.clone(),
        };
        for m in 0..bins {
            let gain = state.apply(m, &eq.upsilon[m], &applied[m])?;
            drops[m].push(gain);
        }
        state.advance();
        for (m, (u, c)) in strip.into_iter().zip(applied).enumerate() {
            unconstrained[m].push(u);
            committed[m].push(c);
        }
    }
    Ok(GreedyOutcome {
        unconstrained,
        committed,
        degenerate,
        objective_drops: drops,
    })
}

/// How to equalize microstrip output powers before fixing the ADC support.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerBalance {
    None,
    /// Every `(m, i)` output scaled to unit power (unconstrained weights only).
    PerBin,
    /// Every microstrip scaled down to the weakest microstrip's bin-averaged
    /// power (flat amplitudes are clamped to their interval).
    #[default]
    PerStrip,
}

pub fn balance_output_power(
    w: &mut DmaWeights,
    grid: &FrequencyGrid,
    eq: &EquivalentChannel,
    mode: PowerBalance,
) -> Result<()> {
    let ne = eq.elements_per_strip;
    match mode {
        PowerBalance::None => Ok(()),
        PowerBalance::PerBin => {
            let DmaWeights::Unconstrained { bins } = w else {
                return Err(Error::InvalidConfig(
                    "per-bin balancing needs unconstrained weights".into(),
                ));
            };
            for (m, strips) in bins.iter_mut().enumerate() {
                for (i, row) in strips.iter_mut().enumerate() {
                    let v = CVector::from_vec(row.clone());
                    let ups = eq.upsilon[m].view((i * ne, i * ne), (ne, ne));
                    let p = v.conjugate().dotc(&(ups * v.conjugate())).re;
                    if !(p > ZERO_POWER_FLOOR) {
                        return Err(Error::ZeroPower { strip: i, bin: m });
                    }
                    let c = 1.0 / p.sqrt();
                    row.iter_mut().for_each(|z| *z *= c);
                }
            }
            Ok(())
        }
        PowerBalance::PerStrip => {
            let q = assemble_weights(w, grid)?;
            let nd = q[0].nrows();
            let power: Vec<f64> = (0..nd)
                .map(|i| {
                    q.iter()
                        .zip(&eq.upsilon)
                        .map(|(qm, u)| row_power(qm, u, i))
                        .sum::<f64>()
                        / q.len() as f64
                })
                .collect();
            if let Some(i) = power.iter().position(|p| !(*p > ZERO_POWER_FLOOR)) {
                return Err(Error::ZeroPower { strip: i, bin: 0 });
            }
            let target = power.iter().copied().fold(f64::INFINITY, f64::min);
            for (i, p) in power.iter().enumerate() {
                w.scale_strip(i, (target / p).sqrt());
            }
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Unconstrained,
    FrequencySelective,
    FrequencyFlat,
    PhaseShifter,
}

/// Weights, ADC support and digital filters, ready to process signals.
#[derive(Clone, Debug)]
pub struct ReceiverDesign {
    pub kind: DesignKind,
    pub weights: DmaWeights,
    pub grid: FrequencyGrid,
    pub propagation: MicrostripPropagation,
    pub combiners: Vec<CMatrix>,
    pub quantizer: QuantizerSpec,
    pub filters: Vec<CMatrix>,
    pub seed: u64,
}

/// Assembles `Q_m`, sets the ADC support (from the support rule unless
/// `fixed_support` is given) and computes the optimal filters.
#[allow(clippy::too_many_arguments)]
pub fn finalize_design(
    kind: DesignKind,
    weights: DmaWeights,
    grid: &FrequencyGrid,
    prop: &MicrostripPropagation,
    eq: &EquivalentChannel,
    levels: usize,
    eta: f64,
    fixed_support: Option<f64>,
    seed: u64,
) -> Result<ReceiverDesign> {
    let combiners = assemble_weights(&weights, grid)?;
    let support = match fixed_support {
        Some(g) => g,
        None => adc_support(&combiners, &eq.upsilon, eta)?,
    };
    if !(support > 0.0) {
        return Err(Error::ZeroPower { strip: 0, bin: 0 });
    }
    let quantizer = QuantizerSpec::new(support, levels, eta)?;
    let filters = optimal_digital_filter(&combiners, eq, quantizer.noise_energy())?;
    Ok(ReceiverDesign {
        kind,
        weights,
        grid: grid.clone(),
        propagation: prop.clone(),
        combiners,
        quantizer,
        filters,
        seed,
    })
}

/// Reference receiver: partially connected phase shifters without microstrip
/// propagation. Each microstrip gets frequency-flat unit-modulus weights
/// with the phases of the conjugate principal eigenvector of its
/// bin-averaged channel Gram block; the ADC support is fixed.
pub fn baseline_phase_shifter(
    ch: &ChannelRealization,
    grid: &FrequencyGrid,
    fixed_support: f64,
    levels: usize,
    eta: f64,
) -> Result<ReceiverDesign> {
    if !(fixed_support > 0.0) {
        return Err(Error::InvalidConfig(
            "phase-shifter ADC support must be positive".into(),
        ));
    }
    let prop = MicrostripPropagation::identity(&ch.config);
    let eq = equivalent_channel(ch, &prop)?;
    let ne = ch.config.elements_per_strip;
    let n = ch.config.elements();
    let mut gram = CMatrix::zeros(n, n);
    for g in &ch.bins {
        gram += g * g.adjoint();
    }
    gram.unscale_mut(ch.subcarriers() as f64);
    let strips = (0..ch.config.microstrips)
        .map(|i| {
            let block = gram.view((i * ne, i * ne), (ne, ne)).into_owned();
            let (_, vectors) = hermitian_eigen(&block);
            let mut v: CVector = vectors.column(ne - 1).into_owned();
            fix_phase(&mut v);
            v.iter()
                .map(|z| {
                    let c = z.conj();
                    if c.norm() > 0.0 {
                        c / c.norm()
                    } else {
                        cplx(1.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    let weights = DmaWeights::FrequencyFlat {
        set: FlatSet::UnitModulus,
        strips,
    };
    finalize_design(
        DesignKind::PhaseShifter,
        weights,
        grid,
        &prop,
        &eq,
        levels,
        eta,
        Some(fixed_support),
        ch.seed,
    )
}

/// Per-bin LMMSE estimate from the raw antenna outputs,
/// `s_hat_m = G_m^H (G_m G_m^H + C_W)^{-1} y_m`.
pub fn lmmse_estimate(ch: &ChannelRealization, y: &[CVector]) -> Result<Vec<CVector>> {
    if y.len() != ch.subcarriers() {
        return Err(Error::Dimension("observation bin count".into()));
    }
    ch.bins
        .iter()
        .zip(y)
        .map(|(g, ym)| {
            let cov = hermitian_part(&(g * g.adjoint() + &ch.noise_cov));
            let x = HermitianFactor::new(&cov, "LMMSE covariance")?.solve_vec(ym);
            Ok(g.adjoint() * x)
        })
        .collect()
}

/// Analytic per-block MMSE `sum_m tr[I - G^H (G G^H + C_W)^{-1} G]`.
pub fn lmmse_error(ch: &ChannelRealization) -> Result<f64> {
    let mut total = 0.0;
    for g in &ch.bins {
        let cov = hermitian_part(&(g * g.adjoint() + &ch.noise_cov));
        let x = HermitianFactor::new(&cov, "LMMSE covariance")?.solve(g);
        total += g.ncols() as f64 - (g.adjoint() * x).trace().re;
    }
    Ok(total)
}

/// Unquantized LMMSE reference on a fresh noise draw.
pub fn baseline_lmmse_unquantized(
    ch: &ChannelRealization,
    block: &OfdmBlock,
    rng: &mut RngStream,
) -> Result<Vec<CVector>> {
    let y = crate::channel::channel_output(ch, block, rng)?;
    lmmse_estimate(ch, &y)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AdcMode {
    #[default]
    Quantize,
    /// Infinite resolution: ADC inputs pass through unchanged.
    Ideal,
}

#[derive(Clone, Debug)]
pub struct Recovery {
    /// Frequency-domain symbol estimates per bin.
    pub estimates: Vec<CVector>,
    /// Fraction of real/imaginary ADC inputs beyond the support.
    pub overload: f64,
    /// Time-domain ADC inputs `V_1 Z_bar`.
    pub adc_inputs: Vec<CVector>,
    /// ADC outputs (equal to the inputs in [`AdcMode::Ideal`]).
    pub adc_outputs: Vec<CVector>,
}

/// Runs one block through the front end, the ADCs and the digital filter,
/// using the given per-bin antenna noise `w_m`.
pub fn recover_from_noise(
    design: &ReceiverDesign,
    ch: &ChannelRealization,
    block: &OfdmBlock,
    noise: &[CVector],
    mode: AdcMode,
) -> Result<Recovery> {
    let bins = ch.subcarriers();
    if block.subcarriers() != bins || noise.len() != bins || design.combiners.len() != bins {
        return Err(Error::Dimension("design / channel / block bin count".into()));
    }
    let z: Vec<CVector> = (0..bins)
        .map(|m| {
            let x = &ch.bins[m] * &block.symbols[m] + &noise[m];
            let hx = CVector::from_fn(x.len(), |r, _| design.propagation.diagonals[m][r] * x[r]);
            &design.combiners[m] * hx
        })
        .collect();
    let adc_inputs = blocks_to_time(&z);
    let overload = overload_fraction(&adc_inputs, design.quantizer.support);
    let adc_outputs: Vec<CVector> = match mode {
        AdcMode::Quantize => adc_inputs
            .iter()
            .map(|v| quantize_vector(v, &design.quantizer))
            .collect(),
        AdcMode::Ideal => adc_inputs.clone(),
    };
    let freq = blocks_to_freq(&adc_outputs);
    let estimates = design.filters.iter().zip(&freq).map(|(a, d)| a * d).collect();
    Ok(Recovery {
        estimates,
        overload,
        adc_inputs,
        adc_outputs,
    })
}

pub fn recover_symbols(
    design: &ReceiverDesign,
    ch: &ChannelRealization,
    block: &OfdmBlock,
    rng: &mut RngStream,
) -> Result<Recovery> {
    let noise = ch.draw_noise(rng);
    recover_from_noise(design, ch, block, &noise, AdcMode::Quantize)
}

/// Hard QPSK decisions `(sign(re) + j sign(im)) / sqrt 2`.
pub fn qpsk_decisions(estimates: &[CVector]) -> Vec<CVector> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sign = |x: f64| if x >= 0.0 { s } else { -s };
    estimates
        .iter()
        .map(|v| v.map(|z| cplx(sign(z.re), sign(z.im))))
        .collect()
}

/// Serializable form of a [`ReceiverDesign`]; the digital filter is the full
/// stacked matrix as a base64 blob of little-endian `f64` `(re, im)` pairs in
/// row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub kind: DesignKind,
    pub weights: DmaWeights,
    pub grid: FrequencyGrid,
    pub propagation: MicrostripPropagation,
    pub quantizer: QuantizerSpec,
    pub filter_rows: usize,
    pub filter_cols: usize,
    pub filter_blob: String,
    pub seed: u64,
}

impl ReceiverDesign {
    pub fn to_record(&self) -> DesignRecord {
        let a = stacked_filter(&self.filters);
        let mut bytes = Vec::with_capacity(a.len() * 16);
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                bytes.extend_from_slice(&a[(r, c)].re.to_le_bytes());
                bytes.extend_from_slice(&a[(r, c)].im.to_le_bytes());
            }
        }
        DesignRecord {
            kind: self.kind,
            weights: self.weights.clone(),
            grid: self.grid.clone(),
            propagation: self.propagation.clone(),
            quantizer: self.quantizer,
            filter_rows: a.nrows(),
            filter_cols: a.ncols(),
            filter_blob: base64::engine::general_purpose::STANDARD.encode(bytes),
            seed: self.seed,
        }
    }

    pub fn from_record(rec: &DesignRecord) -> Result<Self> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&rec.filter_blob)
            .map_err(|e| Error::Parse(format!("filter blob: {e}")))?;
        if bytes.len() != rec.filter_rows * rec.filter_cols * 16 {
            return Err(Error::Parse("filter blob length".into()));
        }
        let value = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().expect("8-byte chunk"));
        let a = CMatrix::from_fn(rec.filter_rows, rec.filter_cols, |r, c| {
            let k = 2 * (r * rec.filter_cols + c);
            cplx(value(k), value(k + 1))
        });
        let combiners = assemble_weights(&rec.weights, &rec.grid)?;
        let bins = rec.grid.bins();
        let nd = combiners[0].nrows();
        if bins == 0 || !rec.filter_rows.is_multiple_of(bins) {
            return Err(Error::Parse("filter rows do not match bin count".into()));
        }
        let filters = unstack_filter(&a, bins, rec.filter_rows / bins, nd)?;
        rec.quantizer.validate()?;
        Ok(Self {
            kind: rec.kind,
            weights: rec.weights.clone(),
            grid: rec.grid.clone(),
            propagation: rec.propagation.clone(),
            combiners,
            quantizer: rec.quantizer,
            filters,
            seed: rec.seed,
        })
    }

    /// Stacked `M K x M N_d` filter `A`.
    pub fn stacked_filter(&self) -> CMatrix {
        stacked_filter(&self.filters)
    }

    /// Row `i` of `Q_m` on its own microstrip.
    pub fn strip_weights(&self, m: usize, i: usize) -> CVector {
        strip_row(&self.combiners[m], i, self.propagation.elements_per_strip)
    }

    pub fn noise_energy(&self) -> f64 {
        noise_energy(self.quantizer.support, self.quantizer.levels)
    }
}

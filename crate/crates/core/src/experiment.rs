//! Monte Carlo harness: receiver configurations R1-R5, SNR and bit-budget
//! sweeps, MSE/BER accounting and result files.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    channel_output_with_noise, generate_channel, generate_ofdm_block, ChannelConfig, ChannelRealization, Constellation,
    OfdmBlock,
};
use crate::dma::{
    build_frequency_grid, build_propagation, equivalent_channel, DmaWeights, EquivalentChannel, FlatSet, FrequencyGrid,
    LorentzianParams, MicrostripPropagation,
};
use crate::error::{Error, Result};
use crate::fitting::{element_responses, project_flat, project_lorentzian, AlphaScaling, LorentzianOptions};
use crate::numerics::{CVector, RngStream};
use crate::quantization::{kappa, levels_for_budget};
use crate::receiver::{
    balance_output_power, baseline_phase_shifter, finalize_design, greedy_configure, lmmse_error, lmmse_estimate,
    recover_from_noise, AdcMode, DesignKind, GreedyOutcome, PowerBalance, ReceiverDesign, StripProjector,
};

/// Shipped defaults.
pub const SHIPPED_TOML: &str = include_str!("../paper.toml");

/// Human-readable SNR convention, repeated in every result file.
pub const SNR_DEFINITION: &str =
    "snr_db = 10 log10(1 / sigma_z^2): unit-energy symbols per user, per-element noise power sigma_z^2";

/// Resampling attempts per trial after the first failure.
pub const MAX_RETRIES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReceiverId {
    /// Unconstrained DMA weights from the greedy design.
    R1,
    /// Lorentzian (frequency-selective) DMA weights.
    R2,
    /// Frequency-flat amplitude DMA weights.
    R3,
    /// Phase-shifter hybrid receiver with a fixed ADC support.
    R4,
    /// Unquantized LMMSE estimator.
    R5,
}

impl ReceiverId {
    pub const ALL: [ReceiverId; 5] = [Self::R1, Self::R2, Self::R3, Self::R4, Self::R5];

    pub fn label(self) -> &'static str {
        match self {
            Self::R1 => "R1",
            Self::R2 => "R2",
            Self::R3 => "R3",
            Self::R4 => "R4",
            Self::R5 => "R5",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::R1 => "unconstrained DMA",
            Self::R2 => "frequency-selective Lorentzian DMA",
            Self::R3 => "frequency-flat amplitude DMA",
            Self::R4 => "phase-shifter network, fixed ADC support",
            Self::R5 => "unquantized LMMSE",
        }
    }

    pub fn design_kind(self) -> Option<DesignKind> {
        match self {
            Self::R1 => Some(DesignKind::Unconstrained),
            Self::R2 => Some(DesignKind::FrequencySelective),
            Self::R3 => Some(DesignKind::FrequencyFlat),
            Self::R4 => Some(DesignKind::PhaseShifter),
            Self::R5 => None,
        }
    }
}

impl fmt::Display for ReceiverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ReceiverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown receiver {s:?} (expected R1..R5)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelConfig,
    pub snr_db: Vec<f64>,
    /// Overall bit budgets `b_overall`.
    pub budgets: Vec<u32>,
    pub trials: usize,
    pub seed: u64,
    pub receivers: Vec<ReceiverId>,
    pub constellation: Constellation,
    /// Project each microstrip right after its greedy step instead of after
    /// the full greedy pass.
    pub interleaved: bool,
    pub carrier: f64,
    pub bandwidth: f64,
    /// Microstrip attenuation per element `alpha_h`.
    pub attenuation: f64,
    /// Microstrip phase slope `beta`.
    pub phase_slope: f64,
    pub flat_set: FlatSet,
    pub eta: f64,
    pub quality_factors: Vec<f64>,
    /// Lorentzian fit start offset from the band edges (rad/s).
    pub start_offset: f64,
    pub projection_iters: usize,
    pub alpha_scaling: AlphaScaling,
    /// Fixed ADC support of R4.
    pub phase_shifter_support: f64,
    pub unconstrained_balance: PowerBalance,
    pub constrained_balance: PowerBalance,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            channel: ChannelConfig::default(),
            snr_db: (-2..=8).map(|k| 2.0 * k as f64).collect(),
            budgets: vec![80],
            trials: 1000,
            seed: 2021,
            receivers: ReceiverId::ALL.to_vec(),
            constellation: Constellation::Qpsk,
            interleaved: false,
            carrier: 1.9e9,
            bandwidth: 320e6,
            attenuation: 0.006,
            phase_slope: 1.592,
            flat_set: FlatSet::default(),
            eta: 2.0,
            quality_factors: vec![0.1, 5.0, 30.0],
            start_offset: 2.0 * std::f64::consts::PI * 20e6,
            projection_iters: 10,
            alpha_scaling: AlphaScaling::PhaseAligned,
            phase_shifter_support: 100.0,
            unconstrained_balance: PowerBalance::PerBin,
            constrained_balance: PowerBalance::PerStrip,
        }
    }
}

impl ExperimentConfig {
    /// The shipped defaults.
    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED_TOML).expect("shipped configuration parses")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a `.json` or `.toml` file (anything else is tried as TOML).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR list must be non-empty and finite".into());
        }
        if self.budgets.is_empty() {
            return bad("no bit budgets".into());
        }
        for &b in &self.budgets {
            levels_for_budget(b as f64, self.channel.microstrips)?;
        }
        if self.receivers.is_empty() {
            return bad("no receivers selected".into());
        }
        if !(self.eta > 0.0) {
            return bad(format!("eta = {} must be positive", self.eta));
        }
        if self.quality_factors.is_empty() || self.quality_factors.iter().any(|q| !(*q > 0.0)) {
            return bad("quality factors must be positive".into());
        }
        if !(self.start_offset > 0.0) {
            return bad("start offset must be positive".into());
        }
        if self.projection_iters == 0 {
            return bad("projection needs at least one iteration".into());
        }
        if !(self.phase_shifter_support > 0.0) {
            return bad("phase-shifter ADC support must be positive".into());
        }
        if self.constrained_balance == PowerBalance::PerBin {
            return bad("per-bin balancing would break frequency-flat or Lorentzian structure".into());
        }
        if !(self.carrier > self.bandwidth / 2.0) || !(self.bandwidth > 0.0) {
            return bad("carrier must exceed half the bandwidth".into());
        }
        Ok(())
    }

    /// Grid and propagation shared by all trials.
    pub fn front_end(&self) -> Result<(FrequencyGrid, MicrostripPropagation)> {
        let grid = build_frequency_grid(self.carrier, self.bandwidth, self.channel.subcarriers)?;
        let prop = build_propagation(&self.channel, &grid, self.attenuation, self.phase_slope)?;
        Ok((grid, prop))
    }
}

/// `sigma_z^2 = 10^(-snr / 10)`.
pub fn snr_to_noise_power(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Builds the requested quantized receivers (R1-R4) for one channel.
#[allow(clippy::too_many_arguments)]
pub fn design_receivers(
    cfg: &ExperimentConfig,
    ch: &ChannelRealization,
    eq: &EquivalentChannel,
    grid: &FrequencyGrid,
    prop: &MicrostripPropagation,
    levels: usize,
    wanted: &[ReceiverId],
) -> Result<Vec<(ReceiverId, ReceiverDesign)>> {
    let k = kappa(cfg.eta, levels);
    let needs = |r| wanted.contains(&r);
    let shared: Option<GreedyOutcome> =
        if needs(ReceiverId::R1) || (!cfg.interleaved && (needs(ReceiverId::R2) || needs(ReceiverId::R3))) {
            Some(greedy_configure(eq, k, None)?)
        } else {
            None
        };
    let finish = |kind, mut w: DmaWeights, balance| -> Result<ReceiverDesign> {
        balance_output_power(&mut w, grid, eq, balance)?;
        finalize_design(kind, w, grid, prop, eq, levels, cfg.eta, None, ch.seed)
    };

    let mut out = Vec::with_capacity(wanted.len());
    for &r in wanted {
        let design = match r {
            ReceiverId::R1 => {
                let w = shared.as_ref().expect("greedy pass ran").weights();
                finish(DesignKind::Unconstrained, w, cfg.unconstrained_balance)?
            }
            ReceiverId::R2 => {
                let w = lorentzian_weights(cfg, eq, grid, k, shared.as_ref())?;
                finish(DesignKind::FrequencySelective, w, cfg.constrained_balance)?
            }
            ReceiverId::R3 => {
                let w = flat_weights(cfg, eq, k, shared.as_ref())?;
                finish(DesignKind::FrequencyFlat, w, cfg.constrained_balance)?
            }
            ReceiverId::R4 => baseline_phase_shifter(ch, grid, cfg.phase_shifter_support, levels, cfg.eta)?,
            ReceiverId::R5 => continue,
        };
        out.push((r, design));
    }
    Ok(out)
}

fn strip_targets(outcome: &GreedyOutcome, i: usize) -> Vec<CVector> {
    outcome.unconstrained.iter().map(|strips| strips[i].clone()).collect()
}

fn lorentzian_options(cfg: &ExperimentConfig) -> LorentzianOptions {
    LorentzianOptions {
        offset: cfg.start_offset,
        quality_factors: Some(cfg.quality_factors.clone()),
        iters: cfg.projection_iters,
        scaling: cfg.alpha_scaling,
    }
}

fn lorentzian_weights(
    cfg: &ExperimentConfig,
    eq: &EquivalentChannel,
    grid: &FrequencyGrid,
    k: f64,
    shared: Option<&GreedyOutcome>,
) -> Result<DmaWeights> {
    let opts = lorentzian_options(cfg);
    let nd = eq.microstrips();
    let mut params: Vec<Vec<LorentzianParams>> = Vec::with_capacity(nd);
    match (cfg.interleaved, shared) {
        (false, Some(outcome)) => {
            for i in 0..nd {
                params.push(project_lorentzian(&strip_targets(outcome, i), grid, &opts)?.params);
            }
        }
        _ => {
            let mut project = |_i: usize, strip: &[CVector]| -> Result<Vec<CVector>> {
                let fit = project_lorentzian(strip, grid, &opts)?;
                let responses = element_responses(&fit.params, grid)?;
                params.push(fit.params);
                Ok(responses)
            };
            greedy_configure(eq, k, Some(&mut project as &mut StripProjector<'_>))?;
        }
    }
    Ok(DmaWeights::Lorentzian {
        params,
        quality_factors: Some(cfg.quality_factors.clone()),
    })
}

fn flat_weights(
    cfg: &ExperimentConfig,
    eq: &EquivalentChannel,
    k: f64,
    shared: Option<&GreedyOutcome>,
) -> Result<DmaWeights> {
    let nd = eq.microstrips();
    let mut strips = Vec::with_capacity(nd);
    match (cfg.interleaved, shared) {
        (false, Some(outcome)) => {
            for i in 0..nd {
                strips.push(
                    project_flat(
                        &strip_targets(outcome, i),
                        cfg.flat_set,
                        cfg.projection_iters,
                        cfg.alpha_scaling,
                    )?
                    .weights,
                );
            }
        }
        _ => {
            let bins = eq.bins();
            let mut project = |_i: usize, strip: &[CVector]| -> Result<Vec<CVector>> {
                let fit = project_flat(strip, cfg.flat_set, cfg.projection_iters, cfg.alpha_scaling)?;
                let v = CVector::from_vec(fit.weights.clone());
                strips.push(fit.weights);
                Ok(vec![v; bins])
            };
            greedy_configure(eq, k, Some(&mut project as &mut StripProjector<'_>))?;
        }
    }
    Ok(DmaWeights::FrequencyFlat {
        set: cfg.flat_set,
        strips,
    })
}

/// One Monte Carlo data point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub receiver: ReceiverId,
    pub snr_db: f64,
    pub b_overall: u32,
    /// Mean squared symbol error per symbol.
    pub mse: f64,
    /// Uncoded bit error rate from sign decisions.
    pub ber: f64,
    /// Fraction of real ADC inputs beyond the support.
    pub overload: f64,
    /// Analytic unquantized MMSE per symbol, averaged over channels.
    pub e_o: f64,
    /// Seconds spent designing and running this receiver, summed over trials.
    pub wall_time: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Tally {
    sq_err: f64,
    bit_err: f64,
    overload: f64,
    e_o: f64,
    time: f64,
}

impl std::ops::AddAssign for Tally {
    fn add_assign(&mut self, o: Self) {
        self.sq_err += o.sq_err;
        self.bit_err += o.bit_err;
        self.overload += o.overload;
        self.e_o += o.e_o;
        self.time += o.time;
    }
}

/// Per-trial inputs that every receiver, SNR and budget share.
pub struct TrialDraw {
    pub channel: ChannelRealization,
    pub block: OfdmBlock,
    /// Noise at unit power; scaled by `sigma_z` for each SNR.
    pub unit_noise: Vec<CVector>,
}

/// Channel, symbols and unit-power noise of trial `trial`, resample `attempt`.
pub fn draw_trial(cfg: &ExperimentConfig, trial: usize, attempt: usize) -> Result<TrialDraw> {
    let stream = (trial as u64) * (MAX_RETRIES as u64 + 1) + attempt as u64;
    let mut rng = RngStream::derived(cfg.seed, stream);
    let unit = ChannelConfig {
        noise_power: 1.0,
        ..cfg.channel.clone()
    };
    let channel = generate_channel(&unit, &mut rng)?;
    let block = generate_ofdm_block(&unit, cfg.constellation, &mut rng);
    let unit_noise = channel.draw_noise(&mut rng);
    Ok(TrialDraw {
        channel,
        block,
        unit_noise,
    })
}

fn score(estimates: &[CVector], block: &OfdmBlock) -> (f64, f64) {
    let (mut sq, mut bits, mut count) = (0.0, 0usize, 0usize);
    for (est, sym) in estimates.iter().zip(&block.symbols) {
        for (e, s) in est.iter().zip(sym.iter()) {
            sq += (e - s).norm_sqr();
            bits += usize::from((e.re >= 0.0) != (s.re >= 0.0)) + usize::from((e.im >= 0.0) != (s.im >= 0.0));
            count += 1;
        }
    }
    let n = count.max(1) as f64;
    (sq / n, bits as f64 / (2.0 * n))
}

/// Tallies indexed `[receiver][snr][budget]`.
fn run_trial(
    cfg: &ExperimentConfig,
    grid: &FrequencyGrid,
    prop: &MicrostripPropagation,
    levels: &[usize],
    draw: &TrialDraw,
) -> Result<Vec<Vec<Vec<Tally>>>> {
    let nr = cfg.receivers.len();
    let mut out = vec![vec![vec![Tally::default(); levels.len()]; cfg.snr_db.len()]; nr];
    let m = cfg.channel.subcarriers as f64;
    let users = cfg.channel.users as f64;
    for (si, &snr) in cfg.snr_db.iter().enumerate() {
        let power = snr_to_noise_power(snr);
        let ch = draw.channel.with_noise_power(power);
        let noise: Vec<CVector> = draw.unit_noise.iter().map(|w| w.scale(power.sqrt())).collect();
        let eq = equivalent_channel(&ch, prop)?;
        let e_o = lmmse_error(&ch)? / (m * users);

        let lmmse = if cfg.receivers.contains(&ReceiverId::R5) {
            let t0 = Instant::now();
            let y = channel_output_with_noise(&ch, &draw.block, &noise)?;
            let est = lmmse_estimate(&ch, &y)?;
            Some((score(&est, &draw.block), t0.elapsed().as_secs_f64()))
        } else {
            None
        };

        for (bi, &lv) in levels.iter().enumerate() {
            let t0 = Instant::now();
            let designs = design_receivers(cfg, &ch, &eq, grid, prop, lv, &cfg.receivers)?;
            let design_time = t0.elapsed().as_secs_f64() / designs.len().max(1) as f64;
            for (ri, &r) in cfg.receivers.iter().enumerate() {
                let cell = &mut out[ri][si][bi];
                cell.e_o = e_o;
                if r == ReceiverId::R5 {
                    let ((mse, ber), t) = lmmse.expect("LMMSE computed");
                    cell.sq_err = mse;
                    cell.bit_err = ber;
                    cell.time = t;
                    continue;
                }
                let design = &designs.iter().find(|(id, _)| *id == r).expect("designed").1;
                let t1 = Instant::now();
                let rec = recover_from_noise(design, &ch, &draw.block, &noise, AdcMode::Quantize)?;
                let (mse, ber) = score(&rec.estimates, &draw.block);
                if !mse.is_finite() {
                    return Err(Error::NonFinite("symbol estimates"));
                }
                cell.sq_err = mse;
                cell.bit_err = ber;
                cell.overload = rec.overload;
                cell.time = design_time + t1.elapsed().as_secs_f64();
            }
        }
    }
    Ok(out)
}

fn run_trial_with_retries(
    cfg: &ExperimentConfig,
    grid: &FrequencyGrid,
    prop: &MicrostripPropagation,
    levels: &[usize],
    trial: usize,
) -> Result<Vec<Vec<Vec<Tally>>>> {
    let mut last = String::new();
    for attempt in 0..=MAX_RETRIES {
        match draw_trial(cfg, trial, attempt).and_then(|d| run_trial(cfg, grid, prop, levels, &d)) {
            Ok(t) => return Ok(t),
            Err(e) => {
                log::warn!("trial {trial}, attempt {attempt}: {e}; resampling");
                last = e.to_string();
            }
        }
    }
    Err(Error::TrialFailed {
        trial,
        attempts: MAX_RETRIES + 1,
        reason: last,
    })
}

/// Runs every (receiver, SNR, budget) combination over `cfg.trials`
/// independent channel draws. All receivers see the same channel, symbols
/// and noise within a trial. Records are ordered by receiver, then SNR,
/// then budget.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let (grid, prop) = cfg.front_end()?;
    let levels = cfg
        .budgets
        .iter()
        .map(|&b| levels_for_budget(b as f64, cfg.channel.microstrips))
        .collect::<Result<Vec<_>>>()?;
    log::info!(
        "running {} trials: {} receivers x {} SNRs x {} budgets",
        cfg.trials,
        cfg.receivers.len(),
        cfg.snr_db.len(),
        cfg.budgets.len()
    );
    let per_trial: Vec<Result<Vec<Vec<Vec<Tally>>>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial_with_retries(cfg, &grid, &prop, &levels, t))
        .collect();
    let nr = cfg.receivers.len();
    let mut sums = vec![vec![vec![Tally::default(); levels.len()]; cfg.snr_db.len()]; nr];
    for trial in per_trial {
        let trial = trial?;
        for (acc_r, t_r) in sums.iter_mut().zip(trial) {
            for (acc_s, t_s) in acc_r.iter_mut().zip(t_r) {
                for (acc, t) in acc_s.iter_mut().zip(t_s) {
                    *acc += t;
                }
            }
        }
    }
    let n = cfg.trials as f64;
    let mut records = Vec::with_capacity(nr * cfg.snr_db.len() * levels.len());
    for (ri, &r) in cfg.receivers.iter().enumerate() {
        for (si, &snr) in cfg.snr_db.iter().enumerate() {
            for (bi, &b) in cfg.budgets.iter().enumerate() {
                let s = sums[ri][si][bi];
                records.push(ResultRecord {
                    receiver: r,
                    snr_db: snr,
                    b_overall: b,
                    mse: s.sq_err / n,
                    ber: s.bit_err / n,
                    overload: s.overload / n,
                    e_o: s.e_o / n,
                    wall_time: s.time,
                    seed: cfg.seed,
                });
            }
        }
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Parse(format!("unknown format {other:?}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "receiver",
    "snr_db",
    "b_overall",
    "mse",
    "ber",
    "overload",
    "e_o",
    "seed",
];

#[derive(Serialize, Deserialize)]
struct CsvRow {
    receiver: ReceiverId,
    snr_db: f64,
    b_overall: u32,
    mse: f64,
    ber: f64,
    overload: f64,
    e_o: f64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct JsonResults {
    metadata: Metadata,
    records: Vec<ResultRecord>,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    snr_definition: String,
    mse_normalization: String,
    ber_normalization: String,
    e_o_definition: String,
}

impl Metadata {
    fn current() -> Self {
        Self {
            snr_definition: SNR_DEFINITION.into(),
            mse_normalization: "squared error summed over the block, divided by M K".into(),
            ber_normalization: "sign errors on real and imaginary parts, divided by 2 M K".into(),
            e_o_definition: "LMMSE error from the raw element outputs, per symbol".into(),
        }
    }
}

/// Writes records as CSV (a `#` comment line with the SNR convention, then
/// the fixed header; `wall_time` is not included) or JSON (metadata plus all
/// fields).
pub fn write_results<W: Write>(records: &[ResultRecord], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = out;
            writeln!(out, "# {SNR_DEFINITION}").map_err(|e| Error::io("<output>", e))?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_HEADER).map_err(csv_error)?;
            for r in records {
                w.serialize(CsvRow {
                    receiver: r.receiver,
                    snr_db: r.snr_db,
                    b_overall: r.b_overall,
                    mse: r.mse,
                    ber: r.ber,
                    overload: r.overload,
                    e_o: r.e_o,
                    seed: r.seed,
                })
                .map_err(csv_error)?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))
        }
        OutputFormat::Json => {
            let doc = JsonResults {
                metadata: Metadata::current(),
                records: records.to_vec(),
            };
            serde_json::to_writer_pretty(out, &doc).map_err(|e| Error::Parse(e.to_string()))
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Parses output of [`write_results`]. CSV rows come back with
/// `wall_time = 0`.
pub fn read_results<R: Read>(format: OutputFormat, input: R) -> Result<Vec<ResultRecord>> {
    match format {
        OutputFormat::Csv => {
            let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
            let header = r.headers().map_err(csv_error)?.clone();
            if header.iter().ne(CSV_HEADER) {
                return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
            }
            r.deserialize::<CsvRow>()
                .map(|row| {
                    let row = row.map_err(csv_error)?;
                    Ok(ResultRecord {
                        receiver: row.receiver,
                        snr_db: row.snr_db,
                        b_overall: row.b_overall,
                        mse: row.mse,
                        ber: row.ber,
                        overload: row.overload,
                        e_o: row.e_o,
                        wall_time: 0.0,
                        seed: row.seed,
                    })
                })
                .collect()
        }
        OutputFormat::Json => {
            let doc: JsonResults = serde_json::from_reader(input).map_err(|e| Error::Parse(e.to_string()))?;
            Ok(doc.records)
        }
    }
}

pub fn emit_results(records: &[ResultRecord], format: OutputFormat, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    write_results(records, format, &mut buf).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    buf.flush().map_err(|e| Error::io(path, e))
}

pub fn load_results(format: OutputFormat, path: &Path) -> Result<Vec<ResultRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(format, std::io::BufReader::new(file))
}

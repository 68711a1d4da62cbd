//! Metasurface front end: Lorentzian element responses, microstrip
//! propagation, per-bin weight matrices `Q_m` and the equivalent channel.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, ChannelRealization};
use crate::error::{Error, Result};
use crate::numerics::{cplx, CMatrix, CVector};

/// Denominator magnitudes below this are treated as a pole.
pub const DENOMINATOR_GUARD: f64 = 1e-30;

/// One element's resonator: `F`, `chi` (rad/s) and `Omega_R` (rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianParams {
    pub strength: f64,
    pub damping: f64,
    pub resonance: f64,
}

impl LorentzianParams {
    pub fn quality_factor(&self) -> f64 {
        self.resonance / self.damping
    }

    pub fn response(&self, omega: f64) -> Result<Complex64> {
        lorentzian_response(self, omega)
    }
}

/// `F Omega^2 / (Omega_R^2 - Omega^2 - j Omega chi)`.
pub fn lorentzian_response(p: &LorentzianParams, omega: f64) -> Result<Complex64> {
    if p.strength == 0.0 {
        return Ok(cplx(0.0, 0.0));
    }
    let den = lorentzian_denominator(p.resonance, p.damping, omega);
    if den.norm() <= DENOMINATOR_GUARD || !den.is_finite() {
        return Err(Error::DegenerateResponse { omega });
    }
    Ok(p.strength * omega * omega / den)
}

#[inline]
pub(crate) fn lorentzian_denominator(resonance: f64, damping: f64, omega: f64) -> Complex64 {
    // (R - W)(R + W) keeps precision when the two are close
    cplx((resonance - omega) * (resonance + omega), -omega * damping)
}

/// Subcarrier grid mapped onto physical angular frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub carrier: f64,
    pub bandwidth: f64,
    /// Signed baseband angular frequency `omega_m` per bin, in `[-pi, pi)`.
    pub baseband: Vec<f64>,
    /// `Omega_m = 2 pi f_c + omega_m f_s`.
    pub omega: Vec<f64>,
}

impl FrequencyGrid {
    pub fn bins(&self) -> usize {
        self.omega.len()
    }

    /// Lower physical band edge `2 pi (f_c - f_s / 2)`.
    pub fn band_low(&self) -> f64 {
        2.0 * std::f64::consts::PI * (self.carrier - self.bandwidth / 2.0)
    }

    pub fn band_high(&self) -> f64 {
        2.0 * std::f64::consts::PI * (self.carrier + self.bandwidth / 2.0)
    }

    /// `2 pi f_c`, the natural unit for normalizing angular frequencies.
    pub fn carrier_omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.carrier
    }
}

pub fn build_frequency_grid(carrier: f64, bandwidth: f64, bins: usize) -> Result<FrequencyGrid> {
    if !(bandwidth > 0.0) || !(carrier > bandwidth / 2.0) || bins == 0 {
        return Err(Error::InvalidConfig(format!(
            "frequency grid needs f_c > f_s/2 > 0 and M >= 1 (f_c={carrier}, f_s={bandwidth}, M={bins})"
        )));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let baseband: Vec<f64> = (0..bins)
        .map(|m| {
            let w = two_pi * m as f64 / bins as f64;
            if 2 * m >= bins {
                w - two_pi
            } else {
                w
            }
        })
        .collect();
    let omega = baseband.iter().map(|w| two_pi * carrier + w * bandwidth).collect();
    Ok(FrequencyGrid {
        carrier,
        bandwidth,
        baseband,
        omega,
    })
}

/// Diagonal propagation `H_m` along the microstrips.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrostripPropagation {
    pub attenuation: f64,
    pub phase_slope: f64,
    pub microstrips: usize,
    pub elements_per_strip: usize,
    /// Diagonal of `H_m` per bin.
    pub diagonals: Vec<Vec<Complex64>>,
}

impl MicrostripPropagation {
    pub fn bins(&self) -> usize {
        self.diagonals.len()
    }

    pub fn matrix(&self, m: usize) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_vec(self.diagonals[m].clone()))
    }

    /// `H_m = I` for every bin (no propagation model).
    pub fn identity(cfg: &ChannelConfig) -> Self {
        let n = cfg.elements();
        Self {
            attenuation: 0.0,
            phase_slope: 0.0,
            microstrips: cfg.microstrips,
            elements_per_strip: cfg.elements_per_strip,
            diagonals: vec![vec![cplx(1.0, 0.0); n]; cfg.subcarriers],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.diagonals.iter().flatten().all(|z| *z == cplx(1.0, 0.0))
    }
}

/// `(H_m)_{(i-1)N_e + l} = exp(-alpha l - j beta omega_m l)`, `l = 1..N_e`.
pub fn build_propagation(
    cfg: &ChannelConfig,
    grid: &FrequencyGrid,
    attenuation: f64,
    phase_slope: f64,
) -> Result<MicrostripPropagation> {
    if !(attenuation >= 0.0) {
        return Err(Error::InvalidConfig("attenuation must be >= 0".into()));
    }
    if grid.bins() != cfg.subcarriers {
        return Err(Error::Dimension(format!(
            "grid has {} bins, channel has {} subcarriers",
            grid.bins(),
            cfg.subcarriers
        )));
    }
    let diagonals = grid
        .baseband
        .iter()
        .map(|&w| {
            let strip: Vec<Complex64> = (1..=cfg.elements_per_strip)
                .map(|l| {
                    let l = l as f64;
                    Complex64::from_polar((-attenuation * l).exp(), -phase_slope * w * l)
                })
                .collect();
            strip.repeat(cfg.microstrips)
        })
        .collect();
    Ok(MicrostripPropagation {
        attenuation,
        phase_slope,
        microstrips: cfg.microstrips,
        elements_per_strip: cfg.elements_per_strip,
        diagonals,
    })
}

/// Feasible set for frequency-flat element weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlatSet {
    /// Real amplitudes in `[min, max]`.
    Amplitude {
        min: f64,
        max: f64,
    },
    UnitModulus,
    Unrestricted,
}

impl Default for FlatSet {
    fn default() -> Self {
        FlatSet::Amplitude { min: 0.001, max: 1.0 }
    }
}

impl FlatSet {
    /// Nearest feasible point (Euclidean).
    pub fn project(&self, z: Complex64) -> Complex64 {
        match *self {
            FlatSet::Amplitude { min, max } => cplx(z.re.clamp(min, max), 0.0),
            FlatSet::UnitModulus => {
                let r = z.norm();
                if r > 0.0 {
                    z / r
                } else {
                    cplx(1.0, 0.0)
                }
            }
            FlatSet::Unrestricted => z,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            FlatSet::Amplitude { min, max } => z.im == 0.0 && z.re >= min && z.re <= max,
            FlatSet::UnitModulus => (z.norm() - 1.0).abs() <= 1e-12,
            FlatSet::Unrestricted => z.is_finite(),
        }
    }
}

/// Element weights in one of the three supported parameterizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DmaWeights {
    /// Arbitrary complex `q_{m,i}`, indexed `[bin][strip][element]`.
    Unconstrained { bins: Vec<Vec<Vec<Complex64>>> },
    /// One weight vector per microstrip shared by all bins, `[strip][element]`.
    FrequencyFlat { set: FlatSet, strips: Vec<Vec<Complex64>> },
    /// Resonator parameters `[strip][element]`, evaluated at each `Omega_m`.
    Lorentzian {
        params: Vec<Vec<LorentzianParams>>,
        #[serde(default)]
        quality_factors: Option<Vec<f64>>,
    },
}

/// Relative tolerance on `Omega_R / chi` membership in the quality-factor set.
const QUALITY_TOL: f64 = 1e-9;

impl DmaWeights {
    pub fn mode_name(&self) -> &'static str {
        match self {
            DmaWeights::Unconstrained { .. } => "unconstrained",
            DmaWeights::FrequencyFlat { .. } => "frequency_flat",
            DmaWeights::Lorentzian { .. } => "lorentzian",
        }
    }

    /// `(N_d, N_e)`.
    pub fn shape(&self) -> (usize, usize) {
        let strips = match self {
            DmaWeights::Unconstrained { bins } => bins.first().map(|b| b.iter().map(Vec::len).collect()),
            DmaWeights::FrequencyFlat { strips, .. } => Some(strips.iter().map(Vec::len).collect()),
            DmaWeights::Lorentzian { params, .. } => Some(params.iter().map(Vec::len).collect::<Vec<_>>()),
        };
        match strips {
            Some(lens) => (lens.len(), lens.first().copied().unwrap_or(0)),
            None => (0, 0),
        }
    }

    /// Structural and feasibility checks against `M` bins.
    pub fn validate(&self, bins: usize) -> Result<()> {
        let (nd, ne) = self.shape();
        if nd == 0 || ne == 0 {
            return Err(Error::Dimension("empty weight set".into()));
        }

        match self {
            DmaWeights::Unconstrained { bins: per_bin } => {
                if per_bin.len() != bins {
                    return Err(Error::Dimension(format!(
                        "{} weight bins for {bins} subcarriers",
                        per_bin.len()
                    )));
                }
                for b in per_bin {
                    if b.len() != nd || b.iter().any(|r| r.len() != ne) {
                        return Err(Error::Dimension("ragged unconstrained weights".into()));
                    }
                    if b.iter().flatten().any(|z| !z.is_finite()) {
                        return Err(Error::NonFinite("unconstrained weights"));
                    }
                }
            }
            DmaWeights::FrequencyFlat { set, strips } => {
                if strips.iter().any(|r| r.len() != ne) {
                    return Err(Error::Dimension("ragged flat weights".into()));
                }
                if let Some(z) = strips.iter().flatten().find(|z| !set.contains(**z)) {
                    return Err(Error::Infeasible(format!("flat weight {z} outside {set:?}")));
                }
            }
            DmaWeights::Lorentzian {
                params,
                quality_factors,
            } => {
                if params.iter().any(|r| r.len() != ne) {
                    return Err(Error::Dimension("ragged Lorentzian parameters".into()));
                }
                for p in params.iter().flatten() {
                    if !(p.strength >= 0.0) || !(p.resonance >= 0.0) || !(p.damping > 0.0) {
                        return Err(Error::Infeasible(format!("Lorentzian parameters {p:?}")));
                    }
                    if let Some(set) = quality_factors {
                        let qf = p.quality_factor();
                        if !set.iter().any(|s| (qf - s).abs() <= QUALITY_TOL * s.abs().max(1.0)) {
                            return Err(Error::Infeasible(format!("quality factor {qf} not in {set:?}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Row vector `q_{m,i}` for bin `m`, microstrip `i`.
    pub fn strip_weights(&self, grid: &FrequencyGrid, m: usize, i: usize) -> Result<CVector> {
        Ok(match self {
            DmaWeights::Unconstrained { bins } => CVector::from_vec(bins[m][i].clone()),
            DmaWeights::FrequencyFlat { strips, .. } => CVector::from_vec(strips[i].clone()),
            DmaWeights::Lorentzian { params, .. } => {
                let omega = grid.omega[m];
                let values = params[i]
                    .iter()
                    .map(|p| lorentzian_response(p, omega))
                    .collect::<Result<Vec<_>>>()?;
                CVector::from_vec(values)
            }
        })
    }

    /// Multiplies every weight of microstrip `i` by the positive factor `c`.
    /// Flat amplitudes are clamped back into their interval.
    pub fn scale_strip(&mut self, i: usize, c: f64) {
        match self {
            DmaWeights::Unconstrained { bins } => {
                for b in bins.iter_mut() {
                    b[i].iter_mut().for_each(|z| *z *= c);
                }
            }
            DmaWeights::FrequencyFlat { set, strips } => {
                let set = *set;
                strips[i].iter_mut().for_each(|z| *z = set.project(*z * c));
            }
            DmaWeights::Lorentzian { params, .. } => {
                params[i].iter_mut().for_each(|p| p.strength *= c);
            }
        }
    }
}

/// Builds the per-bin `N_d x N` matrices `Q_m` after validating `w`.
pub fn assemble_weights(w: &DmaWeights, grid: &FrequencyGrid) -> Result<Vec<CMatrix>> {
    w.validate(grid.bins())?;
    let (nd, ne) = w.shape();
    (0..grid.bins())
        .map(|m| {
            let mut q = CMatrix::zeros(nd, nd * ne);
            for i in 0..nd {
                let row = w.strip_weights(grid, m, i)?;
                for (l, z) in row.iter().enumerate() {
                    q[(i, i * ne + l)] = *z;
                }
            }
            Ok(q)
        })
        .collect()
}

/// Row `i` of `Q_m` restricted to its microstrip's columns.
pub fn strip_row(q: &CMatrix, i: usize, elements_per_strip: usize) -> CVector {
    let start = i * elements_per_strip;
    CVector::from_fn(elements_per_strip, |l, _| q[(i, start + l)])
}

/// Per-bin quantities seen by the combiner: `G_hat_m = H_m G_m` and
/// `Upsilon_m = G_hat G_hat^H + H_m C_W H_m^H`.
#[derive(Clone, Debug)]
pub struct EquivalentChannel {
    pub g_hat: Vec<CMatrix>,
    pub upsilon: Vec<CMatrix>,
    /// `H_m C_W H_m^H`.
    pub noise_cov: Vec<CMatrix>,
    pub elements_per_strip: usize,
}

impl EquivalentChannel {
    pub fn bins(&self) -> usize {
        self.g_hat.len()
    }

    pub fn elements(&self) -> usize {
        self.g_hat[0].nrows()
    }

    pub fn users(&self) -> usize {
        self.g_hat[0].ncols()
    }

    pub fn microstrips(&self) -> usize {
        self.elements() / self.elements_per_strip
    }
}

pub fn equivalent_channel(ch: &ChannelRealization, prop: &MicrostripPropagation) -> Result<EquivalentChannel> {
    let n = ch.config.elements();
    if prop.bins() != ch.subcarriers() || prop.diagonals.iter().any(|d| d.len() != n) {
        return Err(Error::Dimension("propagation does not match channel".into()));
    }
    let mut g_hat = Vec::with_capacity(prop.bins());
    let mut upsilon = Vec::with_capacity(prop.bins());
    let mut noise_cov = Vec::with_capacity(prop.bins());
    for (g, h) in ch.bins.iter().zip(&prop.diagonals) {
        let gh = CMatrix::from_fn(n, g.ncols(), |r, c| h[r] * g[(r, c)]);
        let hch = CMatrix::from_fn(n, n, |r, c| h[r] * ch.noise_cov[(r, c)] * h[c].conj());
        let mut ups = &gh * gh.adjoint() + &hch;
        // exact Hermitian symmetry for downstream factorizations
        ups = crate::numerics::hermitian_part(&ups);
        g_hat.push(gh);
        upsilon.push(ups);
        noise_cov.push(hch);
    }
    Ok(EquivalentChannel {
        g_hat,
        upsilon,
        noise_cov,
        elements_per_strip: ch.config.elements_per_strip,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::channel::generate_channel;
    use crate::numerics::{identity, max_abs, min_eigenvalue, RngStream};
    use approx::assert_relative_eq;

    const FC: f64 = 1.9e9;
    const FS: f64 = 320e6;

    fn grid16() -> FrequencyGrid {
        build_frequency_grid(FC, FS, 16).unwrap()
    }

    #[test]
    fn response_at_resonance_is_imaginary() {
        let p = LorentzianParams {
            strength: 1.5,
            damping: 2.0e8,
            resonance: 1.2e10,
        };
        let r = lorentzian_response(&p, p.resonance).unwrap();
        assert!(r.re.abs() <= 1e-9 * r.norm());
        assert_relative_eq!(r.im, 1.5 * 1.2e10 / 2.0e8, max_relative = 1e-12);
    }

    #[test]
    fn zero_strength_is_zero() {
        let p = LorentzianParams {
            strength: 0.0,
            damping: 0.0,
            resonance: 1.0,
        };
        assert_eq!(lorentzian_response(&p, 1.0).unwrap(), cplx(0.0, 0.0));
    }

    #[test]
    fn pole_is_rejected() {
        let p = LorentzianParams {
            strength: 1.0,
            damping: 0.0,
            resonance: 5.0,
        };
        assert!(matches!(
            lorentzian_response(&p, 5.0),
            Err(Error::DegenerateResponse { .. })
        ));
    }

    #[test]
    fn quality_fifty_sweep_is_unimodal_at_resonance() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let resonance = two_pi * FC;
        let p = LorentzianParams {
            strength: 1.0,
            damping: resonance / 50.0,
            resonance,
        };
        let freqs: Vec<f64> = (0..=400).map(|k| two_pi * (1.7e9 + 1e6 * k as f64)).collect();
        let mags: Vec<f64> = freqs
            .iter()
            .map(|&w| lorentzian_response(&p, w).unwrap().norm())
            .collect();
        let peak = mags.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((freqs[peak] - resonance).abs() <= two_pi * 1e6);
        assert!(mags[..peak].windows(2).all(|w| w[0] < w[1]));
        assert!(mags[peak..].windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn grid_mapping() {
        let g = grid16();
        let two_pi = 2.0 * std::f64::consts::PI;
        assert_relative_eq!(g.omega[0], two_pi * FC, max_relative = 1e-15);
        assert_relative_eq!(g.baseband[8], -std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(g.omega[8], two_pi * (FC - 160e6), max_relative = 1e-14);
        let mut sorted = g.omega.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted.windows(2).all(|w| w[0] < w[1]));
        assert!(g.omega.iter().all(|&w| w >= g.band_low() && w < g.band_high()));
        assert!(build_frequency_grid(100.0, 200.0, 4).is_err());
    }

    fn cfg(nd: usize, ne: usize) -> ChannelConfig {
        ChannelConfig {
            microstrips: nd,
            elements_per_strip: ne,
            users: 2,
            subcarriers: 16,
            taps: 4,
            element_spacing: 0.2,
            noise_power: 0.1,
            decay: Default::default(),
        }
    }

    #[test]
    fn propagation_values() {
        let c = cfg(2, 3);
        let g = grid16();
        let prop = build_propagation(&c, &g, 0.006, 1.592).unwrap();
        let h0 = prop.diagonals[0][0];
        assert_relative_eq!(h0.re, 0.994018, epsilon = 1e-6);
        assert_eq!(h0.im, 0.0);
        for m in 0..16 {
            for (k, z) in prop.diagonals[m].iter().enumerate() {
                let l = (k % 3 + 1) as f64;
                assert_relative_eq!(z.norm(), (-0.006 * l).exp(), max_relative = 1e-14);
            }
        }
        let flat = build_propagation(&c, &g, 0.0, 0.0).unwrap();
        assert!(flat.is_identity());
        assert_eq!(flat.matrix(3), identity(6));
    }

    #[test]
    fn assemble_structure() {
        let g = build_frequency_grid(FC, FS, 2).unwrap();
        let one = cplx(1.0, 0.0);
        let w = DmaWeights::FrequencyFlat {
            set: FlatSet::Amplitude { min: 0.001, max: 1.0 },
            strips: vec![vec![one; 2]; 2],
        };
        let q = assemble_weights(&w, &g).unwrap();
        let z = cplx(0.0, 0.0);
        let expected = CMatrix::from_row_slice(2, 4, &[one, one, z, z, z, z, one, one]);
        assert_eq!(q[0], expected);
        assert_eq!(q[1], expected);

        let single = DmaWeights::Unconstrained {
            bins: vec![vec![vec![one; 3]]; 2],
        };
        assert_eq!(assemble_weights(&single, &g).unwrap()[0].shape(), (1, 3));
    }

    #[test]
    fn assemble_rejects_infeasible() {
        let g = build_frequency_grid(FC, FS, 2).unwrap();
        let w = DmaWeights::FrequencyFlat {
            set: FlatSet::Amplitude { min: 0.001, max: 1.0 },
            strips: vec![vec![cplx(1.5, 0.0)]],
        };
        assert!(matches!(assemble_weights(&w, &g), Err(Error::Infeasible(_))));
        let p = LorentzianParams {
            strength: 1.0,
            damping: 1.0,
            resonance: 7.0,
        };
        let w = DmaWeights::Lorentzian {
            params: vec![vec![p]],
            quality_factors: Some(vec![0.1, 5.0, 30.0]),
        };
        assert!(matches!(assemble_weights(&w, &g), Err(Error::Infeasible(_))));
    }

    #[test]
    fn lorentzian_assembly_matches_response() {
        let g = grid16();
        let two_pi = 2.0 * std::f64::consts::PI;
        let params = vec![
            vec![
                LorentzianParams {
                    strength: 0.3,
                    damping: two_pi * 1.8e9 / 5.0,
                    resonance: two_pi * 1.8e9,
                },
                LorentzianParams {
                    strength: 1.1,
                    damping: two_pi * 1.95e9 / 30.0,
                    resonance: two_pi * 1.95e9,
                },
            ];
            2
        ];
        let w = DmaWeights::Lorentzian {
            params: params.clone(),
            quality_factors: Some(vec![0.1, 5.0, 30.0]),
        };
        let q = assemble_weights(&w, &g).unwrap();
        for m in 0..16 {
            for i in 0..2 {
                for l in 0..2 {
                    let expected = lorentzian_response(&params[i][l], g.omega[m]).unwrap();
                    assert_eq!(q[m][(i, i * 2 + l)], expected);
                }
            }
            for r in 0..2 {
                let nnz = (0..4).filter(|&c| q[m][(r, c)] != cplx(0.0, 0.0)).count();
                assert_eq!(nnz, 2);
            }
        }
    }

    #[test]
    fn equivalent_channel_cases() {
        let c = cfg(2, 3);
        let ch = generate_channel(&c, &mut RngStream::new(1)).unwrap();
        let g = grid16();
        let eq = equivalent_channel(&ch, &MicrostripPropagation::identity(&c)).unwrap();
        for m in 0..16 {
            assert_eq!(eq.g_hat[m], ch.bins[m]);
            let expected = &ch.bins[m] * ch.bins[m].adjoint() + &ch.noise_cov;
            assert!(max_abs(&(&eq.upsilon[m] - expected)) < 1e-12);
        }

        let prop = build_propagation(&c, &g, 0.006, 1.592).unwrap();
        let eq = equivalent_channel(&ch, &prop).unwrap();
        for m in 0..16 {
            let h = prop.matrix(m);
            assert!(max_abs(&(&eq.g_hat[m] - &h * &ch.bins[m])) < 1e-12);
            assert!(min_eigenvalue(&eq.upsilon[m]) > 0.0);
        }

        let zero_taps = vec![CMatrix::zeros(6, 2); 4];
        let silent = ChannelRealization::from_taps(c.clone(), zero_taps, ch.element_corr.clone(), 0).unwrap();
        let eq = equivalent_channel(&silent, &prop).unwrap();
        for m in 0..16 {
            let h = prop.matrix(m);
            let expected = &h * &silent.noise_cov * h.adjoint();
            assert!(max_abs(&(&eq.upsilon[m] - expected)) < 1e-12);
        }
    }

    #[test]
    fn weights_serde_round_trip() {
        let w = DmaWeights::FrequencyFlat {
            set: FlatSet::UnitModulus,
            strips: vec![vec![cplx(0.6, 0.8)]],
        };
        let s = serde_json::to_string(&w).unwrap();
        assert!(s.contains("\"mode\":\"frequency_flat\""));
        assert_eq!(serde_json::from_str::<DmaWeights>(&s).unwrap(), w);
    }
}

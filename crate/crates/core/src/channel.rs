//! Multi-tap spatially correlated MIMO channel, noise and OFDM symbol blocks.
//!
//! The whole chain is simulated per subcarrier: with a cyclic prefix longer
//! than the channel memory, the per-bin model `y_m = G_m s_m + w_m` is exact,
//! so no explicit prefix samples are generated.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cplx, identity, kron, psd_sqrt, CMatrix, CVector, MatrixData, RngStream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayProfile {
    /// Tap `tau` scaled by `exp(-tau)`.
    #[default]
    Exponential,
    Flat,
}

impl DecayProfile {
    pub fn tap_gain(self, tau: usize) -> f64 {
        match self {
            DecayProfile::Exponential => (-(tau as f64)).exp(),
            DecayProfile::Flat => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Number of microstrips `N_d`.
    pub microstrips: usize,
    /// Elements per microstrip `N_e`.
    pub elements_per_strip: usize,
    pub users: usize,
    pub subcarriers: usize,
    pub taps: usize,
    /// Element spacing along a microstrip, in wavelengths.
    pub element_spacing: f64,
    /// Per-element noise power `sigma_z^2` (linear).
    pub noise_power: f64,
    #[serde(default)]
    pub decay: DecayProfile,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            microstrips: 10,
            elements_per_strip: 10,
            users: 8,
            subcarriers: 16,
            taps: 4,
            element_spacing: 0.2,
            noise_power: 1.0,
            decay: DecayProfile::Exponential,
        }
    }
}

impl ChannelConfig {
    /// Total element count `N = N_d * N_e`.
    pub fn elements(&self) -> usize {
        self.microstrips * self.elements_per_strip
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("microstrips", self.microstrips),
            ("elements_per_strip", self.elements_per_strip),
            ("users", self.users),
            ("subcarriers", self.subcarriers),
            ("taps", self.taps),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.taps > self.subcarriers {
            return Err(Error::InvalidConfig(format!(
                "tap count {} exceeds subcarrier count {} (cyclic prefix assumption)",
                self.taps, self.subcarriers
            )));
        }
        if !(self.noise_power >= 0.0) || !self.noise_power.is_finite() {
            return Err(Error::InvalidConfig("noise_power must be finite and >= 0".into()));
        }
        if !(self.element_spacing >= 0.0) {
            return Err(Error::InvalidConfig("element_spacing must be >= 0".into()));
        }
        Ok(())
    }
}

/// Jakes spatial correlation, `(Sigma_C)_{i,l} = J0(2 pi spacing |i - l|)`.
pub fn jakes_correlation(elements: usize, spacing: f64) -> CMatrix {
    CMatrix::from_fn(elements, elements, |i, l| {
        let d = (i as f64 - l as f64).abs();
        cplx(libm::j0(2.0 * std::f64::consts::PI * spacing * d), 0.0)
    })
}

/// One channel draw: time taps, their per-bin DFT and the noise statistics.
#[derive(Clone, Debug)]
pub struct ChannelRealization {
    pub config: ChannelConfig,
    /// Time-domain taps `G[tau]`, each `N x K`.
    pub taps: Vec<CMatrix>,
    /// Per-bin responses `G_m = sum_tau G[tau] exp(-j 2 pi m tau / M)`.
    pub bins: Vec<CMatrix>,
    /// Intra-microstrip correlation `Sigma_C`.
    pub element_corr: CMatrix,
    /// Array correlation `Sigma_R = I_{N_d} (x) Sigma_C`.
    pub receive_corr: CMatrix,
    receive_corr_sqrt: CMatrix,
    /// Noise covariance `C_W = sigma_z^2 Sigma_R`.
    pub noise_cov: CMatrix,
    pub seed: u64,
}

impl ChannelRealization {
    /// Builds the derived quantities from taps and the element correlation.
    pub fn from_taps(config: ChannelConfig, taps: Vec<CMatrix>, element_corr: CMatrix, seed: u64) -> Result<Self> {
        config.validate()?;
        let n = config.elements();
        let k = config.users;
        if taps.len() != config.taps || taps.iter().any(|t| t.shape() != (n, k)) {
            return Err(Error::Dimension(format!(
                "expected {} taps of size {n}x{k}",
                config.taps
            )));
        }
        if element_corr.shape() != (config.elements_per_strip, config.elements_per_strip) {
            return Err(Error::Dimension("element correlation size".into()));
        }
        let strips = identity(config.microstrips);
        let receive_corr = kron(&strips, &element_corr);
        let receive_corr_sqrt = kron(&strips, &psd_sqrt(&element_corr));
        let noise_cov = receive_corr.scale(config.noise_power);
        let bins = taps_to_bins(&taps, config.subcarriers);
        Ok(Self {
            config,
            taps,
            bins,
            element_corr,
            receive_corr,
            receive_corr_sqrt,
            noise_cov,
            seed,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.config.subcarriers
    }

    /// Copy with a different noise power; taps are shared.
    pub fn with_noise_power(&self, noise_power: f64) -> Self {
        let mut out = self.clone();
        out.config.noise_power = noise_power;
        out.noise_cov = self.receive_corr.scale(noise_power);
        out
    }

    /// Independent per-bin noise vectors `w_m ~ CN(0, C_W)`.
    pub fn draw_noise(&self, rng: &mut RngStream) -> Vec<CVector> {
        let n = self.config.elements();
        let sigma = self.config.noise_power.sqrt();
        (0..self.subcarriers())
            .map(|_| (&self.receive_corr_sqrt * rng.complex_normal_vector(n)).scale(sigma))
            .collect()
    }

    pub fn snapshot(&self) -> ChannelSnapshot {
        ChannelSnapshot {
            config: self.config.clone(),
            taps: self.taps.iter().map(MatrixData::from).collect(),
            element_corr: MatrixData::from(&self.element_corr),
            noise_power: self.config.noise_power,
            seed: self.seed,
        }
    }

    pub fn from_snapshot(snapshot: &ChannelSnapshot) -> Result<Self> {
        let mut config = snapshot.config.clone();
        config.noise_power = snapshot.noise_power;
        let taps = snapshot
            .taps
            .iter()
            .map(CMatrix::try_from)
            .collect::<Result<Vec<_>>>()?;
        let corr = CMatrix::try_from(&snapshot.element_corr)?;
        Self::from_taps(config, taps, corr, snapshot.seed)
    }
}

/// Regression fixture form of a [`ChannelRealization`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSnapshot {
    pub config: ChannelConfig,
    pub taps: Vec<MatrixData>,
    pub element_corr: MatrixData,
    pub noise_power: f64,
    pub seed: u64,
}

/// `M`-point DFT of the tap sequence (zero-padded to `M`).
pub fn taps_to_bins(taps: &[CMatrix], subcarriers: usize) -> Vec<CMatrix> {
    (0..subcarriers)
        .map(|m| {
            let mut acc = CMatrix::zeros(taps[0].nrows(), taps[0].ncols());
            for (tau, tap) in taps.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * ((m * tau) % subcarriers) as f64 / subcarriers as f64;
                acc += tap * Complex64::from_polar(1.0, phase);
            }
            acc
        })
        .collect()
}

/// Inverse of [`taps_to_bins`]: returns all `M` time-domain taps.
pub fn bins_to_taps(bins: &[CMatrix]) -> Vec<CMatrix> {
    let m_total = bins.len();
    (0..m_total)
        .map(|tau| {
            let mut acc = CMatrix::zeros(bins[0].nrows(), bins[0].ncols());
            for (m, bin) in bins.iter().enumerate() {
                let phase = 2.0 * std::f64::consts::PI * ((m * tau) % m_total) as f64 / m_total as f64;
                acc += bin * Complex64::from_polar(1.0 / m_total as f64, phase);
            }
            acc
        })
        .collect()
}

/// Draws taps `G[tau] = g(tau) Sigma_R^{1/2} G_R[tau]` with i.i.d. standard
/// complex Gaussian `G_R[tau]`.
pub fn generate_channel(cfg: &ChannelConfig, rng: &mut RngStream) -> Result<ChannelRealization> {
    cfg.validate()?;
    let element_corr = jakes_correlation(cfg.elements_per_strip, cfg.element_spacing);
    let corr_sqrt = kron(&identity(cfg.microstrips), &psd_sqrt(&element_corr));
    let taps = (0..cfg.taps)
        .map(|tau| (&corr_sqrt * rng.complex_normal_matrix(cfg.elements(), cfg.users)).scale(cfg.decay.tap_gain(tau)))
        .collect();
    ChannelRealization::from_taps(cfg.clone(), taps, element_corr, rng.seed())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    #[default]
    Qpsk,
    Gaussian,
}

/// One OFDM block of frequency-domain symbols `s_m`, one `K`-vector per bin.
#[derive(Clone, Debug)]
pub struct OfdmBlock {
    pub symbols: Vec<CVector>,
    pub constellation: Constellation,
}

impl OfdmBlock {
    pub fn subcarriers(&self) -> usize {
        self.symbols.len()
    }

    /// Time-domain symbols `s[t]`, i.e. blocks of `V_2^H S_bar`.
    pub fn time_domain(&self) -> Vec<CVector> {
        crate::numerics::blocks_to_time(&self.symbols)
    }
}

pub fn generate_ofdm_block(cfg: &ChannelConfig, constellation: Constellation, rng: &mut RngStream) -> OfdmBlock {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let symbols = (0..cfg.subcarriers)
        .map(|_| {
            CVector::from_fn(cfg.users, |_, _| match constellation {
                Constellation::Qpsk => {
                    let re = if rng.coin() { s } else { -s };
                    let im = if rng.coin() { s } else { -s };
                    cplx(re, im)
                }
                Constellation::Gaussian => rng.complex_normal(),
            })
        })
        .collect();
    OfdmBlock { symbols, constellation }
}

/// `y_m = G_m s_m + w_m` given explicit noise.
pub fn channel_output_with_noise(
    ch: &ChannelRealization,
    block: &OfdmBlock,
    noise: &[CVector],
) -> Result<Vec<CVector>> {
    if block.subcarriers() != ch.subcarriers() || noise.len() != ch.subcarriers() {
        return Err(Error::Dimension("block / noise / channel bin count".into()));
    }
    Ok(ch
        .bins
        .iter()
        .zip(&block.symbols)
        .zip(noise)
        .map(|((g, s), w)| g * s + w)
        .collect())
}

/// `y_m = G_m s_m + w_m` with fresh noise drawn from `rng`.
pub fn channel_output(ch: &ChannelRealization, block: &OfdmBlock, rng: &mut RngStream) -> Result<Vec<CVector>> {
    let noise = ch.draw_noise(rng);
    channel_output_with_noise(ch, block, &noise)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::numerics::{blocks_to_time, max_abs, min_eigenvalue};
    use approx::assert_relative_eq;

    fn small_cfg() -> ChannelConfig {
        ChannelConfig {
            microstrips: 2,
            elements_per_strip: 3,
            users: 2,
            subcarriers: 8,
            taps: 3,
            element_spacing: 0.2,
            noise_power: 0.5,
            decay: DecayProfile::Exponential,
        }
    }

    /// Power series for J0, independent of libm.
    fn bessel_j0_series(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -(x * x / 4.0) / (k as f64 * k as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn jakes_values() {
        let c = jakes_correlation(5, 0.2);
        for i in 0..5 {
            assert_eq!(c[(i, i)].re, 1.0);
        }
        assert_relative_eq!(c[(0, 1)].re, 0.6425, epsilon = 1e-4);
        assert_relative_eq!(
            c[(0, 1)].re,
            bessel_j0_series(0.4 * std::f64::consts::PI),
            epsilon = 1e-6
        );
        assert_relative_eq!(
            c[(1, 4)].re,
            bessel_j0_series(1.2 * std::f64::consts::PI),
            epsilon = 1e-6
        );
        let ones = jakes_correlation(4, 0.0);
        assert!(ones.iter().all(|z| *z == cplx(1.0, 0.0)));
    }

    #[test]
    fn receive_correlation_is_psd() {
        let cfg = ChannelConfig::default();
        let ch = generate_channel(&cfg, &mut RngStream::new(1)).unwrap();
        assert!(min_eigenvalue(&ch.receive_corr) >= -1e-10);
    }

    #[test]
    fn decay_profile_values() {
        assert_eq!(DecayProfile::Exponential.tap_gain(0), 1.0);
        assert_relative_eq!(DecayProfile::Exponential.tap_gain(3), 0.049787, epsilon = 1e-6);
    }

    #[test]
    fn identity_correlation_gives_white_noise() {
        let mut cfg = small_cfg();
        cfg.element_spacing = 0.0;
        cfg.elements_per_strip = 1;
        cfg.noise_power = 1.0;
        let ch = generate_channel(&cfg, &mut RngStream::new(2)).unwrap();
        assert_eq!(ch.noise_cov, identity(cfg.elements()));
    }

    #[test]
    fn bins_are_dft_of_taps() {
        let cfg = small_cfg();
        let ch = generate_channel(&cfg, &mut RngStream::new(3)).unwrap();
        let back = bins_to_taps(&ch.bins);
        for tau in 0..cfg.subcarriers {
            let expected = if tau < cfg.taps {
                ch.taps[tau].clone()
            } else {
                CMatrix::zeros(cfg.elements(), cfg.users)
            };
            assert!((&back[tau] - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn first_tap_variance_matches_correlation() {
        let cfg = small_cfg();
        let draws = 10_000;
        let mut acc = vec![0.0; cfg.elements()];
        for d in 0..draws {
            let ch = generate_channel(&cfg, &mut RngStream::derived(4, d)).unwrap();
            for (r, a) in acc.iter_mut().enumerate() {
                *a += ch.taps[0][(r, 0)].norm_sqr();
            }
        }
        for a in acc {
            // diag(Sigma_R) = 1
            assert!((a / draws as f64 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn qpsk_and_gaussian_moments() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(5);
        let blocks = 10_000;
        let mut cov = CMatrix::zeros(cfg.users, cfg.users);
        let (mut m2, mut m4) = (0.0, 0.0);
        let mut count = 0.0;
        for _ in 0..blocks {
            let b = generate_ofdm_block(&cfg, Constellation::Qpsk, &mut rng);
            for s in &b.symbols {
                for z in s.iter() {
                    assert_relative_eq!(z.norm(), 1.0, epsilon = 1e-15);
                }
            }
            cov += &b.symbols[0] * b.symbols[0].adjoint();
            let g = generate_ofdm_block(&cfg, Constellation::Gaussian, &mut rng);
            for s in &g.symbols {
                for z in s.iter() {
                    m2 += z.re * z.re;
                    m4 += z.re.powi(4);
                    count += 1.0;
                }
            }
        }
        cov.unscale_mut(blocks as f64);
        assert!(max_abs(&(cov - identity(cfg.users))) < 0.05);
        let kurtosis = (m4 / count) / (m2 / count).powi(2);
        assert!((kurtosis - 3.0).abs() < 0.3, "kurtosis {kurtosis}");
    }

    #[test]
    fn noiseless_scalar_output() {
        let cfg = ChannelConfig {
            microstrips: 1,
            elements_per_strip: 1,
            users: 1,
            subcarriers: 1,
            taps: 1,
            element_spacing: 0.2,
            noise_power: 0.0,
            decay: DecayProfile::Flat,
        };
        let taps = vec![CMatrix::from_element(1, 1, cplx(2.0, 0.0))];
        let ch = ChannelRealization::from_taps(cfg, taps, identity(1), 0).unwrap();
        let block = OfdmBlock {
            symbols: vec![CVector::from_element(1, cplx(1.0, 0.0))],
            constellation: Constellation::Qpsk,
        };
        let y = channel_output(&ch, &block, &mut RngStream::new(0)).unwrap();
        assert_eq!(y[0][0], cplx(2.0, 0.0));
    }

    #[test]
    fn noise_covariance_and_bin_independence() {
        let cfg = small_cfg();
        let ch = generate_channel(&cfg, &mut RngStream::new(6)).unwrap();
        let trials = 10_000;
        let n = cfg.elements();
        let mut cov = CMatrix::zeros(n, n);
        let mut cross = CMatrix::zeros(n, n);
        let mut rng = RngStream::new(7);
        for _ in 0..trials {
            let w = ch.draw_noise(&mut rng);
            cov += &w[0] * w[0].adjoint();
            cross += &w[0] * w[1].adjoint();
        }
        cov.unscale_mut(trials as f64);
        cross.unscale_mut(trials as f64);
        let scale = cfg.noise_power;
        assert!(max_abs(&(cov - &ch.noise_cov)) <= 0.05 * scale);
        assert!(max_abs(&cross) <= 5.0 * scale / (trials as f64).sqrt());
    }

    #[test]
    fn parseval_between_domains() {
        let cfg = small_cfg();
        let mut rng = RngStream::new(8);
        let block = generate_ofdm_block(&cfg, Constellation::Gaussian, &mut rng);
        let freq: f64 = block.symbols.iter().map(|s| s.norm_squared()).sum();
        let time: f64 = blocks_to_time(&block.symbols).iter().map(|s| s.norm_squared()).sum();
        assert_relative_eq!(freq, time, max_relative = 1e-9);
    }

    #[test]
    fn snapshot_round_trip() {
        let cfg = small_cfg();
        let ch = generate_channel(&cfg, &mut RngStream::new(9)).unwrap();
        let json = serde_json::to_string(&ch.snapshot()).unwrap();
        let back: ChannelSnapshot = serde_json::from_str(&json).unwrap();
        let restored = ChannelRealization::from_snapshot(&back).unwrap();
        assert_eq!(restored.taps, ch.taps);
        assert_eq!(restored.noise_cov, ch.noise_cov);
        assert_eq!(restored.seed, ch.seed);
    }

    #[test]
    fn rejects_too_many_taps() {
        let mut cfg = small_cfg();
        cfg.taps = 9;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }
}

//! Uniform mid-rise scalar quantizer, ADC support rule and noise-energy model.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cplx, CMatrix, CVector};

/// Uniform quantizer with `levels` decision regions per real dimension over
/// `[-support, support]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub support: f64,
    pub levels: usize,
    pub eta: f64,
}

impl QuantizerSpec {
    pub fn new(support: f64, levels: usize, eta: f64) -> Result<Self> {
        let spec = Self { support, levels, eta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.support > 0.0) || !self.support.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ADC support {} must be positive",
                self.support
            )));
        }
        if self.levels < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 levels, got {}",
                self.levels
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        2.0 * self.support / self.levels as f64
    }

    /// `sigma_q^2 = 4 gamma^2 / (3 b^2)`.
    pub fn noise_energy(&self) -> f64 {
        noise_energy(self.support, self.levels)
    }

    /// `kappa = 4 eta^2 / (3 b^2)`.
    pub fn kappa(&self) -> f64 {
        kappa(self.eta, self.levels)
    }

    /// Reconstruction levels in increasing order.
    pub fn reconstruction_levels(&self) -> Vec<f64> {
        let d = self.step();
        (0..self.levels).map(|l| -self.support + d * (l as f64 + 0.5)).collect()
    }
}

pub fn noise_energy(support: f64, levels: usize) -> f64 {
    4.0 * support * support / (3.0 * (levels * levels) as f64)
}

pub fn kappa(eta: f64, levels: usize) -> f64 {
    4.0 * eta * eta / (3.0 * (levels * levels) as f64)
}

/// Decision regions per real ADC for an overall bit budget split over
/// `2 N_d` real quantizers: `floor(2^(b_overall / (2 N_d)))`.
const MAX_LEVELS: f64 = 9_007_199_254_740_992.0;

pub fn levels_for_budget(bits_overall: f64, microstrips: usize) -> Result<usize> {
    let b = 2f64.powf(bits_overall / (2.0 * microstrips as f64)).floor();
    if !(b >= 2.0) || !b.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "budget of {bits_overall} bits over {microstrips} microstrips gives fewer than 2 levels"
        )));
    }
    if b > MAX_LEVELS {
        return Err(Error::InvalidConfig(format!(
            "budget of {bits_overall} bits over {microstrips} microstrips exceeds 2^53 levels"
        )));
    }
    Ok(b as usize)
}

/// Cells are left-closed; `x = gamma` falls in the top cell and anything
/// beyond the support saturates to the outermost level.
pub fn quantize_real(x: f64, spec: &QuantizerSpec) -> f64 {
    let g = spec.support;
    let b = spec.levels;
    if x.is_nan() {
        return x;
    }
    let d = spec.step();
    let cell = ((x.clamp(-g, g) + g) / d).floor().clamp(0.0, (b - 1) as f64);
    -g + d * (cell + 0.5)
}

pub fn quantize_complex(z: Complex64, spec: &QuantizerSpec) -> Complex64 {
    cplx(quantize_real(z.re, spec), quantize_real(z.im, spec))
}

pub fn quantize_vector(v: &CVector, spec: &QuantizerSpec) -> CVector {
    v.map(|z| quantize_complex(z, spec))
}

/// Bin-averaged output power of each microstrip,
/// `(1/M) sum_m q_{m,i}^T E_i^T Upsilon_m E_i q_{m,i}^*`.
pub fn strip_output_power(q: &[CMatrix], upsilon: &[CMatrix]) -> Vec<f64> {
    let nd = q[0].nrows();
    let mut power = vec![0.0; nd];
    for (qm, um) in q.iter().zip(upsilon) {
        for (i, p) in power.iter_mut().enumerate() {
            *p += row_power(qm, um, i);
        }
    }
    power.iter().map(|p| p / q.len() as f64).collect()
}

/// `E|(z_m)_i|^2 = (Q_m Upsilon_m Q_m^H)_{ii}` using only the row's support.
pub fn row_power(q: &CMatrix, upsilon: &CMatrix, i: usize) -> f64 {
    let cols: Vec<usize> = (0..q.ncols()).filter(|&c| q[(i, c)] != cplx(0.0, 0.0)).collect();
    let mut acc = cplx(0.0, 0.0);
    for &r in &cols {
        for &c in &cols {
            acc += q[(i, r)] * upsilon[(r, c)] * q[(i, c)].conj();
        }
    }
    acc.re
}

/// `gamma = eta * sqrt(max_i (1/M) sum_m q^T E^T Upsilon E q^*)`.
pub fn adc_support(q: &[CMatrix], upsilon: &[CMatrix], eta: f64) -> Result<f64> {
    if q.is_empty() || q.len() != upsilon.len() {
        return Err(Error::Dimension(
            "weights and covariances must cover the same bins".into(),
        ));
    }
    let worst = strip_output_power(q, upsilon).into_iter().fold(0.0, f64::max);
    Ok(eta * worst.max(0.0).sqrt())
}

/// Fraction of real and imaginary ADC input samples with magnitude above
/// the support.
pub fn overload_fraction<'a>(samples: impl IntoIterator<Item = &'a CVector>, support: f64) -> f64 {
    let (mut over, mut total) = (0usize, 0usize);
    for v in samples {
        for z in v.iter() {
            over += usize::from(z.re.abs() > support) + usize::from(z.im.abs() > support);
            total += 2;
        }
    }
    if total == 0 {
        0.0
    } else {
        over as f64 / total as f64
    }
}

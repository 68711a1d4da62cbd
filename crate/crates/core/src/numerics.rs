//! Dense complex linear algebra and seeded random streams.
//!
//! Everything in the simulator is small and dense (the largest object is the
//! stacked `M*N_d x M*N` combiner), so plain `nalgebra` matrices are used
//! throughout. Hermitian systems go through a Cholesky factorization with an
//! explicit pivot floor so that near-singular covariances are reported rather
//! than silently producing garbage.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative Hermitian-symmetry tolerance asserted before factorizations.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Cholesky pivots below `PIVOT_FLOOR * trace(A) / rows` count as breakdown.
pub const PIVOT_FLOOR: f64 = 1e-12;

#[inline]
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Normalized `M x M` DFT matrix, entry `(k, n) = exp(-j 2 pi k n / M) / sqrt(M)`.
pub fn dft_matrix(m: usize) -> CMatrix {
    assert!(m >= 1, "DFT size must be positive");
    let scale = 1.0 / (m as f64).sqrt();
    CMatrix::from_fn(m, m, |k, n| {
        // reduce k*n mod m first so large sizes keep full phase accuracy
        let idx = (k * n) % m;
        let phase = -2.0 * std::f64::consts::PI * idx as f64 / m as f64;
        Complex64::from_polar(scale, phase)
    })
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Block-diagonal assembly. Off-block entries are exactly zero.
pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    debug_assert!(!blocks.is_empty(), "block_diag needs at least one block");
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Largest entrywise deviation from Hermitian symmetry, relative to the
/// largest entry magnitude.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

pub fn ensure_hermitian(a: &CMatrix, context: &'static str) -> Result<()> {
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { context, defect });
    }
    Ok(())
}

/// Cholesky factor of a Hermitian positive definite matrix.
#[derive(Clone, Debug)]
pub struct HermitianFactor {
    chol: Cholesky<Complex64, Dyn>,
}

impl HermitianFactor {
    pub fn new(a: &CMatrix, context: &'static str) -> Result<Self> {
        ensure_hermitian(a, context)?;
        let n = a.nrows();
        let trace: f64 = (0..n).map(|i| a[(i, i)].re).sum();
        if !(trace > 0.0) || !trace.is_finite() {
            return Err(Error::NotPositiveDefinite(context));
        }
        let chol = Cholesky::new(hermitian_part(a)).ok_or(Error::NotPositiveDefinite(context))?;
        let floor = PIVOT_FLOOR * trace / n as f64;
        let l = chol.l_dirty();
        // complex sqrt never fails, so negative pivots show up as imaginary diagonals
        if (0..n).any(|i| {
            let pivot = l[(i, i)] * l[(i, i)];
            pivot.re < floor || pivot.im.abs() > floor
        }) {
            return Err(Error::NotPositiveDefinite(context));
        }
        Ok(Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &CVector) -> CVector {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> CMatrix {
        hermitian_part(&self.chol.inverse())
    }

    /// Lower-triangular factor `L` with `A = L L^H`.
    pub fn lower(&self) -> CMatrix {
        self.chol.l()
    }
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "hermitian_solve: A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(HermitianFactor::new(a, "hermitian_solve")?.solve(b))
}

pub fn hermitian_inverse(a: &CMatrix, context: &'static str) -> Result<CMatrix> {
    Ok(HermitianFactor::new(a, context)?.inverse())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitian_part(a).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigen(a).0.first().copied().unwrap_or(0.0)
}

/// Principal square root of a Hermitian PSD matrix; slightly negative
/// eigenvalues (round-off) are clipped to zero.
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let n = values.len();
    let mut scaled = vectors.clone();
    for (c, &lambda) in values.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    &scaled * vectors.adjoint()
}

/// Rotates `v` so its largest-magnitude entry is real and positive.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag {
            best_mag = mag;
            best = i;
        }
    }
    if best_mag > 0.0 {
        let rot = v[best].conj() / best_mag;
        v.apply(|z| *z *= rot);
    }
}

/// Largest entry magnitude.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Quadratic form `v^H A v`, real part.
pub fn quad_form(a: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(a * v)).re
}

/// Top generalized eigenpair of the pencil `(A, B)`: `A v = lambda B v`
/// with `lambda` maximal. `A` Hermitian PSD, `B` Hermitian PD.
///
/// Reduces to a standard Hermitian problem through `B = L L^H`. The returned
/// vector has unit Euclidean norm and its largest entry real-positive.
pub fn max_generalized_eigvec(a: &CMatrix, b: &CMatrix) -> Result<(CVector, f64)> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::Dimension(format!(
            "generalized eigenproblem: A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    ensure_hermitian(a, "generalized eigenproblem A")?;
    let factor = HermitianFactor::new(b, "generalized eigenproblem B")?;
    let l = factor.lower();
    let left = l
        .solve_lower_triangular(a)
        .ok_or(Error::Singular("generalized eigenproblem"))?;
    let reduced = l
        .solve_lower_triangular(&left.adjoint())
        .ok_or(Error::Singular("generalized eigenproblem"))?;
    let (values, vectors) = hermitian_eigen(&reduced);
    let top = values.len() - 1;
    let w: CVector = vectors.column(top).into_owned();
    let mut v = l
        .ad_solve_lower_triangular(&w)
        .ok_or(Error::Singular("generalized eigenproblem"))?;
    let norm = v.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::NonFinite("generalized eigenvector"));
    }
    v.unscale_mut(norm);
    fix_phase(&mut v);
    Ok((v, values[top]))
}

/// `(F^H (x) I) x_bar` applied blockwise: frequency blocks to time blocks.
pub fn blocks_to_time(blocks: &[CVector]) -> Vec<CVector> {
    block_transform(blocks, 1.0)
}

/// `(F (x) I) x` applied blockwise: time blocks to frequency blocks.
pub fn blocks_to_freq(blocks: &[CVector]) -> Vec<CVector> {
    block_transform(blocks, -1.0)
}

fn block_transform(blocks: &[CVector], sign: f64) -> Vec<CVector> {
    let m = blocks.len();
    let scale = 1.0 / (m as f64).sqrt();
    (0..m)
        .map(|t| {
            let mut acc = CVector::zeros(blocks[0].len());
            for (k, b) in blocks.iter().enumerate() {
                let phase = sign * 2.0 * std::f64::consts::PI * ((t * k) % m) as f64 / m as f64;
                acc.axpy(Complex64::from_polar(scale, phase), b, cplx(1.0, 0.0));
            }
            acc
        })
        .collect()
}

/// Stacks equally sized blocks into one vector.
pub fn stack(blocks: &[CVector]) -> CVector {
    let data: Vec<Complex64> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
    CVector::from_vec(data)
}

/// Serializable row-major complex matrix, entries as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMatrix> for MatrixData {
    fn from(a: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(a.len());
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                data.push([a[(r, c)].re, a[(r, c)].im]);
            }
        }
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            data,
        }
    }
}

impl TryFrom<&MatrixData> for CMatrix {
    type Error = Error;

    fn try_from(m: &MatrixData) -> Result<Self> {
        if m.data.len() != m.rows * m.cols {
            return Err(Error::Parse(format!(
                "matrix data has {} entries, expected {}x{}",
                m.data.len(),
                m.rows,
                m.cols
            )));
        }
        Ok(CMatrix::from_fn(m.rows, m.cols, |r, c| {
            let [re, im] = m.data[r * m.cols + c];
            cplx(re, im)
        }))
    }
}

/// Seeded random stream. Identical `(seed, stream)` pairs reproduce identical
/// draws; distinct stream ids give independent sequences for parallel trials.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::derived(seed, 0)
    }

    pub fn derived(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random::<bool>()
    }

    /// Circularly-symmetric complex normal with unit variance.
    pub fn complex_normal(&mut self) -> Complex64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        cplx(s * self.normal(), s * self.normal())
    }

    pub fn complex_normal_vector(&mut self, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| self.complex_normal())
    }

    pub fn complex_normal_matrix(&mut self, rows: usize, cols: usize) -> CMatrix {
        // column-major fill keeps the draw order stable across nalgebra versions
        let data: Vec<Complex64> = (0..rows * cols).map(|_| self.complex_normal()).collect();
        CMatrix::from_vec(rows, cols, data)
    }
}

//! Power level decomposition (PLD).
//!
//! A load curve `x` (24 hourly kWh) is decomposed into a 24 x J appliance
//! usage matrix `A` with `A (alpha p) = x`, where `p` holds one power level
//! per device and `alpha > 0` fixes the unit. `A[i][j] * p[j]` is the energy
//! device `j` used in hour `i`.
//!
//! The minimum Frobenius norm solution is the rank one matrix
//! `A = x p' / (alpha |p|^2)`. Because every column is a scaled copy of `x`,
//! Frobenius and column-wise DTW distances between two such matrices equal
//! the curve distances divided by `|alpha p|^2`, so clustering PLD matrices
//! is clustering curves.
//!
//! If the true usage matrix is `A + H` with `H p = 0`, `rank(H) <= R_H` and
//! largest singular value `sigma_1`, the relative prediction error of the
//! PLD of a forecast `x_hat` is bracketed by [`pld_error_bounds`]. Treating
//! `H` as a Gaussian matrix gives CDFs for both brackets via the law of the
//! largest eigenvalue of `H'H`, which is approximated by a shifted gamma
//! distribution fitted by moment matching ([`Sigma1Law`]).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dtw::dtw_distance;
use crate::math::{abs, gamma_p, norm_sq, sq_euclidean, sqrt};
use crate::rng::stream;
use crate::{par, Error, Result};

/// Device power levels `p` (kW) and unit scale `alpha`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerVector {
    power: Vec<f64>,
    alpha: f64,
}

impl PowerVector {
    pub fn new(power: Vec<f64>, alpha: f64) -> Result<Self> {
        let valid = !power.is_empty()
            && power.iter().all(|p| p.is_finite() && *p > 0.0)
            && alpha.is_finite()
            && alpha > 0.0;
        if !valid {
            return Err(Error::InvalidPowerVector);
        }
        Ok(PowerVector { power, alpha })
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// `alpha * p`.
    pub fn scaled(&self) -> Vec<f64> {
        self.power.iter().map(|p| self.alpha * p).collect()
    }

    /// `|alpha p|^2`.
    pub fn scaled_norm_sq(&self) -> f64 {
        self.alpha * self.alpha * norm_sq(&self.power)
    }
}

/// Appliance usage matrix, one row per hour and one column per device.
#[derive(Debug, Clone, PartialEq)]
pub struct PldMatrix(DMatrix<f64>);

impl PldMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        PldMatrix(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::WrongLength {
                expected: cols,
                actual: r.len(),
            });
        }
        Ok(PldMatrix(DMatrix::from_fn(rows.len(), cols, |i, j| {
            rows[i][j]
        })))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.0.column(j).iter().copied().collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.0.iter().map(|v| v * v).sum())
    }

    /// `A (alpha p)`: hourly energy implied by the matrix.
    pub fn energy(&self, pv: &PowerVector) -> Vec<f64> {
        let q = pv.scaled();
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)] * q[j]).sum())
            .collect()
    }

    /// Numerical rank from the singular values.
    pub fn rank(&self, tol: f64) -> usize {
        self.0
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .filter(|s| **s > tol)
            .count()
    }

    /// Entries with magnitude below `tol`.
    pub fn count_near_zero(&self, tol: f64) -> usize {
        self.0.iter().filter(|v| abs(**v) < tol).count()
    }

    fn same_shape(&self, other: &PldMatrix) -> Result<()> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(Error::ShapeMismatch {
                left_rows: self.rows(),
                left_cols: self.cols(),
                right_rows: other.rows(),
                right_cols: other.cols(),
            });
        }
        Ok(())
    }
}

fn check_curve(x: &[f64]) -> Result<()> {
    if let Some(hour) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { hour });
    }
    Ok(())
}

/// Minimum Frobenius norm usage matrix `x p' / (alpha |p|^2)`.
pub fn pld_estimate(x: &[f64], pv: &PowerVector) -> Result<PldMatrix> {
    check_curve(x)?;
    let denom = pv.alpha() * norm_sq(pv.power());
    let p = pv.power();
    Ok(PldMatrix(DMatrix::from_fn(x.len(), p.len(), |i, j| {
        x[i] * p[j] / denom
    })))
}

/// Frobenius distance `|A_x - A_y|_F`.
pub fn pld_frob_dist(a: &PldMatrix, b: &PldMatrix) -> Result<f64> {
    a.same_shape(b)?;
    Ok(sqrt(
        a.0.iter()
            .zip(b.0.iter())
            .map(|(u, v)| (u - v) * (u - v))
            .sum(),
    ))
}

/// Sum over devices of the DTW distance between matching columns.
pub fn pld_dtw_dist(a: &PldMatrix, b: &PldMatrix) -> Result<f64> {
    a.same_shape(b)?;
    let mut total = 0.0;
    for j in 0..a.cols() {
        total += dtw_distance(&a.column(j), &b.column(j))?;
    }
    Ok(total)
}

/// Relative Frobenius error `|A_hat - A_true|_F / |A_true|_F`.
pub fn pld_prediction_error(a_hat: &PldMatrix, a_true: &PldMatrix) -> Result<f64> {
    a_hat.same_shape(a_true)?;
    let denom = a_true.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(pld_frob_dist(a_hat, a_true)? / denom)
}

/// Lower and upper bracket of the relative PLD prediction error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBounds {
    pub lower: f64,
    pub upper: f64,
}

/// The bounds from the three squared norms involved.
pub fn error_bounds_from_norms(
    x_norm_sq: f64,
    err_norm_sq: f64,
    p_norm_sq: f64,
    sigma1_sq: f64,
    rank: usize,
) -> ErrorBounds {
    let r = rank as f64;
    let s = p_norm_sq * sigma1_sq;
    ErrorBounds {
        lower: sqrt((err_norm_sq + s) / (x_norm_sq + r * s)),
        upper: sqrt((err_norm_sq + r * s) / (x_norm_sq + s)),
    }
}

/// Bounds on `|A_hat - A_true|_F / |A_true|_F` for perturbations of rank at
/// most `rank` with largest squared singular value `sigma1_sq`.
pub fn pld_error_bounds(
    x: &[f64],
    x_hat: &[f64],
    pv: &PowerVector,
    sigma1_sq: f64,
    rank: usize,
) -> Result<ErrorBounds> {
    if x.len() != x_hat.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: x_hat.len(),
        });
    }
    check_curve(x)?;
    check_curve(x_hat)?;
    if rank == 0 || !(sigma1_sq >= 0.0) {
        return Err(Error::InvalidParameter(
            "rank must be >= 1 and sigma1_sq >= 0".into(),
        ));
    }
    Ok(error_bounds_from_norms(
        norm_sq(x),
        sq_euclidean(x, x_hat),
        pv.scaled_norm_sq(),
        sigma1_sq,
        rank,
    ))
}

/// Largest eigenvalue of `H'H`, i.e. the squared largest singular value.
pub fn sigma1_sq(h: &DMatrix<f64>) -> f64 {
    let gram = h.transpose() * h;
    gram.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

const SAMPLES_PER_STREAM: usize = 500;

/// `n` draws of the largest eigenvalue of `H'H` for a standard Gaussian
/// `rows x cols` matrix `H`.
pub fn sigma1_sq_samples(rows: usize, cols: usize, n: usize, seed: u64) -> Vec<f64> {
    let chunks = n.div_ceil(SAMPLES_PER_STREAM);
    let parts = par::map_range(chunks, |c| {
        let mut rng = stream(seed, "sigma1", c as u64);
        let count = SAMPLES_PER_STREAM.min(n - c * SAMPLES_PER_STREAM);
        (0..count)
            .map(|_| sigma1_sq(&gaussian_matrix(rows, cols, &mut rng)))
            .collect::<Vec<_>>()
    });
    parts.into_iter().flatten().collect()
}

/// Shifted gamma approximation of the law of the largest eigenvalue of a
/// real Wishart matrix `H'H`, calibrated by matching mean, variance and
/// skewness of Monte-Carlo samples.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sigma1Law {
    pub rows: usize,
    pub cols: usize,
    pub shape: f64,
    pub scale: f64,
    pub shift: f64,
}

/// Monte-Carlo draws used by [`Sigma1Law::calibrate_default`].
pub const CALIBRATION_SAMPLES: usize = 10_000;
/// Seed used by [`Sigma1Law::calibrate_default`].
pub const CALIBRATION_SEED: u64 = 0x5167_3141;

impl Sigma1Law {
    pub fn from_samples(rows: usize, cols: usize, samples: &[f64]) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidParameter(
                "need at least three samples".into(),
            ));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let m2 = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        let m3 = samples
            .iter()
            .map(|s| (s - mean) * (s - mean) * (s - mean))
            .sum::<f64>()
            / n;
        if !(m2 > 0.0) {
            return Err(Error::InvalidParameter("samples have zero variance".into()));
        }
        let sd = sqrt(m2);
        // Largest-eigenvalue laws are right skewed; a tiny floor keeps the
        // fit defined if sampling noise says otherwise.
        let skew = (m3 / (m2 * sd)).max(1e-3);
        let shape = 4.0 / (skew * skew);
        let scale = sd * skew / 2.0;
        Ok(Sigma1Law {
            rows,
            cols,
            shape,
            scale,
            shift: mean - shape * scale,
        })
    }

    pub fn calibrate(rows: usize, cols: usize, samples: usize, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(
                "matrix dimensions must be positive".into(),
            ));
        }
        Sigma1Law::from_samples(rows, cols, &sigma1_sq_samples(rows, cols, samples, seed))
    }

    pub fn calibrate_default(rows: usize, cols: usize) -> Result<Self> {
        Sigma1Law::calibrate(rows, cols, CALIBRATION_SAMPLES, CALIBRATION_SEED)
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.shape * self.scale
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        let z = (t - self.shift) / self.scale;
        if z <= 0.0 {
            0.0
        } else {
            gamma_p(self.shape, z)
        }
    }
}

/// CDF of the largest eigenvalue of `H'H` for a `rows x cols` standard
/// Gaussian `H`, through a cached default calibration.
#[cfg(feature = "std")]
pub fn sigma1sq_cdf(t: f64, rows: usize, cols: usize) -> Result<f64> {
    use std::collections::BTreeMap;
    use std::sync::{Mutex, OnceLock};

    static CACHE: OnceLock<Mutex<BTreeMap<(usize, usize), Sigma1Law>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let cached = cache
        .lock()
        .expect("calibration cache poisoned")
        .get(&(rows, cols))
        .copied();
    let law = match cached {
        Some(law) => law,
        None => {
            let law = Sigma1Law::calibrate_default(rows, cols)?;
            cache
                .lock()
                .expect("calibration cache poisoned")
                .insert((rows, cols), law);
            law
        }
    };
    Ok(law.cdf(t))
}

/// Everything needed to evaluate the CDFs of the two error brackets.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundDistribution {
    pub rank: usize,
    pub law: Sigma1Law,
    /// `|x|^2`
    pub x_norm_sq: f64,
    /// `|x - x_hat|^2`
    pub err_norm_sq: f64,
    /// `|alpha p|^2`
    pub p_norm_sq: f64,
}

impl BoundDistribution {
    /// Checks `1/R_H <= |x - x_hat|^2 / |x|^2 <= R_H`.
    pub fn new(
        rank: usize,
        law: Sigma1Law,
        x_norm_sq: f64,
        err_norm_sq: f64,
        p_norm_sq: f64,
    ) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidParameter("rank must be at least 1".into()));
        }
        if !(x_norm_sq >= 0.0 && err_norm_sq >= 0.0 && p_norm_sq >= 0.0) {
            return Err(Error::InvalidParameter(
                "squared norms must be non-negative".into(),
            ));
        }
        let ratio = err_norm_sq / x_norm_sq;
        let r = rank as f64;
        if !(ratio >= 1.0 / r && ratio <= r) {
            return Err(Error::AssumptionViolated { ratio, rank });
        }
        Ok(BoundDistribution {
            rank,
            law,
            x_norm_sq,
            err_norm_sq,
            p_norm_sq,
        })
    }

    pub fn from_curves(
        x: &[f64],
        x_hat: &[f64],
        pv: &PowerVector,
        rank: usize,
        law: Sigma1Law,
    ) -> Result<Self> {
        if x.len() != x_hat.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: x_hat.len(),
            });
        }
        BoundDistribution::new(
            rank,
            law,
            norm_sq(x),
            sq_euclidean(x, x_hat),
            pv.scaled_norm_sq(),
        )
    }

    /// Error ratio the bounds collapse to when `|alpha p| -> 0`.
    pub fn curve_error(&self) -> f64 {
        sqrt(self.err_norm_sq / self.x_norm_sq)
    }

    fn step(&self, t: f64) -> f64 {
        if t >= self.curve_error() {
            1.0
        } else {
            0.0
        }
    }

    /// `P(upper bound <= t)`.
    pub fn cdf_upper(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let t2 = t * t;
        let r = self.rank as f64;
        if t2 >= r {
            return 1.0;
        }
        if self.p_norm_sq == 0.0 {
            return self.step(t);
        }
        self.law
            .cdf((t2 * self.x_norm_sq - self.err_norm_sq) / (self.p_norm_sq * (r - t2)))
    }

    /// `P(lower bound <= t)`.
    pub fn cdf_lower(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let t2 = t * t;
        let r = self.rank as f64;
        if t2 <= 1.0 / r {
            return 0.0;
        }
        if self.p_norm_sq == 0.0 {
            return self.step(t);
        }
        1.0 - self
            .law
            .cdf((self.err_norm_sq - t2 * self.x_norm_sq) / (self.p_norm_sq * (t2 * r - 1.0)))
    }
}

pub fn bound_cdf_upper(t: f64, bd: &BoundDistribution) -> f64 {
    bd.cdf_upper(t)
}

pub fn bound_cdf_lower(t: f64, bd: &BoundDistribution) -> f64 {
    bd.cdf_lower(t)
}

/// A perturbation `H` of a usage matrix that leaves the implied energy
/// unchanged (`H p = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMatrix {
    h: DMatrix<f64>,
    rank: usize,
}

impl PerturbationMatrix {
    /// Gaussian `rows x J` matrix projected onto the null space of `p`
    /// (right-multiplied by `I - p p' / |p|^2`), then truncated to its
    /// leading `max_rank` singular directions. Since `H p = 0` the rank is
    /// at most `J - 1`.
    pub fn sample_null_space<R: Rng>(
        rows: usize,
        pv: &PowerVector,
        max_rank: usize,
        rng: &mut R,
    ) -> Self {
        let cols = pv.len();
        let p = DVector::from_column_slice(pv.power());
        let projector =
            DMatrix::<f64>::identity(cols, cols) - &p * p.transpose() / p.norm_squared();
        let h = gaussian_matrix(rows, cols, rng) * projector;
        let eig = (h.transpose() * &h).symmetric_eigen();
        let mut order: Vec<usize> = (0..cols).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let top = eig.eigenvalues[order[0]];
        let keep: Vec<usize> = order
            .into_iter()
            .take(max_rank)
            .filter(|&i| eig.eigenvalues[i] > top * 1e-20 && eig.eigenvalues[i] > 0.0)
            .collect();
        let mut basis = DMatrix::<f64>::zeros(cols, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            basis.set_column(c, &eig.eigenvectors.column(i));
        }
        let truncated = &h * &basis * basis.transpose();
        PerturbationMatrix {
            h: truncated,
            rank: keep.len(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn sigma1_sq(&self) -> f64 {
        sigma1_sq(&self.h)
    }

    /// `A + H`.
    pub fn perturb(&self, a: &PldMatrix) -> Result<PldMatrix> {
        let other = PldMatrix(self.h.clone());
        a.same_shape(&other)?;
        Ok(PldMatrix(&a.0 + &self.h))
    }
}

fn soft_row(q: &[f64], nu: f64, lambda_frob: f64, lambda_l1: f64, out: &mut [f64]) {
    for (a, &qj) in out.iter_mut().zip(q) {
        let z = nu * qj;
        *a = if z > lambda_l1 {
            (z - lambda_l1) / (2.0 * lambda_frob)
        } else if z < -lambda_l1 {
            (z + lambda_l1) / (2.0 * lambda_frob)
        } else {
            0.0
        };
    }
}

fn row_energy(q: &[f64], nu: f64, lambda_frob: f64, lambda_l1: f64, buf: &mut [f64]) -> f64 {
    soft_row(q, nu, lambda_frob, lambda_l1, buf);
    buf.iter().zip(q).map(|(a, qj)| a * qj).sum()
}

/// Largest acceptable constraint residual of a sparse row.
pub const SPARSE_RESIDUAL_TOL: f64 = 1e-10;

/// Sparse usage matrix: each row minimises
/// `lambda_frob |a|^2 + lambda_l1 |a|_1` subject to `<a, alpha p> = x_i`.
///
/// The row solution is a soft threshold of `nu * alpha p` for a scalar
/// dual `nu`. `nu` is bracketed and bisected on the monotone constraint
/// function, then solved exactly on the active set the bisection found.
pub fn sparse_pld(
    x: &[f64],
    pv: &PowerVector,
    lambda_frob: f64,
    lambda_l1: f64,
) -> Result<PldMatrix> {
    check_curve(x)?;
    if !(lambda_frob > 0.0 && lambda_frob.is_finite())
        || !(lambda_l1 >= 0.0 && lambda_l1.is_finite())
    {
        return Err(Error::InvalidParameter(
            "need lambda_frob > 0 and lambda_l1 >= 0".into(),
        ));
    }
    let q = pv.scaled();
    let cols = q.len();
    let mut out = DMatrix::<f64>::zeros(x.len(), cols);
    let mut buf = vec![0.0; cols];
    for (row, &target) in x.iter().enumerate() {
        if target == 0.0 {
            continue;
        }
        let sign = if target > 0.0 { 1.0 } else { -1.0 };
        let goal = abs(target);
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut expansions = 0;
        while row_energy(&q, hi, lambda_frob, lambda_l1, &mut buf) < goal {
            lo = hi;
            hi *= 2.0;
            expansions += 1;
            if expansions > 2000 || !hi.is_finite() {
                return Err(Error::NoConvergence { row });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if row_energy(&q, mid, lambda_frob, lambda_l1, &mut buf) < goal {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Exact dual value on the active set found at the upper end.
        // Written as differences so a lone active entry is exact even when
        // lambda_l1 / lambda_frob is huge.
        let active: Vec<usize> = (0..cols).filter(|&j| hi * q[j] > lambda_l1).collect();
        let s2: f64 = active.iter().map(|&j| q[j] * q[j]).sum();
        buf.iter_mut().for_each(|a| *a = 0.0);
        let ratio = lambda_l1 / (2.0 * lambda_frob);
        for &j in &active {
            let spread: f64 = active.iter().map(|&k| q[k] * (q[j] - q[k])).sum();
            buf[j] = (goal * q[j] + ratio * spread) / s2;
        }
        // Project the rounding error back onto the constraint.
        let gap = goal - buf.iter().zip(&q).map(|(a, qj)| a * qj).sum::<f64>();
        for &j in &active {
            buf[j] += gap * q[j] / s2;
        }
        let residual = abs(buf.iter().zip(&q).map(|(a, qj)| a * qj).sum::<f64>() - goal);
        if !(residual < SPARSE_RESIDUAL_TOL) {
            return Err(Error::NoConvergence { row });
        }
        for j in 0..cols {
            out[(row, j)] = sign * buf[j];
        }
    }
    Ok(PldMatrix(out))
}

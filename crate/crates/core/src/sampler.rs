//! Exact Gaussian path sampling. Multifractional paths are drawn by dense
//! Cholesky factorization of the grid covariance matrix (the process is
//! non-stationary, so spectral methods do not apply); fractional Brownian
//! motion is drawn by circulant embedding of its stationary increments.
//! Replications are deterministic given the seed, independent of thread
//! count: every replication owns a derived RNG stream.

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::rng::{self, tags, PRNG_ID};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Dense factorization cap: O(n³) setup and O(n²) per path are fine at desk
/// scale up to here and painful beyond.
pub const MAX_FACTOR_N: usize = 4096;

/// Relative diagonal jitter escalation ladder (multiples of tr(K)/n).
const JITTER_LADDER: [f64; 4] = [0.0, 1e-14, 1e-12, 1e-10];

/// Cap on reps × points for materialized ensembles (~1 GiB of f64).
const MAX_MATERIALIZED: usize = 1 << 27;

/// Uniform closed grid on [t_start, t_end] with n points (both endpoints
/// included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t_start: f64,
    t_end: f64,
    n: usize,
}

impl Grid {
    pub fn new(t_start: f64, t_end: f64, n: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(Error::domain(format!(
                "grid needs finite t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        if n < 2 {
            return Err(Error::domain(format!("grid needs at least 2 points, got {n}")));
        }
        Ok(Grid { t_start, t_end, n })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        if i == self.n - 1 {
            // The last point is the endpoint exactly, not an accumulation of
            // rounding from repeated stepping.
            self.t_end
        } else {
            self.t_start + self.step() * i as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}

/// Diagnostics of the factorization used for sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationMeta {
    /// Absolute jitter added to every diagonal entry (0 when none needed).
    pub jitter_used: f64,
    /// Proxy for the smallest eigenvalue: the square of the smallest strictly
    /// positive Cholesky pivot, or the smallest circulant eigenvalue.
    pub min_eigen_proxy: f64,
    /// True when circulant embedding failed its nonnegativity check and the
    /// sampler fell back to dense Cholesky of the increment covariance.
    pub fallback_used: bool,
}

/// A seeded batch of sample paths on a grid, row-major (reps × n).
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: Grid,
    pub reps: usize,
    pub seed: u64,
    pub prng_id: &'static str,
    pub factorization_meta: FactorizationMeta,
    values: Vec<f64>,
}

impl PathEnsemble {
    pub fn path(&self, rep: usize) -> &[f64] {
        &self.values[rep * self.grid.n..(rep + 1) * self.grid.n]
    }

    pub fn iter_paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.grid.n)
    }
}

/// Per-replication maximum over grid points.
pub fn sup_over_path(ensemble: &PathEnsemble) -> Vec<f64> {
    ensemble
        .iter_paths()
        .map(|p| p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

// ---------------------------------------------------------------------------
// Dense Cholesky engine for non-stationary (multifractional) covariance.
// ---------------------------------------------------------------------------

/// Packed lower-triangular Cholesky factor of the grid covariance, shared
/// read-only by all replications.
pub(crate) struct MbmEngine {
    grid: Grid,
    /// L in packed row-major lower-triangular storage; row i starts at
    /// i(i+1)/2 and has i+1 entries.
    chol: Vec<f64>,
    pub(crate) meta: FactorizationMeta,
}

impl MbmEngine {
    pub(crate) fn new(model: &CovarianceModel, grid: Grid) -> Result<Self> {
        if grid.n > MAX_FACTOR_N {
            return Err(Error::domain(format!(
                "grid has {} points; dense factorization is capped at {MAX_FACTOR_N}",
                grid.n
            )));
        }
        let (d1, d2) = model.spec().domain();
        if grid.t_start < d1 - 1e-12 || grid.t_end > d2 + 1e-12 {
            return Err(Error::domain(format!(
                "grid [{}, {}] is not contained in the model domain [{d1}, {d2}]",
                grid.t_start, grid.t_end
            )));
        }
        let n = grid.n;
        let pts = grid.points();
        let mut k = vec![0.0f64; n * (n + 1) / 2];
        for i in 0..n {
            let row = i * (i + 1) / 2;
            for j in 0..=i {
                // Built symmetric by construction: only the lower triangle is
                // ever stored or read.
                k[row + j] = model.autocov(pts[i], pts[j])?;
            }
        }
        let trace: f64 = (0..n).map(|i| k[i * (i + 1) / 2 + i]).sum();
        let scale = trace / n as f64;
        let mut last_failure: Option<(usize, f64, f64)> = None;
        for &level in &JITTER_LADDER {
            let jitter = level * scale;
            match cholesky_packed(&k, n, jitter) {
                Ok((chol, min_pivot)) => {
                    return Ok(MbmEngine {
                        grid,
                        chol,
                        meta: FactorizationMeta {
                            jitter_used: jitter,
                            min_eigen_proxy: min_pivot * min_pivot,
                            fallback_used: false,
                        },
                    });
                }
                Err((idx, pivot)) => last_failure = Some((idx, pivot, jitter)),
            }
        }
        let (idx, pivot, jitter) = last_failure.unwrap();
        Err(Error::numerical(format!(
            "covariance factorization failed even with jitter {jitter:.3e}: \
             pivot {pivot:.6e} at grid index {idx} (t = {})",
            grid.point(idx)
        )))
    }

    /// Fill `path` with L·z for the replication's normal draws; returns
    /// nothing but leaves the path in the caller's buffer.
    pub(crate) fn path_into(&self, z: &[f64], path: &mut [f64]) {
        let n = self.grid.n;
        for i in 0..n {
            let row = &self.chol[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            let mut acc = 0.0;
            for (lij, zj) in row.iter().zip(&z[..=i]) {
                acc += lij * zj;
            }
            path[i] = acc;
        }
    }
}

/// Packed Cholesky with a fixed diagonal jitter. Exactly-zero rows (the
/// t = 0 grid point has zero variance and zero covariance against every
/// other point) produce a zero pivot column rather than a failure. Returns
/// the factor and the smallest strictly positive pivot, or the index and
/// value of the pivot that went nonpositive.
#[allow(clippy::type_complexity)]
fn cholesky_packed(k: &[f64], n: usize, jitter: f64) -> std::result::Result<(Vec<f64>, f64), (usize, f64)> {
    let mut l = vec![0.0f64; k.len()];
    let mut min_pivot = f64::INFINITY;
    for i in 0..n {
        let row_i = i * (i + 1) / 2;
        for j in 0..=i {
            let row_j = j * (j + 1) / 2;
            let mut acc = k[row_i + j];
            if i == j {
                acc += jitter;
            }
            for p in 0..j {
                acc -= l[row_i + p] * l[row_j + p];
            }
            if i == j {
                if acc > 0.0 {
                    let piv = acc.sqrt();
                    l[row_i + j] = piv;
                    if piv < min_pivot {
                        min_pivot = piv;
                    }
                } else if acc >= -1e-12 * (k[row_i + i].abs() + jitter).max(f64::MIN_POSITIVE)
                    && k[row_i + i] == 0.0
                {
                    // Structurally zero variance (t = 0): pin the column.
                    l[row_i + j] = 0.0;
                } else {
                    return Err((i, acc));
                }
            } else {
                let piv = l[row_j + j];
                l[row_i + j] = if piv == 0.0 { 0.0 } else { acc / piv };
            }
        }
    }
    Ok((l, if min_pivot.is_finite() { min_pivot } else { 0.0 }))
}

fn draw_normals(rng: &mut rand_chacha::ChaCha12Rng, buf: &mut [f64]) {
    for v in buf.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// Exact mBm sample paths: rows are i.i.d. draws of the zero-mean Gaussian
/// vector with K[i][j] = autocov(t_i, t_j). Deterministic for a given
/// (seed, grid, reps) regardless of parallelism.
pub fn sample_mbm(
    model: &CovarianceModel,
    grid: Grid,
    reps: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let engine = MbmEngine::new(model, grid)?;
    check_reps(reps, grid.n)?;
    let n = grid.n;
    let mut values = vec![0.0f64; reps * n];
    values
        .par_chunks_exact_mut(n)
        .enumerate()
        .for_each_init(
            || vec![0.0f64; n],
            |z, (rep, out)| {
                let mut rng = rng::rep_rng(seed, tags::MBM_PATHS, rep as u64);
                draw_normals(&mut rng, z);
                engine.path_into(z, out);
            },
        );
    Ok(PathEnsemble {
        grid,
        reps,
        seed,
        prng_id: PRNG_ID,
        factorization_meta: engine.meta,
        values,
    })
}

/// Per-replication grid maxima of mBm paths without materializing the
/// ensemble; memory is O(grid points) per thread.
pub fn sample_mbm_sups(
    model: &CovarianceModel,
    grid: Grid,
    reps: usize,
    seed: u64,
) -> Result<(Vec<f64>, FactorizationMeta)> {
    if reps == 0 {
        return Err(Error::domain("need at least one replication"));
    }
    let engine = MbmEngine::new(model, grid)?;
    let n = grid.n;
    let sups: Vec<f64> = (0..reps)
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n], vec![0.0f64; n]),
            |(z, path), rep| {
                let mut rng = rng::rep_rng(seed, tags::MBM_PATHS, rep as u64);
                draw_normals(&mut rng, z);
                engine.path_into(z, path);
                path.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            },
        )
        .collect();
    Ok((sups, engine.meta))
}

fn check_reps(reps: usize, n: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::domain("need at least one replication"));
    }
    if reps.saturating_mul(n) > MAX_MATERIALIZED {
        return Err(Error::domain(format!(
            "ensemble of {reps} paths × {n} points is too large to materialize; \
             use the streaming supremum estimator"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Circulant embedding engine for stationary-increment fBm.
// ---------------------------------------------------------------------------

enum FbmKind {
    /// Davies–Harte/Wood–Chan: eigenvalues of the embedded circulant are
    /// nonnegative, paths come from one FFT per replication.
    Circulant {
        sqrt_eigs: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
        two_m: usize,
    },
    /// Nonnegativity failed beyond tolerance: dense Cholesky of the m×m
    /// increment covariance (never expected for admissible alpha; kept as a
    /// correctness net).
    Cholesky { chol: Vec<f64>, m: usize },
}

pub(crate) struct FbmEngine {
    grid: Grid,
    kind: FbmKind,
    pub(crate) meta: FactorizationMeta,
}

pub(crate) struct FbmWorkspace {
    spectrum: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    normals: Vec<f64>,
}

impl FbmEngine {
    pub(crate) fn new(alpha: f64, grid: Grid) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::domain(format!(
                "fBm exponent alpha must lie in (0, 2], got {alpha}"
            )));
        }
        if grid.t_start != 0.0 {
            return Err(Error::domain(format!(
                "fBm grids must start at 0, got t_start = {}",
                grid.t_start
            )));
        }
        let m = grid.n - 1;
        let step = grid.step();
        // Stationary increment autocovariance, step-normalized:
        // rho(k) = ½ step^alpha (|k+1|^alpha − 2|k|^alpha + |k−1|^alpha).
        let rho: Vec<f64> = (0..=m)
            .map(|k| {
                let kf = k as f64;
                0.5 * step.powf(alpha)
                    * ((kf + 1.0).powf(alpha) - 2.0 * kf.powf(alpha)
                        + (kf - 1.0).abs().powf(alpha))
            })
            .collect();
        let two_m = 2 * m;
        let mut row: Vec<Complex<f64>> = (0..two_m)
            .map(|j| Complex::new(rho[j.min(two_m - j)], 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(two_m);
        let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(&mut row, &mut scratch);
        let eigs: Vec<f64> = row.iter().map(|c| c.re).collect();
        let max_eig = eigs.iter().copied().fold(0.0f64, f64::max);
        let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 * max_eig {
            // Fall back to exact dense factorization of the increments.
            if m > MAX_FACTOR_N {
                return Err(Error::numerical(format!(
                    "circulant embedding produced eigenvalue {min_eig:.3e} \
                     (max {max_eig:.3e}) and the grid is too large for the \
                     dense fallback"
                )));
            }
            let mut k = vec![0.0f64; m * (m + 1) / 2];
            for i in 0..m {
                for j in 0..=i {
                    k[i * (i + 1) / 2 + j] = rho[i - j];
                }
            }
            let (chol, min_pivot) = cholesky_packed(&k, m, 0.0)
                .map_err(|(idx, piv)| {
                    Error::numerical(format!(
                        "increment covariance factorization failed: pivot \
                         {piv:.6e} at increment {idx}"
                    ))
                })?;
            return Ok(FbmEngine {
                grid,
                kind: FbmKind::Cholesky { chol, m },
                meta: FactorizationMeta {
                    jitter_used: 0.0,
                    min_eigen_proxy: min_pivot * min_pivot,
                    fallback_used: true,
                },
            });
        }
        // Scale once: increments are Re(FFT(V))/√(2m) with V built from
        // √(λ_k); fold the 1/√(2m) into the stored square roots.
        let norm = 1.0 / (two_m as f64).sqrt();
        let sqrt_eigs: Vec<f64> = eigs.iter().map(|&l| l.max(0.0).sqrt() * norm).collect();
        Ok(FbmEngine {
            grid,
            kind: FbmKind::Circulant { sqrt_eigs, fft, two_m },
            meta: FactorizationMeta {
                jitter_used: 0.0,
                min_eigen_proxy: min_eig,
                fallback_used: false,
            },
        })
    }

    pub(crate) fn workspace(&self) -> FbmWorkspace {
        match &self.kind {
            FbmKind::Circulant { fft, two_m, .. } => FbmWorkspace {
                spectrum: vec![Complex::new(0.0, 0.0); *two_m],
                scratch: vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()],
                normals: vec![0.0; *two_m],
            },
            FbmKind::Cholesky { m, .. } => FbmWorkspace {
                spectrum: Vec::new(),
                scratch: Vec::new(),
                normals: vec![0.0; *m],
            },
        }
    }

    /// Write one replication's path (n values, starting at exactly 0) into
    /// `path`, drawing from the replication's derived RNG stream.
    pub(crate) fn path_into(
        &self,
        seed: u64,
        rep: u64,
        ws: &mut FbmWorkspace,
        path: &mut [f64],
    ) {
        let n = self.grid.n;
        let m = n - 1;
        let mut rng = rng::rep_rng(seed, tags::FBM_PATHS, rep);
        match &self.kind {
            FbmKind::Circulant { sqrt_eigs, fft, two_m } => {
                draw_normals(&mut rng, &mut ws.normals);
                let z = &ws.normals;
                let v = &mut ws.spectrum;
                v[0] = Complex::new(sqrt_eigs[0] * z[0], 0.0);
                v[m] = Complex::new(sqrt_eigs[m] * z[1], 0.0);
                let half = std::f64::consts::FRAC_1_SQRT_2;
                for k in 1..m {
                    let re = half * sqrt_eigs[k] * z[2 * k];
                    let im = half * sqrt_eigs[k] * z[2 * k + 1];
                    v[k] = Complex::new(re, im);
                    v[two_m - k] = Complex::new(re, -im);
                }
                fft.process_with_scratch(v, &mut ws.scratch);
                path[0] = 0.0;
                let mut acc = 0.0;
                for j in 0..m {
                    acc += v[j].re;
                    path[j + 1] = acc;
                }
            }
            FbmKind::Cholesky { chol, m } => {
                draw_normals(&mut rng, &mut ws.normals);
                path[0] = 0.0;
                let mut acc = 0.0;
                for i in 0..*m {
                    let row = &chol[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
                    let mut inc = 0.0;
                    for (lij, zj) in row.iter().zip(&ws.normals[..=i]) {
                        inc += lij * zj;
                    }
                    acc += inc;
                    path[i + 1] = acc;
                }
            }
        }
    }
}

/// Exact-in-distribution fBm with Var X(t) = t^alpha on a uniform grid from
/// 0, via circulant embedding of the increment sequence. Deterministic per
/// seed; paths start at exactly 0.
pub fn sample_fbm(alpha: f64, grid: Grid, reps: usize, seed: u64) -> Result<PathEnsemble> {
    let engine = FbmEngine::new(alpha, grid)?;
    check_reps(reps, grid.n)?;
    let n = grid.n;
    let mut values = vec![0.0f64; reps * n];
    values
        .par_chunks_exact_mut(n)
        .enumerate()
        .for_each_init(
            || engine.workspace(),
            |ws, (rep, out)| {
                engine.path_into(seed, rep as u64, ws, out);
            },
        );
    Ok(PathEnsemble {
        grid,
        reps,
        seed,
        prng_id: PRNG_ID,
        factorization_meta: engine.meta,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hurst::{HurstSpec, HurstVariant};

    fn brownian_model() -> CovarianceModel {
        CovarianceModel::new(
            HurstSpec::new(HurstVariant::Constant { h: 0.5 }, 0.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn grid_points_hit_endpoints() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(10), 1.0);
        assert!((g.step() - 0.1).abs() < 1e-15);
        assert!(Grid::new(1.0, 1.0, 4).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn mbm_deterministic_and_zero_at_origin() {
        let m = brownian_model();
        let g = Grid::new(0.0, 1.0, 17).unwrap();
        let e1 = sample_mbm(&m, g, 3, 99).unwrap();
        let e2 = sample_mbm(&m, g, 3, 99).unwrap();
        assert_eq!(e1, e2);
        for p in e1.iter_paths() {
            assert_eq!(p[0], 0.0);
        }
        let e3 = sample_mbm(&m, g, 3, 100).unwrap();
        assert_ne!(e1.path(0), e3.path(0));
    }

    #[test]
    fn mbm_negating_normals_negates_paths() {
        let m = brownian_model();
        let g = Grid::new(0.0, 1.0, 9).unwrap();
        let engine = MbmEngine::new(&m, g).unwrap();
        let mut rng = crate::rng::rep_rng(5, crate::rng::tags::MBM_PATHS, 0);
        let mut z = vec![0.0; 9];
        draw_normals(&mut rng, &mut z);
        let mut a = vec![0.0; 9];
        let mut b = vec![0.0; 9];
        engine.path_into(&z, &mut a);
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        engine.path_into(&neg, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn mbm_sups_match_materialized_paths() {
        let m = brownian_model();
        let g = Grid::new(0.0, 1.0, 33).unwrap();
        let ens = sample_mbm(&m, g, 50, 7).unwrap();
        let (sups, _) = sample_mbm_sups(&m, g, 50, 7).unwrap();
        assert_eq!(sup_over_path(&ens), sups);
    }

    #[test]
    fn mbm_grid_cap_enforced() {
        let m = brownian_model();
        let g = Grid::new(0.0, 1.0, MAX_FACTOR_N + 1).unwrap();
        assert!(matches!(
            sample_mbm(&m, g, 1, 0).unwrap_err(),
            Error::Domain(_)
        ));
    }

    #[test]
    fn fbm_requires_grid_from_zero() {
        let g = Grid::new(0.5, 1.0, 8).unwrap();
        assert!(sample_fbm(1.0, g, 1, 0).is_err());
        assert!(sample_fbm(2.5, Grid::new(0.0, 1.0, 8).unwrap(), 1, 0).is_err());
        assert!(sample_fbm(0.0, Grid::new(0.0, 1.0, 8).unwrap(), 1, 0).is_err());
    }

    #[test]
    fn fbm_alpha_two_is_a_line() {
        let g = Grid::new(0.0, 1.0, 9).unwrap();
        let ens = sample_fbm(2.0, g, 4, 11).unwrap();
        for p in ens.iter_paths() {
            let slope = p[8];
            for (i, v) in p.iter().enumerate() {
                assert!(
                    (v - slope * i as f64 / 8.0).abs() < 1e-10,
                    "not a line: {p:?}"
                );
            }
        }
    }

    #[test]
    fn fbm_deterministic() {
        let g = Grid::new(0.0, 2.0, 65).unwrap();
        let a = sample_fbm(1.4, g, 5, 3).unwrap();
        let b = sample_fbm(1.4, g, 5, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ensembles_identical_across_thread_counts() {
        let m = brownian_model();
        let g = Grid::new(0.0, 1.0, 65).unwrap();
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool2 = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap();
        let e1 = pool1.install(|| sample_mbm(&m, g, 32, 123).unwrap());
        let e2 = pool2.install(|| sample_mbm(&m, g, 32, 123).unwrap());
        assert_eq!(e1, e2);
        let f1 = pool1.install(|| sample_fbm(0.8, g, 32, 123).unwrap());
        let f2 = pool2.install(|| sample_fbm(0.8, g, 32, 123).unwrap());
        assert_eq!(f1, f2);
    }

    #[test]
    fn sup_over_path_basics() {
        let g = Grid::new(0.0, 1.0, 3).unwrap();
        let ens = PathEnsemble {
            grid: g,
            reps: 2,
            seed: 0,
            prng_id: PRNG_ID,
            factorization_meta: FactorizationMeta {
                jitter_used: 0.0,
                min_eigen_proxy: 1.0,
                fallback_used: false,
            },
            values: vec![0.0, 0.0, 0.0, -1.0, 2.0, 0.5],
        };
        assert_eq!(sup_over_path(&ens), vec![0.0, 2.0]);
    }
}

//! Empirical verification engine: Monte Carlo estimates of the grid
//! exceedance probability P(max_grid B_H > u), grid-refinement studies with
//! Richardson extrapolation toward the continuous supremum, and ratio
//! studies that join the empirical estimates with the asymptotic evaluator.

use crate::asymptotics::{asymptotic_curve, classify, ConstantsProvider, Regime, Scenario};
use crate::covariance::CaseTag;
use crate::error::{Error, Result};
use crate::hurst::HurstVariant;
use crate::rng::{self, tags, PRNG_ID};
use crate::sampler::{sample_mbm_sups, Grid};
use serde::Serialize;

/// One level u of an exceedance study. The asymptotic columns are only
/// present after a ratio study joins them.
#[derive(Debug, Clone, Serialize)]
pub struct ExceedanceRow {
    pub u: f64,
    /// Normalized level μ = u/σ(critical point) of the scenario's case.
    pub mu: f64,
    pub p_hat: f64,
    pub stderr: f64,
    /// Raw count of replications whose grid max exceeded u.
    pub exceed_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_asymptotic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
}

/// Exceedance estimates over a level sweep, with full protocol metadata.
#[derive(Debug, Clone, Serialize)]
pub struct ExceedanceStudy {
    pub hurst: HurstVariant,
    pub interval: (f64, f64),
    pub case_tag: CaseTag,
    pub grid_n: usize,
    pub reps: usize,
    pub seed: u64,
    pub prng_id: &'static str,
    pub rows: Vec<ExceedanceRow>,
    /// Least-squares slope of |log ratio| against log u over the reliable
    /// rows (≥ 10 exceedances); populated by ratio studies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trend_slope: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementRow {
    pub grid_n: usize,
    pub p_hat: f64,
    pub stderr: f64,
    pub exceed_count: usize,
}

/// Grid-refinement study at a fixed level: exceedance estimates per grid
/// density plus the Richardson-extrapolated continuum estimate.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementStudy {
    pub hurst: HurstVariant,
    pub interval: (f64, f64),
    pub case_tag: CaseTag,
    pub u: f64,
    pub reps: usize,
    pub seed: u64,
    pub prng_id: &'static str,
    pub rows: Vec<RefinementRow>,
    /// Extrapolated continuum exceedance probability (equals the single
    /// level's estimate when only one grid density is given).
    pub extrapolated: f64,
    pub extrapolated_stderr: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn require_increasing(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::domain(format!("{name} must be nonempty")));
    }
    if xs.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::domain(format!("{name} entries must be positive and finite")));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

fn binomial_stderr(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

/// Estimate P(max_grid > u) for every u on one shared path ensemble
/// (common random numbers), so the estimates are exactly nonincreasing in u.
pub fn estimate_exceedance(
    scenario: &Scenario,
    u_list: &[f64],
    grid_n: usize,
    reps: usize,
    seed: u64,
) -> Result<ExceedanceStudy> {
    require_increasing("u_list", u_list)?;
    if reps < 1000 {
        return Err(Error::domain(format!(
            "exceedance estimation needs at least 1000 replications, got {reps}"
        )));
    }
    let (t1, t2) = scenario.interval();
    let grid = Grid::new(t1, t2, grid_n)?;
    let (sups, _meta) = sample_mbm_sups(scenario.model(), grid, reps, seed)?;
    let rows = u_list
        .iter()
        .map(|&u| {
            let count = sups.iter().filter(|s| **s > u).count();
            let p_hat = count as f64 / reps as f64;
            let mu = classify(scenario, u)?.mu;
            Ok(ExceedanceRow {
                u,
                mu,
                p_hat,
                stderr: binomial_stderr(p_hat, reps),
                exceed_count: count,
                p_asymptotic: None,
                ratio: None,
                regime: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExceedanceStudy {
        hurst: scenario.spec().variant().clone(),
        interval: (t1, t2),
        case_tag: scenario.case(),
        grid_n,
        reps,
        seed,
        prng_id: PRNG_ID,
        rows,
        trend_slope: None,
        warnings: Vec::new(),
    })
}

/// Exceedance estimates across several grid densities at shared levels, one
/// independent ensemble per density (derived per-level seeds), finished by
/// Richardson extrapolation in the grid step. Returns one study per level;
/// all levels share the same per-density ensembles.
pub fn refinement_study_multi(
    scenario: &Scenario,
    u_list: &[f64],
    grid_n_list: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<RefinementStudy>> {
    require_increasing("u_list", u_list)?;
    if grid_n_list.is_empty() {
        return Err(Error::domain("grid_n_list must be nonempty"));
    }
    if grid_n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("grid_n_list must be strictly increasing"));
    }
    if reps < 2 {
        return Err(Error::domain("need at least two replications"));
    }
    let (t1, t2) = scenario.interval();
    // Per-density sup samples, simulated once and shared by every level.
    let mut level_sups: Vec<Vec<f64>> = Vec::with_capacity(grid_n_list.len());
    for (idx, &n) in grid_n_list.iter().enumerate() {
        let grid = Grid::new(t1, t2, n)?;
        let level_seed = rng::derive_seed(seed, tags::REFINEMENT_LEVEL, idx as u64);
        let (sups, _meta) = sample_mbm_sups(scenario.model(), grid, reps, level_seed)?;
        level_sups.push(sups);
    }
    u_list
        .iter()
        .map(|&u| {
            let beta = classify(scenario, u)?.alpha / 2.0;
            let rows: Vec<RefinementRow> = grid_n_list
                .iter()
                .zip(&level_sups)
                .map(|(&grid_n, sups)| {
                    let count = sups.iter().filter(|s| **s > u).count();
                    let p_hat = count as f64 / reps as f64;
                    RefinementRow {
                        grid_n,
                        p_hat,
                        stderr: binomial_stderr(p_hat, reps),
                        exceed_count: count,
                    }
                })
                .collect();
            let mut warnings = Vec::new();
            for w in rows.windows(2) {
                let pooled = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
                if w[1].p_hat < w[0].p_hat - 3.0 * pooled {
                    warnings.push(format!(
                        "estimate decreased under refinement beyond noise: \
                         grid {} gave {:.5e}, grid {} gave {:.5e}",
                        w[0].grid_n, w[0].p_hat, w[1].grid_n, w[1].p_hat
                    ));
                }
            }
            // Richardson step on the last two densities: the grid-max deficit
            // scales like (grid step)^β with β the path's Hölder exponent
            // H(critical point) = α/2.
            let (extrapolated, extrapolated_stderr) = if rows.len() == 1 {
                (rows[0].p_hat, rows[0].stderr)
            } else {
                let lo = &rows[rows.len() - 2];
                let hi = &rows[rows.len() - 1];
                let r = (hi.grid_n - 1) as f64 / (lo.grid_n - 1) as f64;
                let k = 1.0 / (r.powf(beta) - 1.0);
                let p = hi.p_hat + (hi.p_hat - lo.p_hat) * k;
                let se = (((1.0 + k) * hi.stderr).powi(2) + (k * lo.stderr).powi(2)).sqrt();
                (p, se)
            };
            Ok(RefinementStudy {
                hurst: scenario.spec().variant().clone(),
                interval: (t1, t2),
                case_tag: scenario.case(),
                u,
                reps,
                seed,
                prng_id: PRNG_ID,
                rows,
                extrapolated,
                extrapolated_stderr,
                warnings,
            })
        })
        .collect()
}

/// Single-level refinement study.
pub fn refinement_study(
    scenario: &Scenario,
    u: f64,
    grid_n_list: &[usize],
    reps: usize,
    seed: u64,
) -> Result<RefinementStudy> {
    Ok(refinement_study_multi(scenario, &[u], grid_n_list, reps, seed)?
        .pop()
        .expect("one study per level"))
}

/// Join empirical exceedance estimates with the asymptotic curve and report
/// the convergence trend of |log ratio| against log u.
pub fn ratio_study(
    scenario: &Scenario,
    u_list: &[f64],
    grid_n: usize,
    reps: usize,
    seed: u64,
    constants: &ConstantsProvider,
) -> Result<ExceedanceStudy> {
    require_increasing("u_list", u_list)?;
    let final_mu = classify(scenario, *u_list.last().unwrap())?.mu;
    if final_mu < 3.0 {
        return Err(Error::domain(format!(
            "ratio study needs the largest level inside the asymptotic \
             regime (μ ≥ 3), got μ = {final_mu}"
        )));
    }
    // Evaluate the asymptotics first: errors there are cheap to surface
    // before the simulation runs.
    let curve = asymptotic_curve(scenario, u_list, constants)?;
    let mut study = estimate_exceedance(scenario, u_list, grid_n, reps, seed)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, asy) in study.rows.iter_mut().zip(&curve) {
        row.p_asymptotic = Some(asy.value);
        row.ratio = Some(row.p_hat / asy.value);
        row.regime = Some(asy.regime);
        study.warnings.extend(asy.warnings.iter().cloned());
        if row.exceed_count < 10 {
            study.warnings.push(format!(
                "u = {}: only {} exceedances in {reps} replications; the \
                 ratio is unreliable",
                row.u, row.exceed_count
            ));
        } else if asy.value > 0.0 {
            xs.push(row.u.ln());
            ys.push((row.p_hat / asy.value).ln().abs());
        }
    }
    if xs.len() >= 2 {
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        study.trend_slope = Some(sxy / sxx);
    } else {
        study
            .warnings
            .push("fewer than two reliable levels; no convergence trend reported".into());
    }
    Ok(study)
}

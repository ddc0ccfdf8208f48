//! Strict configuration schema. Configs are TOML (or JSON when re-running an
//! emitted manifest); unknown keys are hard errors so parameter typos cannot
//! silently invalidate a run.

use mbm_core::asymptotics::{ConstantsProvider, Scenario};
use mbm_core::constants::{
    estimate_pickands, estimate_piterbarg, ConstantEstimate, ConstantKind,
};
use mbm_core::covariance::CaseTag;
use mbm_core::hurst::{HurstSpec, HurstVariant};
use mbm_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub hurst: HurstSection,
    pub interval: IntervalSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case_tag: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

/// Hurst profile: a variant name plus exactly the parameters that variant
/// needs. Extraneous parameters are rejected, not ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HurstSection {
    pub variant: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knots_t: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knots_h: Option<Vec<f64>>,
    /// Optional admissible range override for H values, default [0.05, 0.95].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSection {
    pub t1: f64,
    pub t2: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_n_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    /// Smoothness exponents α to estimate constants for.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Constant kinds: pickands, piterbarg_one_sided, piterbarg_two_sided.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<String>>,
    /// Penalty strengths for the piterbarg kinds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Fixed values that shadow Monte Carlo estimation for matching lookups.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed: Vec<FixedEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedEntry {
    pub kind: String,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Subset of {"json", "csv"}; default both.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<String>>,
}

/// Default MC protocol for the constants subcommand.
pub const DEFAULT_S_LIST: [f64; 3] = [4.0, 8.0, 16.0];
pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_CONST_REPS: usize = 20_000;

/// Default study sizes.
pub const DEFAULT_REPS: usize = 10_000;
pub const MAX_GRID_N: usize = 4096;

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let config: Config = if is_json {
        serde_json::from_str(&text).map_err(|e| {
            Error::config(format!("invalid JSON config {}: {e}", path.display()))
        })?
    } else {
        toml::from_str(&text).map_err(|e| {
            Error::config(format!("invalid config {}: {e}", path.display()))
        })?
    };
    config.hurst_spec()?; // surface profile errors with exit code 2 semantics
    Ok(config)
}

impl Config {
    /// Build and validate the Hurst profile over the configured interval.
    pub fn hurst_spec(&self) -> Result<HurstSpec> {
        fn req(variant: &str, name: &str, v: Option<f64>) -> Result<f64> {
            v.ok_or_else(|| {
                Error::config(format!("hurst variant {variant:?} requires parameter {name}"))
            })
        }
        let h = &self.hurst;
        let v = h.variant.as_str();
        let (variant, used): (HurstVariant, &[&str]) = match v {
            "constant" => (HurstVariant::Constant { h: req(v, "h", h.h)? }, &["h"]),
            "power_law" => (
                HurstVariant::PowerLaw {
                    c: req(v, "c", h.c)?,
                    gamma: req(v, "gamma", h.gamma)?,
                },
                &["c", "gamma"],
            ),
            "log_reciprocal" => (HurstVariant::LogReciprocal, &[]),
            "peak_perturbation" => (
                HurstVariant::PeakPerturbation {
                    t_star: req(v, "t_star", h.t_star)?,
                    h_star: req(v, "h_star", h.h_star)?,
                    c: req(v, "c", h.c)?,
                    gamma: req(v, "gamma", h.gamma)?,
                },
                &["t_star", "h_star", "c", "gamma"],
            ),
            "tabulated" => (
                HurstVariant::Tabulated {
                    knots_t: h.knots_t.clone().ok_or_else(|| {
                        Error::config("hurst variant \"tabulated\" requires knots_t")
                    })?,
                    knots_h: h.knots_h.clone().ok_or_else(|| {
                        Error::config("hurst variant \"tabulated\" requires knots_h")
                    })?,
                },
                &["knots_t", "knots_h"],
            ),
            other => {
                return Err(Error::config(format!(
                    "unknown hurst variant {other:?}; expected constant, power_law, \
                     log_reciprocal, peak_perturbation or tabulated"
                )));
            }
        };
        // Reject parameters that the chosen variant does not consume.
        let extraneous: Vec<&str> = [
            ("h", h.h.is_some()),
            ("c", h.c.is_some()),
            ("gamma", h.gamma.is_some()),
            ("t_star", h.t_star.is_some()),
            ("h_star", h.h_star.is_some()),
            ("knots_t", h.knots_t.is_some()),
            ("knots_h", h.knots_h.is_some()),
        ]
        .iter()
        .filter(|(name, present)| *present && !used.contains(name))
        .map(|(name, _)| *name)
        .collect();
        if !extraneous.is_empty() {
            return Err(Error::config(format!(
                "parameters [{}] do not apply to hurst variant {:?}",
                extraneous.join(", "),
                h.variant
            )));
        }
        match h.range {
            Some([lo, hi]) => {
                HurstSpec::with_range(variant, self.interval.t1, self.interval.t2, lo, hi)
            }
            None => HurstSpec::new(variant, self.interval.t1, self.interval.t2),
        }
    }

    pub fn case(&self) -> Result<CaseTag> {
        let tag = self.case_tag.as_deref().ok_or_else(|| {
            Error::config("this command needs a case_tag (thm1, thm2_i, thm2_ii or thm2_iii)")
        })?;
        CaseTag::from_wire(tag)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(self.hurst_spec()?, self.case()?)
    }

    pub fn seed(&self) -> u64 {
        self.study.as_ref().and_then(|s| s.seed).unwrap_or(0)
    }

    pub fn reps(&self) -> usize {
        self.study.as_ref().and_then(|s| s.reps).unwrap_or(DEFAULT_REPS)
    }

    /// Default grid density: 2048 points per unit of interval length,
    /// clamped to the dense-factorization cap.
    pub fn grid_n(&self) -> usize {
        if let Some(n) = self.study.as_ref().and_then(|s| s.grid_n) {
            return n;
        }
        let span = self.interval.t2 - self.interval.t1;
        ((2048.0 * span).round() as usize).clamp(64, MAX_GRID_N)
    }

    pub fn u_list(&self) -> Result<Vec<f64>> {
        self.study
            .as_ref()
            .and_then(|s| s.u_list.clone())
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::config("this command needs study.u_list (or --u)"))
    }

    pub fn grid_n_list(&self) -> Result<Vec<usize>> {
        self.study
            .as_ref()
            .and_then(|s| s.grid_n_list.clone())
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::config("the refine command needs study.grid_n_list"))
    }

    /// Materialize all study defaults and overrides so the serialized config
    /// re-runs identically (the manifest contract).
    pub fn resolved(&self, seed_override: Option<u64>, u_override: Option<f64>) -> Config {
        let mut out = self.clone();
        let mut study = out.study.take().unwrap_or_default();
        study.seed = Some(seed_override.unwrap_or_else(|| self.seed()));
        study.reps = Some(self.reps());
        study.grid_n = Some(self.grid_n());
        if let Some(u) = u_override {
            study.u_list = Some(vec![u]);
        }
        out.study = Some(study);
        out
    }

    /// Build the constants lookup table: fixed entries first (they shadow),
    /// then Monte Carlo estimates for every configured (kind, α, a) combo
    /// that no fixed entry already covers. Returns the provider together
    /// with the freshly estimated records.
    pub fn build_provider(&self, seed: u64) -> Result<(ConstantsProvider, Vec<ConstantEstimate>)> {
        let mut provider = ConstantsProvider::new();
        let mut estimated = Vec::new();
        let Some(section) = &self.constants else {
            return Ok((provider, estimated));
        };
        for f in &section.fixed {
            let kind = ConstantKind::from_wire(&f.kind)?;
            if matches!(kind, ConstantKind::Pickands) != f.a.is_none() {
                return Err(Error::config(format!(
                    "fixed constant {}: the a parameter is required for \
                     piterbarg kinds and meaningless for pickands",
                    f.kind
                )));
            }
            provider.push_fixed(kind, f.alpha, f.a, f.value)?;
        }
        let alphas = section.alphas.clone().unwrap_or_default();
        if alphas.is_empty() {
            return Ok((provider, estimated));
        }
        let kinds: Vec<ConstantKind> = section
            .kinds
            .clone()
            .unwrap_or_else(|| vec!["pickands".into()])
            .iter()
            .map(|k| ConstantKind::from_wire(k))
            .collect::<Result<_>>()?;
        let s_list = section.s_list.clone().unwrap_or_else(|| DEFAULT_S_LIST.to_vec());
        let delta = section.delta.unwrap_or(DEFAULT_DELTA);
        let reps = section.reps.unwrap_or(DEFAULT_CONST_REPS);
        for &alpha in &alphas {
            for &kind in &kinds {
                match kind {
                    ConstantKind::Pickands => {
                        if provider.lookup(kind, alpha, None).is_ok() {
                            continue; // fixed override short-circuits
                        }
                        let est = estimate_pickands(alpha, &s_list, delta, reps, seed)?;
                        provider.push_estimate(est.clone());
                        estimated.push(est);
                    }
                    ConstantKind::PiterbargOneSided | ConstantKind::PiterbargTwoSided => {
                        let two_sided = kind == ConstantKind::PiterbargTwoSided;
                        let a_values = section.a_values.clone().unwrap_or_default();
                        if a_values.is_empty() {
                            return Err(Error::config(
                                "piterbarg kinds need constants.a_values",
                            ));
                        }
                        for &a in &a_values {
                            if provider.lookup(kind, alpha, Some(a)).is_ok() {
                                continue;
                            }
                            let est = estimate_piterbarg(
                                alpha, a, two_sided, &s_list, delta, reps, seed,
                            )?;
                            provider.push_estimate(est.clone());
                            estimated.push(est);
                        }
                    }
                }
            }
        }
        Ok((provider, estimated))
    }

    pub fn out_dir(&self) -> &str {
        self.output
            .as_ref()
            .and_then(|o| o.dir.as_deref())
            .unwrap_or(".")
    }

    pub fn formats(&self) -> Result<(bool, bool)> {
        let Some(list) = self.output.as_ref().and_then(|o| o.formats.clone()) else {
            return Ok((true, true));
        };
        let (mut json, mut csv) = (false, false);
        for f in &list {
            match f.as_str() {
                "json" => json = true,
                "csv" => csv = true,
                other => {
                    return Err(Error::config(format!(
                        "unknown output format {other:?}; expected json or csv"
                    )));
                }
            }
        }
        Ok((json, csv))
    }
}

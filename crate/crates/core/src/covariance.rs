//! Exact second-order structure of multifractional Brownian motion: the
//! D(x,y) normalization kernel, autocovariance, standard deviation,
//! correlation, the C(x) spectral normalization, and the local expansions of
//! the standard deviation around a variance maximizer.

use crate::error::{Error, Result};
use crate::hurst::{HurstSpec, HurstVariant};
use crate::special::{gamma_pos, ln_gamma_pos};
use std::f64::consts::PI;

/// Which analysis case a local expansion belongs to. The wire names
/// ("thm1", "thm2_i", ...) are the config-file vocabulary; the variants are
/// named by the shape of the Hurst profile they require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum CaseTag {
    /// wire "thm1": cusp peak of H at an interior or endpoint maximizer t*.
    #[serde(rename = "thm1")]
    Peak,
    /// wire "thm2_i": H(t) = 1/ln t, constant standard deviation e.
    #[serde(rename = "thm2_i")]
    LogHurst,
    /// wire "thm2_ii": H(t) = c·t^gamma.
    #[serde(rename = "thm2_ii")]
    PowerHurst,
    /// wire "thm2_iii": differentiable monotone H.
    #[serde(rename = "thm2_iii")]
    MonotoneHurst,
}

impl CaseTag {
    pub const ALL: [CaseTag; 4] = [
        CaseTag::Peak,
        CaseTag::LogHurst,
        CaseTag::PowerHurst,
        CaseTag::MonotoneHurst,
    ];

    /// The label used in config files and output records.
    pub fn wire_name(self) -> &'static str {
        match self {
            CaseTag::Peak => "thm1",
            CaseTag::LogHurst => "thm2_i",
            CaseTag::PowerHurst => "thm2_ii",
            CaseTag::MonotoneHurst => "thm2_iii",
        }
    }

    pub fn from_wire(s: &str) -> Result<Self> {
        match s {
            "thm1" => Ok(CaseTag::Peak),
            "thm2_i" => Ok(CaseTag::LogHurst),
            "thm2_ii" => Ok(CaseTag::PowerHurst),
            "thm2_iii" => Ok(CaseTag::MonotoneHurst),
            other => Err(Error::config(format!(
                "unknown case tag {other:?}; expected one of thm1, thm2_i, thm2_ii, thm2_iii"
            ))),
        }
    }
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.wire_name())
    }
}

/// Normalization kernel of the mBm autocovariance:
/// D(x,y) = √(Γ(2x+1)Γ(2y+1) sin(πx) sin(πy)) / (2 Γ(x+y+1) sin(π(x+y)/2)).
/// The Γ products are evaluated in log domain.
pub fn d_kernel(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) {
        return Err(Error::domain(format!(
            "d_kernel arguments must lie in (0,1), got ({x}, {y})"
        )));
    }
    // Canonical argument order makes the symmetry D(x,y) = D(y,x) exact in
    // floating point, not just up to rounding of the sum below.
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    // sin(πx), sin(πy), sin(π(x+y)/2) are all positive on the admissible set.
    let log_num = 0.5
        * (ln_gamma_pos(2.0 * x + 1.0)
            + ln_gamma_pos(2.0 * y + 1.0)
            + (PI * x).sin().ln()
            + (PI * y).sin().ln());
    let log_den = std::f64::consts::LN_2
        + ln_gamma_pos(x + y + 1.0)
        + (PI * (x + y) / 2.0).sin().ln();
    Ok((log_num - log_den).exp())
}

/// Spectral normalization C(x) = (π / (x Γ(2x) sin(πx)))^{1/2} that makes the
/// harmonizable representation have unit local variance scale.
pub fn c_normalization(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!(
            "c_normalization argument must lie in (0,1), got {x}"
        )));
    }
    Ok((PI / (x * gamma_pos(2.0 * x) * (PI * x).sin())).sqrt())
}

/// Local behaviour of σ(t) = t^{H(t)} around a point of interest: the
/// first-order decay σ(t0+h) ≈ σ(t0)·(1 − coeff·|h|^exponent), together with
/// the local correlation parameters a = ½ t0^{−2H(t0)} and α = 2H(t0) that
/// drive the extreme-value approximations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalExpansion {
    pub center: f64,
    /// σ at the center.
    pub scale: f64,
    /// Decay coefficient b of the matching analysis case.
    pub coeff: f64,
    /// Decay exponent: gamma for the cusp-peak case, 1 otherwise.
    pub exponent: f64,
    /// a = ½·center^{−2H(center)}.
    pub corr_a: f64,
    /// α = 2·H(center).
    pub corr_alpha: f64,
}

/// Second-order model for a given Hurst profile.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    spec: HurstSpec,
}

impl CovarianceModel {
    pub fn new(spec: HurstSpec) -> Self {
        CovarianceModel { spec }
    }

    pub fn spec(&self) -> &HurstSpec {
        &self.spec
    }

    /// Cov(B(s), B(t)) = D(H(s), H(t)) (s^{H(s)+H(t)} + t^{H(s)+H(t)} − |t−s|^{H(s)+H(t)}).
    pub fn autocov(&self, s: f64, t: f64) -> Result<f64> {
        let hs = self.spec.value(s)?;
        let ht = self.spec.value(t)?;
        let p = hs + ht;
        let d = d_kernel(hs, ht)?;
        // 0^p = 0 for p > 0, so covariance against t = 0 vanishes naturally.
        Ok(d * (s.powf(p) + t.powf(p) - (t - s).abs().powf(p)))
    }

    /// σ(t) = t^{H(t)}; σ(0) = 0 by continuity.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        let h = self.spec.value(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(t.powf(h))
    }

    /// Correlation r(s,t) = Cov(s,t) / (σ(s)σ(t)); undefined when either
    /// time is 0.
    pub fn correlation(&self, s: f64, t: f64) -> Result<f64> {
        if s == 0.0 || t == 0.0 {
            return Err(Error::domain(
                "correlation is undefined at t = 0 (zero variance)",
            ));
        }
        let c = self.autocov(s, t)?;
        Ok(c / (self.sigma(s)? * self.sigma(t)?))
    }

    /// First-order expansion of σ at t0 for the given analysis case:
    /// σ(t0+h) = σ(t0)(1 − coeff·|h|^exponent + o(|h|^exponent)).
    ///
    /// Errors when the profile variant does not match the case, when the
    /// coefficient would be nonpositive (the point is not a proper variance
    /// maximizer: cusp-peak centers need t* > 1, monotone profiles need
    /// H(T2)/T2 + H'(T2)·ln T2 > 0), or when t0 = 0 (no scale to expand).
    pub fn local_expansion_at(&self, t0: f64, case: CaseTag) -> Result<LocalExpansion> {
        if !(t0 > 0.0) {
            return Err(Error::domain(format!(
                "local expansion needs t0 > 0, got {t0} (σ vanishes at 0)"
            )));
        }
        let h0 = self.spec.value(t0)?;
        let scale = t0.powf(h0);
        let corr_alpha = 2.0 * h0;
        let corr_a = 0.5 * t0.powf(-corr_alpha);
        let (coeff, exponent) = match (case, self.spec.variant()) {
            (CaseTag::Peak, HurstVariant::PeakPerturbation { t_star, c, gamma, .. }) => {
                if (t0 - t_star).abs() > 1e-9 * t_star.abs().max(1.0) {
                    return Err(Error::domain(format!(
                        "cusp-peak expansion is only valid at the peak t* = {t_star}, got t0 = {t0}"
                    )));
                }
                if t0 <= 1.0 {
                    return Err(Error::domain(format!(
                        "cusp-peak expansion needs t* > 1 so that the decay \
                         coefficient c·ln t* is positive, got t* = {t0}"
                    )));
                }
                (c * t0.ln(), *gamma)
            }
            (CaseTag::LogHurst, HurstVariant::LogReciprocal) => {
                let l = t0.ln();
                (2.0 / (corr_alpha * corr_alpha * t0 * l * l), 1.0)
            }
            (CaseTag::PowerHurst, HurstVariant::PowerLaw { c, gamma }) => {
                let b = c * t0.powf(gamma - 1.0) * (1.0 + gamma * t0.ln()).abs();
                if !(b > 0.0) {
                    return Err(Error::domain(format!(
                        "power-law expansion coefficient vanishes at t0 = {t0} \
                         (stationary point of σ)"
                    )));
                }
                (b, 1.0)
            }
            (CaseTag::MonotoneHurst, _) => {
                let b = h0 / t0 + self.spec.derivative(t0)? * t0.ln();
                if !(b > 0.0) {
                    return Err(Error::domain(format!(
                        "monotone-profile expansion needs H(T2)/T2 + H'(T2)·ln T2 > 0, got {b}"
                    )));
                }
                (b, 1.0)
            }
            (case, variant) => {
                return Err(Error::domain(format!(
                    "case {case} does not apply to the {} Hurst profile",
                    variant_name(variant)
                )));
            }
        };
        Ok(LocalExpansion {
            center: t0,
            scale,
            coeff,
            exponent,
            corr_a,
            corr_alpha,
        })
    }
}

pub(crate) fn variant_name(v: &HurstVariant) -> &'static str {
    match v {
        HurstVariant::Constant { .. } => "constant",
        HurstVariant::PowerLaw { .. } => "power_law",
        HurstVariant::LogReciprocal => "log_reciprocal",
        HurstVariant::PeakPerturbation { .. } => "peak_perturbation",
        HurstVariant::Tabulated { .. } => "tabulated",
    }
}

//! Exact tail asymptotics for P(sup_{[T1,T2]} B_H(t) > u) as u → ∞.
//!
//! Each analysis case reduces the supremum tail to Ψ(μ) times a prefactor
//! built from the local behaviour of the standard deviation σ(t) = t^{H(t)}
//! near its maximizer: μ = u/σ(cp), the correlation parameters
//! a = ½cp^{−2H(cp)} and α = 2H(cp), and the decay coefficient b of
//! σ(cp + h) ≈ σ(cp)(1 − b|h|^γ). The shape of the prefactor switches on
//! how the decay exponent compares with α: slower decay leaves a growing
//! t-window that contributes a Pickands constant and a power of μ
//! ("pickands" regime), matched rates contribute a finite Piterbarg-type
//! constant ("piterbarg"), and faster decay pins the supremum at the
//! maximizer ("trivial", prefactor 1).

use crate::constants::{ConstantEstimate, ConstantKind};
use crate::covariance::{CaseTag, CovarianceModel};
use crate::error::{Error, Result};
use crate::hurst::{HurstSpec, HurstVariant};
use crate::special::{ln_gamma, log_normal_tail};
use serde::Serialize;
use std::f64::consts::E;

/// Relative tolerance for treating σ(T1) and σ(T2) as tied (exact ties are
/// measure-zero in floating point; the two-endpoint case needs a deliberate
/// trigger).
pub const TIE_TOL: f64 = 1e-9;

/// Grid resolution for the numeric checks that σ attains its maximum where
/// the tagged case assumes it does.
const SIGMA_SCAN_POINTS: usize = 2001;

/// Below this μ the asymptotic regime is barely entered and comparisons
/// against simulation are noise-dominated; evaluation warns.
const MU_WARN_THRESHOLD: f64 = 3.0;

fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0)
}

/// Which prefactor shape the asymptotic takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Pickands,
    Piterbarg,
    Trivial,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Pickands => "pickands",
            Regime::Piterbarg => "piterbarg",
            Regime::Trivial => "trivial",
        }
    }
}

/// Where the σ-maximizer sits relative to the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Interior,
    Endpoint,
    TwoEndpoints,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Interior => "interior",
            Boundary::Endpoint => "endpoint",
            Boundary::TwoEndpoints => "two_endpoints",
        }
    }
}

/// A validated (Hurst profile, interval, analysis case) triple. Construction
/// checks the structural hypotheses of the tagged case so that downstream
/// classification cannot silently produce nonsense.
#[derive(Debug, Clone)]
pub struct Scenario {
    model: CovarianceModel,
    case: CaseTag,
}

impl Scenario {
    pub fn new(spec: HurstSpec, case: CaseTag) -> Result<Self> {
        let model = CovarianceModel::new(spec);
        let scenario = Scenario { model, case };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn spec(&self) -> &HurstSpec {
        self.model.spec()
    }

    pub fn case(&self) -> CaseTag {
        self.case
    }

    pub fn interval(&self) -> (f64, f64) {
        self.spec().domain()
    }

    /// σ evaluated on a uniform scan grid over the interval.
    fn sigma_scan(&self) -> Result<Vec<(f64, f64)>> {
        let (t1, t2) = self.interval();
        let mut out = Vec::with_capacity(SIGMA_SCAN_POINTS);
        for i in 0..SIGMA_SCAN_POINTS {
            let t = if i + 1 == SIGMA_SCAN_POINTS {
                t2
            } else {
                t1 + (t2 - t1) * i as f64 / (SIGMA_SCAN_POINTS - 1) as f64
            };
            out.push((t, self.model.sigma(t)?));
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        let (t1, t2) = self.interval();
        match self.case {
            CaseTag::Peak => {
                let &HurstVariant::PeakPerturbation { t_star, .. } = self.spec().variant()
                else {
                    return Err(self.mismatch());
                };
                let tol = 1e-9 * t2.abs().max(1.0);
                if t_star < t1 - tol || t_star > t2 + tol {
                    return Err(Error::domain(format!(
                        "case {} needs the perturbation center inside the \
                         interval: t* = {t_star} vs [{t1}, {t2}]",
                        self.case
                    )));
                }
                // Validates t* > 1 and produces the decay coefficient.
                let exp = self.model.local_expansion_at(t_star, CaseTag::Peak)?;
                let sigma_star = exp.scale;
                let span = t2 - t1;
                for (t, s) in self.sigma_scan()? {
                    if s > sigma_star * (1.0 + 1e-12) {
                        return Err(Error::domain(format!(
                            "σ is not maximized at the perturbation center: \
                             σ({t}) = {s} exceeds σ(t*) = {sigma_star}"
                        )));
                    }
                    if (t - t_star).abs() > span / 100.0 && s >= sigma_star * (1.0 - 1e-12) {
                        return Err(Error::domain(format!(
                            "σ-maximizer is not unique: σ({t}) = {s} matches \
                             σ(t*) = {sigma_star} far from the center"
                        )));
                    }
                }
            }
            CaseTag::LogHurst => {
                if !matches!(self.spec().variant(), HurstVariant::LogReciprocal) {
                    return Err(self.mismatch());
                }
                // The reciprocal-log profile itself enforces T1 > e; σ is
                // identically e on the interval, so no maximizer check.
            }
            CaseTag::PowerHurst => {
                if !matches!(self.spec().variant(), HurstVariant::PowerLaw { .. }) {
                    return Err(self.mismatch());
                }
                let s1 = self.model.sigma(t1)?;
                let s2 = self.model.sigma(t2)?;
                let cap = s1.max(s2);
                for (t, s) in self.sigma_scan()? {
                    if s > cap * (1.0 + 1e-9) {
                        return Err(Error::domain(format!(
                            "σ is not maximized at an interval endpoint: \
                             σ({t}) = {s} exceeds both σ({t1}) = {s1} and \
                             σ({t2}) = {s2}"
                        )));
                    }
                }
                let t_tilde = if s1 > s2 && !rel_close(s1, s2, TIE_TOL) { t1 } else { t2 };
                self.model.local_expansion_at(t_tilde, CaseTag::PowerHurst)?;
            }
            CaseTag::MonotoneHurst => {
                let h1 = self.spec().value(t1)?;
                let mut prev = h1;
                let mut increasing = true;
                let mut decreasing = true;
                for i in 1..SIGMA_SCAN_POINTS {
                    let t = if i + 1 == SIGMA_SCAN_POINTS {
                        t2
                    } else {
                        t1 + (t2 - t1) * i as f64 / (SIGMA_SCAN_POINTS - 1) as f64
                    };
                    let h = self.spec().value(t)?;
                    if h < prev - 1e-12 {
                        increasing = false;
                    }
                    if h > prev + 1e-12 {
                        decreasing = false;
                    }
                    prev = h;
                }
                if !increasing && !decreasing {
                    return Err(Error::domain(format!(
                        "case {} needs a monotone Hurst profile, but H is \
                         not monotone on [{t1}, {t2}]",
                        self.case
                    )));
                }
                // A constant profile satisfies either branch; pick whichever
                // the interval position admits.
                let ok_decreasing = decreasing && t2 <= 1.0;
                let ok_increasing = increasing && t2 >= 1.0 && t1 >= 1.0;
                if !ok_decreasing && !ok_increasing {
                    if decreasing && !increasing {
                        return Err(Error::domain(format!(
                            "case {}: a decreasing Hurst profile needs \
                             T2 ≤ 1, got T2 = {t2}",
                            self.case
                        )));
                    }
                    return Err(Error::domain(format!(
                        "case {}: an increasing Hurst profile needs the \
                         interval inside [1, ∞), got [{t1}, {t2}]",
                        self.case
                    )));
                }
                let s2 = self.model.sigma(t2)?;
                for (t, s) in self.sigma_scan()? {
                    if s > s2 * (1.0 + 1e-9) {
                        return Err(Error::domain(format!(
                            "σ is not maximized at the right endpoint: \
                             σ({t}) = {s} exceeds σ({t2}) = {s2}"
                        )));
                    }
                }
                self.model.local_expansion_at(t2, CaseTag::MonotoneHurst)?;
            }
        }
        Ok(())
    }

    fn mismatch(&self) -> Error {
        Error::config(format!(
            "case {} does not apply to the {} Hurst profile",
            self.case,
            crate::covariance::variant_name(self.spec().variant())
        ))
    }
}

/// Full description of one asymptotic evaluation. `classify` fills every
/// field except `prefactor`, `log_value` and `value` (left NaN in the
/// skeleton); `evaluate` completes them.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticResult {
    pub u: f64,
    /// Normalized level μ = u / σ(critical_point).
    pub mu: f64,
    /// Local correlation scale a = ½·cp^{−2H(cp)}.
    pub a: f64,
    /// σ-decay coefficient of the case expansion.
    pub b: f64,
    /// α = 2H(critical_point).
    pub alpha: f64,
    pub regime: Regime,
    /// Endpoint multiplicity: 2 when σ ties at both endpoints, else 1.
    #[serde(rename = "Q")]
    pub q: u8,
    pub critical_point: f64,
    pub boundary: Boundary,
    pub prefactor: f64,
    pub log_value: f64,
    pub value: f64,
    /// Diagnostic alternative for the tied-endpoints case: the sum of the
    /// two single-endpoint evaluations, when computable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_sum: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// A fixed (externally supplied) constant value for the lookup table.
#[derive(Debug, Clone, Serialize)]
pub struct FixedConstant {
    pub kind: ConstantKind,
    pub alpha: f64,
    pub a: Option<f64>,
    pub value: f64,
}

/// Supplies the limiting constants that the prefactors need, from Monte
/// Carlo estimates and/or fixed overrides. Lookup is exact-match on
/// (kind, α, a) within 1e-9 relative; it never interpolates or
/// extrapolates across α.
#[derive(Debug, Clone, Default)]
pub struct ConstantsProvider {
    estimates: Vec<ConstantEstimate>,
    fixed: Vec<FixedConstant>,
}

impl ConstantsProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_estimate(&mut self, estimate: ConstantEstimate) {
        self.estimates.push(estimate);
    }

    /// Register a fixed value; fixed entries take precedence over estimates.
    pub fn push_fixed(&mut self, kind: ConstantKind, alpha: f64, a: Option<f64>, value: f64) -> Result<()> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::config(format!(
                "fixed constant for {} must be positive and finite, got {value}",
                kind.wire_name()
            )));
        }
        self.fixed.push(FixedConstant { kind, alpha, a, value });
        Ok(())
    }

    fn param_match(want: Option<f64>, have: Option<f64>) -> bool {
        match (want, have) {
            (None, None) => true,
            (Some(x), Some(y)) => rel_close(x, y, 1e-9),
            _ => false,
        }
    }

    pub fn lookup(&self, kind: ConstantKind, alpha: f64, a: Option<f64>) -> Result<f64> {
        for f in &self.fixed {
            if f.kind == kind && rel_close(f.alpha, alpha, 1e-9) && Self::param_match(a, f.a) {
                return Ok(f.value);
            }
        }
        for e in &self.estimates {
            if e.kind == kind && rel_close(e.alpha, alpha, 1e-9) && Self::param_match(a, e.a) {
                return Ok(e.value);
            }
        }
        let mut available: Vec<String> = self
            .fixed
            .iter()
            .map(|f| format!("{}(alpha={}, a={:?})", f.kind.wire_name(), f.alpha, f.a))
            .chain(
                self.estimates
                    .iter()
                    .map(|e| format!("{}(alpha={}, a={:?})", e.kind.wire_name(), e.alpha, e.a)),
            )
            .collect();
        available.truncate(12);
        Err(Error::config(format!(
            "no stored constant matching {}(alpha={alpha}, a={a:?}); available: [{}]",
            kind.wire_name(),
            available.join(", ")
        )))
    }
}

/// Derive every asymptotic parameter for the scenario at level u, without
/// evaluating the prefactor (no constants needed). The returned skeleton has
/// NaN in `prefactor`, `log_value` and `value`.
pub fn classify(scenario: &Scenario, u: f64) -> Result<AsymptoticResult> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::domain(format!("level u must be positive and finite, got {u}")));
    }
    let model = scenario.model();
    let (t1, t2) = scenario.interval();
    let (expansion, boundary, q) = match scenario.case() {
        CaseTag::Peak => {
            let &HurstVariant::PeakPerturbation { t_star, .. } = scenario.spec().variant()
            else {
                unreachable!("validated at construction");
            };
            let exp = model.local_expansion_at(t_star, CaseTag::Peak)?;
            let at_edge = rel_close(t_star, t1, 1e-9) || rel_close(t_star, t2, 1e-9);
            let boundary = if at_edge { Boundary::Endpoint } else { Boundary::Interior };
            (exp, boundary, 1u8)
        }
        CaseTag::LogHurst => {
            let exp = model.local_expansion_at(t2, CaseTag::LogHurst)?;
            (exp, Boundary::Endpoint, 1u8)
        }
        CaseTag::PowerHurst => {
            let s1 = model.sigma(t1)?;
            let s2 = model.sigma(t2)?;
            let tie = rel_close(s1, s2, TIE_TOL);
            let t_tilde = if s1 > s2 && !tie { t1 } else { t2 };
            let exp = model.local_expansion_at(t_tilde, CaseTag::PowerHurst)?;
            let boundary = if tie { Boundary::TwoEndpoints } else { Boundary::Endpoint };
            (exp, boundary, if tie { 2u8 } else { 1u8 })
        }
        CaseTag::MonotoneHurst => {
            let exp = model.local_expansion_at(t2, CaseTag::MonotoneHurst)?;
            (exp, Boundary::Endpoint, 1u8)
        }
    };
    let alpha = expansion.corr_alpha;
    // The decay exponent γ is the cusp exponent for the peak case and 1 for
    // the endpoint cases; the regime is decided by α vs γ exactly.
    let gamma = expansion.exponent;
    let regime = if alpha < gamma {
        Regime::Pickands
    } else if alpha == gamma {
        Regime::Piterbarg
    } else {
        Regime::Trivial
    };
    Ok(AsymptoticResult {
        u,
        mu: u / expansion.scale,
        a: expansion.corr_a,
        b: expansion.coeff,
        alpha,
        regime,
        q,
        critical_point: expansion.center,
        boundary,
        prefactor: f64::NAN,
        log_value: f64::NAN,
        value: f64::NAN,
        endpoint_sum: None,
        warnings: Vec::new(),
    })
}

/// Complete the classification into a numeric tail value:
/// value = prefactor · Ψ(μ), computed in the log domain so that `log_value`
/// stays finite far beyond where `value` underflows.
pub fn evaluate(
    scenario: &Scenario,
    u: f64,
    constants: &ConstantsProvider,
) -> Result<AsymptoticResult> {
    let mut r = classify(scenario, u)?;
    if !(r.mu > 1.0) {
        return Err(Error::domain(format!(
            "asymptotic evaluation needs μ > 1, got μ = {} (u = {u}, σ(cp) = {})",
            r.mu,
            u / r.mu
        )));
    }
    if scenario.case() == CaseTag::LogHurst && r.mu <= E {
        return Err(Error::domain(format!(
            "the reciprocal-log case needs μ > e so that ln μ > 1, got μ = {}",
            r.mu
        )));
    }
    if r.mu < MU_WARN_THRESHOLD {
        r.warnings.push(format!(
            "μ = {:.4} < {MU_WARN_THRESHOLD}: asymptotic regime barely entered; \
             comparisons against simulation are noise-dominated",
            r.mu
        ));
    }
    let (alpha, a, b, mu) = (r.alpha, r.a, r.b, r.mu);
    let qf = f64::from(r.q);
    // (prefactor, ln prefactor): the regimes with a bare constant compute the
    // prefactor in linear domain so that "exactly 1" and "exactly Q·P" hold
    // bit-for-bit; the power-of-μ regimes live in log domain.
    let (prefactor, ln_prefactor) = match scenario.case() {
        CaseTag::Peak => {
            let gamma = match scenario.spec().variant() {
                HurstVariant::PeakPerturbation { gamma, .. } => *gamma,
                _ => unreachable!("validated at construction"),
            };
            match r.regime {
                Regime::Pickands => {
                    let h_alpha = constants.lookup(ConstantKind::Pickands, alpha, None)?;
                    let doubling: f64 = if r.boundary == Boundary::Interior { 2.0 } else { 1.0 };
                    let ln = doubling.ln()
                        + h_alpha.ln()
                        + a.ln() / alpha
                        - b.ln() / gamma
                        + ln_gamma(1.0 / gamma + 1.0)?
                        + (2.0 / alpha - 2.0 / gamma) * mu.ln();
                    (ln.exp(), ln)
                }
                Regime::Piterbarg => {
                    let kind = if r.boundary == Boundary::Interior {
                        ConstantKind::PiterbargTwoSided
                    } else {
                        ConstantKind::PiterbargOneSided
                    };
                    let p = constants.lookup(kind, alpha, Some(b / a))?;
                    (p, p.ln())
                }
                Regime::Trivial => (1.0, 0.0),
            }
        }
        CaseTag::LogHurst => {
            let h_alpha = constants.lookup(ConstantKind::Pickands, alpha, None)?;
            let ln = h_alpha.ln() + a.ln() / alpha - b.ln() + (2.0 / alpha) * mu.ln()
                - mu.ln().ln();
            (ln.exp(), ln)
        }
        CaseTag::PowerHurst | CaseTag::MonotoneHurst => match r.regime {
            Regime::Pickands => {
                let h_alpha = constants.lookup(ConstantKind::Pickands, alpha, None)?;
                let ln = qf.ln() + h_alpha.ln() + a.ln() / alpha - b.ln()
                    + (2.0 / alpha - 2.0) * mu.ln();
                (ln.exp(), ln)
            }
            Regime::Piterbarg => {
                let p = qf
                    * constants
                        .lookup(ConstantKind::PiterbargOneSided, alpha, Some(b / a))?;
                (p, p.ln())
            }
            Regime::Trivial => (qf, qf.ln()),
        },
    };
    r.prefactor = prefactor;
    r.log_value = ln_prefactor + log_normal_tail(mu);
    r.value = r.log_value.exp();
    // Tied endpoints are displayed as Q times the right-endpoint term; the
    // proof-level alternative sums per-endpoint contributions with each
    // endpoint's own parameters. Report both so discrepancies are visible.
    if r.q == 2 && scenario.case() == CaseTag::PowerHurst {
        match two_endpoint_sum(scenario, u, constants) {
            Ok(sum) => {
                r.endpoint_sum = Some(sum);
                if !rel_close(sum, r.value, 0.05) {
                    r.warnings.push(format!(
                        "tied-endpoint display value {:.6e} differs from the \
                         per-endpoint sum {sum:.6e}",
                        r.value
                    ));
                }
            }
            Err(e) => r.warnings.push(format!("per-endpoint diagnostic unavailable: {e}")),
        }
    }
    Ok(r)
}

/// Sum of single-endpoint asymptotics with per-endpoint (μ, a, b, α), for
/// the tied-endpoints diagnostic.
fn two_endpoint_sum(scenario: &Scenario, u: f64, constants: &ConstantsProvider) -> Result<f64> {
    let model = scenario.model();
    let (t1, t2) = scenario.interval();
    let mut total = 0.0;
    for t in [t1, t2] {
        let exp = model.local_expansion_at(t, CaseTag::PowerHurst)?;
        let (alpha, a, b) = (exp.corr_alpha, exp.corr_a, exp.coeff);
        let mu = u / exp.scale;
        let ln_term = if alpha < 1.0 {
            let h_alpha = constants.lookup(ConstantKind::Pickands, alpha, None)?;
            h_alpha.ln() + a.ln() / alpha - b.ln() + (2.0 / alpha - 2.0) * mu.ln()
        } else if alpha == 1.0 {
            constants
                .lookup(ConstantKind::PiterbargOneSided, alpha, Some(b / a))?
                .ln()
        } else {
            0.0
        };
        total += (ln_term + log_normal_tail(mu)).exp();
    }
    Ok(total)
}

/// Elementwise `evaluate` over a level sweep.
pub fn asymptotic_curve(
    scenario: &Scenario,
    u_list: &[f64],
    constants: &ConstantsProvider,
) -> Result<Vec<AsymptoticResult>> {
    if u_list.is_empty() {
        return Err(Error::domain("need at least one level u"));
    }
    u_list.iter().map(|&u| evaluate(scenario, u, constants)).collect()
}

//! End-to-end checks of the tail-asymptotics evaluator against independent
//! re-evaluations of the closed-form expressions, plus exactness properties
//! of the regime classification.

use mbm_core::asymptotics::{classify, evaluate, ConstantsProvider, Regime, Scenario};
use mbm_core::constants::ConstantKind;
use mbm_core::covariance::CaseTag;
use mbm_core::hurst::{HurstSpec, HurstVariant};
use mbm_core::special::{gamma, log_normal_tail, normal_tail};
use proptest::prelude::*;
use std::f64::consts::E;

fn assert_rel(actual: f64, expected: f64, tol: f64, label: &str) {
    let rel = (actual - expected).abs() / expected.abs().max(1e-300);
    assert!(
        rel <= tol,
        "{label}: got {actual:.17e}, want {expected:.17e} (rel err {rel:.3e} > {tol:.1e})"
    );
}

fn peak_scenario(t_star: f64, h_star: f64, c: f64, gamma: f64, half_width: f64) -> Scenario {
    let spec = HurstSpec::new(
        HurstVariant::PeakPerturbation { t_star, h_star, c, gamma },
        t_star - half_width,
        t_star + half_width,
    )
    .unwrap();
    Scenario::new(spec, CaseTag::Peak).unwrap()
}

#[test]
fn cusp_trivial_regime_is_plain_normal_tail() {
    // H(t*) = 0.8 so the local index α = 1.6 exceeds the cusp exponent
    // γ = 0.5: the exceedance probability is Ψ(u/σ(t*)) with no prefactor.
    let scenario = peak_scenario(E, 0.8, 0.2, 0.5, 0.2);
    let provider = ConstantsProvider::new();
    let res = evaluate(&scenario, 5.0, &provider).unwrap();
    assert_eq!(res.regime, Regime::Trivial);
    assert_eq!(res.prefactor, 1.0, "trivial prefactor must be exactly 1");
    let mu = 5.0 * (-0.8f64).exp(); // u·t*^{−H(t*)} with t* = e
    assert_rel(res.mu, mu, 1e-14, "mu");
    assert_rel(res.value, normal_tail(mu), 1e-13, "value = Ψ(μ)");
}

#[test]
fn cusp_pickands_regime_matches_formula_reevaluation() {
    // α = 0.4 < γ = 0.5, interior peak: the prefactor is
    // 2·H_α·a^{1/α}·b^{−1/γ}·Γ(1/γ+1)·μ^{2/α−2/γ}.
    let (t_star, h_star, c, gamma_exp) = (E, 0.2, 0.2, 0.5);
    let scenario = peak_scenario(t_star, h_star, c, gamma_exp, 0.2);
    let h_const = 0.9; // arbitrary positive stand-in for the limiting constant
    let mut provider = ConstantsProvider::new();
    provider
        .push_fixed(ConstantKind::Pickands, 2.0 * h_star, None, h_const)
        .unwrap();

    let u = 10.0;
    let res = evaluate(&scenario, u, &provider).unwrap();
    assert_eq!(res.regime, Regime::Pickands);

    // Independent re-evaluation from the raw ingredients.
    let sigma = t_star.powf(h_star);
    let mu = u / sigma;
    let alpha = 2.0 * h_star;
    let a = 0.5 * t_star.powf(-alpha);
    let b = c * t_star.ln();
    let prefactor = 2.0
        * h_const
        * a.powf(1.0 / alpha)
        * b.powf(-1.0 / gamma_exp)
        * gamma(1.0 / gamma_exp + 1.0).unwrap()
        * mu.powf(2.0 / alpha - 2.0 / gamma_exp);

    assert_rel(res.mu, mu, 1e-14, "mu");
    assert_rel(res.a, a, 1e-14, "a");
    assert_rel(res.b, b, 1e-14, "b");
    assert_rel(res.alpha, alpha, 1e-14, "alpha");
    assert_rel(res.prefactor, prefactor, 1e-12, "prefactor");
    assert_rel(
        res.log_value,
        prefactor.ln() + log_normal_tail(mu),
        1e-12,
        "log_value",
    );
    assert_rel(res.value, prefactor * normal_tail(mu), 1e-12, "value");
}

#[test]
fn regime_switches_exactly_at_alpha_equal_gamma() {
    // Sweep the cusp height: α = 2h* crosses γ = 0.5 exactly at h* = 0.25.
    let cases = [
        (0.2, Regime::Pickands),
        (0.25, Regime::Piterbarg),
        (0.3, Regime::Trivial),
    ];
    for (h_star, want) in cases {
        let scenario = peak_scenario(E, h_star, 0.1, 0.5, 0.2);
        let res = classify(&scenario, 12.0).unwrap();
        assert_eq!(res.regime, want, "h* = {h_star}");
    }

    // Same boundary approached from the γ side; evaluate must be finite on
    // both flanks given the constants each regime needs.
    let alpha = 0.5;
    let (t_star, c) = (E, 0.1);
    let a = 0.5 * t_star.powf(-alpha);
    let b = c * t_star.ln();
    for (g, want) in [
        (0.499, Regime::Trivial),
        (0.5, Regime::Piterbarg),
        (0.501, Regime::Pickands),
    ] {
        let scenario = peak_scenario(t_star, 0.25, c, g, 0.2);
        let mut provider = ConstantsProvider::new();
        provider
            .push_fixed(ConstantKind::Pickands, alpha, None, 1.2)
            .unwrap();
        provider
            .push_fixed(ConstantKind::PiterbargTwoSided, alpha, Some(b / a), 1.7)
            .unwrap();
        let res = evaluate(&scenario, 12.0, &provider).unwrap();
        assert_eq!(res.regime, want, "gamma = {g}");
        assert!(res.value.is_finite() && res.value > 0.0);
        assert!(res.log_value.is_finite());
    }
}

#[test]
fn log_profile_value_matches_formula_reevaluation() {
    // H(t) = 1/ln t on [4, 9]: σ ≡ e, the level enters as μ = u/e, and the
    // decay coefficient collapses to b = 1/(2T₂).
    let spec = HurstSpec::new(HurstVariant::LogReciprocal, 4.0, 9.0).unwrap();
    let scenario = Scenario::new(spec, CaseTag::LogHurst).unwrap();
    let t2: f64 = 9.0;
    let alpha = 2.0 / t2.ln();
    let h_const = 0.85;
    let mut provider = ConstantsProvider::new();
    provider
        .push_fixed(ConstantKind::Pickands, alpha, None, h_const)
        .unwrap();

    let u = 30.0;
    let res = evaluate(&scenario, u, &provider).unwrap();
    let mu = u / E;
    let a = 0.5 * t2.powf(-alpha);
    let b = 1.0 / (2.0 * t2);
    let prefactor = h_const * a.powf(1.0 / alpha) / b * mu.powf(2.0 / alpha) / mu.ln();

    assert_rel(res.mu, mu, 1e-14, "mu");
    assert_rel(res.a, a, 1e-12, "a");
    assert_rel(res.b, b, 1e-12, "b");
    assert_rel(res.prefactor, prefactor, 1e-11, "prefactor");
    assert_rel(res.value, prefactor * normal_tail(mu), 1e-11, "value");
}

#[test]
fn endpoint_peak_drops_the_doubling() {
    // The same cusp placed at the right endpoint keeps every parameter but
    // halves the pickands-regime prefactor (one-sided excursion only).
    let interior = peak_scenario(E, 0.2, 0.2, 0.5, 0.2);
    let spec = HurstSpec::new(
        HurstVariant::PeakPerturbation { t_star: E, h_star: 0.2, c: 0.2, gamma: 0.5 },
        E - 0.4,
        E,
    )
    .unwrap();
    let endpoint = Scenario::new(spec, CaseTag::Peak).unwrap();
    let mut provider = ConstantsProvider::new();
    provider
        .push_fixed(ConstantKind::Pickands, 0.4, None, 0.9)
        .unwrap();
    let ri = evaluate(&interior, 10.0, &provider).unwrap();
    let re = evaluate(&endpoint, 10.0, &provider).unwrap();
    let ratio = ri.prefactor / re.prefactor;
    assert!(
        (ratio - 2.0).abs() < 1e-13,
        "interior/endpoint prefactor ratio = {ratio}, want exactly 2"
    );
}

proptest! {
    // Classification invariants on randomly drawn valid cusp scenarios:
    // μ·σ(t*) = u, α = 2H(t*), a = ½t*^{−2H(t*)}, and the regime follows
    // the exact sign of α − γ.
    #[test]
    fn classification_parameters_consistent(
        t_star in 1.5f64..4.0,
        h_star in 0.15f64..0.85,
        g in 0.3f64..0.9,
        c in 0.05f64..0.3,
        mu_target in 5.0f64..10.0,
    ) {
        // Keep the profile inside the admissible H-range and the cusp term
        // dominant over the t^H drift so σ peaks at t*.
        let dominance = (c * g * t_star.ln() * t_star / h_star)
            .powf(1.0 / (1.0 - g).max(0.05));
        let range_cap = ((h_star - 0.06) / c).powf(1.0 / g);
        let w = 0.2f64.min(0.5 * dominance).min(range_cap);
        prop_assume!(w > 0.02);
        let spec = HurstSpec::new(
            HurstVariant::PeakPerturbation { t_star, h_star, c, gamma: g },
            t_star - w,
            t_star + w,
        );
        prop_assume!(spec.is_ok());
        let scenario = Scenario::new(spec.unwrap(), CaseTag::Peak);
        prop_assume!(scenario.is_ok());
        let scenario = scenario.unwrap();

        let sigma = t_star.powf(h_star);
        let u = mu_target * sigma;
        let res = classify(&scenario, u).unwrap();

        let alpha = 2.0 * h_star;
        prop_assert!((res.mu * sigma - u).abs() <= 1e-12 * u);
        prop_assert!((res.alpha - alpha).abs() <= 1e-12 * alpha);
        let a = 0.5 * t_star.powf(-alpha);
        prop_assert!((res.a - a).abs() <= 1e-12 * a);
        let want = if alpha < g {
            Regime::Pickands
        } else if alpha == g {
            Regime::Piterbarg
        } else {
            Regime::Trivial
        };
        prop_assert_eq!(res.regime, want);
    }
}

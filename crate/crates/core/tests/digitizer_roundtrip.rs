use cellmine_core::digitizer::{digitize, DigitizeError, DigitizerConfig};
use cellmine_core::fixtures::{ambiguous_suite, ce_suite, render_fixture, standard_suite, FixtureSpec};

/// Fraction of truth cycles traced within 1% of the y-axis range.
fn within_tolerance(spec: &FixtureSpec) -> Vec<(String, f64)> {
    let r = render_fixture(spec).unwrap();
    let out =
        digitize(&r.image, &r.annotation, &DigitizerConfig::default()).unwrap_or_else(|e| panic!("{}: {e}", spec.name));
    let tol = 0.01 * (spec.y_range[1] - spec.y_range[0]);
    r.capacity_truth()
        .map(|truth| {
            let Some(got) = out.iter().find(|s| s.label == truth.label) else {
                return (truth.label.clone(), 0.0);
            };
            let ok =
                truth.points.iter().filter(|(c, v)| got.value_at(*c).is_some_and(|g| (g - v).abs() <= tol)).count();
            (truth.label.clone(), ok as f64 / truth.points.len() as f64)
        })
        .collect()
}

#[test]
fn standard_suite_round_trips_within_one_percent() {
    let mut failures = Vec::new();
    for spec in standard_suite(50, 42) {
        for (label, frac) in within_tolerance(&spec) {
            if frac < 0.95 {
                failures.push(format!("{} / {label}: {:.1}%", spec.name, 100.0 * frac));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn ce_overlay_is_removed() {
    for spec in ce_suite(10, 42) {
        let r = render_fixture(&spec).unwrap();
        let out = digitize(&r.image, &r.annotation, &DigitizerConfig::default()).unwrap();
        assert_eq!(out.len(), spec.series.len(), "{}", spec.name);
        for (label, frac) in within_tolerance(&spec) {
            assert!(frac >= 0.95, "{} / {label}: {frac}", spec.name);
        }
    }
}

#[test]
fn same_color_curves_are_unextractable() {
    for spec in ambiguous_suite(6, 42) {
        let r = render_fixture(&spec).unwrap();
        let err = digitize(&r.image, &r.annotation, &DigitizerConfig::default()).unwrap_err();
        assert!(matches!(err.cause, DigitizeError::ColorAmbiguity(_)), "{}: {err}", spec.name);
    }
}

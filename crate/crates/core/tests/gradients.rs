#[path = "support/gradcheck.rs"]
mod gradcheck;
#[path = "support/gradcases.rs"]
mod gradcases;

use gradcheck::Report;

fn assert_all(cases: Vec<(&'static str, Report)>) {
    let failed: Vec<String> = cases
        .iter()
        .filter(|(_, r)| !r.passed())
        .map(|(n, r)| format!("{n}: {:.3e} at {}", r.worst, r.worst_at))
        .collect();
    assert!(failed.is_empty(), "{failed:#?}");
}

#[test]
fn primitives_match_finite_differences() {
    assert_all(gradcases::primitive_reports());
}

#[test]
fn generator_matches_finite_differences() {
    assert_all(gradcases::generator_reports());
}

#[test]
fn discriminator_matches_finite_differences() {
    assert_all(gradcases::discriminator_reports());
}

#[test]
fn losses_match_finite_differences() {
    assert_all(gradcases::loss_reports());
}

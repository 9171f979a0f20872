use contention::calibration::{calibrate_rule, DEFAULT_RULE_SAMPLES, DEFAULT_RULE_SEED};
use contention::CalibratedRule;

#[test]
fn shipped_rule_is_reproducible() {
    let report = calibrate_rule(DEFAULT_RULE_SAMPLES, DEFAULT_RULE_SEED).unwrap();
    assert_eq!(
        report.rule.to_text(),
        CalibratedRule::default_rule().to_text()
    );
    assert_eq!(
        report.rule.to_text(),
        include_str!("../data/default_rule.txt")
    );
}

#[test]
fn too_few_samples_rejected() {
    assert!(calibrate_rule(10, 1).is_err());
}

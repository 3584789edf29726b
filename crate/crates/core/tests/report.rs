use nvpd::inference::{fit_flip_curve, fit_saturation, FitReport, FlipObservation};
use nvpd::kinetics::{flip_probability, TwoStateRates};
use nvpd::ChargeState;

#[test]
fn saturation_report_round_trips_through_json() {
    let i: Vec<f64> = (1..=10).map(|k| 30.0 * k as f64).collect();
    let f: Vec<f64> = i.iter().map(|x| 40.0 * x / (x + 120.0) * (1.0 + 0.01 * (x * 0.37).sin())).collect();
    let report = FitReport::from(&fit_saturation(&i, &f).unwrap());
    let json = serde_json::to_string(&report).unwrap();
    let back: FitReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["model"], "saturation");
    assert_eq!(v["covariance"].as_array().unwrap().len(), 4);
    assert!(v["converged"].as_bool().unwrap());
}

#[test]
fn flip_report_carries_rates() {
    let truth = TwoStateRates::new(0.05, 0.02).unwrap();
    let obs: Vec<_> = (1..=8)
        .flat_map(|k| {
            let t = 10.0 * k as f64;
            [ChargeState::Negative, ChargeState::Neutral].map(|s| FlipObservation {
                duration: t,
                initial: s,
                probability: flip_probability(&truth, s, t).unwrap(),
                sigma: 0.01,
            })
        })
        .collect();
    let report = FitReport::from(&fit_flip_curve(&obs).unwrap());
    let v = serde_json::to_value(&report).unwrap();
    let n = report.parameters.len();
    assert_eq!(v["covariance"].as_array().unwrap().len(), n * n);
    assert!((report.derived["lambda_ion"] - 0.05).abs() < 1e-8);
    assert!((report.derived["lambda_rec"] - 0.02).abs() < 1e-8);
}

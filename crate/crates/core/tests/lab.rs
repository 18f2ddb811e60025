use index_lab::lab::{self, ChernRequest, LabError, Scenario, Verdict, PRESETS};

#[test]
fn normal_form_verifies() {
    let r = lab::run_verify(&Scenario::preset("normal-form").unwrap()).unwrap();
    assert_eq!((r.n, r.c, r.verdict), (1, 1, Verdict::Pass));
    assert!(r.gap_certificate.holds && r.window_in_gap);
    assert_eq!(r.bands.iter().map(|b| b.c()).collect::<Vec<_>>(), [1, -1]);
    assert!(r.bands.iter().all(|b| b.agreement));
    assert_eq!(r.band_sum, 0);
    // The stored fields determine the verdict.
    assert_eq!(recomputed_verdict(&r), r.verdict);
}

fn recomputed_verdict(r: &lab::VerificationReport) -> Verdict {
    lab::VerificationReport::derive_verdict(r.gap_certificate.holds, r.flow.n, r.sub_gap_bundle.as_ref().map_or(0, |b| b.c))
}

#[test]
fn corrupted_gap_band_fails() {
    let r = lab::run_verify(&Scenario::preset("normal-form-corrupted").unwrap()).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(!r.gap_certificate.holds);
    assert_eq!((r.n, r.c), (1, 0));
}

#[test]
fn reports_replay_apart_from_timings() {
    let s = Scenario::preset("normal-form").unwrap();
    let mut a = lab::run_verify(&s).unwrap();
    let mut b = lab::run_verify(&s).unwrap();
    a.timings = b.timings;
    assert_eq!(a.to_json(), b.to_json());
    b.timings.total_ms += 1.0;
    assert_ne!(a.to_json(), b.to_json());
}

#[test]
fn normal_form_spectrum_labels_the_closed_form_branches() {
    let export = lab::run_spectrum(&Scenario::preset("normal-form").unwrap()).unwrap();
    let at_zero: Vec<_> = export.rows.iter().filter(|r| r.mu == 0.0 && !r.branch.starts_with('#')).collect();
    for (label, omega) in [("normal_zero(0)", 0.0), ("normal_plus(1)", 2f64.sqrt()), ("normal_minus(1)", -(2f64.sqrt())), ("normal_plus(2)", 2.0)] {
        let row = at_zero.iter().find(|r| r.branch == label).unwrap_or_else(|| panic!("{label} missing"));
        assert!((row.omega - omega).abs() < 1e-10);
    }
    let table = export.closed_form.unwrap();
    assert!(table.iter().any(|r| r.mu == -2.0) && table.iter().any(|r| r.mu == 2.0));
}

#[test]
fn spectrum_requires_a_grid() {
    let s = Scenario::preset("ts2").unwrap();
    assert!(matches!(lab::run_spectrum(&s), Err(LabError::Scenario(_))));
}

#[test]
fn chern_export_for_ts2() {
    let mut s = Scenario::preset("ts2").unwrap().with_grid(24);
    let e = lab::run_chern(&s, ChernRequest::Curvature).unwrap();
    assert_eq!((e.c, e.agreement), (vec![2], None));
    s.bands = None;
    let e = lab::run_chern(&s, ChernRequest::All).unwrap();
    assert_eq!(e.c, [2, 0, -2]);
    assert_eq!(e.agreement, Some(true));
    assert_eq!(e.reports.len(), 9);
    s.bands = Some(vec![2, 3]);
    let e = lab::run_chern(&s, ChernRequest::Zeros).unwrap();
    assert_eq!((e.c, e.band_sum, e.reports.len()), (vec![0, -2], -2, 2));
}

#[test]
fn scenarios_reject_bad_values() {
    let mut s = Scenario::preset("normal-form").unwrap();
    s.grid = 4;
    assert!(s.validate().is_err());
    let mut s = Scenario::preset("normal-form").unwrap();
    s.mu.steps = 3;
    assert!(s.validate().is_err());
    let mut s = Scenario::preset("matsuno").unwrap();
    s.basis.epsilon = 0.5;
    assert!(s.validate().is_err());
    let mut s = Scenario::preset("normal-form").unwrap();
    s.model.gap_band = Some(3);
    assert!(s.validate().is_err());
    for bands in [vec![], vec![0], vec![3], vec![2, 1]] {
        let mut s = Scenario::preset("normal-form").unwrap();
        s.bands = Some(bands);
        assert!(s.validate().is_err());
    }
    assert!(Scenario::from_json("{").is_err());
}

#[test]
fn every_preset_serializes_with_a_schema() {
    for name in PRESETS {
        let v: serde_json::Value = serde_json::from_str(&Scenario::preset(name).unwrap().to_json()).unwrap();
        assert_eq!(v["schema"], lab::SCENARIO_SCHEMA);
        assert_eq!(v["name"], *name);
    }
}

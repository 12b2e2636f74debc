use std::ffi::{c_char, CString};
use std::ptr;

use flexcurve_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { fc_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn discrete(points: &[(f64, f64)]) -> *mut FcProspect {
    let (v, m): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let mut out = ptr::null_mut();
    let s = unsafe { fc_prospect_discrete(v.as_ptr(), m.as_ptr(), v.len(), &mut out) };
    assert_eq!(s, FcStatus::Ok);
    out
}

#[test]
fn construct_transform_and_value() {
    let coin = discrete(&[(0.0, 0.5), (100.0, 0.5)]);
    let mut ce = 0.0;
    unsafe {
        assert_eq!(fc_certain_equivalent(coin, 0.01, &mut ce), FcStatus::Ok);
        assert!((ce - 37.988_549_304_172_25).abs() < 1e-9);

        let mut shifted = ptr::null_mut();
        assert_eq!(fc_prospect_shift(coin, 5.0, &mut shifted), FcStatus::Ok);
        let mut ce2 = 0.0;
        fc_certain_equivalent(shifted, 0.01, &mut ce2);
        assert!((ce2 - ce - 5.0).abs() < 1e-9);

        let mut scaled = ptr::null_mut();
        assert_eq!(fc_prospect_scale(coin, 2.0, &mut scaled), FcStatus::Ok);
        let mut both = ptr::null_mut();
        assert_eq!(
            fc_prospect_add_independent(scaled, shifted, &mut both),
            FcStatus::Ok
        );
        let mut stats = FcStats::default();
        assert_eq!(fc_prospect_stats(both, &mut stats), FcStatus::Ok);
        assert!((stats.mean - 155.0).abs() < 1e-9);
        assert_eq!(stats.worst_case, 5.0);

        let mut l = 0.0;
        assert_eq!(fc_prospect_log_mgf(coin, 0.0, &mut l), FcStatus::Ok);
        assert_eq!(l, 0.0);

        let mut mv = 0.0;
        assert_eq!(fc_mean_variance(coin, 0.001, &mut mv), FcStatus::Ok);
        assert!((mv - 48.75).abs() < 1e-12);

        for p in [coin, shifted, scaled, both] {
            fc_prospect_free(p);
        }
        fc_prospect_free(ptr::null_mut());
    }
}

#[test]
fn curves_thresholds_and_comparisons() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(fc_prospect_gaussian(10.0, 4.0, &mut g), FcStatus::Ok);
        let ks = [1.0, 2.0, 4.0];
        let mut out = [0.0; 3];
        assert_eq!(
            fc_flexibility_curve(g, 0.5, ks.as_ptr(), 3, out.as_mut_ptr()),
            FcStatus::Ok
        );
        assert_eq!(out, [9.0, 8.0, 6.0]);

        let mut x1 = ptr::null_mut();
        let mut x2 = ptr::null_mut();
        fc_prospect_gaussian(-50.0, 400.0, &mut x1);
        fc_prospect_gaussian(-55.0, 100.0, &mut x2);
        let (mut k, mut found) = (0.0, false);
        assert_eq!(
            fc_find_threshold(x2, x1, 0.01, &mut k, &mut found),
            FcStatus::Ok
        );
        assert!(found);
        assert!((k - 10.0 / 3.0).abs() < 1e-6);
        assert_eq!(
            fc_find_threshold(x1, x2, 0.01, &mut k, &mut found),
            FcStatus::Ok
        );
        assert!(!found && k.is_nan());

        let mut v = std::mem::MaybeUninit::<FcVerdict>::uninit();
        let mut crossings = [0.0; 1];
        assert_eq!(
            fc_compare(x2, x1, 0.01, v.as_mut_ptr(), crossings.as_mut_ptr(), 1),
            FcStatus::Ok
        );
        let v = v.assume_init();
        assert_eq!(v.classification, FcClassification::XStrictlyMoreFlexible);
        assert_eq!(v.tail_relation, FcTailRelation::XAbove);
        assert_eq!(v.n_crossings, 1);
        assert!((crossings[0] - 10.0 / 3.0).abs() < 1e-6);

        for p in [g, x1, x2] {
            fc_prospect_free(p);
        }
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(fc_prospect_gaussian(0.0, -1.0, &mut out), FcStatus::Invalid);
        assert!(out.is_null());
        assert!(last_error().contains("variance"), "{}", last_error());

        let v = [0.0, 1.0];
        let m = [0.5, 0.4];
        assert_eq!(
            fc_prospect_discrete(v.as_ptr(), m.as_ptr(), 2, &mut out),
            FcStatus::Invalid
        );

        let coin = discrete(&[(0.0, 0.5), (100.0, 0.5)]);
        let mut ce = 0.0;
        assert_eq!(
            fc_certain_equivalent(coin, -1.0, &mut ce),
            FcStatus::Invalid
        );
        assert_eq!(
            fc_certain_equivalent(coin, 0.1, ptr::null_mut()),
            FcStatus::NullPointer
        );
        assert_eq!(
            fc_certain_equivalent(ptr::null(), 0.1, &mut ce),
            FcStatus::NullPointer
        );
        let ks = [1.0];
        let mut o = [0.0];
        assert_eq!(
            fc_flexibility_curve(coin, 0.0, ks.as_ptr(), 1, o.as_mut_ptr()),
            FcStatus::Domain
        );
        assert!(last_error().contains("r > 0"));

        let big = discrete(&[(-1e300, 0.5), (1e300, 0.5)]);
        assert_eq!(fc_certain_equivalent(big, 1e10, &mut ce), FcStatus::Range);

        let mut tiny = [0 as c_char; 4];
        let n = fc_last_error_message(tiny.as_mut_ptr(), tiny.len());
        assert!(n > 3);
        assert_eq!(tiny[3], 0);
        fc_prospect_free(coin);
        fc_prospect_free(big);
    }
}

#[test]
fn models_round_trip_through_handles() {
    let json = CString::new(
        r#"{"prospects":{"X":{"kind":"discrete","points":[[0,0.5],[100,0.5]]}},
            "tree":{"root":"d","nodes":{
              "d":{"kind":"decision","children":[["safe","t"],["risky","g"]]},
              "t":{"kind":"terminal","payoff":10},
              "g":{"kind":"chance","children":[[0.5,"a"],[0.5,"b"]]},
              "a":{"kind":"terminal","payoff":0},
              "b":{"kind":"terminal","payoff":100}}}}"#,
    )
    .unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(fc_model_parse(json.as_ptr(), &mut m), FcStatus::Ok);
        let mut ce = 0.0;
        assert_eq!(fc_model_rollback(m, 0.01, &mut ce), FcStatus::Ok);
        assert!((ce - 37.988_549_304_172_25).abs() < 1e-9);

        let id = CString::new("X").unwrap();
        let mut x = ptr::null_mut();
        assert_eq!(fc_model_prospect(m, id.as_ptr(), &mut x), FcStatus::Ok);
        let mut ce2 = 0.0;
        fc_certain_equivalent(x, 0.01, &mut ce2);
        assert_eq!(ce, ce2);

        let missing = CString::new("nope").unwrap();
        let mut y = ptr::null_mut();
        assert_eq!(
            fc_model_prospect(m, missing.as_ptr(), &mut y),
            FcStatus::NotFound
        );
        fc_prospect_free(x);
        fc_model_free(m);

        let bad = CString::new("{\"prospects\": 3}").unwrap();
        assert_eq!(fc_model_parse(bad.as_ptr(), &mut m), FcStatus::Parse);
        assert!(last_error().contains("prospects"));
        let empty = CString::new("{}").unwrap();
        assert_eq!(fc_model_parse(empty.as_ptr(), &mut m), FcStatus::Ok);
        assert_eq!(fc_model_rollback(m, 0.01, &mut ce), FcStatus::NotFound);
        fc_model_free(m);
    }
}

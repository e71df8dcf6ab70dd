use qpresp::demo;
use qpresp::kam::pipeline::solve;
use qpresp::kam::KamReport;
use qpresp::reductions::{SecondOrderRecord, SecondOrderSpec};
use qpresp::system::{CoeffRecord, EpsilonRecord, SystemRecord, SystemSpec};

#[test]
fn system_round_trip_is_lossless() {
    let mut rec = demo::nonlinear();
    rec.center = Some(vec![0.125, -1.0 / 3.0]);
    rec.g = vec![EpsilonRecord {
        eps_power: 0.5,
        terms: vec![
            CoeffRecord { k: vec![2, -1], alpha: vec![1, 0], re: vec![0.1, 0.7], im: vec![0.3, -0.2] },
            CoeffRecord { k: vec![-2, 1], alpha: vec![1, 0], re: vec![0.1, 0.7], im: vec![-0.3, 0.2] },
        ],
    }];
    let spec = SystemSpec::from_record(&rec).unwrap();
    let text = serde_json::to_string_pretty(&spec.to_record()).unwrap();
    let back: SystemRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(SystemSpec::from_record(&back).unwrap(), spec);
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v = serde_json::to_value(demo::elliptic()).unwrap();
    v["omgea"] = serde_json::json!([1.0]);
    assert!(serde_json::from_value::<SystemRecord>(v).is_err());
}

#[test]
fn second_order_round_trip_is_lossless() {
    let rec = SecondOrderRecord {
        n: 1,
        omega: vec![1.0, demo::GOLDEN],
        gamma: 0.1,
        tau: 1.2,
        a: 1.0,
        b: 2.0,
        rho: 0.25,
        r: 0.5,
        center: Some(vec![0.0]),
        f: vec![CoeffRecord { k: vec![0, 0], alpha: vec![1, 0], re: vec![-1.0], im: vec![0.0] }],
        g: vec![],
    };
    let so = SecondOrderSpec::from_record(&rec).unwrap();
    let text = serde_json::to_string(&so.to_record()).unwrap();
    let back: SecondOrderRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(SecondOrderSpec::from_record(&back).unwrap(), so);
}

#[test]
fn report_round_trip_is_lossless() {
    let spec = SystemSpec::from_record(&demo::nonlinear()).unwrap();
    let sol = solve(&spec, demo::DEMO_EPS, &[0.0, 0.0], &demo::options(spec.rho)).unwrap();
    let text = serde_json::to_string(&sol.report).unwrap();
    let back: KamReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, sol.report);
}

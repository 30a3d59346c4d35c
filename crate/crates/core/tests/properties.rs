use proptest::prelude::*;

use nhcyl::cylinder::{GraphFunction, GridSizes};
use nhcyl::model::builtin::pendulum_cylinder;
use nhcyl::model::AveragedData;
use nhcyl::pipeline::ScenarioConfig;
use nhcyl::report::CertificateReport;
use nhcyl::restricted::{dphi0, phi0};

fn smooth_graph() -> GraphFunction<f64> {
    let mut g = GraphFunction::zeros(
        1,
        1,
        GridSizes {
            nt: 6,
            nq: 8,
            np: 9,
        },
        &[0.6],
        0.05,
        0.2,
    );
    for i in 0..g.len() {
        let (t, q1, p1) = g.node(i);
        let v = g.field.node_values_mut(i);
        let arg = std::f64::consts::TAU * (t + q1[0]);
        v[0] = 1e-3 * arg.sin() * p1[0];
        v[1] = 2e-3 * arg.cos() + 0.1 * p1[0] * p1[0];
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_evaluation_is_periodic(t in 0.0f64..1.0, q in 0.0f64..1.0, p in 0.45f64..0.75, kt in -2i32..3, kq in -2i32..3) {
        let g = smooth_graph();
        let (a, b) = g.eval(t, &[q], &[p]);
        let (a2, b2) = g.eval(t + kt as f64, &[q + kq as f64], &[p]);
        prop_assert!((a[0] - a2[0]).abs() < 1e-13 && (b[0] - b2[0]).abs() < 1e-13);
    }

    #[test]
    fn graph_interpolates_band_limited_data(t in 0.0f64..1.0, q in 0.0f64..1.0, p in 0.45f64..0.75) {
        let g = smooth_graph();
        let (a, b) = g.eval(t, &[q], &[p]);
        let arg = std::f64::consts::TAU * (t + q);
        prop_assert!((a[0] - 1e-3 * arg.sin() * p).abs() < 1e-12);
        prop_assert!((b[0] - 2e-3 * arg.cos() - 0.1 * p * p).abs() < 1e-12);
    }

    #[test]
    fn phi0_fixes_p1_and_is_periodic(q in -3.0f64..3.0, p in 0.45f64..0.75) {
        let avg = AveragedData::new(&pendulum_cylinder(0.3, 0.05)).unwrap();
        let (q1, p1) = phi0(&avg, &[q], &[p]).unwrap();
        let (q2, _) = phi0(&avg, &[q + 1.0], &[p]).unwrap();
        prop_assert_eq!(p1[0], p);
        prop_assert!((0.0..1.0).contains(&q1[0]));
        let d = (q1[0] - q2[0]).abs();
        prop_assert!(d < 1e-12 || (1.0 - d) < 1e-12);
        let dp = dphi0(&avg, &[p]).unwrap();
        prop_assert!((dp.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_accepts_exactly_the_parameter_ordering(eps in 0.001f64..0.6, delta in 0.01f64..0.8, alpha in 0.05f64..1.2) {
        let cfg = ScenarioConfig {
            epsilon_ladder: vec![eps],
            delta,
            alpha: Some(alpha),
            ..ScenarioConfig::default()
        };
        let ordered = 0.0 < eps && eps < delta && delta < alpha && alpha < 1.0;
        prop_assert_eq!(cfg.validate().is_ok(), ordered);
    }

    #[test]
    fn reports_recheck_after_roundtrip(vals in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..8)) {
        let mut r = CertificateReport::new("p");
        for (i, (m, t)) in vals.iter().enumerate() {
            if i % 2 == 0 { r.check_le(format!("c{i}"), *m, *t); } else { r.check_gt(format!("c{i}"), *m, *t); }
        }
        let back: CertificateReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert!(back.recheck());
        prop_assert_eq!(back.passed, vals.iter().enumerate().all(|(i, (m, t))| if i % 2 == 0 { m <= t } else { m > t }));
    }
}

#[test]
fn graph_export_roundtrip() {
    let g = smooth_graph();
    let dir = tempfile::tempdir().unwrap();
    g.write(dir.path(), "g").unwrap();
    let back = GraphFunction::<f64>::read(dir.path(), "g").unwrap();
    assert_eq!(back.field.values, g.field.values);
    assert_eq!(back.header(), g.header());
    let err = GraphFunction::<f64>::read(dir.path(), "missing").unwrap_err();
    assert!(err.to_string().contains("missing.json"));
}

#[test]
fn single_precision_reduction() {
    let spec: nhcyl::Spec32 = pendulum_cylinder(0.3f32, 0.05);
    let avg = AveragedData::new(&spec).unwrap();
    let red: nhcyl::Reduction32 = nhcyl::reduction::ReductionData::new(&avg, 0.2, None).unwrap();
    let d = red.d(&[spec.p0[0]]).unwrap();
    assert!((d.min_eigenvalue() - std::f32::consts::TAU).abs() < 1e-4);
    assert!((avg.omega0(&[0.6f32]).unwrap()[0] - 0.6).abs() < 1e-6);
}

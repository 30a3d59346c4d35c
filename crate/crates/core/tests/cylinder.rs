use nhcyl::averaging::NormalFormH1;
use nhcyl::cylinder::{graph_solve, invariance_residual, GridSizes, SolverConfig};
use nhcyl::model::builtin::{pendulum_cylinder, unperturbed};
use nhcyl::model::AveragedData;
use nhcyl::pipeline::{
    run_pipeline, stage_certify, stage_sweep, CertifySettings, Context, ScenarioConfig,
};
use nhcyl::reduction::ReductionData;
use nhcyl::report::CertificateReport;

fn coarse(out: &std::path::Path, scenario: &str) -> ScenarioConfig {
    ScenarioConfig {
        solver: SolverConfig {
            grid: GridSizes {
                nt: 8,
                nq: 16,
                np: 13,
            },
            ..SolverConfig::default()
        },
        certify: CertifySettings {
            containment_seeds: 12,
            sample_nq: 8,
            sample_np: 9,
            sample_extra: 10,
            ..CertifySettings::default()
        },
        epsilon_ladder: vec![0.1, 0.05],
        out: out.to_path_buf(),
        ..ScenarioConfig::builtin(scenario).unwrap()
    }
}

fn strip_times(mut reps: Vec<CertificateReport>) -> Vec<CertificateReport> {
    for r in &mut reps {
        r.wall_time_s = 0.0;
    }
    reps
}

#[test]
fn residual_tracks_graph_tolerance() {
    let eps = 0.05;
    let spec = pendulum_cylinder(0.3, eps);
    let avg = AveragedData::new(&spec).unwrap();
    let red = ReductionData::new(&avg, 0.2, None).unwrap();
    let h1 = NormalFormH1::new(&spec).unwrap();
    let mut res = Vec::new();
    for tol in [1e-5, 1e-6] {
        let cfg = SolverConfig {
            grid: GridSizes {
                nt: 16,
                nq: 16,
                np: 17,
            },
            tol_graph: tol,
            ..SolverConfig::default()
        };
        let sol = graph_solve(&h1, &red, eps, 0.2, &cfg).unwrap();
        res.push(
            invariance_residual(&sol.graph_h1, &h1, &red, eps, 0.1, 0.02, 0.16, 1)
                .unwrap()
                .max,
        );
    }
    assert!(res[0] >= 10.0 * res[1], "{res:?}");
}

#[test]
fn certify_is_idempotent_on_stored_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse(dir.path(), "pendulum-cylinder");
    let outcome = run_pipeline(&cfg).unwrap();
    assert!(outcome.passed(), "{:?}", outcome.failures());
    let csv = std::fs::read(cfg.out.join("summary.csv")).unwrap();
    let ctx = Context::new(&cfg).unwrap();
    for (eps, first) in &outcome.per_epsilon {
        let again = stage_certify(&cfg, &ctx, *eps).unwrap();
        assert_eq!(strip_times(again), strip_times(first.clone()));
    }
    stage_sweep(&cfg, &ctx).unwrap();
    assert_eq!(std::fs::read(cfg.out.join("summary.csv")).unwrap(), csv);
    for name in ["xy", "graph_h1", "graph_h"] {
        assert!(cfg.eps_dir(0.05).join(format!("{name}.csv")).exists());
    }
}

#[test]
fn unperturbed_pipeline_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coarse(dir.path(), "unperturbed");
    let outcome = run_pipeline(&cfg).unwrap();
    assert!(outcome.passed(), "{:?}", outcome.failures());
    for row in &outcome.sweep.as_ref().unwrap().rows {
        assert_eq!(row.xy_c0, 0.0);
        assert_eq!(row.invariance_residual, 0.0);
        assert!(row.phi_dist < 1e-12);
    }
}

#[test]
fn failed_solve_keeps_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = coarse(dir.path(), "pendulum-cylinder");
    cfg.epsilon_ladder = vec![0.1];
    cfg.solver.margin = 1e-4;
    let outcome = run_pipeline(&cfg).unwrap();
    assert!(!outcome.passed());
    let reps = &outcome.per_epsilon[0].1;
    assert_eq!(reps[0].name, "solve");
    assert!(!reps[0].passed);
    assert!(cfg.out.join("hypotheses.json").exists());
    assert!(cfg.eps_dir(0.1).join("certificates.json").exists());
}

#[test]
fn exact_cylinder_graph_is_zero() {
    let spec = unperturbed(0.1);
    let avg = AveragedData::new(&spec).unwrap();
    let red = ReductionData::new(&avg, 0.2, None).unwrap();
    let h1 = NormalFormH1::new(&spec).unwrap();
    let cfg = SolverConfig {
        grid: GridSizes {
            nt: 4,
            nq: 8,
            np: 9,
        },
        ..SolverConfig::default()
    };
    let sol = graph_solve(&h1, &red, 0.1, 0.2, &cfg).unwrap();
    assert!(sol.diagnostics.xy_c0 <= 1e-8);
    assert_eq!(sol.graph_h.field.max_abs(), 0.0);
}

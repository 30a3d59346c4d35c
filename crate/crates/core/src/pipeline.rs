//! Scenario configuration and the staged pipeline
//! `check → average → solve → certify → sweep`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::averaging::{averaging_report, remainder_order_sweep, NormalFormH1};
use crate::cylinder::{
    containment_test, escape_time_check, estimate_norms, graph_solve, hyperbolicity_rates,
    invariance_residual, ContainmentConfig, GraphFunction, GridSizes, SolveDiagnostics,
    SolverConfig,
};
use crate::error::{Error, Result};
use crate::model::builtin::{pendulum_cylinder, unperturbed};
use crate::model::{check_hypotheses, AveragedData, HamiltonianSpec};
use crate::reduction::ReductionData;
use crate::report::CertificateReport;
use crate::restricted::{
    convergence_sweep, map_distance, restricted_form_check, section_invariance, torsion_check,
    MapDistance, RestrictedMap,
};

pub const BUILTIN_SCENARIOS: [&str; 2] = ["pendulum-cylinder", "unperturbed"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Invariance residual in scaled variables.
    pub residual: f64,
    /// Distance to the graph in original variables.
    pub contain: f64,
    pub pullback: f64,
    pub homological: f64,
    pub periodicity: f64,
    pub min_torsion: f64,
    pub min_form_det: f64,
    /// `sup‖Φ − Φ₀‖` at the finest ladder entry.
    pub phi_final: f64,
    /// `‖dΦ − dΦ₀‖` bound.
    pub eta: f64,
    /// Allowed drift factor of ladder-normalised quantities.
    pub ratio_stability: f64,
    pub remainder_slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-6,
            contain: 1e-3,
            pullback: 1e-6,
            homological: 1e-12,
            periodicity: 1e-6,
            min_torsion: 0.5,
            min_form_det: 0.5,
            phi_final: 0.05,
            eta: 0.1,
            ratio_stability: 2.0,
            remainder_slope: 3.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySettings {
    /// Flow time of the invariance residual.
    pub h_step: f64,
    /// Fraction of `δ` on which the residual is certified.
    pub inner_fraction: f64,
    /// Radius of `B₀` as a fraction of `δ`.
    pub b0_fraction: f64,
    pub step: f64,
    pub hyperbolicity_orbits: usize,
    /// Benettin horizon in units of `1/ε`.
    pub hyperbolicity_horizon: f64,
    pub containment_seeds: usize,
    /// `T_half` in units of `1/ε`.
    pub containment_t_half: f64,
    /// Seed momenta radius as a fraction of `δ`.
    pub containment_radius: f64,
    pub sample_nq: usize,
    pub sample_np: usize,
    pub sample_extra: usize,
}

impl Default for CertifySettings {
    fn default() -> Self {
        Self {
            h_step: 0.1,
            inner_fraction: 0.8,
            b0_fraction: 0.5,
            step: 0.02,
            hyperbolicity_orbits: 4,
            hyperbolicity_horizon: 5.0,
            containment_seeds: 100,
            containment_t_half: 1.0,
            containment_radius: 0.5,
            sample_nq: 32,
            sample_np: 33,
            sample_extra: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Builtin scenario name; ignored when `spec` is given.
    pub scenario: String,
    /// Coupling of the builtin family.
    pub mu: f64,
    pub spec: Option<HamiltonianSpec<f64>>,
    pub epsilon_ladder: Vec<f64>,
    pub delta: f64,
    pub kappa: f64,
    pub alpha: Option<f64>,
    pub solver: SolverConfig,
    pub tolerances: Tolerances,
    pub certify: CertifySettings,
    pub remainder_ladder: Vec<f64>,
    pub remainder_samples: usize,
    /// During `sweep`, compare the invariance residual at the largest ladder
    /// `ε` on the half grid and on the configured grid.
    pub refinement: bool,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "pendulum-cylinder".into(),
            mu: 0.3,
            spec: None,
            epsilon_ladder: vec![0.1, 0.05, 0.025],
            delta: 0.2,
            kappa: 0.1,
            alpha: None,
            solver: SolverConfig::default(),
            tolerances: Tolerances::default(),
            certify: CertifySettings::default(),
            remainder_ladder: vec![0.1, 0.05, 0.025, 0.0125],
            remainder_samples: 200,
            refinement: false,
            seed: 7,
            out: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    pub fn builtin(name: &str) -> Result<Self> {
        let mut cfg = Self {
            scenario: name.into(),
            ..Self::default()
        };
        if name == "unperturbed" {
            cfg.mu = 0.0;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Parameter ordering `0 < ε < δ < α < 1` and basic sanity.
    pub fn validate(&self) -> Result<()> {
        if self.spec.is_none() && !BUILTIN_SCENARIOS.contains(&self.scenario.as_str()) {
            return Err(Error::Config(format!(
                "unknown scenario `{}` (builtin: {})",
                self.scenario,
                BUILTIN_SCENARIOS.join(", ")
            )));
        }
        if self.epsilon_ladder.is_empty() {
            return Err(Error::Config("epsilon_ladder is empty".into()));
        }
        let upper = self.alpha.unwrap_or(1.0);
        for &eps in &self.epsilon_ladder {
            if !(eps > 0.0) {
                return Err(Error::Config(format!(
                    "0 < epsilon violated by epsilon = {eps}"
                )));
            }
            if !(eps < self.delta) {
                return Err(Error::Config(format!(
                    "epsilon < delta violated by epsilon = {eps}, delta = {}",
                    self.delta
                )));
            }
        }
        if !(self.delta < upper) {
            return Err(Error::Config(format!(
                "delta < alpha violated: delta = {}, alpha = {upper}",
                self.delta
            )));
        }
        if let Some(a) = self.alpha {
            if !(a < 1.0) {
                return Err(Error::Config(format!("alpha < 1 violated: alpha = {a}")));
            }
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config("kappa must be positive".into()));
        }
        let g = &self.solver.grid;
        if g.nt < 2 || g.nq < 2 || g.np < 3 {
            return Err(Error::Config(format!("grid too small: {g:?}")));
        }
        if !(self.solver.tol_graph > 0.0) || !(self.solver.step > 0.0) || !(self.certify.step > 0.0)
        {
            return Err(Error::Config(
                "tolerances and steps must be positive".into(),
            ));
        }
        if !(self.certify.b0_fraction > 0.0 && self.certify.b0_fraction < 1.0) {
            return Err(Error::Config("B0 must lie strictly inside B".into()));
        }
        if let Some(spec) = &self.spec {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn spec_at(&self, epsilon: f64) -> HamiltonianSpec<f64> {
        match &self.spec {
            Some(s) => s.with_epsilon(epsilon),
            None if self.scenario == "unperturbed" => unperturbed(epsilon),
            None => pendulum_cylinder(self.mu, epsilon),
        }
    }

    /// SHA-256 of the canonical configuration (output directory excluded),
    /// optionally tagged with one ladder entry.
    pub fn inputs_hash(&self, epsilon: Option<f64>) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&c).unwrap_or_default());
        if let Some(e) = epsilon {
            hasher.update(e.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn eps_dir(&self, epsilon: f64) -> PathBuf {
        self.out.join(format!("eps_{epsilon}"))
    }
}

/// ε-independent objects shared by every stage.
pub struct Context {
    pub spec: HamiltonianSpec<f64>,
    pub avg: AveragedData<f64>,
    pub red: ReductionData<f64>,
    pub h1: NormalFormH1<f64>,
}

impl Context {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let spec = cfg.spec_at(cfg.epsilon_ladder[0]);
        let avg = AveragedData::new(&spec)?;
        let red = ReductionData::new(&avg, cfg.delta, cfg.alpha)?;
        if !(cfg.delta < red.alpha) {
            return Err(Error::Config(format!(
                "delta < alpha violated: delta = {}, alpha = {}",
                cfg.delta, red.alpha
            )));
        }
        let h1 = NormalFormH1::new(&spec)?;
        Ok(Self { spec, avg, red, h1 })
    }
}

fn stamp(mut rep: CertificateReport, hash: &str, started: Instant) -> CertificateReport {
    rep.inputs_hash = hash.to_string();
    rep.wall_time_s = started.elapsed().as_secs_f64();
    rep
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Hypotheses on the working ball.
pub fn stage_check(cfg: &ScenarioConfig) -> Result<CertificateReport> {
    let t0 = Instant::now();
    let spec = cfg.spec_at(cfg.epsilon_ladder[0]);
    let mut rep = check_hypotheses(&spec, cfg.delta);
    if rep.passed {
        let ctx = Context::new(cfg)?;
        rep.record("alpha", ctx.red.alpha);
        rep.record("a", ctx.red.a_rate);
        rep.record("b_principal", ctx.red.b_rate);
        rep.check_gt("spectral_gap", ctx.red.a_rate - ctx.red.b_rate, 0.0);
    }
    let rep = stamp(rep, &cfg.inputs_hash(None), t0);
    write_json(&cfg.out.join("hypotheses.json"), &rep)?;
    Ok(rep)
}

/// Homological equation, mode table and small divisors.
pub fn stage_average(cfg: &ScenarioConfig) -> Result<CertificateReport> {
    let t0 = Instant::now();
    let spec = cfg.spec_at(cfg.epsilon_ladder[0]);
    let h1 = NormalFormH1::new(&spec)?;
    let rep = stamp(
        averaging_report(&spec, &h1, cfg.tolerances.homological),
        &cfg.inputs_hash(None),
        t0,
    );
    write_json(&cfg.out.join("averaging.json"), &rep)?;
    Ok(rep)
}

/// Solves one ladder entry and writes `xy`, `graph_h1`, `graph_h` and
/// `solve.json` under the entry's directory.
pub fn stage_solve(cfg: &ScenarioConfig, ctx: &Context, epsilon: f64) -> Result<SolveDiagnostics> {
    let dir = cfg.eps_dir(epsilon);
    let sol = graph_solve(&ctx.h1, &ctx.red, epsilon, cfg.delta, &cfg.solver)?;
    sol.xy.write(&dir, "xy")?;
    sol.graph_h1.write(&dir, "graph_h1")?;
    sol.graph_h.write(&dir, "graph_h")?;
    write_json(&dir.join("solve.json"), &sol.diagnostics)?;
    Ok(sol.diagnostics)
}

/// Runs every per-ε certificate from the artifacts on disk and writes
/// `certificates.json`.
pub fn stage_certify(
    cfg: &ScenarioConfig,
    ctx: &Context,
    epsilon: f64,
) -> Result<Vec<CertificateReport>> {
    let dir = cfg.eps_dir(epsilon);
    let diag: SolveDiagnostics = read_json(&dir.join("solve.json"))?;
    let xy = GraphFunction::<f64>::read(&dir, "xy")?;
    let g1 = GraphFunction::<f64>::read(&dir, "graph_h1")?;
    let gh = GraphFunction::<f64>::read(&dir, "graph_h")?;
    let hash = cfg.inputs_hash(Some(epsilon));
    let set = &cfg.certify;
    let tol = &cfg.tolerances;
    let spec = cfg.spec_at(epsilon);
    let delta = cfg.delta;
    let mut out = Vec::new();

    let t0 = Instant::now();
    let mut rep = CertificateReport::new("solve");
    let xy_c0 = xy.field.max_abs();
    let last = diag.updates.last().copied().unwrap_or(f64::INFINITY);
    rep.check_le("final_update", last, cfg.solver.tol_graph);
    rep.check_le(
        "contraction_rate",
        diag.contraction_rate,
        diag.predicted_rate,
    );
    rep.check_le("c0_bound", xy_c0, diag.c0_bound_rhs);
    rep.check_le("coincidence_q2", diag.max_q2, diag.q2_limit);
    rep.check_le("coincidence_p2", diag.max_p2_deviation, diag.p2_limit);
    rep.check_le(
        "periodicity_mismatch",
        diag.periodicity_mismatch,
        tol.periodicity,
    );
    rep.record("xy_c0", xy_c0);
    rep.record("c0_bound_rhs", diag.c0_bound_rhs);
    rep.record("tail_bound", diag.tail_bound);
    rep.record(
        "tail_bound_within_tol",
        diag.tail_bound <= cfg.solver.tol_graph / 10.0,
    );
    rep.record("diagnostics", &diag);
    out.push(stamp(rep, &hash, t0));

    let t0 = Instant::now();
    let inv = invariance_residual(
        &g1,
        &ctx.h1,
        &ctx.red,
        epsilon,
        set.h_step,
        set.step,
        set.inner_fraction * delta,
        1,
    )?;
    let mut rep = CertificateReport::new("invariance");
    rep.check_le("residual", inv.max, tol.residual);
    rep.record("detail", &inv);
    out.push(stamp(rep, &hash, t0));

    let t0 = Instant::now();
    out.push(stamp(
        estimate_norms(&gh, &ctx.avg, epsilon, cfg.kappa)?,
        &hash,
        t0,
    ));

    let t0 = Instant::now();
    let hyp = hyperbolicity_rates(
        &g1,
        (xy_c0, diag.c0_bound_rhs),
        &ctx.h1,
        &ctx.red,
        epsilon,
        set.hyperbolicity_orbits,
        set.hyperbolicity_horizon / epsilon,
        set.step,
        cfg.seed,
    )?;
    let mut rep = hyp.report(epsilon);
    rep.record("detail", &hyp);
    out.push(stamp(rep, &hash, t0));

    let t0 = Instant::now();
    let ccfg = ContainmentConfig {
        n_seeds: set.containment_seeds,
        t_half: set.containment_t_half / epsilon,
        tol_contain: tol.contain,
        step: set.step,
        seed: cfg.seed,
        seed_radius: set.containment_radius * delta,
    };
    let mut rep = containment_test(&gh, &spec, &ctx.red, &ccfg)?;
    rep.record("config", &ccfg);
    out.push(stamp(rep, &hash, t0));

    let t0 = Instant::now();
    out.push(stamp(
        escape_time_check(&ctx.red, epsilon, set.step)?,
        &hash,
        t0,
    ));

    let t0 = Instant::now();
    let map = RestrictedMap::new(&gh, &spec, &ctx.avg, set.step);
    let samples = map.samples(
        set.b0_fraction * delta,
        set.sample_nq,
        set.sample_np,
        set.sample_extra,
        cfg.seed,
    );
    let dist = map_distance(&map, &samples)?;
    let mut rep = CertificateReport::new("map_distance");
    rep.check_le("dphi_dist", dist.dphi_dist, tol.eta);
    rep.record("phi_dist", dist.phi_dist);
    rep.record("dphi_dist", dist.dphi_dist);
    rep.record("samples", dist.samples);
    rep.record("b0_radius", set.b0_fraction * delta);
    rep.record("seed", cfg.seed);
    out.push(stamp(rep, &hash, t0));

    let t0 = Instant::now();
    out.push(stamp(
        section_invariance(&map, &samples, tol.contain)?,
        &hash,
        t0,
    ));
    let t0 = Instant::now();
    out.push(stamp(
        torsion_check(&map, &samples, tol.min_torsion)?,
        &hash,
        t0,
    ));
    let t0 = Instant::now();
    out.push(stamp(
        restricted_form_check(&map, &samples, tol.min_form_det, tol.pullback)?,
        &hash,
        t0,
    ));

    write_json(&dir.join("certificates.json"), &out)?;
    Ok(out)
}

/// One summary row, read back from a certificate set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub epsilon: f64,
    pub invariance_residual: f64,
    pub xy_c0: f64,
    pub c0_bound_rhs: f64,
    pub eps_q2_c1: f64,
    pub p2_c1: f64,
    pub phi_dist: f64,
    pub min_torsion: f64,
    pub pass: bool,
}

pub const SUMMARY_HEADER: &str =
    "epsilon,invariance_residual,xy_c0,c0_bound_rhs,eps_q2_c1,p2_c1,phi_dist,min_torsion,pass";

fn find<'a>(reports: &'a [CertificateReport], name: &str) -> Option<&'a CertificateReport> {
    reports.iter().find(|r| r.name == name)
}

fn measured(reports: &[CertificateReport], rep: &str, check: &str) -> f64 {
    find(reports, rep)
        .and_then(|r| r.get_check(check))
        .map_or(f64::NAN, |c| c.measured)
}

fn value(reports: &[CertificateReport], rep: &str, key: &str) -> f64 {
    find(reports, rep)
        .and_then(|r| r.value_f64(key))
        .unwrap_or(f64::NAN)
}

impl SummaryRow {
    pub fn from_reports(epsilon: f64, reports: &[CertificateReport]) -> Self {
        Self {
            epsilon,
            invariance_residual: measured(reports, "invariance", "residual"),
            xy_c0: value(reports, "solve", "xy_c0"),
            c0_bound_rhs: value(reports, "solve", "c0_bound_rhs"),
            eps_q2_c1: measured(reports, "norms", "eps_q2_c1"),
            p2_c1: measured(reports, "norms", "p2_c1"),
            phi_dist: value(reports, "map_distance", "phi_dist"),
            min_torsion: measured(reports, "torsion", "min_eigenvalue"),
            pass: !reports.is_empty() && reports.iter().all(|r| r.passed),
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            self.epsilon,
            self.invariance_residual,
            self.xy_c0,
            self.c0_bound_rhs,
            self.eps_q2_c1,
            self.p2_c1,
            self.phi_dist,
            self.min_torsion,
            self.pass
        )
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// Ladder-wide certificates.
#[derive(Clone, Debug, Serialize)]
pub struct SweepOutcome {
    pub reports: Vec<CertificateReport>,
    pub rows: Vec<SummaryRow>,
    /// Largest ladder `ε` at which every per-ε certificate passed.
    pub epsilon0: Option<f64>,
    pub warnings: Vec<String>,
}

/// Strict decrease of `ys` along the ladder order.
fn strictly_decreasing(ys: &[f64]) -> f64 {
    ys.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max)
}

/// Reads every entry's certificates, runs the ladder-level checks and
/// writes `sweep.json` and `summary.csv`.
pub fn stage_sweep(cfg: &ScenarioConfig, ctx: &Context) -> Result<SweepOutcome> {
    let hash = cfg.inputs_hash(None);
    let tol = &cfg.tolerances;
    let mut ladder = cfg.epsilon_ladder.clone();
    ladder.sort_by(|a, b| b.total_cmp(a));
    let mut per_eps = Vec::new();
    for &eps in &ladder {
        let reports: Vec<CertificateReport> =
            read_json(&cfg.eps_dir(eps).join("certificates.json"))?;
        per_eps.push((eps, reports));
    }
    let rows: Vec<SummaryRow> = per_eps
        .iter()
        .map(|(e, r)| SummaryRow::from_reports(*e, r))
        .collect();
    let mut reports = Vec::new();
    let mut warnings = Vec::new();

    let t0 = Instant::now();
    let rem_eps: Vec<f64> = cfg.remainder_ladder.clone();
    let sweep = remainder_order_sweep(
        &ctx.spec,
        &rem_eps,
        cfg.delta,
        cfg.remainder_samples,
        cfg.seed,
    )?;
    reports.push(stamp(sweep.report, &hash, t0));

    let t0 = Instant::now();
    let mut rep = CertificateReport::new("ladder");
    let p2_c0: Vec<f64> = per_eps
        .iter()
        .map(|(_, r)| value(r, "norms", "p2_c0"))
        .collect();
    let pdot: Vec<f64> = per_eps
        .iter()
        .map(|(_, r)| value(r, "section_invariance", "pdot1_over_eps2"))
        .collect();
    let dev: Vec<f64> = per_eps
        .iter()
        .map(|(e, r)| value(r, "restricted_form", "deviation_from_standard") / e)
        .collect();
    rep.record("p2_c0", &p2_c0);
    rep.record("pdot1_over_eps2", &pdot);
    rep.record("form_deviation_over_eps", &dev);
    if ladder.len() > 1 {
        if p2_c0.iter().all(|v| *v == 0.0) {
            rep.check_holds("p2_c0_identically_zero", true, None);
        } else {
            rep.check_lt("p2_c0_successive_ratio", strictly_decreasing(&p2_c0), 1.0);
        }
        let growth = |v: &[f64]| {
            if v[0] == 0.0 {
                if v.iter().all(|x| *x == 0.0) {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                v.iter().fold(0.0f64, |a, x| a.max(x / v[0]))
            }
        };
        rep.check_le("pdot1_over_eps2_growth", growth(&pdot), tol.ratio_stability);
        rep.check_le(
            "form_deviation_over_eps_growth",
            growth(&dev),
            tol.ratio_stability,
        );
    } else {
        warnings.push("single ladder entry: monotonicity along ε not tested".into());
    }
    reports.push(stamp(rep, &hash, t0));

    let t0 = Instant::now();
    let dists: Vec<MapDistance> = per_eps
        .iter()
        .map(|(e, r)| MapDistance {
            epsilon: *e,
            phi_dist: value(r, "map_distance", "phi_dist"),
            dphi_dist: value(r, "map_distance", "dphi_dist"),
            samples: value(r, "map_distance", "samples") as usize,
        })
        .collect();
    reports.push(stamp(
        convergence_sweep(&dists, tol.phi_final, tol.eta),
        &hash,
        t0,
    ));

    if cfg.refinement {
        let t0 = Instant::now();
        reports.push(stamp(
            refinement_study(cfg, ctx, ladder[0], halved(cfg.solver.grid))?,
            &hash,
            t0,
        ));
    }

    for (eps, r) in &per_eps {
        if let Some(s) = find(r, "solve") {
            if s.values
                .get("tail_bound_within_tol")
                .and_then(|v| v.as_bool())
                == Some(false)
            {
                warnings.push(format!("ε = {eps}: Perron tail bound exceeds tol_graph/10"));
            }
        }
    }
    let epsilon0 = rows.iter().find(|r| r.pass).map(|r| r.epsilon);

    write_json(
        &cfg.out.join("sweep.json"),
        &serde_json::json!({ "reports": &reports, "epsilon0": epsilon0, "warnings": &warnings }),
    )?;
    std::fs::write(cfg.out.join("summary.csv"), summary_csv(&rows))?;
    Ok(SweepOutcome {
        reports,
        rows,
        epsilon0,
        warnings,
    })
}

/// `N ↦ 2N` on every axis (Chebyshev `n − 1` intervals doubled).
pub fn doubled(g: GridSizes) -> GridSizes {
    GridSizes {
        nt: 2 * g.nt,
        nq: 2 * g.nq,
        np: 2 * (g.np - 1) + 1,
    }
}

/// Inverse of [`doubled`], rounding up.
pub fn halved(g: GridSizes) -> GridSizes {
    GridSizes {
        nt: g.nt.div_ceil(2),
        nq: g.nq.div_ceil(2),
        np: (g.np - 1).div_ceil(2) + 1,
    }
}

/// Invariance residual on `base` and on the doubled grid.
pub fn refinement_study(
    cfg: &ScenarioConfig,
    ctx: &Context,
    epsilon: f64,
    base: GridSizes,
) -> Result<CertificateReport> {
    let set = &cfg.certify;
    let mut residuals = Vec::new();
    for grid in [base, doubled(base)] {
        let scfg = SolverConfig {
            grid,
            ..cfg.solver.clone()
        };
        let sol = graph_solve(&ctx.h1, &ctx.red, epsilon, cfg.delta, &scfg)?;
        let inv = invariance_residual(
            &sol.graph_h1,
            &ctx.h1,
            &ctx.red,
            epsilon,
            set.h_step,
            set.step,
            set.inner_fraction * cfg.delta,
            1,
        )?;
        residuals.push(inv.max);
    }
    let ratio = residuals[0].max(residuals[1]) / residuals[0].min(residuals[1]);
    let mut rep = CertificateReport::new("refinement");
    rep.check_lt("residual_ratio", ratio, 2.0);
    rep.record("epsilon", epsilon);
    rep.record("grids", [base, doubled(base)]);
    rep.record("residuals", &residuals);
    Ok(rep)
}

/// Everything a full run produced.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineOutcome {
    pub hypotheses: CertificateReport,
    pub averaging: CertificateReport,
    pub per_epsilon: Vec<(f64, Vec<CertificateReport>)>,
    pub sweep: Option<SweepOutcome>,
}

impl PipelineOutcome {
    pub fn passed(&self) -> bool {
        self.hypotheses.passed
            && self.averaging.passed
            && self
                .per_epsilon
                .iter()
                .all(|(_, r)| !r.is_empty() && r.iter().all(|c| c.passed))
            && self
                .sweep
                .as_ref()
                .is_some_and(|s| s.reports.iter().all(|r| r.passed))
    }

    pub fn warnings(&self) -> &[String] {
        self.sweep.as_ref().map_or(&[], |s| &s.warnings)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut add = |prefix: String, r: &CertificateReport| {
            if !r.passed {
                out.push(format!("{prefix}{}: {}", r.name, r.failure_summary()));
            }
        };
        add(String::new(), &self.hypotheses);
        add(String::new(), &self.averaging);
        for (e, reps) in &self.per_epsilon {
            for r in reps {
                add(format!("ε = {e}: "), r);
            }
        }
        if let Some(s) = &self.sweep {
            for r in &s.reports {
                add(String::new(), r);
            }
        }
        out
    }
}

/// Runs one ladder entry through solve and certify; a solver abort becomes
/// a failed `solve` certificate.
fn run_entry(cfg: &ScenarioConfig, ctx: &Context, eps: f64) -> Result<Vec<CertificateReport>> {
    let t0 = Instant::now();
    match stage_solve(cfg, ctx, eps) {
        Ok(_) => stage_certify(cfg, ctx, eps),
        Err(
            e @ (Error::NonContraction { .. }
            | Error::NoConvergence { .. }
            | Error::CoincidenceMargin(_)
            | Error::OutOfDomain(_)),
        ) => {
            let mut rep = CertificateReport::new("solve");
            rep.check_holds("solver", false, Some(e.to_string()));
            let out = vec![stamp(rep, &cfg.inputs_hash(Some(eps)), t0)];
            write_json(&cfg.eps_dir(eps).join("certificates.json"), &out)?;
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

pub fn run_pipeline(cfg: &ScenarioConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("config.json"), cfg)?;
    let hypotheses = stage_check(cfg)?;
    let averaging = stage_average(cfg)?;
    let mut outcome = PipelineOutcome {
        hypotheses,
        averaging,
        per_epsilon: Vec::new(),
        sweep: None,
    };
    if !outcome.hypotheses.passed {
        return Ok(outcome);
    }
    let ctx = Context::new(cfg)?;
    for &eps in &cfg.epsilon_ladder {
        outcome.per_epsilon.push((eps, run_entry(cfg, &ctx, eps)?));
    }
    outcome.sweep = Some(stage_sweep(cfg, &ctx)?);
    Ok(outcome)
}

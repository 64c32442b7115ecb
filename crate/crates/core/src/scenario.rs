//! Named scenarios: configuration, dry-run validation, orchestration and
//! artifact output. A run is deterministic given its configuration.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::PhasePoint;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::landau_zener::{coeff_a, coeff_b};
use crate::potential::{builtin, BuiltinParams, ModeSign, PauliPotential, BUILTIN_IDS};
use crate::profile::ProfileGrid;
use crate::reference::{evolve, max_spacing, GridState, Observables};
use crate::transition::{
    build_initial_packet, locate_crossing, run_transition, OutgoingProfile, RegimeCheck, RegimeReport,
    RegimeStatus, TransitionOptions, TransitionResult, TransitionSummary, WavePacket, DEFAULT_BETA,
};

pub const SCENARIOS: [&str; 3] = ["isotropic-crossing", "lz-table", "convergence"];

/// Window rule: `auto` is `δ = ε^{5/14}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DeltaRaw", into = "DeltaRaw")]
pub enum DeltaRule {
    Auto,
    Explicit(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DeltaRaw {
    Name(String),
    Value(f64),
}

impl TryFrom<DeltaRaw> for DeltaRule {
    type Error = String;
    fn try_from(raw: DeltaRaw) -> std::result::Result<Self, String> {
        match raw {
            DeltaRaw::Name(s) if s == "auto" => Ok(DeltaRule::Auto),
            DeltaRaw::Name(s) => Err(format!("delta must be \"auto\" or a number, got \"{s}\"")),
            DeltaRaw::Value(v) => Ok(DeltaRule::Explicit(v)),
        }
    }
}

impl From<DeltaRule> for DeltaRaw {
    fn from(d: DeltaRule) -> Self {
        match d {
            DeltaRule::Auto => DeltaRaw::Name("auto".into()),
            DeltaRule::Explicit(v) => DeltaRaw::Value(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub id: String,
    pub alpha0: f64,
    pub c: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { id: "isotropic-linear".into(), alpha0: 0.0, c: 0.0 }
    }
}

/// Initial phase-space point and mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub mode: ModeSign,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { q: vec![-1.0, 0.0], p: vec![2.0, 0.0], mode: ModeSign::Minus }
    }
}

/// Grids and steps of the packet pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub profile_n: usize,
    pub profile_half_width: f64,
    pub profile_dt: f64,
    pub flow_step: f64,
    pub horizon: f64,
    pub extraction_offset: f64,
    pub apply_cutoff: bool,
    pub outgoing: OutgoingProfile,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let o = TransitionOptions::default();
        Self {
            profile_n: 256,
            profile_half_width: 12.0,
            profile_dt: o.profile_dt,
            flow_step: o.flow_step,
            horizon: o.horizon,
            extraction_offset: o.extraction_offset,
            apply_cutoff: o.apply_cutoff,
            outgoing: o.outgoing,
        }
    }
}

/// Split-step reference run. The box is centered on the packet excursion
/// and padded by `width_factor·√ε` unless `half_width` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub n: usize,
    pub dt_factor: f64,
    pub width_factor: f64,
    pub half_width: Option<f64>,
    /// Number of evenly spaced observable rows.
    pub samples: usize,
    pub checkpoint: bool,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { n: 512, dt_factor: 0.05, width_factor: 16.0, half_width: None, samples: 16, checkpoint: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LzTableConfig {
    pub z_max: f64,
    pub z_step: f64,
}

impl Default for LzTableConfig {
    fn default() -> Self {
        Self { z_max: 6.0, z_step: 0.05 }
    }
}

/// Everything a scenario run needs. Absent keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    /// Empty means the scenario default.
    pub eps: Vec<f64>,
    pub delta: DeltaRule,
    pub beta: f64,
    pub pipeline: PipelineConfig,
    pub reference: ReferenceConfig,
    pub lz: LzTableConfig,
    pub out: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "isotropic-crossing".into(),
            potential: PotentialConfig::default(),
            initial: InitialConfig::default(),
            eps: Vec::new(),
            delta: DeltaRule::Auto,
            beta: DEFAULT_BETA,
            pipeline: PipelineConfig::default(),
            reference: ReferenceConfig::default(),
            lz: LzTableConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ScenarioConfig {
    /// The ε list, falling back to the scenario default.
    pub fn eps_list(&self) -> Vec<f64> {
        if !self.eps.is_empty() {
            return self.eps.clone();
        }
        match self.scenario.as_str() {
            "convergence" => vec![4e-2, 2e-2, 1e-2],
            _ => vec![1e-2],
        }
    }

    pub fn needs_crossing(&self) -> bool {
        self.scenario != "lz-table"
    }

    pub fn options(&self) -> TransitionOptions {
        let p = &self.pipeline;
        TransitionOptions {
            delta: match self.delta {
                DeltaRule::Auto => None,
                DeltaRule::Explicit(d) => Some(d),
            },
            beta: self.beta,
            horizon: p.horizon,
            flow_step: p.flow_step,
            profile_dt: p.profile_dt,
            extraction_offset: p.extraction_offset,
            apply_cutoff: p.apply_cutoff,
            outgoing: p.outgoing,
        }
    }

    pub fn potential(&self) -> Result<Arc<dyn PauliPotential>> {
        let params = BuiltinParams { alpha0: self.potential.alpha0, c: self.potential.c };
        builtin(&self.potential.id, self.initial.q.len(), params)
    }

    pub fn initial_point(&self) -> PhasePoint {
        PhasePoint::new(self.initial.q.clone(), self.initial.p.clone())
    }

    /// Static checks on ids, ranges and grid shapes.
    pub fn check_fields(&self) -> Result<()> {
        if !SCENARIOS.contains(&self.scenario.as_str()) {
            return Err(config_err(format!("unknown scenario `{}` (expected one of {SCENARIOS:?})", self.scenario)));
        }
        if self.scenario == "lz-table" {
            let lz = &self.lz;
            if !(lz.z_step > 0.0 && lz.z_max >= 0.0 && lz.z_max.is_finite()) {
                return Err(config_err("lz table needs z_step > 0 and a finite z_max >= 0"));
            }
            return Ok(());
        }
        if !BUILTIN_IDS.contains(&self.potential.id.as_str()) {
            return Err(config_err(format!("unknown potential `{}` (expected one of {BUILTIN_IDS:?})", self.potential.id)));
        }
        for &e in &self.eps_list() {
            if !(e > 0.0 && e < 0.5) {
                return Err(config_err(format!("eps = {e} is outside (0, 0.5)")));
            }
        }
        let d = self.initial.q.len();
        if d < 2 || self.initial.p.len() != d {
            return Err(config_err(format!(
                "initial q and p need a common dimension >= 2 (got {} and {})",
                d,
                self.initial.p.len()
            )));
        }
        if let DeltaRule::Explicit(v) = self.delta {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("delta = {v} must be positive")));
            }
        }
        if !(self.beta > 0.0) {
            return Err(config_err(format!("beta = {} must be positive", self.beta)));
        }
        let p = &self.pipeline;
        GridSpec::new(d, p.profile_n, p.profile_half_width).map_err(|e| config_err(format!("pipeline grid: {e}")))?;
        for (name, v) in [("profile_dt", p.profile_dt), ("flow_step", p.flow_step), ("horizon", p.horizon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("{name} = {v} must be positive")));
            }
        }
        if self.scenario == "convergence" {
            let r = &self.reference;
            if d != 2 {
                return Err(config_err("the reference solver runs in d = 2 only"));
            }
            GridSpec::new(d, r.n, r.half_width.unwrap_or(1.0)).map_err(|e| config_err(format!("reference grid: {e}")))?;
            if !(r.dt_factor > 0.0) || !(r.width_factor > 0.0) {
                return Err(config_err("reference dt_factor and width_factor must be positive"));
            }
        }
        Ok(())
    }
}

fn tag(eps: f64) -> String {
    format!("{eps:e}")
}

/// Regime ratios for one ε of a validation.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationEntry {
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub t_flat: f64,
    pub checks: Vec<RegimeCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn failure(&self) -> Option<(f64, &RegimeCheck)> {
        self.entries
            .iter()
            .find_map(|e| e.checks.iter().find(|c| c.status() == RegimeStatus::Fail).map(|c| (e.eps, c)))
    }

    pub fn into_result(self) -> Result<Self> {
        if let Some((_, c)) = self.failure() {
            return Err(Error::Regime { name: c.name, value: c.value, limit: c.fail.unwrap_or(f64::INFINITY) });
        }
        Ok(self)
    }

    pub fn render(&self) -> String {
        let mut s = format!("scenario {}\n", self.scenario);
        for e in &self.entries {
            let _ = writeln!(s, "eps {:e}  delta {:.6}  alpha {:.3e}  t_flat {:.6}", e.eps, e.delta, e.alpha, e.t_flat);
            for c in &e.checks {
                let status = match c.status() {
                    RegimeStatus::Pass => "pass",
                    RegimeStatus::Warn => "warn",
                    RegimeStatus::Fail => "FAIL",
                };
                let limit = c.fail.map(|f| format!("fail at {f}")).unwrap_or_else(|| "no hard limit".into());
                let _ = writeln!(s, "  {:<18} {:>10.4}  {status}  (warn above {}, {limit})", c.name, c.value, c.warn);
            }
        }
        s
    }
}

/// Dry run: field checks, then the regime ratios per ε from the classical
/// crossing alone. A regime failure is reported, not raised.
pub fn validate(cfg: &ScenarioConfig) -> Result<ValidationReport> {
    cfg.check_fields()?;
    let mut entries = Vec::new();
    if cfg.needs_crossing() {
        let pot = cfg.potential()?;
        let opts = cfg.options();
        let event = locate_crossing(pot.as_ref(), cfg.initial.mode, &cfg.initial_point(), 0.0, &opts)?;
        for eps in cfg.eps_list() {
            let sched = opts.schedule(eps);
            let report = RegimeReport::evaluate(eps, sched.delta, event.alpha);
            entries.push(ValidationEntry {
                eps,
                delta: sched.delta,
                alpha: event.alpha,
                t_flat: event.t_flat,
                checks: report.checks,
            });
        }
    }
    Ok(ValidationReport { scenario: cfg.scenario.clone(), entries })
}

/// Center and half-width of a reference box holding every `centers` point
/// with `width_factor·√ε` to spare inside the inner nine tenths.
pub fn reference_box(centers: &[&[f64]], eps: f64, width_factor: f64) -> (Vec<f64>, f64) {
    let d = centers[0].len();
    let mut mid = vec![0.0; d];
    let mut half = 0.0f64;
    for a in 0..d {
        let lo = centers.iter().map(|c| c[a]).fold(f64::INFINITY, f64::min);
        let hi = centers.iter().map(|c| c[a]).fold(f64::NEG_INFINITY, f64::max);
        mid[a] = 0.5 * (lo + hi);
        half = half.max(0.5 * (hi - lo));
    }
    (mid, (half + width_factor * eps.sqrt()) / 0.9)
}

/// Grid solution against the packet pipeline for one ε.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceComparison {
    pub eps: f64,
    pub delta: f64,
    pub n: usize,
    pub half_width: f64,
    pub box_center: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
    pub cfl_warning: bool,
    /// `|m(t) - m(0)|` at the end of the run.
    pub mass_drift: f64,
    pub mass_plus_grid: f64,
    pub mass_minus_grid: f64,
    pub mass_plus_pred: f64,
    pub mass_minus_pred: f64,
    /// `m₊^grid/m₊^pred - 1` for the mode generated at the crossing.
    pub transferred_rel_err: f64,
    /// `‖ψ_grid - ψ_in‖` at `t♭ - δ`.
    pub l2_error_in: f64,
    /// `‖ψ_grid - (ψ₊ + ψ₋)‖` at `t♭ + δ`.
    pub l2_error: f64,
    #[serde(skip)]
    pub observables: Vec<Observables>,
}

/// Sample the initial packet, run the split-step solver to `t♭ + δ` and
/// compare with the ingoing and outgoing packets. Returns the final state.
pub fn compare_with_reference(
    pot: &dyn PauliPotential,
    initial: &WavePacket,
    result: &TransitionResult,
    rc: &ReferenceConfig,
) -> Result<(ReferenceComparison, GridState)> {
    let eps = initial.eps;
    let delta = result.schedule.delta;
    let (t_in, t_out) = (result.event.t_flat - delta, result.event.t_flat + delta);
    let (plus, minus) = (result.out_plus(), result.out_minus());
    let centers = [
        initial.center.q.as_slice(),
        result.packet_in.center.q.as_slice(),
        plus.center.q.as_slice(),
        minus.center.q.as_slice(),
    ];
    let (box_center, auto_l) = reference_box(&centers, eps, rc.width_factor);
    let l = rc.half_width.unwrap_or(auto_l);
    let spec = GridSpec::new(initial.dim(), rc.n, l)?;
    if spec.dx() > max_spacing(eps) {
        return Err(Error::Resolution(format!(
            "dx = {:.4e} exceeds 2π√ε/8 = {:.4e}; raise reference.n",
            spec.dx(),
            max_spacing(eps)
        )));
    }
    let mut st = GridState::from_packets(spec, box_center.clone(), &[initial])?;
    let m0 = st.mass();
    let dt = rc.dt_factor * eps;

    let t0 = initial.t;
    let k = rc.samples.max(1);
    let mut stops: Vec<f64> = (1..=k).map(|j| t0 + (t_out - t0) * j as f64 / k as f64).collect();
    stops.push(t_in);
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut observables = vec![st.observables(pot)];
    let (mut steps, mut cfl) = (0, false);
    let mut l2_in = f64::NAN;
    for &t in &stops {
        let rep = evolve(pot, &mut st, t, dt)?;
        steps += rep.steps;
        cfl |= rep.cfl_warning;
        if (t - t_in).abs() < 1e-12 {
            l2_in = st.distance_to(&[&result.packet_in]);
        }
        observables.push(st.observables(pot));
    }
    let (mm, mp) = st.mode_masses(pot);
    let (pred_p, pred_m) = (plus.mass(), minus.mass());
    let transferred_rel_err = match result.start {
        ModeSign::Minus => mp / pred_p - 1.0,
        ModeSign::Plus => mm / pred_m - 1.0,
    };
    let cmp = ReferenceComparison {
        eps,
        delta,
        n: rc.n,
        half_width: l,
        box_center,
        dt,
        steps,
        cfl_warning: cfl,
        mass_drift: (st.mass() - m0).abs(),
        mass_plus_grid: mp,
        mass_minus_grid: mm,
        mass_plus_pred: pred_p,
        mass_minus_pred: pred_m,
        transferred_rel_err,
        l2_error_in: l2_in,
        l2_error: st.distance_to(&[plus, minus]),
        observables,
    };
    Ok((cmp, st))
}

/// One ε of a crossing scenario.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingRun {
    pub eps: f64,
    pub tag: String,
    /// Mass carried off by the mode generated at the crossing.
    pub transferred_mass: f64,
    pub transferred_fraction: f64,
    pub transition: TransitionSummary,
    pub reference: Option<ReferenceComparison>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LzRow {
    pub z: f64,
    pub a: f64,
    pub b_abs2: f64,
    pub sum: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub runs: Vec<CrossingRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lz_max_defect: Option<f64>,
    /// Whether the L² error strictly decreases along the ε list sorted
    /// downwards.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_monotone: Option<bool>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

/// `(z, a, |b|², a² + |b|²)` on `[0, z_max]`.
pub fn lz_table(cfg: &LzTableConfig) -> Vec<LzRow> {
    let n = (cfg.z_max / cfg.z_step + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| {
            let z = k as f64 * cfg.z_step;
            let a = coeff_a(z);
            let b_abs2 = coeff_b(z).norm_sqr();
            LzRow { z, a, b_abs2, sum: a * a + b_abs2 }
        })
        .collect()
}

fn write_text(dir: &Path, name: &str, body: &str, files: &mut Vec<String>) -> Result<()> {
    let mut f = fs::File::create(dir.join(name))?;
    f.write_all(body.as_bytes())?;
    files.push(name.to_string());
    Ok(())
}

/// Run the configured scenario and write its artifacts into `cfg.out`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioSummary> {
    let report = validate(cfg)?.into_result()?;
    let dir = cfg.out.clone();
    fs::create_dir_all(&dir)?;
    let mut warnings: Vec<String> = report
        .entries
        .iter()
        .flat_map(|e| {
            e.checks
                .iter()
                .filter(|c| c.status() == RegimeStatus::Warn)
                .map(move |c| format!("eps {:e}: {} = {:.4} above {}", e.eps, c.name, c.value, c.warn))
        })
        .collect();
    let mut files = Vec::new();
    let mut summary = ScenarioSummary {
        scenario: cfg.scenario.clone(),
        config: cfg.clone(),
        runs: Vec::new(),
        lz_max_defect: None,
        l2_monotone: None,
        warnings: Vec::new(),
        files: Vec::new(),
    };

    if cfg.scenario == "lz-table" {
        let rows = lz_table(&cfg.lz);
        let mut csv = String::from("z,a,b_abs2,sum\n");
        for r in &rows {
            let _ = writeln!(csv, "{:.6},{:.15e},{:.15e},{:.15e}", r.z, r.a, r.b_abs2, r.sum);
        }
        write_text(&dir, "lz_table.csv", &csv, &mut files)?;
        summary.lz_max_defect = Some(rows.iter().map(|r| (r.sum - 1.0).abs()).fold(0.0, f64::max));
    } else {
        let with_reference = cfg.scenario == "convergence";
        let eps_list = cfg.eps_list();
        let runs: Vec<Result<CrossingRun>> =
            eps_list.par_iter().map(|&eps| crossing_run(cfg, eps, with_reference, &dir)).collect();
        for run in runs {
            summary.runs.push(run?);
        }
        for r in &summary.runs {
            let t = &r.tag;
            files.extend([
                format!("transfer_{t}.csv"),
                format!("u_in_{t}.bin"),
                format!("u_plus_{t}.bin"),
                format!("u_minus_{t}.bin"),
            ]);
            if let Some(c) = &r.reference {
                files.push(format!("observables_{t}.csv"));
                if cfg.reference.checkpoint {
                    files.push(format!("reference_{t}.bin"));
                }
                if c.cfl_warning {
                    warnings.push(format!("eps {:e}: potential phase per step above π/4", r.eps));
                }
            }
        }
        let mut csv = String::from("eps,delta,mass_in,mass_plus_out,mass_minus_out,transferred_fraction\n");
        for r in &summary.runs {
            let s = &r.transition;
            let _ = writeln!(
                csv,
                "{:e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.eps, s.delta, s.mass_in, s.mass_plus_out, s.mass_minus_out, r.transferred_fraction
            );
        }
        write_text(&dir, "masses.csv", &csv, &mut files)?;
        if with_reference {
            let mut csv = String::from(
                "eps,delta,half_width,mass_plus_grid,mass_plus_pred,mass_minus_grid,mass_minus_pred,transferred_rel_err,l2_error_in,l2_error,error_budget\n",
            );
            for r in &summary.runs {
                let c = r.reference.as_ref().expect("reference run");
                let _ = writeln!(
                    csv,
                    "{:e},{:.12e},{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{:.12e},{:.12e},{:.6e}",
                    r.eps,
                    c.delta,
                    c.half_width,
                    c.mass_plus_grid,
                    c.mass_plus_pred,
                    c.mass_minus_grid,
                    c.mass_minus_pred,
                    c.transferred_rel_err,
                    c.l2_error_in,
                    c.l2_error,
                    r.transition.error_budget
                );
            }
            write_text(&dir, "errors.csv", &csv, &mut files)?;
            let mut by_eps: Vec<(f64, f64)> =
                summary.runs.iter().map(|r| (r.eps, r.reference.as_ref().unwrap().l2_error)).collect();
            by_eps.sort_by(|a, b| b.0.total_cmp(&a.0));
            summary.l2_monotone = Some(by_eps.windows(2).all(|w| w[1].1 < w[0].1));
        }
    }
    files.push("summary.json".into());
    summary.warnings = warnings;
    summary.files = files;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(summary)
}

/// Initial packet with the Gaussian profile on the configured grid.
pub fn initial_packet(cfg: &ScenarioConfig, pot: &dyn PauliPotential, eps: f64) -> Result<WavePacket> {
    let p = &cfg.pipeline;
    let spec = GridSpec::new(cfg.initial.q.len(), p.profile_n, p.profile_half_width)?;
    build_initial_packet(pot, &cfg.initial_point(), cfg.initial.mode, &ProfileGrid::gaussian(spec), eps)
}

fn crossing_run(cfg: &ScenarioConfig, eps: f64, with_reference: bool, dir: &Path) -> Result<CrossingRun> {
    let pot = cfg.potential()?;
    let init = initial_packet(cfg, pot.as_ref(), eps)?;
    let res = run_transition(pot.as_ref(), &init, &cfg.options())?;
    let t = tag(eps);
    res.transfer.record.write_csv(&dir.join(format!("transfer_{t}.csv")))?;
    res.ingoing.u_in.write_bin(&dir.join(format!("u_in_{t}.bin")))?;
    res.out_plus().profile.write_bin(&dir.join(format!("u_plus_{t}.bin")))?;
    res.out_minus().profile.write_bin(&dir.join(format!("u_minus_{t}.bin")))?;
    let summary = res.summary();
    let transferred_mass = match res.start {
        ModeSign::Minus => summary.mass_plus_out,
        ModeSign::Plus => summary.mass_minus_out,
    };
    let reference = if with_reference {
        let (cmp, st) = compare_with_reference(pot.as_ref(), &init, &res, &cfg.reference)?;
        let mut csv = Observables::csv_header(init.dim());
        csv.push('\n');
        for o in &cmp.observables {
            csv.push_str(&o.csv_row());
            csv.push('\n');
        }
        fs::write(dir.join(format!("observables_{t}.csv")), csv)?;
        if cfg.reference.checkpoint {
            st.write_checkpoint(&dir.join(format!("reference_{t}.bin")))?;
        }
        Some(cmp)
    } else {
        None
    };
    Ok(CrossingRun {
        eps,
        tag: t,
        transferred_mass,
        transferred_fraction: transferred_mass / summary.mass_in,
        transition: summary,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_fields() {
        let cfg = ScenarioConfig::default();
        assert!(cfg.check_fields().is_ok());
        assert_eq!(cfg.eps_list(), vec![1e-2]);
        let conv = ScenarioConfig { scenario: "convergence".into(), ..Default::default() };
        assert_eq!(conv.eps_list(), vec![4e-2, 2e-2, 1e-2]);
        let bad = ScenarioConfig { eps: vec![0.7], ..Default::default() };
        assert!(matches!(bad.check_fields(), Err(Error::Config(_))));
        let mut bad = ScenarioConfig::default();
        bad.potential.id = "nope".into();
        assert!(matches!(bad.check_fields(), Err(Error::Config(_))));
        let bad = ScenarioConfig { scenario: "x".into(), ..Default::default() };
        assert!(matches!(bad.check_fields(), Err(Error::Config(_))));
    }

    #[test]
    fn delta_rule_round_trip() {
        let a: DeltaRule = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(a, DeltaRule::Auto);
        let b: DeltaRule = serde_json::from_str("0.25").unwrap();
        assert_eq!(b, DeltaRule::Explicit(0.25));
        assert!(serde_json::from_str::<DeltaRule>("\"fast\"").is_err());
        assert_eq!(serde_json::to_string(&DeltaRule::Auto).unwrap(), "\"auto\"");
    }

    #[test]
    fn validation_ratios() {
        let cfg = ScenarioConfig::default();
        let rep = validate(&cfg).unwrap();
        let e = &rep.entries[0];
        assert!((e.delta - 1e-2f64.powf(5.0 / 14.0)).abs() < 1e-15);
        assert!(rep.failure().is_none());
        let wide = ScenarioConfig { delta: DeltaRule::Explicit(0.9), ..Default::default() };
        let rep = validate(&wide).unwrap();
        let (_, c) = rep.failure().unwrap();
        assert_eq!(c.name, "delta^3/eps");
        assert!(matches!(rep.into_result(), Err(Error::Regime { .. })));
        // α = 10√ε only warns
        let mut gap = ScenarioConfig::default();
        gap.potential = PotentialConfig { id: "shifted-linear".into(), alpha0: 1.0, c: 0.0 };
        let rep = validate(&gap).unwrap();
        let c = rep.entries[0].checks.iter().find(|c| c.name == "alpha/sqrt(eps)").unwrap();
        assert_eq!(c.status(), RegimeStatus::Warn);
        assert!(rep.failure().is_none());
    }

    #[test]
    fn lz_rows_are_unitary() {
        let rows = lz_table(&LzTableConfig::default());
        assert_eq!(rows.len(), 121);
        assert!((rows[120].z - 6.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| (r.sum - 1.0).abs() < 1e-11));
    }

    #[test]
    fn box_covers_excursion() {
        let (c, l) = reference_box(&[&[-1.0, 0.0], &[0.3, 0.2]], 1e-2, 16.0);
        assert!((c[0] + 0.35).abs() < 1e-15 && (c[1] - 0.1).abs() < 1e-15);
        assert!((l - (0.65 + 1.6) / 0.9).abs() < 1e-12);
    }
}

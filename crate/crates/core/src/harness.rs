//! Scenario files, command dispatch and report rendering for the CLI.
//!
//! A scenario is `{"kind", "payload", "sweep", "tolerances"}`; the sweep and
//! tolerances are optional and may be overridden by flags. Every run yields a
//! JSON report, a text rendering with 9 significant digits and, where the
//! command samples a grid, CSV rows.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::expansion::Expansion;
use crate::log_calculus::{leading_asymptotics, verify_poincare};
use crate::metrics::{
    bclass_check, chern_asymptotics, mumford_goodness, prop51_verify, verify_theorem1, SemistableModel,
};
use crate::orbit::{fiber_integral_expansion, l2_metric, pair_constants, single_valuedness, OrbitInput};
use crate::selftest::run_selftest;
use crate::sweep::{equally_spaced_angles, Sweep, Tolerances, DEFAULT_POINTS_PER_DECADE, DEFAULT_RAYS, DEFAULT_RHO_MAX, DEFAULT_RHO_MIN};
use crate::torsion::{torsion_hessian_profile, TorsionInput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Leading,
    Poincare,
    Chern,
    Curvature,
    Goodness,
    Bclass,
    Orbit,
    Torsion,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Leading => "leading",
            Command::Poincare => "poincare",
            Command::Chern => "chern",
            Command::Curvature => "curvature",
            Command::Goodness => "goodness",
            Command::Bclass => "bclass",
            Command::Orbit => "orbit",
            Command::Torsion => "torsion",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Expansion,
    Metric,
    Monodromy,
    Torsion,
}

/// Either a ray count or explicit angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rays {
    Count(usize),
    Angles(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default = "default_rays")]
    pub rays: Rays,
    #[serde(default = "default_rho_min")]
    pub rho_min: f64,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    #[serde(default = "default_ppd")]
    pub points_per_decade: u32,
}

fn default_rays() -> Rays {
    Rays::Count(DEFAULT_RAYS)
}
fn default_rho_min() -> f64 {
    DEFAULT_RHO_MIN
}
fn default_rho_max() -> f64 {
    DEFAULT_RHO_MAX
}
fn default_ppd() -> u32 {
    DEFAULT_POINTS_PER_DECADE
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            rays: default_rays(),
            rho_min: DEFAULT_RHO_MIN,
            rho_max: DEFAULT_RHO_MAX,
            points_per_decade: DEFAULT_POINTS_PER_DECADE,
        }
    }
}

impl SweepSpec {
    pub fn to_sweep(&self) -> Sweep {
        let angles = match &self.rays {
            Rays::Count(n) => equally_spaced_angles(*n),
            Rays::Angles(a) => a.clone(),
        };
        Sweep { angles, rho_min: self.rho_min, rho_max: self.rho_max, points_per_decade: self.points_per_decade }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub payload: Value,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Payload of an `expansion` scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionPayload {
    pub g: Expansion,
    /// Fiber dimension, used by the canonical-singularity class.
    #[serde(default = "default_n")]
    pub n: u32,
}

fn default_n() -> u32 {
    1
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path)?;
        Scenario::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let scenario: Scenario = serde_json::from_str(text)?;
        Ok(scenario)
    }

    fn payload<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        T::deserialize(&self.payload).map_err(|e| Error::Parse(format!("{:?} payload: {e}", self.kind)))
    }

    fn expect(&self, allowed: &[ScenarioKind], command: Command) -> Result<()> {
        if allowed.contains(&self.kind) {
            Ok(())
        } else {
            Err(Error::Parse(format!(
                "command `{}` does not accept a {:?} scenario",
                command.name(),
                self.kind
            )))
        }
    }
}

/// Command-line overrides of the scenario settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Flags {
    pub rays: Option<usize>,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub points_per_decade: Option<u32>,
    pub fd_step_scale: f64,
    pub tol_exact: Option<f64>,
    pub tol_fd: Option<f64>,
    pub out: Option<PathBuf>,
    pub csv: bool,
    pub seed: u64,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            rays: None,
            rho_min: None,
            rho_max: None,
            points_per_decade: None,
            fd_step_scale: 1.0,
            tol_exact: None,
            tol_fd: None,
            out: None,
            csv: false,
            seed: crate::random::DEFAULT_SEED,
        }
    }
}

impl Flags {
    fn apply(&self, spec: &SweepSpec, tol: &Tolerances) -> (SweepSpec, Tolerances) {
        let mut spec = spec.clone();
        if let Some(n) = self.rays {
            spec.rays = Rays::Count(n);
        }
        spec.rho_min = self.rho_min.unwrap_or(spec.rho_min);
        spec.rho_max = self.rho_max.unwrap_or(spec.rho_max);
        spec.points_per_decade = self.points_per_decade.unwrap_or(spec.points_per_decade);
        let mut tol = tol.clone();
        tol.exact_rel = self.tol_exact.unwrap_or(tol.exact_rel);
        tol.fd_rel = self.tol_fd.unwrap_or(tol.fd_rel);
        (spec, tol)
    }
}

/// Result of one command: exit code and rendered artifacts.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Value,
    pub text: String,
    pub csv: Option<String>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

/// What a command computed: whether its asserted checks passed, its result
/// object and optional CSV rows.
struct Computed {
    passed: bool,
    result: Value,
    csv: Option<String>,
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn scalar_target(scenario: &Scenario, command: Command) -> Result<Expansion> {
    scenario.expect(&[ScenarioKind::Expansion, ScenarioKind::Metric], command)?;
    match scenario.kind {
        ScenarioKind::Expansion => Ok(scenario.payload::<ExpansionPayload>()?.g),
        _ => scenario.payload::<SemistableModel>()?.det_h(),
    }
}

fn compute(command: Command, scenario: Option<&Scenario>, sweep: &Sweep, tol: &Tolerances, flags: &Flags) -> Result<Computed> {
    if command == Command::Selftest {
        let report = run_selftest(flags.seed, sweep, tol, flags.fd_step_scale)?;
        return Ok(Computed { passed: report.passed, result: to_value(&report)?, csv: None });
    }
    let scenario = scenario.ok_or_else(|| Error::Parse(format!("command `{}` needs a scenario file", command.name())))?;
    match command {
        Command::Leading => {
            let g = scalar_target(scenario, command)?;
            let la = leading_asymptotics(&g)?;
            Ok(Computed { passed: true, result: json!({ "leading": la, "g": g }), csv: None })
        }
        Command::Poincare => {
            let g = scalar_target(scenario, command)?;
            let p = verify_poincare(&g, sweep, tol)?;
            let csv = csv_table(
                &["ray", "rho", "theta", "g", "grad_scaled", "hess_remainder"],
                p.samples.iter().map(|s| {
                    vec![s.sample.ray as f64, s.sample.rho, s.sample.theta, s.g, s.grad_scaled, s.hess_remainder]
                }),
            );
            Ok(Computed { passed: p.grad_trend_ok && p.hess_trend_ok, result: to_value(&p)?, csv: Some(csv) })
        }
        Command::Chern => {
            scenario.expect(&[ScenarioKind::Metric], command)?;
            let model: SemistableModel = scenario.payload()?;
            let ch = chern_asymptotics(&model, sweep, tol)?;
            let csv = csv_table(
                &["ray", "rho", "theta", "det_h", "grad_scaled", "hess_remainder"],
                ch.profile.samples.iter().map(|s| {
                    vec![s.sample.ray as f64, s.sample.rho, s.sample.theta, s.g, s.grad_scaled, s.hess_remainder]
                }),
            );
            let passed = ch.remainder_trend_ok && ch.profile.grad_trend_ok;
            Ok(Computed { passed, result: to_value(&ch)?, csv: Some(csv) })
        }
        Command::Curvature => {
            scenario.expect(&[ScenarioKind::Metric], command)?;
            let model: SemistableModel = scenario.payload()?;
            let rep = verify_theorem1(&model, sweep, tol)?;
            let rank = model.rank();
            let mut header = vec!["ray".to_string(), "rho".into(), "theta".into()];
            header.extend((0..rank).map(|k| format!("eigenvalue_{k}")));
            header.extend(["trace".into(), "trace_reference".into(), "condition".into()]);
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let csv = csv_table(
                &header_refs,
                rep.samples.iter().map(|(s, c)| {
                    let mut row = vec![s.ray as f64, s.rho, s.theta];
                    row.extend(&c.eigenvalues);
                    row.extend([c.trace, c.trace_reference, c.condition]);
                    row
                }),
            );
            Ok(Computed { passed: rep.passed(), result: to_value(&rep)?, csv: Some(csv) })
        }
        Command::Goodness => {
            scenario.expect(&[ScenarioKind::Metric], command)?;
            let model: SemistableModel = scenario.payload()?;
            let rep = mumford_goodness(&model.h, sweep, tol)?;
            Ok(Computed { passed: rep.passed(), result: to_value(&rep)?, csv: None })
        }
        Command::Bclass => {
            scenario.expect(&[ScenarioKind::Expansion, ScenarioKind::Metric], command)?;
            if scenario.kind == ScenarioKind::Expansion {
                let p: ExpansionPayload = scenario.payload()?;
                let rep = bclass_check(&p.g, p.n);
                return Ok(Computed { passed: rep.member, result: to_value(&rep)?, csv: None });
            }
            let model: SemistableModel = scenario.payload()?;
            let rep = prop51_verify(&model.h, model.n, sweep, tol)?;
            Ok(Computed { passed: rep.passed(), result: to_value(&rep)?, csv: None })
        }
        Command::Orbit => {
            scenario.expect(&[ScenarioKind::Monodromy], command)?;
            let input: OrbitInput = scenario.payload()?;
            match single_valuedness(&pair_constants(&input.data)) {
                Err(Error::NotSingleValued { j, k, m, a }) => {
                    let witness = json!({ "j": j, "k": k, "m": m, "a": a });
                    return Ok(Computed {
                        passed: false,
                        result: json!({ "single_valued": false, "witness": witness }),
                        csv: None,
                    });
                }
                Err(e) => return Err(e),
                Ok(_) => {}
            }
            let raw = match fiber_integral_expansion(&input.data, &input.coeffs) {
                Err(Error::LogDegreeBound { found, bound }) => {
                    return Ok(Computed {
                        passed: false,
                        result: json!({ "single_valued": true, "log_degree": found, "bound": bound }),
                        csv: None,
                    })
                }
                other => other?,
            };
            let l2 = l2_metric(&input.data, &input.coeffs)?;
            let leading = leading_asymptotics(&l2).ok();
            Ok(Computed {
                passed: true,
                result: json!({
                    "single_valued": true,
                    "expansion": raw,
                    "orientation_factor": format!("i^{}", input.data.n() * input.data.n()),
                    "l2_metric": l2,
                    "l2_is_real": l2.is_real(1e-12),
                    "leading": leading,
                }),
                csv: None,
            })
        }
        Command::Torsion => {
            scenario.expect(&[ScenarioKind::Torsion], command)?;
            let input: TorsionInput = scenario.payload()?;
            let rep = torsion_hessian_profile(&input, sweep, tol)?;
            let csv = csv_table(
                &["ray", "rho", "theta", "combination"],
                rep.samples.iter().map(|(s, v)| vec![s.ray as f64, s.rho, s.theta, *v]),
            );
            Ok(Computed { passed: rep.passed(), result: to_value(&rep)?, csv: Some(csv) })
        }
        Command::Selftest => unreachable!("handled above"),
    }
}

/// Runs `command` on an optional scenario file and renders the report.
///
/// Never panics on bad input: failures map to exit codes 2 (input) and
/// 3 (violated precondition), with the error in the report.
pub fn run(command: Command, scenario_path: Option<&Path>, flags: &Flags) -> RunOutcome {
    let scenario = match scenario_path.map(Scenario::from_path).transpose() {
        Ok(s) => s,
        Err(e) => return failure(command, scenario_path, None, None, &e),
    };
    let (spec, tol) = match &scenario {
        Some(s) => flags.apply(&s.sweep, &s.tolerances),
        None => flags.apply(&SweepSpec::default(), &Tolerances::default()),
    };
    let sweep = spec.to_sweep();
    if let Err(e) = sweep.validate().and_then(|_| tol.validate()) {
        return failure(command, scenario_path, Some(&spec), Some(&tol), &e);
    }
    match compute(command, scenario.as_ref(), &sweep, &tol, flags) {
        Ok(c) => {
            let report = envelope(command, scenario_path, Some(&spec), Some(&tol), flags, Some(c.passed), c.result);
            RunOutcome {
                exit_code: if c.passed { EXIT_OK } else { EXIT_CHECK_FAILED },
                text: render_text(&report),
                report,
                csv: c.csv,
            }
        }
        Err(e) => failure(command, scenario_path, Some(&spec), Some(&tol), &e),
    }
}

fn failure(command: Command, path: Option<&Path>, spec: Option<&SweepSpec>, tol: Option<&Tolerances>, e: &Error) -> RunOutcome {
    let exit_code = if e.is_input_error() { EXIT_INPUT } else { EXIT_PRECONDITION };
    let report = envelope(command, path, spec, tol, &Flags::default(), None, json!({ "error": e.to_string() }));
    RunOutcome { exit_code, text: render_text(&report), report, csv: None }
}

fn envelope(
    command: Command,
    path: Option<&Path>,
    spec: Option<&SweepSpec>,
    tol: Option<&Tolerances>,
    flags: &Flags,
    passed: Option<bool>,
    result: Value,
) -> Value {
    let mut top = Map::new();
    top.insert("command".into(), json!(command.name()));
    top.insert(
        "scenario".into(),
        json!(path.and_then(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned())),
    );
    if let Some(spec) = spec {
        let sweep = spec.to_sweep();
        top.insert(
            "grid".into(),
            json!({
                "angles": sweep.angles,
                "rho_min": sweep.rho_min,
                "rho_max": sweep.rho_max,
                "points_per_decade": sweep.points_per_decade,
                "radii": sweep.radii().len(),
            }),
        );
    }
    if let Some(tol) = tol {
        top.insert("tolerances".into(), json!(tol));
    }
    if command == Command::Selftest {
        top.insert("seed".into(), json!(flags.seed));
        top.insert("fd_step_scale".into(), json!(flags.fd_step_scale));
    }
    top.insert("passed".into(), json!(passed));
    top.insert("result".into(), result);
    Value::Object(top)
}

/// `x` with 9 significant digits.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor();
    if (-4.0..9.0).contains(&mag) {
        let decimals = (8.0 - mag).max(0.0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

/// Flattens the JSON report into `path = value` lines.
pub fn render_text(report: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, x) in map {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, x, out);
                }
            }
            Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
                let cells: Vec<String> = items.iter().map(scalar).collect();
                let _ = writeln!(out, "{prefix} = [{}]", cells.join(", "));
            }
            Value::Array(items) => {
                for (i, x) in items.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), x, out);
                }
            }
            _ => {
                let _ = writeln!(out, "{prefix} = {}", scalar(v));
            }
        }
    }
    fn scalar(v: &Value) -> String {
        match v {
            Value::Number(n) if n.is_f64() => format_sig(n.as_f64().unwrap_or(f64::NAN)),
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }
    let mut out = String::new();
    walk("", report, &mut out);
    out
}

impl RunOutcome {
    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("reports are valid JSON");
        s.push('\n');
        s
    }

    /// Writes `<command>.json`, `<command>.txt` and, if requested, `<command>.csv`.
    pub fn write_to(&self, dir: &Path, command: Command, csv: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |ext: &str, body: &str| -> Result<()> {
            let path = dir.join(format!("{}.{ext}", command.name()));
            fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        put("json", &self.json())?;
        put("txt", &self.text)?;
        if csv {
            if let Some(rows) = &self.csv {
                put("csv", rows)?;
            }
        }
        Ok(written)
    }
}

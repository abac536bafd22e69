//! Command-line experiments: configuration, dispatch and output files.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::operator::{
    cutoff_bound_check, evaluate, evaluate_space_only, evaluate_time_only, local_limit_probe, QuadratureConfig,
};
use crate::solver::{allen_cahn_stripe, half_space_monotonicity, HalfSpaceConfig, Solution, SolverConfig, StripeConfig};
use crate::special::FracParams;
use crate::verification::{
    bounded_mp_problem, build_counterexample, check_average_inequality, check_bounded_mp, check_measure_identity,
    counterexample_grid, random_bump, search_epsilon, CounterexampleOperator, Report,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable selecting the worker-thread count.
pub const THREADS_ENV: &str = "FULLFRAC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Eval,
    SymbolCheck,
    MeasureIdentity,
    AvgInequality,
    Counterexample,
    BoundedMp,
    GibbonsStripe,
    HalfSpace,
    LocalLimit,
    CutoffScaling,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Eval,
        Experiment::SymbolCheck,
        Experiment::MeasureIdentity,
        Experiment::AvgInequality,
        Experiment::Counterexample,
        Experiment::BoundedMp,
        Experiment::GibbonsStripe,
        Experiment::HalfSpace,
        Experiment::LocalLimit,
        Experiment::CutoffScaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Eval => "eval",
            Experiment::SymbolCheck => "symbol-check",
            Experiment::MeasureIdentity => "measure-identity",
            Experiment::AvgInequality => "avg-inequality",
            Experiment::Counterexample => "counterexample",
            Experiment::BoundedMp => "bounded-mp",
            Experiment::GibbonsStripe => "gibbons-stripe",
            Experiment::HalfSpace => "half-space",
            Experiment::LocalLimit => "local-limit",
            Experiment::CutoffScaling => "cutoff-scaling",
        }
    }

    fn summary(self) -> &'static str {
        match self {
            Experiment::Eval => "operator values of a named field at sample points (data.csv)",
            Experiment::SymbolCheck => "e^{λt}cos(ξx) against (λ+ξ²)^s and e^{λt} against λ^s",
            Experiment::MeasureIdentity => "C_0 r^{2s} × exterior kernel mass = 1",
            Experiment::AvgInequality => "weighted average inequality on seeded random bumps",
            Experiment::Counterexample => "ε search for the separable counterexample (data.csv)",
            Experiment::BoundedMp => "discrete maximum principle on seeded nonnegative problems",
            Experiment::GibbonsStripe => "Allen–Cahn stripe with monotonicity and symmetry scans (profile.csv)",
            Experiment::HalfSpace => "half-space run with f = 1 − u (profile.csv)",
            Experiment::LocalLimit => "error against ∂t u − Δu along s → 1",
            Experiment::CutoffScaling => "r^{2s} sup |operator on η_r| across radii",
        }
    }
}

/// Field families available to `eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Constant,
    ExpCos,
    Bump,
    HalfSpacePower,
}

/// Lattice sizes for the solver experiments and sample counts for the grid experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSizes {
    /// Cells along x_n.
    pub cells: usize,
    pub steps: usize,
    /// Nodes along x' for two-dimensional stripes.
    pub rows: usize,
    /// Counterexample sample grid.
    pub nx: usize,
    pub nt: usize,
}

impl Default for GridSizes {
    fn default() -> Self {
        Self { cells: 512, steps: 400, rows: 64, nx: 128, nt: 128 }
    }
}

/// Experiment knobs; each experiment reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub field: FieldKind,
    pub lambda: f64,
    pub xi: f64,
    pub amplitude: f64,
    pub width: f64,
    /// Sample points x (first coordinate; the rest are 0) and time t for `eval`.
    pub points: Vec<f64>,
    pub time: f64,
    pub radii: Vec<f64>,
    pub samples: usize,
    pub search: (f64, f64),
    pub s_grid: Vec<f64>,
    pub half_width: f64,
    pub t_end: f64,
    pub lambdas: Vec<f64>,
    pub tol_mp: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            field: FieldKind::Constant,
            lambda: 1.0,
            xi: 1.0,
            amplitude: 1.0,
            width: 1.0,
            points: vec![-0.5, 0.0, 0.5],
            time: 0.5,
            radii: vec![0.5, 1.0, 2.0],
            samples: 20,
            search: (0.0, 0.1),
            s_grid: vec![0.9, 0.95, 0.99],
            half_width: 8.0,
            t_end: 20.0,
            lambdas: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            tol_mp: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub n: usize,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub params: ParamsConfig,
    pub quadrature: QuadratureConfig,
    pub grid: Option<GridSizes>,
    pub solver: SolverConfig,
    pub options: Options,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::MeasureIdentity,
            params: ParamsConfig { n: 1, s: 0.5 },
            quadrature: QuadratureConfig::default(),
            grid: None,
            solver: SolverConfig::default(),
            options: Options::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Parse JSON text, apply `key=value` overrides by dotted path, and validate.
    pub fn load(text: &str, overrides: &[String]) -> Result<Self> {
        let mut v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("config is not valid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| Error::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> Result<FracParams> {
        FracParams::new(self.params.n, self.params.s).map_err(|e| Error::Validation(format!("params: {e}")))
    }

    pub fn grid(&self) -> GridSizes {
        self.grid.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.params()?;
        self.quadrature.validate()?;
        let g = self.grid();
        if g.cells < 2 || g.steps == 0 || g.rows < 4 || g.nx == 0 || g.nt == 0 {
            return Err(Error::Validation("grid: cells ≥ 2, steps ≥ 1, rows ≥ 4, nx, nt ≥ 1 required".into()));
        }
        let sv = &self.solver;
        if !(sv.residual_tol > 0.0) || sv.max_iterations == 0 || !(sv.retained_fraction > 0.0 && sv.retained_fraction <= 1.0) {
            return Err(Error::Validation("solver: residual_tol > 0, max_iterations ≥ 1, retained_fraction in (0, 1]".into()));
        }
        let o = &self.options;
        if o.radii.is_empty() || o.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Validation("options.radii must be nonempty and positive".into()));
        }
        if o.s_grid.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(Error::Validation("options.s_grid entries must lie in (0, 1)".into()));
        }
        if !(o.search.0 >= 0.0 && o.search.1 > o.search.0 && o.search.1 < 1.0) {
            return Err(Error::Validation("options.search must satisfy 0 ≤ lo < hi < 1".into()));
        }
        if !(o.width > 0.0) || !(o.tol_mp >= 0.0) || o.lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::Validation("options.width > 0, options.tol_mp ≥ 0, options.lambdas ≥ 0 required".into()));
        }
        let one_d = matches!(
            self.experiment,
            Experiment::AvgInequality | Experiment::Counterexample | Experiment::BoundedMp | Experiment::HalfSpace
        );
        if one_d && p.n() != 1 {
            return Err(Error::Validation(format!("params.n: experiment {} is one-dimensional", self.experiment.name())));
        }
        if self.experiment == Experiment::GibbonsStripe && p.n() > 2 {
            return Err(Error::Validation("params.n: the stripe runs in one or two dimensions".into()));
        }
        if self.experiment == Experiment::Eval && o.points.is_empty() {
            return Err(Error::Validation("options.points must not be empty".into()));
        }
        Ok(())
    }
}

fn apply_override(v: &mut serde_json::Value, o: &str) -> Result<()> {
    let (key, raw) = o
        .split_once('=')
        .ok_or_else(|| Error::Validation(format!("--set expects key=value, got '{o}'")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cur = v;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Validation(format!("--set {key}: '{part}' is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}

/// Outcome of one experiment before it is written out.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub reports: Vec<Report>,
    /// (header, rows) for data.csv.
    pub data: Option<(Vec<String>, Vec<Vec<f64>>)>,
    pub profile: Option<Vec<[f64; 3]>>,
}

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const FAIL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const ACCURACY: i32 = 3;
    pub const IO: i32 = 4;
}

/// Run the configured experiment, write its files and return the exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    match execute(cfg) {
        Ok(art) => match write_artifacts(&cfg.output_dir, &art) {
            Ok(()) => {
                if art.reports.iter().all(|r| r.pass) {
                    exit::PASS
                } else {
                    exit::FAIL
                }
            }
            Err(e) => {
                eprintln!("{e}");
                exit::IO
            }
        },
        Err(e) => {
            eprintln!("{e}");
            let failed = Report::at_most(&format!("{}_error", cfg.experiment.name()), f64::NAN, 0.0, 0.0)
                .failed()
                .with("error", e.to_string());
            let art = Artifacts { reports: vec![failed], ..Default::default() };
            if let Err(w) = write_artifacts(&cfg.output_dir, &art) {
                eprintln!("{w}");
                return exit::IO;
            }
            match e {
                Error::Validation(_) | Error::Domain(_) => exit::CONFIG,
                Error::Io(_) => exit::IO,
                _ => exit::ACCURACY,
            }
        }
    }
}

/// Run the experiment and collect its reports and data.
pub fn execute(cfg: &RunConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let p = cfg.params()?;
    let q = &cfg.quadrature;
    let o = &cfg.options;
    let g = cfg.grid();
    let mut art = Artifacts::default();
    match cfg.experiment {
        Experiment::Eval => {
            let (u, expected): (ScalarField, Box<dyn Fn(&[f64], f64) -> Option<f64>>) = match o.field {
                FieldKind::Constant => (ScalarField::constant(p.n(), o.amplitude), Box::new(|_, _| Some(0.0))),
                FieldKind::ExpCos => {
                    let mut xi = vec![0.0; p.n()];
                    xi[0] = o.xi;
                    let u = ScalarField::exp_cos(o.lambda, &xi);
                    let sym = (o.lambda + o.xi * o.xi).powf(p.s());
                    let uc = u.clone();
                    (u, Box::new(move |x, t| Some(sym * uc.eval(x, t))))
                }
                FieldKind::Bump => {
                    let c = vec![0.0; p.n()];
                    (ScalarField::gaussian_bump(o.amplitude, &c, o.width, 0.0, o.width), Box::new(|_, _| None))
                }
                FieldKind::HalfSpacePower => (
                    ScalarField::half_space_power(p.n(), p.s()),
                    Box::new(|x: &[f64], _| if x[x.len() - 1] > 0.0 { Some(0.0) } else { None }),
                ),
            };
            let mut rows = Vec::new();
            let mut worst: Option<(f64, f64)> = None;
            for &x0 in &o.points {
                let mut x = vec![0.0; p.n()];
                x[0] = x0;
                let e = if o.field == FieldKind::HalfSpacePower {
                    x[p.n() - 1] = x0;
                    evaluate_space_only(&u, &x, p, q)?
                } else {
                    evaluate(&u, &x, o.time, p, q)?
                };
                let mut row = x.clone();
                row.extend([o.time, u.eval(&x, o.time), e.value, e.error_estimate]);
                rows.push(row);
                let tol = match o.field {
                    FieldKind::ExpCos => 1e-4 * e.value.abs().max(q.abs_tol),
                    FieldKind::HalfSpacePower => 1e-4,
                    _ => q.abs_tol.max(q.rel_tol * e.value.abs()),
                };
                let err = match expected(&x, o.time) {
                    Some(v) => (e.value - v).abs(),
                    None => e.error_estimate,
                };
                if worst.map_or(true, |(w, a)| err / tol > w / a) {
                    worst = Some((err, tol));
                }
            }
            let mut header: Vec<String> = (0..p.n()).map(|d| format!("x{d}")).collect();
            header.extend(["t", "u", "operator", "error_estimate"].map(String::from));
            art.data = Some((header, rows));
            let (worst, allowed) = worst.unwrap_or((0.0, 0.0));
            art.reports.push(Report::at_most("eval", worst, 0.0, allowed).with("s", p.s()).with("points", o.points.len()));
        }
        Experiment::SymbolCheck => art.reports = symbol_reports(p.n(), q)?,
        Experiment::MeasureIdentity => {
            let x0 = vec![0.0; p.n()];
            for &r in &o.radii {
                art.reports.push(check_measure_identity(&x0, 0.0, r, p, q)?);
            }
        }
        Experiment::AvgInequality => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for i in 0..o.samples {
                let (u, x0, t0) = random_bump(&mut rng);
                for r in check_average_inequality(&u, &[x0], t0, &o.radii, p, q)? {
                    art.reports.push(r.with("sample", i).with("seed", cfg.seed));
                }
            }
        }
        Experiment::Counterexample => {
            let (xs, ts) = counterexample_grid(g.nx, g.nt);
            if xs.iter().any(|x| x.abs() >= 1.0) || ts.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
                return Err(Error::Validation("grid points must lie in (−1, 1) × (0, 1]".into()));
            }
            let op = CounterexampleOperator::new(&xs, &ts, p, q)?;
            let res = search_epsilon(&op, o.search, q.abs_tol.max(1e-6))?;
            let eps = res.epsilon;
            art.reports = res.reports;
            // the construction must fail for large ε
            let m = op.min(0.9);
            let mut far = Report::at_most("counterexample_large_epsilon_negative", m, 0.0, 0.0).with("epsilon", 0.9);
            if !(m < 0.0) {
                far = far.failed();
            }
            art.reports.push(far);
            if let Some(e) = eps {
                let ce = build_counterexample(e)?;
                art.reports.extend(ce.check_constraints(1024));
                let mut rows = Vec::new();
                for (i, &x) in xs.iter().enumerate() {
                    for (k, &t) in ts.iter().enumerate() {
                        rows.push(vec![x, t, ce.u.eval(&[x], t), res.values[i][k]]);
                    }
                }
                art.data = Some((["x", "t", "u", "operator"].map(String::from).to_vec(), rows));
            }
        }
        Experiment::BoundedMp => {
            let sv = SolverConfig { stop_when_steady: false, ..cfg.solver };
            let mut first: Option<Solution> = None;
            for i in 0..o.samples.max(1) as u64 {
                let seed = cfg.seed + i;
                let sol = crate::solver::march(&bounded_mp_problem(seed, g.cells, g.steps), p, &sv)?;
                art.reports.push(check_bounded_mp(&sol, o.tol_mp).with("seed", seed));
                first.get_or_insert(sol);
            }
            art.profile = first.as_ref().map(profile_rows);
        }
        Experiment::GibbonsStripe => {
            let sc = StripeConfig {
                half_width: o.half_width,
                cells: g.cells,
                steps: g.steps,
                t_end: o.t_end,
                rows: (p.n() == 2).then_some(g.rows),
                lambdas: o.lambdas.clone(),
                ..Default::default()
            };
            let run = allen_cahn_stripe(&sc, p, &cfg.solver)?;
            art.profile = Some(profile_rows(&run.solution));
            art.reports = run.reports;
        }
        Experiment::HalfSpace => {
            let hc = HalfSpaceConfig { length: o.half_width, cells: g.cells, steps: g.steps, t_end: o.t_end };
            let (sol, reports) = half_space_monotonicity(&hc, p, &cfg.solver)?;
            art.profile = Some(profile_rows(&sol));
            art.reports = reports;
        }
        Experiment::LocalLimit => {
            let (u, x, t, target) = local_limit_case(p.n());
            let errs = local_limit_probe(&u, &x, t, target, &o.s_grid, q)?;
            let worst_step = errs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
            let mut rep = Report::at_most("local_limit_decreasing", worst_step, 0.0, 0.0).with("orders", o.s_grid.len());
            if !(worst_step < 0.0) {
                rep = rep.failed();
            }
            for (s, e) in o.s_grid.iter().zip(&errs) {
                rep = rep.with(&format!("error_s_{s}"), *e);
            }
            art.reports.push(rep);
        }
        Experiment::CutoffScaling => {
            let x0 = vec![0.0; p.n()];
            let vals: Vec<f64> =
                o.radii.iter().map(|&r| cutoff_bound_check(r, &x0, 0.0, p, q)).collect::<Result<_>>()?;
            let reference = vals[0];
            let spread = vals.iter().map(|v| (v / reference - 1.0).abs()).fold(0.0, f64::max);
            let mut rep = Report::at_most("cutoff_scaling", spread, 0.0, 0.1).with("s", p.s());
            for (r, v) in o.radii.iter().zip(&vals) {
                rep = rep.with(&format!("scaled_sup_r_{r}"), *v);
            }
            art.reports.push(rep);
        }
    }
    for r in art.reports.iter_mut() {
        r.parameters.entry("experiment".into()).or_insert(cfg.experiment.name().into());
    }
    Ok(art)
}

/// Nine (λ, ξ, s) symbol checks and two Marchaud checks.
pub fn symbol_reports(n: usize, q: &QuadratureConfig) -> Result<Vec<Report>> {
    let mut out = Vec::new();
    let (x1, t) = (0.3, 0.5);
    for lambda in [0.0, 1.0, 2.0] {
        for (xi, s) in [(1.0, 0.25), (0.7, 0.5), (1.5, 0.75)] {
            let p = FracParams::new(n, s)?;
            let mut k = vec![0.0; n];
            k[0] = xi;
            let u = ScalarField::exp_cos(lambda, &k);
            let mut x = vec![0.0; n];
            x[0] = x1;
            let want = (lambda + xi * xi).powf(s) * u.eval(&x, t);
            let got = evaluate(&u, &x, t, p, q)?.value;
            out.push(
                Report::close("symbol", (got - want) / want, 0.0, 1e-4)
                    .with("lambda", lambda)
                    .with("xi", xi)
                    .with("s", s),
            );
        }
    }
    for (lambda, s) in [(1.0, 0.5), (2.0, 0.25)] {
        let p = FracParams::new(n, s)?;
        let u = ScalarField::new(n, move |_, t| (lambda * t).exp()).bounded((lambda * t).exp()).time_only();
        let want = lambda.powf(s) * (lambda * t).exp();
        let got = evaluate_time_only(&u, t, p, q)?.value;
        out.push(Report::close("marchaud_symbol", (got - want) / want, 0.0, 1e-6).with("lambda", lambda).with("s", s));
    }
    Ok(out)
}

/// Smooth bump e^{−|x|² − t²} with its local heat operator value at a fixed point.
pub fn local_limit_case(n: usize) -> (ScalarField, Vec<f64>, f64, f64) {
    let u = ScalarField::gaussian_bump(1.0, &vec![0.0; n], 1.0, 0.0, 1.0);
    let mut x = vec![0.0; n];
    x[0] = 0.3;
    let t = 0.2;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let target = (-2.0 * t - (4.0 * r2 - 2.0 * n as f64)) * u.eval(&x, t);
    (u, x, t, target)
}

fn profile_rows(sol: &Solution) -> Vec<[f64; 3]> {
    let mut rows = Vec::new();
    for k in 0..=sol.last_step() {
        for (x, u) in sol.profile(k) {
            rows.push([x, sol.time(k), u]);
        }
    }
    rows
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write report.json and, where present, data.csv and profile.csv.
pub fn write_artifacts(dir: &Path, art: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&art.reports).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("report.json"), json + "\n")?;
    if let Some((header, rows)) = &art.data {
        let mut w = csv::Writer::from_path(dir.join("data.csv")).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
        for r in rows {
            w.write_record(r.iter().map(|v| fmt17(*v))).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
    }
    if let Some(rows) = &art.profile {
        let mut w = csv::Writer::from_path(dir.join("profile.csv")).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(["x_n", "t", "u"]).map_err(|e| Error::Io(e.to_string()))?;
        for r in rows {
            w.write_record(r.iter().map(|v| fmt17(*v))).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Key, type, default and meaning of every configuration entry, then the experiment catalog.
pub fn schema() -> String {
    let d = RunConfig::default();
    let defaults = serde_json::to_value(&d).expect("default config serializes");
    let mut out = String::new();
    out.push_str("config keys (JSON file; override with --set key=value):\n");
    let docs: &[(&str, &str, &str)] = &[
        ("experiment", "string", "experiment name, see below"),
        ("params.n", "integer", "spatial dimension"),
        ("params.s", "real in (0,1)", "fractional order"),
        ("quadrature.rel_tol", "real", "relative accuracy target"),
        ("quadrature.abs_tol", "real", "absolute accuracy target"),
        ("quadrature.split_lag", "real", "near/far lag split at unit length scale"),
        ("quadrature.grade_exponent", "real or null", "lag mesh grading, null = min(2/(1-s), 8)"),
        ("quadrature.panels_space", "integer", "panels per Gaussian half-width"),
        ("quadrature.panels_time", "integer", "graded panels below the split lag"),
        ("quadrature.tail.lag_factor", "real", "largest panel lag in split-lag units"),
        ("quadrature.tail.fit_window", "real", "far model fit window ratio"),
        ("quadrature.gl_order", "integer", "Gauss-Legendre order"),
        ("quadrature.taylor_fraction", "real", "Taylor slab width relative to the split lag"),
        ("quadrature.max_refinements", "integer", "nested refinements before giving up"),
        ("quadrature.max_axis_panels", "integer", "cap on spatial panels per half-axis"),
        ("grid", "object or null", "lattice and sample sizes, null = defaults"),
        ("grid.cells", "integer", "cells along x_n"),
        ("grid.steps", "integer", "time steps"),
        ("grid.rows", "integer", "x' nodes of two-dimensional stripes"),
        ("grid.nx", "integer", "counterexample samples in x"),
        ("grid.nt", "integer", "counterexample samples in t"),
        ("solver.residual_tol", "real", "nodal residual target"),
        ("solver.max_iterations", "integer", "Newton iterations per step"),
        ("solver.steady_tol", "real", "relative change counted as steady"),
        ("solver.stop_when_steady", "bool", "stop at the first steady step"),
        ("solver.retained_fraction", "real", "final fraction of levels used by diagnostics"),
        ("options.field", "string", "eval field: constant, exp-cos, bump, half-space-power"),
        ("options.lambda", "real", "time rate of exp-cos"),
        ("options.xi", "real", "frequency of exp-cos"),
        ("options.amplitude", "real", "amplitude of constant and bump"),
        ("options.width", "real", "width of bump"),
        ("options.points", "list of reals", "eval sample coordinates"),
        ("options.time", "real", "eval sample time"),
        ("options.radii", "list of reals", "radii for measure-identity, avg-inequality, cutoff-scaling"),
        ("options.samples", "integer", "random bumps (avg-inequality) or runs (bounded-mp)"),
        ("options.search", "[lo, hi]", "epsilon search interval"),
        ("options.s_grid", "list of reals", "orders for local-limit"),
        ("options.half_width", "real", "stripe half-width or half-space length"),
        ("options.t_end", "real", "end time of stripe and half-space runs"),
        ("options.lambdas", "list of reals", "sliding shifts"),
        ("options.tol_mp", "real", "maximum principle tolerance"),
        ("seed", "integer", "random seed"),
        ("output_dir", "path", "directory for report.json, data.csv, profile.csv"),
    ];
    for (key, ty, doc) in docs {
        let mut v = &defaults;
        for part in key.split('.') {
            v = v.get(part).unwrap_or(&serde_json::Value::Null);
        }
        let shown = if *key == "grid" { "null".to_string() } else { v.to_string() };
        let shown = if key.starts_with("grid.") {
            serde_json::to_value(GridSizes::default()).unwrap()[key.trim_start_matches("grid.")].to_string()
        } else {
            shown
        };
        out.push_str(&format!("  {key:<30} {ty:<16} default {shown:<14} {doc}\n"));
    }
    out.push_str("\nexperiments:\n");
    for e in Experiment::ALL {
        out.push_str(&format!("  {:<18} {}\n", e.name(), e.summary()));
    }
    out.push_str(&format!("\nexit codes: 0 all reports pass, 1 some report fails, 2 invalid config, 3 accuracy failure, 4 i/o error\nthreads: {THREADS_ENV} (default: available cores)\n"));
    out
}

/// Configure the global thread pool from the environment.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| Error::Validation(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(Error::Validation(format!("{THREADS_ENV} must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(e.to_string()))?;
    }
    Ok(())
}

/// Read a config file with overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> std::result::Result<RunConfig, (i32, String)> {
    let text = fs::read_to_string(path).map_err(|e| (exit::IO, format!("cannot read {}: {e}", path.display())))?;
    RunConfig::load(&text, overrides).map_err(|e| (exit::CONFIG, e.to_string()))
}

/// Print to stdout, ignoring a closed pipe.
pub fn print(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

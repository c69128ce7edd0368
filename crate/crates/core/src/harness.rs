//! Run configuration, verification suites and machine-readable reports.
//!
//! A run loads one fixture, executes the selected suites and collects named
//! checks. Reports are deterministic functions of the configuration: wall
//! time is returned alongside the report, never inside it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::GeomError;
use crate::extension::{
    extend_convex, extend_isometry, safe_radius, ExtensionResult, PipelineOptions,
};
use crate::fixtures::{self, Expectation, Fixture};
use crate::maps::{affine_fit, isometry_defect_on_pairs, isometry_defect_on_points};
use crate::midpoint::{certify_midpoint, midpoint_defect};
use crate::sampling::{self, derive_seed};
use crate::spaces::Vector;

/// Lower bound for the affine-fit residual of the two-ball example on
/// [`fixtures::two_ball_grid`]`(70)`, pinned from an independent
/// least-squares computation (exact value `1 - 1/70`, truncated).
pub const TWO_BALL_RESIDUAL_FLOOR: f64 = 0.985714;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Geom(#[from] GeomError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Isometry,
    Midpoint,
    Extension,
    Counterexamples,
    All,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Isometry => "isometry",
            Suite::Midpoint => "midpoint",
            Suite::Extension => "extension",
            Suite::Counterexamples => "counterexamples",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

fn default_tol() -> f64 {
    1e-9
}

fn default_samples() -> usize {
    2000
}

fn default_suite() -> Suite {
    Suite::All
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in fixture name or path to a fixture JSON file.
    pub fixture: String,
    #[serde(default = "default_suite")]
    pub suite: Suite,
    #[serde(default = "default_tol")]
    pub tol_abs: f64,
    #[serde(default = "default_tol")]
    pub tol_rel: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub force: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(fixture: impl Into<String>, suite: Suite, seed: u64) -> Self {
        RunConfig {
            fixture: fixture.into(),
            suite,
            tol_abs: default_tol(),
            tol_rel: default_tol(),
            samples: default_samples(),
            seed,
            force: false,
            out: None,
            csv: None,
        }
    }

    pub fn validate(&self) -> HarnessResult<()> {
        for (name, t) in [("tol_abs", self.tol_abs), ("tol_rel", self.tol_rel)] {
            if !(t.is_finite() && t > 0.0) {
                return Err(HarnessError::Config(format!(
                    "{name} must be positive, got {t}"
                )));
            }
        }
        if self.samples == 0 {
            return Err(HarnessError::Config("samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> HarnessResult<Self> {
        let text = read(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            HarnessError::Config(format!(
                "{}: at `{}`: {}",
                path.display(),
                e.path(),
                e.inner()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read(path: &Path) -> HarnessResult<String> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Resolves a built-in name or a JSON fixture path.
pub fn load_fixture(selector: &str) -> HarnessResult<Fixture> {
    if fixtures::BUILTIN_NAMES.contains(&selector) {
        return Ok(fixtures::builtin(selector)?);
    }
    let path = Path::new(selector);
    if !path.is_file() {
        return Err(HarnessError::Config(format!(
            "unknown fixture '{selector}'; available: {}",
            fixtures::BUILTIN_NAMES.join(", ")
        )));
    }
    let text = read(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let fixture: Fixture = serde_path_to_error::deserialize(de).map_err(|e| {
        HarnessError::Config(format!("{selector}: at `{}`: {}", e.path(), e.inner()))
    })?;
    let n = fixture.domain.dim();
    if fixture.map.source.dim() != n {
        return Err(HarnessError::Config(format!(
            "{selector}: at `map.source`: dimension {} differs from domain dimension {n}",
            fixture.map.source.dim()
        )));
    }
    for (field, p) in [
        ("center", &fixture.center),
        ("interior_hint", &fixture.interior_hint),
    ] {
        if let Some(p) = p {
            if p.len() != n {
                return Err(HarnessError::Config(format!(
                    "{selector}: at `{field}`: expected {n} coordinates, got {}",
                    p.len()
                )));
            }
        }
    }
    Ok(fixture)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Comparison {
    AtMost {
        bound: f64,
    },
    AtLeast {
        bound: f64,
    },
    Within {
        lo: f64,
        hi: f64,
    },
    /// A boolean outcome; `value` is 1 when it holds.
    Holds,
}

impl Comparison {
    fn test(&self, value: f64) -> bool {
        match *self {
            Comparison::AtMost { bound } => value <= bound,
            Comparison::AtLeast { bound } => value >= bound,
            Comparison::Within { lo, hi } => lo <= value && value <= hi,
            Comparison::Holds => value == 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub pass: bool,
    pub witness: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub fixture: String,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extension: Option<ExtensionResult>,
    pub verdict: Verdict,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Plot data: one `(sample, defect)` series per scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub series: Vec<Series>,
    pub elapsed: Duration,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    fx: &'a Fixture,
    suite: Suite,
    checks: Vec<Check>,
    series: Vec<Series>,
    extension: Option<ExtensionResult>,
}

fn points(ps: &[&Vector]) -> Vec<Vec<f64>> {
    ps.iter().map(|p| p.as_slice().to_vec()).collect()
}

impl Run<'_> {
    fn seed(&self, stream: u64) -> u64 {
        derive_seed(self.cfg.seed, stream)
    }

    fn push(
        &mut self,
        name: &str,
        value: f64,
        comparison: Comparison,
        witness: Vec<Vec<f64>>,
    ) -> &mut Check {
        self.checks.push(Check {
            suite: self.suite,
            name: name.into(),
            value,
            comparison,
            pass: comparison.test(value),
            witness,
            note: None,
        });
        self.checks.last_mut().expect("just pushed")
    }

    fn at_most_tol(&mut self, name: &str, value: f64, witness: Vec<Vec<f64>>) -> &mut Check {
        let bound = self.cfg.tol_abs;
        self.push(name, value, Comparison::AtMost { bound }, witness)
    }

    fn flag(&mut self, name: &str, holds: bool, witness: Vec<Vec<f64>>) -> &mut Check {
        self.push(
            name,
            if holds { 1.0 } else { 0.0 },
            Comparison::Holds,
            witness,
        )
    }

    fn sample_pairs(&self, n: usize, seed: u64) -> crate::Result<Vec<(Vector, Vector)>> {
        let mut rng = sampling::rng(seed);
        (0..n)
            .map(|_| {
                Ok((
                    self.fx.domain.sample(&mut rng)?,
                    self.fx.domain.sample(&mut rng)?,
                ))
            })
            .collect()
    }

    fn isometry(&mut self) -> HarnessResult<()> {
        self.suite = Suite::Isometry;
        let map = &self.fx.map;
        let pairs = self.sample_pairs(self.cfg.samples, self.seed(1))?;
        let d = isometry_defect_on_pairs(map, &pairs, &map.target)?;
        let values = pairs
            .iter()
            .map(|(a, b)| {
                Ok((map.target.distance(&map.evaluate(a)?, &map.evaluate(b)?)?
                    - map.source.distance(a, b)?)
                .abs())
            })
            .collect::<crate::Result<Vec<_>>>()?;
        self.series.push(Series {
            name: "isometry_pairs".into(),
            values,
        });
        let w = d.worst.iter().collect::<Vec<_>>();
        self.at_most_tol("isometry_defect", d.defect, points(&w));
        Ok(())
    }

    fn midpoint(&mut self) -> HarnessResult<()> {
        self.suite = Suite::Midpoint;
        let fx = self.fx;
        if !fx.domain.is_open() && !self.cfg.force {
            return Err(GeomError::precondition(
                "midpoint suite needs an open domain (use --force to run anyway)",
            )
            .into());
        }
        let metric = &fx.map.target;
        let mut rng = sampling::rng(self.seed(2));
        let mut pairs = Vec::new();
        let mut values = Vec::new();
        let mut worst: (f64, Option<(Vector, Vector)>) = (0.0, None);
        let mut attempts = 0;
        while pairs.len() < self.cfg.samples && attempts < 50 * self.cfg.samples {
            attempts += 1;
            let f = fx.domain.sample(&mut rng)?;
            let g = fx.domain.sample(&mut rng)?;
            match midpoint_defect(&fx.map, &fx.domain, &f, &g, metric) {
                Ok(d) => {
                    values.push(d);
                    if d > worst.0 || worst.1.is_none() {
                        worst = (d, Some((f.clone(), g.clone())));
                    }
                    pairs.push((f, g));
                }
                Err(GeomError::SegmentEscapes { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        if pairs.is_empty() {
            return Err(GeomError::precondition("no segment-contained pair found").into());
        }
        let witness = worst
            .1
            .as_ref()
            .map(|(f, g)| points(&[f, g]))
            .unwrap_or_default();
        self.at_most_tol("midpoint_defect", worst.0, witness);
        self.series.push(Series {
            name: "midpoint_pairs".into(),
            values,
        });

        let (f, g) = worst.1.expect("at least one pair");
        match certify_midpoint(&fx.map, &fx.domain, fx.image.as_ref(), &f, &g, metric) {
            Ok(cert) => {
                let at = cert.chain.argmax;
                self.at_most_tol("chain_defect", cert.chain.max, points(&[&f, &g]))
                    .note = Some(format!("depth {}, worst k = {at}", cert.depth));
                self.series.push(Series {
                    name: "chain_delta_k".into(),
                    values: cert.chain.per_k.clone(),
                });
                if let Some(levels) = &cert.levels {
                    self.flag(
                        "spacing_levels_within_bounds",
                        levels.within_bounds,
                        Vec::new(),
                    );
                }
            }
            Err(GeomError::Refused { reason }) => {
                self.flag("midpoint_certification", false, points(&[&f, &g]))
                    .note = Some(reason);
            }
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }

    fn pipeline(&self, force: bool) -> crate::Result<ExtensionResult> {
        let fx = self.fx;
        if fx.convex && !force {
            return extend_convex(&fx.map, &fx.domain, self.cfg.samples, self.seed(3));
        }
        let mut opts = PipelineOptions::new(self.cfg.samples, self.seed(3));
        opts.force = force;
        opts.rebase = fx.interior_hint.clone();
        opts.image = fx.image.clone();
        opts.samples.probes = fx.probes.clone();
        extend_isometry(&fx.map, &fx.domain, &fx.center_or_origin(), &opts)
    }

    fn extension(&mut self) -> HarnessResult<()> {
        self.suite = Suite::Extension;
        let res = self.pipeline(self.cfg.force)?;
        let d = &res.defects;
        let scale = 2.0 * self.fx.domain.bounding_radius().max(1.0);
        for (name, value) in d.named() {
            let witness = match (name, &d.agreement_witness) {
                ("agreement", Some(w)) => points(&[w]),
                _ => Vec::new(),
            };
            if name == "isometry" {
                let bound = self.cfg.tol_abs + self.cfg.tol_rel * scale;
                self.push(name, value, Comparison::AtMost { bound }, witness);
            } else {
                self.at_most_tol(name, value, witness);
            }
        }
        self.flag("invertibility_ok", d.invertibility_ok, Vec::new())
            .note = Some(format!("condition number {:e}", d.condition_number));
        if let Some(img) = &d.image_openness {
            self.flag(
                "image_openness_probes",
                img.passed == img.probes,
                Vec::new(),
            )
            .note = Some(format!(
                "{} of {} image probes open",
                img.passed, img.probes
            ));
        }
        if let Some(gen) = &self.fx.generator {
            let da = (&res.a - &gen.matrix).amax();
            let du = (&res.u - &gen.translation).amax();
            self.at_most_tol("recovered_matrix_error", da, Vec::new());
            self.at_most_tol("recovered_translation_error", du, Vec::new());
        }
        let mut rng = sampling::rng(self.seed(4));
        let map = &self.fx.map;
        let mut values = Vec::with_capacity(self.cfg.samples);
        for _ in 0..self.cfg.samples {
            let x = self.fx.domain.sample(&mut rng)?;
            if let Ok(tx) = map.evaluate(&x) {
                values.push(map.target.dist_of(&(&res.a * &x + &res.u), &tx));
            }
        }
        self.series.push(Series {
            name: "agreement_samples".into(),
            values,
        });
        self.extension = Some(res);
        Ok(())
    }

    fn counterexamples(&mut self) -> HarnessResult<()> {
        self.suite = Suite::Counterexamples;
        let fx = self.fx;
        if fx.expectation != Expectation::Counterexample {
            return Err(HarnessError::Config(format!(
                "fixture '{}' is not a counterexample",
                fx.name
            )));
        }
        let map = &fx.map;
        let center = fx.center_or_origin();

        // the map is an isometry
        let pairs = self.sample_pairs(self.cfg.samples, self.seed(5))?;
        let d = isometry_defect_on_pairs(map, &pairs, &map.target)?;
        let w = d.worst.iter().collect::<Vec<_>>();
        self.at_most_tol("isometry_defect", d.defect, points(&w));
        let grid = match fx.name.as_str() {
            "ex-two-balls" => Some(fixtures::two_ball_grid(70)),
            "ex-star-closed" => Some(fixtures::star_closed_grid()),
            _ => None,
        };
        if let Some(grid) = &grid {
            if fx.name == "ex-star-closed" {
                let d = isometry_defect_on_points(map, grid, &map.target)?;
                let w = d.worst.iter().collect::<Vec<_>>();
                self.at_most_tol("grid_isometry_defect", d.defect, points(&w));
            }
        }

        // but not the restriction of an affine map
        let fit_points: Vec<Vector> = match &grid {
            Some(g) => g.clone(),
            None => pairs
                .iter()
                .flat_map(|(a, b)| [a.clone(), b.clone()])
                .collect(),
        };
        let samples = fit_points
            .iter()
            .map(|x| Ok((x.clone(), map.evaluate(x)?)))
            .collect::<crate::Result<Vec<_>>>()?;
        let fit = affine_fit(&samples, &map.target)?;
        let floor = if fx.name == "ex-two-balls" {
            TWO_BALL_RESIDUAL_FLOOR
        } else {
            self.cfg.tol_abs
        };
        let witness = fit.worst.as_ref().map(|w| points(&[w])).unwrap_or_default();
        self.push(
            "affine_fit_residual",
            fit.residual,
            Comparison::AtLeast { bound: floor },
            witness,
        );

        // star shape about the center, as the fixture claims
        let star = fx
            .domain
            .star_defect(&center, self.cfg.samples, self.seed(6))?;
        let witness = star
            .witness
            .as_ref()
            .map(|w| points(&[&w.x, &w.point]))
            .unwrap_or_default();
        if fx.domain.is_open() {
            self.push(
                "star_defect",
                star.defect,
                Comparison::AtLeast { bound: 1.0 },
                witness,
            )
            .note = Some("domain is not star-shaped about the center".into());
        } else {
            self.push(
                "star_defect",
                star.defect,
                Comparison::AtMost { bound: 0.0 },
                witness,
            );
            let refused = matches!(
                safe_radius(&fx.domain.translated(&center)?),
                Err(GeomError::Refused { .. })
            );
            self.flag("safe_radius_refused", refused, points(&[&center]));
        }

        if fx.name == "ex-star-closed" {
            let e1 = Vector::from_column_slice(&[1.0, 0.0]);
            let gap = map.target.norm(
                &(map.evaluate(&-&e1)? + map.evaluate(&e1)? - map.evaluate(&center)? * 2.0),
            )?;
            self.push(
                "odd_symmetry_gap",
                gap,
                Comparison::Within {
                    lo: 0.8414,
                    hi: 0.8415,
                },
                points(&[&-&e1, &e1]),
            );
        }

        // forcing the pipeline exposes the disagreement
        let res = self.pipeline(true)?;
        let bound = match fx.name.as_str() {
            "ex-two-balls" => 0.9,
            "ex-star-closed" => 0.8,
            _ => self.cfg.tol_abs,
        };
        let witness = res
            .defects
            .agreement_witness
            .as_ref()
            .map(|w| points(&[w]))
            .unwrap_or_default();
        self.push(
            "forced_agreement_defect",
            res.defects.agreement,
            Comparison::AtLeast { bound },
            witness,
        );
        let mut at_probe: Option<(f64, &Vector)> = None;
        for p in &fx.probes {
            let d = map
                .target
                .distance(&(&res.a * p + &res.u), &map.evaluate(p)?)?;
            if at_probe.is_none_or(|(best, _)| d > best) {
                at_probe = Some((d, p));
            }
        }
        if let Some((d, p)) = at_probe {
            self.push(
                "forced_probe_agreement",
                d,
                Comparison::AtLeast { bound },
                points(&[p]),
            );
        }
        Ok(())
    }
}

/// Runs the configured suites on the configured fixture.
pub fn run(cfg: &RunConfig) -> HarnessResult<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let fx = load_fixture(&cfg.fixture)?;
    let mut run = Run {
        cfg,
        fx: &fx,
        suite: cfg.suite,
        checks: Vec::new(),
        series: Vec::new(),
        extension: None,
    };
    match cfg.suite {
        Suite::Isometry => run.isometry()?,
        Suite::Midpoint => run.midpoint()?,
        Suite::Extension => run.extension()?,
        Suite::Counterexamples => run.counterexamples()?,
        Suite::All => {
            run.isometry()?;
            match fx.expectation {
                Expectation::Extends => {
                    if fx.domain.is_open() {
                        run.midpoint()?;
                    }
                    run.extension()?;
                }
                Expectation::Counterexample => run.counterexamples()?,
            }
        }
    }
    let verdict = if run.checks.iter().all(|c| c.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let report = RunReport {
        config: cfg.clone(),
        fixture: fx.name.clone(),
        checks: run.checks,
        extension: run.extension,
        verdict,
    };
    Ok(RunOutcome {
        report,
        series: run.series,
        elapsed: start.elapsed(),
    })
}

/// Writes `series,sample,defect` rows.
pub fn write_csv(path: &Path, series: &[Series]) -> HarnessResult<()> {
    let io = |source: std::io::Error| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record(["series", "sample", "defect"])
        .map_err(|e| io(e.into()))?;
    for s in series {
        for (i, v) in s.values.iter().enumerate() {
            w.write_record([s.name.as_str(), &i.to_string(), &format!("{v:e}")])
                .map_err(|e| io(e.into()))?;
        }
    }
    w.flush().map_err(io)
}

pub fn write_report(path: &Path, report: &RunReport) -> HarnessResult<()> {
    std::fs::write(path, report.to_json()).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Summary lines for the built-in fixtures.
pub fn list_fixtures() -> Vec<(String, String)> {
    fixtures::BUILTIN_NAMES
        .iter()
        .filter_map(|n| fixtures::builtin(n).ok())
        .map(|f| (f.name, f.description))
        .collect()
}

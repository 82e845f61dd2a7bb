//! Parameter sweeps over scenarios, their CSV and JSON outputs, and per-curve plot data.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::AllocatorKind;
use crate::error::{Error, Result};
use crate::metrics::{ClassMetrics, MetricsReport};
use crate::sim::{run, NoiseConfig, Scenario};
use crate::traffic::mix_seed;

/// Version of the CSV column set written by [`run_experiment`].
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Sweep axes. A missing axis keeps the base scenario's value; an empty one leaves nothing
/// to run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepAxes {
    pub allocators: Option<Vec<AllocatorKind>>,
    pub horizons: Option<Vec<usize>>,
    /// Prediction noise variances; 0 disables noise.
    pub noise_variances: Option<Vec<f64>>,
    /// Multipliers on every delay class's offered load.
    pub class_loads: Option<Vec<f64>>,
    /// Multipliers on the best-effort offered load.
    pub best_effort_loads: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub base: Scenario,
    pub sweep: SweepAxes,
    pub output_dir: PathBuf,
    /// Runs per seed; repetition `r > 0` derives a fresh seed from the listed one.
    pub repetitions: usize,
    pub max_points: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            base: Scenario::default(),
            sweep: SweepAxes::default(),
            output_dir: PathBuf::from("results"),
            repetitions: 1,
            max_points: 10_000,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_over(text, &ExperimentSpec::default())
    }

    /// Parses a config whose missing keys, at any depth, are taken from `defaults`.
    pub fn from_toml_over(text: &str, defaults: &ExperimentSpec) -> Result<Self> {
        let config = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        let user: toml::Table = toml::from_str(text).map_err(|e| config(&e))?;
        let mut merged = toml::Table::try_from(defaults).map_err(|e| config(&e))?;
        merge(&mut merged, user);
        merged.try_into().map_err(|e| config(&e))
    }

    pub fn load(path: &Path, defaults: &ExperimentSpec) -> Result<Self> {
        Self::from_toml_over(&fs::read_to_string(path)?, defaults)
    }

    /// Expands the cartesian product of the axes into validated scenarios.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let base = &self.base;
        let sweep = &self.sweep;
        let allocators = sweep.allocators.clone().unwrap_or_else(|| vec![base.allocator]);
        let horizons = sweep.horizons.clone().unwrap_or_else(|| vec![base.horizon]);
        let noises = match &sweep.noise_variances {
            Some(v) => v.clone(),
            None => vec![base.noise.map_or(0.0, |n| n.variance)],
        };
        let class_loads = sweep.class_loads.clone().unwrap_or_else(|| vec![1.0]);
        let be_loads = sweep.best_effort_loads.clone().unwrap_or_else(|| vec![1.0]);
        let seeds = sweep.seeds.clone().unwrap_or_else(|| vec![base.seed]);
        let total = [allocators.len(), horizons.len(), noises.len(), class_loads.len(), be_loads.len(), seeds.len()]
            .iter()
            .fold(self.repetitions, |acc, n| acc.saturating_mul(*n));
        if total > self.max_points {
            return Err(Error::Config(format!("sweep has {total} points, above the cap of {}", self.max_points)));
        }
        let noise_mean = base.noise.map_or(0.0, |n| n.mean);
        let mut points = Vec::with_capacity(total);
        for &allocator in &allocators {
            for &horizon in &horizons {
                for &noise_variance in &noises {
                    for &class_load in &class_loads {
                        for &best_effort_load in &be_loads {
                            for &seed in &seeds {
                                for repetition in 0..self.repetitions {
                                    let mut scenario = base.clone();
                                    scenario.allocator = allocator;
                                    scenario.horizon = horizon;
                                    scenario.noise = (noise_variance > 0.0)
                                        .then_some(NoiseConfig { mean: noise_mean, variance: noise_variance });
                                    for c in &mut scenario.classes {
                                        c.traffic.offered_bps *= class_load;
                                    }
                                    scenario.best_effort.offered_bps *= best_effort_load;
                                    scenario.seed =
                                        if repetition == 0 { seed } else { mix_seed(seed, repetition as u64, 0, 0) };
                                    let index = points.len();
                                    scenario
                                        .validate()
                                        .map_err(|e| Error::InvalidScenario(format!("sweep point {index}: {e}")))?;
                                    points.push(SweepPoint {
                                        index,
                                        allocator: allocator.name().to_string(),
                                        horizon,
                                        noise_variance,
                                        class_load,
                                        best_effort_load,
                                        seed,
                                        repetition,
                                        scenario,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(points)
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// One scenario of a sweep with its coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub allocator: String,
    pub horizon: usize,
    pub noise_variance: f64,
    pub class_load: f64,
    pub best_effort_load: f64,
    pub seed: u64,
    pub repetition: usize,
    #[serde(skip)]
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub point: usize,
    pub error: String,
}

/// Mean metrics over the points sharing one value of one axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisAggregate {
    pub value: String,
    pub points: usize,
    pub mean_throughput_pct: f64,
    /// Per delay class, in class order.
    pub mean_violation_pct: Vec<f64>,
    pub mean_best_effort_delay_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub timestamp_unix_s: u64,
    pub config: ExperimentSpec,
    pub points: usize,
    pub failures: Vec<PointFailure>,
    pub aggregates: BTreeMap<String, Vec<AxisAggregate>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub results: Vec<(SweepPoint, MetricsReport)>,
    pub failures: Vec<PointFailure>,
}

impl ExperimentOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

const COORD_COLUMNS: [&str; 9] = [
    "schema_version",
    "point",
    "allocator",
    "horizon",
    "noise_variance",
    "class_load",
    "best_effort_load",
    "seed",
    "repetition",
];

const CLASS_COLUMNS: [&str; 10] = [
    "offered",
    "served",
    "deadline_drops",
    "buffer_drops",
    "residual",
    "violation_pct",
    "mean_delay_s",
    "delay_variance_s2",
    "max_delay_s",
    "late_departures",
];

/// Column names of the results CSV.
pub fn csv_header() -> Vec<String> {
    let mut cols: Vec<String> = COORD_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.push("scenario_hash".into());
    cols.push("class".into());
    cols.extend(CLASS_COLUMNS.iter().map(|s| s.to_string()));
    cols.extend(["throughput_pct", "mean_utilization", "max_service_gap_s"].map(String::from));
    cols.extend(CLASS_COLUMNS.iter().map(|s| format!("be_{s}")));
    cols
}

fn class_fields(m: &ClassMetrics) -> Vec<String> {
    vec![
        m.offered.to_string(),
        m.served.to_string(),
        m.deadline_drops.to_string(),
        m.buffer_drops.to_string(),
        m.residual.to_string(),
        m.violation_pct.to_string(),
        m.mean_delay_s.to_string(),
        m.delay_variance_s2.to_string(),
        m.max_delay_s.to_string(),
        m.late_departures.to_string(),
    ]
}

fn csv_rows(point: &SweepPoint, report: &MetricsReport) -> Vec<Vec<String>> {
    let mean_util = if report.utilization.is_empty() {
        0.0
    } else {
        report.utilization.iter().sum::<f64>() / report.utilization.len() as f64
    };
    report
        .classes
        .iter()
        .map(|m| {
            let mut row = vec![
                SCHEMA_VERSION.to_string(),
                point.index.to_string(),
                point.allocator.clone(),
                point.horizon.to_string(),
                point.noise_variance.to_string(),
                point.class_load.to_string(),
                point.best_effort_load.to_string(),
                point.seed.to_string(),
                point.repetition.to_string(),
                report.metadata.scenario_hash.clone(),
                m.class.to_string(),
            ];
            row.extend(class_fields(m));
            row.push(report.throughput_pct.to_string());
            row.push(mean_util.to_string());
            row.push(report.max_service_gap_s.to_string());
            row.extend(class_fields(&report.best_effort));
            row
        })
        .collect()
}

/// Writes the results CSV for completed points to `w`.
pub fn write_csv<W: Write>(w: W, results: &[(SweepPoint, MetricsReport)]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(csv_header())?;
    for (point, report) in results {
        for row in csv_rows(point, report) {
            out.write_record(row)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn aggregates(results: &[(SweepPoint, MetricsReport)]) -> BTreeMap<String, Vec<AxisAggregate>> {
    type Key = fn(&SweepPoint) -> String;
    let axes: [(&str, Key); 6] = [
        ("allocator", |p| p.allocator.clone()),
        ("horizon", |p| p.horizon.to_string()),
        ("noise_variance", |p| p.noise_variance.to_string()),
        ("class_load", |p| p.class_load.to_string()),
        ("best_effort_load", |p| p.best_effort_load.to_string()),
        ("seed", |p| p.seed.to_string()),
    ];
    let mut out = BTreeMap::new();
    for (axis, key) in axes {
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<String, Vec<&MetricsReport>> = BTreeMap::new();
        for (p, r) in results {
            let k = key(p);
            if !groups.contains_key(&k) {
                order.push(k.clone());
            }
            groups.entry(k).or_default().push(r);
        }
        let list = order
            .into_iter()
            .map(|value| {
                let reports = &groups[&value];
                let n = reports.len() as f64;
                let n_classes = reports.iter().map(|r| r.classes.len()).max().unwrap_or(0);
                AxisAggregate {
                    points: reports.len(),
                    mean_throughput_pct: reports.iter().map(|r| r.throughput_pct).sum::<f64>() / n,
                    mean_violation_pct: (0..n_classes)
                        .map(|c| reports.iter().filter_map(|r| r.classes.get(c)).map(|m| m.violation_pct).sum::<f64>() / n)
                        .collect(),
                    mean_best_effort_delay_s: reports.iter().map(|r| r.best_effort.mean_delay_s).sum::<f64>() / n,
                    value,
                }
            })
            .collect();
        out.insert(axis.to_string(), list);
    }
    out
}

/// Runs every sweep point, in parallel across points, and writes `results.csv` and
/// `summary.json` into the output directory. Failed points are listed in the outcome and the
/// summary; their rows are absent from the CSV.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let points = spec.points()?;
    let runs: Vec<(SweepPoint, Result<MetricsReport>)> = points
        .into_par_iter()
        .map(|p| {
            let r = run(&p.scenario);
            (p, r)
        })
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (p, r) in runs {
        match r {
            Ok(report) => results.push((p, report)),
            Err(e) => failures.push(PointFailure { point: p.index, error: e.to_string() }),
        }
    }

    fs::create_dir_all(&spec.output_dir)?;
    let csv_path = spec.output_dir.join(CSV_FILE);
    write_csv(fs::File::create(&csv_path)?, &results)?;

    let summary = ExperimentSummary {
        schema_version: SCHEMA_VERSION,
        timestamp_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        config: spec.clone(),
        points: results.len() + failures.len(),
        failures: failures.clone(),
        aggregates: aggregates(&results),
    };
    let summary_path = spec.output_dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&summary_path, json + "\n")?;

    Ok(ExperimentOutcome { csv_path, summary_path, results, failures })
}

/// Which curves to extract from a results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRequest {
    pub metric: String,
    /// Columns whose values split rows into curves.
    pub group_by: Vec<String>,
    pub x: String,
}

impl PlotRequest {
    pub fn new(metric: &str, group_by: &[&str]) -> Self {
        PlotRequest {
            metric: metric.to_string(),
            group_by: group_by.iter().map(|s| s.to_string()).collect(),
            x: "class_load".into(),
        }
    }
}

/// Writes one whitespace-delimited `x y` file per curve into `out_dir`. Rows of a curve that
/// share an `x` value (seeds, repetitions, merged classes) are averaged.
pub fn emit_plot_data(csv_path: &Path, req: &PlotRequest, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut rdr = csv::Reader::from_path(csv_path)?;
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let metric = col(&req.metric).ok_or_else(|| Error::UnknownMetric(req.metric.clone()))?;
    let x = col(&req.x).ok_or_else(|| Error::UnknownMetric(req.x.clone()))?;
    let groups: Vec<usize> = req
        .group_by
        .iter()
        .map(|g| col(g).ok_or_else(|| Error::Config(format!("unknown group column `{g}`"))))
        .collect::<Result<_>>()?;

    // curve -> x -> (sum, count), keeping first-seen order of curves and x values.
    let mut curves: Vec<(Vec<String>, Vec<(f64, f64, usize)>)> = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        rows += 1;
        let parse = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| Error::UnknownMetric(format!("{} is not numeric", &header[i])))
        };
        let (xv, yv) = (parse(x)?, parse(metric)?);
        let key: Vec<String> = groups.iter().map(|&g| rec[g].to_string()).collect();
        let curve = match curves.iter().position(|(k, _)| *k == key) {
            Some(i) => &mut curves[i].1,
            None => {
                curves.push((key, Vec::new()));
                &mut curves.last_mut().expect("just pushed").1
            }
        };
        match curve.iter_mut().find(|(cx, _, _)| *cx == xv) {
            Some(p) => {
                p.1 += yv;
                p.2 += 1;
            }
            None => curve.push((xv, yv, 1)),
        }
    }
    if rows == 0 {
        return Err(Error::EmptyInput(format!("{} has no data rows", csv_path.display())));
    }

    fs::create_dir_all(out_dir)?;
    let mut paths = Vec::with_capacity(curves.len());
    for (key, mut points) in curves {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let label: Vec<String> = req.group_by.iter().zip(&key).map(|(g, v)| format!("{g}={v}")).collect();
        let stem = if label.is_empty() { "all".to_string() } else { label.join("_") };
        let safe: String =
            stem.chars().map(|c| if c.is_ascii_alphanumeric() || "=_.-".contains(c) { c } else { '-' }).collect();
        let path = out_dir.join(format!("{}_{safe}.dat", req.metric));
        let mut text = format!("# x={} y={} {}\n", req.x, req.metric, label.join(" "));
        for (xv, sum, n) in points {
            text.push_str(&format!("{xv} {}\n", sum / n as f64));
        }
        fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentSpec {
        let mut spec = ExperimentSpec::default();
        spec.base.duration_slots = 200;
        spec.base.allocator = AllocatorKind::Myopic;
        spec
    }

    #[test]
    fn axes_default_to_the_base_scenario() {
        let pts = quick().points().unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].scenario.allocator, AllocatorKind::Myopic);
        assert_eq!(pts[0].scenario, quick().base);
    }

    #[test]
    fn cartesian_product_and_cap() {
        let mut spec = quick();
        spec.sweep.class_loads = Some(vec![0.5, 1.0, 1.5]);
        spec.sweep.seeds = Some(vec![1, 2]);
        spec.repetitions = 2;
        let pts = spec.points().unwrap();
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[1].scenario.seed, mix_seed(1, 1, 0, 0));
        assert_eq!(pts[0].scenario.seed, 1);
        spec.max_points = 11;
        assert!(matches!(spec.points(), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_point_is_rejected() {
        let mut spec = quick();
        spec.sweep.class_loads = Some(vec![1.0, 1e6]);
        assert!(matches!(spec.points(), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn minimal_toml() {
        let spec = ExperimentSpec::from_toml(
            r#"
            output_dir = "out"
            [base]
            allocator = "assured"
            duration_slots = 10
            [sweep]
            allocators = ["mpc", { name = "priority", slice_fraction = 0.5 }]
            class_loads = [0.5, 1.0]
            "#,
        )
        .unwrap();
        assert_eq!(spec.base.n_onus, 4);
        assert_eq!(spec.base.duration_slots, 10);
        assert_eq!(spec.points().unwrap().len(), 4);
        assert!(ExperimentSpec::from_toml("[base]\nonus = 3").is_err());
    }

    #[test]
    fn config_overrides_chosen_defaults() {
        let defaults = ExperimentSpec { base: Scenario::full_scale(), ..Default::default() };
        let spec = ExperimentSpec::from_toml_over("[base]\nseed = 9\n[base.best_effort]\noffered_bps = 1e8", &defaults).unwrap();
        assert_eq!(spec.base.n_onus, 16);
        assert_eq!(spec.base.seed, 9);
        assert_eq!(spec.base.best_effort.offered_bps, 1e8);
        assert_eq!(spec.base.best_effort.hurst, 0.8);
    }

    #[test]
    fn header_has_unique_columns() {
        let h = csv_header();
        let mut sorted = h.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), h.len());
        assert_eq!(h[0], "schema_version");
    }
}

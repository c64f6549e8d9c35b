//! Parameter-grid sweeps: expansion, parallel execution with a resumable
//! JSONL manifest, and per-parameter trend reports.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexity::{compress_len, compression_ratio, Param, ParamPoint};
use crate::config::{ConfigError, ConfigFile, SimulationSection};
use crate::kmc::{self, EventCounts, RunResult};
use crate::render::{canonical_bytes, encode_png, rasterize, write_raw, Palette};

pub const MANIFEST: &str = "manifest.jsonl";
pub const FAILURES: &str = "failures.jsonl";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("{0} already holds results; resume it or pick another output directory")]
    ManifestExists(String),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("run {run_id}: {message}")]
    Run { run_id: String, message: String },
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> SweepError {
    let context = context.into();
    move |source| SweepError::Io { context, source }
}

/// One simulation of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_id: String,
    pub params: ParamPoint,
    pub seed: u64,
}

/// Identifier built from the energies in meV and the seed, so that the same
/// point gets the same file name in every sweep.
pub fn run_id(p: &ParamPoint, seed: u64) -> String {
    let mev = |x: f64| (x * 1000.0).round() as i64;
    format!(
        "es{:04}_e11-{:04}_e22-{:04}_e12-{:04}_seed{}",
        mev(p.substrate),
        mev(p.e11),
        mev(p.e22),
        mev(p.e12),
        seed
    )
}

/// Cartesian product of the four axes and the replicate seeds.
/// Replicate `r` of every point uses seed `base_seed + r`.
pub fn expand(cfg: &ConfigFile) -> Result<Vec<RunSpec>, SweepError> {
    let s = &cfg.sweep;
    let es = s.substrate_energy.values("substrate_energy")?;
    let e11 = s.e11.values("e11")?;
    let e22 = s.e22.values("e22")?;
    let e12 = s.e12.values("e12")?;
    if s.seeds_per_point == 0 {
        return Err(ConfigError::EmptyRange("seeds_per_point".into()).into());
    }
    let mut out = Vec::with_capacity(es.len() * e11.len() * e22.len() * e12.len() * s.seeds_per_point as usize);
    for &a in &es {
        for &b in &e11 {
            for &c in &e22 {
                for &d in &e12 {
                    let params = ParamPoint::new(a, b, c, d);
                    for r in 0..s.seeds_per_point as u64 {
                        let seed = s.base_seed + r;
                        out.push(RunSpec {
                            run_id: run_id(&params, seed),
                            params,
                            seed,
                        });
                    }
                }
            }
        }
    }
    let mut seen = HashSet::new();
    if let Some(dup) = out.iter().find(|r| !seen.insert(r.run_id.as_str())) {
        return Err(ConfigError::Invalid(format!("duplicate grid point {}", dup.run_id)).into());
    }
    Ok(out)
}

/// Manifest line for one finished run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    #[serde(flatten)]
    pub params: ParamPoint,
    pub seed: u64,
    pub steps: u64,
    /// Relative to the manifest's directory.
    pub png: String,
    pub raw: String,
    pub raw_len: usize,
    pub c_bits: u64,
    pub ratio: f64,
    pub dist: f64,
    pub tiles: usize,
    pub aggregates: usize,
    pub singletons: usize,
    /// `None` when no two tiles touch.
    pub hetero_bond_fraction: Option<f64>,
    pub events: EventCounts,
}

impl crate::complexity::Ranked for RunRecord {
    fn ratio(&self) -> f64 {
        self.ratio
    }
    fn run_id(&self) -> &str {
        &self.run_id
    }
}

/// Measurements of a finished run, without touching the filesystem.
pub fn summarize(spec: &RunSpec, steps: u64, result: &RunResult) -> RunRecord {
    let raster = rasterize(&result.lattice, 1);
    let bytes = canonical_bytes(&raster);
    let c_bits = compress_len(bytes).expect("lattice rasters are never empty");
    let aggs = result.lattice.aggregates();
    let bonds = result.lattice.hetero_bond_fraction();
    RunRecord {
        run_id: spec.run_id.clone(),
        params: spec.params,
        seed: spec.seed,
        steps,
        png: format!("{}.png", spec.run_id),
        raw: format!("{}.raw", spec.run_id),
        raw_len: bytes.len(),
        c_bits,
        ratio: compression_ratio(c_bits, bytes.len()).expect("non-empty raster"),
        dist: spec.params.distance(),
        tiles: result.lattice.len(),
        aggregates: aggs.count(),
        singletons: aggs.singletons.len(),
        hetero_bond_fraction: bonds.has_pairs().then_some(bonds.fraction),
        events: result.counts,
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("part");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Simulate one grid point and store its PNG and raw raster in `dir`.
pub fn run_point(sim: &SimulationSection, spec: &RunSpec, dir: &Path) -> Result<RunRecord, SweepError> {
    let fail = |message: String| SweepError::Run {
        run_id: spec.run_id.clone(),
        message,
    };
    let cfg = sim.resolve(Some(spec.params), spec.seed)?;
    let steps = cfg.steps;
    let species = cfg.species.len();
    let result = kmc::run(cfg).map_err(|e| fail(e.to_string()))?;
    let record = summarize(spec, steps, &result);
    let raster = rasterize(&result.lattice, 1);
    let png = encode_png(&raster, &Palette::for_species(species)).map_err(|e| fail(e.to_string()))?;
    let mut raw = Vec::with_capacity(raster.pixels().len() + 16);
    write_raw(&raster, &mut raw).map_err(io_err(&spec.run_id))?;
    write_atomically(&dir.join(&record.png), &png).map_err(io_err(&record.png))?;
    write_atomically(&dir.join(&record.raw), &raw).map_err(io_err(&record.raw))?;
    Ok(record)
}

/// Read a manifest. A torn final line (no trailing newline, not valid JSON)
/// is ignored; with `repair` the file is truncated to drop it.
pub fn read_manifest(path: &Path, repair: bool) -> Result<Vec<RunRecord>, SweepError> {
    let text = match fs::read(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path.display().to_string())(e)),
    };
    let complete = text.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let mut out = Vec::new();
    for (i, line) in text[..complete].split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let rec = serde_json::from_slice(line).map_err(|e| SweepError::Manifest {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    if complete < text.len() {
        match serde_json::from_slice::<RunRecord>(&text[complete..]) {
            Ok(rec) if !repair => out.push(rec),
            _ if repair => {
                let f = OpenOptions::new()
                    .write(true)
                    .open(path)
                    .map_err(io_err(path.display().to_string()))?;
                f.set_len(complete as u64).map_err(io_err(path.display().to_string()))?;
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Single writer for manifest lines; each record is one `write_all`.
struct ManifestWriter {
    file: Mutex<File>,
}

impl ManifestWriter {
    fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ManifestWriter { file: Mutex::new(file) })
    }

    fn append<T: Serialize>(&self, value: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(value).map_err(io::Error::other)?;
        line.push(b'\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(&line)?;
        f.flush()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailureRecord {
    pub run_id: String,
    pub error: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Progress {
    pub done: usize,
    pub failed: usize,
    pub total: usize,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    /// Records of every completed point, in grid order.
    pub records: Vec<RunRecord>,
    pub skipped: usize,
    pub ran: usize,
    pub failures: Vec<FailureRecord>,
}

#[derive(Clone, Debug)]
pub struct ExecuteOptions {
    pub jobs: usize,
    pub resume: bool,
}

impl Default for ExecuteOptions {
    fn default() -> Self {
        ExecuteOptions {
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            resume: false,
        }
    }
}

/// Run every grid point of `cfg` into `out_root/<sweep id>/`.
///
/// Failed runs go to `failures.jsonl` and do not stop the sweep. With
/// `resume`, run ids already in the manifest are skipped.
pub fn execute(
    cfg: &ConfigFile,
    out_root: &Path,
    opts: &ExecuteOptions,
    progress: impl Fn(Progress) + Sync,
) -> Result<SweepOutcome, SweepError> {
    let plan = expand(cfg)?;
    cfg.simulation.resolve(plan.first().map(|p| p.params), 0)?;
    let dir = out_root.join(&cfg.sweep.id);
    fs::create_dir_all(&dir).map_err(io_err(dir.display().to_string()))?;
    let manifest_path = dir.join(MANIFEST);
    let existing = read_manifest(&manifest_path, true)?;
    if !existing.is_empty() && !opts.resume {
        return Err(SweepError::ManifestExists(manifest_path.display().to_string()));
    }
    let done: HashSet<&str> = existing.iter().map(|r| r.run_id.as_str()).collect();
    let pending: Vec<&RunSpec> = plan.iter().filter(|s| !done.contains(s.run_id.as_str())).collect();

    let manifest = ManifestWriter::open(&manifest_path).map_err(io_err(manifest_path.display().to_string()))?;
    let failures_path = dir.join(FAILURES);
    let failure_log = ManifestWriter::open(&failures_path).map_err(io_err(failures_path.display().to_string()))?;
    let counter = Mutex::new(Progress {
        done: 0,
        failed: 0,
        total: pending.len(),
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| io_err("thread pool")(io::Error::other(e)))?;

    let results: Vec<Result<RunRecord, FailureRecord>> = pool.install(|| {
        pending
            .par_iter()
            .map(|spec| {
                let outcome = run_point(&cfg.simulation, spec, &dir);
                let logged = match &outcome {
                    Ok(rec) => manifest.append(rec).map_err(io_err(MANIFEST)),
                    Err(e) => failure_log
                        .append(&FailureRecord {
                            run_id: spec.run_id.clone(),
                            error: e.to_string(),
                        })
                        .map_err(io_err(FAILURES)),
                };
                let outcome = match (outcome, logged) {
                    (Ok(rec), Ok(())) => Ok(rec),
                    (Ok(_), Err(e)) | (Err(e), _) => Err(FailureRecord {
                        run_id: spec.run_id.clone(),
                        error: e.to_string(),
                    }),
                };
                let snapshot = {
                    let mut c = counter.lock().unwrap_or_else(|p| p.into_inner());
                    match outcome {
                        Ok(_) => c.done += 1,
                        Err(_) => c.failed += 1,
                    }
                    *c
                };
                progress(snapshot);
                outcome
            })
            .collect()
    });

    let mut by_id: BTreeMap<String, RunRecord> = existing.into_iter().map(|r| (r.run_id.clone(), r)).collect();
    let mut failures = Vec::new();
    let ran = results.len();
    for r in results {
        match r {
            Ok(rec) => {
                by_id.insert(rec.run_id.clone(), rec);
            }
            Err(f) => failures.push(f),
        }
    }
    let records = plan.iter().filter_map(|s| by_id.remove(&s.run_id)).collect();
    Ok(SweepOutcome {
        dir,
        records,
        skipped: plan.len() - pending.len(),
        ran,
        failures,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increasing,
    Reversed,
    Flat,
}

impl Trend {
    pub fn name(self) -> &'static str {
        match self {
            Trend::Increasing => "increasing",
            Trend::Reversed => "reversed",
            Trend::Flat => "flat",
        }
    }
}

/// Records sharing the three fixed parameters, ordered by the varied one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrendGroup {
    pub fixed: Vec<(Param, f64)>,
    pub values: Vec<f64>,
    /// Mean `C` in bits over the replicates at each value.
    pub mean_c: Vec<f64>,
    pub deltas: Vec<f64>,
    pub trend: Trend,
    /// Some grid values of the varied parameter are missing.
    pub incomplete: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub varied: Param,
    pub tau: f64,
    pub groups: Vec<TrendGroup>,
}

impl OrthogonalityReport {
    pub fn count(&self, trend: Trend) -> usize {
        self.groups.iter().filter(|g| g.trend == trend).count()
    }
}

pub const DEFAULT_TAU: f64 = 0.02;

fn key(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// Group by the three fixed parameters and classify each group. A step
/// counts when `|ΔC| > tau * max C` of its group; any counted decrease makes
/// the group `Reversed`, otherwise any counted increase makes it `Increasing`.
pub fn orthogonality_report(records: &[RunRecord], varied: Param, tau: f64) -> OrthogonalityReport {
    let fixed: Vec<Param> = Param::ALL.into_iter().filter(|&p| p != varied).collect();
    let all_values: Vec<i64> = {
        let mut v: Vec<i64> = records.iter().map(|r| key(r.params.get(varied))).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut groups: BTreeMap<Vec<i64>, BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
    for r in records {
        let k: Vec<i64> = fixed.iter().map(|&p| key(r.params.get(p))).collect();
        groups
            .entry(k)
            .or_default()
            .entry(key(r.params.get(varied)))
            .or_default()
            .push(r.c_bits as f64);
    }
    let groups = groups
        .into_iter()
        .map(|(k, by_value)| {
            let values: Vec<f64> = by_value.keys().map(|&v| v as f64 / 1e9).collect();
            let mean_c: Vec<f64> = by_value.values().map(|cs| cs.iter().sum::<f64>() / cs.len() as f64).collect();
            let deltas: Vec<f64> = mean_c.windows(2).map(|w| w[1] - w[0]).collect();
            let max_c = mean_c.iter().copied().fold(0.0, f64::max);
            let counted = |d: f64| max_c > 0.0 && d.abs() > tau * max_c;
            let trend = if deltas.iter().any(|&d| d < 0.0 && counted(d)) {
                Trend::Reversed
            } else if deltas.iter().any(|&d| d > 0.0 && counted(d)) {
                Trend::Increasing
            } else {
                Trend::Flat
            };
            TrendGroup {
                fixed: fixed.iter().zip(&k).map(|(&p, &v)| (p, v as f64 / 1e9)).collect(),
                values,
                mean_c,
                deltas,
                trend,
                incomplete: by_value.len() < all_values.len(),
            }
        })
        .collect();
    OrthogonalityReport { varied, tau, groups }
}

/// Load `records`' raw rasters back from `dir` and return their pixel bytes.
pub fn load_rasters(dir: &Path, records: &[RunRecord]) -> Result<Vec<Vec<u8>>, SweepError> {
    records
        .iter()
        .map(|r| {
            let path = dir.join(&r.raw);
            let f = File::open(&path).map_err(io_err(path.display().to_string()))?;
            crate::render::read_raw(io::BufReader::new(f))
                .map(|ras| ras.pixels().to_vec())
                .map_err(|e| SweepError::Run {
                    run_id: r.run_id.clone(),
                    message: e.to_string(),
                })
        })
        .collect()
}

/// Count the complete lines of a JSONL file.
pub fn count_lines(path: &Path) -> io::Result<usize> {
    let f = File::open(path)?;
    Ok(BufReader::new(f).lines().count())
}

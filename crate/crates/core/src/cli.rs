//! Command-line front end.
//!
//! Exit status 0 on success, 1 for usage, config or manifest errors and 2 for
//! failures while running.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::clustering::{self, hcluster, DistanceMatrix, Linkage};
use crate::complexity::{
    detect_transition_with, ncd_matrix, param_output_correlation, sort_by_ratio, ChangePointDetector, MaxJump,
    Param, ParamPoint, TransitionReport, TwoSegmentFit,
};
use crate::config::ConfigFile;
use crate::kmc::{EventLog, Simulation};
use crate::render::{contact_sheet, encode_png, rasterize, read_raw, write_raw, Palette, Raster};
use crate::sweep::{
    self, execute, orthogonality_report, read_manifest, ExecuteOptions, RunRecord, RunSpec, SweepError, Trend,
};

pub const OUT_ENV: &str = "TILEKMC_OUT";

#[derive(Debug, Parser)]
#[command(name = "tilekmc", version, about = "Square-tile self-assembly kMC and compression analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its PNG, raw raster and record.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to $TILEKMC_OUT, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one CSV line per event.
        #[arg(long)]
        event_log: Option<PathBuf>,
    },
    /// Run every point of the configured parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Skip runs already in the manifest.
        #[arg(long)]
        resume: bool,
    },
    /// Compression-based analyses of a sweep manifest.
    Analyze {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        mode: AnalyzeMode,
        /// Parameter varied by `--mode ortho`.
        #[arg(long, value_parser = parse_param, default_value = "E_12")]
        varied: Param,
        /// Flat threshold for `--mode ortho`, as a fraction of the group's largest C.
        #[arg(long, default_value_t = sweep::DEFAULT_TAU)]
        tau: f64,
        #[arg(long, value_enum, default_value_t = Detector::MaxJump)]
        detector: Detector,
        #[arg(long, value_enum, default_value_t = NcdInput::Raw)]
        ncd_input: NcdInput,
        /// Defaults to `analysis/` next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hierarchical clustering of a manifest's runs.
    Cluster {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        metric: Metric,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = LinkageArg::Average)]
        linkage: LinkageArg,
        /// Seed for picking one representative per cluster.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = NcdInput::Raw)]
        ncd_input: NcdInput,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ratio ranking, correlation, transition, per-parameter trends and a gallery.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeMode {
    Ratio,
    Ncd,
    Correlation,
    Transition,
    Ortho,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Ncd,
    Ratio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Detector {
    MaxJump,
    TwoSegment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NcdInput {
    Raw,
    Png,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LinkageArg {
    Average,
    Single,
    Complete,
}

impl From<LinkageArg> for Linkage {
    fn from(l: LinkageArg) -> Self {
        match l {
            LinkageArg::Average => Linkage::Average,
            LinkageArg::Single => Linkage::Single,
            LinkageArg::Complete => Linkage::Complete,
        }
    }
}

fn parse_param(s: &str) -> Result<Param, String> {
    Param::parse(s).ok_or_else(|| format!("unknown parameter {s:?}; use E_s, E_11, E_22 or E_12"))
}

/// Error with its exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Config(_) | SweepError::Manifest { .. } | SweepError::ManifestExists(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parse `args` (program name first) and run; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn out_root(out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    ConfigFile::load(path).map_err(|e| CliError::Usage(e.to_string()))
}

fn load_manifest(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("manifest {} not found", path.display())));
    }
    let recs = read_manifest(path, false)?;
    if recs.is_empty() {
        return Err(CliError::Usage(format!("manifest {} has no records", path.display())));
    }
    Ok(recs)
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate {
            config,
            seed,
            out,
            event_log,
        } => simulate(&config, seed, &out_root(out), event_log.as_deref()),
        Command::Sweep {
            config,
            out,
            jobs,
            resume,
        } => run_sweep(&config, &out_root(out), jobs, resume),
        Command::Analyze {
            manifest,
            mode,
            varied,
            tau,
            detector,
            ncd_input,
            out,
        } => {
            let recs = load_manifest(&manifest)?;
            let dir = manifest_dir(&manifest);
            let out = out.unwrap_or_else(|| dir.join("analysis"));
            create_dir(&out)?;
            match mode {
                AnalyzeMode::Ratio => analyze_ratio(&recs, &dir, &out),
                AnalyzeMode::Ncd => analyze_ncd(&recs, &dir, &out, ncd_input),
                AnalyzeMode::Correlation => analyze_correlation(&recs, &out),
                AnalyzeMode::Transition => analyze_transition(&recs, &out, detector),
                AnalyzeMode::Ortho => analyze_ortho(&recs, &out, varied, tau),
            }
        }
        Command::Cluster {
            manifest,
            metric,
            k,
            linkage,
            seed,
            ncd_input,
            out,
        } => {
            let recs = load_manifest(&manifest)?;
            let dir = manifest_dir(&manifest);
            let out = out.unwrap_or_else(|| dir.join("clusters"));
            cluster(&recs, &dir, &out, metric, k, linkage.into(), seed, ncd_input)
        }
        Command::Report { manifest, out } => {
            let recs = load_manifest(&manifest)?;
            let dir = manifest_dir(&manifest);
            let out = out.unwrap_or_else(|| dir.join("report"));
            create_dir(&out)?;
            analyze_ratio(&recs, &dir, &out)?;
            analyze_correlation(&recs, &out)?;
            analyze_transition(&recs, &out, Detector::MaxJump)?;
            for p in Param::ALL {
                analyze_ortho(&recs, &out, p, sweep::DEFAULT_TAU)?;
            }
            Ok(())
        }
    }
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path, event_log: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let seed = seed.unwrap_or(cfg.simulation.seed);
    let sim_cfg = cfg.simulation.resolve(None, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut resolved = cfg.simulation.clone();
    resolved.seed = seed;
    resolved.steps = Some(sim_cfg.steps);
    println!("# resolved simulation config\n{}", toml::to_string_pretty(&resolved).map_err(runtime)?);
    println!("seed = {seed}");
    create_dir(out)?;

    let species = sim_cfg.species.len();
    let steps = sim_cfg.steps;
    let mut sim = Simulation::new(sim_cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    match event_log {
        Some(path) => {
            let f = fs::File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            let mut log = EventLog::new(std::io::BufWriter::new(f)).map_err(runtime)?;
            let mut failed = None;
            sim.run_with(|step, ev, _| {
                if failed.is_none() {
                    failed = log.record(step, ev).err();
                }
            })
            .map_err(runtime)?;
            if let Some(e) = failed {
                return Err(runtime(e));
            }
            log.into_inner().flush().map_err(runtime)?;
        }
        None => sim.run_with(|_, _, _| {}).map_err(runtime)?,
    }
    let result = sim.into_result();

    // non two-label bond tables have no grid coordinates; their record keeps zeros there
    let e = &cfg.simulation.bonds;
    let params = ParamPoint::new(
        cfg.simulation.substrate_energy,
        e.e11.unwrap_or(0.0),
        e.e22.unwrap_or(0.0),
        e.e12.unwrap_or(0.0),
    );
    let spec = RunSpec {
        run_id: format!("run_seed{seed}"),
        params,
        seed,
    };
    let record = sweep::summarize(&spec, steps, &result);
    let raster = rasterize(&result.lattice, 1);
    let png = encode_png(&raster, &Palette::for_species(species)).map_err(runtime)?;
    let mut raw = Vec::new();
    write_raw(&raster, &mut raw).map_err(runtime)?;
    write_file(&out.join(&record.png), png)?;
    write_file(&out.join(&record.raw), raw)?;
    write_file(
        &out.join(format!("{}.json", spec.run_id)),
        serde_json::to_string_pretty(&record).map_err(runtime)?,
    )?;
    println!(
        "tiles {} aggregates {} C {} bits ratio {:.6}",
        record.tiles, record.aggregates, record.c_bits, record.ratio
    );
    Ok(())
}

fn run_sweep(config: &Path, out: &Path, jobs: Option<usize>, resume: bool) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let plan = sweep::expand(&cfg)?;
    let steps = cfg
        .simulation
        .resolve(plan.first().map(|p| p.params), cfg.sweep.base_seed)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .steps;
    let mut resolved = cfg.clone();
    resolved.simulation.steps = Some(steps);
    println!("# resolved config\n{}", resolved.to_toml());
    println!("base seed = {}, {} runs", cfg.sweep.base_seed, plan.len());
    let mut opts = ExecuteOptions {
        resume,
        ..Default::default()
    };
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        opts.jobs = j;
    }
    let outcome = execute(&cfg, out, &opts, |p| {
        eprint!("\r{}/{} done, {} failed", p.done, p.total, p.failed);
    })?;
    eprintln!();
    println!(
        "{}: {} ran, {} skipped, {} failed; manifest {}",
        cfg.sweep.id,
        outcome.ran,
        outcome.skipped,
        outcome.failures.len(),
        outcome.dir.join(sweep::MANIFEST).display()
    );
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} runs failed; see {}",
            outcome.failures.len(),
            outcome.dir.join(sweep::FAILURES).display()
        )))
    }
}

fn load_raster(dir: &Path, r: &RunRecord) -> Result<Raster, CliError> {
    let path = dir.join(&r.raw);
    let f = fs::File::open(&path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    read_raw(std::io::BufReader::new(f)).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn species_in(rasters: &[Raster]) -> usize {
    rasters.iter().map(Raster::max_index).max().unwrap_or(0).max(2) as usize
}

fn gallery(rasters: &[Raster], out: &Path) -> Result<(), CliError> {
    let (palette, sep) = Palette::for_species(species_in(rasters)).with_separator();
    let columns = (rasters.len() as f64).sqrt().ceil() as usize;
    let sheet = contact_sheet(rasters, columns, 2, sep);
    write_file(out, encode_png(&sheet, &palette).map_err(runtime)?)
}

fn params_csv(r: &RunRecord) -> String {
    format!("{},{},{},{}", r.params.substrate, r.params.e11, r.params.e22, r.params.e12)
}

fn analyze_ratio(recs: &[RunRecord], dir: &Path, out: &Path) -> Result<(), CliError> {
    let sorted = sort_by_ratio(recs);
    let mut csv = String::from("rank,run_id,E_s,E_11,E_22,E_12,seed,c_bits,ratio,dist,aggregates\n");
    for (i, r) in sorted.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{},{},{}",
            r.run_id,
            params_csv(r),
            r.seed,
            r.c_bits,
            r.ratio,
            r.dist,
            r.aggregates
        );
    }
    write_file(&out.join("sorted_by_ratio.csv"), csv)?;
    const MAX_GALLERY: usize = 400;
    let step = sorted.len().div_ceil(MAX_GALLERY).max(1);
    let rasters = sorted
        .iter()
        .step_by(step)
        .map(|r| load_raster(dir, r))
        .collect::<Result<Vec<_>, _>>()?;
    gallery(&rasters, &out.join("sorted_by_ratio.png"))
}

fn ncd_inputs(recs: &[RunRecord], dir: &Path, input: NcdInput) -> Result<Vec<Vec<u8>>, CliError> {
    recs.iter()
        .map(|r| match input {
            NcdInput::Raw => load_raster(dir, r).map(|ras| ras.pixels().to_vec()),
            NcdInput::Png => {
                let path = dir.join(&r.png);
                fs::read(&path).map_err(|e| runtime(format!("{}: {e}", path.display())))
            }
        })
        .collect()
}

fn analyze_ncd(recs: &[RunRecord], dir: &Path, out: &Path, input: NcdInput) -> Result<(), CliError> {
    let sorted = sort_by_ratio(recs);
    let m = ncd_matrix(&ncd_inputs(&sorted, dir, input)?).map_err(runtime)?;
    let mut csv = String::from("run_id");
    for r in &sorted {
        let _ = write!(csv, ",{}", r.run_id);
    }
    csv.push('\n');
    for (i, r) in sorted.iter().enumerate() {
        csv.push_str(&r.run_id);
        for j in 0..sorted.len() {
            let _ = write!(csv, ",{:.6}", m.get(i, j));
        }
        csv.push('\n');
    }
    write_file(&out.join("ncd_matrix.csv"), csv)?;
    let mut consecutive = String::from("rank,run_id,next_run_id,ratio,next_ratio,ncd\n");
    for i in 0..sorted.len().saturating_sub(1) {
        let _ = writeln!(
            consecutive,
            "{i},{},{},{},{},{:.6}",
            sorted[i].run_id,
            sorted[i + 1].run_id,
            sorted[i].ratio,
            sorted[i + 1].ratio,
            m.get(i, i + 1)
        );
    }
    write_file(&out.join("ncd_consecutive.csv"), consecutive)
}

fn analyze_correlation(recs: &[RunRecord], out: &Path) -> Result<(), CliError> {
    let pairs: Vec<_> = recs.iter().map(|r| (r.params, r.c_bits)).collect();
    let rho = param_output_correlation(&pairs).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("spearman rho(dist, C) = {rho:.6} over {} runs", recs.len());
    let mut csv = String::from("run_id,dist,c_bits,ratio\n");
    let mut by_dist: Vec<&RunRecord> = recs.iter().collect();
    by_dist.sort_by(|a, b| a.dist.total_cmp(&b.dist).then_with(|| a.run_id.cmp(&b.run_id)));
    for r in by_dist {
        let _ = writeln!(csv, "{},{},{},{}", r.run_id, r.dist, r.c_bits, r.ratio);
    }
    write_file(&out.join("dist_vs_c.csv"), csv)?;
    write_file(
        &out.join("correlation.txt"),
        format!("runs\t{}\nspearman_rho\t{rho}\n", recs.len()),
    )
}

fn analyze_transition(recs: &[RunRecord], out: &Path, detector: Detector) -> Result<(), CliError> {
    let sorted = sort_by_ratio(recs);
    let ratios: Vec<f64> = sorted.iter().map(|r| r.ratio).collect();
    let det: &dyn ChangePointDetector = match detector {
        Detector::MaxJump => &MaxJump,
        Detector::TwoSegment => &TwoSegmentFit,
    };
    let report = detect_transition_with(&ratios, det).map_err(|e| CliError::Usage(e.to_string()))?;
    let text = match &report {
        TransitionReport::NoTransition => "no transition\n".to_string(),
        TransitionReport::Boundary { index, score, segments } => {
            let mut t = format!(
                "boundary\t{index}\nrun_id\t{}\nratio\t{}\nscore\t{score}\n",
                sorted[*index].run_id, ratios[*index]
            );
            for (name, s) in ["lower", "upper"].iter().zip(segments) {
                let _ = writeln!(
                    t,
                    "{name}\t[{}, {})\tratio {} .. {}\tmean_step {}",
                    s.start, s.end, s.first, s.last, s.mean_step
                );
            }
            t
        }
    };
    print!("{text}");
    write_file(&out.join("transition.txt"), text)
}

fn analyze_ortho(recs: &[RunRecord], out: &Path, varied: Param, tau: f64) -> Result<(), CliError> {
    let rep = orthogonality_report(recs, varied, tau);
    let mut csv = String::from("group,fixed,values,mean_c,deltas,trend,incomplete\n");
    let join = |xs: &[f64]| xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
    for (i, g) in rep.groups.iter().enumerate() {
        let fixed = g
            .fixed
            .iter()
            .map(|(p, v)| format!("{}={v}", p.name()))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            csv,
            "{i},{fixed},{},{},{},{},{}",
            join(&g.values),
            join(&g.mean_c),
            join(&g.deltas),
            g.trend.name(),
            g.incomplete
        );
    }
    println!(
        "{}: {} increasing, {} reversed, {} flat",
        varied.name(),
        rep.count(Trend::Increasing),
        rep.count(Trend::Reversed),
        rep.count(Trend::Flat)
    );
    write_file(&out.join(format!("ortho_{}.csv", varied.name())), csv)
}

#[allow(clippy::too_many_arguments)]
fn cluster(
    recs: &[RunRecord],
    dir: &Path,
    out: &Path,
    metric: Metric,
    k: usize,
    linkage: Linkage,
    seed: u64,
    input: NcdInput,
) -> Result<(), CliError> {
    if k == 0 || k > recs.len() {
        return Err(CliError::Usage(format!("--k must lie in 1..={}, got {k}", recs.len())));
    }
    let matrix = match metric {
        Metric::Ratio => DistanceMatrix::euclidean_1d(&recs.iter().map(|r| r.ratio).collect::<Vec<_>>()),
        Metric::Ncd => ncd_matrix(&ncd_inputs(recs, dir, input)?).map_err(runtime)?,
    };
    create_dir(out)?;
    let assignments = if recs.len() == 1 {
        vec![0]
    } else {
        let dendro = hcluster(&matrix, linkage).map_err(runtime)?;
        let labels: Vec<String> = recs.iter().map(|r| r.run_id.clone()).collect();
        write_file(&out.join("dendrogram.nwk"), dendro.to_newick(&labels) + "\n")?;
        dendro.cut(k).map_err(|e| CliError::Usage(e.to_string()))?
    };
    let mut csv = String::from("run_id,cluster,ratio\n");
    for (r, a) in recs.iter().zip(&assignments) {
        let _ = writeln!(csv, "{},{a},{}", r.run_id, r.ratio);
    }
    write_file(&out.join("assignments.csv"), csv)?;

    let groups = clustering::groups(&assignments);
    let mut summary = String::from("cluster,size,mean_ratio\n");
    for (c, g) in groups.iter().enumerate() {
        let mean = g.iter().map(|&i| recs[i].ratio).sum::<f64>() / g.len() as f64;
        let _ = writeln!(summary, "{c},{},{mean}", g.len());
    }
    print!("{summary}");
    write_file(&out.join("clusters.csv"), summary)?;

    // representatives keep absolute artefact paths so the file works as a manifest anywhere
    let reps = clustering::pick_representatives(&assignments, seed);
    let abs = fs::canonicalize(dir).unwrap_or_else(|_| dir.to_path_buf());
    let mut lines = String::new();
    for &i in &reps {
        let mut r = recs[i].clone();
        r.png = abs.join(&r.png).display().to_string();
        r.raw = abs.join(&r.raw).display().to_string();
        lines.push_str(&serde_json::to_string(&r).map_err(runtime)?);
        lines.push('\n');
    }
    write_file(&out.join("representatives.jsonl"), lines)?;
    let rasters = reps
        .iter()
        .map(|&i| load_raster(dir, &recs[i]))
        .collect::<Result<Vec<_>, _>>()?;
    gallery(&rasters, &out.join("representatives.png"))
}

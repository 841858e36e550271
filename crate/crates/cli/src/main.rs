//! `brw-arena`: command-line front end for calibration and the Monte Carlo
//! experiments. Reports go to stdout as JSON; experiments also write CSV files
//! and a `manifest.json` into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use brw_core::calibration::{
    check_assumptions, construct_noncoexistence_pair, solve_theta, theta_exists, DEFAULT_TOLERANCE,
};
use brw_core::engine::{FrontierSides, GenerationRecord, Walk};
use brw_core::experiments::{
    self, fluctuation_windows, overshoot_cap, overshoot_samples, overshoot_scaling_from_samples,
    run_coexistence, run_democracy, run_noncoexistence, tail_fit, ArenaKind, ArenaSetup,
    ExperimentConfig, Overshoot, BOOTSTRAP_RESAMPLES,
};
use brw_core::offspring::OffspringSpec;
use brw_core::rng::{tags, StreamKey};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "brw-arena", version, about = "Branching random walk laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tangent point, speed and fluctuation constants of a spec file.
    Calibrate {
        spec: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Report on the standing assumptions for a spec file.
    CheckAssumptions { spec: PathBuf },
    /// Build a red/blue pair with equal speeds and 3 theta_r < theta_b.
    ConstructPair {
        #[arg(long)]
        blue_mean: f64,
        /// Also write red.json and blue.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independent single-walk trajectories.
    Simulate(RunArgs),
    /// Two-color arena (coexistence or non-coexistence, per the config).
    Arena(RunArgs),
    /// First-overshoot times and their scaling in z.
    Overshoot(RunArgs),
    /// Upper tail of the centered maximum at n = horizon.
    Tailfit(RunArgs),
    /// Fluctuation windows over n_grid.
    Fluct(RunArgs),
    /// Democracy fractions over horizons.
    Democracy(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Calibrate { spec, tolerance } => calibrate(&spec, tolerance),
        Command::CheckAssumptions { spec } => print_json(&check_assumptions(&load_spec(&spec)?)),
        Command::ConstructPair { blue_mean, out } => construct_pair(blue_mean, out.as_deref()),
        Command::Simulate(args) => Experiment::open("simulate", &args)?.simulate(),
        Command::Arena(args) => Experiment::open("arena", &args)?.arena(),
        Command::Overshoot(args) => Experiment::open("overshoot", &args)?.overshoot(),
        Command::Tailfit(args) => Experiment::open("tailfit", &args)?.tailfit(),
        Command::Fluct(args) => Experiment::open("fluct", &args)?.fluct(),
        Command::Democracy(args) => Experiment::open("democracy", &args)?.democracy(),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_spec(path: &Path) -> Result<OffspringSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    OffspringSpec::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn calibrate(path: &Path, tolerance: f64) -> Result<()> {
    let spec = load_spec(path)?;
    let existence = theta_exists(&spec);
    let calibration = solve_theta(&spec, tolerance)?;
    let (lo, hi) = brw_core::calibration::fluct_bounds(&calibration);
    print_json(&json!({
        "existence": existence,
        "calibration": calibration,
        "speed": calibration.speed(),
        "fluct_bounds": [lo, hi],
        "default_window": brw_core::engine::EngineConfig::default_window(&calibration, &spec),
    }))
}

fn construct_pair(blue_mean: f64, out: Option<&Path>) -> Result<()> {
    let pair = construct_noncoexistence_pair(blue_mean)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("red.json"), pair.red.to_json())?;
        fs::write(dir.join("blue.json"), pair.blue.to_json())?;
    }
    print_json(&json!({
        "theta_r": pair.theta_r,
        "theta_b": pair.theta_b,
        "speed": pair.speed,
        "red_jump": pair.red_jump,
        "gap_constant_2c": pair.gap_constant_2c,
        "red": pair.red.to_document(),
        "blue": pair.blue.to_document(),
        "red_calibration": pair.red_calibration,
        "blue_calibration": pair.blue_calibration,
    }))
}

struct Experiment {
    command: &'static str,
    config: ExperimentConfig,
    config_hash: String,
    base: PathBuf,
    out: PathBuf,
    files: Vec<String>,
}

impl Experiment {
    fn open(command: &'static str, args: &RunArgs) -> Result<Self> {
        let text = fs::read_to_string(&args.config)
            .with_context(|| format!("reading {}", args.config.display()))?;
        let mut config = ExperimentConfig::from_json(&text)?;
        if let Some(seed) = args.seed {
            config.master_seed = seed;
        }
        let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
        let out = args
            .out
            .clone()
            .or_else(|| config.output.as_ref().map(|p| base.join(p)))
            .unwrap_or_else(|| PathBuf::from("brw-out"));
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let config_hash: String =
            Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        Ok(Experiment { command, config, config_hash, base, out, files: Vec::new() })
    }

    fn spec(&self, path: &Option<PathBuf>, what: &str) -> Result<OffspringSpec> {
        match path {
            Some(p) => load_spec(&self.base.join(p)),
            None => bail!("config needs {what}"),
        }
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut writer = csv::Writer::from_path(self.out.join(name))?;
        for row in rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `report.json` and `manifest.json`, and echoes the report.
    fn finish<T: Serialize>(mut self, report: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(report)?;
        fs::write(self.out.join("report.json"), &text)?;
        self.files.push("report.json".into());
        let manifest = json!({
            "command": self.command,
            "config_sha256": self.config_hash,
            "master_seed": self.config.master_seed,
            "version": env!("CARGO_PKG_VERSION"),
            "files": self.files,
        });
        fs::write(self.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        println!("{text}");
        Ok(())
    }

    fn simulate(mut self) -> Result<()> {
        let spec = self.spec(&self.config.red_spec, "red_spec")?;
        let calib = solve_theta(&spec, DEFAULT_TOLERANCE).ok();
        let engine = self.config.engine.resolve(&spec, calib.as_ref(), FrontierSides::Upper)?;
        let (seed, horizon) = (self.config.master_seed, self.config.horizon);
        let runs = experiments::farm(self.config.replicas, |r| {
            let mut walk = Walk::new(&spec, engine, 0, StreamKey::new(seed, r, tags::SINGLE))?;
            Ok(walk.run(horizon)?)
        })?;
        #[derive(Serialize)]
        struct Row {
            replica: u64,
            n: u64,
            #[serde(rename = "M_n")]
            max: i64,
            #[serde(rename = "L_n")]
            min: i64,
            total: u64,
            saturated_flag: bool,
        }
        let rows = runs.iter().enumerate().flat_map(|(r, recs)| {
            recs.iter().map(move |g| Row {
                replica: r as u64,
                n: g.n,
                max: g.max,
                min: g.min,
                total: g.total,
                saturated_flag: g.saturated,
            })
        });
        self.csv("trajectories.csv", rows)?;
        let finals: Vec<&GenerationRecord> = runs.iter().map(|r| r.last().expect("generation 0")).collect();
        let mean_max = finals.iter().map(|g| g.max as f64).sum::<f64>() / finals.len() as f64;
        let report = json!({
            "horizon": horizon,
            "replicas": self.config.replicas,
            "engine": engine,
            "calibration": calib,
            "mean_final_max": mean_max,
            "mean_speed": mean_max / horizon.max(1) as f64,
            "saturated_replicas": finals.iter().filter(|g| g.saturated).count(),
        });
        self.finish(&report)
    }

    fn arena(mut self) -> Result<()> {
        let c = self.config.clone();
        match c.arena {
            ArenaKind::Coexistence => {
                let red = self.spec(&c.red_spec, "red_spec")?;
                let blue = match &c.blue_spec {
                    Some(_) => self.spec(&c.blue_spec, "blue_spec")?,
                    None => red.clone(),
                };
                let mut setup = ArenaSetup::new(&red, &blue, &c.engine)?;
                setup.red_start = c.red_start;
                setup.blue_start = c.blue_start;
                setup.tie_break = c.tie_break;
                let report = run_coexistence(
                    &setup,
                    c.horizon,
                    c.replicas,
                    c.master_seed,
                    c.site_threshold,
                    &c.z_grid,
                    c.c1,
                    c.c2,
                )?;
                self.csv("arena.csv", report.first_run.records.iter())?;
                #[derive(Serialize)]
                struct Row {
                    replica: usize,
                    red_sites: u64,
                    blue_sites: u64,
                    swaps: u64,
                    both_above_threshold: bool,
                    saturated: bool,
                }
                let rows: Vec<Row> = report
                    .replicas
                    .iter()
                    .enumerate()
                    .map(|(i, r)| Row {
                        replica: i,
                        red_sites: r.red_sites,
                        blue_sites: r.blue_sites,
                        swaps: r.swaps,
                        both_above_threshold: r.both_above_threshold,
                        saturated: r.saturated,
                    })
                    .collect();
                self.csv("replicas.csv", rows)?;
                self.finish(&report)
            }
            ArenaKind::Noncoexistence => {
                let pair = match c.construct_pair {
                    Some(m) => construct_noncoexistence_pair(m)?,
                    None => bail!("a non-coexistence arena needs construct_pair (the blue count mean)"),
                };
                let report = run_noncoexistence(
                    &pair,
                    &c.engine,
                    c.tie_break,
                    c.horizon,
                    c.replicas,
                    c.master_seed,
                    c.gap_fit_start,
                    c.plateau_share,
                )?;
                self.csv("arena.csv", report.first_run.records.iter())?;
                self.csv("replicas.csv", report.replicas.iter())?;
                self.finish(&report)
            }
        }
    }

    fn overshoot(mut self) -> Result<()> {
        let c = self.config.clone();
        let spec = self.spec(&c.red_spec, "red_spec")?;
        let calib = solve_theta(&spec, DEFAULT_TOLERANCE)?;
        let engine = c.engine.resolve(&spec, Some(&calib), FrontierSides::Upper)?;
        let caps: Vec<u64> =
            c.z_grid.iter().map(|&z| overshoot_cap(&calib, z, c.cap_factor, c.generation_cap)).collect();
        let samples = overshoot_samples(&spec, &calib, &c.z_grid, &caps, c.replicas, engine, c.master_seed)?;
        #[derive(Serialize)]
        struct Row {
            replica: usize,
            z: f64,
            censored: bool,
            /// Hit time, or the cap when censored.
            time: u64,
        }
        let mut rows = Vec::new();
        for (r, per_z) in samples.iter().enumerate() {
            for (o, &z) in per_z.iter().zip(&c.z_grid) {
                let (censored, time) = match *o {
                    Overshoot::Hit(t) => (false, t),
                    Overshoot::Censored { cap } => (true, cap),
                };
                rows.push(Row { replica: r, z, censored, time });
            }
        }
        // written before the fit so censored replicas are on disk either way
        self.csv("overshoot.csv", rows)?;
        let mut rng = StreamKey::new(c.master_seed, u64::MAX, tags::BOOTSTRAP).rng();
        let report = match overshoot_scaling_from_samples(&c.z_grid, samples, &caps, BOOTSTRAP_RESAMPLES, &mut rng) {
            Ok(r) => r,
            Err(e) => {
                let message = e.to_string();
                self.finish(&json!({ "theta_o": calib.theta_o, "caps": caps, "error": message }))?;
                bail!(message);
            }
        };
        self.csv("levels.csv", report.levels.iter())?;
        self.finish(&json!({
            "theta_o": calib.theta_o,
            "levels": report.levels,
            "slope": report.slope,
            "intercept": report.intercept,
            "ci_95": report.ci_95,
            "bootstrap_used": report.bootstrap_used,
        }))
    }

    fn tailfit(mut self) -> Result<()> {
        let c = self.config.clone();
        let spec = self.spec(&c.red_spec, "red_spec")?;
        let calib = solve_theta(&spec, DEFAULT_TOLERANCE)?;
        let engine = c.engine.resolve(&spec, Some(&calib), FrontierSides::Upper)?;
        let report = tail_fit(&spec, &calib, c.horizon, c.replicas, engine, c.master_seed)?;
        self.csv("tail.csv", report.grid.iter())?;
        self.finish(&json!({
            "n": report.n,
            "theta_o": report.theta,
            "rate": report.rate,
            "fit_points": report.fit_points,
            "c": report.c,
            "majorizes": report.majorizes,
            "violations": report.violations,
        }))
    }

    fn fluct(mut self) -> Result<()> {
        let c = self.config.clone();
        let spec = self.spec(&c.red_spec, "red_spec")?;
        let calib = solve_theta(&spec, DEFAULT_TOLERANCE)?;
        let engine = c.engine.resolve(&spec, Some(&calib), FrontierSides::Upper)?;
        let summaries =
            fluctuation_windows(&spec, &calib, &c.n_grid, c.replicas, c.epsilon, engine, c.master_seed)?;
        #[derive(Serialize)]
        struct Row {
            n: u64,
            mean: f64,
            q10: f64,
            q50: f64,
            q90: f64,
            window_lo: f64,
            window_hi: f64,
            fraction_inside: f64,
        }
        self.csv(
            "fluct.csv",
            summaries.iter().map(|s| Row {
                n: s.n,
                mean: s.mean,
                q10: s.q10,
                q50: s.q50,
                q90: s.q90,
                window_lo: s.window.0,
                window_hi: s.window.1,
                fraction_inside: s.fraction_inside,
            }),
        )?;
        self.finish(&json!({ "calibration": calib, "summaries": summaries }))
    }

    fn democracy(mut self) -> Result<()> {
        let c = self.config.clone();
        let spec = self.spec(&c.red_spec, "red_spec")?;
        if c.horizons.is_empty() {
            bail!("config needs horizons");
        }
        let report = run_democracy(&spec, c.q, &c.horizons, c.replicas, c.tree_budget, c.master_seed)?;
        #[derive(Serialize)]
        struct Row {
            horizon: u32,
            mean_fraction: f64,
        }
        self.csv(
            "democracy.csv",
            report.horizons.iter().zip(&report.mean).map(|(&horizon, &mean_fraction)| Row {
                horizon,
                mean_fraction,
            }),
        )?;
        self.finish(&report)
    }
}

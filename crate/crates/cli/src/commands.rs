//! Subcommand definitions and their implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ofgnss_core::constellation::visible_satellites;
use ofgnss_core::scenario::{compare_runs, run_scenario};
use ofgnss_core::{EstimatorConfig, GeodeticCoord, RunMetrics, RunMode, Scenario};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::parse_scenario_config;
use crate::gpx::{export_gpx, import_gpx};
use crate::plot::{emit_plot, PlotKind};
use crate::records::{read_rows, rows_from_records, write_rows, RecordRow};
use crate::track::smooth_track;
use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ofgnss", version, about = "Optical-flow aided GNSS simulation and track tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write records, metrics and plots.
    Simulate(SimulateArgs),
    /// Print the horizontal RMSE improvement of DIR1 over the baseline DIR2.
    Compare { dir1: PathBuf, dir2: PathBuf },
    /// Filter a GPX track with the navigation filter.
    Smooth(SmoothArgs),
    /// Render a figure from a records CSV.
    Plot(PlotArgs),
    /// Print a satellite visibility table as CSV.
    Constellation(ConstellationArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "of_gnss")]
    pub mode: RunMode,
    /// Overrides the config's rng_seed.
    #[arg(long, env = "OFGNSS_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Run N seeds (seed, seed+1, ...) in parallel and report medians.
    #[arg(long, value_name = "N")]
    pub monte_carlo: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Position noise of each track point in metres.
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, default_value = "ground_track")]
    pub kind: PlotKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConstellationArgs {
    /// Take observer, mask and constellation from a scenario document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub lat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alt: f64,
    #[arg(long, default_value_t = 86_400.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 60.0)]
    pub step: f64,
    #[arg(long)]
    pub mask: Option<f64>,
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => simulate(&args, stdout),
        Command::Compare { dir1, dir2 } => {
            let pct = compare(&dir1, &dir2)?;
            say(stdout, format!("improvement: {pct:.4}%"))
        }
        Command::Smooth(args) => smooth(&args, stdout),
        Command::Plot(args) => plot(&args),
        Command::Constellation(args) => constellation(&args, stdout),
    }
}

fn say(out: &mut dyn Write, line: String) -> CliResult<()> {
    writeln!(out, "{line}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    parse_scenario_config(&read(path)?).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_metrics(dir: &Path) -> CliResult<RunMetrics> {
    let path = dir.join("metrics.json");
    serde_json::from_str(&read(&path)?).map_err(|e| CliError::io(&path, e))
}

fn write_records(dir: &Path, rows: &[RecordRow]) -> CliResult<()> {
    let path = dir.join("records.csv");
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).map_err(|e| CliError::io(&path, e))?;
    write(&path, buf)
}

fn write_plots(dir: &Path, rows: &[RecordRow]) -> CliResult<()> {
    for kind in PlotKind::ALL {
        let svg = emit_plot(rows, kind).map_err(CliError::runtime)?;
        write(&dir.join(format!("{}.svg", kind.as_str())), svg)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MonteCarloRow {
    seed: u64,
    horizontal_rmse: f64,
    vertical_rmse: f64,
    max_horizontal_error: f64,
    velocity_rmse: f64,
    detection_latency: Option<f64>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Field-wise median; latency over the runs that detected.
pub fn median_metrics(runs: &[RunMetrics]) -> RunMetrics {
    let field = |f: fn(&RunMetrics) -> f64| median(runs.iter().map(f).collect()).unwrap_or(0.0);
    RunMetrics {
        horizontal_rmse: field(|m| m.horizontal_rmse),
        vertical_rmse: field(|m| m.vertical_rmse),
        max_horizontal_error: field(|m| m.max_horizontal_error),
        velocity_rmse: field(|m| m.velocity_rmse),
        detection_latency: median(runs.iter().filter_map(|m| m.detection_latency).collect()),
        improvement_vs_baseline: None,
    }
}

fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut scenario = load_scenario(&args.config)?;
    if let Some(seed) = args.seed {
        scenario.rng_seed = seed;
    }
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let base = run_scenario(&scenario, args.mode).map_err(CliError::runtime)?;
    let rows = rows_from_records(&base.records);
    write_records(&args.out, &rows)?;
    write_plots(&args.out, &rows)?;

    let metrics = match args.monte_carlo {
        None => base.metrics,
        Some(n) => {
            let runs = (0..n as u64)
                .into_par_iter()
                .map(|k| {
                    let mut s = scenario.clone();
                    s.rng_seed = scenario.rng_seed.wrapping_add(k);
                    run_scenario(&s, args.mode).map(|o| (s.rng_seed, o.metrics))
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::runtime)?;
            let path = args.out.join("monte_carlo.csv");
            let mut w = csv::Writer::from_writer(Vec::new());
            for (seed, m) in &runs {
                w.serialize(MonteCarloRow {
                    seed: *seed,
                    horizontal_rmse: m.horizontal_rmse,
                    vertical_rmse: m.vertical_rmse,
                    max_horizontal_error: m.max_horizontal_error,
                    velocity_rmse: m.velocity_rmse,
                    detection_latency: m.detection_latency,
                })
                .map_err(|e| CliError::io(&path, e))?;
            }
            write(&path, w.into_inner().map_err(|e| CliError::io(&path, e))?)?;
            let all: Vec<RunMetrics> = runs.into_iter().map(|(_, m)| m).collect();
            median_metrics(&all)
        }
    };

    let json = serde_json::to_string_pretty(&metrics).map_err(CliError::runtime)? + "\n";
    write(&args.out.join("metrics.json"), json)?;
    let mut summary = format!(
        "scenario: {}\nmode: {}\nseed: {}\n",
        scenario.name,
        args.mode.as_str(),
        scenario.rng_seed
    );
    if let Some(n) = args.monte_carlo {
        summary.push_str(&format!("monte_carlo_runs: {n} (medians)\n"));
    }
    summary.push_str(&metrics.summary());
    if !summary.ends_with('\n') {
        summary.push('\n');
    }
    write(&args.out.join("summary.txt"), &summary)?;
    say(stdout, summary.trim_end().to_string())
}

pub fn compare(dir1: &Path, dir2: &Path) -> CliResult<f64> {
    let a = read_metrics(dir1)?;
    let b = read_metrics(dir2)?;
    compare_runs(&a, &b).map_err(CliError::runtime)
}

fn smooth(args: &SmoothArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if !(args.sigma > 0.0 && args.sigma.is_finite()) {
        return Err(CliError::runtime(format!("--sigma must be > 0, got {}", args.sigma)));
    }
    let track = import_gpx(&read(&args.input)?).map_err(|e| CliError::io(&args.input, e))?;
    let smoothed = smooth_track(&track, &EstimatorConfig::default(), args.sigma).map_err(CliError::runtime)?;
    let doc = export_gpx(&smoothed.track).map_err(CliError::runtime)?;
    write(&args.out, doc)?;
    let flagged = smoothed.diagnostics.iter().filter(|r| r.flagged).count();
    say(stdout, format!("points: {}\nflagged: {flagged}", smoothed.track.len()))
}

fn plot(args: &PlotArgs) -> CliResult<()> {
    let file = fs::File::open(&args.records).map_err(|e| CliError::io(&args.records, e))?;
    let rows = read_rows(file).map_err(|e| CliError::io(&args.records, e))?;
    let svg = emit_plot(&rows, args.kind).map_err(CliError::runtime)?;
    write(&args.out, svg)
}

fn constellation(args: &ConstellationArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let scenario = args.config.as_deref().map(load_scenario).transpose()?;
    let origin = scenario.as_ref().map(|s| s.trajectory.origin());
    let lat = args.lat.or(origin.map(|o| o.lat_deg())).unwrap_or(20.0);
    let lon = args.lon.or(origin.map(|o| o.lon_deg())).unwrap_or(78.0);
    let alt = origin.filter(|_| args.lat.is_none() && args.lon.is_none()).map_or(args.alt, |o| o.alt());
    let user = GeodeticCoord::from_degrees(lat, lon, alt).map_err(CliError::runtime)?;
    let mask = args
        .mask
        .or(scenario.as_ref().map(|s| s.elevation_mask_deg))
        .unwrap_or(ofgnss_core::scenario::DEFAULT_ELEVATION_MASK_DEG);
    let sats = scenario.as_ref().map_or_else(ofgnss_core::constellation::default_navic_constellation, |s| s.constellation());
    if !(args.step > 0.0 && args.duration >= 0.0) {
        return Err(CliError::runtime("--step must be > 0 and --duration >= 0"));
    }

    let mut out = String::from("time,sat,elevation_deg,azimuth_deg,range_m\n");
    let user_ecef = ofgnss_core::geodesy::geodetic_to_ecef(&user);
    let steps = (args.duration / args.step).floor() as u64;
    let mut min_visible = usize::MAX;
    for k in 0..=steps {
        let t = k as f64 * args.step;
        let visible = visible_satellites(&user, t, mask, &sats).map_err(CliError::runtime)?;
        min_visible = min_visible.min(visible.len());
        for v in visible {
            out.push_str(&format!(
                "{t:.1},{},{:.4},{:.4},{:.1}\n",
                v.state.sat_id,
                v.look.elevation_deg(),
                v.look.azimuth_deg(),
                v.state.pos.distance(&user_ecef)
            ));
        }
    }
    stdout
        .write_all(out.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    eprintln!("minimum visible satellites: {min_visible}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(h: f64, latency: Option<f64>) -> RunMetrics {
        RunMetrics {
            horizontal_rmse: h,
            vertical_rmse: 2.0 * h,
            max_horizontal_error: 3.0 * h,
            velocity_rmse: 0.1,
            detection_latency: latency,
            improvement_vs_baseline: None,
        }
    }

    #[test]
    fn medians_ignore_missing_latency() {
        let m = median_metrics(&[metrics(1.0, Some(4.0)), metrics(3.0, None), metrics(2.0, Some(6.0))]);
        assert_eq!(m.horizontal_rmse, 2.0);
        assert_eq!(m.max_horizontal_error, 6.0);
        assert_eq!(m.detection_latency, Some(5.0));
        assert_eq!(median_metrics(&[metrics(1.0, None)]).detection_latency, None);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

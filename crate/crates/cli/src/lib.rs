//! Command-line pipeline: simulate, analyze, reconstruct, invert and report.
//!
//! Every subcommand is first turned into a [`RunConfig`] and then executed from it, so a
//! report can be replayed from the configuration it echoes.

use clap::{Args, Parser, Subcommand};
use std::path::Path;
use twinbeam::criteria::{analyze, AnalysisOptions};
use twinbeam::dist::{component_sum_cutoff, detected_twb_distribution};
use twinbeam::intensity::{
    detected_intensity_quasi, invert_mandel_2d, matched_damping, negativity_report, Damping, GridSpec,
    SeriesOptions, SeriesOrder,
};
use twinbeam::io::{self, Command, Provenance, ReportDocument, RunConfig};
use twinbeam::reconstruct::{fit_model, FitOptions};
use twinbeam::simulator::generate_shots;
use twinbeam::{Error, Result};

/// Default negativity threshold, relative to the grid maximum.
pub const DEFAULT_NEGATIVITY_EPS: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "twb", version, about = "Twin-beam photon statistics pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Simulate detected shots from a model file.
    Simulate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        shots: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: String,
        /// Also write the histogram as JSON.
        #[arg(long)]
        histogram: Option<String>,
    },
    /// Nonclassicality criteria with bootstrap errors.
    Analyze {
        shots: String,
        #[arg(long)]
        out: String,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Fit the twin-beam model to a shot file.
    Reconstruct {
        shots: String,
        #[arg(long)]
        out: String,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 1000)]
        min_shots: u64,
        #[arg(long, default_value_t = 4000)]
        max_evals: usize,
    },
    /// Intensity quasi-distribution on a grid.
    Intensity {
        fit: String,
        #[arg(long, value_parser = ["photons", "detected"])]
        which: String,
        /// `K`, `K_s,K_i`, `support`, or `noise:<max standard error>` (detected histograms only).
        #[arg(long, default_value = "support")]
        order: String,
        /// `none`, `auto`, `<q>`, or `matched:<q>` (photon-level `q` mapped to detected counts).
        #[arg(long, default_value = "none")]
        damping: String,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Axis extent; `W` or `W_s,W_i`.
        #[arg(long)]
        wmax: Option<String>,
        /// Detected shots to invert instead of the fitted detected distribution.
        #[arg(long)]
        histogram: Option<String>,
        #[arg(long)]
        out: String,
    },
    /// Assemble a report from shots and optional fit and grid files.
    Report {
        shots: String,
        #[arg(long)]
        fit: Option<String>,
        #[arg(long)]
        intensity: Option<String>,
        /// Negativity threshold relative to the grid maximum.
        #[arg(long, default_value_t = DEFAULT_NEGATIVITY_EPS)]
        negativity_eps: f64,
        #[arg(long)]
        out: String,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Re-run the configuration echoed in a report, writing to a new output.
    Replay {
        report: String,
        #[arg(long)]
        out: String,
    },
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Efficiency known from a calibration, enables the sub-shot-noise band test.
    #[arg(long)]
    eta: Option<f64>,
}

impl AnalysisArgs {
    fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            bootstrap: self.bootstrap,
            seed: self.seed,
            known_eta: self.eta,
        }
    }
}

/// Parses `argv` (including the program name), runs it and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match build_config(cli.command).and_then(|c| execute(&c)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("twb: {e}");
            if e.is_data_error() {
                1
            } else {
                2
            }
        }
    }
}

fn build_config(sub: Sub) -> Result<RunConfig> {
    let cfg = match sub {
        Sub::Simulate {
            model,
            shots,
            seed,
            out,
            histogram,
        } => {
            let mut c = RunConfig::new(Command::Simulate, out);
            c.model = Some(model);
            c.shots = Some(shots);
            c.seed = Some(seed);
            c.histogram_output = histogram;
            c
        }
        Sub::Analyze { shots, out, analysis } => {
            let mut c = RunConfig::new(Command::Analyze, out);
            c.inputs = vec![shots];
            c.seed = Some(analysis.seed);
            c.analysis = Some(analysis.options());
            c
        }
        Sub::Reconstruct {
            shots,
            out,
            restarts,
            min_shots,
            max_evals,
        } => {
            let mut c = RunConfig::new(Command::Reconstruct, out);
            c.inputs = vec![shots];
            c.fit = Some(FitOptions {
                restarts,
                min_shots,
                max_evals,
                ..FitOptions::default()
            });
            c
        }
        Sub::Intensity {
            fit,
            which,
            order,
            damping,
            points,
            wmax,
            histogram,
            out,
        } => {
            let mut c = RunConfig::new(Command::Intensity, out);
            let damping = parse_damping(&damping, &fit)?;
            c.series = Some(SeriesOptions {
                order: parse_order(&order)?,
                damping,
                ..SeriesOptions::default()
            });
            c.grid = Some(GridSpec {
                points,
                w_max: wmax.as_deref().map(parse_pair).transpose()?,
            });
            c.which = Some(which);
            c.fit_input = Some(fit);
            c.histogram_input = histogram;
            c
        }
        Sub::Report {
            shots,
            fit,
            intensity,
            negativity_eps,
            out,
            analysis,
        } => {
            let mut c = RunConfig::new(Command::Report, out);
            c.inputs = vec![shots];
            c.seed = Some(analysis.seed);
            c.analysis = Some(analysis.options());
            c.fit_input = fit;
            c.grid_input = intensity;
            c.negativity_eps = Some(negativity_eps);
            c
        }
        Sub::Replay { report, out } => {
            let doc = io::load_report(&report)?;
            let mut c = doc.provenance.config;
            c.output = out;
            c
        }
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(c: &RunConfig) -> Result<()> {
    for p in c.input_paths() {
        if !Path::new(p).exists() {
            return Err(Error::Config(format!("input file {p} does not exist")));
        }
    }
    if c.command == Command::Simulate && c.seed.is_none() {
        return Err(Error::Config("simulate needs a seed".into()));
    }
    Ok(())
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("expected a number or a pair `a,b`, got {s:?}"));
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [w] => Ok((w, w)),
        [a, b] => Ok((a, b)),
        _ => Err(bad()),
    }
}

fn parse_order(s: &str) -> Result<SeriesOrder> {
    let bad = || Error::Config(format!("invalid order {s:?}"));
    if s == "support" {
        return Ok(SeriesOrder::Support);
    }
    if let Some(se) = s.strip_prefix("noise:") {
        let max_std_error = se.parse().map_err(|_| bad())?;
        return Ok(SeriesOrder::NoiseLimited { max_std_error });
    }
    let parts: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [k] => Ok(SeriesOrder::Fixed(k)),
        [a, b] => Ok(SeriesOrder::PerAxis(a, b)),
        _ => Err(bad()),
    }
}

/// `matched:<q>` resolves against the mean efficiency of the fit, so the stored config
/// always carries the damping actually applied.
fn parse_damping(s: &str, fit: &str) -> Result<Damping> {
    let bad = || Error::Config(format!("invalid damping {s:?}"));
    match s {
        "none" => Ok(Damping::None),
        "auto" => Ok(Damping::Auto),
        _ => {
            if let Some(q) = s.strip_prefix("matched:") {
                let q: f64 = q.parse().map_err(|_| bad())?;
                let m = io::load_fit(fit)?.model.to_model()?;
                Ok(Damping::Geometric(matched_damping(q, 0.5 * (m.eta_s + m.eta_i))))
            } else {
                Ok(Damping::Geometric(s.parse().map_err(|_| bad())?))
            }
        }
    }
}

fn missing(what: &str) -> Error {
    Error::Config(format!("configuration lacks {what}"))
}

/// Runs a configuration, writing its outputs.
pub fn execute(c: &RunConfig) -> Result<()> {
    match c.command {
        Command::Simulate => {
            let model = io::load_model(c.model.as_ref().ok_or_else(|| missing("a model"))?)?;
            let shots = c.shots.ok_or_else(|| missing("a shot count"))?;
            let seed = c.seed.ok_or_else(|| missing("a seed"))?;
            let records = generate_shots(&model, shots, seed)?;
            io::save_shots(&c.output, &records)?;
            if let Some(h) = &c.histogram_output {
                io::save_histogram(h, &io::histogram_from_shots(&records)?)?;
            }
        }
        Command::Analyze => {
            let h = load_histogram(c)?;
            let opts = c.analysis.clone().unwrap_or_default();
            let criteria = analyze(&h, &opts)?;
            io::save_report(
                &c.output,
                &ReportDocument::new(criteria, Provenance::for_config(c)?),
            )?;
        }
        Command::Reconstruct => {
            let h = load_histogram(c)?;
            let opts = c.fit.clone().unwrap_or_default();
            let r = fit_model(&h, &opts)?;
            io::save_fit(&c.output, &r, &opts)?;
        }
        Command::Intensity => {
            let fit = io::load_fit(c.fit_input.as_ref().ok_or_else(|| missing("a fit file"))?)?;
            let opts = c.series.unwrap_or_default();
            let grid = c.grid.unwrap_or_default();
            let g = match c.which.as_deref() {
                Some("photons") => {
                    let r = fit.to_result()?;
                    invert_mandel_2d(&r.photon_dist, &opts, &grid)?
                }
                Some("detected") => match &c.histogram_input {
                    Some(path) => {
                        let h = io::histogram_from_shots(&io::load_shots(path)?)?;
                        detected_intensity_quasi(&h, &opts, &grid)?
                    }
                    None => {
                        let m = fit.model.to_model()?;
                        let tol = fit.options.tail_tol;
                        let rows = component_sum_cutoff(
                            &m.paired.thinned(m.eta_s),
                            &m.noise_s.thinned(m.eta_s),
                            tol,
                        )?;
                        let cols = component_sum_cutoff(
                            &m.paired.thinned(m.eta_i),
                            &m.noise_i.thinned(m.eta_i),
                            tol,
                        )?;
                        let p = detected_twb_distribution(&m, rows + 1, cols + 1, tol)?;
                        if let SeriesOrder::NoiseLimited { .. } = opts.order {
                            return Err(Error::Config("noise-limited order needs --histogram".into()));
                        }
                        invert_mandel_2d(&p, &opts, &grid)?
                    }
                },
                _ => return Err(missing("a valid `which`")),
            };
            io::save_grid(&c.output, &g)?;
        }
        Command::Report => {
            let h = load_histogram(c)?;
            let opts = c.analysis.clone().unwrap_or_default();
            let mut doc = ReportDocument::new(analyze(&h, &opts)?, Provenance::for_config(c)?);
            if let Some(f) = &c.fit_input {
                doc.reconstruction = Some(io::load_fit(f)?.to_result()?);
            }
            if let Some(g) = &c.grid_input {
                let grid = io::load_grid(g)?;
                let eps = c.negativity_eps.unwrap_or(DEFAULT_NEGATIVITY_EPS) * grid.max().0.abs();
                doc.negativity = Some(negativity_report(&grid, eps));
            }
            io::save_report(&c.output, &doc)?;
        }
    }
    Ok(())
}

fn load_histogram(c: &RunConfig) -> Result<twinbeam::JointHistogram> {
    let path = c.inputs.first().ok_or_else(|| missing("a shot file"))?;
    io::histogram_from_shots(&io::load_shots(path)?)
}

//! Experiment driver behind the `oamlink` binary.

pub mod config;
mod svg;

use std::f64::consts::{LN_2, PI};
use std::path::{Path, PathBuf};

use oamlink::analysis::BootstrapOptions;
use oamlink::measurement::{
    calibrate_r0, chsh_scan, default_fringe_grid, records_to_jsonl, FringeLine,
    REFERENCE_INTEGRATION_TIME, REFERENCE_PEAK_COUNTS,
};
use oamlink::modes::ModeVector;
use oamlink::state::{density_csv, DensityMatrixJson};
use oamlink::tomography::{reconstruct_with_error, simulate_tomo_counts, FidelityReport};
use oamlink::{
    apply_white_noise, build_joint_state, chsh, correlation_matrix, fit_fringe, fringe_scan,
    gaussian_spiral_spectrum, post_select, render_hologram, sector_state, spiral_bandwidth,
    split_seed, ChshResult, FringeFit, JointOamState, NoiseModel, OamIndex, TwoQubitState,
};
use serde::Serialize;

use config::{ExperimentConfig, HologramKind};

pub const ENV_SEED: &str = "OAMLINK_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Model(#[from] oamlink::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration and parameter errors, 3 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Model(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Correlation,
    Fringes,
    Chsh,
    Tomo,
    Hologram,
}

/// Seed precedence: command-line flag, then `OAMLINK_SEED`, then the config.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{ENV_SEED}={v:?} is not an unsigned integer"))),
        None => Ok(config),
    }
}

/// Runs one command and returns the files written.
pub fn run(
    command: Command,
    cfg: &ExperimentConfig,
    seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut w = Writer {
        dir: out,
        written: Vec::new(),
    };
    match command {
        Command::Correlation => cmd_correlation(cfg, seed, &mut w)?,
        Command::Fringes => cmd_fringes(cfg, seed, &mut w)?,
        Command::Chsh => cmd_chsh(cfg, seed, &mut w)?,
        Command::Tomo => cmd_tomo(cfg, seed, &mut w)?,
        Command::Hologram => cmd_hologram(cfg, &mut w)?,
    }
    Ok(w.written)
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, data).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, data: &str) -> Result<(), CliError> {
        self.bytes(name, data.as_bytes())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| oamlink::Error::Serialization(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)
    }
}

fn joint_state(cfg: &ExperimentConfig, l_p: i32) -> Result<JointOamState, CliError> {
    let spectrum =
        gaussian_spiral_spectrum(OamIndex(l_p), cfg.source.sigma, cfg.source.truncation)?;
    Ok(build_joint_state(spectrum))
}

fn m_range(cfg: &ExperimentConfig) -> std::ops::RangeInclusive<i32> {
    let m = cfg.experiment.m_range as i32;
    -m..=m
}

/// Configured rate scale, or the one placing the `l_p = 0` peak at the
/// reference count.
fn base_r0(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    if let Some(r0) = cfg.noise.r0 {
        return Ok(r0);
    }
    let reference = joint_state(cfg, 0)?;
    Ok(calibrate_r0(
        &reference,
        m_range(cfg),
        &cfg.noise_model(1.0),
        REFERENCE_PEAK_COUNTS,
        REFERENCE_INTEGRATION_TIME,
    )?)
}

/// Post-selected, noise-mixed qubit pair and the detector model whose rate
/// scale is the pair rate times the post-selection probability.
fn qubit_pair(cfg: &ExperimentConfig) -> Result<(TwoQubitState, NoiseModel), CliError> {
    let joint = joint_state(cfg, cfg.pump_oam())?;
    let l = cfg.experiment.subspace_l as i32;
    let pure = post_select(&joint, l)?;
    let state = apply_white_noise(&pure, cfg.noise.werner_p)?;
    let r0 = base_r0(cfg)? * joint.post_selection_probability(l);
    Ok((state, cfg.noise_model(r0)))
}

fn bootstrap(cfg: &ExperimentConfig, seed: u64) -> BootstrapOptions {
    BootstrapOptions {
        resamples: cfg.analysis.bootstrap_resamples,
        seed,
        ..BootstrapOptions::default()
    }
}

#[derive(Serialize)]
struct BandwidthReport {
    l_p: i32,
    sigma: f64,
    r0: f64,
    integration_time: f64,
    peak_expected: f64,
    bandwidth_fwhm: f64,
    gaussian_fwhm: f64,
}

fn cmd_correlation(cfg: &ExperimentConfig, seed: u64, w: &mut Writer) -> Result<(), CliError> {
    let l_p = cfg.pump_oam();
    let r0 = base_r0(cfg)?;
    let joint = joint_state(cfg, l_p)?;
    let t = cfg.experiment.integration_time;
    let m = correlation_matrix(&joint, m_range(cfg), &cfg.noise_model(r0), t, seed)?;
    let bandwidth = spiral_bandwidth(&m.expected, l_p)?;
    let peak = m
        .expected
        .values
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max);
    w.text("expected.csv", &m.expected.to_csv())?;
    w.text("sampled.csv", &m.sampled.to_csv())?;
    w.text("anti_diagonal.csv", &m.anti_diagonal_csv())?;
    w.json(
        "bandwidth.json",
        &BandwidthReport {
            l_p,
            sigma: cfg.source.sigma,
            r0,
            integration_time: t,
            peak_expected: peak,
            bandwidth_fwhm: bandwidth,
            gaussian_fwhm: 2.0 * (2.0 * LN_2).sqrt() * cfg.source.sigma,
        },
    )
}

#[derive(Serialize)]
struct FitEntry {
    theta_b: f64,
    #[serde(flatten)]
    fit: FringeFit,
}

#[derive(Serialize)]
struct FitReport {
    l: u32,
    werner_p: f64,
    fits: Vec<FitEntry>,
}

const FRINGE_COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

fn cmd_fringes(cfg: &ExperimentConfig, seed: u64, w: &mut Writer) -> Result<(), CliError> {
    let (state, noise) = qubit_pair(cfg)?;
    let l = cfg.experiment.subspace_l;
    let grid = default_fringe_grid(l, cfg.experiment.fringe_points);
    let period = PI / l as f64;
    let fine: Vec<f64> = (0..=128).map(|k| period * k as f64 / 128.0).collect();

    let mut records = Vec::new();
    let mut fits = Vec::new();
    let mut series = Vec::new();
    for (k, theta_b) in [0.0, PI / (4.0 * l as f64)].into_iter().enumerate() {
        let scan = fringe_scan(
            &state,
            l,
            theta_b,
            &grid,
            &noise,
            cfg.experiment.integration_time,
            split_seed(seed, k as u64),
        )?;
        let fit = fit_fringe(&scan, l)?;
        w.text(&format!("fit_curve_{k}.csv"), &fit.curve_csv(&fine))?;
        let color = FRINGE_COLORS[k];
        series.push(svg::Series {
            name: format!("theta_B = {theta_b:.4}, V = {:.4}", fit.visibility),
            color,
            style: svg::Style::Markers,
            points: scan
                .iter()
                .filter_map(|r| r.setting_a.theta().map(|t| (t, r.counts as f64)))
                .collect(),
        });
        series.push(svg::Series {
            name: String::new(),
            color,
            style: svg::Style::Line,
            points: fine.iter().map(|&t| (t, fit.curve(t))).collect(),
        });
        fits.push(FitEntry { theta_b, fit });
        records.extend(scan);
    }
    w.text("records.jsonl", &records_to_jsonl(&records)?)?;
    w.json(
        "fit.json",
        &FitReport {
            l,
            werner_p: cfg.noise.werner_p,
            fits,
        },
    )?;
    let title = format!("Sector-state fringes, l = {l}");
    w.text(
        "fringe.svg",
        &svg::chart(&title, "theta_A (rad)", "coincidences", &series),
    )
}

#[derive(Serialize)]
struct ChshReport {
    #[serde(flatten)]
    result: ChshResult,
    werner_p: f64,
    records: Vec<FringeLine>,
}

fn cmd_chsh(cfg: &ExperimentConfig, seed: u64, w: &mut Writer) -> Result<(), CliError> {
    let (state, noise) = qubit_pair(cfg)?;
    let l = cfg.experiment.subspace_l;
    let records = chsh_scan(
        &state,
        l,
        &noise,
        cfg.experiment.integration_time,
        split_seed(seed, 0),
    )?;
    let result = chsh(&records, l, &bootstrap(cfg, split_seed(seed, 1)))?;
    let lines = records
        .iter()
        .map(FringeLine::try_from)
        .collect::<Result<Vec<_>, _>>()?;
    w.json(
        "chsh.json",
        &ChshReport {
            result,
            werner_p: cfg.noise.werner_p,
            records: lines,
        },
    )
}

fn cmd_tomo(cfg: &ExperimentConfig, seed: u64, w: &mut Writer) -> Result<(), CliError> {
    let (state, noise) = qubit_pair(cfg)?;
    let records = simulate_tomo_counts(
        &state,
        &noise,
        cfg.experiment.integration_time,
        split_seed(seed, 0),
    )?;
    let result = reconstruct_with_error(&records, &bootstrap(cfg, split_seed(seed, 1)))?;

    let mut counts = String::from("setting,counts\n");
    for (pair, r) in oamlink::tomo_basis(state.l() as i32)?.iter().zip(&records) {
        counts.push_str(&format!("{},{}\n", pair.label, r.counts));
    }
    w.text("tomo_counts.csv", &counts)?;
    w.json("rho.json", &DensityMatrixJson::from(&result.rho_hat))?;
    w.text("rho_real.csv", &density_csv(&result.rho_hat, false))?;
    w.text("rho_imag.csv", &density_csv(&result.rho_hat, true))?;
    w.json("fidelity.json", &FidelityReport::from(&result))
}

fn cmd_hologram(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    let h = &cfg.hologram;
    let mode = match h.kind {
        HologramKind::Sector => sector_state(h.l, h.theta)?,
        HologramKind::Eigen => ModeVector::eigenmode(h.l, h.l.unsigned_abs().max(1))?,
    };
    let holo = render_hologram(&mode, h.width, h.height)?;
    w.bytes("hologram.pgm", &holo.to_pgm())
}

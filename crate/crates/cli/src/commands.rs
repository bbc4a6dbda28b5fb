//! Implementations of the five subcommands.

use std::path::{Path, PathBuf};

use serde::Serialize;

use modesplit_core::analyze::{self, EllipticityReport};
use modesplit_core::beam::{numerical_modes, BeamSpec};
use modesplit_core::error::Error as CoreError;
use modesplit_core::splitting::{predict_pairs, ModePair};
use modesplit_core::synth::{synthesize, Spectrum};
use modesplit_core::xsection::{EllipseSection, StiffnessAxis};

use crate::config::{self, material_or_silica, SimulateConfig, SweepConfig, SynthConfig};
use crate::manifest::RunManifest;
use crate::svg::Plot;
use crate::{io, CliError, CliResult, OrderRange};

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::input(anyhow::anyhow!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    io::write_atomic(path, text.as_bytes())
}

fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::input(anyhow::anyhow!("creating {}: {e}", path.display())))
}

// ---------------------------------------------------------------- simulate

fn simulate_uniform_series(
    cfg: &SimulateConfig,
    orders: OrderRange,
) -> CliResult<Vec<(f64, Vec<ModePair>)>> {
    let material = material_or_silica(cfg.material)?;
    if cfg.ellipticities.is_empty() {
        return Err(CliError::input(anyhow::anyhow!(
            "config needs a non-empty \"ellipticities\" list (or a \"profile_csv\")"
        )));
    }
    let mut series = Vec::new();
    for &eps in &cfg.ellipticities {
        let section =
            EllipseSection::from_mean_radius(cfg.mean_radius, eps).map_err(CliError::from_core)?;
        let beam =
            BeamSpec::uniform(material, cfg.length, section).map_err(CliError::from_core)?;
        let model = cfg
            .convergence
            .map(|c| c.to_model(section.ellipticity()))
            .transpose()?;
        let pairs = predict_pairs(&beam, (orders.min, orders.max), model.as_ref())
            .map_err(CliError::from_core)?;
        series.push((eps, pairs));
    }
    Ok(series)
}

fn simulate_profile_pairs(cfg: &SimulateConfig, orders: OrderRange) -> CliResult<Vec<ModePair>> {
    let material = material_or_silica(cfg.material)?;
    let path = PathBuf::from(cfg.profile_csv.as_ref().expect("caller checked"));
    let beam = io::read_profile_beam(&path, material, cfg.length)?;
    let lo = numerical_modes(&beam, StiffnessAxis::Lower, orders.max, cfg.grid_points)
        .map_err(CliError::from_core)?;
    let hi = numerical_modes(&beam, StiffnessAxis::Higher, orders.max, cfg.grid_points)
        .map_err(CliError::from_core)?;
    let mut pairs = Vec::new();
    for (l, h) in lo.iter().zip(&hi) {
        if l.order >= orders.min {
            pairs.push(ModePair::new(l.order, l.frequency, h.frequency).map_err(CliError::from_core)?);
        }
    }
    Ok(pairs)
}

pub fn simulate(
    config_path: &Path,
    out: &Path,
    orders: Option<OrderRange>,
    svg: bool,
) -> CliResult<()> {
    let (cfg, text): (SimulateConfig, _) = config::load(config_path)?;
    let orders = orders.unwrap_or(OrderRange { min: 1, max: 30 });
    ensure_dir(out)?;
    let mut manifest = RunManifest::new("simulate")
        .with_config_text(&text)?
        .input(config_path);
    if let Some(profile) = &cfg.profile_csv {
        manifest = manifest.input(Path::new(profile));
        let pairs = simulate_profile_pairs(&cfg, orders)?;
        let path = out.join("pairs_profile.csv");
        io::write_pairs_csv(&path, &pairs)?;
        manifest = manifest.output(&path);
        if svg {
            let mut plot = Plot::new("Splitting ratio by order", "mode order", "f_high / f_low");
            plot.add_line(
                "profile",
                pairs.iter().map(|p| (p.order as f64, p.ratio())).collect(),
            );
            let path = out.join("ratios.svg");
            io::write_atomic(&path, plot.render().as_bytes())?;
            manifest = manifest.output(&path);
        }
    } else {
        let series = simulate_uniform_series(&cfg, orders)?;
        let mut plot = Plot::new("Splitting ratio by order", "mode order", "f_high / f_low");
        for (eps, pairs) in &series {
            let path = out.join(format!("pairs_eps{eps:.6}.csv"));
            io::write_pairs_csv(&path, pairs)?;
            manifest = manifest.output(&path);
            plot.add_line(
                &format!("eps = {}", io::fmt_ratio(*eps)),
                pairs.iter().map(|p| (p.order as f64, p.ratio())).collect(),
            );
        }
        if svg {
            let path = out.join("ratios.svg");
            io::write_atomic(&path, plot.render().as_bytes())?;
            manifest = manifest.output(&path);
        }
    }
    manifest.write_beside(out)
}

// ------------------------------------------------------------------- synth

fn entropy_seed() -> u64 {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    now ^ (std::process::id() as u64).rotate_left(32)
}

fn spectrum_plot(spectrum: &Spectrum, title: &str) -> Plot {
    let mut plot = Plot::new(title, "frequency (Hz)", "log10 PSD");
    plot.add_line(
        "psd",
        spectrum
            .frequencies
            .iter()
            .zip(&spectrum.psd)
            .map(|(f, p)| (*f, p.max(1e-300).log10()))
            .collect(),
    );
    plot
}

pub fn synth(config_path: &Path, seed_flag: Option<u64>, out: &Path, svg: bool) -> CliResult<()> {
    let (cfg, text): (SynthConfig, _) = config::load(config_path)?;
    let seed = seed_flag.or(cfg.seed).unwrap_or_else(entropy_seed);
    let spectrum_config = cfg.to_spectrum_config(seed)?;
    let spectrum = synthesize(&spectrum_config).map_err(CliError::from_core)?;
    io::write_spectrum_csv(out, &spectrum)?;
    let mut manifest = RunManifest::new("synth")
        .with_config_text(&text)?
        .with_seed(seed)
        .input(config_path)
        .output(out);
    if svg {
        let path = out.with_extension("svg");
        let plot = spectrum_plot(&spectrum, "Synthesized spectrum");
        io::write_atomic(&path, plot.render().as_bytes())?;
        manifest = manifest.output(&path);
    }
    manifest.write_beside(out)
}

// ----------------------------------------------------------------- analyze

/// Written instead of a full report when the pipeline fails numerically, so
/// downstream tooling still finds a document at the agreed path.
#[derive(Debug, Serialize)]
struct PartialReport {
    partial: bool,
    error: String,
}

fn report_pairs(report: &EllipticityReport) -> CliResult<Vec<ModePair>> {
    report
        .pairs
        .iter()
        .map(|r| ModePair::new(r.order, r.f_low_hz, r.f_high_hz).map_err(CliError::from_core))
        .collect()
}

pub fn analyze(
    input: &Path,
    config_path: Option<&Path>,
    out: &Path,
    svg: bool,
) -> CliResult<()> {
    let spectrum = io::read_spectrum_csv(input)?;
    let (options, config_text) = match config_path {
        Some(p) => {
            let (cfg, text): (config::AnalyzeConfig, _) = config::load(p)?;
            (cfg.to_options(), Some(text))
        }
        None => (Default::default(), None),
    };
    let mut manifest = RunManifest::new("analyze").input(input).output(out);
    if let Some(p) = config_path {
        manifest = manifest.input(p);
    }
    if let Some(t) = &config_text {
        manifest = manifest.with_config_text(t)?;
    }

    match analyze::analyze(&spectrum, &options) {
        Ok(report) => {
            write_json(out, &report)?;
            let pairs_path = out.with_extension("pairs.csv");
            io::write_pairs_csv(&pairs_path, &report_pairs(&report)?)?;
            manifest = manifest.output(&pairs_path);
            if svg {
                let mut plot = spectrum_plot(&spectrum, "Analyzed spectrum");
                let marks: Vec<f64> = report
                    .pairs
                    .iter()
                    .flat_map(|r| [r.f_low_hz, r.f_high_hz])
                    .collect();
                plot.add_vlines(&marks);
                let svg_path = out.with_extension("svg");
                io::write_atomic(&svg_path, plot.render().as_bytes())?;
                manifest = manifest.output(&svg_path);
            }
            manifest.write_beside(out)
        }
        Err(e) => {
            let cli_err = CliError::from_core(e.clone());
            if let CliError::Numeric(_) = &cli_err {
                // Partial report at the agreed path, then exit 2.
                write_json(
                    out,
                    &PartialReport {
                        partial: true,
                        error: e.to_string(),
                    },
                )?;
                manifest.write_beside(out)?;
            }
            Err(cli_err)
        }
    }
}

// ------------------------------------------------------------------- sweep

#[derive(Debug, Serialize)]
struct SweepSummary {
    points: usize,
    failed: usize,
    epsilon_mean: Option<f64>,
    epsilon_std: Option<f64>,
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let std = if values.len() > 1 {
        Some(
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64)
                .sqrt(),
        )
    } else {
        None
    };
    (Some(mean), std)
}

fn sweep_pairs_point(
    material: Option<config::MaterialConfig>,
    mean_radius: f64,
    length: f64,
    eps: f64,
    orders: [u32; 2],
) -> Result<Vec<String>, String> {
    let run = || -> CliResult<Vec<String>> {
        let material = material_or_silica(material)?;
        let section =
            EllipseSection::from_mean_radius(mean_radius, eps).map_err(CliError::from_core)?;
        let beam = BeamSpec::uniform(material, length, section).map_err(CliError::from_core)?;
        let pairs =
            predict_pairs(&beam, (orders[0], orders[1]), None).map_err(CliError::from_core)?;
        Ok(pairs
            .iter()
            .map(|p| {
                format!(
                    "{:.6e},{},{:.3},{},{}",
                    length,
                    io::fmt_ratio(eps),
                    beam.aspect_ratio(),
                    p.order,
                    io::fmt_ratio(p.ratio())
                )
            })
            .collect())
    };
    run().map_err(|e| match e {
        CliError::Input(e) | CliError::Numeric(e) => format!("{e:#}"),
    })
}

fn run_roundtrip_point(
    synth_cfg: &SynthConfig,
    options: &modesplit_core::analyze::AnalyzeOptions,
    seed: u64,
) -> Result<EllipticityReport, String> {
    let run = || -> Result<EllipticityReport, CoreError> {
        let spectrum_config = synth_cfg
            .to_spectrum_config(seed)
            .map_err(|_| CoreError::InvalidInput("bad synth config"))?;
        let spectrum = synthesize(&spectrum_config)?;
        analyze::analyze(&spectrum, options)
    };
    run().map_err(|e| e.to_string())
}

pub fn sweep(config_path: &Path, out: &Path, jobs: usize) -> CliResult<()> {
    use rayon::prelude::*;

    let (cfg, text): (SweepConfig, _) = config::load(config_path)?;
    ensure_dir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::input(anyhow::anyhow!("building thread pool: {e}")))?;
    let mut manifest = RunManifest::new("sweep")
        .with_config_text(&text)?
        .input(config_path);

    match cfg {
        SweepConfig::Pairs {
            material,
            mean_radius,
            lengths,
            ellipticities,
            orders,
        } => {
            let grid: Vec<(f64, f64)> = lengths
                .iter()
                .flat_map(|&l| ellipticities.iter().map(move |&e| (l, e)))
                .collect();
            let results: Vec<(f64, f64, Result<Vec<String>, String>)> = pool.install(|| {
                grid.par_iter()
                    .map(|&(l, e)| {
                        (l, e, sweep_pairs_point(material, mean_radius, l, e, orders))
                    })
                    .collect()
            });
            let mut table = String::from("length_m,ellipticity,aspect_ratio,order,ratio\n");
            let mut failures = String::from("length_m,ellipticity,error\n");
            let mut failed = 0usize;
            for (l, e, r) in &results {
                match r {
                    Ok(rows) => {
                        for row in rows {
                            table.push_str(row);
                            table.push('\n');
                        }
                    }
                    Err(msg) => {
                        failed += 1;
                        failures.push_str(&format!("{l:.6e},{e:.6},{}\n", msg.replace(',', ";")));
                    }
                }
            }
            let table_path = out.join("sweep_pairs.csv");
            io::write_atomic(&table_path, table.as_bytes())?;
            manifest = manifest.output(&table_path);
            if failed > 0 {
                let fail_path = out.join("failures.csv");
                io::write_atomic(&fail_path, failures.as_bytes())?;
                manifest = manifest.output(&fail_path);
            }
            let summary = SweepSummary {
                points: results.len(),
                failed,
                epsilon_mean: None,
                epsilon_std: None,
            };
            let summary_path = out.join("summary.json");
            write_json(&summary_path, &summary)?;
            manifest = manifest.output(&summary_path);
        }
        SweepConfig::Roundtrip {
            synth,
            seeds,
            analyze,
        } => {
            if seeds.is_empty() {
                return Err(CliError::input(anyhow::anyhow!("roundtrip needs seeds")));
            }
            let options = analyze.to_options();
            let results: Vec<(u64, Result<EllipticityReport, String>)> = pool.install(|| {
                seeds
                    .par_iter()
                    .map(|&seed| (seed, run_roundtrip_point(&synth, &options, seed)))
                    .collect()
            });
            let mut table =
                String::from("seed,status,epsilon,sigma_epsilon,theta_deg,sigma_theta_deg\n");
            let mut epsilons = Vec::new();
            let mut failed = 0usize;
            for (seed, r) in &results {
                match r {
                    Ok(rep) => {
                        epsilons.push(rep.epsilon);
                        table.push_str(&format!(
                            "{seed},ok,{},{:.6e},{},{}\n",
                            io::fmt_ratio(rep.epsilon),
                            rep.sigma_epsilon,
                            rep.theta_deg.map_or("".into(), |t| format!("{t:.3}")),
                            rep.sigma_theta_deg.map_or("".into(), |t| format!("{t:.3}")),
                        ));
                    }
                    Err(msg) => {
                        failed += 1;
                        table.push_str(&format!("{seed},error: {},,,,\n", msg.replace(',', ";")));
                    }
                }
            }
            let table_path = out.join("roundtrip.csv");
            io::write_atomic(&table_path, table.as_bytes())?;
            manifest = manifest.output(&table_path);
            let (epsilon_mean, epsilon_std) = mean_std(&epsilons);
            let summary = SweepSummary {
                points: results.len(),
                failed,
                epsilon_mean,
                epsilon_std,
            };
            let summary_path = out.join("summary.json");
            write_json(&summary_path, &summary)?;
            manifest = manifest.output(&summary_path);
        }
    }
    manifest.write_beside(out)
}

// ------------------------------------------------------- report-aggregate

#[derive(Debug, Serialize)]
struct AggregateSummary {
    reports: usize,
    skipped: usize,
    epsilon_mean: Option<f64>,
    epsilon_std: Option<f64>,
    sigma_epsilon_mean: Option<f64>,
    inputs: Vec<String>,
}

pub fn report_aggregate(inputs: &[PathBuf], out: &Path) -> CliResult<()> {
    let mut epsilons = Vec::new();
    let mut sigmas = Vec::new();
    let mut skipped = 0usize;
    let mut manifest = RunManifest::new("report-aggregate").output(out);
    for path in inputs {
        manifest = manifest.input(path);
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(anyhow::anyhow!("reading {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::input(anyhow::anyhow!("parsing {}: {e}", path.display())))?;
        // Partial reports (failed runs) are counted but carry no estimate.
        if value.get("partial").and_then(|v| v.as_bool()) == Some(true) {
            skipped += 1;
            continue;
        }
        let eps = value
            .get("epsilon")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| {
                CliError::input(anyhow::anyhow!("{}: missing \"epsilon\"", path.display()))
            })?;
        epsilons.push(eps);
        if let Some(s) = value.get("sigma_epsilon").and_then(|v| v.as_f64()) {
            sigmas.push(s);
        }
    }
    let (epsilon_mean, epsilon_std) = mean_std(&epsilons);
    let (sigma_epsilon_mean, _) = mean_std(&sigmas);
    let summary = AggregateSummary {
        reports: epsilons.len(),
        skipped,
        epsilon_mean,
        epsilon_std,
        sigma_epsilon_mean,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
    };
    write_json(out, &summary)?;
    manifest.write_beside(out)
}

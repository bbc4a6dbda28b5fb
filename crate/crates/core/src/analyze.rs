//! Inverse pipeline: spectrum in, ellipticity report out.
//!
//! Stages: baseline estimation and peak detection, clustering of candidates
//! into per-order windows, double-Lorentzian window fits, mode-order
//! assignment from the `(2n+1)²` spacing law, convergence fit, plateau
//! ellipticity, and per-pair probe-angle estimates.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm;
use crate::splitting::{self, ConvergenceModel, ModePair, PairAmplitudes};
use crate::synth::Spectrum;
use crate::thermal::angle_from_measurements;
use crate::xsection;

/// Tuning knobs of [`analyze`]; `Default` suits thermomechanical spectra
/// with Q around 10⁴.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    /// Detection threshold above the baseline. `None` picks one from the
    /// robust noise scale of the baseline-subtracted spectrum.
    pub min_prominence: Option<f64>,
    /// Absolute candidate separation floor (Hz).
    pub min_separation: f64,
    /// Relative candidate separation, × candidate frequency. Suppresses
    /// duplicate maxima on the flanks of one resonance.
    pub min_separation_rel: f64,
    /// Running-median baseline window (bins).
    pub baseline_window: usize,
    /// Override for the convergence cutoff order.
    pub cutoff: Option<u32>,
    /// Calibrated mean radius (m); enables the axis-difference outputs.
    pub mean_radius: Option<f64>,
    /// 1σ uncertainty of the mean radius (m).
    pub sigma_mean_radius: f64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            min_prominence: None,
            min_separation: 0.0,
            min_separation_rel: 4e-4,
            baseline_window: 101,
            cutoff: None,
            mean_radius: None,
            sigma_mean_radius: 0.0,
        }
    }
}

/// One fitted Lorentzian peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    /// Center frequency (Hz).
    pub f0: f64,
    pub sigma_f0: f64,
    /// Full width at half maximum (Hz).
    pub gamma: f64,
    pub sigma_gamma: f64,
    /// Integrated power (PSD·Hz).
    pub area: f64,
    pub sigma_area: f64,
    pub residual_rms: f64,
    /// Fit window (Hz, Hz).
    pub window: (f64, f64),
}

/// Result of a two-peak window fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleLorentzianFit {
    /// Lower-frequency peak.
    pub low: PeakFit,
    /// Higher-frequency peak. Equal to `low` when `collapsed`.
    pub high: PeakFit,
    /// Fitted constant baseline.
    pub baseline: f64,
    /// The two centers merged (within a tenth of a bin); both slots carry
    /// the refitted single peak.
    pub collapsed: bool,
    /// The centers are separated by at least one mean linewidth; only
    /// resolved fits enter the pair analysis.
    pub resolved: bool,
}

/// One row of the per-pair report table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub order: u32,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    pub delta_hz: f64,
    pub ratio: f64,
    pub sigma_ratio: f64,
    pub area_low: f64,
    pub area_high: f64,
    /// Per-pair probe-angle estimate (degrees), when invertible.
    pub theta_deg: Option<f64>,
    pub above_cutoff: bool,
}

/// Full output of the inverse pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    /// Plateau ellipticity estimate, ≥ 1.
    pub epsilon: f64,
    pub sigma_epsilon: f64,
    /// Probe angle (degrees, mean over pairs above cutoff).
    pub theta_deg: Option<f64>,
    /// Standard deviation of the per-pair angles (degrees).
    pub sigma_theta_deg: Option<f64>,
    /// First order counted into the plateau.
    pub cutoff: u32,
    /// Pairs at or above the cutoff.
    pub pairs_used: usize,
    pub convergence: ConvergenceModel,
    /// Semi-axis difference (m), when a mean radius was supplied.
    pub axis_difference: Option<f64>,
    pub sigma_axis_difference: Option<f64>,
    /// Diameter difference (m), twice the axis difference.
    pub diameter_difference: Option<f64>,
    pub sigma_diameter_difference: Option<f64>,
    /// Fraction of pairs above cutoff whose back-projected deflections
    /// order as equipartition demands (higher frequency → smaller).
    pub orientation_consistency: Option<f64>,
    /// Set when no reliable splitting was resolved (ε consistent with 1).
    pub degenerate: bool,
    pub peaks_detected: usize,
    pub windows_failed: usize,
    pub pairs: Vec<PairRow>,
}

fn insert_sorted(s: &mut Vec<f64>, v: f64) {
    let idx = s.partition_point(|x| x.total_cmp(&v).is_lt());
    s.insert(idx, v);
}

fn remove_sorted(s: &mut Vec<f64>, v: f64) {
    let idx = s.partition_point(|x| x.total_cmp(&v).is_lt());
    debug_assert!(idx < s.len() && s[idx] == v);
    s.remove(idx);
}

fn median_of(s: &[f64]) -> f64 {
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Running median with a centered window, shrinking at the edges.
fn running_median(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    let h = window.max(1) / 2;
    let mut sorted: Vec<f64> = Vec::with_capacity(2 * h + 2);
    for &v in &x[..(h + 1).min(n)] {
        insert_sorted(&mut sorted, v);
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(median_of(&sorted));
        if i + h + 1 < n {
            insert_sorted(&mut sorted, x[i + h + 1]);
        }
        if i >= h {
            remove_sorted(&mut sorted, x[i - h]);
        }
    }
    out
}

fn detect_with_baseline(
    spectrum: &Spectrum,
    baseline: &[f64],
    min_prominence: f64,
    min_sep_abs: f64,
    min_sep_rel: f64,
) -> Vec<(f64, f64)> {
    let psd = &spectrum.psd;
    let mut cands: Vec<(usize, f64)> = Vec::new();
    for i in 1..psd.len().saturating_sub(1) {
        if psd[i] > psd[i - 1] && psd[i] >= psd[i + 1] {
            let prom = psd[i] - baseline[i];
            if prom >= min_prominence {
                cands.push((i, prom));
            }
        }
    }
    // Thin tallest-first so flank maxima yield to the peak that owns them.
    cands.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<(usize, f64)> = Vec::new();
    'outer: for (i, prom) in cands {
        let f = spectrum.frequencies[i];
        let sep = min_sep_abs.max(min_sep_rel * f);
        for &(j, _) in &kept {
            if (spectrum.frequencies[j] - f).abs() < sep {
                continue 'outer;
            }
        }
        kept.push((i, prom));
    }
    kept.sort_by_key(|&(i, _)| i);
    kept.iter()
        .map(|&(i, prom)| (spectrum.frequencies[i], prom))
        .collect()
}

/// Local maxima at least `min_prominence` above a running-median baseline
/// (101 bins), thinned so no two candidates are closer than `min_separation`
/// (Hz). Returns `(frequency, prominence)` sorted by frequency.
pub fn detect_peaks(
    spectrum: &Spectrum,
    min_prominence: f64,
    min_separation: f64,
) -> Vec<(f64, f64)> {
    let baseline = running_median(&spectrum.psd, 101);
    detect_with_baseline(spectrum, &baseline, min_prominence, min_separation, 0.0)
}

fn nearest_bin(fw: &[f64], f: f64) -> usize {
    let idx = fw.partition_point(|x| *x < f);
    if idx == 0 {
        0
    } else if idx >= fw.len() {
        fw.len() - 1
    } else if (fw[idx] - f).abs() < (f - fw[idx - 1]).abs() {
        idx
    } else {
        idx - 1
    }
}

/// Crude FWHM from a half-height walk away from bin `idx`.
fn half_height_width(fw: &[f64], pw: &[f64], idx: usize, base: f64) -> f64 {
    let half = base + 0.5 * (pw[idx] - base);
    let mut l = idx;
    while l > 0 && pw[l - 1] > half {
        l -= 1;
    }
    let mut r = idx;
    while r + 1 < pw.len() && pw[r + 1] > half {
        r += 1;
    }
    fw[r] - fw[l]
}

fn lorentz(f: f64, f0: f64, gamma: f64, area: f64) -> f64 {
    let g = gamma.abs().max(1e-300);
    let a = area.abs();
    let hw = 0.5 * g;
    a * g / (2.0 * PI) / ((f - f0) * (f - f0) + hw * hw)
}

fn peak_from_params(p: &[f64], s: &[f64], rms: f64, window: (f64, f64)) -> PeakFit {
    PeakFit {
        f0: p[0],
        sigma_f0: s[0],
        gamma: p[1].abs(),
        sigma_gamma: s[1],
        area: p[2].abs(),
        sigma_area: s[2],
        residual_rms: rms,
        window,
    }
}

/// Least-squares fit of a constant baseline plus two Lorentzians over the
/// given window, seeded from 1–2 detected candidates `(f, height)`.
///
/// A single candidate is split into two seeds one bin apart. Centers that
/// merge within a tenth of a bin are refit as a single peak and flagged
/// `collapsed`; separations under one mean linewidth clear `resolved`.
pub fn fit_double_lorentzian(
    spectrum: &Spectrum,
    window: (f64, f64),
    candidates: &[(f64, f64)],
) -> Result<DoubleLorentzianFit> {
    let (w0, w1) = window;
    if !(w0 < w1) {
        return Err(Error::InvalidInput("window must be increasing"));
    }
    if candidates.is_empty() || candidates.len() > 2 {
        return Err(Error::InvalidInput("need 1–2 candidates in the window"));
    }
    let freqs = &spectrum.frequencies;
    let i0 = freqs.partition_point(|f| *f < w0);
    let i1 = freqs.partition_point(|f| *f <= w1);
    let bins = i1.saturating_sub(i0);
    if bins < 20 {
        return Err(Error::WindowTooNarrow { bins });
    }
    let fw = &freqs[i0..i1];
    let pw = &spectrum.psd[i0..i1];
    let bw = spectrum.bin_width();

    let b0 = pw.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let mut seeds: Vec<(f64, f64, f64)> = Vec::new();
    for &(fc, _) in candidates {
        let idx = nearest_bin(fw, fc);
        let h = (pw[idx] - b0).max(f64::MIN_POSITIVE);
        let gamma = half_height_width(fw, pw, idx, b0).max(2.0 * bw);
        seeds.push((fw[idx], gamma, h * PI * gamma / 2.0));
    }
    if seeds.len() == 1 {
        let (f, g, a) = seeds[0];
        seeds = vec![(f - 0.5 * bw, g, 0.5 * a), (f + 0.5 * bw, g, 0.5 * a)];
    }
    let x0 = [
        b0, seeds[0].0, seeds[0].1, seeds[0].2, seeds[1].0, seeds[1].1, seeds[1].2,
    ];
    let model = |p: &[f64], out: &mut [f64]| {
        for (o, (&f, &y)) in out.iter_mut().zip(fw.iter().zip(pw)) {
            *o = p[0] + lorentz(f, p[1], p[2], p[3]) + lorentz(f, p[4], p[5], p[6]) - y;
        }
    };
    let fit = lm::levenberg_marquardt(model, &x0, bins, 200, 1e-10)?;

    let mut a = peak_from_params(&fit.params[1..4], &fit.sigma[1..4], fit.residual_rms, window);
    let mut b = peak_from_params(&fit.params[4..7], &fit.sigma[4..7], fit.residual_rms, window);
    if a.f0 > b.f0 {
        core::mem::swap(&mut a, &mut b);
    }
    let sep = b.f0 - a.f0;
    if sep < 0.1 * bw {
        // Collapsed: refit one Lorentzian plus baseline.
        let x0 = [
            fit.params[0],
            0.5 * (a.f0 + b.f0),
            0.5 * (a.gamma + b.gamma),
            a.area + b.area,
        ];
        let model = |p: &[f64], out: &mut [f64]| {
            for (o, (&f, &y)) in out.iter_mut().zip(fw.iter().zip(pw)) {
                *o = p[0] + lorentz(f, p[1], p[2], p[3]) - y;
            }
        };
        let single = lm::levenberg_marquardt(model, &x0, bins, 200, 1e-10)?;
        let peak = peak_from_params(
            &single.params[1..4],
            &single.sigma[1..4],
            single.residual_rms,
            window,
        );
        if !(peak.f0 >= w0 && peak.f0 <= w1 && peak.gamma > 0.0) {
            return Err(Error::FitDiverged {
                iterations: single.iterations,
            });
        }
        return Ok(DoubleLorentzianFit {
            low: peak,
            high: peak,
            baseline: single.params[0],
            collapsed: true,
            resolved: false,
        });
    }
    if !(a.f0 >= w0 && b.f0 <= w1 && a.gamma > 0.0 && b.gamma > 0.0) {
        return Err(Error::FitDiverged {
            iterations: fit.iterations,
        });
    }
    let area_ok = a.area > 0.0
        && b.area > 0.0
        && a.area / b.area < 1e4
        && b.area / a.area < 1e4;
    let resolved = sep >= 0.5 * (a.gamma + b.gamma) && area_ok;
    Ok(DoubleLorentzianFit {
        low: a,
        high: b,
        baseline: fit.params[0],
        collapsed: false,
        resolved,
    })
}

/// Assigns mode orders to measured pairs from the `(2n+1)²` spacing of
/// clamped–clamped eigenfrequencies: least-squares fit of `sqrt(f_mean)`
/// against `(2n+1)` over candidate integer offsets, keeping the offset with
/// the smallest residual.
///
/// Missing orders are fine; the quadratic spacing pins the gaps. Errors with
/// [`Error::AmbiguousAssignment`] when two offsets fit within 10% of each
/// other.
pub fn assign_orders(pairs: &[ModePair]) -> Result<Vec<ModePair>> {
    if pairs.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: pairs.len(),
        });
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|x, y| x.f_low.total_cmp(&y.f_low));
    let u: Vec<f64> = sorted
        .iter()
        .map(|p| (0.5 * (p.f_low + p.f_high)).sqrt())
        .collect();
    let min_gap = u
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if !(min_gap > 0.0) {
        return Err(Error::InvalidInput("pairs must have distinct frequencies"));
    }
    // One order step raises (2n+1) by 2; assume the tightest gap is one step.
    let slope0 = 0.5 * min_gap;
    let n1_est = ((u[0] / slope0 - 1.0) / 2.0).round().max(1.0);

    let mut assignments: Vec<(f64, Vec<u32>)> = Vec::new();
    let lo = (n1_est - 4.0).max(1.0) as u32;
    let hi = n1_est as u32 + 4;
    'offsets: for n1 in lo..=hi {
        let mut slope = u[0] / (2.0 * n1 as f64 + 1.0);
        let mut ns: Vec<f64> = Vec::new();
        for _ in 0..3 {
            ns = u
                .iter()
                .map(|ui| ((ui / slope - 1.0) / 2.0).round())
                .collect();
            let (mut num, mut den) = (0.0, 0.0);
            for (ui, ni) in u.iter().zip(&ns) {
                let m = 2.0 * ni + 1.0;
                num += ui * m;
                den += m * m;
            }
            slope = num / den;
        }
        if ns[0] < 1.0 {
            continue;
        }
        for w in ns.windows(2) {
            if w[1] <= w[0] {
                continue 'offsets;
            }
        }
        let ssr: f64 = u
            .iter()
            .zip(&ns)
            .map(|(ui, ni)| (ui - slope * (2.0 * ni + 1.0)).powi(2))
            .sum();
        let orders: Vec<u32> = ns.iter().map(|n| *n as u32).collect();
        if !assignments.iter().any(|(_, o)| *o == orders) {
            assignments.push((ssr, orders));
        }
    }
    if assignments.is_empty() {
        return Err(Error::AmbiguousAssignment);
    }
    assignments.sort_by(|x, y| x.0.total_cmp(&y.0));
    let floor = (1e-12 * u[u.len() - 1]).powi(2) * u.len() as f64;
    if assignments.len() > 1 && assignments[1].0 <= 1.1 * assignments[0].0.max(floor) {
        return Err(Error::AmbiguousAssignment);
    }
    let orders = &assignments[0].1;
    let mut out = sorted;
    for (p, &n) in out.iter_mut().zip(orders) {
        p.order = n;
    }
    Ok(out)
}

/// Groups detected candidates into per-order clusters by the bimodal gap
/// structure: intra-pair splittings are far smaller than inter-order spacing.
/// Falls back to one candidate per cluster when the gaps are unimodal.
fn cluster_candidates(cands: &[(f64, f64)]) -> Vec<Vec<(f64, f64)>> {
    if cands.len() < 2 {
        return vec![cands.to_vec()];
    }
    let mut gaps: Vec<f64> = cands.windows(2).map(|w| w[1].0 - w[0].0).collect();
    gaps.sort_by(|a, b| a.total_cmp(b));
    let mut threshold = None;
    let mut best_ratio = 3.0;
    for w in gaps.windows(2) {
        if w[0] > 0.0 && w[1] / w[0] > best_ratio {
            best_ratio = w[1] / w[0];
            threshold = Some((w[0] * w[1]).sqrt());
        }
    }
    let mut clusters: Vec<Vec<(f64, f64)>> = vec![vec![cands[0]]];
    for w in cands.windows(2) {
        let joined = threshold.is_some_and(|t| w[1].0 - w[0].0 <= t);
        if joined {
            clusters.last_mut().unwrap().push(w[1]);
        } else {
            clusters.push(vec![w[1]]);
        }
    }
    clusters
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    median_of(&v)
}

/// Runs the full inverse pipeline on one spectrum.
pub fn analyze(spectrum: &Spectrum, options: &AnalyzeOptions) -> Result<EllipticityReport> {
    if spectrum.len() < 64 {
        return Err(Error::InvalidInput("spectrum too short to analyze"));
    }
    let baseline = running_median(&spectrum.psd, options.baseline_window);
    let prominence = options.min_prominence.unwrap_or_else(|| {
        let mad = median(
            spectrum
                .psd
                .iter()
                .zip(&baseline)
                .map(|(p, b)| (p - b).abs())
                .collect(),
        );
        let max_p = spectrum.psd.iter().fold(0.0f64, |m, v| m.max(*v));
        let med_p = median(spectrum.psd.clone());
        (8.0 * 1.4826 * mad)
            .max(1e-6 * (max_p - med_p))
            .max(f64::MIN_POSITIVE)
    });
    let cands = detect_with_baseline(
        spectrum,
        &baseline,
        prominence,
        options.min_separation,
        options.min_separation_rel,
    );
    let peaks_detected = cands.len();
    if cands.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }

    let bw = spectrum.bin_width();
    let mut fits: Vec<DoubleLorentzianFit> = Vec::new();
    let mut windows_failed = 0usize;
    for cluster in cluster_candidates(&cands) {
        // Two tallest candidates carry the pair; extras are flank artifacts.
        let mut sel = cluster.clone();
        sel.sort_by(|x, y| y.1.total_cmp(&x.1));
        sel.truncate(2);
        sel.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut gamma_est = 2.0 * bw;
        for &(fc, _) in &sel {
            let idx = nearest_bin(&spectrum.frequencies, fc);
            gamma_est = gamma_est.max(half_height_width(
                &spectrum.frequencies,
                &spectrum.psd,
                idx,
                baseline[idx],
            ));
        }
        let pad = (12.0 * gamma_est).max(15.0 * bw);
        let window = (sel[0].0 - pad, sel[sel.len() - 1].0 + pad);
        match fit_double_lorentzian(spectrum, window, &sel) {
            Ok(fit) => fits.push(fit),
            Err(Error::FitDiverged { .. }) | Err(Error::WindowTooNarrow { .. }) => {
                windows_failed += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if fits.is_empty() {
        return Err(Error::FitDiverged { iterations: 0 });
    }

    let mut pairs: Vec<ModePair> = Vec::new();
    for fit in fits.iter().filter(|f| f.resolved) {
        let mut pair = ModePair::new(1, fit.low.f0, fit.high.f0)?;
        pair.amplitudes = Some(PairAmplitudes {
            area_low: fit.low.area,
            area_high: fit.high.area,
            sigma_area_low: fit.low.sigma_area,
            sigma_area_high: fit.high.sigma_area,
        });
        let r = pair.ratio();
        pair.sigma_ratio = Some(
            r * ((fit.low.sigma_f0 / fit.low.f0).powi(2)
                + (fit.high.sigma_f0 / fit.high.f0).powi(2))
            .sqrt(),
        );
        pairs.push(pair);
    }

    if pairs.len() < 4 {
        // No reliable splitting: ε is consistent with 1 at the linewidth
        // resolution limit.
        let resolution = median(fits.iter().map(|f| f.low.gamma / f.low.f0).collect());
        return Ok(EllipticityReport {
            epsilon: 1.0,
            sigma_epsilon: resolution.max(f64::MIN_POSITIVE),
            theta_deg: None,
            sigma_theta_deg: None,
            cutoff: 0,
            pairs_used: 0,
            convergence: ConvergenceModel {
                epsilon: 1.0,
                amplitude: 0.0,
                decay: 1.0,
                cutoff: 0,
            },
            axis_difference: None,
            sigma_axis_difference: None,
            diameter_difference: None,
            sigma_diameter_difference: None,
            orientation_consistency: None,
            degenerate: true,
            peaks_detected,
            windows_failed,
            pairs: Vec::new(),
        });
    }

    let pairs = assign_orders(&pairs)?;

    let fitted = match splitting::fit_convergence(&pairs) {
        Ok(f) => Some(f),
        Err(Error::InsufficientData { .. }) if options.cutoff.is_some() => None,
        Err(e) => return Err(e),
    };
    let cutoff = options
        .cutoff
        .or(fitted.as_ref().map(|f| f.model.cutoff))
        .expect("either an override or a fitted cutoff");
    let (epsilon, sigma_epsilon) = splitting::ellipticity_from_pairs(&pairs, Some(cutoff))?;
    let convergence = fitted.map(|f| f.model).unwrap_or(ConvergenceModel {
        epsilon,
        amplitude: 0.0,
        decay: 1.0,
        cutoff,
    });

    // Per-pair probe angle from the projected areas and equipartition.
    let mut theta_all: Vec<(u32, f64)> = Vec::new();
    for p in &pairs {
        let Some(a) = p.amplitudes else { continue };
        let r2 = p.ratio() * p.ratio();
        if let Ok((theta, degenerate)) = angle_from_measurements(a.area_high, a.area_low, r2) {
            if !degenerate {
                theta_all.push((p.order, theta.to_degrees()));
            }
        }
    }
    let above: Vec<f64> = theta_all
        .iter()
        .filter(|(n, _)| *n >= cutoff)
        .map(|(_, t)| *t)
        .collect();
    let (theta_deg, sigma_theta_deg) = if above.is_empty() {
        (None, None)
    } else {
        let mean = above.iter().sum::<f64>() / above.len() as f64;
        let std = if above.len() > 1 {
            (above.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (above.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        (Some(mean), Some(std))
    };

    // Orientation check: undo the projection with the mean angle; the
    // higher-frequency mode must come out smaller (equipartition).
    let orientation_consistency = theta_deg.and_then(|t| {
        if !(3.0..=87.0).contains(&t) {
            return None;
        }
        let (s, c) = (t.to_radians().sin(), t.to_radians().cos());
        let used: Vec<&ModePair> = pairs
            .iter()
            .filter(|p| p.order >= cutoff && p.amplitudes.is_some())
            .collect();
        if used.is_empty() {
            return None;
        }
        let ok = used
            .iter()
            .filter(|p| {
                let a = p.amplitudes.unwrap();
                a.area_high / (s * s) < a.area_low / (c * c)
            })
            .count();
        Some(ok as f64 / used.len() as f64)
    });

    let (mut axis_difference, mut sigma_axis) = (None, None);
    if let Some(r_mean) = options.mean_radius {
        let (d, sigma) = xsection::axis_difference_estimate(
            r_mean,
            options.sigma_mean_radius,
            epsilon,
            sigma_epsilon,
        )?;
        axis_difference = Some(d);
        sigma_axis = Some(sigma);
    }

    let rows: Vec<PairRow> = pairs
        .iter()
        .map(|p| {
            let a = p.amplitudes.unwrap_or(PairAmplitudes {
                area_low: 0.0,
                area_high: 0.0,
                sigma_area_low: 0.0,
                sigma_area_high: 0.0,
            });
            PairRow {
                order: p.order,
                f_low_hz: p.f_low,
                f_high_hz: p.f_high,
                delta_hz: p.splitting(),
                ratio: p.ratio(),
                sigma_ratio: p.sigma_ratio.unwrap_or(0.0),
                area_low: a.area_low,
                area_high: a.area_high,
                theta_deg: theta_all
                    .iter()
                    .find(|(n, _)| *n == p.order)
                    .map(|(_, t)| *t),
                above_cutoff: p.order >= cutoff,
            }
        })
        .collect();
    let pairs_used = rows.iter().filter(|r| r.above_cutoff).count();

    Ok(EllipticityReport {
        epsilon,
        sigma_epsilon,
        theta_deg,
        sigma_theta_deg,
        cutoff,
        pairs_used,
        convergence,
        axis_difference,
        sigma_axis_difference: sigma_axis,
        diameter_difference: axis_difference.map(|d| 2.0 * d),
        sigma_diameter_difference: sigma_axis.map(|s| 2.0 * s),
        orientation_consistency,
        degenerate: false,
        peaks_detected,
        windows_failed,
        pairs: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::BeamSpec;
    use crate::splitting::predict_pairs;
    use crate::synth::{synthesize, SpectrumConfig};
    use crate::thermal::{thermal_peak, ProjectionGeometry};
    use crate::xsection::{EllipseSection, Material};
    use approx::assert_relative_eq;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn grid(f0: f64, f1: f64, bw: f64) -> Vec<f64> {
        let n = ((f1 - f0) / bw) as usize + 1;
        (0..n).map(|i| f0 + i as f64 * bw).collect()
    }

    fn noisy(psd: &mut [f64], rms: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in psd.iter_mut() {
            let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
            let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
            *v = (*v + rms * z).max(0.0);
        }
    }

    #[test]
    fn flat_spectrum_yields_nothing() {
        let f = grid(1000.0, 2000.0, 1.0);
        let s = Spectrum::new(f.clone(), vec![1.0; f.len()]).unwrap();
        assert!(detect_peaks(&s, 1e-6, 5.0).is_empty());
    }

    #[test]
    fn single_peak_detected_within_one_bin() {
        let f = grid(1000.0, 3000.0, 1.0);
        let peak = thermal_peak(2000.0, 200.0, 1.0).unwrap();
        let mut psd: Vec<f64> = f.iter().map(|x| 1e-4 + peak.psd(*x)).collect();
        noisy(&mut psd, peak.height() / 100.0, 9);
        let s = Spectrum::new(f, psd).unwrap();
        let cands = detect_peaks(&s, peak.height() / 10.0, 5.0);
        assert_eq!(cands.len(), 1);
        assert!((cands[0].0 - 2000.0).abs() <= 1.0);
    }

    #[test]
    fn pair_split_three_linewidths_gives_two() {
        let f = grid(1000.0, 3000.0, 1.0);
        let a = thermal_peak(2000.0, 200.0, 1.0).unwrap(); // Γ = 10
        let b = thermal_peak(2030.0, 203.0, 0.5).unwrap();
        let psd: Vec<f64> = f.iter().map(|x| 1e-6 + a.psd(*x) + b.psd(*x)).collect();
        let s = Spectrum::new(f, psd).unwrap();
        let cands = detect_peaks(&s, a.height() / 100.0, 12.0);
        assert_eq!(cands.len(), 2);
    }

    #[test]
    fn noiseless_pair_fit_recovers_generator() {
        let f = grid(490_000.0, 520_000.0, 2.0);
        let a = thermal_peak(503_000.0, 1e4, 4e-4).unwrap();
        let b = thermal_peak(503_731.0, 1e4, 2e-4).unwrap();
        let base = 3e-10;
        let psd: Vec<f64> = f.iter().map(|x| base + a.psd(*x) + b.psd(*x)).collect();
        let s = Spectrum::new(f, psd).unwrap();
        let fit = fit_double_lorentzian(
            &s,
            (500_000.0, 507_000.0),
            &[(503_000.0, a.height()), (503_731.0, b.height())],
        )
        .unwrap();
        assert!(fit.resolved && !fit.collapsed);
        assert_relative_eq!(fit.low.f0, 503_000.0, max_relative = 1e-6);
        assert_relative_eq!(fit.high.f0, 503_731.0, max_relative = 1e-6);
        assert_relative_eq!(fit.low.gamma, 50.3, max_relative = 1e-6);
        assert_relative_eq!(fit.high.gamma, 50.3731, max_relative = 1e-6);
        assert_relative_eq!(fit.low.area, 4e-4, max_relative = 1e-6);
        assert_relative_eq!(fit.high.area, 2e-4, max_relative = 1e-6);
        assert_relative_eq!(fit.baseline, base, max_relative = 1e-6);
        assert!(fit.low.f0 < fit.high.f0);
    }

    #[test]
    fn half_linewidth_overlap_is_flagged() {
        let f = grid(490_000.0, 520_000.0, 2.0);
        let gamma = 50.0;
        let a = thermal_peak(503_000.0, 503_000.0 / gamma, 4e-4).unwrap();
        let b = thermal_peak(503_000.0 + 0.5 * gamma, (503_025.0) / gamma, 2e-4).unwrap();
        let psd: Vec<f64> = f.iter().map(|x| 1e-10 + a.psd(*x) + b.psd(*x)).collect();
        let s = Spectrum::new(f, psd).unwrap();
        let fit = fit_double_lorentzian(
            &s,
            (500_000.0, 507_000.0),
            &[(503_012.0, a.height())],
        )
        .unwrap();
        assert!(!fit.resolved);
    }

    #[test]
    fn true_single_peak_collapses() {
        let f = grid(490_000.0, 520_000.0, 2.0);
        let a = thermal_peak(503_000.0, 1e4, 4e-4).unwrap();
        let psd: Vec<f64> = f.iter().map(|x| 1e-10 + a.psd(*x)).collect();
        let s = Spectrum::new(f, psd).unwrap();
        let fit = fit_double_lorentzian(
            &s,
            (500_000.0, 507_000.0),
            &[(503_000.0, a.height())],
        )
        .unwrap();
        assert!(fit.collapsed && !fit.resolved);
        assert_relative_eq!(fit.low.f0, 503_000.0, max_relative = 1e-8);
        assert_relative_eq!(fit.low.area, 4e-4, max_relative = 1e-6);
    }

    #[test]
    fn narrow_window_rejected() {
        let f = grid(1000.0, 2000.0, 1.0);
        let s = Spectrum::new(f, vec![1.0; 1001]).unwrap();
        assert!(matches!(
            fit_double_lorentzian(&s, (1500.0, 1510.0), &[(1505.0, 1.0)]),
            Err(Error::WindowTooNarrow { .. })
        ));
    }

    fn beam(eps: f64) -> BeamSpec {
        let section = EllipseSection::from_mean_radius(250e-9, eps).unwrap();
        BeamSpec::uniform(Material::silica(), 2.5e-3, section).unwrap()
    }

    #[test]
    fn order_assignment_exact_and_with_gaps() {
        let pairs = predict_pairs(&beam(1.0014), (5, 40), None).unwrap();
        let mut anon = pairs.clone();
        for p in anon.iter_mut() {
            p.order = 1;
        }
        let assigned = assign_orders(&anon).unwrap();
        for (got, want) in assigned.iter().zip(&pairs) {
            assert_eq!(got.order, want.order);
        }
        // Every third pair deleted: the quadratic spacing keeps the gaps.
        let mut sparse: Vec<ModePair> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 3 != 2)
            .map(|(_, p)| p.clone())
            .collect();
        let want: Vec<u32> = sparse.iter().map(|p| p.order).collect();
        for p in sparse.iter_mut() {
            p.order = 1;
        }
        let assigned = assign_orders(&sparse).unwrap();
        for (got, want) in assigned.iter().zip(&want) {
            assert_eq!(got.order, *want);
        }
    }

    #[test]
    fn order_assignment_needs_four_pairs() {
        let pairs = predict_pairs(&beam(1.0014), (5, 7), None).unwrap();
        assert!(matches!(
            assign_orders(&pairs),
            Err(Error::InsufficientData { .. })
        ));
    }

    fn scenario(eps: f64, theta_deg: f64, seed: u64, noise_rms: f64) -> SpectrumConfig {
        let convergence = if eps > 1.0 {
            Some(ConvergenceModel::new(eps, 4e-3, 0.3, 24).unwrap())
        } else {
            None
        };
        SpectrumConfig {
            beam: beam(eps),
            convergence,
            geometry: ProjectionGeometry::from_degrees(theta_deg).unwrap(),
            q_factor: 1e4,
            f_min: 50e3,
            f_max: 400e3,
            bin_width: 4.0,
            noise_floor: 1e-8,
            noise_rms,
            pink_amplitude: 0.0,
            seed,
        }
    }

    #[test]
    fn round_trip_recovers_ellipticity_and_angle() {
        let cfg = scenario(1.0014, 60.0, 42, 3e-8);
        let spectrum = synthesize(&cfg).unwrap();
        let options = AnalyzeOptions {
            cutoff: Some(25),
            mean_radius: Some(260e-9),
            sigma_mean_radius: 5e-9,
            ..Default::default()
        };
        let report = analyze(&spectrum, &options).unwrap();
        assert!(!report.degenerate);
        assert!((report.epsilon - 1.0014).abs() < 3e-4, "{}", report.epsilon);
        let theta = report.theta_deg.unwrap();
        assert!((theta - 60.0).abs() < 4.0, "{theta}");
        assert!(report.pairs_used >= 3);
        assert!(report.orientation_consistency.unwrap() >= 0.9);
        // Bookkeeping identity per pair.
        for row in &report.pairs {
            assert!((row.delta_hz / row.f_low_hz - (row.ratio - 1.0)).abs() < 1e-12);
        }
        // Axis difference propagates the plateau uncertainty.
        let d = report.diameter_difference.unwrap();
        assert!(d > 0.0 && d < 2e-9);
        assert!(report.sigma_diameter_difference.unwrap() > 0.0);
    }

    #[test]
    fn degenerate_spectrum_flagged() {
        let cfg = scenario(1.0, 60.0, 7, 3e-8);
        let spectrum = synthesize(&cfg).unwrap();
        let report = analyze(&spectrum, &AnalyzeOptions::default()).unwrap();
        assert!(report.degenerate);
        assert!((report.epsilon - 1.0).abs() <= report.sigma_epsilon);
        assert!(report.theta_deg.is_none());
    }

    #[test]
    fn frequency_axis_equivariance() {
        let cfg = scenario(1.0014, 60.0, 11, 3e-8);
        let spectrum = synthesize(&cfg).unwrap();
        let scaled = Spectrum::new(
            spectrum.frequencies.iter().map(|f| 2.0 * f).collect(),
            spectrum.psd.clone(),
        )
        .unwrap();
        let options = AnalyzeOptions {
            cutoff: Some(25),
            ..Default::default()
        };
        let a = analyze(&spectrum, &options).unwrap();
        let b = analyze(&scaled, &options).unwrap();
        assert_relative_eq!(a.epsilon, b.epsilon, max_relative = 1e-7);
        assert_relative_eq!(
            a.theta_deg.unwrap(),
            b.theta_deg.unwrap(),
            max_relative = 1e-5
        );
        for (ra, rb) in a.pairs.iter().zip(&b.pairs) {
            assert_relative_eq!(2.0 * ra.f_low_hz, rb.f_low_hz, max_relative = 1e-9);
            assert_relative_eq!(2.0 * ra.delta_hz, rb.delta_hz, max_relative = 1e-4);
        }
    }
}

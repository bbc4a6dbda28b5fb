//! Nondegenerate mode-pair model: predicted pairs, frequency splitting,
//! ratio-vs-order convergence, and ellipticity extraction from ratios.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::beam::{eigenfrequency_exact, BeamSpec};
use crate::error::{Error, Result};
use crate::lm;
use crate::xsection::StiffnessAxis;

/// Relative floor below which the plateau uncertainty is considered zero
/// when placing the convergence cutoff (keeps noiseless data well-defined).
const SIGMA_FLOOR: f64 = 1e-9;

/// Fitted peak areas carried through from spectrum analysis, in the spectrum's
/// power units × Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairAmplitudes {
    pub area_low: f64,
    pub area_high: f64,
    pub sigma_area_low: f64,
    pub sigma_area_high: f64,
}

/// One mode order's two split eigenfrequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    /// Mode order, starting at 1.
    pub order: u32,
    /// Lower eigenfrequency (Hz).
    pub f_low: f64,
    /// Higher eigenfrequency (Hz).
    pub f_high: f64,
    /// Peak areas, when the pair came out of a spectrum fit.
    pub amplitudes: Option<PairAmplitudes>,
    /// 1σ uncertainty of `ratio()`, when known.
    pub sigma_ratio: Option<f64>,
}

impl ModePair {
    pub fn new(order: u32, f_low: f64, f_high: f64) -> Result<Self> {
        if !(f_low > 0.0 && f_high >= f_low) {
            return Err(Error::InvalidInput("need 0 < f_low ≤ f_high"));
        }
        Ok(Self {
            order,
            f_low,
            f_high,
            amplitudes: None,
            sigma_ratio: None,
        })
    }

    /// Frequency ratio `R = f_high / f_low ≥ 1`.
    pub fn ratio(&self) -> f64 {
        self.f_high / self.f_low
    }

    /// Frequency splitting `Δf = f_high − f_low ≥ 0` (Hz).
    pub fn splitting(&self) -> f64 {
        self.f_high - self.f_low
    }
}

/// Frequency splitting of a pair (Hz).
pub fn frequency_splitting(pair: &ModePair) -> f64 {
    pair.splitting()
}

/// Order-dependence of the pair ratio: `R(n) = ε (1 + A e^{−α n})`.
///
/// The correction decays with order, so `R(n)` starts above the plateau and
/// converges to the ellipticity `ε` from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceModel {
    /// Plateau value (the ellipticity), ≥ 1.
    pub epsilon: f64,
    /// Low-order excess amplitude, ≥ 0.
    pub amplitude: f64,
    /// Decay rate per order, > 0.
    pub decay: f64,
    /// First order at which the correction is negligible.
    pub cutoff: u32,
}

impl ConvergenceModel {
    pub fn new(epsilon: f64, amplitude: f64, decay: f64, cutoff: u32) -> Result<Self> {
        if !(epsilon >= 1.0 && amplitude >= 0.0 && decay > 0.0) {
            return Err(Error::InvalidInput("need ε ≥ 1, A ≥ 0, α > 0"));
        }
        Ok(Self {
            epsilon,
            amplitude,
            decay,
            cutoff,
        })
    }

    /// `R(n) = ε (1 + A e^{−α n})`.
    pub fn ratio(&self, n: u32) -> f64 {
        self.epsilon * (1.0 + self.amplitude * (-self.decay * n as f64).exp())
    }
}

/// Convergence model plus fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedConvergence {
    pub model: ConvergenceModel,
    pub sigma_epsilon: f64,
    pub sigma_amplitude: f64,
    pub sigma_decay: f64,
    pub residual_rms: f64,
}

/// Predicted mode pairs of a uniform elliptical beam over an inclusive order
/// range.
///
/// `f_low` comes from the exact linear theory on the lower-stiffness axis;
/// `f_high = f_low · R(n)` with `R(n) = ε` when no convergence model is given.
/// A supplied model must have its plateau equal to the section's ellipticity.
pub fn predict_pairs(
    spec: &BeamSpec,
    orders: (u32, u32),
    model: Option<&ConvergenceModel>,
) -> Result<Vec<ModePair>> {
    let section = spec
        .uniform_section()
        .ok_or(Error::InvalidInput("pair prediction needs a uniform profile"))?;
    let (n_min, n_max) = orders;
    if n_min < 1 || n_max < n_min {
        return Err(Error::InvalidInput("need 1 ≤ n_min ≤ n_max"));
    }
    let eps = section.ellipticity();
    if let Some(m) = model {
        if (m.epsilon - eps).abs() > 1e-9 * eps {
            return Err(Error::InconsistentEllipticity);
        }
    }
    let mut pairs = Vec::with_capacity((n_max - n_min + 1) as usize);
    for n in n_min..=n_max {
        let f_low = eigenfrequency_exact(spec, StiffnessAxis::Lower, n)?;
        let r = model.map_or(eps, |m| m.ratio(n));
        pairs.push(ModePair::new(n, f_low, f_low * r)?);
    }
    Ok(pairs)
}

/// Fits `R(n) = ε (1 + A e^{−α n})` to a set of pairs by nonlinear least
/// squares and places the cutoff order where the correction drops below a
/// tenth of the plateau uncertainty.
///
/// Needs at least 6 pairs spanning a factor-3 range of orders. Data that is
/// already flat (no resolvable low-order excess) short-circuits to `A = 0`
/// with the plateau taken as the plain mean.
pub fn fit_convergence(pairs: &[ModePair]) -> Result<FittedConvergence> {
    if pairs.len() < 6 {
        return Err(Error::InsufficientData {
            needed: 6,
            got: pairs.len(),
        });
    }
    let mut sorted: Vec<&ModePair> = pairs.iter().collect();
    sorted.sort_by_key(|p| p.order);
    let n_min = sorted[0].order;
    let n_max = sorted[sorted.len() - 1].order;
    if n_max < 3 * n_min {
        return Err(Error::InsufficientData {
            needed: 3 * n_min as usize,
            got: n_max as usize,
        });
    }

    // Plateau seed: mean ratio of the top-quartile orders.
    let q_start = sorted.len() - (sorted.len() / 4).max(1);
    let eps0 = sorted[q_start..].iter().map(|p| p.ratio()).sum::<f64>()
        / (sorted.len() - q_start) as f64;
    let a0 = (sorted[0].ratio() / eps0 - 1.0).max(0.0);
    let span = (n_max - n_min) as f64;
    let alpha0 = 2.0 / span;

    let orders: Vec<f64> = sorted.iter().map(|p| p.order as f64).collect();
    let ratios: Vec<f64> = sorted.iter().map(|p| p.ratio()).collect();

    if a0 < 1e-9 {
        // Already converged: the decay is unconstrained, report the mean.
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
            / (ratios.len() - 1) as f64;
        let sigma_eps = (var / ratios.len() as f64).sqrt();
        return Ok(FittedConvergence {
            model: ConvergenceModel {
                epsilon: mean.max(1.0),
                amplitude: 0.0,
                decay: alpha0,
                cutoff: n_min,
            },
            sigma_epsilon: sigma_eps,
            sigma_amplitude: 0.0,
            sigma_decay: 0.0,
            residual_rms: var.sqrt(),
        });
    }

    let residuals = |p: &[f64], out: &mut [f64]| {
        for (i, (&n, &r)) in orders.iter().zip(&ratios).enumerate() {
            out[i] = p[0] * (1.0 + p[1] * (-p[2] * n).exp()) - r;
        }
    };
    let fit = lm::levenberg_marquardt(residuals, &[eps0, a0, alpha0], orders.len(), 200, 1e-12)?;
    let epsilon = fit.params[0];
    let amplitude = fit.params[1].max(0.0);
    let decay = fit.params[2];
    if !(epsilon > 0.0 && decay > 0.0) {
        return Err(Error::FitDiverged {
            iterations: fit.iterations,
        });
    }
    let sigma_eps = fit.sigma[0];
    let threshold = 0.1 * sigma_eps.max(SIGMA_FLOOR * epsilon);
    let cutoff = if amplitude <= threshold {
        n_min
    } else {
        let n_c = ((amplitude / threshold).ln() / decay).ceil();
        (n_c.max(n_min as f64) as u32).min(n_max + 1)
    };
    Ok(FittedConvergence {
        model: ConvergenceModel {
            epsilon,
            amplitude,
            decay,
            cutoff,
        },
        sigma_epsilon: sigma_eps,
        sigma_amplitude: fit.sigma[1],
        sigma_decay: fit.sigma[2],
        residual_rms: fit.residual_rms,
    })
}

/// Plateau ellipticity estimate: mean pair ratio at or above the cutoff,
/// with the standard error of that mean (combined with the per-pair ratio
/// uncertainty when pairs carry one).
///
/// When no cutoff is given it is taken from [`fit_convergence`].
pub fn ellipticity_from_pairs(pairs: &[ModePair], cutoff: Option<u32>) -> Result<(f64, f64)> {
    let cutoff = match cutoff {
        Some(c) => c,
        None => fit_convergence(pairs)?.model.cutoff,
    };
    let used: Vec<&ModePair> = pairs.iter().filter(|p| p.order >= cutoff).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: used.len(),
        });
    }
    let n = used.len() as f64;
    let mean = used.iter().map(|p| p.ratio()).sum::<f64>() / n;
    let var = used.iter().map(|p| (p.ratio() - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let mut sigmas: Vec<f64> = used.iter().filter_map(|p| p.sigma_ratio).collect();
    let sigma = if sigmas.is_empty() {
        se
    } else {
        sigmas.sort_by(|a, b| a.total_cmp(b));
        let median = sigmas[sigmas.len() / 2];
        // Per-pair noise re-enters as median σ_R / √N to avoid double counting
        // the scatter already captured by the standard error.
        (se * se + median * median / n).sqrt()
    };
    Ok((mean, sigma))
}

/// One row of the aspect-ratio study table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AspectRatioRow {
    pub aspect_ratio: f64,
    pub length: f64,
    pub order: u32,
    pub ratio: f64,
}

/// Recomputes the pair-ratio table for the same cross section at several
/// lengths. In linear theory the length cancels exactly, which the function
/// asserts for orders ≥ 10.
pub fn aspect_ratio_study(
    base: &BeamSpec,
    lengths: &[f64],
    orders: (u32, u32),
) -> Result<Vec<AspectRatioRow>> {
    let section = base
        .uniform_section()
        .ok_or(Error::InvalidInput("aspect-ratio study needs a uniform profile"))?;
    let eps = section.ellipticity();
    let mut rows = Vec::new();
    for &length in lengths {
        let spec = BeamSpec::uniform(base.material, length, section)?;
        let pairs = predict_pairs(&spec, orders, None)?;
        for pair in pairs {
            let ratio = pair.ratio();
            if pair.order >= 10 {
                assert!(
                    (ratio - eps).abs() <= 1e-6,
                    "length-independence violated at L = {length}, n = {}",
                    pair.order
                );
            }
            rows.push(AspectRatioRow {
                aspect_ratio: spec.aspect_ratio(),
                length,
                order: pair.order,
                ratio,
            });
        }
    }
    Ok(rows)
}

//! CI model estimation from path loss samples and omnidirectional path loss
//! synthesis from directional scans.
//!
//! The fit keeps the free-space intercept fixed and estimates only the path
//! loss exponent by least squares; shadow fading sigma is the RMS residual
//! (divide by N).

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    ci_mean_path_loss, ci_sample_path_loss, fspl, received_power_from_pl, AntennaGain, CiModel,
    Condition, Distance3D, Frequency, RngStream, REFERENCE_DISTANCE_M,
};
use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Polarization {
    #[default]
    #[serde(rename = "VV")]
    Vv,
    #[serde(rename = "VH")]
    Vh,
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "").as_str() {
            "VV" => Ok(Polarization::Vv),
            "VH" => Ok(Polarization::Vh),
            other => Err(Error::domain(format!("unknown polarization `{other}`"))),
        }
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarization::Vv => "VV",
            Polarization::Vh => "VH",
        })
    }
}

/// One path loss observation with antenna gains removed.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossSample {
    pub d: Distance3D,
    pub pl_db: f64,
    pub condition: Condition,
    pub polarization: Polarization,
    pub tx_angle_id: Option<u32>,
    pub rx_angle_id: Option<u32>,
}

impl PathLossSample {
    pub fn new(d_m: f64, pl_db: f64, condition: Condition) -> Result<Self> {
        let d = Distance3D::from_m(d_m)?;
        if d.m() < REFERENCE_DISTANCE_M {
            return Err(Error::domain(format!(
                "sample distance {d_m} m is below the {REFERENCE_DISTANCE_M} m reference distance"
            )));
        }
        if !pl_db.is_finite() {
            return Err(Error::domain("path loss must be finite"));
        }
        Ok(Self {
            d,
            pl_db,
            condition,
            polarization: Polarization::Vv,
            tx_angle_id: None,
            rx_angle_id: None,
        })
    }

    pub fn with_polarization(mut self, polarization: Polarization) -> Self {
        self.polarization = polarization;
        self
    }
}

/// Fits a CI model (fixed 1 m free-space intercept) to co-polarized samples.
///
/// Cross-polarized samples are ignored. All remaining samples must share one
/// condition label and span at least two distinct distances.
pub fn fit_ci(samples: &[PathLossSample], f: Frequency) -> Result<CiModel> {
    let used: Vec<&PathLossSample> = samples
        .iter()
        .filter(|s| s.polarization == Polarization::Vv)
        .collect();
    if used.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 co-polarized samples, got {}",
            used.len()
        )));
    }
    let condition = used[0].condition;
    if let Some(other) = used.iter().find(|s| s.condition != condition) {
        return Err(Error::Fit(format!(
            "mixed conditions in sample set ({condition} and {})",
            other.condition
        )));
    }
    let first = used[0].d.m();
    if used.iter().all(|s| s.d.m() == first) {
        return Err(Error::Fit("all samples share one distance".into()));
    }

    let anchor = fspl(f, Distance3D::from_m(REFERENCE_DISTANCE_M)?)?;
    let (mut num, mut den) = (0.0, 0.0);
    for s in &used {
        let x = 10.0 * s.d.m().log10();
        num += (s.pl_db - anchor) * x;
        den += x * x;
    }
    if den == 0.0 {
        // only reachable when every sample sits at exactly d0
        return Err(Error::Fit(
            "no distance spread beyond the reference distance".into(),
        ));
    }
    let ple = num / den;
    let sse: f64 = used
        .iter()
        .map(|s| {
            let r = s.pl_db - anchor - ple * 10.0 * s.d.m().log10();
            r * r
        })
        .sum();
    let sigma = (sse / used.len() as f64).sqrt();
    CiModel::new(f, ple, sigma, condition)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDiagnostics {
    pub mean_db: f64,
    pub rms_db: f64,
    /// Observed minus predicted, in sample order.
    pub residuals: Vec<f64>,
}

pub fn residual_diagnostics(
    model: &CiModel,
    samples: &[PathLossSample],
) -> Result<ResidualDiagnostics> {
    if samples.is_empty() {
        return Err(Error::Fit("no samples to diagnose".into()));
    }
    let residuals = samples
        .iter()
        .map(|s| Ok(s.pl_db - ci_mean_path_loss(model, s.d)?))
        .collect::<Result<Vec<f64>>>()?;
    let n = residuals.len() as f64;
    let mean_db = residuals.iter().sum::<f64>() / n;
    let rms_db = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    Ok(ResidualDiagnostics {
        mean_db,
        rms_db,
        residuals,
    })
}

/// Draws `n` samples from `model` at distances log-uniform on
/// `[d_min, d_max]`. Sample `i` uses its own RNG stream, so the output is the
/// same under every execution strategy.
pub fn synthetic_samples(
    model: &CiModel,
    n: usize,
    d_min: f64,
    d_max: f64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<PathLossSample>> {
    if !(d_min >= REFERENCE_DISTANCE_M && d_max >= d_min) {
        return Err(Error::domain(format!(
            "invalid distance range [{d_min}, {d_max}]"
        )));
    }
    let (lo, hi) = (d_min.log10(), d_max.log10());
    exec.map_indexed(n, |i| {
        let mut rng = RngStream::new(seed, i as u64);
        let d = 10f64.powf(lo + (hi - lo) * rng.random::<f64>());
        let d = Distance3D::from_m(d.clamp(d_min, d_max))?;
        let pl = ci_sample_path_loss(model, d, &mut rng)?;
        PathLossSample::new(d.m(), pl, model.condition())
    })
    .into_iter()
    .collect()
}

/// One detected pointing-angle combination of a directional scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanEntry {
    pub tx_angle: u16,
    pub rx_azimuth: u16,
    pub rx_elevation: u16,
    pub rx_power_dbm: f64,
}

/// Received powers for the detected angle triples of one TX-RX link.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DirectionalScan {
    pub link_id: String,
    pub entries: Vec<ScanEntry>,
}

impl DirectionalScan {
    pub fn new(link_id: impl Into<String>) -> Self {
        Self {
            link_id: link_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: ScanEntry) {
        self.entries.push(entry);
    }
}

/// Omnidirectional path loss synthesized by summing the linear received power
/// of every detected angle triple, then removing the antenna gains.
///
/// Duplicate angle triples are rejected. The result never exceeds the smallest
/// directional path loss of the scan.
pub fn synthesize_omni(
    scan: &DirectionalScan,
    gt: AntennaGain,
    gr: AntennaGain,
    pt_dbm: f64,
) -> Result<f64> {
    if scan.entries.is_empty() {
        return Err(Error::domain(format!(
            "scan `{}` has no detected angles",
            scan.link_id
        )));
    }
    let mut seen = HashSet::with_capacity(scan.entries.len());
    for e in &scan.entries {
        if !seen.insert((e.tx_angle, e.rx_azimuth, e.rx_elevation)) {
            return Err(Error::domain(format!(
                "scan `{}` repeats angle triple ({}, {}, {})",
                scan.link_id, e.tx_angle, e.rx_azimuth, e.rx_elevation
            )));
        }
    }
    let total_dbm = power_sum_db(scan.entries.iter().map(|e| e.rx_power_dbm));
    Ok(pt_dbm + gt.dbi() + gr.dbi() - total_dbm)
}

/// Omnidirectional path loss from gain-free directional path losses:
/// `-10 log10(sum 10^(-PL/10))`.
pub fn omni_from_directional(path_losses_db: &[f64]) -> Option<f64> {
    if path_losses_db.is_empty() {
        return None;
    }
    Some(-power_sum_db(path_losses_db.iter().map(|pl| -pl)))
}

/// `10 log10(sum 10^(x/10))`, evaluated relative to the maximum term.
fn power_sum_db(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.map(|v| 10f64.powf((v - max) / 10.0)).sum();
    max + 10.0 * sum.log10()
}

/// Directional scan entry for a gain-free directional path loss value.
pub fn scan_entry_from_pl(
    tx_angle: u16,
    rx_azimuth: u16,
    rx_elevation: u16,
    pl_db: f64,
    gt: AntennaGain,
    gr: AntennaGain,
    pt_dbm: f64,
) -> ScanEntry {
    ScanEntry {
        tx_angle,
        rx_azimuth,
        rx_elevation,
        rx_power_dbm: received_power_from_pl(pt_dbm, gt, gr, pl_db),
    }
}

//! Closed-form propagation math: free-space path loss, Friis transmission,
//! aperture gain and the close-in (CI) reference distance path loss model
//! with lognormal shadow fading.
//!
//! Frequencies are carried in GHz, distances in meters and all powers and
//! losses in dB / dBm. The CI model is anchored at a fixed 1 m reference
//! distance, so its intercept is the free-space loss at 1 m:
//!
//! ```text
//! PL(f, d) = 32.4 + 20 log10(f[GHz]) + 10 n log10(d[m]) + X_sigma,   d >= 1 m
//! ```

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Free-space path loss at 1 GHz and 1 m, in the rounded form used by the
/// 3GPP-style CI model.
pub const FSPL_1GHZ_1M_DB: f64 = 32.4;

/// CI model reference distance (meters). Fixed: the 32.4 dB intercept is only
/// valid for a 1 m anchor.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

/// Smallest distance accepted by [`fspl`].
pub const MIN_FSPL_DISTANCE_M: f64 = 0.001;

/// Carrier frequency in GHz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frequency(f64);

impl Frequency {
    pub fn from_ghz(ghz: f64) -> Result<Self> {
        if ghz.is_finite() && ghz > 0.0 {
            Ok(Self(ghz))
        } else {
            Err(Error::domain(format!(
                "frequency must be positive, got {ghz} GHz"
            )))
        }
    }

    pub fn ghz(self) -> f64 {
        self.0
    }

    pub fn hz(self) -> f64 {
        self.0 * 1e9
    }

    pub fn wavelength_m(self) -> f64 {
        SPEED_OF_LIGHT_M_S / self.hz()
    }
}

/// 3D Euclidean TX-RX separation in meters.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distance3D(f64);

impl Distance3D {
    pub fn from_m(m: f64) -> Result<Self> {
        if m.is_finite() && m > 0.0 {
            Ok(Self(m))
        } else {
            Err(Error::domain(format!(
                "distance must be positive, got {m} m"
            )))
        }
    }

    pub fn m(self) -> f64 {
        self.0
    }
}

/// Antenna gain in dBi.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AntennaGain(pub f64);

impl AntennaGain {
    pub fn dbi(self) -> f64 {
        self.0
    }

    pub fn linear(self) -> f64 {
        10f64.powf(self.0 / 10.0)
    }
}

/// Propagation condition a CI model was fitted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "NLOS")]
    Nlos,
    /// NLOS with the TX and RX beams aligned on the strongest angle pair.
    #[serde(rename = "NLOS_BEST")]
    NlosBest,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::Los => "LOS",
            Condition::Nlos => "NLOS",
            Condition::NlosBest => "NLOS_BEST",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "LOS" => Ok(Condition::Los),
            "NLOS" => Ok(Condition::Nlos),
            "NLOS_BEST" => Ok(Condition::NlosBest),
            other => Err(Error::domain(format!("unknown condition `{other}`"))),
        }
    }
}

/// A fitted close-in free-space reference distance path loss model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiModel {
    frequency: Frequency,
    ple: f64,
    sigma_db: f64,
    condition: Condition,
}

impl CiModel {
    pub fn new(
        frequency: Frequency,
        ple: f64,
        sigma_db: f64,
        condition: Condition,
    ) -> Result<Self> {
        if !ple.is_finite() {
            return Err(Error::domain("path loss exponent must be finite"));
        }
        if !(sigma_db.is_finite() && sigma_db >= 0.0) {
            return Err(Error::domain(format!(
                "shadow fading sigma must be non-negative, got {sigma_db} dB"
            )));
        }
        Ok(Self {
            frequency,
            ple,
            sigma_db,
            condition,
        })
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn ple(&self) -> f64 {
        self.ple
    }

    pub fn sigma_db(&self) -> f64 {
        self.sigma_db
    }

    pub fn d0_m(&self) -> f64 {
        REFERENCE_DISTANCE_M
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn with_sigma(self, sigma_db: f64) -> Result<Self> {
        Self::new(self.frequency, self.ple, sigma_db, self.condition)
    }
}

/// Published 73.5 GHz V-V parameter sets for the UMi open-square scenario.
pub mod presets {
    use super::{CiModel, Condition, Frequency};

    pub const CARRIER_GHZ: f64 = 73.5;

    fn model(ple: f64, sigma: f64, condition: Condition) -> CiModel {
        CiModel::new(Frequency(CARRIER_GHZ), ple, sigma, condition).expect("valid preset")
    }

    /// Directional, arbitrary pointing angles, LOS.
    pub fn directional_los() -> CiModel {
        model(2.0, 1.9, Condition::Los)
    }

    /// Directional, arbitrary pointing angles, NLOS.
    pub fn directional_nlos() -> CiModel {
        model(4.6, 11.4, Condition::Nlos)
    }

    /// Directional, best pointing angle pair, NLOS.
    pub fn directional_nlos_best() -> CiModel {
        model(2.9, 11.0, Condition::NlosBest)
    }

    pub fn omni_los() -> CiModel {
        model(1.9, 1.7, Condition::Los)
    }

    pub fn omni_nlos() -> CiModel {
        model(2.8, 8.7, Condition::Nlos)
    }
}

/// Free-space path loss in the CI-model form
/// `32.4 + 20 log10(f[GHz]) + 20 log10(d[m])`.
///
/// The 32.4 dB constant is the rounded 1 GHz / 1 m loss; use
/// [`fspl_exact`] for `20 log10(4 pi d / lambda)` with the exact speed of light.
pub fn fspl(f: Frequency, d: Distance3D) -> Result<f64> {
    check_fspl_distance(d)?;
    Ok(FSPL_1GHZ_1M_DB + 20.0 * f.ghz().log10() + 20.0 * d.m().log10())
}

/// Free-space path loss `20 log10(4 pi d / lambda)`.
pub fn fspl_exact(f: Frequency, d: Distance3D) -> Result<f64> {
    check_fspl_distance(d)?;
    Ok(20.0 * (4.0 * PI * d.m() / f.wavelength_m()).log10())
}

fn check_fspl_distance(d: Distance3D) -> Result<()> {
    if d.m() < MIN_FSPL_DISTANCE_M {
        return Err(Error::domain(format!(
            "free-space loss needs d >= {MIN_FSPL_DISTANCE_M} m, got {} m",
            d.m()
        )));
    }
    Ok(())
}

/// Received power from the log form of the Friis transmission formula.
pub fn friis_received_power(
    pt_dbm: f64,
    gt: AntennaGain,
    gr: AntennaGain,
    f: Frequency,
    d: Distance3D,
) -> f64 {
    pt_dbm + gt.dbi() + gr.dbi() + 20.0 * (f.wavelength_m() / (4.0 * PI * d.m())).log10()
}

/// Linear-domain Friis formula, `Pt Gt Gr (lambda / 4 pi d)^2`, all in mW.
pub fn friis_received_power_mw(
    pt_mw: f64,
    gt_linear: f64,
    gr_linear: f64,
    f: Frequency,
    d: Distance3D,
) -> f64 {
    let ratio = f.wavelength_m() / (4.0 * PI * d.m());
    pt_mw * gt_linear * gr_linear * ratio * ratio
}

/// Free-space received power gain when moving from `f1` to `f2` with the same
/// physical aperture at both ends of the link.
pub fn gain_increase(f1: Frequency, f2: Frequency) -> f64 {
    let r = f2.ghz() / f1.ghz();
    r * r
}

/// Antenna gain of an aperture of effective area `aperture_m2` at `f`.
pub fn gain_from_aperture(aperture_m2: f64, f: Frequency) -> Result<AntennaGain> {
    if !(aperture_m2.is_finite() && aperture_m2 > 0.0) {
        return Err(Error::domain(format!(
            "effective aperture must be positive, got {aperture_m2} m^2"
        )));
    }
    let lambda = f.wavelength_m();
    let linear = aperture_m2 * 4.0 * PI / (lambda * lambda);
    Ok(AntennaGain(10.0 * linear.log10()))
}

/// Mean (distance-dependent) CI path loss.
pub fn ci_mean_path_loss(model: &CiModel, d: Distance3D) -> Result<f64> {
    if d.m() < REFERENCE_DISTANCE_M {
        return Err(Error::domain(format!(
            "CI model is only valid for d >= {REFERENCE_DISTANCE_M} m, got {} m",
            d.m()
        )));
    }
    let anchor = FSPL_1GHZ_1M_DB + 20.0 * model.frequency.ghz().log10();
    Ok(anchor + 10.0 * model.ple * d.m().log10())
}

/// One CI path loss realization: the mean plus a zero-mean Gaussian shadow
/// fading term with the model's sigma.
pub fn ci_sample_path_loss<R: Rng + ?Sized>(
    model: &CiModel,
    d: Distance3D,
    rng: &mut R,
) -> Result<f64> {
    let mean = ci_mean_path_loss(model, d)?;
    if model.sigma_db == 0.0 {
        return Ok(mean);
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + model.sigma_db * z)
}

/// Received power from a path loss value with the antenna gains added back.
pub fn received_power_from_pl(pt_dbm: f64, gt: AntennaGain, gr: AntennaGain, pl_db: f64) -> f64 {
    pt_dbm + gt.dbi() + gr.dbi() - pl_db
}

/// Deterministic random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8, a counter-based generator: the n-th output of a stream
/// depends only on the seed, the stream id and n, so work items that each
/// own a stream produce the same numbers regardless of scheduling.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self(rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ghz(v: f64) -> Frequency {
        Frequency::from_ghz(v).unwrap()
    }

    fn m(v: f64) -> Distance3D {
        Distance3D::from_m(v).unwrap()
    }

    #[test]
    fn fspl_reference_values() {
        assert_abs_diff_eq!(fspl(ghz(1.0), m(1.0)).unwrap(), 32.4, epsilon = 1e-12);
        // 32.4 + 20 log10(73.5) = 69.7265...; quoted rounded as 69.8 dB
        assert_abs_diff_eq!(fspl(ghz(73.5), m(1.0)).unwrap(), 69.73, epsilon = 0.005);
        assert_abs_diff_eq!(fspl(ghz(73.5), m(10.0)).unwrap(), 89.73, epsilon = 0.005);
    }

    #[test]
    fn fspl_exact_close_to_rounded_form() {
        let exact = fspl_exact(ghz(1.0), m(1.0)).unwrap();
        assert_abs_diff_eq!(exact, 32.4478, epsilon = 1e-4);
        let diff = fspl_exact(ghz(73.5), m(37.0)).unwrap() - fspl(ghz(73.5), m(37.0)).unwrap();
        assert!(diff.abs() < 0.05);
    }

    #[test]
    fn fspl_rejects_tiny_distance() {
        assert!(matches!(fspl(ghz(28.0), m(0.0005)), Err(Error::Domain(_))));
        assert!(Distance3D::from_m(0.0).is_err());
        assert!(Distance3D::from_m(-3.0).is_err());
        assert!(Frequency::from_ghz(0.0).is_err());
        assert!(Frequency::from_ghz(f64::NAN).is_err());
    }

    #[test]
    fn friis_doubling_distance_costs_6db() {
        let f = ghz(73.5);
        let a = friis_received_power(0.0, AntennaGain(0.0), AntennaGain(0.0), f, m(10.0));
        let b = friis_received_power(0.0, AntennaGain(0.0), AntennaGain(0.0), f, m(20.0));
        assert_abs_diff_eq!(a - b, 20.0 * 2f64.log10(), epsilon = 1e-12);
        assert_abs_diff_eq!(a - b, 6.0206, epsilon = 1e-4);
    }

    #[test]
    fn friis_with_zero_gains_is_negative_exact_fspl() {
        let (f, d) = (ghz(28.0), m(57.0));
        let p = friis_received_power(0.0, AntennaGain(0.0), AntennaGain(0.0), f, d);
        assert_abs_diff_eq!(p, -fspl_exact(f, d).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn gain_increase_values() {
        assert_eq!(gain_increase(ghz(5.0), ghz(5.0)), 1.0);
        assert_eq!(gain_increase(ghz(1.0), ghz(2.0)), 4.0);
        assert_abs_diff_eq!(
            gain_increase(ghz(3.0), ghz(73.5)),
            24.5 * 24.5,
            epsilon = 1e-9
        );
    }

    #[test]
    fn isotropic_aperture_is_zero_dbi() {
        let f = ghz(73.5);
        let lambda = f.wavelength_m();
        let g = gain_from_aperture(lambda * lambda / (4.0 * PI), f).unwrap();
        assert_abs_diff_eq!(g.dbi(), 0.0, epsilon = 1e-12);
        assert!(gain_from_aperture(0.0, f).is_err());
        assert!(gain_from_aperture(-1.0, f).is_err());
    }

    #[test]
    fn aperture_gain_grows_6db_per_octave() {
        let a = 1e-4;
        let g1 = gain_from_aperture(a, ghz(30.0)).unwrap().dbi();
        let g2 = gain_from_aperture(a, ghz(60.0)).unwrap().dbi();
        assert_abs_diff_eq!(g2 - g1, 6.0206, epsilon = 1e-4);
    }

    #[test]
    fn aperture_gains_in_friis_reproduce_gain_increase() {
        // same physical apertures at both frequencies
        let (f1, f2, d) = (ghz(3.0), ghz(73.5), m(100.0));
        let (at, ar) = (2e-3, 5e-4);
        let p = |f: Frequency| {
            friis_received_power(
                0.0,
                gain_from_aperture(at, f).unwrap(),
                gain_from_aperture(ar, f).unwrap(),
                f,
                d,
            )
        };
        let ratio = 10f64.powf((p(f2) - p(f1)) / 10.0);
        assert_abs_diff_eq!(ratio / gain_increase(f1, f2), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn ci_mean_examples() {
        let nlos = presets::directional_nlos();
        // 69.7265 + 46 log10(63) = 152.499
        assert_abs_diff_eq!(
            ci_mean_path_loss(&nlos, m(63.0)).unwrap(),
            152.5,
            epsilon = 0.01
        );
        assert_eq!(
            ci_mean_path_loss(&nlos, m(1.0)).unwrap(),
            fspl(nlos.frequency(), m(1.0)).unwrap()
        );
        let los = presets::directional_los();
        for d in [1.0, 3.3, 21.0, 140.0] {
            assert_abs_diff_eq!(
                ci_mean_path_loss(&los, m(d)).unwrap(),
                fspl(los.frequency(), m(d)).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn ci_rejects_below_reference_distance() {
        let nlos = presets::directional_nlos();
        assert!(matches!(
            ci_mean_path_loss(&nlos, m(0.99)),
            Err(Error::Domain(_))
        ));
        let mut rng = RngStream::new(1, 0);
        assert!(ci_sample_path_loss(&nlos, m(0.5), &mut rng).is_err());
    }

    #[test]
    fn model_rejects_negative_sigma() {
        assert!(CiModel::new(ghz(73.5), 3.0, -0.1, Condition::Nlos).is_err());
        assert!(CiModel::new(ghz(73.5), f64::INFINITY, 1.0, Condition::Nlos).is_err());
    }

    #[test]
    fn zero_sigma_sampling_is_deterministic_mean() {
        let model = presets::directional_nlos().with_sigma(0.0).unwrap();
        let mut rng = RngStream::new(9, 3);
        for _ in 0..10 {
            assert_eq!(
                ci_sample_path_loss(&model, m(80.0), &mut rng).unwrap(),
                ci_mean_path_loss(&model, m(80.0)).unwrap()
            );
        }
    }

    #[test]
    fn shadow_fading_statistics() {
        let model = presets::directional_nlos();
        let d = m(100.0);
        let mean = ci_mean_path_loss(&model, d).unwrap();
        let mut rng = RngStream::new(2024, 0);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let r = ci_sample_path_loss(&model, d, &mut rng).unwrap() - mean;
            s += r;
            s2 += r * r;
        }
        let nf = n as f64;
        let emp_mean = s / nf;
        let emp_var = s2 / nf - emp_mean * emp_mean;
        let sigma = model.sigma_db();
        assert!(emp_mean.abs() < 4.0 * sigma / nf.sqrt(), "mean {emp_mean}");
        assert!(
            (emp_var / (sigma * sigma) - 1.0).abs() < 0.05,
            "var {emp_var}"
        );
        assert!((emp_var.sqrt() / sigma - 1.0).abs() < 0.01);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |seed, stream| {
            let mut r = RngStream::new(seed, stream);
            (0..8).map(|_| r.next_u64()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7, 1), draw(7, 1));
        assert_ne!(draw(7, 1), draw(7, 2));
        assert_ne!(draw(7, 1), draw(8, 1));
    }

    #[test]
    fn condition_parsing() {
        assert_eq!(
            "nlos-best".parse::<Condition>().unwrap(),
            Condition::NlosBest
        );
        assert_eq!("LOS".parse::<Condition>().unwrap(), Condition::Los);
        assert!("foo".parse::<Condition>().is_err());
    }
}

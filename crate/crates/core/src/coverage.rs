//! Link-budget thresholding and lognormal-shadowing outage probabilities at
//! the cell edge and averaged over a circular coverage region.

use std::collections::BTreeMap;
use std::f64::consts::{LOG10_E, PI, SQRT_2};

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::channel::{
    ci_mean_path_loss, AntennaGain, CiModel, Condition, Distance3D, REFERENCE_DISTANCE_M,
};
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Transmit/receive chain parameters that fix the receiver sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    pub pt_dbm: f64,
    pub gt_dbi: f64,
    pub gr_dbi: f64,
    /// RF bandwidth in GHz; the threshold scales by `10 log10(bw)`.
    pub bw_ghz: f64,
    /// Largest measurable path loss including antenna gains.
    pub max_pl_db: f64,
    /// Detection SNR behind `max_pl_db`. Informational only.
    #[serde(default = "default_snr")]
    pub snr_threshold_db: f64,
}

fn default_snr() -> f64 {
    5.0
}

impl Default for LinkBudget {
    /// 73.5 GHz sliding-correlator sounder: 14.9 dBm into a 27 dBi horn,
    /// 20 dBi RX horn, 1 GHz RF bandwidth, 175 dB maximum measurable loss.
    fn default() -> Self {
        Self {
            pt_dbm: 14.9,
            gt_dbi: 27.0,
            gr_dbi: 20.0,
            bw_ghz: 1.0,
            max_pl_db: 175.0,
            snr_threshold_db: default_snr(),
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.pt_dbm, self.gt_dbi, self.gr_dbi, self.snr_threshold_db]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain("link budget values must be finite"));
        }
        if !(self.bw_ghz.is_finite() && self.bw_ghz > 0.0) {
            return Err(Error::invalid(
                "budget.bw_ghz",
                "bandwidth must be positive",
            ));
        }
        if !(self.max_pl_db.is_finite() && self.max_pl_db > 0.0) {
            return Err(Error::invalid(
                "budget.max_pl_db",
                "maximum path loss must be positive",
            ));
        }
        Ok(())
    }

    pub fn gt(&self) -> AntennaGain {
        AntennaGain(self.gt_dbi)
    }

    pub fn gr(&self) -> AntennaGain {
        AntennaGain(self.gr_dbi)
    }

    /// Mean received power for a path loss value.
    pub fn received_power(&self, pl_db: f64) -> f64 {
        self.pt_dbm + self.gt_dbi + self.gr_dbi - pl_db
    }
}

/// Receiver threshold `Pt + Gt + Gr - PLmax + 10 log10(BW[GHz])`.
pub fn receiver_threshold(budget: &LinkBudget) -> f64 {
    budget.pt_dbm + budget.gt_dbi + budget.gr_dbi - budget.max_pl_db + 10.0 * budget.bw_ghz.log10()
}

/// A model, a budget and an evaluation radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageQuery {
    pub model: CiModel,
    pub budget: LinkBudget,
    pub radius_m: f64,
}

impl CoverageQuery {
    pub fn new(model: CiModel, budget: LinkBudget, radius_m: f64) -> Self {
        Self {
            model,
            budget,
            radius_m,
        }
    }

    /// Normalized threshold margin `(x0 - xbar) / (sigma sqrt 2)` at the radius.
    /// Infinite when sigma is zero.
    fn normalized_margin(&self) -> Result<f64> {
        self.budget.validate()?;
        if self.radius_m < REFERENCE_DISTANCE_M {
            return Err(Error::domain(format!(
                "radius {} m is below the {REFERENCE_DISTANCE_M} m reference distance",
                self.radius_m
            )));
        }
        let mean_pl = ci_mean_path_loss(&self.model, Distance3D::from_m(self.radius_m)?)?;
        let diff = receiver_threshold(&self.budget) - self.budget.received_power(mean_pl);
        let sigma = self.model.sigma_db();
        if sigma == 0.0 {
            return Ok(if diff > 0.0 {
                f64::INFINITY
            } else if diff < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            });
        }
        Ok(diff / (sigma * SQRT_2))
    }
}

/// Probability that the received power at the cell edge exceeds the receiver
/// threshold. With zero shadowing this is a step: 1 above threshold, 0 below
/// and 0.5 exactly at it.
pub fn edge_coverage_probability(q: &CoverageQuery) -> Result<f64> {
    let a = q.normalized_margin()?;
    Ok(0.5 * erfc(a))
}

/// `1 - edge_coverage_probability`, computed without cancellation.
pub fn edge_outage_probability(q: &CoverageQuery) -> Result<f64> {
    let a = q.normalized_margin()?;
    Ok(0.5 * erfc(-a))
}

/// Fraction of a disk of radius `R` whose received power exceeds the
/// threshold (the "useful service area" fraction).
///
/// With `a = (x0 - xbar(R)) / (sigma sqrt 2)` and
/// `b = 10 n log10(e) / (sigma sqrt 2)`:
///
/// ```text
/// Fu = 1/2 [ 1 - erf(a) + exp((1 - 2ab) / b^2) (1 - erf((1 - ab) / b)) ]
/// ```
///
/// The mean power model is extended inside the reference distance, which is
/// a negligible part of the disk.
pub fn region_coverage_fraction(q: &CoverageQuery) -> Result<f64> {
    Ok(1.0 - region_outage_probability(q)?)
}

/// Outage probability averaged over the coverage disk, `1 - Fu`.
pub fn region_outage_probability(q: &CoverageQuery) -> Result<f64> {
    let sigma = q.model.sigma_db();
    if sigma == 0.0 {
        return Err(Error::domain("region outage needs sigma > 0"));
    }
    let n = q.model.ple();
    if n <= 0.0 {
        return Err(Error::domain(format!(
            "region outage needs a positive exponent, got {n}"
        )));
    }
    let a = q.normalized_margin()?;
    let b = 10.0 * n * LOG10_E / (sigma * SQRT_2);
    // 1 - Fu = 1/2 [erfc(-a) - exp((1-2ab)/b^2) erfc((1-ab)/b)]
    let tail = exp_times_erfc(a, b);
    Ok((0.5 * (erfc(-a) - tail)).clamp(0.0, 1.0))
}

/// `exp((1 - 2ab)/b^2) * erfc((1 - ab)/b)`.
///
/// The exponent equals `u^2 - a^2` with `u = (1 - ab)/b`, so for large `u`
/// the product is evaluated as `exp(-a^2) * erfcx(u)` to avoid overflow.
fn exp_times_erfc(a: f64, b: f64) -> f64 {
    let u = (1.0 - a * b) / b;
    if u < 25.0 {
        ((1.0 - 2.0 * a * b) / (b * b)).exp() * erfc(u)
    } else {
        (-a * a).exp() * erfcx_asymptotic(u)
    }
}

/// Scaled complementary error function `exp(u^2) erfc(u)` for `u >= 25`.
/// Relative error of the truncated series is below 1e-11 there.
fn erfcx_asymptotic(u: f64) -> f64 {
    let inv2 = 1.0 / (u * u);
    let series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2;
    series / (u * PI.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageRow {
    pub condition: Condition,
    pub distance_m: f64,
    /// Edge outage probability, 0..=1.
    pub p_out_edge: f64,
    /// Region outage probability, 0..=1.
    pub p_out_region: f64,
}

/// One row per (condition, distance), conditions in ascending order and
/// distances in input order.
pub fn outage_table(
    models: &BTreeMap<Condition, CiModel>,
    budget: &LinkBudget,
    distances: &[f64],
    exec: Execution,
) -> Result<Vec<OutageRow>> {
    if distances.is_empty() {
        return Err(Error::domain("outage table needs at least one distance"));
    }
    let cells: Vec<(Condition, CiModel, f64)> = models
        .iter()
        .flat_map(|(&c, &m)| distances.iter().map(move |&d| (c, m, d)))
        .collect();
    exec.map_slice(&cells, |&(condition, model, distance_m)| {
        let q = CoverageQuery::new(model, *budget, distance_m);
        Ok(OutageRow {
            condition,
            distance_m,
            p_out_edge: edge_outage_probability(&q)?,
            p_out_region: region_outage_probability(&q)?,
        })
    })
    .into_iter()
    .collect()
}

/// Median nearest-neighbor distances (1st, 2nd, 3rd) plus 100 m and 200 m
/// cell radii.
pub const DEFAULT_DISTANCES_M: [f64; 5] = [63.0, 78.0, 87.0, 100.0, 200.0];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{presets, Frequency};
    use approx::assert_abs_diff_eq;

    #[test]
    fn threshold_examples() {
        let b = LinkBudget::default();
        assert_abs_diff_eq!(receiver_threshold(&b), -113.1, epsilon = 1e-9);
        let narrow = LinkBudget { bw_ghz: 0.1, ..b };
        assert_abs_diff_eq!(receiver_threshold(&narrow), -123.1, epsilon = 1e-9);
        let plain = LinkBudget {
            pt_dbm: 0.0,
            gt_dbi: 0.0,
            gr_dbi: 0.0,
            bw_ghz: 1.0,
            max_pl_db: 100.0,
            snr_threshold_db: 5.0,
        };
        assert_abs_diff_eq!(receiver_threshold(&plain), -100.0, epsilon = 1e-12);
    }

    #[test]
    fn budget_validation() {
        let b = LinkBudget {
            bw_ghz: 0.0,
            ..LinkBudget::default()
        };
        assert!(b.validate().is_err());
        let b = LinkBudget {
            max_pl_db: -1.0,
            ..LinkBudget::default()
        };
        assert!(b.validate().is_err());
    }

    #[test]
    fn coverage_is_one_half_at_threshold() {
        // mean received power equals the threshold when PL(R) = max_pl
        let model = presets::directional_nlos();
        let anchor = 32.4 + 20.0 * 73.5f64.log10();
        let r = 10f64.powf((175.0 - anchor) / 46.0);
        let q = CoverageQuery::new(model, LinkBudget::default(), r);
        assert_abs_diff_eq!(edge_coverage_probability(&q).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn nlos_edge_and_region_examples() {
        let model = presets::directional_nlos();
        let b = LinkBudget::default();
        let edge = |r| edge_outage_probability(&CoverageQuery::new(model, b, r)).unwrap() * 100.0;
        let region =
            |r| region_outage_probability(&CoverageQuery::new(model, b, r)).unwrap() * 100.0;
        assert_abs_diff_eq!(edge(63.0), 2.4, epsilon = 0.1);
        assert_abs_diff_eq!(edge(200.0), 52.0, epsilon = 0.1);
        assert_abs_diff_eq!(region(63.0), 0.7, epsilon = 0.1);
        assert_abs_diff_eq!(region(200.0), 27.1, epsilon = 0.1);
    }

    #[test]
    fn zero_sigma_is_a_step() {
        let los = presets::directional_los().with_sigma(0.0).unwrap();
        let b = LinkBudget::default();
        let near = CoverageQuery::new(los, b, 10.0);
        assert_eq!(edge_coverage_probability(&near).unwrap(), 1.0);
        let nlos = presets::directional_nlos().with_sigma(0.0).unwrap();
        let far = CoverageQuery::new(nlos, b, 500.0);
        assert_eq!(edge_coverage_probability(&far).unwrap(), 0.0);
        assert!(region_outage_probability(&far).is_err());
    }

    #[test]
    fn domain_errors() {
        let q = CoverageQuery::new(presets::directional_nlos(), LinkBudget::default(), 0.5);
        assert!(matches!(
            edge_coverage_probability(&q),
            Err(Error::Domain(_))
        ));
        assert!(region_outage_probability(&q).is_err());
        let flat = CiModel::new(
            Frequency::from_ghz(73.5).unwrap(),
            0.0,
            5.0,
            Condition::Nlos,
        )
        .unwrap();
        let q = CoverageQuery::new(flat, LinkBudget::default(), 50.0);
        assert!(region_outage_probability(&q).is_err());
        assert!(outage_table(
            &BTreeMap::new(),
            &LinkBudget::default(),
            &[],
            Execution::Sequential
        )
        .is_err());
    }

    #[test]
    fn asymptotic_branch_is_continuous() {
        for u in [25.0, 25.5, 26.0] {
            let direct = erfc(u);
            let scaled = (-u * u).exp() * erfcx_asymptotic(u);
            assert!((direct / scaled - 1.0).abs() < 1e-9, "u={u}");
        }
    }

    #[test]
    fn table_rows_in_order() {
        let mut models = BTreeMap::new();
        models.insert(Condition::NlosBest, presets::directional_nlos_best());
        models.insert(Condition::Nlos, presets::directional_nlos());
        let rows = outage_table(
            &models,
            &LinkBudget::default(),
            &DEFAULT_DISTANCES_M,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[0].condition, Condition::Nlos);
        assert_eq!(rows[5].condition, Condition::NlosBest);
        assert_eq!(rows[4].distance_m, 200.0);
        let seq = outage_table(
            &models,
            &LinkBudget::default(),
            &DEFAULT_DISTANCES_M,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(rows, seq);
    }
}

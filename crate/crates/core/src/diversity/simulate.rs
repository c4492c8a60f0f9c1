//! Monte Carlo drop simulator emulating the directional beam sweep.
//!
//! For every serving link of a trial the simulator draws one directional path
//! loss per (TX sector angle, RX direction) pair from the arbitrary-angle
//! model of the link's condition. On NLOS links the strongest pair is then
//! replaced by a draw from the best-angle model. Draws across angles are
//! independent: no angular correlation is modelled.
//!
//! An RX direction is detectable when the received power from any TX angle
//! clears the receiver threshold. The omnidirectional path loss of a link is
//! the power sum over detected pairs, or a direct draw from the omni model
//! when [`OmniSource::Model`] is selected.
//!
//! Trial `t` draws exclusively from RNG stream `(seed, t)`, so any prefix of
//! trials is identical across runs with different trial counts and across
//! execution strategies.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{distance_3d, nearest_neighbor_order, DistanceStats, Node};
use super::reception::{
    max_serving_count, topology_from_links, LinkId, ReceptionCount, RxMask, SweepGrid, Topology,
    RX_DIRECTIONS,
};
use crate::channel::{ci_sample_path_loss, presets, CiModel, Condition, Distance3D, RngStream};
use crate::coverage::{receiver_threshold, LinkBudget};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fitting::omni_from_directional;

/// Share of LOS links in the 73 GHz campaign (11 of 36).
pub const DEFAULT_P_LOS: f64 = 11.0 / 36.0;

/// CI models used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSet {
    pub directional_los: CiModel,
    pub directional_nlos: CiModel,
    pub directional_nlos_best: CiModel,
    pub omni_los: CiModel,
    pub omni_nlos: CiModel,
}

impl Default for ModelSet {
    fn default() -> Self {
        Self {
            directional_los: presets::directional_los(),
            directional_nlos: presets::directional_nlos(),
            directional_nlos_best: presets::directional_nlos_best(),
            omni_los: presets::omni_los(),
            omni_nlos: presets::omni_nlos(),
        }
    }
}

impl ModelSet {
    pub fn directional(&self, condition: Condition) -> &CiModel {
        match condition {
            Condition::Los => &self.directional_los,
            Condition::Nlos => &self.directional_nlos,
            Condition::NlosBest => &self.directional_nlos_best,
        }
    }

    pub fn omni(&self, condition: Condition) -> &CiModel {
        match condition {
            Condition::Los => &self.omni_los,
            Condition::Nlos | Condition::NlosBest => &self.omni_nlos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmniSource {
    /// Power sum of the detected directional pairs.
    #[default]
    Synthesized,
    /// One draw from the omnidirectional CI model of the link's condition.
    Model,
}

/// A serving link. `condition = None` defers to the scenario's LOS probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ServingLink {
    pub ue: usize,
    pub bs: usize,
    pub condition: Option<Condition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub base_stations: Vec<Node>,
    pub ues: Vec<Node>,
    pub links: Vec<ServingLink>,
    pub p_los: f64,
    pub models: ModelSet,
    pub budget: LinkBudget,
    pub sweep: SweepGrid,
    pub omni_source: OmniSource,
    pub seed: u64,
}

impl Scenario {
    /// Scenario in which every base station serves every UE.
    pub fn fully_connected(base_stations: Vec<Node>, ues: Vec<Node>) -> Result<Self> {
        let links = (0..ues.len())
            .flat_map(|u| {
                (0..base_stations.len()).map(move |b| ServingLink {
                    ue: u,
                    bs: b,
                    condition: None,
                })
            })
            .collect();
        let s = Self {
            base_stations,
            ues,
            links,
            p_los: DEFAULT_P_LOS,
            models: ModelSet::default(),
            budget: LinkBudget::default(),
            sweep: SweepGrid::default(),
            omni_source: OmniSource::default(),
            seed: crate::DEFAULT_SEED,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_stations.is_empty() {
            return Err(Error::invalid(
                "base_stations",
                "need at least one base station",
            ));
        }
        if self.ues.is_empty() {
            return Err(Error::invalid("ues", "need at least one UE"));
        }
        check_unique_ids(&self.base_stations, "base_stations")?;
        check_unique_ids(&self.ues, "ues")?;
        if !(0.0..=1.0).contains(&self.p_los) {
            return Err(Error::invalid("p_los", "must lie in [0, 1]"));
        }
        self.budget.validate()?;
        self.sweep.validate()?;
        let mut seen = std::collections::HashSet::new();
        for (i, l) in self.links.iter().enumerate() {
            let path = format!("links[{i}]");
            let (Some(ue), Some(bs)) = (self.ues.get(l.ue), self.base_stations.get(l.bs)) else {
                return Err(Error::invalid(path, "link refers to an unknown node"));
            };
            if !seen.insert((l.ue, l.bs)) {
                return Err(Error::invalid(
                    path,
                    format!("duplicate link {} <- {}", ue.id, bs.id),
                ));
            }
            let d = distance_3d(ue, bs).map_err(|e| Error::invalid(path.clone(), e.to_string()))?;
            if d.m() < crate::channel::REFERENCE_DISTANCE_M {
                return Err(Error::invalid(
                    path,
                    format!(
                        "link distance {:.3} m is below the 1 m reference distance",
                        d.m()
                    ),
                ));
            }
        }
        if self.links.is_empty() {
            return Err(Error::invalid("links", "scenario has no serving links"));
        }
        Ok(())
    }

    pub fn link_id(&self, link: &ServingLink) -> LinkId {
        LinkId::new(
            self.ues[link.ue].id.clone(),
            self.base_stations[link.bs].id.clone(),
        )
    }

    pub fn topology(&self) -> Topology {
        let ids: Vec<LinkId> = self.links.iter().map(|l| self.link_id(l)).collect();
        topology_from_links(&ids)
    }

    /// Serving base stations of UE `ue` (index), in link order.
    pub fn serving(&self, ue: usize) -> Vec<usize> {
        self.links
            .iter()
            .filter(|l| l.ue == ue)
            .map(|l| l.bs)
            .collect()
    }

    /// Serving base station indices of `ue` by ascending 3D distance.
    pub fn nearest_neighbor_order(&self, ue: usize) -> Vec<usize> {
        let serving = self.serving(ue);
        let refs: Vec<&Node> = serving.iter().map(|&b| &self.base_stations[b]).collect();
        nearest_neighbor_order(&self.ues[ue], &refs)
            .into_iter()
            .map(|i| serving[i])
            .collect()
    }

    /// Distance statistics of the k-th nearest serving base station for
    /// `k = 1..=max_rank`. UEs with fewer than k serving stations are left
    /// out of rank k.
    pub fn nn_distance_stats(&self, max_rank: usize) -> Result<Vec<DistanceStats>> {
        let orders: Vec<Vec<f64>> = (0..self.ues.len())
            .map(|u| {
                self.nearest_neighbor_order(u)
                    .into_iter()
                    .map(|b| super::geometry::separation_m(&self.ues[u], &self.base_stations[b]))
                    .collect()
            })
            .collect();
        let max_serving = orders.iter().map(Vec::len).max().unwrap_or(0);
        if max_rank > max_serving {
            return Err(Error::domain(format!(
                "rank {max_rank} exceeds the largest serving set ({max_serving})"
            )));
        }
        (1..=max_rank)
            .map(|k| {
                let v: Vec<f64> = orders
                    .iter()
                    .filter_map(|o| o.get(k - 1).copied())
                    .collect();
                DistanceStats::from_values(k, &v)
                    .ok_or_else(|| Error::domain(format!("no UE has rank {k}")))
            })
            .collect()
    }
}

fn check_unique_ids(nodes: &[Node], path: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for (i, n) in nodes.iter().enumerate() {
        if !seen.insert(n.id.as_str()) {
            return Err(Error::invalid(
                format!("{path}[{i}].id"),
                format!("duplicate id `{}`", n.id),
            ));
        }
    }
    Ok(())
}

/// Outcome of one link in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    pub link: LinkId,
    pub distance_m: f64,
    pub condition: Condition,
    /// Omnidirectional path loss; `None` when no angle pair was detectable
    /// and the omni source is synthesis.
    pub omni_pl_db: Option<f64>,
    /// Smallest directional path loss over all angle pairs.
    pub min_directional_pl_db: f64,
    pub detected_pairs: u32,
    pub mask: RxMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRealization {
    pub trial: usize,
    /// In scenario link order.
    pub links: Vec<LinkRealization>,
}

impl TrialRealization {
    pub fn masks(&self) -> BTreeMap<LinkId, RxMask> {
        self.links
            .iter()
            .map(|l| (l.link.clone(), l.mask))
            .collect()
    }

    /// Detected omni path losses of each UE's serving stations, ascending.
    pub fn best_n(&self) -> BTreeMap<String, Vec<(String, f64)>> {
        let mut per_ue: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for l in &self.links {
            let entry = per_ue.entry(l.link.ue.clone()).or_default();
            if let Some(pl) = l.omni_pl_db {
                entry.push((l.link.bs.clone(), pl));
            }
        }
        per_ue
            .into_iter()
            .map(|(ue, v)| (ue, super::reception::best_n_path_loss(&v)))
            .collect()
    }
}

/// Simulates `trials` independent drops of the scenario.
pub fn simulate_drop(
    scenario: &Scenario,
    trials: usize,
    exec: Execution,
) -> Result<Vec<TrialRealization>> {
    scenario.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let geometry: Vec<(LinkId, Distance3D)> = scenario
        .links
        .iter()
        .map(|l| {
            let d = distance_3d(&scenario.ues[l.ue], &scenario.base_stations[l.bs])?;
            Ok((scenario.link_id(l), d))
        })
        .collect::<Result<_>>()?;
    exec.map_indexed(trials, |t| simulate_trial(scenario, &geometry, t))
        .into_iter()
        .collect()
}

fn simulate_trial(
    scenario: &Scenario,
    geometry: &[(LinkId, Distance3D)],
    trial: usize,
) -> Result<TrialRealization> {
    let mut rng = RngStream::new(scenario.seed, trial as u64);
    let threshold = receiver_threshold(&scenario.budget);
    let tx_angles = usize::from(scenario.sweep.tx_angles);
    let mut pls = vec![0.0f64; tx_angles * RX_DIRECTIONS];
    let mut detected: Vec<f64> = Vec::with_capacity(pls.len());

    let mut links = Vec::with_capacity(scenario.links.len());
    for (serving, (id, d)) in scenario.links.iter().zip(geometry) {
        let condition = match serving.condition {
            Some(c) => c,
            None if rng.random::<f64>() < scenario.p_los => Condition::Los,
            None => Condition::Nlos,
        };
        let arbitrary = scenario.models.directional(condition);
        // pair index = tx * 72 + rx_direction
        for pl in pls.iter_mut() {
            *pl = ci_sample_path_loss(arbitrary, *d, &mut rng)?;
        }
        if condition == Condition::Nlos {
            let best = ci_sample_path_loss(&scenario.models.directional_nlos_best, *d, &mut rng)?;
            let argmin = pls
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            pls[argmin] = best;
        }

        let mut mask = RxMask::empty();
        detected.clear();
        for (i, &pl) in pls.iter().enumerate() {
            if scenario.budget.received_power(pl) >= threshold {
                mask.set(i % RX_DIRECTIONS, true);
                detected.push(pl);
            }
        }
        let omni_pl_db = match scenario.omni_source {
            OmniSource::Synthesized => omni_from_directional(&detected),
            OmniSource::Model => Some(ci_sample_path_loss(
                scenario.models.omni(condition),
                *d,
                &mut rng,
            )?),
        };
        links.push(LinkRealization {
            link: id.clone(),
            distance_m: d.m(),
            condition,
            omni_pl_db,
            min_directional_pl_db: pls.iter().copied().fold(f64::INFINITY, f64::min),
            detected_pairs: detected.len() as u32,
            mask,
        });
    }
    Ok(TrialRealization { trial, links })
}

/// All-angle reception counts per serving-set size, pooled over trials.
pub fn reception_vs_serving_count(
    scenario: &Scenario,
    trials: usize,
    k_max: usize,
    exec: Execution,
) -> Result<Vec<ReceptionCount>> {
    let topology = scenario.topology();
    let max_k = max_serving_count(&topology);
    if k_max == 0 || k_max > max_k {
        return Err(Error::domain(format!(
            "k_max must lie in 1..={max_k} for this scenario, got {k_max}"
        )));
    }
    let realizations = simulate_drop(scenario, trials, exec)?;
    pool_reception(&realizations, &topology, k_max)
}

/// Pools all-angle reception counts over already simulated trials.
pub fn pool_reception(
    realizations: &[TrialRealization],
    topology: &Topology,
    k_max: usize,
) -> Result<Vec<ReceptionCount>> {
    let mut totals: Vec<ReceptionCount> = (1..=k_max)
        .map(|k| ReceptionCount {
            k,
            ..Default::default()
        })
        .collect();
    for r in realizations {
        let per_trial = super::reception::reception_table(&r.masks(), topology, k_max)?;
        for (t, c) in totals.iter_mut().zip(per_trial) {
            *t = t.merge(c);
        }
    }
    Ok(totals)
}

/// Empirical CDF: sorted values paired with `i / n`. The last probability is
/// exactly 1.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Omni path loss samples per series, pooled over trials and UEs:
/// `best_N` for the N-th lowest loss and `nn_N` for the N-th nearest serving
/// station. Undetected links are skipped.
pub fn path_loss_series(
    scenario: &Scenario,
    realizations: &[TrialRealization],
    max_rank: usize,
) -> BTreeMap<String, Vec<f64>> {
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    // link index for (ue, bs)
    let index: BTreeMap<(usize, usize), usize> = scenario
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| ((l.ue, l.bs), i))
        .collect();
    let nn: Vec<Vec<usize>> = (0..scenario.ues.len())
        .map(|u| scenario.nearest_neighbor_order(u))
        .collect();

    for r in realizations {
        for (_, ordered) in r.best_n() {
            for (n, (_, pl)) in ordered.iter().take(max_rank).enumerate() {
                series
                    .entry(format!("best_{}", n + 1))
                    .or_default()
                    .push(*pl);
            }
        }
        for (u, order) in nn.iter().enumerate() {
            for (rank, &bs) in order.iter().take(max_rank).enumerate() {
                if let Some(pl) = r.links[index[&(u, bs)]].omni_pl_db {
                    series
                        .entry(format!("nn_{}", rank + 1))
                        .or_default()
                        .push(pl);
                }
            }
        }
    }
    series
}

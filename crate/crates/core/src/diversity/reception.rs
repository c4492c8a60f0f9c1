//! Serving-set combinatorics and all-angle reception probabilities.
//!
//! A UE "receives over all angles" from a set of serving base stations when
//! every one of its 72 RX pointing directions is detectable from at least one
//! base station of the set (over any TX sector angle of that base station).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RX_AZIMUTHS: usize = 24;
pub const RX_ELEVATIONS: usize = 3;
pub const RX_DIRECTIONS: usize = RX_AZIMUTHS * RX_ELEVATIONS;

pub const TX_STEP_DEG: f64 = 8.0;
pub const RX_AZIMUTH_STEP_DEG: f64 = 15.0;

/// Beam sweep layout: a TX sector of `tx_angles` pointing angles 8 degrees
/// apart, and 24 RX azimuths (15 degree steps) on each of 3 elevation planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub tx_angles: u16,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { tx_angles: 15 }
    }
}

impl SweepGrid {
    /// Grid used on links whose scattering extended past the standard sector.
    pub fn extended() -> Self {
        Self { tx_angles: 17 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_angles == 0 {
            return Err(Error::invalid(
                "sweep.tx_angles",
                "need at least one TX angle",
            ));
        }
        Ok(())
    }

    /// Angular span between the first and last TX pointing angle.
    pub fn tx_span_deg(&self) -> f64 {
        f64::from(self.tx_angles.saturating_sub(1)) * TX_STEP_DEG
    }

    /// Sector width covered by the TX bins, one step per angle.
    pub fn tx_sector_deg(&self) -> f64 {
        f64::from(self.tx_angles) * TX_STEP_DEG
    }

    pub fn angle_pairs(&self) -> usize {
        usize::from(self.tx_angles) * RX_DIRECTIONS
    }
}

/// RX direction index, elevation-major then azimuth.
pub fn rx_direction_index(elevation: usize, azimuth: usize) -> usize {
    debug_assert!(elevation < RX_ELEVATIONS && azimuth < RX_AZIMUTHS);
    elevation * RX_AZIMUTHS + azimuth
}

/// Detectability of the 72 RX directions, one bit per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RxMask(u128);

impl RxMask {
    const FULL: u128 = (1u128 << RX_DIRECTIONS) - 1;

    pub fn empty() -> Self {
        Self(0)
    }

    pub fn full() -> Self {
        Self(Self::FULL)
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        if bits.len() != RX_DIRECTIONS {
            return Err(Error::domain(format!(
                "mask needs {RX_DIRECTIONS} entries, got {}",
                bits.len()
            )));
        }
        let mut m = Self::empty();
        for (i, &b) in bits.iter().enumerate() {
            m.set(i, b);
        }
        Ok(m)
    }

    pub fn get(&self, direction: usize) -> bool {
        self.0 >> direction & 1 == 1
    }

    pub fn set(&mut self, direction: usize, value: bool) {
        assert!(
            direction < RX_DIRECTIONS,
            "direction {direction} out of range"
        );
        if value {
            self.0 |= 1 << direction;
        } else {
            self.0 &= !(1 << direction);
        }
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn is_full(&self) -> bool {
        self.0 == Self::FULL
    }

    pub fn count(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_superset_of(&self, other: &Self) -> bool {
        self.0 & other.0 == other.0
    }
}

impl std::fmt::Display for RxMask {
    /// 72 characters of `0`/`1`, elevation-major then azimuth.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..RX_DIRECTIONS {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for RxMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::domain(format!(
                    "mask character `{other}` is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Self::from_bools(&bits)
    }
}

/// Directed TX-RX link, identified by UE and base station ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId {
    pub ue: String,
    pub bs: String,
}

impl LinkId {
    pub fn new(ue: impl Into<String>, bs: impl Into<String>) -> Self {
        Self {
            ue: ue.into(),
            bs: bs.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceptionRecord {
    pub link: LinkId,
    pub mask: RxMask,
}

impl ReceptionRecord {
    pub fn new(link: LinkId, mask: RxMask) -> Self {
        Self { link, mask }
    }

    pub fn full_reception(&self) -> bool {
        self.mask.is_full()
    }
}

/// Serving base stations per UE; both levels sorted by id.
pub type Topology = BTreeMap<String, BTreeSet<String>>;

/// Builds a topology from (ue, bs) pairs.
pub fn topology_from_links<'a>(links: impl IntoIterator<Item = &'a LinkId>) -> Topology {
    let mut t = Topology::new();
    for l in links {
        t.entry(l.ue.clone()).or_default().insert(l.bs.clone());
    }
    t
}

/// Serving-set sizes sorted by UE id.
pub fn max_serving_count(topology: &Topology) -> usize {
    topology.values().map(BTreeSet::len).max().unwrap_or(0)
}

/// Every k-subset of each UE's serving set, UEs in id order and subsets in
/// lexicographic order of the sorted base station ids.
pub fn enumerate_serving_combinations(topology: &Topology, k: usize) -> Vec<(String, Vec<String>)> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    for (ue, serving) in topology {
        let ids: Vec<&String> = serving.iter().collect();
        for_each_combination(ids.len(), k, |idx| {
            out.push((ue.clone(), idx.iter().map(|&i| ids[i].clone()).collect()));
        });
    }
    out
}

/// Number of k-combinations, `sum over UEs of C(|S|, k)`.
pub fn combination_count(topology: &Topology, k: usize) -> u64 {
    if k == 0 {
        return 0;
    }
    topology
        .values()
        .map(|s| binomial(s.len() as u64, k as u64))
        .sum()
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Calls `f` with every increasing index tuple of length `k` drawn from `0..n`,
/// in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // rightmost position that can still advance
        let Some(pos) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Combinations counted for one serving-set size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReceptionCount {
    pub k: usize,
    pub combinations: u64,
    pub received: u64,
}

impl ReceptionCount {
    /// `None` when no UE has `k` serving base stations.
    pub fn probability(&self) -> Option<f64> {
        (self.combinations > 0).then(|| self.received as f64 / self.combinations as f64)
    }

    pub fn merge(self, other: Self) -> Self {
        debug_assert_eq!(self.k, other.k);
        Self {
            k: self.k,
            combinations: self.combinations + other.combinations,
            received: self.received + other.received,
        }
    }
}

/// Fraction of k-combinations whose OR-ed masks cover all 72 RX directions.
pub fn all_angle_reception_probability(
    records: &BTreeMap<LinkId, RxMask>,
    topology: &Topology,
    k: usize,
) -> Result<ReceptionCount> {
    let mut count = ReceptionCount {
        k,
        ..Default::default()
    };
    if k == 0 {
        return Ok(count);
    }
    for (ue, serving) in topology {
        let masks = serving
            .iter()
            .map(|bs| {
                let link = LinkId::new(ue.clone(), bs.clone());
                records.get(&link).copied().ok_or(Error::MissingRecord {
                    ue: link.ue,
                    bs: link.bs,
                })
            })
            .collect::<Result<Vec<RxMask>>>()?;
        for_each_combination(masks.len(), k, |idx| {
            count.combinations += 1;
            let union = idx
                .iter()
                .fold(RxMask::empty(), |acc, &i| acc.union(masks[i]));
            if union.is_full() {
                count.received += 1;
            }
        });
    }
    Ok(count)
}

/// Reception counts for every serving-set size `1..=k_max`.
pub fn reception_table(
    records: &BTreeMap<LinkId, RxMask>,
    topology: &Topology,
    k_max: usize,
) -> Result<Vec<ReceptionCount>> {
    (1..=k_max)
        .map(|k| all_angle_reception_probability(records, topology, k))
        .collect()
}

/// Path losses of one UE's serving base stations in ascending order (ties by
/// base station id). Entry `N-1` is the Best-N path loss.
pub fn best_n_path_loss(losses: &[(String, f64)]) -> Vec<(String, f64)> {
    let mut v = losses.to_vec();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    v
}

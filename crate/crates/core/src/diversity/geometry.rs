use serde::{Deserialize, Serialize};

use crate::channel::Distance3D;
use crate::error::{Error, Result};

pub const DEFAULT_BS_HEIGHT_M: f64 = 4.0;
pub const DEFAULT_UE_HEIGHT_M: f64 = 1.4;

/// A base station or UE position. Heights are above ground level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub x_m: f64,
    pub y_m: f64,
    pub height_m: f64,
}

impl Node {
    pub fn new(id: impl Into<String>, x_m: f64, y_m: f64, height_m: f64) -> Result<Self> {
        let id = id.into();
        if !(x_m.is_finite() && y_m.is_finite()) {
            return Err(Error::domain(format!(
                "node `{id}` has non-finite coordinates"
            )));
        }
        if !(height_m.is_finite() && height_m > 0.0) {
            return Err(Error::domain(format!(
                "node `{id}` height must be positive, got {height_m}"
            )));
        }
        Ok(Self {
            id,
            x_m,
            y_m,
            height_m,
        })
    }

    pub fn base_station(id: impl Into<String>, x_m: f64, y_m: f64) -> Result<Self> {
        Self::new(id, x_m, y_m, DEFAULT_BS_HEIGHT_M)
    }

    pub fn ue(id: impl Into<String>, x_m: f64, y_m: f64) -> Result<Self> {
        Self::new(id, x_m, y_m, DEFAULT_UE_HEIGHT_M)
    }
}

/// Raw 3D Euclidean separation. Zero for coincident nodes.
pub fn separation_m(a: &Node, b: &Node) -> f64 {
    let (dx, dy, dh) = (a.x_m - b.x_m, a.y_m - b.y_m, a.height_m - b.height_m);
    (dx * dx + dy * dy + dh * dh).sqrt()
}

/// 3D TX-RX distance. Fails only for coincident nodes.
pub fn distance_3d(a: &Node, b: &Node) -> Result<Distance3D> {
    Distance3D::from_m(separation_m(a, b))
}

/// Indices into `candidates` sorted by ascending distance from `ue`, ties
/// broken by ascending id.
pub fn nearest_neighbor_order(ue: &Node, candidates: &[&Node]) -> Vec<usize> {
    let mut order: Vec<(f64, &str, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, bs)| (separation_m(ue, bs), bs.id.as_str(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    order.into_iter().map(|(_, _, i)| i).collect()
}

/// Summary statistics of a set of distances. `std_m` is the population
/// (divide-by-N) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub rank: usize,
    pub count: usize,
    pub mean_m: f64,
    pub median_m: f64,
    pub std_m: f64,
    pub min_m: f64,
    pub max_m: f64,
}

impl DistanceStats {
    pub fn from_values(rank: usize, values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        Some(Self {
            rank,
            count: n,
            mean_m: mean,
            median_m: median,
            std_m: var.sqrt(),
            min_m: v[0],
            max_m: v[n - 1],
        })
    }
}

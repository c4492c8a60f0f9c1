//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use mmwave_diversity::channel::presets;
use mmwave_diversity::channel::CiModel;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Every model with published parameters, in a fixed order.
pub fn published_models() -> Vec<(&'static str, CiModel)> {
    vec![
        ("directional LOS", presets::directional_los()),
        ("directional NLOS", presets::directional_nlos()),
        ("directional NLOS-best", presets::directional_nlos_best()),
        ("omni LOS", presets::omni_los()),
        ("omni NLOS", presets::omni_nlos()),
    ]
}

/// Gaussian upper tail `P(X > z)` for a standard normal `X`.
pub fn normal_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Path loss in dB at 1 m and 1 GHz using the rounded free-space constant.
pub fn fspl_1m_db(f_ghz: f64) -> f64 {
    32.4 + 20.0 * f_ghz.log10()
}

/// Outage at radius `r` given the largest tolerable path loss.
pub fn point_outage(f_ghz: f64, n: f64, sigma: f64, max_pl: f64, r: f64) -> f64 {
    let mean = fspl_1m_db(f_ghz) + 10.0 * n * r.log10();
    normal_tail((max_pl - mean) / sigma)
}

/// Area-averaged outage over a disk of radius `big_r` by composite Simpson
/// quadrature. The area inside 1 m is treated as covered.
pub fn region_outage_quadrature(
    f_ghz: f64,
    n: f64,
    sigma: f64,
    max_pl: f64,
    big_r: f64,
    panels: usize,
) -> f64 {
    let panels = panels.next_multiple_of(2);
    let (a, b) = (1.0, big_r);
    let h = (b - a) / panels as f64;
    let g = |r: f64| 2.0 * r * point_outage(f_ghz, n, sigma, max_pl, r);
    let mut s = g(a) + g(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(a + h * i as f64);
    }
    (s * h / 3.0) / (big_r * big_r)
}

/// All `k`-subsets of `items` by bitmask enumeration.
pub fn brute_force_subsets(items: &[String], k: usize) -> BTreeSet<Vec<String>> {
    let n = items.len();
    let mut out = BTreeSet::new();
    for bits in 0u32..(1 << n) {
        if bits.count_ones() as usize == k {
            let v: Vec<String> = (0..n)
                .filter(|i| bits & (1 << i) != 0)
                .map(|i| items[i].clone())
                .collect();
            out.insert(v);
        }
    }
    out
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

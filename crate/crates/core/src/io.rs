//! File formats: scenario JSON, path loss sample CSV, measured-mask CSV,
//! serving topology JSON, model cards and the result bundle.
//!
//! All emitted files are deterministic for identical inputs: fixed column
//! order, fixed decimal formatting and no wall-clock data unless the caller
//! puts a timestamp into the bundle metadata.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::channel::{CiModel, Condition, Frequency};
use crate::coverage::{LinkBudget, OutageRow};
use crate::diversity::geometry::{DistanceStats, Node, DEFAULT_BS_HEIGHT_M, DEFAULT_UE_HEIGHT_M};
use crate::diversity::reception::{LinkId, ReceptionCount, RxMask, SweepGrid, Topology};
use crate::diversity::simulate::{ModelSet, OmniSource, Scenario, ServingLink, DEFAULT_P_LOS};
use crate::error::{Error, Result};
use crate::fitting::{PathLossSample, Polarization};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

pub const SAMPLES_HEADER: [&str; 4] = ["d_m", "pl_db", "condition", "polarization"];
pub const MASKS_HEADER: [&str; 3] = ["rx_id", "tx_id", "mask"];
pub const OUTAGE_HEADER: &str = "condition,distance_m,p_out_edge_pct,p_out_region_pct";
pub const RECEPTION_HEADER: &str = "k,combinations,received,p_reception_pct";
pub const CDF_HEADER: &str = "series,value_db,cum_prob";
pub const NN_HEADER: &str = "rank,count,mean_m,median_m,std_m,min_m,max_m";
pub const COMBINATIONS_HEADER: &str = "k,combinations";

// ---------------------------------------------------------------------------
// scenario

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: u32,
    #[serde(default)]
    seed: Option<u64>,
    base_stations: Vec<NodeFile>,
    ues: Vec<NodeFile>,
    #[serde(default)]
    links: Option<Vec<LinkFile>>,
    #[serde(default)]
    p_los: Option<f64>,
    #[serde(default)]
    frequency_ghz: Option<f64>,
    #[serde(default)]
    models: ModelsFile,
    #[serde(default)]
    budget: BudgetFile,
    #[serde(default)]
    sweep: Option<SweepGrid>,
    #[serde(default)]
    omni_source: OmniSource,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: String,
    x_m: f64,
    y_m: f64,
    #[serde(default)]
    height_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkFile {
    ue: String,
    bs: String,
    #[serde(default)]
    condition: Option<Condition>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelsFile {
    #[serde(default)]
    directional: DirectionalModelsFile,
    #[serde(default)]
    omni: OmniModelsFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectionalModelsFile {
    los: Option<ModelParams>,
    nlos: Option<ModelParams>,
    nlos_best: Option<ModelParams>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OmniModelsFile {
    los: Option<ModelParams>,
    nlos: Option<ModelParams>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelParams {
    ple: f64,
    sigma_db: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetFile {
    pt_dbm: Option<f64>,
    gt_dbi: Option<f64>,
    gr_dbi: Option<f64>,
    bw_ghz: Option<f64>,
    max_pl_db: Option<f64>,
    snr_threshold_db: Option<f64>,
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::invalid(
            if path.is_empty() { ".".into() } else { path },
            e.into_inner().to_string(),
        )
    })
}

fn resolve_model(
    params: Option<ModelParams>,
    default: CiModel,
    frequency: Frequency,
    path: &str,
) -> Result<CiModel> {
    let Some(p) = params else {
        return CiModel::new(
            frequency,
            default.ple(),
            default.sigma_db(),
            default.condition(),
        );
    };
    if !(p.sigma_db.is_finite() && p.sigma_db >= 0.0) {
        return Err(Error::invalid(
            format!("{path}.sigma_db"),
            "sigma must be non-negative",
        ));
    }
    if !(p.ple.is_finite() && p.ple > 0.0) {
        return Err(Error::invalid(
            format!("{path}.ple"),
            "path loss exponent must be positive",
        ));
    }
    CiModel::new(frequency, p.ple, p.sigma_db, default.condition())
        .map_err(|e| Error::invalid(path, e.to_string()))
}

/// Parses a scenario from JSON text, applying defaults for omitted
/// sections: 73.5 GHz directional/omni models, the sounder link budget,
/// 4.0 m / 1.4 m antenna heights, a 15-angle TX sector and all-pairs links.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = from_json(text)?;
    if file.schema_version != SCENARIO_SCHEMA_VERSION {
        return Err(Error::invalid(
            "schema_version",
            format!(
                "unsupported version {}, expected {SCENARIO_SCHEMA_VERSION}",
                file.schema_version
            ),
        ));
    }

    let nodes = |list: &[NodeFile], key: &str, default_h: f64| -> Result<Vec<Node>> {
        list.iter()
            .enumerate()
            .map(|(i, n)| {
                Node::new(n.id.clone(), n.x_m, n.y_m, n.height_m.unwrap_or(default_h))
                    .map_err(|e| Error::invalid(format!("{key}[{i}]"), e.to_string()))
            })
            .collect()
    };
    let base_stations = nodes(&file.base_stations, "base_stations", DEFAULT_BS_HEIGHT_M)?;
    let ues = nodes(&file.ues, "ues", DEFAULT_UE_HEIGHT_M)?;

    let frequency = Frequency::from_ghz(
        file.frequency_ghz
            .unwrap_or(crate::channel::presets::CARRIER_GHZ),
    )
    .map_err(|e| Error::invalid("frequency_ghz", e.to_string()))?;
    let d = ModelSet::default();
    let dir = &file.models.directional;
    let omni = &file.models.omni;
    let models = ModelSet {
        directional_los: resolve_model(
            dir.los,
            d.directional_los,
            frequency,
            "models.directional.los",
        )?,
        directional_nlos: resolve_model(
            dir.nlos,
            d.directional_nlos,
            frequency,
            "models.directional.nlos",
        )?,
        directional_nlos_best: resolve_model(
            dir.nlos_best,
            d.directional_nlos_best,
            frequency,
            "models.directional.nlos_best",
        )?,
        omni_los: resolve_model(omni.los, d.omni_los, frequency, "models.omni.los")?,
        omni_nlos: resolve_model(omni.nlos, d.omni_nlos, frequency, "models.omni.nlos")?,
    };

    let dflt = LinkBudget::default();
    let b = &file.budget;
    let budget = LinkBudget {
        pt_dbm: b.pt_dbm.unwrap_or(dflt.pt_dbm),
        gt_dbi: b.gt_dbi.unwrap_or(dflt.gt_dbi),
        gr_dbi: b.gr_dbi.unwrap_or(dflt.gr_dbi),
        bw_ghz: b.bw_ghz.unwrap_or(dflt.bw_ghz),
        max_pl_db: b.max_pl_db.unwrap_or(dflt.max_pl_db),
        snr_threshold_db: b.snr_threshold_db.unwrap_or(dflt.snr_threshold_db),
    };

    let index = |nodes: &[Node], id: &str| nodes.iter().position(|n| n.id == id);
    let links = match &file.links {
        None => (0..ues.len())
            .flat_map(|u| {
                (0..base_stations.len()).map(move |b| ServingLink {
                    ue: u,
                    bs: b,
                    condition: None,
                })
            })
            .collect(),
        Some(list) => list
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let ue = index(&ues, &l.ue).ok_or_else(|| {
                    Error::invalid(format!("links[{i}].ue"), format!("unknown UE `{}`", l.ue))
                })?;
                let bs = index(&base_stations, &l.bs).ok_or_else(|| {
                    Error::invalid(
                        format!("links[{i}].bs"),
                        format!("unknown base station `{}`", l.bs),
                    )
                })?;
                if l.condition == Some(Condition::NlosBest) {
                    return Err(Error::invalid(
                        format!("links[{i}].condition"),
                        "a link condition must be LOS or NLOS",
                    ));
                }
                Ok(ServingLink {
                    ue,
                    bs,
                    condition: l.condition,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let scenario = Scenario {
        base_stations,
        ues,
        links,
        p_los: file.p_los.unwrap_or(DEFAULT_P_LOS),
        models,
        budget,
        sweep: file.sweep.unwrap_or_default(),
        omni_source: file.omni_source,
        seed: file.seed.unwrap_or(crate::DEFAULT_SEED),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Serving topology as a JSON object mapping UE id to serving base station ids.
pub fn parse_topology(text: &str) -> Result<Topology> {
    let raw: BTreeMap<String, Vec<String>> = from_json(text)?;
    let mut t = Topology::new();
    for (ue, list) in raw {
        let set: BTreeSet<String> = list.iter().cloned().collect();
        if set.len() != list.len() {
            return Err(Error::invalid(ue, "duplicate serving base station"));
        }
        t.insert(ue, set);
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// samples

#[derive(Debug, Clone, Default)]
pub struct LoadedSamples {
    pub samples: Vec<PathLossSample>,
    /// (line, reason) for rows skipped in lenient mode.
    pub skipped: Vec<(u64, String)>,
}

/// Reads path loss samples from CSV with header
/// `d_m,pl_db,condition,polarization`. In strict mode the first malformed
/// row aborts; otherwise it is reported and skipped.
pub fn load_samples<R: Read>(reader: R, strict: bool) -> Result<LoadedSamples> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid("header", format!("missing column `{name}`")))
    };
    let (cd, cpl, cc, cp) = (
        col("d_m")?,
        col("pl_db")?,
        col("condition")?,
        col("polarization")?,
    );

    let mut out = LoadedSamples::default();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let parsed = (|| -> Result<PathLossSample> {
            let field = |i: usize| {
                rec.get(i)
                    .ok_or_else(|| Error::domain(format!("missing field {}", i + 1)))
            };
            let d: f64 = field(cd)?
                .parse()
                .map_err(|_| Error::domain("d_m is not a number"))?;
            let pl: f64 = field(cpl)?
                .parse()
                .map_err(|_| Error::domain("pl_db is not a number"))?;
            let condition: Condition = field(cc)?.parse()?;
            let pol: Polarization = field(cp)?.parse()?;
            Ok(PathLossSample::new(d, pl, condition)?.with_polarization(pol))
        })();
        match parsed {
            Ok(s) => out.samples.push(s),
            Err(e) => {
                let message = match e {
                    Error::Domain(m) => m,
                    other => other.to_string(),
                };
                if strict {
                    return Err(Error::Row { line, message });
                }
                warn!("skipping sample row {line}: {message}");
                out.skipped.push((line, message));
            }
        }
    }
    if out.samples.is_empty() {
        warn!("sample file contains no samples");
    }
    Ok(out)
}

pub fn write_samples<W: Write>(writer: W, samples: &[PathLossSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SAMPLES_HEADER)?;
    for s in samples {
        w.write_record([
            format!("{:?}", s.d.m()),
            format!("{:?}", s.pl_db),
            s.condition.to_string(),
            s.polarization.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// masks

/// Reads measured detectability masks: `rx_id,tx_id,mask`, one row per link,
/// mask as 72 `0`/`1` characters ordered elevation-major then azimuth.
pub fn load_masks<R: Read>(reader: R) -> Result<BTreeMap<LinkId, RxMask>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != MASKS_HEADER {
        return Err(Error::invalid(
            "header",
            format!("expected `{}`", MASKS_HEADER.join(",")),
        ));
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row_err = |message: String| Error::Row { line, message };
        if rec.len() != 3 {
            return Err(row_err(format!("expected 3 fields, got {}", rec.len())));
        }
        let link = LinkId::new(&rec[0], &rec[1]);
        let mask: RxMask = rec[2].parse().map_err(|e: Error| row_err(e.to_string()))?;
        if out.insert(link.clone(), mask).is_some() {
            return Err(row_err(format!(
                "duplicate link {} <- {}",
                link.ue, link.bs
            )));
        }
    }
    Ok(out)
}

pub fn write_masks<W: Write>(writer: W, masks: &BTreeMap<LinkId, RxMask>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MASKS_HEADER)?;
    for (link, mask) in masks {
        w.write_record([link.ue.as_str(), link.bs.as_str(), &mask.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// model cards and result bundle

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCard {
    pub condition: Condition,
    pub frequency_ghz: f64,
    pub ple: f64,
    pub sigma_db: f64,
    pub d0_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl ModelCard {
    pub fn from_model(model: &CiModel, samples: Option<usize>) -> Self {
        Self {
            condition: model.condition(),
            frequency_ghz: model.frequency().ghz(),
            ple: model.ple(),
            sigma_db: model.sigma_db(),
            d0_m: model.d0_m(),
            samples,
        }
    }

    pub fn to_model(&self) -> Result<CiModel> {
        if self.d0_m != crate::channel::REFERENCE_DISTANCE_M {
            return Err(Error::invalid(
                "d0_m",
                "only a 1 m reference distance is supported",
            ));
        }
        CiModel::new(
            Frequency::from_ghz(self.frequency_ghz)?,
            self.ple,
            self.sigma_db,
            self.condition,
        )
    }
}

pub fn read_model_cards(text: &str) -> Result<Vec<ModelCard>> {
    from_json(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    /// Unix seconds; `None` keeps the bundle byte-reproducible.
    pub timestamp: Option<u64>,
}

pub fn read_metadata(text: &str) -> Result<RunMetadata> {
    from_json(text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfRow {
    pub series: String,
    pub value_db: f64,
    pub cum_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultBundle {
    pub outage: Vec<OutageRow>,
    pub reception: Vec<ReceptionCount>,
    pub combinations: Vec<(usize, u64)>,
    pub cdf: Vec<CdfRow>,
    pub nn_distances: Vec<DistanceStats>,
    pub models: Vec<ModelCard>,
    pub metadata: RunMetadata,
}

impl ResultBundle {
    /// Checks that every CDF series is non-decreasing and ends at 1.
    pub fn validate_cdfs(&self) -> Result<()> {
        let mut last: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for row in &self.cdf {
            if let Some(&(v, p)) = last.get(row.series.as_str()) {
                if row.value_db < v || row.cum_prob < p {
                    return Err(Error::invalid(
                        format!("cdf.{}", row.series),
                        "series is not non-decreasing",
                    ));
                }
            }
            last.insert(&row.series, (row.value_db, row.cum_prob));
        }
        for (series, (_, p)) in last {
            if (p - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(
                    format!("cdf.{series}"),
                    "series does not end at 1",
                ));
            }
        }
        Ok(())
    }
}

/// Formats a probability (0..=1) as a percentage: one decimal, or scientific
/// notation with a one-decimal mantissa below 0.1 % (e.g. `6.9E-5`).
pub fn format_percent(p: f64) -> String {
    let pct = p * 100.0;
    if pct == 0.0 {
        "0.0".to_string()
    } else if pct.abs() < 0.1 {
        format!("{pct:.1E}")
    } else {
        format!("{pct:.1}")
    }
}

fn write_file(dir: &Path, name: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body)?;
    written.push(path);
    Ok(())
}

/// Writes the non-empty sections of `bundle` into `out_dir` (created if
/// needed) and returns the written paths.
pub fn emit_results(bundle: &ResultBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    bundle.validate_cdfs()?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    if !bundle.outage.is_empty() {
        let mut s = format!("{OUTAGE_HEADER}\n");
        for r in &bundle.outage {
            s += &format!(
                "{},{},{},{}\n",
                r.condition,
                r.distance_m,
                format_percent(r.p_out_edge),
                format_percent(r.p_out_region)
            );
        }
        write_file(out_dir, "outage.csv", &s, &mut written)?;
    }
    if !bundle.reception.is_empty() {
        let mut s = format!("{RECEPTION_HEADER}\n");
        for r in &bundle.reception {
            let p = r
                .probability()
                .map(|p| format!("{:.1}", p * 100.0))
                .unwrap_or_default();
            s += &format!("{},{},{},{}\n", r.k, r.combinations, r.received, p);
        }
        write_file(out_dir, "reception.csv", &s, &mut written)?;
    }
    if !bundle.combinations.is_empty() {
        let mut s = format!("{COMBINATIONS_HEADER}\n");
        for (k, c) in &bundle.combinations {
            s += &format!("{k},{c}\n");
        }
        write_file(out_dir, "combinations.csv", &s, &mut written)?;
    }
    if !bundle.cdf.is_empty() {
        let mut s = format!("{CDF_HEADER}\n");
        for r in &bundle.cdf {
            s += &format!("{},{:.4},{:.6}\n", r.series, r.value_db, r.cum_prob);
        }
        write_file(out_dir, "cdf.csv", &s, &mut written)?;
    }
    if !bundle.nn_distances.is_empty() {
        let mut s = format!("{NN_HEADER}\n");
        for r in &bundle.nn_distances {
            s += &format!(
                "{},{},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
                r.rank, r.count, r.mean_m, r.median_m, r.std_m, r.min_m, r.max_m
            );
        }
        write_file(out_dir, "nn_distance.csv", &s, &mut written)?;
    }
    if !bundle.models.is_empty() {
        let s = serde_json::to_string_pretty(&bundle.models)? + "\n";
        write_file(out_dir, "models.json", &s, &mut written)?;
    }
    let s = serde_json::to_string_pretty(&bundle.metadata)? + "\n";
    write_file(out_dir, "metadata.json", &s, &mut written)?;
    Ok(written)
}

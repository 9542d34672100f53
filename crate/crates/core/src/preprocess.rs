//! Relational preprocessing: join vehicles with sub-operations, aggregate
//! ergonomics and plan time, bin into intervals, one-hot encode, and filter
//! property attributes by phi correlation against the interval columns.
//!
//! Output column order: property columns (sorted by identifier, labelled
//! `FaE_<id>`), `Er_1..Er_k`, `Pz_1..Pz_k`, `Fe`.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};

/// One assembled vehicle: its nominal properties and whether the observed
/// fault occurred.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VehicleRecord {
    pub id: String,
    pub properties: BTreeSet<String>,
    pub fault: bool,
}

impl VehicleRecord {
    pub fn new(id: String, properties: BTreeSet<String>, fault: bool) -> Result<Self> {
        if properties.is_empty() {
            return Err(Error::Parameter(format!(
                "vehicle {id} has an empty property set"
            )));
        }
        Ok(Self {
            id,
            properties,
            fault,
        })
    }
}

/// One sub-operation of the production cycle with its ergonomics rating and
/// planned time. The property set may be empty (an unconditioned sub-op
/// applies to every vehicle).
#[derive(Debug, Clone, PartialEq)]
pub struct SubOpRecord {
    pub id: String,
    pub properties: BTreeSet<String>,
    pub ergonomics: f64,
    pub plan_time: f64,
}

impl SubOpRecord {
    pub fn new(id: String, properties: BTreeSet<String>, ergonomics: f64, plan_time: f64) -> Result<Self> {
        if !(ergonomics > 0.0) {
            return Err(Error::Parameter(format!(
                "sub-op {id}: ergonomics must be positive, got {ergonomics}"
            )));
        }
        if !(plan_time > 0.0) {
            return Err(Error::Parameter(format!(
                "sub-op {id}: plan time must be positive, got {plan_time}"
            )));
        }
        Ok(Self {
            id,
            properties,
            ergonomics,
            plan_time,
        })
    }
}

/// Sub-ops that apply to the vehicle: those whose property set is a subset
/// of the vehicle's properties.
pub fn match_subops<'a>(v: &VehicleRecord, subops: &'a [SubOpRecord]) -> Vec<&'a SubOpRecord> {
    subops
        .iter()
        .filter(|s| s.properties.is_subset(&v.properties))
        .collect()
}

/// Arithmetic mean of the matched ergonomics ratings.
pub fn aggregate_ergonomics(matched: &[&SubOpRecord]) -> Result<f64> {
    if matched.is_empty() {
        return Err(Error::EmptyAggregation("no matched sub-ops for ergonomics".into()));
    }
    Ok(matched.iter().map(|s| s.ergonomics).sum::<f64>() / matched.len() as f64)
}

/// Sum of the matched planned times.
pub fn aggregate_plan_time(matched: &[&SubOpRecord]) -> Result<f64> {
    if matched.is_empty() {
        return Err(Error::EmptyAggregation("no matched sub-ops for plan time".into()));
    }
    Ok(matched.iter().map(|s| s.plan_time).sum())
}

/// Equal-width interval assignment over the observed range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinAssignments {
    pub k: usize,
    /// Bin index per input value, in [0, k).
    pub bins: Vec<usize>,
    /// Half-open [low, high) interval per bin; the last interval is closed.
    pub boundaries: Vec<(f64, f64)>,
    /// True when min == max and everything landed in bin 0.
    pub degenerate: bool,
}

impl BinAssignments {
    /// k boolean columns with exactly one true per input value.
    pub fn one_hot(&self) -> Vec<Vec<bool>> {
        let mut cols = vec![vec![false; self.bins.len()]; self.k];
        for (row, &b) in self.bins.iter().enumerate() {
            cols[b][row] = true;
        }
        cols
    }
}

/// Split [min, max] into k equal-width intervals and assign each value to
/// exactly one; the maximum falls into the last bin.
pub fn bin_equal_width(values: &[f64], k: usize) -> Result<BinAssignments> {
    if values.is_empty() {
        return Err(Error::Parameter("cannot bin an empty value list".into()));
    }
    if k == 0 {
        return Err(Error::Parameter("bin count must be >= 1".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("values to bin must be finite".into()));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        log::warn!("degenerate range [{min}, {max}]: all values assigned to bin 0");
        return Ok(BinAssignments {
            k,
            bins: vec![0; values.len()],
            boundaries: (0..k).map(|_| (min, max)).collect(),
            degenerate: true,
        });
    }
    let width = (max - min) / k as f64;
    let bins = values
        .iter()
        .map(|&v| (((v - min) / width) as usize).min(k - 1))
        .collect();
    let boundaries = (0..k)
        .map(|b| (min + b as f64 * width, min + (b + 1) as f64 * width))
        .collect();
    Ok(BinAssignments {
        k,
        bins,
        boundaries,
        degenerate: false,
    })
}

/// Phi correlation of two binary columns from their 2×2 contingency table,
/// with the marginal-product denominator sqrt(n1. * n0. * n.1 * n.0).
pub fn phi_coefficient(x: &[bool], y: &[bool]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Mismatch(format!(
            "column lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Parameter("phi of empty columns".into()));
    }
    let mut n = [[0u64; 2]; 2];
    for (&a, &b) in x.iter().zip(y) {
        n[a as usize][b as usize] += 1;
    }
    let (n00, n01, n10, n11) = (n[0][0] as f64, n[0][1] as f64, n[1][0] as f64, n[1][1] as f64);
    let row0 = n00 + n01;
    let row1 = n10 + n11;
    let col0 = n00 + n10;
    let col1 = n01 + n11;
    if row0 == 0.0 || row1 == 0.0 {
        return Err(Error::UndefinedCorrelation("x is constant".into()));
    }
    if col0 == 0.0 || col1 == 0.0 {
        return Err(Error::UndefinedCorrelation("y is constant".into()));
    }
    Ok((n11 * n00 - n10 * n01) / ((row1 * row0).sqrt() * (col1 * col0).sqrt()))
}

/// Outcome of phi filtering, serialized into the preprocessing report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterReport {
    /// max |phi| over the target columns, per feature, in input order.
    pub per_feature_max_phi: Vec<(String, f64)>,
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
    /// Features treated as phi = 0 because they are constant.
    pub constant_features: Vec<String>,
    pub cutoff: f64,
}

/// Keep a feature column iff its max |phi| against any target column
/// reaches the cutoff. Non-feature columns (targets, fault) are always kept.
/// Constant features correlate with nothing and are treated as phi = 0.
pub fn filter_attributes(
    data: &BinaryDataset,
    feature_labels: &[String],
    target_labels: &[String],
    cutoff: f64,
) -> Result<(BinaryDataset, FilterReport)> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::Parameter(format!("cutoff {cutoff} outside (0, 1)")));
    }
    if target_labels.is_empty() {
        return Err(Error::Parameter("no target columns given".into()));
    }
    let target_idx: Vec<usize> = target_labels
        .iter()
        .map(|l| {
            data.label_index(l)
                .ok_or_else(|| Error::Parameter(format!("target column '{l}' not in dataset")))
        })
        .collect::<Result<Vec<_>>>()?;
    let feature_set: BTreeSet<&String> = feature_labels.iter().collect();

    let mut per_feature_max_phi = Vec::new();
    let mut kept_features: BTreeSet<String> = BTreeSet::new();
    let mut dropped = Vec::new();
    let mut constant_features = Vec::new();
    for label in feature_labels {
        let f = data
            .label_index(label)
            .ok_or_else(|| Error::Parameter(format!("feature column '{label}' not in dataset")))?;
        let mut max_phi = 0.0f64;
        let mut constant = false;
        for &t in &target_idx {
            match phi_coefficient(data.column(f), data.column(t)) {
                Ok(phi) => max_phi = max_phi.max(phi.abs()),
                Err(Error::UndefinedCorrelation(_)) => constant = true,
                Err(e) => return Err(e),
            }
        }
        if constant {
            log::warn!("feature '{label}' has an undefined phi (constant column); treated as 0");
            constant_features.push(label.clone());
        }
        per_feature_max_phi.push((label.clone(), max_phi));
        if max_phi >= cutoff {
            kept_features.insert(label.clone());
        } else {
            dropped.push(label.clone());
        }
    }

    let keep: Vec<usize> = (0..data.n())
        .filter(|&c| {
            let label = &data.labels()[c];
            !feature_set.contains(label) || kept_features.contains(label)
        })
        .collect();
    let filtered = data.select_columns(&keep)?;
    let report = FilterReport {
        per_feature_max_phi,
        kept: kept_features.into_iter().collect(),
        dropped,
        constant_features,
        cutoff,
    };
    Ok((filtered, report))
}

/// Summary of the join/aggregate/bin stage, serialized into the
/// preprocessing report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableReport {
    pub rows: usize,
    pub excluded_vehicles: usize,
    pub property_columns: usize,
    pub er_boundaries: Vec<(f64, f64)>,
    pub pz_boundaries: Vec<(f64, f64)>,
    pub er_degenerate: bool,
    pub pz_degenerate: bool,
}

/// Build the binary sample table: per vehicle, match sub-ops, aggregate
/// ergonomics (mean) and plan time (sum), one-hot the two aggregates into
/// k equal-width bins each, and binary-encode property presence. Vehicles
/// with no matched sub-ops are excluded.
pub fn build_binary_table(
    vehicles: &[VehicleRecord],
    subops: &[SubOpRecord],
    k_bins: usize,
) -> Result<(BinaryDataset, TableReport)> {
    if vehicles.is_empty() || subops.is_empty() {
        return Err(Error::Parameter("vehicles and sub-ops must be non-empty".into()));
    }
    let mut included: Vec<&VehicleRecord> = Vec::new();
    let mut er_values = Vec::new();
    let mut pz_values = Vec::new();
    let mut excluded = 0usize;
    for v in vehicles {
        let matched = match_subops(v, subops);
        if matched.is_empty() {
            excluded += 1;
            continue;
        }
        er_values.push(aggregate_ergonomics(&matched)?);
        pz_values.push(aggregate_plan_time(&matched)?);
        included.push(v);
    }
    if excluded > 0 {
        log::warn!("excluded {excluded} vehicle(s) with no matched sub-ops");
    }
    if included.is_empty() {
        return Err(Error::EmptyAggregation(
            "every vehicle was excluded: no matched sub-ops".into(),
        ));
    }

    let properties: Vec<String> = included
        .iter()
        .flat_map(|v| v.properties.iter().cloned())
        .collect::<BTreeSet<String>>()
        .into_iter()
        .collect();

    let er_bins = bin_equal_width(&er_values, k_bins)?;
    let pz_bins = bin_equal_width(&pz_values, k_bins)?;

    let mut labels = Vec::new();
    let mut columns = Vec::new();
    for p in &properties {
        labels.push(format!("FaE_{p}"));
        columns.push(included.iter().map(|v| v.properties.contains(p)).collect());
    }
    for (b, col) in er_bins.one_hot().into_iter().enumerate() {
        labels.push(format!("Er_{}", b + 1));
        columns.push(col);
    }
    for (b, col) in pz_bins.one_hot().into_iter().enumerate() {
        labels.push(format!("Pz_{}", b + 1));
        columns.push(col);
    }
    labels.push("Fe".to_string());
    columns.push(included.iter().map(|v| v.fault).collect());

    let report = TableReport {
        rows: included.len(),
        excluded_vehicles: excluded,
        property_columns: properties.len(),
        er_boundaries: er_bins.boundaries.clone(),
        pz_boundaries: pz_bins.boundaries.clone(),
        er_degenerate: er_bins.degenerate,
        pz_degenerate: pz_bins.degenerate,
    };
    Ok((BinaryDataset::from_columns(labels, columns)?, report))
}

/// Interval column labels produced by [`build_binary_table`] for k bins.
pub fn interval_labels(k: usize) -> Vec<String> {
    (1..=k)
        .map(|b| format!("Er_{b}"))
        .chain((1..=k).map(|b| format!("Pz_{b}")))
        .collect()
}

fn parse_properties(field: &str) -> BTreeSet<String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Vehicles CSV: `vehicle_id, properties (semicolon-separated ids), fault (0/1)`.
pub fn read_vehicles_csv<R: Read>(r: R) -> Result<Vec<VehicleRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Parse(format!(
                "vehicles CSV needs 3 columns (vehicle_id, properties, fault), got {}",
                rec.len()
            )));
        }
        let fault = match &rec[2] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Parse(format!("fault must be 0/1, got '{other}'"))),
        };
        out.push(VehicleRecord::new(
            rec[0].to_string(),
            parse_properties(&rec[1]),
            fault,
        )?);
    }
    Ok(out)
}

pub fn read_vehicles_csv_path<P: AsRef<Path>>(path: P) -> Result<Vec<VehicleRecord>> {
    read_vehicles_csv(std::fs::File::open(path)?)
}

/// Sub-ops CSV: `subop_id, properties (semicolon-separated ids), ergonomics, plan_time`.
pub fn read_subops_csv<R: Read>(r: R) -> Result<Vec<SubOpRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Parse(format!(
                "sub-ops CSV needs 4 columns (subop_id, properties, ergonomics, plan_time), got {}",
                rec.len()
            )));
        }
        let ergonomics: f64 = rec[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad ergonomics value '{}'", &rec[2])))?;
        let plan_time: f64 = rec[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad plan time value '{}'", &rec[3])))?;
        out.push(SubOpRecord::new(
            rec[0].to_string(),
            parse_properties(&rec[1]),
            ergonomics,
            plan_time,
        )?);
    }
    Ok(out)
}

pub fn read_subops_csv_path<P: AsRef<Path>>(path: P) -> Result<Vec<SubOpRecord>> {
    read_subops_csv(std::fs::File::open(path)?)
}

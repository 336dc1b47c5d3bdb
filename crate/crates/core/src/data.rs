//! Samples, datasets and labeling budgets.
//!
//! On disk a dataset is a TOML manifest next to a CSV feature table:
//!
//! ```toml
//! name = "blobs"
//! num_classes = 3
//! dim = 2
//! features_file = "features.csv"   # relative to the manifest
//! assets_dir = "assets"            # optional
//! class_names = ["a", "b", "c"]    # optional
//! ```
//!
//! The feature table has a header row `id,f1,..,fd,label` with an optional
//! trailing `display_ref` column. Unknown or missing fields are errors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub usize);

impl ClassId {
    pub fn index(self) -> usize {
        self.0
    }

    pub fn checked(value: usize, num_classes: usize) -> Result<Self> {
        if value < num_classes {
            Ok(ClassId(value))
        } else {
            Err(Error::LabelOutOfRange {
                label: value,
                num_classes,
            })
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub features: Vec<f64>,
    /// Ground truth. Only oracles and evaluation code may read this.
    pub true_label: ClassId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    num_classes: usize,
    dim: usize,
    samples: Vec<Sample>,
    class_names: Vec<String>,
    index: HashMap<u64, usize>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, num_classes: usize, dim: usize, samples: Vec<Sample>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be at least 1".into()));
        }
        let mut index = HashMap::with_capacity(samples.len());
        for (pos, sample) in samples.iter().enumerate() {
            if sample.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: sample.features.len(),
                });
            }
            if sample.true_label.0 >= num_classes {
                return Err(Error::LabelOutOfRange {
                    label: sample.true_label.0,
                    num_classes,
                });
            }
            if sample.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "sample {} has non-finite features",
                    sample.id
                )));
            }
            if index.insert(sample.id, pos).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate sample id {}", sample.id)));
            }
        }
        let class_names = (0..num_classes).map(|k| format!("class {k}")).collect();
        Ok(Dataset {
            name: name.into(),
            num_classes,
            dim,
            samples,
            class_names,
            index,
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes {
            return Err(Error::InvalidParameter(format!(
                "expected {} class names, got {}",
                self.num_classes,
                names.len()
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Sample> {
        self.index.get(&id).map(|&pos| &self.samples[pos])
    }

    pub fn contains(&self, id: u64) -> bool {
        self.index.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.samples.iter().map(|s| s.id)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.true_label.0] += 1;
        }
        counts
    }

    /// Subset in original order, keeping metadata.
    fn subset(&self, name: String, keep: &HashSet<u64>) -> Dataset {
        let samples: Vec<Sample> = self.samples.iter().filter(|s| keep.contains(&s.id)).cloned().collect();
        let index = samples.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
        Dataset {
            name,
            num_classes: self.num_classes,
            dim: self.dim,
            samples,
            class_names: self.class_names.clone(),
            index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    OracleSim,
    Human,
    RandomWarmup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub sample_id: u64,
    pub label: ClassId,
    pub source: LabelSource,
    pub round: usize,
}

impl LabelRecord {
    pub fn counts_against_budget(&self) -> bool {
        self.source != LabelSource::RandomWarmup
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub total_budget: usize,
    pub rounds: usize,
    pub per_round: Vec<usize>,
}

impl RoundPlan {
    /// Labels purchased after the first `completed` rounds.
    pub fn cumulative(&self, completed: usize) -> usize {
        self.per_round.iter().take(completed).sum()
    }
}

/// Splits `n` queries over `r` rounds: `⌊n/r⌋` each, remainder in the last round.
pub fn plan_rounds(n: usize, r: usize) -> Result<RoundPlan> {
    if r == 0 {
        return Err(Error::InvalidBudget("round count must be at least 1".into()));
    }
    if n < r {
        return Err(Error::InvalidBudget(format!(
            "budget {n} is smaller than round count {r}"
        )));
    }
    let base = n / r;
    let mut per_round = vec![base; r];
    per_round[r - 1] += n % r;
    Ok(RoundPlan {
        total_budget: n,
        rounds: r,
        per_round,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub num_classes: usize,
    pub dim: usize,
    pub features_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assets_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Loaded dataset plus where its assets live, if anywhere.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub assets_dir: Option<PathBuf>,
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    load_dataset_with_assets(manifest_path).map(|l| l.dataset)
}

pub fn load_dataset_with_assets(manifest_path: &Path) -> Result<LoadedDataset> {
    let manifest = Manifest::read(manifest_path)?;
    if manifest.num_classes < 2 {
        return Err(Error::Manifest {
            path: manifest_path.to_path_buf(),
            message: format!("num_classes must be at least 2, got {}", manifest.num_classes),
        });
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let table_path = base.join(&manifest.features_file);
    let text = fs::read_to_string(&table_path).map_err(|e| Error::io(&table_path, e))?;
    let samples = parse_feature_table(&text, manifest.dim, manifest.num_classes)?;
    let mut dataset = Dataset::new(manifest.name, manifest.num_classes, manifest.dim, samples)?;
    if let Some(names) = manifest.class_names {
        dataset = dataset.with_class_names(names)?;
    }
    Ok(LoadedDataset {
        dataset,
        assets_dir: manifest.assets_dir.map(|d| base.join(d)),
    })
}

fn expected_header(dim: usize) -> Vec<String> {
    std::iter::once("id".to_string())
        .chain((1..=dim).map(|j| format!("f{j}")))
        .chain(std::iter::once("label".to_string()))
        .collect()
}

pub fn parse_feature_table(text: &str, dim: usize, num_classes: usize) -> Result<Vec<Sample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let expected = expected_header(dim);
    let has_ref = header.len() == expected.len() + 1 && header.last().map(String::as_str) == Some("display_ref");
    let head_ok = header.len() >= expected.len() && header[..expected.len()] == expected[..];
    if !head_ok || !(header.len() == expected.len() || has_ref) {
        return Err(Error::FeatureTable {
            line: 1,
            message: format!(
                "header must be `{}` with optional trailing `display_ref`, got `{}`",
                expected.join(","),
                header.join(",")
            ),
        });
    }
    let width = header.len();
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let bad = |message: String| Error::FeatureTable { line, message };
        if record.len() != width {
            let actual = record.len().saturating_sub(if has_ref { 3 } else { 2 });
            return Err(Error::DimensionMismatch { expected: dim, actual });
        }
        let id: u64 = record[0].parse().map_err(|_| bad(format!("bad id `{}`", &record[0])))?;
        let features = (1..=dim)
            .map(|j| {
                record[j]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad feature `{}`", &record[j])))
            })
            .collect::<Result<Vec<_>>>()?;
        let label: usize = record[dim + 1]
            .parse()
            .map_err(|_| bad(format!("bad label `{}`", &record[dim + 1])))?;
        let true_label = ClassId::checked(label, num_classes)?;
        let display_ref = if has_ref && !record[dim + 2].is_empty() {
            Some(record[dim + 2].to_string())
        } else {
            None
        };
        samples.push(Sample {
            id,
            features,
            true_label,
            display_ref,
        });
    }
    Ok(samples)
}

/// Writes `manifest.toml` and `features.csv` into `dir`, returning the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let table_path = dir.join("features.csv");
    let has_ref = dataset.samples.iter().any(|s| s.display_ref.is_some());
    let mut writer = csv::Writer::from_path(&table_path)?;
    let mut header = expected_header(dataset.dim);
    if has_ref {
        header.push("display_ref".into());
    }
    writer.write_record(&header)?;
    for s in &dataset.samples {
        let mut row = Vec::with_capacity(header.len());
        row.push(s.id.to_string());
        row.extend(s.features.iter().map(|v| v.to_string()));
        row.push(s.true_label.0.to_string());
        if has_ref {
            row.push(s.display_ref.clone().unwrap_or_default());
        }
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::io(&table_path, e))?;

    let manifest = Manifest {
        name: dataset.name.clone(),
        num_classes: dataset.num_classes,
        dim: dataset.dim,
        features_file: PathBuf::from("features.csv"),
        assets_dir: None,
        class_names: Some(dataset.class_names.clone()),
    };
    let manifest_path = dir.join("manifest.toml");
    let text = toml::to_string(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub k: usize,
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<Dataset> {
        gen_synthetic(self.k, self.dim, self.per_class, self.separation, self.seed)
    }
}

/// Class centers such that neighbouring centers are `separation` apart:
/// evenly spaced on a line for `d = 1`, on a circle in the first two
/// coordinates otherwise.
pub fn class_centers(k: usize, d: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            let mut center = vec![0.0; d];
            if d == 1 {
                center[0] = separation * (c as f64 - (k as f64 - 1.0) / 2.0);
            } else {
                let radius = separation / (2.0 * (std::f64::consts::PI / k as f64).sin());
                let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
                center[0] = radius * angle.cos();
                center[1] = radius * angle.sin();
            }
            center
        })
        .collect()
}

/// Isotropic unit-variance Gaussian mixture with `per_class` samples per class.
pub fn gen_synthetic(k: usize, d: usize, per_class: usize, separation: f64, seed_value: u64) -> Result<Dataset> {
    if k < 2 || d < 1 || per_class < 1 || !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "synthetic mixture needs k >= 2, d >= 1, per_class >= 1, separation > 0 \
             (got k={k}, d={d}, per_class={per_class}, separation={separation})"
        )));
    }
    let centers = class_centers(k, d, separation);
    let mut rng = seed::rng(seed_value);
    let mut samples = Vec::with_capacity(k * per_class);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let features = center
                .iter()
                .map(|&mu| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mu + z
                })
                .collect();
            samples.push(Sample {
                id: samples.len() as u64,
                features,
                true_label: ClassId(class),
                display_ref: None,
            });
        }
    }
    Dataset::new(
        format!("mixture-k{k}-d{d}-n{per_class}-s{separation}-seed{seed_value}"),
        k,
        d,
        samples,
    )
}

/// Stratified split into `(pool, holdout)` with `round(fraction * N)` holdout samples.
///
/// Per-class holdout counts use largest-remainder allocation, so classes keep
/// their proportions wherever the counts allow it.
pub fn split_holdout(dataset: &Dataset, fraction: f64, seed_value: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "holdout fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = dataset.len();
    let total = (fraction * n as f64).round() as usize;
    if total == 0 || total >= n {
        return Err(Error::InvalidParameter(format!(
            "holdout fraction {fraction} of {n} samples leaves an empty part"
        )));
    }

    let mut by_class: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for s in dataset.samples() {
        by_class.entry(s.true_label.0).or_default().push(s.id);
    }
    let mut quotas: Vec<(usize, usize, f64)> = by_class
        .iter()
        .map(|(&class, ids)| {
            let exact = fraction * ids.len() as f64;
            (class, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        quotas[i].1 += 1;
    }

    let mut rng = seed::rng(seed_value);
    let mut holdout_ids = HashSet::with_capacity(total);
    for (class, quota, _) in quotas {
        let mut ids = by_class[&class].clone();
        ids.shuffle(&mut rng);
        holdout_ids.extend(ids.into_iter().take(quota));
    }
    let pool_ids: HashSet<u64> = dataset.ids().filter(|id| !holdout_ids.contains(id)).collect();
    Ok((
        dataset.subset(format!("{}/pool", dataset.name), &pool_ids),
        dataset.subset(format!("{}/holdout", dataset.name), &holdout_ids),
    ))
}

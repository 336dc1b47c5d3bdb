use std::io::Write;

use activelabel::data::LabelSource;
use activelabel::session::Session;
use serde::{Deserialize, Serialize};

/// One row of the constructed training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub sample_id: u64,
    pub features: Vec<f64>,
    pub label: usize,
    pub round: usize,
    pub source: LabelSource,
}

/// Budget-counted labels applied so far, in the order they were applied.
pub fn export_rows(session: &Session) -> Vec<ExportRow> {
    let pool = session.pool();
    session
        .state()
        .labels
        .iter()
        .filter(|r| r.counts_against_budget())
        .map(|r| ExportRow {
            sample_id: r.sample_id,
            features: pool
                .get(r.sample_id)
                .expect("labeled ids are pool ids")
                .features
                .clone(),
            label: r.label.index(),
            round: r.round,
            source: r.source,
        })
        .collect()
}

/// `id,f1..fd,label,round,source`
pub fn write_csv<W: Write>(out: W, dim: usize, rows: &[ExportRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend((1..=dim).map(|j| format!("f{j}")));
    header.extend(["label", "round", "source"].map(String::from));
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.sample_id.to_string()];
        record.extend(row.features.iter().map(|v| v.to_string()));
        record.push(row.label.to_string());
        record.push(row.round.to_string());
        record.push(source_name(row.source).to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn source_name(source: LabelSource) -> &'static str {
    match source {
        LabelSource::OracleSim => "oracle_sim",
        LabelSource::Human => "human",
        LabelSource::RandomWarmup => "random_warmup",
    }
}

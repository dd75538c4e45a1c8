use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::store::{TripleStore, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationAp {
    pub id: u32,
    pub name: String,
    pub ap: f64,
    pub positives: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub subject: u32,
    pub object: u32,
    pub score: f64,
    pub relevant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingDump {
    pub relation: u32,
    pub ranked: Vec<RankedPair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub data_hash: String,
    /// Number of query relations requested.
    pub k: usize,
    pub map: f64,
    pub auc_pr: f64,
    pub relations: Vec<RelationAp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking_dump: Option<Vec<RankingDump>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::InvalidConfig(format!("unknown report format `{s}`"))),
        }
    }
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the vocabulary and the given stores, in order.
pub fn data_hash(vocab: &Vocabulary, stores: &[&TripleStore]) -> String {
    let mut h = Sha256::new();
    h.update(vocab.to_text().as_bytes());
    for store in stores {
        h.update(b"--\n");
        for t in store.iter() {
            h.update(format!("{}\t{}\t{}\n", t.subject.0, t.relation.0, t.object.0).as_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
        w.write_record(["id", "name", "ap", "positives"]).map_err(csv_err)?;
        for r in &self.relations {
            w.write_record([r.id.to_string(), r.name.clone(), r.ap.to_string(), r.positives.to_string()])
                .map_err(csv_err)?;
        }
        for (key, value) in [
            ("map", self.map.to_string()),
            ("auc_pr", self.auc_pr.to_string()),
            ("k", self.k.to_string()),
            ("config_hash", self.config_hash.clone()),
            ("data_hash", self.data_hash.clone()),
        ] {
            w.write_record(["summary", key, &value, ""]).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut report = EvalReport {
            config_hash: String::new(),
            data_hash: String::new(),
            k: 0,
            map: 0.0,
            auc_pr: 0.0,
            relations: Vec::new(),
            ranking_dump: None,
        };
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        for (n, rec) in rdr.records().enumerate() {
            let line = n + 2;
            let bad = |reason: String| Error::MalformedLine { line, reason };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| rec.get(i).ok_or_else(|| bad(format!("missing column {i}")));
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
            if field(0)? == "summary" {
                let value = field(2)?;
                match field(1)? {
                    "map" => report.map = num(value)?,
                    "auc_pr" => report.auc_pr = num(value)?,
                    "k" => report.k = value.parse().map_err(|_| bad(format!("bad k `{value}`")))?,
                    "config_hash" => report.config_hash = value.to_owned(),
                    "data_hash" => report.data_hash = value.to_owned(),
                    other => return Err(bad(format!("unknown summary key `{other}`"))),
                }
            } else {
                report.relations.push(RelationAp {
                    id: field(0)?.parse().map_err(|_| bad("bad id".into()))?,
                    name: field(1)?.to_owned(),
                    ap: num(field(2)?)?,
                    positives: field(3)?.parse().map_err(|_| bad("bad positives".into()))?,
                });
            }
        }
        Ok(report)
    }
}

pub fn emit_report(report: &EvalReport, path: &Path, format: ReportFormat) -> Result<()> {
    if report.relations.is_empty() {
        return Err(Error::EmptyReport);
    }
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Csv => report.to_csv()?,
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path, format: ReportFormat) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        ReportFormat::Json => Ok(serde_json::from_str(&text)?),
        ReportFormat::Csv => EvalReport::from_csv(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EvalReport {
        EvalReport {
            config_hash: "abc".into(),
            data_hash: "def".into(),
            k: 10,
            map: 0.1 + 0.2,
            auc_pr: 1.0 / 3.0,
            relations: vec![
                RelationAp { id: 0, name: "@film.directed_by".into(), ap: 0.3, positives: 4 },
                RelationAp { id: 3, name: "has, comma \"q\"".into(), ap: 2.0 / 7.0, positives: 1 },
            ],
            ranking_dump: None,
        }
    }

    #[test]
    fn json_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for (name, fmt) in [("r.json", ReportFormat::Json), ("r.csv", ReportFormat::Csv)] {
            let path = dir.path().join(name);
            emit_report(&sample(), &path, fmt).unwrap();
            assert_eq!(read_report(&path, fmt).unwrap(), sample());
        }
    }

    #[test]
    fn csv_rows() {
        let csv = sample().to_csv().unwrap();
        let rows = csv.lines().count();
        // header + one per relation + five summary rows
        assert_eq!(rows, 1 + 2 + 5);
        assert_eq!(csv.lines().filter(|l| l.starts_with("summary,")).count(), 5);
    }

    #[test]
    fn empty_report_rejected() {
        let mut r = sample();
        r.relations.clear();
        let dir = tempfile::tempdir().unwrap();
        let err = emit_report(&r, &dir.path().join("x.json"), ReportFormat::Json).unwrap_err();
        assert!(matches!(err, Error::EmptyReport));
    }

    #[test]
    fn json_schema_keys() {
        let v: serde_json::Value = serde_json::from_str(&sample().to_json().unwrap()).unwrap();
        for key in ["config_hash", "data_hash", "k", "map", "auc_pr", "relations"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let rel = &v["relations"][0];
        for key in ["id", "name", "ap", "positives"] {
            assert!(rel.get(key).is_some());
        }
    }
}

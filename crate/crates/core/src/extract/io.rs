//! JSON-lines report input and TSV graph output.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ClinicalGraph, ExtractError, Triple};
use crate::data::Split;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(alias = "report")]
    pub report_text: String,
}

pub fn read_reports(r: impl BufRead) -> Result<Vec<ReportRecord>, ExtractError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| ExtractError::Parse { line: i + 1, msg: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

/// `subject\trelation\tobject\tcount`, one triple per line in graph order.
pub fn write_graph_tsv(mut w: impl Write, graph: &ClinicalGraph, vocab: &Vocabulary) -> std::io::Result<()> {
    for (i, t) in graph.triples().iter().enumerate() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            vocab.token(t.subject),
            vocab.token(t.relation),
            vocab.token(t.object),
            graph.count(i)
        )?;
    }
    Ok(())
}

/// Inverse of [`write_graph_tsv`]; provenance is not stored in the TSV.
pub fn read_graph_tsv(r: impl BufRead, vocab: &Vocabulary) -> Result<ClinicalGraph, ExtractError> {
    let mut g = ClinicalGraph::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| ExtractError::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 tab-separated fields, got {}", fields.len())));
        }
        let id = |w: &str| vocab.content_id(w).ok_or_else(|| bad(format!("`{w}` is not a vocabulary token")));
        let t = Triple::new(id(fields[0])?, id(fields[1])?, id(fields[2])?);
        let count: usize = fields[3].parse().map_err(|_| bad(format!("bad count `{}`", fields[3])))?;
        for _ in 0..count.max(1) {
            g.add(t, None);
        }
    }
    Ok(g)
}

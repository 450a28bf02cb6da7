use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub eps_p: f64,
    pub eps_d: f64,
    /// Penalty used during this iteration.
    pub rho: f64,
    pub total_cost: f64,
    pub boosting: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; iterations must strictly increase.
    pub fn push(&mut self, record: TraceRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.iter > last.iter, "trace iterations must increase");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Record of iteration `iter`, if it ran.
    pub fn at(&self, iter: usize) -> Option<&TraceRecord> {
        self.records.binary_search_by_key(&iter, |r| r.iter).ok().map(|k| &self.records[k])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with header `iter,eps_p,eps_d,rho,total_cost,boosting`; floats at
    /// full round-trip precision.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["iter", "eps_p", "eps_d", "rho", "total_cost", "boosting"])?;
        for r in &self.records {
            writer.serialize((r.iter, r.eps_p, r.eps_d, r.rho, r.total_cost, r.boosting))?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

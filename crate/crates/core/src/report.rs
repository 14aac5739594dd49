//! Result files: CSV tables and JSON documents stamped with provenance.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::constants::ConstantsBlock;
use crate::correlate::CorrelationHistogram;
use crate::error::Result;

pub const TOOL_NAME: &str = "sps";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identity of the run that produced a file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub constants: ConstantsBlock,
}

impl Provenance {
    pub fn new(config_hash: [u8; 32], seed: u64) -> Self {
        Provenance {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            config_hash: hex::encode(config_hash),
            seed,
            constants: ConstantsBlock::current(),
        }
    }

    /// `# key: value` comment lines for CSV headers.
    pub fn csv_header(&self) -> String {
        let c = &self.constants;
        format!(
            "# tool: {} {}\n# config_hash: {}\n# seed: {}\n# constants: hbar_uev_ps={} k_b_mev_per_k={} h_uev_per_ghz={} resolution_ps={}\n",
            self.tool, self.version, self.config_hash, self.seed, c.hbar_uev_ps, c.k_b_mev_per_k, c.h_uev_per_ghz, c.resolution_ps
        )
    }
}

/// A named numeric table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, prov: &Provenance) -> String {
        let mut s = prov.csv_header();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip representation; integers without a fractional part.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub fn histogram_csv(hist: &CorrelationHistogram, prov: &Provenance) -> String {
    let mut s = prov.csv_header();
    let _ = writeln!(
        s,
        "# channels: {} {}\n# bin_width_ps: {}\n# range_ps: {}\n# total_pairs: {}",
        hist.channel_pair.0, hist.channel_pair.1, hist.bin_width, hist.range, hist.total_pairs
    );
    s.push_str("bin_center_ps,counts\n");
    for (i, c) in hist.counts.iter().enumerate() {
        let _ = writeln!(s, "{},{}", format_number(hist.bin_center(i)), c);
    }
    s
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    provenance: &'a Provenance,
    result: &'a T,
}

/// Pretty JSON `{provenance, result}`; non-finite numbers become `null`.
pub fn json_document<T: Serialize>(result: &T, prov: &Provenance) -> String {
    let mut s = serde_json::to_string_pretty(&Document {
        provenance: prov,
        result,
    })
    .expect("result serialises");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_carries_provenance() {
        let p = Provenance::new([1; 32], 42);
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![1.0, 0.25]);
        let csv = t.to_csv(&p);
        assert!(csv.contains("# seed: 42"));
        assert!(csv.contains(&"01".repeat(32)));
        assert!(csv.ends_with("a,b\n1,0.25\n"));
        let doc = json_document(&t, &p);
        assert!(doc.contains("\"hbar_uev_ps\": 658.2119569"));
    }
}

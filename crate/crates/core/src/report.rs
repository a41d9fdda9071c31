//! Plot-ready CSV tables. Column orders are fixed and floats are printed in
//! their shortest round-trip form, so identical inputs give identical bytes.

use std::borrow::Cow;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::snnd::Clustering;
use crate::stability::{BestMethodShare, FrequencyBucketReport, StabilityReport};
use crate::sweep::SweepTable;
use crate::weat::WeatResult;

pub trait CsvTable {
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()>;

    fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("tables are UTF-8")
    }
}

/// Write any table to `path`.
pub fn emit_table<T: CsvTable + ?Sized>(table: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    table.write_csv(&mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Quote a field when it contains a comma, quote or line break.
pub(crate) fn field(s: &str) -> Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        Cow::Owned(format!("\"{}\"", s.replace('"', "\"\"")))
    } else {
        Cow::Borrowed(s)
    }
}

pub(crate) fn unquote(s: &str) -> Cow<'_, str> {
    match s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        Some(inner) => Cow::Owned(inner.replace("\"\"", "\"")),
        None => Cow::Borrowed(s),
    }
}

/// `word,stability` rows in word order, then `AGGREGATE,<mean>`.
impl CsvTable for StabilityReport {
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "word,stability")?;
        for (w, s) in &self.per_word {
            writeln!(out, "{},{s}", field(w))?;
        }
        if !self.per_word.is_empty() {
            writeln!(out, "AGGREGATE,{}", self.aggregate)?;
        }
        Ok(())
    }
}

/// Aggregate stability of each compared pair of spaces.
pub struct PairTable<'a>(pub &'a StabilityReport);

impl CsvTable for PairTable<'_> {
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "space_a,space_b,stability")?;
        for ((a, b), s) in self.0.space_pair_ids.iter().zip(&self.0.pair_aggregates) {
            writeln!(out, "{},{},{s}", field(a), field(b))?;
        }
        Ok(())
    }
}

impl CsvTable for FrequencyBucketReport {
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "bucket,count,min,q1,median,q3,max,mean,variance")?;
        for b in &self.per_bucket {
            match &b.stats {
                Some(s) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    b.bucket, b.count, s.min, s.q1, s.median, s.q3, s.max, s.mean, s.variance
                )?,
                None => writeln!(out, "{},0,,,,,,,", b.bucket)?,
            }
        }
        Ok(())
    }
}

impl CsvTable for BestMethodShare {
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "method,share")?;
        for (m, s) in self.methods.iter().zip(&self.shares) {
            writeln!(out, "{},{s}", field(m))?;
        }
        Ok(())
    }
}

/// `word,cluster_id,role` in word order; noise has id -1.
impl CsvTable for Clustering {
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "word,cluster_id,role")?;
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.words()[a].cmp(&self.words()[b]));
        for i in order {
            let id = self.labels()[i].map_or(-1, |l| l as i64);
            writeln!(out, "{},{id},{}", field(&self.words()[i]), self.roles()[i])?;
        }
        Ok(())
    }
}

impl CsvTable for SweepTable {
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "axis_value,stability")?;
        for row in &self.rows {
            writeln!(out, "{},{}", row.axis_value, row.stability)?;
        }
        Ok(())
    }
}

/// Every individual pair behind each sweep row.
pub struct SweepPairTable<'a>(pub &'a SweepTable);

impl CsvTable for SweepPairTable<'_> {
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "axis_value,space_a,space_b,stability")?;
        for row in &self.0.rows {
            for (a, b, s) in &row.pairs {
                writeln!(out, "{},{},{},{s}", row.axis_value, field(a), field(b))?;
            }
        }
        Ok(())
    }
}

impl CsvTable for [WeatResult] {
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "query,space,d,coverage")?;
        for r in self {
            writeln!(out, "{},{},{},{}", field(&r.query), field(&r.space), r.effect_size, r.coverage)?;
        }
        Ok(())
    }
}

/// Agreement of the first `p` clusterings, `p = 1..`.
pub struct AgreementCurve(pub Vec<f64>);

impl CsvTable for AgreementCurve {
    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "p,agreement")?;
        for (i, a) in self.0.iter().enumerate() {
            writeln!(out, "{},{a}", i + 1)?;
        }
        Ok(())
    }
}

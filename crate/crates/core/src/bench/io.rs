//! Run outputs: error series, EOC tables and run manifests.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// One line of a run CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub time: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    pub cg_iters: usize,
    pub sum_wu: f64,
}

/// Error norms over time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub rows: Vec<SeriesRow>,
}

impl ErrorSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a row; times must increase strictly and errors be nonnegative.
    pub fn push(&mut self, row: SeriesRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(row.time > last.time) {
                return Err(Error::Usage(format!("time {} does not follow {}", row.time, last.time)));
            }
        }
        if row.l2_error < 0.0 || row.h1_error < 0.0 {
            return Err(Error::Usage("negative error norm".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Least-squares fit `ln e(t) ≈ a + r t` over rows whose L² error lies
    /// in `[lo, hi]`. Returns the rate `r` and the coefficient of
    /// determination, or `None` with fewer than three such rows.
    pub fn growth_rate(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> =
            self.rows.iter().filter(|r| r.l2_error >= lo && r.l2_error <= hi).map(|r| (r.time, r.l2_error.ln())).collect();
        if pts.len() < 3 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
        Some((sxy / sxx, r2))
    }

    pub fn last(&self) -> Option<&SeriesRow> {
        self.rows.last()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        if self.rows.is_empty() {
            w.write_record(["time", "l2_error", "h1_error", "cg_iters", "sum_wu"]).map_err(csv_err)?;
        }
        for r in &self.rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<SeriesRow>, _>>().map_err(csv_err)?;
        Ok(Self { rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EocRow {
    /// Display form of σ, e.g. `2π/10`.
    pub label: String,
    pub sigma: f64,
    pub l2: f64,
    pub eoc_l2: Option<f64>,
    pub h1: f64,
    pub eoc_h1: Option<f64>,
    pub linf: Option<f64>,
    pub eoc_linf: Option<f64>,
}

/// Errors over a σ ladder with empirical orders between consecutive rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EocTable {
    pub order: usize,
    pub rows: Vec<EocRow>,
}

/// `log(e_prev/e) / log(σ_prev/σ)`.
pub fn eoc(prev_err: f64, err: f64, prev_sigma: f64, sigma: f64) -> f64 {
    (prev_err / err).ln() / (prev_sigma / sigma).ln()
}

impl EocTable {
    pub fn new(order: usize) -> Self {
        Self { order, rows: Vec::new() }
    }

    /// Appends a row, filling the EOC columns from the previous row.
    pub fn push(&mut self, label: impl Into<String>, sigma: f64, l2: f64, h1: f64, linf: Option<f64>) {
        let (eoc_l2, eoc_h1, eoc_linf) = match self.rows.last() {
            Some(p) => (
                Some(eoc(p.l2, l2, p.sigma, sigma)),
                Some(eoc(p.h1, h1, p.sigma, sigma)),
                match (p.linf, linf) {
                    (Some(a), Some(b)) => Some(eoc(a, b, p.sigma, sigma)),
                    _ => None,
                },
            ),
            None => (None, None, None),
        };
        self.rows.push(EocRow { label: label.into(), sigma, l2, eoc_l2, h1, eoc_h1, linf, eoc_linf });
    }

    pub fn last_eoc_l2(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.eoc_l2)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["sigma_label", "sigma", "l2", "eoc_l2", "h1", "eoc_h1", "linf", "eoc_linf"]).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                r.sigma.to_string(),
                r.l2.to_string(),
                opt(r.eoc_l2),
                r.h1.to_string(),
                opt(r.eoc_h1),
                opt(r.linf),
                opt(r.eoc_linf),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned text with columns σ, L², EOC, W^{1,2}, EOC.
    pub fn to_text(&self) -> String {
        let header = [format!("n = {}", self.order), "L2".into(), "EOC".into(), "W1,2".into(), "EOC".into()];
        let fmt_eoc = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "---".into());
        let mut lines: Vec<[String; 5]> = vec![header];
        for r in &self.rows {
            lines.push([
                format!("sigma = {}", r.label),
                format!("{:.2e}", r.l2),
                fmt_eoc(r.eoc_l2),
                format!("{:.2e}", r.h1),
                fmt_eoc(r.eoc_h1),
            ]);
        }
        let widths: Vec<usize> = (0..5).map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for l in &lines {
            let cells: Vec<String> = (0..5)
                .map(|c| {
                    let pad = widths[c] - l[c].chars().count();
                    if c == 0 {
                        format!("{}{}", l[c], " ".repeat(pad))
                    } else {
                        format!("{}{}", " ".repeat(pad), l[c])
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_text().as_bytes())?;
        Ok(())
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub version: String,
    pub created: String,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub parameters: serde_json::Value,
    /// Files written by the run, relative to the manifest.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(name: impl Into<String>, parameters: serde_json::Value) -> Self {
        Self {
            name: name.into(),
            version: version_string(),
            created: String::new(),
            seed: None,
            workers: None,
            parameters,
            outputs: Vec::new(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(f)?)
    }
}

/// `partreg <version>`, with the revision appended when `PARTREG_GIT_REV`
/// was set at build time.
pub fn version_string() -> String {
    match option_env!("PARTREG_GIT_REV") {
        Some(rev) => format!("partreg {}+{rev}", env!("CARGO_PKG_VERSION")),
        None => format!("partreg {}", env!("CARGO_PKG_VERSION")),
    }
}

use std::io::Write;

use super::config::ExperimentKind;
use crate::error::Result;

pub const CSV_HEADER: &str = "kind,grid,rep,stat,target,aux1,aux2,seed";

/// One line of an experiment report. `rep = None` marks the per-grid-point aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub kind: ExperimentKind,
    /// The `delta`, `k` or `r` value of the grid point.
    pub grid: f64,
    pub grid_index: usize,
    pub rep: Option<usize>,
    pub stat: f64,
    /// Reference limit the statistic is compared against.
    pub target: f64,
    pub aux1: f64,
    pub aux2: f64,
    pub seed: u64,
}

impl ReportRow {
    pub fn is_aggregate(&self) -> bool {
        self.rep.is_none()
    }

    pub fn to_csv_line(&self) -> String {
        let rep = match self.rep {
            Some(r) => r.to_string(),
            None => "agg".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{}",
            self.kind.name(),
            fmt_g(self.grid),
            rep,
            fmt_g(self.stat),
            fmt_g(self.target),
            fmt_g(self.aux1),
            fmt_g(self.aux2),
            self.seed
        )
    }
}

/// Sorts by grid point, then replication, aggregates last.
pub fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        a.grid_index
            .cmp(&b.grid_index)
            .then(a.rep.unwrap_or(usize::MAX).cmp(&b.rep.unwrap_or(usize::MAX)))
    });
}

pub fn write_csv<W: Write>(rows: &[ReportRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", row.to_csv_line())?;
    }
    w.flush()?;
    Ok(())
}

/// `printf("%.12g")`.
pub fn fmt_g(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

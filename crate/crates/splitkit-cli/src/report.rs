//! CSV artifacts and the summary report.
//!
//! All files use `\n` line endings and full-precision `%.17g` floats so
//! repeated runs are byte-identical.

use std::fmt::Write as _;

use splitkit::gfmt::g17;
use splitkit::splitting::{self, OrderEstimate};

/// One row of errors.csv.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub scheme: String,
    pub n: u32,
    pub error: f64,
}

pub fn errors_csv(records: &[ErrorRecord]) -> String {
    let mut out = String::from("scheme,n,error\n");
    for r in records {
        let _ = writeln!(out, "{},{},{}", r.scheme, r.n, g17(r.error));
    }
    out
}

pub fn parse_errors_csv(text: &str) -> anyhow::Result<Vec<ErrorRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow::anyhow!("empty errors file"))?;
    if header.trim() != "scheme,n,error" {
        anyhow::bail!("expected header 'scheme,n,error', got {header:?}");
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            anyhow::bail!("line {}: expected 3 fields, got {}", idx + 2, parts.len());
        }
        records.push(ErrorRecord {
            scheme: parts[0].to_string(),
            n: parts[1].parse()?,
            error: parts[2].parse()?,
        });
    }
    Ok(records)
}

/// Fitted order of one scheme group.
#[derive(Clone, Debug)]
pub struct OrderRow {
    pub scheme: String,
    pub points: usize,
    pub estimate: OrderEstimate,
}

/// Groups errors.csv rows by scheme (first-appearance order) and fits the
/// empirical order of each group. Groups whose errors sit at the exactness
/// floor are marked exact instead of fitted.
pub fn fit_orders(records: &[ErrorRecord], exact_floor: f64) -> anyhow::Result<Vec<OrderRow>> {
    let mut order: Vec<String> = Vec::new();
    for r in records {
        if !order.contains(&r.scheme) {
            order.push(r.scheme.clone());
        }
    }
    let mut rows = Vec::new();
    for scheme in order {
        let points: Vec<(u32, f64)> = records
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| (r.n, r.error))
            .collect();
        if points.len() < 3 {
            anyhow::bail!("scheme {scheme} has {} rows; need at least 3", points.len());
        }
        let estimate = splitting::order_estimate(&points, exact_floor)?;
        rows.push(OrderRow {
            scheme,
            points: points.len(),
            estimate,
        });
    }
    Ok(rows)
}

pub fn orders_csv(rows: &[OrderRow]) -> String {
    let mut out = String::from("scheme,points,order,fit_residual,exact\n");
    for row in rows {
        match row.estimate {
            OrderEstimate::Order { p, residual } => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},false",
                    row.scheme,
                    row.points,
                    g17(p),
                    g17(residual)
                );
            }
            OrderEstimate::Exact => {
                let _ = writeln!(out, "{},{},,,true", row.scheme, row.points);
            }
        }
    }
    out
}

/// One row of stability.csv: either a fitted envelope or a step-norm bound.
#[derive(Clone, Debug)]
pub struct StabilityRow {
    pub scheme: String,
    pub variant: String,
    pub m_hat: f64,
    pub omega_hat: f64,
    pub max_norm_observed: f64,
}

pub fn stability_csv(rows: &[StabilityRow]) -> String {
    let mut out = String::from("scheme,variant,m_hat,omega_hat,max_norm_observed\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.scheme,
            r.variant,
            g17(r.m_hat),
            g17(r.omega_hat),
            g17(r.max_norm_observed)
        );
    }
    out
}

/// Accumulates check verdicts for summary.txt and the exit code.
#[derive(Debug, Default)]
pub struct Summary {
    lines: Vec<String>,
    failures: usize,
}

impl Summary {
    pub fn note(&mut self, text: String) {
        self.lines.push(text);
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        self.lines.push(format!("CHECK {name}: {verdict} ({detail})"));
    }

    pub fn failures(&self) -> usize {
        self.failures
    }

    pub fn render(&self, title: &str) -> String {
        let mut out = format!("{title}\n");
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        let verdict = if self.failures == 0 {
            "RESULT: PASS".to_string()
        } else {
            format!("RESULT: FAIL ({} failed checks)", self.failures)
        };
        out.push_str(&verdict);
        out.push('\n');
        out
    }
}

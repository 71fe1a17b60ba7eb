//! Metric aggregation and the plain-text result tables.

use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{IterationResult, Outcome, RxResult, Scheme, UserRecord};
use super::{LHS_BL_KBPS, LHS_EL_KBPS, SCPTM_HD_KBPS, SCPTM_SD_KBPS};
use crate::scheduler::CELLS;

/// One scalar observed once per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub population: String,
    pub samples: Vec<f64>,
}

impl Metric {
    pub fn new(name: impl Into<String>, population: impl Into<String>) -> Self {
        Metric {
            name: name.into(),
            population: population.into(),
            samples: Vec::new(),
        }
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return f64::NAN;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Standard error of the mean; zero with fewer than two samples.
    pub fn std_error(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let var = self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }

    /// Student-t 95% half-width.
    pub fn half_width(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        t * self.std_error()
    }

    pub fn ci(&self) -> (f64, f64) {
        let (m, h) = (self.mean(), self.half_width());
        (m - h, m + h)
    }

    /// Mean and standard error of the per-iteration difference `self − other`.
    pub fn paired_diff(&self, other: &Metric) -> (f64, f64) {
        let d = Metric {
            name: String::new(),
            population: String::new(),
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect(),
        };
        (d.mean(), d.std_error())
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

fn write_metadata(out: &mut String, metadata: &[(String, String)]) {
    for (k, v) in metadata {
        let _ = writeln!(out, "# {k}={v}");
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub metadata: Vec<(String, String)>,
    pub metrics: Vec<Metric>,
}

fn fractions<'a>(records: impl Iterator<Item = &'a RxResult>) -> Option<(f64, f64, f64, f64)> {
    let (mut n, mut hd, mut sd, mut hp, mut lp) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for r in records {
        n += 1;
        hd += (r.outcome == Outcome::Hd) as usize;
        sd += (r.outcome == Outcome::Sd) as usize;
        hp += r.hp as usize;
        lp += r.lp as usize;
    }
    (n > 0).then(|| {
        let n = n as f64;
        (hd as f64 / n, sd as f64 / n, hp as f64 / n, lp as f64 / n)
    })
}

impl MetricsReport {
    pub fn get(&self, name: &str, population: &str) -> Option<&Metric> {
        self.metrics
            .iter()
            .find(|m| m.name == name && m.population == population)
    }

    fn slot(&mut self, name: &str, population: &str) -> &mut Metric {
        let i = match self
            .metrics
            .iter()
            .position(|m| m.name == name && m.population == population)
        {
            Some(i) => i,
            None => {
                self.metrics.push(Metric::new(name, population));
                self.metrics.len() - 1
            }
        };
        &mut self.metrics[i]
    }

    fn push_outcomes(&mut self, prefix: &str, population: &str, f: Option<(f64, f64, f64, f64)>) {
        if let Some((hd, sd, _, _)) = f {
            self.slot(&format!("{prefix}_hd"), population).samples.push(hd);
            self.slot(&format!("{prefix}_sd"), population).samples.push(sd);
            self.slot(&format!("{prefix}_outage"), population)
                .samples
                .push(1.0 - hd - sd);
        }
    }

    pub fn from_iterations(scheme: Scheme, seed: u64, results: &[IterationResult]) -> Self {
        let mut r = MetricsReport {
            metadata: vec![
                ("scheme".into(), scheme.to_string()),
                ("seed".into(), seed.to_string()),
                ("iterations".into(), results.len().to_string()),
            ],
            metrics: Vec::new(),
        };
        let (hd_kbps, sd_kbps) = match scheme {
            Scheme::Lhs => (LHS_BL_KBPS + LHS_EL_KBPS, LHS_BL_KBPS),
            Scheme::Scptm => (SCPTM_HD_KBPS, SCPTM_SD_KBPS),
        };
        for it in results {
            let in_cell = |c: usize| it.users.iter().filter(move |u: &&UserRecord| u.cell == c);
            for c in 0..CELLS {
                let f = fractions(in_cell(c).filter_map(|u| u.local.as_ref()));
                r.push_outcomes("local", &format!("cell{c}"), f);
            }
            let all = fractions(it.users.iter().filter_map(|u| u.local.as_ref()));
            r.push_outcomes("local", "all", all);
            if let Some((hd, sd, _, _)) = all {
                r.slot("local_throughput_kbps", "all")
                    .samples
                    .push(hd * hd_kbps + sd * sd_kbps);
            }
            r.push_outcomes("mr", "cell0", fractions(in_cell(0).filter_map(|u| u.mr.as_ref())));
            if let Some((_, _, s1, s2)) = fractions(in_cell(0).filter_map(|u| u.sr.as_ref())) {
                let s2 = if scheme == Scheme::Scptm { 0.0 } else { s2 };
                r.slot("sr_service1", "cell0").samples.push(s1);
                r.slot("sr_service2", "cell0").samples.push(s2);
            }
            for c in 0..CELLS {
                r.slot("hls_services", &format!("cell{c}"))
                    .samples
                    .push(it.hls_services[c] as f64);
            }
            let mean_hls = it.hls_services.iter().sum::<usize>() as f64 / CELLS as f64;
            r.slot("hls_services", "all").samples.push(mean_hls);
            let n = it.users.len().max(1) as f64;
            let hcg = it
                .users
                .iter()
                .filter(|u| u.label == crate::scheduler::Subgroup::Hcg)
                .count() as f64;
            r.slot("hcg_fraction", "all").samples.push(hcg / n);
        }
        r
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        write_metadata(&mut out, &self.metadata);
        out.push_str("name,population,value,ci_low,ci_high\n");
        for m in &self.metrics {
            let (lo, hi) = m.ci();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                m.name,
                m.population,
                fmt_value(m.mean()),
                fmt_value(lo),
                fmt_value(hi)
            );
        }
        out
    }
}

/// Generic sweep output: key columns followed by value/ci triples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub metadata: Vec<(String, String)>,
    pub key_columns: Vec<String>,
    pub value_columns: Vec<String>,
    pub rows: Vec<(Vec<String>, Vec<Metric>)>,
}

impl SweepTable {
    pub fn new(key_columns: &[&str], value_columns: &[&str]) -> Self {
        SweepTable {
            metadata: Vec::new(),
            key_columns: key_columns.iter().map(|s| s.to_string()).collect(),
            value_columns: value_columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = self.key_columns.clone();
        for v in &self.value_columns {
            h.push(v.clone());
            h.push(format!("{v}_ci_low"));
            h.push(format!("{v}_ci_high"));
        }
        h
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        write_metadata(&mut out, &self.metadata);
        out.push_str(&self.header().join(","));
        out.push('\n');
        for (keys, metrics) in &self.rows {
            let mut cells = keys.clone();
            for m in metrics {
                let (lo, hi) = m.ci();
                cells.extend([fmt_value(m.mean()), fmt_value(lo), fmt_value(hi)]);
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

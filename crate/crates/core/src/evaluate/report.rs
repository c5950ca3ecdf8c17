use sha2::{Digest, Sha256};

use crate::evaluate::metrics::mean_std;

/// Errors of one method on one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub index: usize,
    pub group: String,
    pub method: String,
    pub param_error: Option<f64>,
    pub norm_recon: f64,
    pub unnorm_recon: f64,
    pub sparsity: Option<f64>,
}

/// Mean and standard deviation of a metric over the samples defining it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let (mean, std) = mean_std(values);
        Stat { mean, std, count: values.len() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupSummary {
    pub method: String,
    pub group: String,
    pub count: usize,
    pub param_error: Stat,
    pub norm_recon: Stat,
    pub unnorm_recon: Stat,
    pub sparsity: Stat,
}

/// Name of the summary row pooling every group of a method.
pub const ALL_GROUPS: &str = "all";

/// Per-sample records with per-group and pooled summaries.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub experiment: String,
    pub config_hash: String,
    pub records: Vec<SampleRecord>,
    pub summaries: Vec<GroupSummary>,
}

fn summarize(method: &str, group: &str, rows: &[&SampleRecord]) -> GroupSummary {
    let pick = |f: &dyn Fn(&SampleRecord) -> Option<f64>| Stat::of(&rows.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    GroupSummary {
        method: method.to_string(),
        group: group.to_string(),
        count: rows.len(),
        param_error: pick(&|r| r.param_error),
        norm_recon: pick(&|r| Some(r.norm_recon)),
        unnorm_recon: pick(&|r| Some(r.unnorm_recon)),
        sparsity: pick(&|r| r.sparsity),
    }
}

impl MetricsReport {
    /// Summaries per (method, group) in first-seen order, each method
    /// followed by its pooled [`ALL_GROUPS`] row.
    pub fn new(experiment: &str, config_hash: &str, records: Vec<SampleRecord>) -> Self {
        let mut methods: Vec<&str> = Vec::new();
        for r in &records {
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }
        let mut summaries = Vec::new();
        for m in methods {
            let mine: Vec<&SampleRecord> = records.iter().filter(|r| r.method == m).collect();
            let mut groups: Vec<&str> = Vec::new();
            for r in &mine {
                if !groups.contains(&r.group.as_str()) {
                    groups.push(&r.group);
                }
            }
            for g in groups {
                let rows: Vec<&SampleRecord> = mine.iter().copied().filter(|r| r.group == g).collect();
                summaries.push(summarize(m, g, &rows));
            }
            summaries.push(summarize(m, ALL_GROUPS, &mine));
        }
        MetricsReport { experiment: experiment.to_string(), config_hash: config_hash.to_string(), records, summaries }
    }

    pub fn summary(&self, method: &str, group: &str) -> Option<&GroupSummary> {
        self.summaries.iter().find(|s| s.method == method && s.group == group)
    }
}

/// First 16 hex digits of the SHA-256 of a resolved configuration text.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

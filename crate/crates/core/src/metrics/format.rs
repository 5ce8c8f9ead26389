//! Text forms of the score reports and the comparison table.
//!
//! Reports are `key = value` lines after a header, led by `run` and `kind`:
//!
//! ```text
//! # ctsim privacy v1
//! run = 3f2a9c0d11e4b7a8
//! kind = P3
//! q1_authority_items = 420
//! ...
//! ```
//!
//! Floats are written in shortest round-trip form, so parsing restores
//! the exact values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ComparisonTable, PrivacyReport, UtilityReport};
use crate::protocols::ProtocolKind;
use crate::textfmt::{fmt_bool, key_values, parse_bool, parse_hex, KeyValue, ParseError};
use crate::world::RunId;

pub const PRIVACY_HEADER: &str = "# ctsim privacy v1";
pub const UTILITY_HEADER: &str = "# ctsim utility v1";

/// Which run and protocol a report belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReportLabel {
    pub run_id: RunId,
    pub kind: ProtocolKind,
}

struct Fields<'a> {
    values: BTreeMap<&'a str, KeyValue<'a>>,
}

impl<'a> Fields<'a> {
    fn new(text: &'a str, known: &[&str]) -> Result<Self, ParseError> {
        let mut values = BTreeMap::new();
        for kv in key_values(text)? {
            if !known.contains(&kv.key) {
                return Err(ParseError::new(kv.line, format!("unknown key `{}`", kv.key)));
            }
            if let Some(prev) = values.insert(kv.key, kv.clone()) {
                return Err(ParseError::new(kv.line, format!("duplicate key `{}` (first on line {})", kv.key, prev.line)));
            }
        }
        Ok(Self { values })
    }

    fn get<T>(&self, key: &str, parse: impl FnOnce(&str) -> Option<T>) -> Result<T, ParseError> {
        let kv = self
            .values
            .get(key)
            .ok_or_else(|| ParseError::new(0, format!("missing key `{key}`")))?;
        parse(kv.value).ok_or_else(|| ParseError::new(kv.line, format!("bad value `{}` for `{key}`", kv.value)))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T, ParseError> {
        self.get(key, |s| s.parse().ok())
    }

    fn rate(&self, key: &str) -> Result<f64, ParseError> {
        self.get(key, |s| s.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0))
    }

    fn label(&self) -> Result<ReportLabel, ParseError> {
        Ok(ReportLabel {
            run_id: RunId(self.get("run", parse_hex)?),
            kind: self.num("kind")?,
        })
    }
}

fn header(out: &mut String, h: &str, label: ReportLabel) {
    let _ = writeln!(out, "{h}");
    let _ = writeln!(out, "run = {}", label.run_id);
    let _ = writeln!(out, "kind = {}", label.kind);
}

impl PrivacyReport {
    const KEYS: [&'static str; 15] = [
        "run",
        "kind",
        "q1_authority_items",
        "q1_trajectory_points",
        "q1_encounter_pairs",
        "q1_id_records",
        "q1_registry_entries",
        "q2_reid_recall",
        "q3_authority_knows_at_risk",
        "q3_known_at_risk_count",
        "q4_user_inference_rate",
        "q5_personal_items_per_user",
        "q6_mean_track_epochs",
        "q6_linkage_recall",
        "q6_tracking_recall",
    ];

    pub fn to_text(&self, label: ReportLabel) -> String {
        let mut out = String::new();
        header(&mut out, PRIVACY_HEADER, label);
        let rows: [(&str, String); 13] = [
            ("q1_authority_items", self.q1_authority_items.to_string()),
            ("q1_trajectory_points", self.q1_trajectory_points.to_string()),
            ("q1_encounter_pairs", self.q1_encounter_pairs.to_string()),
            ("q1_id_records", self.q1_id_records.to_string()),
            ("q1_registry_entries", self.q1_registry_entries.to_string()),
            ("q2_reid_recall", self.q2_reid_recall.to_string()),
            ("q3_authority_knows_at_risk", fmt_bool(self.q3_authority_knows_at_risk).to_string()),
            ("q3_known_at_risk_count", self.q3_known_at_risk_count.to_string()),
            ("q4_user_inference_rate", self.q4_user_inference_rate.to_string()),
            ("q5_personal_items_per_user", self.q5_personal_items_per_user.to_string()),
            ("q6_mean_track_epochs", self.q6_mean_track_epochs.to_string()),
            ("q6_linkage_recall", self.q6_linkage_recall.to_string()),
            ("q6_tracking_recall", self.q6_tracking_recall.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<(ReportLabel, Self), ParseError> {
        let f = Fields::new(text, &Self::KEYS)?;
        let report = Self {
            q1_authority_items: f.num("q1_authority_items")?,
            q1_trajectory_points: f.num("q1_trajectory_points")?,
            q1_encounter_pairs: f.num("q1_encounter_pairs")?,
            q1_id_records: f.num("q1_id_records")?,
            q1_registry_entries: f.num("q1_registry_entries")?,
            q2_reid_recall: f.rate("q2_reid_recall")?,
            q3_authority_knows_at_risk: f.get("q3_authority_knows_at_risk", parse_bool)?,
            q3_known_at_risk_count: f.num("q3_known_at_risk_count")?,
            q4_user_inference_rate: f.rate("q4_user_inference_rate")?,
            q5_personal_items_per_user: f.rate("q5_personal_items_per_user")?,
            q6_mean_track_epochs: f.rate("q6_mean_track_epochs")?,
            q6_linkage_recall: f.rate("q6_linkage_recall")?,
            q6_tracking_recall: f.rate("q6_tracking_recall")?,
        };
        Ok((f.label()?, report))
    }
}

impl UtilityReport {
    const KEYS: [&'static str; 5] = ["run", "kind", "recall", "precision", "mean_latency_ticks"];

    pub fn to_text(&self, label: ReportLabel) -> String {
        let mut out = String::new();
        header(&mut out, UTILITY_HEADER, label);
        let _ = writeln!(out, "recall = {}", self.recall);
        let _ = writeln!(out, "precision = {}", self.precision);
        let _ = writeln!(out, "mean_latency_ticks = {}", self.mean_latency_ticks);
        out
    }

    pub fn parse_text(text: &str) -> Result<(ReportLabel, Self), ParseError> {
        let f = Fields::new(text, &Self::KEYS)?;
        let report = Self {
            recall: f.rate("recall")?,
            precision: f.rate("precision")?,
            mean_latency_ticks: f.rate("mean_latency_ticks")?,
        };
        Ok((f.label()?, report))
    }
}

impl ComparisonTable {
    /// Header `protocol,n_seeds,<metric>_mean,<metric>_min,<metric>_max,...`
    /// then one row per protocol.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("protocol,n_seeds");
        for m in Self::METRICS {
            let _ = write!(out, ",{m}_mean,{m}_min,{m}_max");
        }
        out.push('\n');
        for (kind, aggs) in self.rows() {
            let _ = write!(out, "{kind},{}", self.outcomes_for(kind).count());
            for a in aggs {
                let _ = write!(out, ",{},{},{}", a.mean, a.min, a.max);
            }
            out.push('\n');
        }
        out
    }

    /// One line per metric, one `mean [min, max]` column per protocol.
    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let cell = |i: usize, m: usize| {
            let a = rows[i].1[m];
            if a.min == a.max {
                format!("{:.4}", a.mean)
            } else {
                format!("{:.4} [{:.4}, {:.4}]", a.mean, a.min, a.max)
            }
        };
        let label_w = Self::METRICS.iter().map(|m| m.len()).max().unwrap_or(0);
        let col_w: Vec<usize> = (0..rows.len())
            .map(|i| (0..Self::METRICS.len()).map(|m| cell(i, m).len()).max().unwrap_or(0).max(4))
            .collect();

        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds: {}", seeds.join(", "));
        let _ = write!(out, "{:label_w$}", "metric");
        for (i, (kind, _)) in rows.iter().enumerate() {
            let _ = write!(out, "  {:>w$}", kind.as_str(), w = col_w[i]);
        }
        out.push('\n');
        for (m, name) in Self::METRICS.iter().enumerate() {
            let _ = write!(out, "{name:label_w$}");
            for (i, w) in col_w.iter().enumerate() {
                let _ = write!(out, "  {:>w$}", cell(i, m));
            }
            out.push('\n');
        }
        out
    }
}

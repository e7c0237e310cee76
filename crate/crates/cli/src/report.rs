//! Second-layer report labels over the mechanical finding categories.
//!
//! Detection never depends on labels; a rules file maps categories, token
//! markers, and address lists onto the report buckets (new / test / error /
//! suspicious) and the renderer produces per-bridge counts in the shape of a
//! category table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use bridgetally_core::audit::{Finding, FindingCategory};
use bridgetally_core::model::TokenId;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    New,
    Test,
    Error,
    Suspicious,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AddressRule {
    pub address: String,
    pub label: Label,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRules {
    /// Tokens whose traffic is test noise regardless of category.
    #[serde(default)]
    pub test_tokens: Vec<TokenId>,
    /// Recipient addresses with a fixed label (e.g. known attacker wallets).
    #[serde(default)]
    pub addresses: Vec<AddressRule>,
    #[serde(default)]
    pub categories: BTreeMap<FindingCategory, Label>,
    #[serde(default = "default_label")]
    pub fallback: Label,
}

fn default_label() -> Label {
    Label::Suspicious
}

impl Default for LabelRules {
    fn default() -> Self {
        let mut categories = BTreeMap::new();
        categories.insert(FindingCategory::DoubleSpend, Label::Error);
        categories.insert(FindingCategory::DestinationMismatch, Label::Error);
        categories.insert(FindingCategory::TokenMismatch, Label::Error);
        categories.insert(FindingCategory::ZeroWithdrawal, Label::Error);
        categories.insert(FindingCategory::MissingRecipient, Label::Error);
        categories.insert(FindingCategory::TestToken, Label::Test);
        categories.insert(FindingCategory::UnbackedWithdrawal, Label::Suspicious);
        categories.insert(FindingCategory::AmountExceedsInflow, Label::Suspicious);
        categories.insert(FindingCategory::Unpairable, Label::Suspicious);
        categories.insert(FindingCategory::Undecodable, Label::Suspicious);
        LabelRules {
            test_tokens: Vec::new(),
            addresses: Vec::new(),
            categories,
            fallback: Label::Suspicious,
        }
    }
}

impl LabelRules {
    pub fn from_json(text: &str) -> Result<LabelRules, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Balanced findings carry no label; everything else gets one.
    pub fn label_for(&self, finding: &Finding) -> Option<Label> {
        if finding.category == FindingCategory::Balanced {
            return None;
        }
        if finding.category == FindingCategory::TestToken
            || self.test_tokens.contains(&finding.token)
        {
            return Some(Label::Test);
        }
        if let Some(recipient) = &finding.recipient {
            if let Some(rule) = self.addresses.iter().find(|r| &r.address == recipient) {
                return Some(rule.label);
            }
        }
        Some(
            self.categories
                .get(&finding.category)
                .copied()
                .unwrap_or(self.fallback),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeRow {
    pub bridge: String,
    pub analyzed: u64,
    pub flagged: u64,
    pub new: u64,
    pub test: u64,
    pub error: u64,
    pub suspicious: u64,
}

impl BridgeRow {
    fn bump(&mut self, label: Label) {
        self.flagged += 1;
        match label {
            Label::New => self.new += 1,
            Label::Test => self.test += 1,
            Label::Error => self.error += 1,
            Label::Suspicious => self.suspicious += 1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<BridgeRow>,
    pub total: BridgeRow,
}

pub fn build_table(findings: &[Finding], rules: &LabelRules) -> ReportTable {
    let mut rows: BTreeMap<String, BridgeRow> = BTreeMap::new();
    for finding in findings {
        let row = rows
            .entry(finding.bridge.clone())
            .or_insert_with(|| BridgeRow {
                bridge: finding.bridge.clone(),
                ..BridgeRow::default()
            });
        row.analyzed += 1;
        if let Some(label) = rules.label_for(finding) {
            row.bump(label);
        }
    }
    let mut total = BridgeRow {
        bridge: "TOTAL".to_string(),
        ..BridgeRow::default()
    };
    for row in rows.values() {
        total.analyzed += row.analyzed;
        total.flagged += row.flagged;
        total.new += row.new;
        total.test += row.test;
        total.error += row.error;
        total.suspicious += row.suspicious;
    }
    ReportTable {
        rows: rows.into_values().collect(),
        total,
    }
}

pub fn render_text(table: &ReportTable) -> String {
    let mut out = String::new();
    let width = table
        .rows
        .iter()
        .map(|r| r.bridge.len())
        .chain([6])
        .max()
        .unwrap_or(6);
    let _ = writeln!(
        out,
        "{:<width$}  {:>9}  {:>8}  {:>6}  {:>6}  {:>6}  {:>10}",
        "Bridge", "Analyzed", "Flagged", "New", "Test", "Error", "Suspicious",
    );
    let mut line = |r: &BridgeRow| {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>8}  {:>6}  {:>6}  {:>6}  {:>10}",
            r.bridge, r.analyzed, r.flagged, r.new, r.test, r.error, r.suspicious,
        );
    };
    for row in &table.rows {
        line(row);
    }
    line(&table.total);
    out
}

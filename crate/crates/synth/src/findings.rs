use serde::{Deserialize, Serialize};

/// The fourteen finding categories, in fixed column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Finding {
    #[serde(rename = "No Finding")]
    NoFinding,
    #[serde(rename = "Enlarged Cardiomediastinum")]
    EnlargedCardiomediastinum,
    #[serde(rename = "Cardiomegaly")]
    Cardiomegaly,
    #[serde(rename = "Lung Lesion")]
    LungLesion,
    #[serde(rename = "Lung Opacity")]
    LungOpacity,
    #[serde(rename = "Edema")]
    Edema,
    #[serde(rename = "Consolidation")]
    Consolidation,
    #[serde(rename = "Pneumonia")]
    Pneumonia,
    #[serde(rename = "Atelectasis")]
    Atelectasis,
    #[serde(rename = "Pneumothorax")]
    Pneumothorax,
    #[serde(rename = "Pleural Effusion")]
    PleuralEffusion,
    #[serde(rename = "Pleural Other")]
    PleuralOther,
    #[serde(rename = "Fracture")]
    Fracture,
    #[serde(rename = "Support Devices")]
    SupportDevices,
}

pub const ALL_FINDINGS: [Finding; 14] = [
    Finding::NoFinding,
    Finding::EnlargedCardiomediastinum,
    Finding::Cardiomegaly,
    Finding::LungLesion,
    Finding::LungOpacity,
    Finding::Edema,
    Finding::Consolidation,
    Finding::Pneumonia,
    Finding::Atelectasis,
    Finding::Pneumothorax,
    Finding::PleuralEffusion,
    Finding::PleuralOther,
    Finding::Fracture,
    Finding::SupportDevices,
];

impl Finding {
    pub fn name(self) -> &'static str {
        match self {
            Finding::NoFinding => "No Finding",
            Finding::EnlargedCardiomediastinum => "Enlarged Cardiomediastinum",
            Finding::Cardiomegaly => "Cardiomegaly",
            Finding::LungLesion => "Lung Lesion",
            Finding::LungOpacity => "Lung Opacity",
            Finding::Edema => "Edema",
            Finding::Consolidation => "Consolidation",
            Finding::Pneumonia => "Pneumonia",
            Finding::Atelectasis => "Atelectasis",
            Finding::Pneumothorax => "Pneumothorax",
            Finding::PleuralEffusion => "Pleural Effusion",
            Finding::PleuralOther => "Pleural Other",
            Finding::Fracture => "Fracture",
            Finding::SupportDevices => "Support Devices",
        }
    }

    pub fn index(self) -> usize {
        ALL_FINDINGS.iter().position(|&f| f == self).unwrap()
    }

    /// Whether the visual motif is drawn on one side of the chest.
    pub fn is_lateral(self) -> bool {
        !matches!(
            self,
            Finding::NoFinding
                | Finding::EnlargedCardiomediastinum
                | Finding::Cardiomegaly
                | Finding::Edema
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Laterality {
    None,
    Left,
    Right,
    Bilateral,
}

impl Laterality {
    /// Adjective used in report sentences; empty for central findings.
    pub fn word(self) -> &'static str {
        match self {
            Laterality::None => "",
            Laterality::Left => "left",
            Laterality::Right => "right",
            Laterality::Bilateral => "bilateral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    None,
    Small,
    Moderate,
    Large,
}

impl Severity {
    pub fn word(self) -> &'static str {
        match self {
            Severity::None => "",
            Severity::Small => "small",
            Severity::Moderate => "moderate",
            Severity::Large => "large",
        }
    }

    /// Motif amplitude multiplier.
    pub fn scale(self) -> f64 {
        match self {
            Severity::None => 1.0,
            Severity::Small => 0.6,
            Severity::Moderate => 0.8,
            Severity::Large => 1.0,
        }
    }
}

/// One planted finding: category, side, and extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingSpec {
    pub finding: Finding,
    pub laterality: Laterality,
    pub severity: Severity,
}

impl FindingSpec {
    pub fn normal() -> Self {
        Self { finding: Finding::NoFinding, laterality: Laterality::None, severity: Severity::None }
    }

    pub fn new(finding: Finding, laterality: Laterality, severity: Severity) -> Self {
        Self { finding, laterality, severity }
    }
}

/// `true` when a positive finding appears together with No Finding.
pub fn has_conflict(specs: &[FindingSpec]) -> bool {
    let has_normal = specs.iter().any(|s| s.finding == Finding::NoFinding);
    has_normal && specs.iter().any(|s| s.finding != Finding::NoFinding)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_order_is_fixed() {
        assert_eq!(ALL_FINDINGS[0].name(), "No Finding");
        assert_eq!(ALL_FINDINGS[1].name(), "Enlarged Cardiomediastinum");
        assert_eq!(ALL_FINDINGS[13].name(), "Support Devices");
        assert_eq!(Finding::PleuralEffusion.index(), 10);
    }

    #[test]
    fn conflict_detection() {
        let normal = FindingSpec::normal();
        let effusion =
            FindingSpec::new(Finding::PleuralEffusion, Laterality::Left, Severity::Small);
        assert!(has_conflict(&[normal, effusion]));
        assert!(!has_conflict(&[normal]));
        assert!(!has_conflict(&[effusion]));
    }
}

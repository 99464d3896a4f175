//! Finite phrase bank: canonical finding sentences, filler sentences,
//! case-section material, and instruction phrasings.

use crate::findings::{Finding, FindingSpec, Laterality, Severity};

/// Noun phrase used in captions, questions, list answers, and impressions.
pub fn finding_noun(finding: Finding) -> &'static str {
    match finding {
        Finding::NoFinding => "no acute findings",
        Finding::EnlargedCardiomediastinum => "widening of the cardiomediastinum",
        Finding::Cardiomegaly => "cardiomegaly",
        Finding::LungLesion => "a nodular lung lesion",
        Finding::LungOpacity => "lung opacity",
        Finding::Edema => "interstitial edema",
        Finding::Consolidation => "consolidation",
        Finding::Pneumonia => "pneumonia",
        Finding::Atelectasis => "atelectasis",
        Finding::Pneumothorax => "pneumothorax",
        Finding::PleuralEffusion => "pleural effusion",
        Finding::PleuralOther => "pleural thickening",
        Finding::Fracture => "a rib fracture",
        Finding::SupportDevices => "a support device",
    }
}

fn qualifiers(spec: &FindingSpec) -> String {
    let mut parts = Vec::new();
    if spec.severity != Severity::None {
        parts.push(spec.severity.word());
    }
    if spec.finding.is_lateral() && spec.laterality != Laterality::None {
        parts.push(spec.laterality.word());
    }
    parts.join(" ")
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Canonical observable sentence for one planted finding.
pub fn finding_sentence(spec: &FindingSpec) -> String {
    let q = qualifiers(spec);
    let sep = if q.is_empty() { "" } else { " " };
    match spec.finding {
        Finding::NoFinding => "The lungs are clear.".to_string(),
        Finding::EnlargedCardiomediastinum => {
            format!("There is {q}{sep}widening of the cardiomediastinum.")
        }
        Finding::Cardiomegaly => format!("There is {q}{sep}cardiomegaly."),
        Finding::LungLesion => format!("There is a {q}{sep}nodular lesion in the lung."),
        Finding::LungOpacity => format!("There is {q}{sep}lung opacity."),
        Finding::Edema => format!("There is {q}{sep}interstitial edema."),
        Finding::Consolidation => format!("There is {q}{sep}consolidation."),
        Finding::Pneumonia => {
            format!("There is {q}{sep}airspace disease consistent with pneumonia.")
        }
        Finding::Atelectasis => format!("There is {q}{sep}atelectasis."),
        Finding::Pneumothorax => format!("There is a {q}{sep}pneumothorax."),
        Finding::PleuralEffusion => capitalize(&format!("{q}{sep}pleural effusion.")),
        Finding::PleuralOther => format!("There is {q}{sep}pleural thickening."),
        Finding::Fracture => format!("There is a {q}{sep}rib fracture."),
        Finding::SupportDevices => {
            let side = if spec.laterality == Laterality::None {
                String::new()
            } else {
                format!("{} ", spec.laterality.word())
            };
            format!("A {side}support device is in place.")
        }
    }
}

/// Qualified noun phrase, e.g. "small left pleural effusion".
pub fn finding_phrase(spec: &FindingSpec) -> String {
    let q = qualifiers(spec);
    if q.is_empty() {
        finding_noun(spec.finding).to_string()
    } else {
        format!("{q} {}", finding_noun(spec.finding))
    }
}

/// Negative filler sentences, applicable only when the finding is absent.
pub fn negative_filler(finding: Finding) -> Option<&'static str> {
    match finding {
        Finding::Cardiomegaly => Some("The heart size is within normal limits."),
        Finding::PleuralEffusion => Some("No pleural effusion is seen."),
        Finding::Pneumothorax => Some("There is no pneumothorax."),
        Finding::Fracture => Some("No acute osseous abnormality is detected."),
        _ => None,
    }
}

pub const FILLER_ORDER: [Finding; 4] = [
    Finding::Cardiomegaly,
    Finding::PleuralEffusion,
    Finding::Pneumothorax,
    Finding::Fracture,
];

/// Sentences removed by the restructuring step; see STOP_PATTERNS.
pub const DEMOGRAPHIC_SENTENCES: [&str; 5] = [
    "The patient is a 61 year-old male.",
    "The patient is a 48 year-old female.",
    "Past medical history of diabetes.",
    "Comparison is made to prior imaging.",
    "Previous studies show a similar appearance.",
];

pub const PRESENTATION_SENTENCES: [&str; 4] = [
    "Pleuritic chest pain and shortness of breath.",
    "Productive cough with low grade fever.",
    "Routine evaluation for dyspnea.",
    "Chest discomfort on exertion.",
];

/// One-sentence caption for image-text alignment samples.
pub fn caption_sentence(specs: &[FindingSpec]) -> String {
    let primary = &specs[0];
    if primary.finding == Finding::NoFinding {
        "A normal chest x-ray with clear lungs.".to_string()
    } else {
        format!("A chest x-ray showing {}.", finding_phrase(primary))
    }
}

pub fn discussion_sentence(specs: &[FindingSpec]) -> String {
    let primary = &specs[0];
    if primary.finding == Finding::NoFinding {
        "This is a normal study.".to_string()
    } else {
        format!("Findings are consistent with {}.", finding_phrase(primary))
    }
}

pub const REPORT_INSTRUCTIONS: [&str; 8] = [
    "Describe the findings in this chest x-ray.",
    "Write the findings section for this radiograph.",
    "Provide a detailed report of the findings.",
    "What are the radiographic findings?",
    "Generate the findings section for this chest radiograph.",
    "Report the findings visible in this image.",
    "Document the findings for this chest x-ray.",
    "Summarize the radiographic observations as a findings section.",
];

pub const SUMMARY_INSTRUCTIONS: [&str; 8] = [
    "Formulate the impression section using the findings.",
    "Write the impression for this report.",
    "Summarize the findings into an impression.",
    "Provide the impression section.",
    "Condense the findings into a diagnostic impression.",
    "What is the impression given these findings?",
    "Draft the impression section from the findings below.",
    "Produce the impression for the following findings.",
];

/// `{}` is replaced by the queried finding noun.
pub const QA_INSTRUCTIONS: [&str; 8] = [
    "Is there evidence of {} in this image?",
    "Does this chest x-ray show {}?",
    "Can you identify {} in this image?",
    "Is {} present?",
    "Any sign of {} on this radiograph?",
    "Does the image demonstrate {}?",
    "Assess this chest x-ray for {}.",
    "Look for {} and answer yes or no.",
];

pub const LIST_INSTRUCTIONS: [&str; 8] = [
    "List the abnormal findings.",
    "Enumerate the findings in this image.",
    "Which findings are present?",
    "Name the radiographic abnormalities.",
    "Give a list of findings.",
    "Identify all findings on this chest x-ray.",
    "What abnormalities can be seen?",
    "Itemize the findings.",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_style_effusion_sentence() {
        let spec =
            FindingSpec::new(Finding::PleuralEffusion, Laterality::Right, Severity::Small);
        assert_eq!(finding_sentence(&spec), "Small right pleural effusion.");
    }

    #[test]
    fn central_findings_skip_laterality() {
        let spec = FindingSpec::new(Finding::Cardiomegaly, Laterality::None, Severity::Moderate);
        assert_eq!(finding_sentence(&spec), "There is moderate cardiomegaly.");
    }

    #[test]
    fn every_instruction_family_has_at_least_eight_phrasings() {
        assert!(REPORT_INSTRUCTIONS.len() >= 8);
        assert!(SUMMARY_INSTRUCTIONS.len() >= 8);
        assert!(QA_INSTRUCTIONS.len() >= 8);
        assert!(LIST_INSTRUCTIONS.len() >= 8);
    }
}

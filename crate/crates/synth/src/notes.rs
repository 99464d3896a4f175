//! Clinical-note restructuring: a prompt contract plus a pluggable
//! generation client. The default client is rule-based, offline, and fully
//! deterministic; an external LLM can be dropped in behind the same
//! single-call interface.

use crate::error::{Result, SynthError};

/// Substrings that mark a sentence as not directly observable from the
/// image (demographics, history, comparisons). Single-word patterns match
/// on word boundaries; multi-word patterns match as substrings.
pub const STOP_PATTERNS: [&str; 12] = [
    "year-old",
    "year old",
    "history of",
    "comparison",
    "compared",
    "prior",
    "previous",
    "patient",
    "male",
    "female",
    "admitted",
    "follow-up",
];

/// Conditions the rule-based client can surface in an impression.
const CONDITION_TERMS: [&str; 15] = [
    "pneumomediastinum",
    "pneumothorax",
    "pleural effusion",
    "pleural thickening",
    "interstitial edema",
    "consolidation",
    "pneumonia",
    "atelectasis",
    "cardiomegaly",
    "widening of the cardiomediastinum",
    "hilar adenopathy",
    "nodular lesion",
    "lung opacity",
    "rib fracture",
    "support device",
];

const NEGATION_CUES: [&str; 4] = ["no ", "without ", "no evidence of ", "clear of "];

/// Raw case material fed to note synthesis.
#[derive(Debug, Clone, Default)]
pub struct CaseInput {
    pub case_description: String,
    pub case_presentation: String,
    pub case_discussion: String,
}

/// Restructured note sections.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteText {
    pub findings_text: String,
    pub impression_text: String,
}

/// Single-call text generation interface.
pub trait GenerationClient {
    fn id(&self) -> &str;
    fn call(&self, prompt: &str) -> std::result::Result<String, String>;
}

/// Build the restructuring prompt around the case sections.
pub fn note_prompt(case: &CaseInput) -> String {
    format!(
        "[Instructions]: \n\
         You are an expert medical assistant AI capable of modifying clinical documents \
         to user specifications. You make minimal changes to the original document to \
         satisfy user requests. You never add information that is not already directly \
         stated in the original document. Restructure the given text into a radiology \
         report finding. Remove any information not directly observable from the current \
         imaging study. For instance, remove any patient demographic data, past medical \
         history, or comparison to prior images or studies. \n\
         \n\
         [Input]: \n\
         <Case Description> \n\
         {}\n\
         <Case Presentation>\n\
         {}\n\
         <Case Discussion>\n\
         {}\n\
         \n\
         [Output]: \n",
        case.case_description, case.case_presentation, case.case_discussion
    )
}

/// Run the prompt through the client and split the result into sections.
pub fn synthesize_note(case: &CaseInput, client: &dyn GenerationClient) -> Result<NoteText> {
    if case.case_description.trim().is_empty()
        && case.case_presentation.trim().is_empty()
        && case.case_discussion.trim().is_empty()
    {
        return Err(SynthError::EmptySections);
    }
    let prompt = note_prompt(case);
    let raw = client
        .call(&prompt)
        .map_err(|message| SynthError::ClientFailure { message, prompt: prompt.clone() })?;
    parse_note_output(&raw).ok_or_else(|| SynthError::ClientFailure {
        message: format!("client output lacks Findings/Impression structure: {raw:?}"),
        prompt,
    })
}

fn parse_note_output(raw: &str) -> Option<NoteText> {
    let findings_start = raw.find("Findings:")?;
    let impression_start = raw.find("Impression:")?;
    if impression_start < findings_start {
        return None;
    }
    let findings_text =
        raw[findings_start + "Findings:".len()..impression_start].trim().to_string();
    let impression_text = raw[impression_start + "Impression:".len()..].trim().to_string();
    if findings_text.is_empty() || impression_text.is_empty() {
        return None;
    }
    Some(NoteText { findings_text, impression_text })
}

pub fn split_sentences(text: &str) -> Vec<String> {
    text.split('.')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| format!("{s}."))
        .collect()
}

fn words(sentence: &str) -> Vec<String> {
    sentence
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn contains_stop_pattern(sentence: &str) -> bool {
    let lower = sentence.to_lowercase();
    let ws = words(sentence);
    STOP_PATTERNS.iter().any(|pat| {
        if pat.contains(' ') || pat.contains('-') {
            lower.contains(pat)
        } else {
            ws.iter().any(|w| w == pat)
        }
    })
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn decapitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn is_negated_before(sentence_lower: &str, term_pos: usize) -> bool {
    NEGATION_CUES.iter().any(|cue| {
        sentence_lower[..term_pos].contains(cue)
            || sentence_lower[..term_pos].trim_start().starts_with(cue.trim_end())
    })
}

/// Deterministic offline restructurer implementing the prompt contract.
#[derive(Debug, Default, Clone)]
pub struct RuleBasedClient;

impl RuleBasedClient {
    fn extract<'a>(prompt: &'a str, start: &str, end: &str) -> &'a str {
        let lo = prompt.find(start).map(|i| i + start.len()).unwrap_or(0);
        let hi = prompt[lo..].find(end).map(|i| lo + i).unwrap_or(prompt.len());
        prompt[lo..hi].trim()
    }

    fn restructure_first(sentence: &str) -> String {
        let lower = sentence.to_lowercase();
        if let Some(rest) = lower.strip_prefix("there is ") {
            format!("Chest X-ray demonstrates {rest}")
        } else if let Some(rest) = lower.strip_prefix("there are ") {
            format!("Chest X-ray demonstrates {rest}")
        } else if lower.starts_with("the ") || lower.starts_with("no ") {
            capitalize(sentence)
        } else {
            format!("Chest X-ray demonstrates {}", decapitalize(sentence))
        }
    }
}

impl GenerationClient for RuleBasedClient {
    fn id(&self) -> &str {
        "rule-based"
    }

    fn call(&self, prompt: &str) -> std::result::Result<String, String> {
        let description = Self::extract(prompt, "<Case Description>", "<Case Presentation>");
        let discussion = Self::extract(prompt, "<Case Discussion>", "[Output]:");

        let kept: Vec<String> = split_sentences(description)
            .into_iter()
            .filter(|s| !contains_stop_pattern(s))
            .collect();

        let mut findings: Vec<String> = Vec::new();
        for (i, sentence) in kept.iter().enumerate() {
            if i == 0 {
                findings.push(Self::restructure_first(sentence));
            } else {
                findings.push(capitalize(sentence));
            }
        }
        if findings.is_empty() {
            findings.push("The lungs are clear.".to_string());
        }

        // Impression terms come from the kept description plus discussion,
        // skipping negated mentions.
        let mut terms: Vec<&str> = Vec::new();
        let mut scan = kept.clone();
        scan.extend(split_sentences(discussion));
        for sentence in &scan {
            let lower = sentence.to_lowercase();
            for term in CONDITION_TERMS {
                if let Some(pos) = lower.find(term) {
                    if !is_negated_before(&lower, pos) && !terms.contains(&term) {
                        terms.push(term);
                    }
                }
            }
        }

        let impression = if terms.is_empty() {
            "No acute cardiopulmonary abnormality.".to_string()
        } else {
            format!(
                "{} present. No other acute cardiopulmonary abnormalities are identified.",
                capitalize(&terms.join(", "))
            )
        };

        Ok(format!("Findings: {}\nImpression: {}", findings.join(" "), impression))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn listing_case() -> CaseInput {
        CaseInput {
            case_description: "Linear radiolucencies are noted along left mediastinal borders.\n\
                 No evidence of pneumothorax or pleural effusion.\n\
                 Lung fields appear clear.\n\
                 No concerning bony abnormality identified."
                .to_string(),
            case_presentation:
                "Right sided pleuritic chest pain, shortness of breath, diminished breath sounds \
                 at right lower zone."
                    .to_string(),
            case_discussion: "This is a classical case of pneumomediastinum and its presentation.\n\
                 Asthma is the most common cause."
                .to_string(),
        }
    }

    #[test]
    fn sample_case_restructures_to_expected_shape() {
        let client = RuleBasedClient;
        let prompt = note_prompt(&listing_case());
        let out = client.call(&prompt).unwrap();
        assert!(
            out.starts_with("Findings: Chest X-ray demonstrates linear radiolucencies"),
            "got: {out}"
        );
        assert!(out.contains("Impression: Pneumomediastinum"), "got: {out}");
    }

    #[test]
    fn history_sentences_are_removed() {
        let case = CaseInput {
            case_description: "There is moderate left consolidation.\n\
                 Past medical history of diabetes.\n\
                 The patient is a 48 year-old female."
                .to_string(),
            case_presentation: "Cough.".to_string(),
            case_discussion: "Findings are consistent with consolidation.".to_string(),
        };
        let note = synthesize_note(&case, &RuleBasedClient).unwrap();
        assert!(!note.findings_text.to_lowercase().contains("diabetes"));
        assert!(!note.findings_text.to_lowercase().contains("year-old"));
        assert!(note.findings_text.contains("Chest X-ray demonstrates moderate left consolidation."));
    }

    #[test]
    fn all_normal_sections_yield_no_acute_impression() {
        let case = CaseInput {
            case_description: "The lungs are clear.\nNo pleural effusion is seen.".to_string(),
            case_presentation: "Routine evaluation for dyspnea.".to_string(),
            case_discussion: "This is a normal study.".to_string(),
        };
        let note = synthesize_note(&case, &RuleBasedClient).unwrap();
        assert!(note.impression_text.to_lowercase().contains("no acute"));
    }

    #[test]
    fn empty_sections_are_rejected() {
        assert!(matches!(
            synthesize_note(&CaseInput::default(), &RuleBasedClient),
            Err(SynthError::EmptySections)
        ));
    }

    #[test]
    fn client_failure_carries_the_prompt() {
        struct Failing;
        impl GenerationClient for Failing {
            fn id(&self) -> &str {
                "failing"
            }
            fn call(&self, _prompt: &str) -> std::result::Result<String, String> {
                Err("connection refused".to_string())
            }
        }
        let err = synthesize_note(&listing_case(), &Failing).unwrap_err();
        match err {
            SynthError::ClientFailure { message, prompt } => {
                assert_eq!(message, "connection refused");
                assert!(prompt.contains("<Case Description>"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}

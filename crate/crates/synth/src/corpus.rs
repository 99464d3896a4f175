//! Corpus records, the deterministic builder, and the line-delimited file
//! format (format version 1: one header object, then one record per line;
//! images are hex-encoded IEEE-754 f64 grids, row-major).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SynthError};
use crate::findings::{
    has_conflict, Finding, FindingSpec, Laterality, Severity, ALL_FINDINGS,
};
use crate::image::{render_image, IMAGE_PIXELS};
use crate::notes::{
    contains_stop_pattern, split_sentences, synthesize_note, CaseInput, GenerationClient,
};
use crate::phrases::{
    caption_sentence, discussion_sentence, finding_noun, finding_phrase, finding_sentence,
    negative_filler, DEMOGRAPHIC_SENTENCES, FILLER_ORDER, LIST_INSTRUCTIONS,
    PRESENTATION_SENTENCES, QA_INSTRUCTIONS, REPORT_INSTRUCTIONS, SUMMARY_INSTRUCTIONS,
};
use crate::subseed;

pub const CORPUS_FORMAT: &str = "cxr-corpus";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    Caption,
    Instruction,
    Report,
    SummarizationPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Case sections attached to report-style records.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Sections {
    pub case_description: String,
    pub case_presentation: String,
    pub case_discussion: String,
    pub findings_text: String,
    pub impression_text: String,
}

mod hex_grid {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut out = String::with_capacity(v.len() * 16);
        for &x in v {
            out.push_str(&format!("{:016x}", x.to_bits()));
        }
        s.serialize_str(&out)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let text = String::deserialize(d)?;
        if text.len() % 16 != 0 {
            return Err(serde::de::Error::custom("hex grid length not a multiple of 16"));
        }
        let mut out = Vec::with_capacity(text.len() / 16);
        for chunk in text.as_bytes().chunks(16) {
            let s = std::str::from_utf8(chunk).map_err(serde::de::Error::custom)?;
            let bits = u64::from_str_radix(s, 16).map_err(serde::de::Error::custom)?;
            out.push(f64::from_bits(bits));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorpusRecord {
    pub record_id: String,
    pub kind: RecordKind,
    #[serde(with = "hex_grid")]
    pub image: Vec<f64>,
    pub instruction: String,
    pub target: String,
    pub findings: Vec<FindingSpec>,
    pub split: Split,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sections: Option<Sections>,
}

impl CorpusRecord {
    pub fn has_finding(&self, finding: Finding) -> bool {
        self.findings.iter().any(|s| s.finding == finding)
    }
}

/// Kind proportions; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindMix {
    pub caption: f64,
    pub instruction: f64,
    pub report: f64,
    pub summarization: f64,
}

impl Default for KindMix {
    fn default() -> Self {
        Self { caption: 0.25, instruction: 0.40, report: 0.25, summarization: 0.10 }
    }
}

impl KindMix {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.caption, self.instruction, self.report, self.summarization];
        if parts.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(SynthError::BadProportions(format!("{self:?}")));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SynthError::BadProportions(format!("sum {total}, expected 1")));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> RecordKind {
        let r: f64 = rng.gen();
        if r < self.caption {
            RecordKind::Caption
        } else if r < self.caption + self.instruction {
            RecordKind::Instruction
        } else if r < self.caption + self.instruction + self.report {
            RecordKind::Report
        } else {
            RecordKind::SummarizationPair
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub records: Vec<CorpusRecord>,
}

impl Corpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &CorpusRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn of_kind(&self, split: Split, kind: RecordKind) -> Vec<&CorpusRecord> {
        self.records.iter().filter(|r| r.split == split && r.kind == kind).collect()
    }
}

const POSITIVE_FINDINGS: [Finding; 13] = [
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

/// Documented sampling prior: 30% No Finding, otherwise a uniform primary
/// finding with 0-2 distinct co-findings.
fn sample_findings(rng: &mut ChaCha20Rng) -> Vec<FindingSpec> {
    if rng.gen_bool(0.30) {
        return vec![FindingSpec::normal()];
    }
    let spec = |rng: &mut ChaCha20Rng, finding: Finding| {
        let laterality = if finding.is_lateral() {
            [Laterality::Left, Laterality::Right, Laterality::Bilateral][rng.gen_range(0..3)]
        } else {
            Laterality::None
        };
        let severity = [Severity::Small, Severity::Moderate, Severity::Large][rng.gen_range(0..3)];
        FindingSpec::new(finding, laterality, severity)
    };
    let primary = POSITIVE_FINDINGS[rng.gen_range(0..POSITIVE_FINDINGS.len())];
    let mut specs = vec![spec(rng, primary)];
    let extras = rng.gen_range(0..=2);
    let mut pool: Vec<Finding> =
        POSITIVE_FINDINGS.iter().copied().filter(|&f| f != primary).collect();
    for _ in 0..extras {
        let idx = rng.gen_range(0..pool.len());
        let f = pool.remove(idx);
        specs.push(spec(rng, f));
    }
    specs
}

/// Observable description sentences for the planted findings plus one or
/// two negative fillers about absent findings.
fn findings_sentences(specs: &[FindingSpec], rng: &mut ChaCha20Rng) -> Vec<String> {
    let mut sentences: Vec<String> = specs.iter().map(finding_sentence).collect();
    if specs[0].finding == Finding::NoFinding {
        sentences.push("No acute cardiopulmonary abnormality.".to_string());
    }
    let mut fillers: Vec<&str> = FILLER_ORDER
        .iter()
        .filter(|f| !specs.iter().any(|s| s.finding == **f))
        .filter_map(|&f| negative_filler(f))
        .collect();
    let n_fillers = if fillers.is_empty() { 0 } else { rng.gen_range(1..=2.min(fillers.len())) };
    for _ in 0..n_fillers {
        let idx = rng.gen_range(0..fillers.len());
        sentences.push(fillers.remove(idx).to_string());
    }
    sentences
}

fn build_case(specs: &[FindingSpec], rng: &mut ChaCha20Rng) -> CaseInput {
    let mut description = findings_sentences(specs, rng);
    // One demographic/history sentence that the restructurer must remove.
    description.insert(
        rng.gen_range(0..=1),
        DEMOGRAPHIC_SENTENCES[rng.gen_range(0..DEMOGRAPHIC_SENTENCES.len())].to_string(),
    );
    CaseInput {
        case_description: description.join("\n"),
        case_presentation: PRESENTATION_SENTENCES[rng.gen_range(0..PRESENTATION_SENTENCES.len())]
            .to_string(),
        case_discussion: discussion_sentence(specs),
    }
}

fn instruction_sample(
    specs: &[FindingSpec],
    rng: &mut ChaCha20Rng,
) -> (String, String) {
    let task: f64 = rng.gen();
    if task < 0.5 {
        // Describe: same task family as report generation.
        let instruction = REPORT_INSTRUCTIONS[rng.gen_range(0..REPORT_INSTRUCTIONS.len())];
        let target = findings_sentences(specs, rng).join(" ");
        (instruction.to_string(), target)
    } else if task < 0.8 {
        // Yes/no probe; half the time ask about a planted finding.
        let positives: Vec<Finding> = specs
            .iter()
            .map(|s| s.finding)
            .filter(|&f| f != Finding::NoFinding)
            .collect();
        let ask_positive = !positives.is_empty() && rng.gen_bool(0.5);
        let (queried, answer) = if ask_positive {
            let spec = specs[rng.gen_range(0..specs.len())];
            (spec.finding, format!("Yes. {}", finding_sentence(&spec)))
        } else {
            let absent: Vec<Finding> = POSITIVE_FINDINGS
                .iter()
                .copied()
                .filter(|f| !specs.iter().any(|s| s.finding == *f))
                .collect();
            let f = absent[rng.gen_range(0..absent.len())];
            (f, format!("No. There is no evidence of {}.", finding_noun(f)))
        };
        let template = QA_INSTRUCTIONS[rng.gen_range(0..QA_INSTRUCTIONS.len())];
        (template.replace("{}", finding_noun(queried)), answer)
    } else {
        let instruction = LIST_INSTRUCTIONS[rng.gen_range(0..LIST_INSTRUCTIONS.len())];
        let target = if specs[0].finding == Finding::NoFinding {
            "No acute findings.".to_string()
        } else {
            let phrases: Vec<String> = specs.iter().map(finding_phrase).collect();
            format!("{}.", phrases.join("; "))
        };
        (instruction.to_string(), target)
    }
}

/// Synthesize `n` records: sample findings, render images, build notes,
/// wrap instructions, and split 80/20 stratified by finding.
pub fn build_corpus(
    n: usize,
    mix: KindMix,
    seed: u64,
    client: &dyn GenerationClient,
) -> Result<Corpus> {
    mix.validate()?;
    if n < 10 {
        return Err(SynthError::BadCorpus(format!("need at least 10 records, got {n}")));
    }

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha20Rng::seed_from_u64(subseed(seed, "record", i as u64));
        let kind = mix.sample(&mut rng);
        let specs = sample_findings(&mut rng);
        let image = render_image(&specs, subseed(seed, "image", i as u64))?;

        let (instruction, target, sections) = match kind {
            RecordKind::Caption => (String::new(), caption_sentence(&specs), None),
            RecordKind::Instruction => {
                let (instruction, target) = instruction_sample(&specs, &mut rng);
                (instruction, target, None)
            }
            RecordKind::Report | RecordKind::SummarizationPair => {
                let case = build_case(&specs, &mut rng);
                let note = synthesize_note(&case, client)?;
                let sections = Sections {
                    case_description: case.case_description,
                    case_presentation: case.case_presentation,
                    case_discussion: case.case_discussion,
                    findings_text: note.findings_text.clone(),
                    impression_text: note.impression_text.clone(),
                };
                if kind == RecordKind::Report {
                    let instruction =
                        REPORT_INSTRUCTIONS[rng.gen_range(0..REPORT_INSTRUCTIONS.len())];
                    (instruction.to_string(), note.findings_text, Some(sections))
                } else {
                    let phrasing =
                        SUMMARY_INSTRUCTIONS[rng.gen_range(0..SUMMARY_INSTRUCTIONS.len())];
                    let instruction = format!("{phrasing}\nFindings: {}", note.findings_text);
                    (instruction, note.impression_text, Some(sections))
                }
            }
        };

        records.push(CorpusRecord {
            record_id: format!("r{i:06}"),
            kind,
            image,
            instruction,
            target,
            findings: specs,
            split: Split::Train,
            sections,
        });
    }

    assign_split(&mut records, seed);
    Ok(Corpus { records })
}

/// 80/20 split stratified by primary finding, then fixed up so that every
/// finding with at least 5 occurrences appears in both splits.
fn assign_split(records: &mut [CorpusRecord], seed: u64) {
    let mut groups: BTreeMap<Finding, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.findings[0].finding).or_default().push(i);
    }
    for (gi, (_, mut members)) in groups.into_iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(subseed(seed, "split", gi as u64));
        members.shuffle(&mut rng);
        let test_n = members.len() / 5;
        for &idx in members.iter().take(test_n) {
            records[idx].split = Split::Test;
        }
    }

    // Coverage fix-up over co-findings.
    for _ in 0..ALL_FINDINGS.len() {
        let mut moved = false;
        for finding in ALL_FINDINGS {
            let with: Vec<usize> = records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.has_finding(finding))
                .map(|(i, _)| i)
                .collect();
            if with.len() < 5 {
                continue;
            }
            let in_test = with.iter().any(|&i| records[i].split == Split::Test);
            let in_train = with.iter().any(|&i| records[i].split == Split::Train);
            if !in_test {
                records[*with.last().unwrap()].split = Split::Test;
                moved = true;
            } else if !in_train {
                records[with[0]].split = Split::Train;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "{{\"format\":\"{CORPUS_FORMAT}\",\"version\":{CORPUS_VERSION},\"records\":{}}}\n",
        corpus.records.len()
    ));
    for r in &corpus.records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    #[allow(dead_code)]
    records: usize,
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| SynthError::BadCorpus("empty corpus file".to_string()))?;
    let header: Header = serde_json::from_str(header_line)?;
    if header.format != CORPUS_FORMAT || header.version != CORPUS_VERSION {
        return Err(SynthError::BadCorpus(format!(
            "unsupported corpus format {}/{}",
            header.format, header.version
        )));
    }
    let mut records = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line)?);
    }
    Ok(Corpus { records })
}

/// Check every record-level invariant; any emitted corpus must pass.
pub fn validate_corpus(corpus: &Corpus) -> Result<()> {
    if corpus.records.is_empty() {
        return Err(SynthError::BadCorpus("no records".to_string()));
    }
    let fail = |id: &str, what: &str| -> Result<()> {
        Err(SynthError::BadCorpus(format!("record {id}: {what}")))
    };
    for r in &corpus.records {
        if r.image.len() != IMAGE_PIXELS {
            return fail(&r.record_id, "image is not 32x32");
        }
        if r.image.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return fail(&r.record_id, "pixel outside [0, 1]");
        }
        if r.findings.is_empty() {
            return fail(&r.record_id, "no findings");
        }
        if has_conflict(&r.findings) {
            return fail(&r.record_id, "No Finding combined with a positive finding");
        }
        if r.target.trim().is_empty() {
            return fail(&r.record_id, "empty target");
        }
        for sentence in split_sentences(&r.target) {
            if contains_stop_pattern(&sentence) {
                return fail(&r.record_id, "target contains a stop-pattern token");
            }
        }
        match r.kind {
            RecordKind::Caption => {
                if !r.instruction.is_empty() {
                    return fail(&r.record_id, "caption records carry no instruction");
                }
            }
            RecordKind::Report => match &r.sections {
                Some(s) if !s.findings_text.is_empty() && !s.impression_text.is_empty() => {
                    if r.target != s.findings_text {
                        return fail(&r.record_id, "report target must be the findings text");
                    }
                }
                _ => return fail(&r.record_id, "report records need findings and impression"),
            },
            RecordKind::SummarizationPair => match &r.sections {
                Some(s) => {
                    if !r.instruction.contains(&s.findings_text) {
                        return fail(
                            &r.record_id,
                            "summarization instruction must carry the findings text",
                        );
                    }
                    if r.target != s.impression_text {
                        return fail(&r.record_id, "summarization target must be the impression");
                    }
                }
                None => return fail(&r.record_id, "summarization records need sections"),
            },
            RecordKind::Instruction => {
                if r.instruction.trim().is_empty() {
                    return fail(&r.record_id, "instruction records need an instruction");
                }
            }
        }
    }

    // Split coverage for findings with at least 5 occurrences.
    for finding in ALL_FINDINGS {
        let total = corpus.records.iter().filter(|r| r.has_finding(finding)).count();
        if total >= 5 {
            for split in [Split::Train, Split::Test] {
                if !corpus
                    .records
                    .iter()
                    .any(|r| r.split == split && r.has_finding(finding))
                {
                    return Err(SynthError::BadCorpus(format!(
                        "{} has {total} occurrences but none in {split:?}",
                        finding.name()
                    )));
                }
            }
        }
    }
    Ok(())
}

//! Three-stage certification of candidate cases: START consistency,
//! medical plausibility, narrative consistency.

pub mod narrative;
pub mod plausibility;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::schema::{CandidateCase, SchemaError};
use crate::triage::{classify, ClassifyError, SynStartsCase, TriageTag, Vitals};

pub use narrative::{Contradiction, ContradictionKind};
pub use plausibility::{PlausibilityRule, RuleId, RULES};

/// Version string recorded in every report and in case provenance.
pub const RULE_SET_VERSION: &str = "synstarts-validation/1 (plausibility-r1r7/1; narrative-patterns/1)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartCheck {
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classified: Option<TriageTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlausibilityCheck {
    pub passed: bool,
    pub violated: Vec<RuleId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeCheck {
    pub passed: bool,
    pub contradictions: Vec<Contradiction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rule_set_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
    pub start_consistency: StartCheck,
    pub medical_plausibility: PlausibilityCheck,
    pub narrative_consistency: NarrativeCheck,
    pub overall: bool,
}

impl ValidationReport {
    /// 1-based index of the first failing stage, if any.
    pub fn first_failed_stage(&self) -> Option<u8> {
        if !self.start_consistency.passed {
            Some(1)
        } else if !self.medical_plausibility.passed {
            Some(2)
        } else if !self.narrative_consistency.passed {
            Some(3)
        } else {
            None
        }
    }

    /// Short hex digest of the report, stored in case provenance.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("report serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

pub fn check_start_consistency(tag: TriageTag, vitals: &Vitals) -> StartCheck {
    match classify(vitals) {
        Ok(got) if got == tag => StartCheck { passed: true, classified: Some(got), detail: None },
        Ok(got) => StartCheck {
            passed: false,
            classified: Some(got),
            detail: Some(format!("vitals classify as {got}, case is tagged {tag}")),
        },
        Err(ClassifyError::Indeterminate { missing }) => StartCheck {
            passed: false,
            classified: None,
            detail: Some(format!("indeterminate: missing {missing}")),
        },
    }
}

pub fn check_medical_plausibility(vitals: &Vitals) -> PlausibilityCheck {
    let violated = plausibility::violated_rules(vitals);
    PlausibilityCheck { passed: violated.is_empty(), violated }
}

pub fn check_narrative_consistency(description: &str, vitals: &Vitals) -> NarrativeCheck {
    let contradictions = narrative::find_contradictions(description, vitals);
    NarrativeCheck { passed: contradictions.is_empty(), contradictions }
}

/// A second opinion on narrative concordance, e.g. a model-based judge.
/// Runs in addition to the pattern check; both must pass.
pub trait NarrativeJudge: Send + Sync {
    fn judge(&self, description: &str, vitals: &Vitals) -> Vec<Contradiction>;
}

fn run_checks(
    tag: TriageTag,
    description: &str,
    vitals: &Vitals,
    judge: Option<&dyn NarrativeJudge>,
) -> ValidationReport {
    let start_consistency = check_start_consistency(tag, vitals);
    let medical_plausibility = check_medical_plausibility(vitals);
    let mut narrative_consistency = check_narrative_consistency(description, vitals);
    if let Some(judge) = judge {
        narrative_consistency.contradictions.extend(judge.judge(description, vitals));
        narrative_consistency.passed = narrative_consistency.contradictions.is_empty();
    }
    let overall =
        start_consistency.passed && medical_plausibility.passed && narrative_consistency.passed;
    ValidationReport {
        rule_set_version: RULE_SET_VERSION.to_string(),
        case_id: None,
        start_consistency,
        medical_plausibility,
        narrative_consistency,
        overall,
    }
}

pub fn validate_candidate(candidate: &CandidateCase) -> ValidationReport {
    run_checks(candidate.triage_tag, &candidate.patient_description, &candidate.vitals_info, None)
}

pub fn validate(case: &SynStartsCase) -> ValidationReport {
    let mut report = run_checks(case.tag, &case.description, &case.vitals, None);
    report.case_id = Some(case.id.clone());
    report
}

pub fn validate_with_judge(case: &SynStartsCase, judge: &dyn NarrativeJudge) -> ValidationReport {
    let mut report = run_checks(case.tag, &case.description, &case.vitals, Some(judge));
    report.case_id = Some(case.id.clone());
    report
}

/// Validate a raw candidate object, rejecting schema violations first.
pub fn validate_value(value: &Value) -> Result<ValidationReport, SchemaError> {
    let candidate = CandidateCase::from_value(value)?;
    Ok(validate_candidate(&candidate))
}

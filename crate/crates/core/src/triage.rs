//! Case schema and the START decision tree.
//!
//! The classifier here is the ground truth for every other module: corpus
//! validation, scripted responders and the reference-case regressions all go
//! through [`classify`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// START triage category.
///
/// Ordering follows the fixed display order `Green < Yellow < Red < Black`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TriageTag {
    Green,
    Yellow,
    Red,
    Black,
}

impl TriageTag {
    pub const ALL: [TriageTag; 4] = [
        TriageTag::Green,
        TriageTag::Yellow,
        TriageTag::Red,
        TriageTag::Black,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TriageTag::Green => "Green",
            TriageTag::Yellow => "Yellow",
            TriageTag::Red => "Red",
            TriageTag::Black => "Black",
        }
    }

    /// Position in the fixed display order, used to index confusion rows.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TriageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown triage tag {0:?}")]
pub struct UnknownTag(pub String);

impl FromStr for TriageTag {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "green" => Ok(TriageTag::Green),
            "yellow" => Ok(TriageTag::Yellow),
            "red" => Ok(TriageTag::Red),
            "black" => Ok(TriageTag::Black),
            _ => Err(UnknownTag(s.to_string())),
        }
    }
}

impl Serialize for TriageTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TriageTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Respirations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_breathing: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breathing_after_maneuver: Option<bool>,
}

impl Respirations {
    pub fn is_empty(&self) -> bool {
        self.rate.is_none() && self.initial_breathing.is_none() && self.breathing_after_maneuver.is_none()
    }

    /// Structural invariants of the record (not clinical plausibility).
    pub fn is_well_formed(&self) -> bool {
        let maneuver_gated =
            self.breathing_after_maneuver.is_none() || self.initial_breathing == Some(false);
        let rate_coherent = match self.rate {
            Some(r) if r > 0 => {
                self.initial_breathing != Some(false) || self.breathing_after_maneuver == Some(true)
            }
            _ => true,
        };
        maneuver_gated && rate_coherent
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perfusion {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial_pulse_present: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capillary_refill_seconds: Option<f64>,
}

impl Perfusion {
    pub fn is_empty(&self) -> bool {
        self.radial_pulse_present.is_none() && self.capillary_refill_seconds.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MentalStatus {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obeys_commands: Option<bool>,
}

impl MentalStatus {
    pub fn is_empty(&self) -> bool {
        self.obeys_commands.is_none()
    }
}

/// START-relevant physiological record. Field names are the wire keys of
/// the `vitals_info` object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vitals {
    pub can_walk: bool,
    #[serde(default, skip_serializing_if = "Respirations::is_empty")]
    pub respirations: Respirations,
    #[serde(default, skip_serializing_if = "Perfusion::is_empty")]
    pub perfusion: Perfusion,
    #[serde(default, skip_serializing_if = "MentalStatus::is_empty")]
    pub mental_status: MentalStatus,
}

impl Vitals {
    pub fn ambulatory() -> Self {
        Vitals { can_walk: true, ..Default::default() }
    }

    /// True when the patient is not breathing on first assessment.
    pub fn is_apneic(&self) -> bool {
        match self.respirations.initial_breathing {
            Some(breathing) => !breathing,
            None => self.respirations.rate == Some(0),
        }
    }
}

/// The piece of information the decision tree needed but did not find.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingField {
    BreathingAfterManeuver,
    RespiratoryRate,
    Perfusion,
    MentalStatus,
}

impl fmt::Display for MissingField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissingField::BreathingAfterManeuver => "breathing_after_maneuver",
            MissingField::RespiratoryRate => "respirations.rate",
            MissingField::Perfusion => "perfusion",
            MissingField::MentalStatus => "mental_status.obeys_commands",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("vitals are indeterminate: missing {missing}")]
    Indeterminate { missing: MissingField },
}

/// Apply the five-step START decision tree.
///
/// Rates of exactly 30 and refill of exactly 2 s proceed to the next step
/// (strict reading of "over").
pub fn classify(vitals: &Vitals) -> Result<TriageTag, ClassifyError> {
    use MissingField::*;
    let missing = |missing| Err(ClassifyError::Indeterminate { missing });

    // 1. ambulation
    if vitals.can_walk {
        return Ok(TriageTag::Green);
    }

    // 2. breathing, with airway repositioning if apneic
    let resp = &vitals.respirations;
    if vitals.is_apneic() {
        return match resp.breathing_after_maneuver {
            Some(true) => Ok(TriageTag::Red),
            Some(false) => Ok(TriageTag::Black),
            None => missing(BreathingAfterManeuver),
        };
    }

    // 3. respiratory rate
    match resp.rate {
        Some(rate) if rate > 30 => return Ok(TriageTag::Red),
        Some(_) => {}
        None => return missing(RespiratoryRate),
    }

    // 4. perfusion: either check alone may affirm adequacy
    let perf = &vitals.perfusion;
    let refill_slow = perf.capillary_refill_seconds.is_some_and(|s| s > 2.0);
    if perf.radial_pulse_present == Some(false) || refill_slow {
        return Ok(TriageTag::Red);
    }
    if perf.radial_pulse_present.is_none() && perf.capillary_refill_seconds.is_none() {
        return missing(Perfusion);
    }

    // 5. mental status
    match vitals.mental_status.obeys_commands {
        Some(false) => Ok(TriageTag::Red),
        Some(true) => Ok(TriageTag::Yellow),
        None => missing(MentalStatus),
    }
}

/// Whether the vitals carry enough information to determine a tag.
pub fn minimal_info_satisfied(vitals: &Vitals) -> bool {
    classify(vitals).is_ok()
}

/// Who produced a case and how it was certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub generator: String,
    pub created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_set_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_digest: Option<String>,
}

/// One triage case: ground-truth tag, structured vitals and narrative.
///
/// Serialized with the generation-schema key names so a corpus line reads
/// like the model output it came from, plus `id` and `provenance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynStartsCase {
    pub id: String,
    #[serde(rename = "triage_tag")]
    pub tag: TriageTag,
    #[serde(rename = "patient_description")]
    pub description: String,
    #[serde(rename = "vitals_info")]
    pub vitals: Vitals,
    pub provenance: Provenance,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn non_walker() -> Vitals {
        Vitals { can_walk: false, ..Default::default() }
    }

    #[test]
    fn walking_patient_is_green() {
        assert_eq!(classify(&Vitals::ambulatory()), Ok(TriageTag::Green));
    }

    #[test]
    fn apneic_after_maneuver_is_black() {
        let mut v = non_walker();
        v.respirations.initial_breathing = Some(false);
        v.respirations.breathing_after_maneuver = Some(false);
        assert_eq!(classify(&v), Ok(TriageTag::Black));
    }

    #[test]
    fn breathing_resumes_after_maneuver_is_red() {
        let mut v = non_walker();
        v.respirations = Respirations {
            rate: Some(32),
            initial_breathing: Some(false),
            breathing_after_maneuver: Some(true),
        };
        assert_eq!(classify(&v), Ok(TriageTag::Red));
    }

    #[test]
    fn delayed_patient_is_yellow() {
        let mut v = non_walker();
        v.respirations.rate = Some(22);
        v.perfusion.radial_pulse_present = Some(true);
        v.perfusion.capillary_refill_seconds = Some(1.0);
        v.mental_status.obeys_commands = Some(true);
        assert_eq!(classify(&v), Ok(TriageTag::Yellow));
    }

    #[test]
    fn slow_refill_is_red() {
        let mut v = non_walker();
        v.respirations.rate = Some(28);
        v.perfusion.capillary_refill_seconds = Some(4.0);
        v.mental_status.obeys_commands = Some(false);
        assert_eq!(classify(&v), Ok(TriageTag::Red));
    }

    #[test]
    fn missing_perfusion_is_indeterminate() {
        let mut v = non_walker();
        v.respirations.rate = Some(20);
        assert_eq!(
            classify(&v),
            Err(ClassifyError::Indeterminate { missing: MissingField::Perfusion })
        );
    }

    #[test]
    fn zero_rate_without_breathing_flag_means_apneic() {
        let mut v = non_walker();
        v.respirations.rate = Some(0);
        assert_eq!(
            classify(&v),
            Err(ClassifyError::Indeterminate { missing: MissingField::BreathingAfterManeuver })
        );
        v.respirations.breathing_after_maneuver = Some(false);
        assert_eq!(classify(&v), Ok(TriageTag::Black));
    }

    #[test]
    fn boundary_values_proceed() {
        let mut v = non_walker();
        v.respirations.rate = Some(30);
        v.perfusion.capillary_refill_seconds = Some(2.0);
        v.mental_status.obeys_commands = Some(true);
        assert_eq!(classify(&v), Ok(TriageTag::Yellow));
    }

    #[test]
    fn minimal_info() {
        assert!(minimal_info_satisfied(&Vitals::ambulatory()));
        let mut v = non_walker();
        v.respirations.rate = Some(22);
        v.perfusion.radial_pulse_present = Some(true);
        assert!(!minimal_info_satisfied(&v));
        let mut black = non_walker();
        black.respirations.initial_breathing = Some(false);
        black.respirations.breathing_after_maneuver = Some(false);
        assert!(minimal_info_satisfied(&black));
    }

    #[test]
    fn tag_parsing_is_case_insensitive() {
        assert_eq!("RED".parse::<TriageTag>(), Ok(TriageTag::Red));
        assert_eq!(" green ".parse::<TriageTag>(), Ok(TriageTag::Green));
        assert!("purple".parse::<TriageTag>().is_err());
        let t: TriageTag = serde_json::from_str("\"yElLoW\"").unwrap();
        assert_eq!(t, TriageTag::Yellow);
        assert_eq!(serde_json::to_string(&TriageTag::Black).unwrap(), "\"Black\"");
    }

    #[test]
    fn vitals_reject_unknown_keys() {
        let raw = r#"{"can_walk": false, "blood_pressure": 120}"#;
        assert!(serde_json::from_str::<Vitals>(raw).is_err());
        let raw = r#"{"can_walk": false, "perfusion": {"bp": 1}}"#;
        assert!(serde_json::from_str::<Vitals>(raw).is_err());
        let raw = r#"{"respirations": {"rate": 20}}"#;
        assert!(serde_json::from_str::<Vitals>(raw).is_err(), "can_walk is required");
    }

    #[test]
    fn vitals_serialize_only_present_fields() {
        let json = serde_json::to_string(&Vitals::ambulatory()).unwrap();
        assert_eq!(json, r#"{"can_walk":true}"#);
    }
}

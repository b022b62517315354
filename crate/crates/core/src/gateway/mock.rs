//! Deterministic template generator standing in for a generation model.

use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{derive_seed, ChatBackend, ChatRequest, ChatResponse, GatewayError};
use crate::schema::CandidateCase;
use crate::triage::{TriageTag, Vitals};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockConfig {
    pub seed: u64,
    /// Probability that a candidate carries an injected defect.
    pub defect_rate: f64,
    /// Probability that each non-essential vitals field is present.
    pub optional_field_rate: f64,
    /// Probability that the JSON is wrapped in prose or a code fence.
    pub wrapper_rate: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig { seed: 0, defect_rate: 0.0, optional_field_rate: 0.5, wrapper_rate: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectKind {
    /// Vitals justify a different tag than the one requested.
    WrongTag,
    /// Vitals break a plausibility rule.
    Implausible,
    /// Narrative contradicts the ambulation field.
    NarrativeContradiction,
    /// Narrative omits the patient's age.
    MissingAge,
    /// `vitals_info` carries a forbidden key.
    ExtraKey,
    /// No JSON object at all.
    Refusal,
}

const DEFECTS: [DefectKind; 6] = [
    DefectKind::WrongTag,
    DefectKind::Implausible,
    DefectKind::NarrativeContradiction,
    DefectKind::MissingAge,
    DefectKind::ExtraKey,
    DefectKind::Refusal,
];

const EVENTS: &[&str] = &[
    "after a building collapse",
    "following an explosion at the football stadium",
    "after a multi-vehicle pileup on the highway",
    "during a train derailment",
    "after an earthquake",
    "in a warehouse fire",
    "after a crowd crush at a concert",
    "after a bus crash",
    "following a chemical plant explosion",
    "after flash flooding swept through the town",
    "after a bridge collapse",
    "during a tornado",
    "following a gas explosion in an apartment block",
    "after a stage collapse at a festival",
    "at the scene of a ferry accident",
    "after a parking garage collapse",
];

const GREEN_INJURIES: &[&str] = &[
    "minor scratches on the arms",
    "a sprained wrist",
    "small lacerations on the forehead",
    "bruises on both legs",
    "minor burns on one hand",
    "a cut on the chin",
    "abrasions on the knees",
    "a bruised shoulder",
    "a small laceration on the scalp",
    "a swollen finger",
];

const YELLOW_INJURIES: &[&str] = &[
    "a fractured femur",
    "a crushed leg",
    "a deep laceration to the thigh",
    "an open fracture of the lower leg",
    "a suspected pelvic fracture",
    "partial-thickness burns to both legs",
    "a dislocated hip",
    "a fractured ankle",
    "a deep wound to the calf",
];

const RED_INJURIES: &[&str] = &[
    "severe head trauma",
    "penetrating chest trauma",
    "a large abdominal wound",
    "extensive burns over the torso",
    "heavy bleeding from the thigh",
    "sharp trauma to the neck",
    "a crushed chest",
    "multiple deep shrapnel wounds",
];

const BLACK_INJURIES: &[&str] = &[
    "massive head trauma",
    "catastrophic chest injuries",
    "severe crush injuries to the torso",
    "an open skull fracture",
    "extensive full-thickness burns",
    "massive blunt trauma",
];

struct Patient {
    age: u32,
    female: bool,
}

impl Patient {
    fn subject(&self) -> &'static str {
        if self.female { "She" } else { "He" }
    }

    fn subject_lower(&self) -> &'static str {
        if self.female { "she" } else { "he" }
    }

    fn possessive(&self) -> &'static str {
        if self.female { "her" } else { "his" }
    }

    fn intro(&self, rng: &mut ChaCha8Rng, with_age: bool) -> String {
        if !with_age {
            return if self.female { "A woman".into() } else { "A man".into() };
        }
        match rng.random_range(0..3) {
            0 => format!("{}-year-old {}", self.age, if self.female { "female" } else { "male" }),
            1 => format!("{}-year-old {}", self.age, if self.female { "woman" } else { "man" }),
            _ => format!("{} y/o {}", self.age, if self.female { "F" } else { "M" }),
        }
    }
}

fn seconds(x: f64) -> String {
    let words = ["zero", "one", "two", "three", "four", "five", "six"];
    if x.fract() == 0.0 {
        let n = x as usize;
        let unit = if n == 1 { "second" } else { "seconds" };
        if n < words.len() && n > 2 {
            format!("{} {unit}", words[n])
        } else {
            format!("{n} {unit}")
        }
    } else {
        format!("{x:.1} seconds")
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty pool")
}

struct Draft {
    vitals: Vitals,
    sentences: Vec<String>,
}

impl Draft {
    fn new(can_walk: bool) -> Self {
        Draft { vitals: Vitals { can_walk, ..Default::default() }, sentences: Vec::new() }
    }

    fn say(&mut self, s: impl Into<String>) {
        self.sentences.push(s.into());
    }
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    cfg: &'a MockConfig,
}

impl Builder<'_> {
    fn optional(&mut self) -> bool {
        self.rng.random_bool(self.cfg.optional_field_rate.clamp(0.0, 1.0))
    }

    fn mention(&mut self) -> bool {
        self.rng.random_bool(0.8)
    }

    fn non_walker(&mut self, p: &Patient, d: &mut Draft) {
        if self.mention() {
            d.say(match self.rng.random_range(0..3) {
                0 => format!("{} is unable to walk.", p.subject()),
                1 => format!("{} cannot walk because of the injury.", p.subject()),
                _ => format!("{} cannot stand or walk.", p.subject()),
            });
        }
    }

    fn rate_sentence(&mut self, p: &Patient, rate: u32) -> String {
        match self.rng.random_range(0..3) {
            0 => format!("Respiratory rate is {rate}."),
            1 => format!("RR {rate}."),
            _ => format!("{} is breathing {rate} breaths per minute.", p.subject()),
        }
    }

    fn good_perfusion(&mut self, d: &mut Draft) {
        let variant = self.rng.random_range(0..3);
        if variant != 1 {
            d.vitals.perfusion.radial_pulse_present = Some(true);
            d.say(if self.rng.random_bool(0.5) {
                "Radial pulse is present.".to_string()
            } else {
                "A strong radial pulse is palpable.".to_string()
            });
        }
        if variant != 0 {
            let refill = *[0.5, 1.0, 1.5].choose(&mut self.rng).expect("non-empty");
            d.vitals.perfusion.capillary_refill_seconds = Some(refill);
            d.say(format!("Capillary refill is {}.", seconds(refill)));
        }
    }

    fn obeys(&mut self, p: &Patient, d: &mut Draft) {
        d.vitals.mental_status.obeys_commands = Some(true);
        d.say(match self.rng.random_range(0..3) {
            0 => format!("{} is alert and obeys commands.", p.subject()),
            1 => format!("{} can follow simple commands.", p.subject()),
            _ => format!("{} follows commands appropriately.", p.subject()),
        });
    }

    fn does_not_obey(&mut self, p: &Patient, d: &mut Draft) {
        d.vitals.mental_status.obeys_commands = Some(false);
        d.say(match self.rng.random_range(0..3) {
            0 => format!("{} is not following simple commands.", p.subject()),
            1 => format!("{} cannot follow simple commands.", p.subject()),
            _ => format!("{} is confused and does not obey commands.", p.subject()),
        });
    }

    fn green(&mut self, p: &Patient) -> Draft {
        let mut d = Draft::new(true);
        d.say(match self.rng.random_range(0..4) {
            0 => format!("{} is walking around and talking to others.", p.subject()),
            1 => format!("{} walked to the treatment area on {} own.", p.subject(), p.possessive()),
            2 => format!("{} is ambulatory and complaining only of minor pain.", p.subject()),
            _ => format!("{} is walking without assistance.", p.subject()),
        });
        if self.optional() {
            let rate = self.rng.random_range(12..=24);
            d.vitals.respirations.rate = Some(rate);
            if self.mention() {
                let s = self.rate_sentence(p, rate);
                d.say(s);
            }
        }
        if self.optional() {
            d.vitals.perfusion.radial_pulse_present = Some(true);
            if self.mention() {
                d.say("Radial pulse is present.");
            }
        }
        if self.optional() {
            let refill = *[1.0, 1.5].choose(&mut self.rng).expect("non-empty");
            d.vitals.perfusion.capillary_refill_seconds = Some(refill);
            if self.mention() {
                d.say(format!("Capillary refill is {}.", seconds(refill)));
            }
        }
        if self.optional() {
            d.vitals.mental_status.obeys_commands = Some(true);
            if self.mention() {
                d.say(format!("{} follows commands without difficulty.", p.subject()));
            }
        }
        d
    }

    fn yellow(&mut self, p: &Patient) -> Draft {
        let mut d = Draft::new(false);
        self.non_walker(p, &mut d);
        let rate = self.rng.random_range(12..=29);
        d.vitals.respirations.rate = Some(rate);
        let s = self.rate_sentence(p, rate);
        d.say(s);
        self.good_perfusion(&mut d);
        self.obeys(p, &mut d);
        d
    }

    fn red(&mut self, p: &Patient) -> Draft {
        let mut d = Draft::new(false);
        self.non_walker(p, &mut d);
        match self.rng.random_range(0..4) {
            0 => {
                d.vitals.respirations.initial_breathing = Some(false);
                d.vitals.respirations.breathing_after_maneuver = Some(true);
                d.say(format!(
                    "{} is not breathing. After the airway is opened, {} begins breathing.",
                    p.subject(),
                    p.subject_lower()
                ));
                if self.optional() {
                    let rate = if self.rng.random_bool(0.5) {
                        self.rng.random_range(8..=29)
                    } else {
                        self.rng.random_range(31..=42)
                    };
                    d.vitals.respirations.rate = Some(rate);
                    d.say(format!("{} is then taking {rate} breaths per minute.", p.subject()));
                }
                if self.optional() {
                    self.does_not_obey(p, &mut d);
                }
            }
            1 => {
                let rate = self.rng.random_range(31..=45);
                d.vitals.respirations.rate = Some(rate);
                let s = self.rate_sentence(p, rate);
                d.say(s);
                if self.optional() {
                    self.good_perfusion(&mut d);
                }
                if self.optional() {
                    if self.rng.random_bool(0.5) {
                        self.obeys(p, &mut d);
                    } else {
                        self.does_not_obey(p, &mut d);
                    }
                }
            }
            2 => {
                let rate = self.rng.random_range(12..=29);
                d.vitals.respirations.rate = Some(rate);
                let s = self.rate_sentence(p, rate);
                d.say(s);
                if self.rng.random_bool(0.5) {
                    d.vitals.perfusion.radial_pulse_present = Some(false);
                    d.say("No radial pulse can be felt.");
                } else {
                    let refill = *[2.5, 3.0, 3.5, 4.0, 5.0, 6.0].choose(&mut self.rng).expect("non-empty");
                    d.vitals.perfusion.capillary_refill_seconds = Some(refill);
                    d.say(format!("Capillary refill of {}.", seconds(refill)));
                }
                if self.optional() {
                    self.obeys(p, &mut d);
                }
            }
            _ => {
                let rate = self.rng.random_range(12..=29);
                d.vitals.respirations.rate = Some(rate);
                let s = self.rate_sentence(p, rate);
                d.say(s);
                self.good_perfusion(&mut d);
                self.does_not_obey(p, &mut d);
            }
        }
        d
    }

    fn black(&mut self, p: &Patient) -> Draft {
        let mut d = Draft::new(false);
        d.vitals.respirations.initial_breathing = Some(false);
        d.vitals.respirations.breathing_after_maneuver = Some(false);
        if self.optional() {
            d.vitals.mental_status.obeys_commands = Some(false);
            d.say(format!("{} is found unresponsive.", p.subject()));
        }
        d.say(format!("{} is not breathing.", p.subject()));
        d.say(match self.rng.random_range(0..3) {
            0 => format!("{} does not start breathing after the airway is repositioned.", p.subject()),
            1 => "Attempts to open the airway fail and no breathing resumes.".to_string(),
            _ => format!("Even after the airway is opened, {} remains apneic.", p.subject_lower()),
        });
        if self.optional() {
            d.vitals.respirations.rate = Some(0);
        }
        if self.optional() {
            d.vitals.perfusion.radial_pulse_present = Some(false);
            d.say("No radial pulse is present.");
        }
        d
    }

    fn draft(&mut self, tag: TriageTag, p: &Patient) -> Draft {
        match tag {
            TriageTag::Green => self.green(p),
            TriageTag::Yellow => self.yellow(p),
            TriageTag::Red => self.red(p),
            TriageTag::Black => self.black(p),
        }
    }

    fn injury(&mut self, tag: TriageTag) -> &'static str {
        let pool = match tag {
            TriageTag::Green => GREEN_INJURIES,
            TriageTag::Yellow => YELLOW_INJURIES,
            TriageTag::Red => RED_INJURIES,
            TriageTag::Black => BLACK_INJURIES,
        };
        pick(&mut self.rng, pool)
    }
}

impl MockConfig {
    /// Emit one candidate object (as model-style text) for `tag`.
    pub fn generate(&self, tag: TriageTag, seed: u64) -> String {
        let mut b = Builder { rng: ChaCha8Rng::seed_from_u64(seed), cfg: self };
        let defect = if b.rng.random_bool(self.defect_rate.clamp(0.0, 1.0)) {
            Some(*DEFECTS.choose(&mut b.rng).expect("non-empty"))
        } else {
            None
        };
        if defect == Some(DefectKind::Refusal) {
            return "I'm sorry, but I can't help with creating that scenario.".to_string();
        }

        let patient = Patient { age: b.rng.random_range(18..=90), female: b.rng.random_bool(0.5) };
        let vitals_tag = if defect == Some(DefectKind::WrongTag) {
            TriageTag::ALL[(tag.index() + b.rng.random_range(1..4)) % 4]
        } else {
            tag
        };
        let intro = patient.intro(&mut b.rng, defect != Some(DefectKind::MissingAge));
        let injury = b.injury(vitals_tag);
        let event = pick(&mut b.rng, EVENTS);
        let mut draft = b.draft(vitals_tag, &patient);

        match defect {
            Some(DefectKind::Implausible) => draft.vitals.respirations.rate = Some(30),
            Some(DefectKind::NarrativeContradiction) => {
                if draft.vitals.can_walk {
                    draft.say(format!("{} is unable to walk.", patient.subject()));
                } else {
                    draft.say(format!("{} is walking around the scene.", patient.subject()));
                }
            }
            _ => {}
        }

        let mut description = format!("{intro} with {injury} {event}.");
        for sentence in &draft.sentences {
            description.push(' ');
            description.push_str(sentence);
        }
        let candidate = CandidateCase {
            triage_tag: tag,
            patient_description: description,
            vitals_info: draft.vitals,
        };
        let mut value = serde_json::to_value(&candidate).expect("candidate serializes");
        if defect == Some(DefectKind::ExtraKey) {
            value["vitals_info"]["blood_pressure"] = json!("90/60");
        }
        let body = serde_json::to_string_pretty(&value).expect("value serializes");
        if b.rng.random_bool(self.wrapper_rate.clamp(0.0, 1.0)) {
            if b.rng.random_bool(0.5) {
                format!("```json\n{body}\n```")
            } else {
                format!("Here is the requested scenario:\n{body}\nLet me know if you need another.")
            }
        } else {
            body
        }
    }
}

/// Candidate text for `tag` from the default mock configuration.
pub fn mock_generate(tag: TriageTag, seed: u64) -> String {
    MockConfig { seed, ..Default::default() }.generate(tag, seed)
}

/// Chat backend answering `gen:<Tag>[:...]` requests with mock candidates.
pub struct MockBackend {
    config: MockConfig,
}

impl MockBackend {
    pub fn new(config: MockConfig) -> Self {
        MockBackend { config }
    }
}

impl ChatBackend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.check()?;
        let mut parts = req.request_tag.split(':');
        let tag = match (parts.next(), parts.next()) {
            (Some("gen"), Some(tag)) => tag
                .parse::<TriageTag>()
                .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?,
            _ => {
                return Err(GatewayError::InvalidRequest(format!(
                    "mock backend only serves gen:<tag> requests, got {:?}",
                    req.request_tag
                )))
            }
        };
        let seed = derive_seed(self.config.seed, &req.request_tag);
        Ok(ChatResponse {
            text: self.config.generate(tag, seed),
            latency: Duration::ZERO,
            token_usage: None,
            backend: "mock".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::extract_first_object;
    use crate::triage::classify;
    use crate::validation::validate_value;

    fn parse(text: &str) -> serde_json::Value {
        serde_json::Value::Object(extract_first_object(text).expect("object"))
    }

    #[test]
    fn deterministic_by_seed() {
        assert_eq!(mock_generate(TriageTag::Red, 3), mock_generate(TriageTag::Red, 3));
        assert_ne!(mock_generate(TriageTag::Red, 3), mock_generate(TriageTag::Red, 4));
    }

    #[test]
    fn green_seed_7_validates() {
        let value = parse(&mock_generate(TriageTag::Green, 7));
        assert_eq!(value["vitals_info"]["can_walk"], json!(true));
        assert!(validate_value(&value).unwrap().overall);
    }

    #[test]
    fn black_candidates_are_apneic_after_maneuver() {
        for seed in 0..50 {
            let value = parse(&mock_generate(TriageTag::Black, seed));
            let resp = &value["vitals_info"]["respirations"];
            assert_eq!(resp["initial_breathing"], json!(false));
            assert_eq!(resp["breathing_after_maneuver"], json!(false));
            let vitals: Vitals = serde_json::from_value(value["vitals_info"].clone()).unwrap();
            assert_eq!(classify(&vitals), Ok(TriageTag::Black));
        }
    }

    #[test]
    fn clean_candidates_always_validate() {
        for tag in TriageTag::ALL {
            for seed in 0..300 {
                let text = mock_generate(tag, seed);
                let report = validate_value(&parse(&text)).unwrap();
                assert!(report.overall, "{tag} seed {seed}: {text}\n{report:#?}");
            }
        }
    }

    #[test]
    fn defects_always_fail_somewhere() {
        let cfg = MockConfig { defect_rate: 1.0, ..Default::default() };
        for tag in TriageTag::ALL {
            for seed in 0..200 {
                let text = cfg.generate(tag, seed);
                let Some(obj) = extract_first_object(&text) else { continue };
                let value = serde_json::Value::Object(obj);
                match validate_value(&value) {
                    Err(_) => {}
                    Ok(report) => {
                        let wrong_tag = value["triage_tag"] != json!(tag.as_str());
                        assert!(!report.overall || wrong_tag, "{tag} seed {seed}: {text}");
                    }
                }
            }
        }
    }

    #[test]
    fn backend_serves_generation_tags_only() {
        let backend = MockBackend::new(MockConfig::default());
        let mut req = ChatRequest {
            model_id: "mock".into(),
            system_prompt: "s".into(),
            user_prompt: "u".into(),
            temperature: 0.7,
            max_tokens: 512,
            request_tag: "gen:Red".into(),
        };
        let a = backend.complete(&req).unwrap().text;
        assert_eq!(a, backend.complete(&req).unwrap().text);
        let value = parse(&a);
        assert_eq!(value["triage_tag"], json!("Red"));
        req.request_tag = "eval:x".into();
        assert!(backend.complete(&req).is_err());
    }
}

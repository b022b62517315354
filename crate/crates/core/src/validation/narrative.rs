//! Deterministic claim extraction from patient narratives.
//!
//! Each pattern maps a phrase to a claim about one vitals field. Negated
//! phrasings are matched first and masked out of the text so that, say,
//! "unable to walk" never also registers as "walk".

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::triage::Vitals;

pub const NARRATIVE_PATTERNS_VERSION: &str = "narrative-patterns/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Bound {
    Exactly(f64),
    Above(f64),
    Below(f64),
    AtMost(f64),
}

impl Bound {
    fn admits(self, x: f64) -> bool {
        match self {
            Bound::Exactly(v) => (x - v).abs() < 1e-9,
            Bound::Above(v) => x > v,
            Bound::Below(v) => x < v,
            Bound::AtMost(v) => x <= v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "claim", content = "value")]
pub enum Claim {
    Ambulatory(bool),
    /// Not breathing on first assessment.
    Apneic,
    BreathingAfterManeuver(bool),
    RespiratoryRate(Bound),
    CapillaryRefill(Bound),
    RadialPulse(bool),
    ObeysCommands(bool),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NarrativeClaims {
    pub age: Option<u32>,
    pub sex: Option<Sex>,
    pub claims: Vec<Claim>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContradictionKind {
    Ambulation,
    Breathing,
    AirwayManeuver,
    RespiratoryRate,
    CapillaryRefill,
    RadialPulse,
    MentalStatus,
    MissingAge,
    MissingSex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contradiction {
    pub kind: ContradictionKind,
    pub detail: String,
}

fn re(pattern: &str) -> Regex {
    Regex::new(pattern).expect("narrative pattern compiles")
}

const NUMBER: &str = r"(\d+(?:\.\d+)?|one|two|three|four|five|six|seven|eight|nine|ten)";
const QUALIFIER: &str =
    r"(?:(over|above|greater than|more than|longer than|>|under|below|less than|<|within)\s*)?";

static AGE: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(\d{1,3})\s*-?\s*(?:years?|yrs?)\s*-?\s*old\b|\b(\d{1,3})\s*-?\s*(?:y/o|y\.o\.|yo)(?:\W|$)|\bage[ds]?\s+(\d{1,3})\b")
});
static SEX_ABBREV: LazyLock<Regex> =
    LazyLock::new(|| re(r"(?:y/o|y\.o\.|yo|old)\s+([mf])\b"));
static SEX_WORD: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(male|female|man|woman|gentleman|lady|boy|girl|he|him|his|she|her|hers)\b")
});

static WALK_NEG: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:unable to|cannot|can ?not|can't|could not|couldn't|not able to|does not|doesn't|is not able to)\s+(?:\w+\s+(?:or|and)\s+)?(?:walk|ambulate|stand)\w*|\bnon-?\s?ambulatory\b|\bnot (?:walking|ambulatory|ambulating)\b")
});
static WALK_POS: LazyLock<Regex> =
    LazyLock::new(|| re(r"\b(?:walking|ambulatory|ambulating|walks|walked|able to walk|can walk)\b"));

static MANEUVER_FAIL: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:did not|does not|didn't|doesn't|fails? to|failed to)\s+(?:start|begin|resume|return)\w*\s+(?:to\s+)?breath\w*|\bno (?:spontaneous )?breathing (?:resumed|returned|started|resumes|returns)\b|\bbreathing (?:did not|does not|didn't|doesn't) (?:resume|return|start)\b|\bstill (?:not breathing|apneic)\b|\bremains? (?:apneic|not breathing)\b")
});
static MANEUVER_OK: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:begins|began|starts|started|resumes|resumed)\s+(?:to\s+)?breath\w*|\bbreathing (?:resumes|resumed|returns|returned|starts|started)\b")
});
static APNEIC: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\bnot breathing\b|\bapneic\b|\bno (?:spontaneous )?(?:respirations|breathing)\b|\bno respiratory effort\b")
});

static RATE_LABELLED: LazyLock<Regex> = LazyLock::new(|| {
    re(&format!(
        r"\b(?:respiratory rate|resp(?:iratory)?\.? rate|respirations?|rr|breathing rate)\b(?:\s*(?:is|of|at|was|are|=|:|around|about|approximately|roughly))*\s*{QUALIFIER}(\d{{1,3}})\b"
    ))
});
static RATE_UNIT: LazyLock<Regex> = LazyLock::new(|| {
    re(&format!(r"{QUALIFIER}\b(\d{{1,3}})\s*breaths\b"))
});

static REFILL_NUMERIC: LazyLock<Regex> = LazyLock::new(|| {
    re(&format!(
        r"\b(?:capillary refill|cap refill|crt)(?:\s+time)?(?:\s*(?:is|of|at|was|=|:|takes|around|about|approximately))*\s*{QUALIFIER}{NUMBER}\s*(?:seconds?|secs?|s)\b"
    ))
});
static REFILL_SLOW: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:delayed|prolonged|sluggish|slow)\s+(?:capillary refill|cap refill|crt)\b")
});
static REFILL_NORMAL: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:normal|brisk|prompt)\s+(?:capillary refill|cap refill|crt)\b")
});

static PULSE_NEG: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\bno (?:palpable )?radial pulses?\b|\bradial pulses? (?:is |are )?(?:absent|not (?:palpable|present|felt))\b|\babsent radial pulses?\b|\b(?:cannot|can't|unable to) (?:feel|palpate|find) (?:a )?radial pulses?\b")
});
static PULSE_POS: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:palpable|present|strong|weak|good|normal|thready) radial pulses?\b|\bradial pulses? (?:is |are )?(?:present|palpable|strong|intact|felt)\b")
});

static OBEY_NEG: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:not|unable to|cannot|can't|does not|doesn't|fails to|failed to|won't|is not able to)\s+(?:follow|obey|respond to)\w*\s+(?:simple |any |basic |verbal )?commands\b|\bunresponsive\b|\bunconscious\b|\bnot responsive\b")
});
static OBEY_POS: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:obey|follow)\w*\s+(?:simple |all |basic |verbal )?commands\b")
});

fn number_value(token: &str) -> Option<f64> {
    let words = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    if let Some(i) = words.iter().position(|w| *w == token) {
        return Some((i + 1) as f64);
    }
    token.parse().ok()
}

fn bound(qualifier: Option<&str>, value: f64) -> Bound {
    match qualifier {
        Some("over" | "above" | "greater than" | "more than" | "longer than" | ">") => Bound::Above(value),
        Some("under" | "below" | "less than" | "<") => Bound::Below(value),
        Some("within") => Bound::AtMost(value),
        _ => Bound::Exactly(value),
    }
}

/// Run `pattern` over `text`, call `f` per match, then blank the matches.
fn take(text: &mut String, pattern: &Regex, mut f: impl FnMut(&regex::Captures<'_>)) {
    let spans: Vec<(usize, usize)> = pattern
        .captures_iter(text)
        .map(|caps| {
            f(&caps);
            let m = caps.get(0).expect("group 0");
            (m.start(), m.end())
        })
        .collect();
    for (start, end) in spans {
        text.replace_range(start..end, &" ".repeat(end - start));
    }
}

pub fn extract_claims(description: &str) -> NarrativeClaims {
    let lower = description.to_lowercase();
    let mut out = NarrativeClaims::default();

    out.age = AGE.captures(&lower).and_then(|caps| {
        (1..=3).find_map(|i| caps.get(i)).and_then(|m| m.as_str().parse().ok())
    });
    out.sex = SEX_ABBREV
        .captures(&lower)
        .map(|caps| if &caps[1] == "m" { Sex::Male } else { Sex::Female })
        .or_else(|| {
            SEX_WORD.captures(&lower).map(|caps| match &caps[1] {
                "male" | "man" | "gentleman" | "boy" | "he" | "him" | "his" => Sex::Male,
                _ => Sex::Female,
            })
        });

    let mut text = lower;
    let claims = &mut out.claims;

    take(&mut text, &WALK_NEG, |_| claims.push(Claim::Ambulatory(false)));
    take(&mut text, &WALK_POS, |_| claims.push(Claim::Ambulatory(true)));

    take(&mut text, &MANEUVER_FAIL, |_| {
        claims.push(Claim::Apneic);
        claims.push(Claim::BreathingAfterManeuver(false));
    });
    take(&mut text, &MANEUVER_OK, |_| claims.push(Claim::BreathingAfterManeuver(true)));
    take(&mut text, &APNEIC, |_| claims.push(Claim::Apneic));

    take(&mut text, &RATE_LABELLED, |caps| {
        if let Some(v) = caps.get(2).and_then(|m| number_value(m.as_str())) {
            claims.push(Claim::RespiratoryRate(bound(caps.get(1).map(|m| m.as_str()), v)));
        }
    });
    take(&mut text, &RATE_UNIT, |caps| {
        if let Some(v) = caps.get(2).and_then(|m| number_value(m.as_str())) {
            claims.push(Claim::RespiratoryRate(bound(caps.get(1).map(|m| m.as_str()), v)));
        }
    });

    take(&mut text, &REFILL_NUMERIC, |caps| {
        if let Some(v) = caps.get(2).and_then(|m| number_value(m.as_str())) {
            claims.push(Claim::CapillaryRefill(bound(caps.get(1).map(|m| m.as_str()), v)));
        }
    });
    take(&mut text, &REFILL_SLOW, |_| claims.push(Claim::CapillaryRefill(Bound::Above(2.0))));
    take(&mut text, &REFILL_NORMAL, |_| claims.push(Claim::CapillaryRefill(Bound::AtMost(2.0))));

    take(&mut text, &PULSE_NEG, |_| claims.push(Claim::RadialPulse(false)));
    take(&mut text, &PULSE_POS, |_| claims.push(Claim::RadialPulse(true)));

    take(&mut text, &OBEY_NEG, |_| claims.push(Claim::ObeysCommands(false)));
    take(&mut text, &OBEY_POS, |_| claims.push(Claim::ObeysCommands(true)));

    claims.dedup();
    out
}

fn contradiction(kind: ContradictionKind, detail: impl Into<String>) -> Contradiction {
    Contradiction { kind, detail: detail.into() }
}

/// Contradictions between extracted claims and the vitals. Fields the
/// narrative never mentions are not checked.
pub fn find_contradictions(description: &str, vitals: &Vitals) -> Vec<Contradiction> {
    use ContradictionKind as K;
    let extracted = extract_claims(description);
    let mut found = Vec::new();

    if extracted.age.is_none() {
        found.push(contradiction(K::MissingAge, "description does not state the patient's age"));
    }
    if extracted.sex.is_none() {
        found.push(contradiction(K::MissingSex, "description does not state the patient's sex"));
    }

    let resp = &vitals.respirations;
    let perf = &vitals.perfusion;
    for claim in &extracted.claims {
        match *claim {
            Claim::Ambulatory(walks) if walks != vitals.can_walk => found.push(contradiction(
                K::Ambulation,
                format!("narrative says ambulatory={walks}, vitals can_walk={}", vitals.can_walk),
            )),
            Claim::Apneic => {
                let breathing = resp.initial_breathing == Some(true)
                    || (resp.initial_breathing.is_none() && resp.rate.is_some_and(|r| r > 0));
                if breathing {
                    found.push(contradiction(K::Breathing, "narrative says not breathing, vitals say breathing"));
                }
            }
            Claim::BreathingAfterManeuver(resumed) => {
                if resp.breathing_after_maneuver == Some(!resumed) || resp.initial_breathing == Some(true) {
                    found.push(contradiction(
                        K::AirwayManeuver,
                        format!("narrative says breathing after maneuver={resumed}, vitals disagree"),
                    ));
                }
            }
            Claim::RespiratoryRate(b) => {
                if let Some(rate) = resp.rate {
                    if !b.admits(rate as f64) {
                        found.push(contradiction(
                            K::RespiratoryRate,
                            format!("narrative rate {b:?}, vitals rate {rate}"),
                        ));
                    }
                }
            }
            Claim::CapillaryRefill(b) => {
                if let Some(secs) = perf.capillary_refill_seconds {
                    if !b.admits(secs) {
                        found.push(contradiction(
                            K::CapillaryRefill,
                            format!("narrative refill {b:?}, vitals refill {secs}"),
                        ));
                    }
                }
            }
            Claim::RadialPulse(present) if perf.radial_pulse_present == Some(!present) => {
                found.push(contradiction(
                    K::RadialPulse,
                    format!("narrative says radial pulse present={present}, vitals disagree"),
                ))
            }
            Claim::ObeysCommands(obeys) if vitals.mental_status.obeys_commands == Some(!obeys) => {
                found.push(contradiction(
                    K::MentalStatus,
                    format!("narrative says obeys commands={obeys}, vitals disagree"),
                ))
            }
            _ => {}
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(desc: &str, v: &Vitals) -> Vec<ContradictionKind> {
        find_contradictions(desc, v).into_iter().map(|c| c.kind).collect()
    }

    #[test]
    fn age_and_sex_forms() {
        let c = extract_claims("44-year-old male with sharp trauma to neck.");
        assert_eq!((c.age, c.sex), (Some(44), Some(Sex::Male)));
        let c = extract_claims("25 y/o M with severe head trauma");
        assert_eq!((c.age, c.sex), (Some(25), Some(Sex::Male)));
        let c = extract_claims("A 70 year old who was trapped. She is calm.");
        assert_eq!((c.age, c.sex), (Some(70), Some(Sex::Female)));
        let c = extract_claims("Patient trapped under debris.");
        assert_eq!((c.age, c.sex), (None, None));
    }

    #[test]
    fn walking_claims_respect_negation() {
        let c = extract_claims("He is unable to walk, but can obey commands.");
        assert_eq!(c.claims, vec![Claim::Ambulatory(false), Claim::ObeysCommands(true)]);
        let c = extract_claims("She cannot stand or walk due to left leg injury");
        assert_eq!(c.claims, vec![Claim::Ambulatory(false)]);
        let c = extract_claims("She is walking around and talking to others");
        assert_eq!(c.claims, vec![Claim::Ambulatory(true)]);
    }

    #[test]
    fn breathing_and_maneuver() {
        let c = extract_claims(
            "She is not breathing. After opening her airway, she begins breathing but her respiratory rate is 32 breaths per minute.",
        );
        assert!(c.claims.contains(&Claim::Apneic));
        assert!(c.claims.contains(&Claim::BreathingAfterManeuver(true)));
        assert!(c.claims.contains(&Claim::RespiratoryRate(Bound::Exactly(32.0))));
        let c = extract_claims("CPR was initiated, but she did not start breathing after opening the airway.");
        assert!(c.claims.contains(&Claim::BreathingAfterManeuver(false)));
        let c = extract_claims("Attempted to open airway but no breathing resumed.");
        assert!(c.claims.contains(&Claim::BreathingAfterManeuver(false)));
        assert!(!c.claims.contains(&Claim::BreathingAfterManeuver(true)));
    }

    #[test]
    fn refill_forms() {
        let c = extract_claims("Capillary refill of four seconds and the patient is not following simple commands.");
        assert_eq!(
            c.claims,
            vec![Claim::CapillaryRefill(Bound::Exactly(4.0)), Claim::ObeysCommands(false)]
        );
        let c = extract_claims("capillary refill is 1 second");
        assert_eq!(c.claims, vec![Claim::CapillaryRefill(Bound::Exactly(1.0))]);
        let c = extract_claims("cap refill under 2 seconds, delayed capillary refill");
        assert!(c.claims.contains(&Claim::CapillaryRefill(Bound::Below(2.0))));
        assert!(c.claims.contains(&Claim::CapillaryRefill(Bound::Above(2.0))));
    }

    #[test]
    fn rate_forms() {
        let c = extract_claims("RR 18. Alert.");
        assert_eq!(c.claims, vec![Claim::RespiratoryRate(Bound::Exactly(18.0))]);
        let c = extract_claims("respiratory rate over 30");
        assert_eq!(c.claims, vec![Claim::RespiratoryRate(Bound::Above(30.0))]);
        let c = extract_claims("breathing at 24 breaths per minute");
        assert_eq!(c.claims, vec![Claim::RespiratoryRate(Bound::Exactly(24.0))]);
    }

    #[test]
    fn ambulation_contradiction() {
        let desc = "22-year-old female with minor scratches on her face and arms. She is walking around and talking to others, complaining only of minor pain.";
        let mut v = Vitals::ambulatory();
        assert!(kinds(desc, &v).is_empty());
        v.can_walk = false;
        assert_eq!(kinds(desc, &v), vec![ContradictionKind::Ambulation]);
    }

    #[test]
    fn rate_contradiction_only_when_field_present() {
        let desc = "30-year-old man, respiratory rate is 32.";
        let mut v = Vitals::default();
        assert!(kinds(desc, &v).is_empty());
        v.respirations.rate = Some(32);
        assert!(kinds(desc, &v).is_empty());
        v.respirations.rate = Some(20);
        assert_eq!(kinds(desc, &v), vec![ContradictionKind::RespiratoryRate]);
    }

    #[test]
    fn missing_demographics_reported() {
        assert_eq!(
            kinds("Trapped under debris.", &Vitals::default()),
            vec![ContradictionKind::MissingAge, ContradictionKind::MissingSex]
        );
    }

    #[test]
    fn pulse_claims() {
        let desc = "50-year-old man with no radial pulse";
        let mut v = Vitals::default();
        v.perfusion.radial_pulse_present = Some(true);
        assert_eq!(kinds(desc, &v), vec![ContradictionKind::RadialPulse]);
        let c = extract_claims("a weak radial pulse is felt");
        assert_eq!(c.claims, vec![Claim::RadialPulse(true)]);
    }
}

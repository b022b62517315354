//! Clinical plausibility rules over [`Vitals`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::triage::Vitals;

pub const PLAUSIBILITY_RULES_VERSION: &str = "plausibility-r1r7/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub struct PlausibilityRule {
    pub id: RuleId,
    pub message: &'static str,
    /// Returns true when the vitals violate the rule.
    pub violated: fn(&Vitals) -> bool,
}

fn ambulatory_incoherent(v: &Vitals) -> bool {
    if !v.can_walk {
        return false;
    }
    let r = &v.respirations;
    let p = &v.perfusion;
    p.radial_pulse_present == Some(false)
        || p.capillary_refill_seconds.is_some_and(|s| s > 2.0)
        || v.mental_status.obeys_commands == Some(false)
        || r.initial_breathing == Some(false)
        || r.rate.is_some_and(|rate| !(10..30).contains(&rate))
}

fn apnea_incoherent(v: &Vitals) -> bool {
    let r = &v.respirations;
    if r.initial_breathing == Some(true) {
        return r.rate == Some(0);
    }
    if r.initial_breathing != Some(false) {
        return false;
    }
    // a rate recorded after a successful maneuver is the post-maneuver rate
    let rate_ok = match r.rate {
        None | Some(0) => true,
        Some(_) => r.breathing_after_maneuver == Some(true),
    };
    !rate_ok || v.can_walk
}

fn maneuver_ungated(v: &Vitals) -> bool {
    v.respirations.breathing_after_maneuver.is_some() && v.respirations.initial_breathing != Some(false)
}

fn deceased_obeys(v: &Vitals) -> bool {
    v.respirations.breathing_after_maneuver == Some(false) && v.mental_status.obeys_commands == Some(true)
}

fn rate_without_breathing(v: &Vitals) -> bool {
    let r = &v.respirations;
    r.rate.is_some_and(|rate| rate > 0)
        && r.initial_breathing == Some(false)
        && r.breathing_after_maneuver != Some(true)
}

fn out_of_bounds(v: &Vitals) -> bool {
    let refill_bad = v
        .perfusion
        .capillary_refill_seconds
        .is_some_and(|s| !(s > 0.0 && s <= 10.0) || !s.is_finite());
    let rate_bad = v.respirations.rate.is_some_and(|r| r > 80);
    refill_bad || rate_bad
}

fn on_boundary(v: &Vitals) -> bool {
    v.respirations.rate == Some(30) || v.perfusion.capillary_refill_seconds == Some(2.0)
}

pub static RULES: [PlausibilityRule; 7] = [
    PlausibilityRule {
        id: RuleId::R1,
        message: "ambulatory patient must have a radial pulse, refill <= 2 s, follow commands, breathe, and have a rate in [10, 30)",
        violated: ambulatory_incoherent,
    },
    PlausibilityRule {
        id: RuleId::R2,
        message: "apneic patient cannot walk and has no rate unless breathing resumed after the maneuver; a breathing patient has a non-zero rate",
        violated: apnea_incoherent,
    },
    PlausibilityRule {
        id: RuleId::R3,
        message: "breathing_after_maneuver is only recorded when initial_breathing is false",
        violated: maneuver_ungated,
    },
    PlausibilityRule {
        id: RuleId::R4,
        message: "patient who stays apneic after the maneuver cannot obey commands",
        violated: deceased_obeys,
    },
    PlausibilityRule {
        id: RuleId::R5,
        message: "positive respiratory rate requires breathing (initially or after the maneuver)",
        violated: rate_without_breathing,
    },
    PlausibilityRule {
        id: RuleId::R6,
        message: "physiological bounds: 0 < refill <= 10 s, 0 <= rate <= 80",
        violated: out_of_bounds,
    },
    PlausibilityRule {
        id: RuleId::R7,
        message: "boundary values rate = 30 and refill = 2.0 s are excluded",
        violated: on_boundary,
    },
];

/// Ids of every rule the vitals violate, in rule order.
pub fn violated_rules(vitals: &Vitals) -> Vec<RuleId> {
    RULES.iter().filter(|rule| (rule.violated)(vitals)).map(|rule| rule.id).collect()
}

pub fn rule(id: RuleId) -> &'static PlausibilityRule {
    &RULES[id as usize]
}

//! Generation prompt template and its placeholder substitution.

use thiserror::Error;

use crate::triage::TriageTag;

/// Instruction template. Placeholders are `{{NAME}}`.
pub const GENERATION_TEMPLATE: &str = r#"You are a structured data generation bot.
Your sole purpose is to output a single raw JSON object and nothing else.
Do NOT act as a medical assistant. Do NOT add any conversational text or explanation.
The JSON object you generate must represent a patient in a disaster scenario.

The JSON format MUST strictly adhere to the following schema. Do NOT add, omit, or change any keys.
- "triage_tag": The requested tag ({{TAG_COLOR}}).
- "patient_description": A single, concise narrative string. This description MUST include the patient's age, sex, the disaster situation, and a summary of the key vital signs that justify the triage tag.
- "vitals_info": A nested JSON object. This data must logically result in the requested triage_tag and be reflected in the patient_description.
- The minimum information required for triage tag determination MUST be included.
- You may ONLY use the following keys:
  - "can_walk" (boolean)
  - "respirations": object with "rate", "initial_breathing", and "breathing_after_maneuver"
  - "perfusion": object with "radial_pulse_present", and "capillary_refill_seconds"
  - "mental_status": object with "obeys_commands"
  - Do not introduce any other keys into the "vitals_info" object.
The values in the "vitals_info" object MUST logically result in the requested triage_tag according to the provided START algorithm.
The minimum information required for triage tag determination MUST be included, but other information may or may not be present.

Here is the algorithm for your reference: {{START_DESCRIPTION}}

Below are some examples of correctly formatted scenarios that follow these rules: {{FEW_SHOT_EXAMPLES}}

Now, generate a patient scenario for the tag: {{TAG_COLOR}}"#;

/// The START decision tree as given to the generator.
pub const START_DESCRIPTION: &str = r#"The START (Simple Triage and Rapid Treatment) method is as follows:
1. Can the patient walk?
   - Yes: Tag as GREEN.
   - No: Proceed to Step 2.
2. Check Respirations.
   - Not breathing: Open airway. If breathing starts, tag as RED. If still not breathing, tag as BLACK.
   - Breathing: Proceed to Step 3.
3. Check Respiratory Rate.
   - Over 30 breaths per minute: Tag as RED.
   - Under 30 breaths per minute: Proceed to Step 4.
4. Check Perfusion.
   - Capillary refill over 2 seconds OR no radial pulse: Tag as RED.
   - Capillary refill under 2 seconds AND radial pulse present: Proceed to Step 5.
5. Check Mental Status.
   - Cannot follow simple commands: Tag as RED.
   - Can follow simple commands: Tag as YELLOW."#;

/// The default few-shot example (a Red case).
pub const DEFAULT_FEW_SHOT: &str = r#"Now, generate a patient scenario for the tag: RED
{
  "triage_tag": "Red",
  "patient_description": "44-year-old male with sharp trauma to neck. Capillary refill of four seconds and the patient is not following simple commands. The patient is dripping blood everywhere. You cannot see if it is pulsatile under the bandages.",
  "vitals_info": {
    "can_walk": false,
    "respirations": { "rate": 28 },
    "perfusion": { "capillary_refill_seconds": 4 },
    "mental_status": { "obeys_commands": false }
  }
}"#;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template has no {{{{{0}}}}} placeholder")]
    MissingPlaceholder(&'static str),
    #[error("template references unknown placeholder {{{{{0}}}}}")]
    UnknownPlaceholder(String),
    #[error("unterminated placeholder at byte {0}")]
    Unterminated(usize),
    #[error("at least one few-shot example is required")]
    NoFewShotExamples,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationPromptSpec {
    pub tag_color: TriageTag,
    pub start_description: String,
    pub few_shot_examples: Vec<String>,
    pub template: String,
}

impl GenerationPromptSpec {
    pub fn for_tag(tag: TriageTag) -> Self {
        GenerationPromptSpec {
            tag_color: tag,
            start_description: START_DESCRIPTION.to_string(),
            few_shot_examples: vec![DEFAULT_FEW_SHOT.to_string()],
            template: GENERATION_TEMPLATE.to_string(),
        }
    }
}

const PLACEHOLDERS: [&str; 3] = ["TAG_COLOR", "START_DESCRIPTION", "FEW_SHOT_EXAMPLES"];

/// Substitute `{{NAME}}` placeholders. Every name in `required` must appear
/// and every placeholder found must have a value.
pub(crate) fn substitute(
    template: &str,
    values: &[(&'static str, &str)],
    required: &[&'static str],
) -> Result<String, TemplateError> {
    for name in required {
        if !template.contains(&format!("{{{{{name}}}}}")) {
            return Err(TemplateError::MissingPlaceholder(name));
        }
    }
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    let mut offset = 0;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or(TemplateError::Unterminated(offset + start))?;
        let name = &after[..end];
        let value = values
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| TemplateError::UnknownPlaceholder(name.to_string()))?;
        out.push_str(value);
        let consumed = start + 2 + end + 2;
        offset += consumed;
        rest = &rest[consumed..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Render the generation prompt for one tag.
pub fn render_generation_prompt(spec: &GenerationPromptSpec) -> Result<String, TemplateError> {
    if spec.few_shot_examples.iter().all(|e| e.trim().is_empty()) {
        return Err(TemplateError::NoFewShotExamples);
    }
    let few_shot = format!("\n{}", spec.few_shot_examples.join("\n\n"));
    let start = format!("\n{}", spec.start_description);
    substitute(
        &spec.template,
        &[
            ("TAG_COLOR", spec.tag_color.as_str()),
            ("START_DESCRIPTION", &start),
            ("FEW_SHOT_EXAMPLES", &few_shot),
        ],
        &PLACEHOLDERS,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn red_prompt_ends_with_request() {
        let prompt = render_generation_prompt(&GenerationPromptSpec::for_tag(TriageTag::Red)).unwrap();
        assert!(prompt.ends_with("generate a patient scenario for the tag: Red"));
        assert!(prompt.contains("\"triage_tag\": The requested tag (Red)."));
        assert!(prompt.contains("Capillary refill over 2 seconds OR no radial pulse: Tag as RED."));
        assert!(!prompt.contains("{{"));
    }

    #[test]
    fn few_shot_required() {
        let mut spec = GenerationPromptSpec::for_tag(TriageTag::Green);
        spec.few_shot_examples.clear();
        assert_eq!(render_generation_prompt(&spec), Err(TemplateError::NoFewShotExamples));
    }

    #[test]
    fn template_must_carry_every_placeholder() {
        let mut spec = GenerationPromptSpec::for_tag(TriageTag::Green);
        spec.template = spec.template.replace("{{START_DESCRIPTION}}", "");
        assert_eq!(
            render_generation_prompt(&spec),
            Err(TemplateError::MissingPlaceholder("START_DESCRIPTION"))
        );
        spec.template = "{{TAG_COLOR}} {{START_DESCRIPTION}} {{FEW_SHOT_EXAMPLES}} {{OTHER}}".into();
        assert_eq!(
            render_generation_prompt(&spec),
            Err(TemplateError::UnknownPlaceholder("OTHER".into()))
        );
        spec.template = "{{TAG_COLOR}} {{START_DESCRIPTION}} {{FEW_SHOT_EXAMPLES}} {{TAIL".into();
        assert!(matches!(render_generation_prompt(&spec), Err(TemplateError::Unterminated(_))));
    }
}

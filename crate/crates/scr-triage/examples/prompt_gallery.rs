//! Walk the five built-in classification prompts: their response schemas,
//! how a record is rendered against one, and the P5 keyword override that
//! forces joint-health-and-safety-committee records to a safety verdict.
//!
//! Run with: `cargo run --example prompt_gallery`

use scr_triage::corpus::ScrRecord;
use scr_triage::prompts::{get_template, keyword_override, render, PromptId};

fn main() -> anyhow::Result<()> {
    println!(
        "{:<6}{:<22}{:<12}system prompt opening",
        "id", "schema", "overrides"
    );
    for id in PromptId::ALL {
        let template = get_template(id);
        let opening: String = template.system_text.chars().take(48).collect();
        println!(
            "{:<6}{:<22}{:<12}{}...",
            template.id.as_str(),
            format!("{:?}", template.schema),
            template.overrides.len(),
            opening.trim_end()
        );
    }

    // Rendering pairs the verbatim system text with the record text; nothing
    // is interpolated into the prompt itself.
    let record = ScrRecord::new(
        "SCR-000123",
        "Worker reported dizziness after exposure to fumes in the pump room.",
        None,
    );
    let rendered = render(get_template(PromptId::P5), &record);
    println!("\nP5 rendered for {}:", record.id);
    println!(
        "  system: {} chars (verbatim template)",
        rendered.system.len()
    );
    println!("  user:   {:?}", rendered.user);

    // The override only applies to P5, only on an exact "JHSC" acronym or a
    // committee phrase, and forces the maximum safety score.
    let cases = [
        "Item raised at the JHSC quarterly walkdown.",
        "Referred to the joint health and safety committee.",
        "Acronym collision: XJHSCX is not a committee.",
        "No committee mentioned at all.",
    ];
    println!("\nP5 keyword override");
    for text in cases {
        let record = ScrRecord::new("SCR-1", text, None);
        match keyword_override(get_template(PromptId::P5), &record) {
            Some(forced) => println!("  forced score {:>5.1}  <- {text}", forced.score),
            None => println!("  not forced         <- {text}"),
        }
    }
    Ok(())
}

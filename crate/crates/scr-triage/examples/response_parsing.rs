//! Show how chat responses are parsed: the first balanced JSON object is
//! extracted even from prose-wrapped or partially malformed replies, flags
//! are case-insensitive, and score schemas enforce their numeric range.
//!
//! Run with: `cargo run --example response_parsing`

use scr_triage::prompts::ResponseSchema;
use scr_triage::runner::parse_response;

fn main() {
    let replies = [
        r#"{"safety": "Y"}"#,
        r#"Sure! Here is my answer: {"safety score": 73, "safety": "y"} Hope that helps."#,
        r#"{oops {"safety score": 15, "safety": "N"} }"#,
        r#"{"safety score": 250, "safety": "Y"}"#,
        r#"{"safety": "maybe"}"#,
        "no json here at all",
    ];

    for schema in [ResponseSchema::YesNo, ResponseSchema::ScorePercentYesNo] {
        println!("schema {schema:?}");
        for raw in replies {
            match parse_response(raw, schema) {
                Ok((flag, score)) => {
                    println!(
                        "  ok   {:<4} {:<10} <- {raw}",
                        flag.as_str(),
                        format!("{score:?}")
                    )
                }
                Err(failure) => println!("  err  {failure} <- {raw}"),
            }
        }
        println!();
    }
}

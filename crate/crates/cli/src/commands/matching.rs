use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use fad_core::matcher::{
    assign_all, read_lexicon_csv, read_lexicon_json, read_mentions_csv, read_mentions_json, EmbeddingLexicon,
    MentionEmbedding, DEFAULT_EPSILON,
};
use serde_json::json;

use crate::run::Run;

#[derive(Args, Debug, Clone)]
pub struct MatchArgs {
    /// Lexicon as CSV (`id,name,v0,v1,...`) or JSON.
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Mentions as CSV (`text,v0,v1,...`) or JSON.
    #[arg(long)]
    pub mentions: PathBuf,
    /// Minimum cosine similarity for an assignment.
    #[arg(long, default_value_t = DEFAULT_EPSILON, allow_negative_numbers = true)]
    pub epsilon: f64,
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn run(ctx: &crate::run::Context, args: MatchArgs) -> Result<()> {
    let mut run = Run::start(ctx, "match")?;
    let bytes = run.input(&args.lexicon)?;
    let lexicon: EmbeddingLexicon = if is_json(&args.lexicon) {
        read_lexicon_json(std::str::from_utf8(&bytes)?)?
    } else {
        read_lexicon_csv(bytes.as_slice())?
    };
    let bytes = run.input(&args.mentions)?;
    let mentions: Vec<MentionEmbedding> = if is_json(&args.mentions) {
        read_mentions_json(std::str::from_utf8(&bytes)?)?
    } else {
        read_mentions_csv(bytes.as_slice())?
    };
    let summary = assign_all(&mentions, &lexicon, args.epsilon)?;
    run.write_json("assignments.json", &summary)?;
    println!(
        "assigned {}/{} mentions at epsilon {}; filtered fraction {:.4}; ties {}",
        summary.mentions - summary.filtered,
        summary.mentions,
        summary.epsilon,
        summary.filtered_fraction,
        summary.ties
    );
    run.finish(
        json!({ "epsilon": args.epsilon }),
        json!({
            "mentions": summary.mentions,
            "filtered": summary.filtered,
            "filtered_fraction": summary.filtered_fraction,
            "ties": summary.ties,
        }),
    )?;
    Ok(())
}

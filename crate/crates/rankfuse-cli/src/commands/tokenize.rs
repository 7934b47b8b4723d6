use std::io::{BufRead, BufWriter, Write};

use clap::Parser;

use rankfuse::tokenize::tokenize;
use rankfuse::{Error, Result};

/// Reads SMILES lines on stdin and writes space-joined tokens per line on
/// stdout (the conventional reaction-transformer preprocessing format).
#[derive(Parser)]
pub struct Args {}

pub fn run(_args: Args) -> Result<()> {
    let stdin = std::io::stdin().lock();
    let mut out = BufWriter::new(std::io::stdout().lock());
    for (idx, line) in stdin.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seq = tokenize(line.trim()).map_err(|e| match e {
            Error::Tokenize { offset, ch } => {
                Error::Data(format!("stdin:{}: unexpected character {ch:?} at byte {offset}", idx + 1))
            }
            other => Error::Data(format!("stdin:{}: {other}", idx + 1)),
        })?;
        writeln!(out, "{}", seq.joined(" "))?;
    }
    out.flush()?;
    Ok(())
}

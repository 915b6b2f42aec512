//! Text checkpoint format.
//!
//! ```text
//! cybergym-policy v1
//! obs_dim <int>
//! action_count <int>
//! hidden <width> <width> ...
//! seed <u64>
//! layer <inputs> <outputs>
//! w <inputs*outputs floats, row-major (output-major)>
//! b <outputs floats>
//! ...
//! ```
//!
//! Layers appear as trunk layers in order, then the policy head, then the
//! value head. Floats use Rust's shortest round-trip formatting, so a
//! checkpoint reloads bit-identically.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::network::{Layer, PolicyParams};
use super::PpoError;

const MAGIC: &str = "cybergym-policy v1";

fn join(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 20);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:?}").expect("writing to a String");
    }
    out
}

pub fn to_text(params: &PolicyParams) -> String {
    let mut out = String::new();
    let hidden: Vec<String> = params.hidden.iter().map(usize::to_string).collect();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "obs_dim {}", params.obs_dim).unwrap();
    writeln!(out, "action_count {}", params.action_count).unwrap();
    writeln!(out, "hidden {}", hidden.join(" ")).unwrap();
    writeln!(out, "seed {}", params.seed).unwrap();
    for layer in &params.layers {
        writeln!(out, "layer {} {}", layer.inputs, layer.outputs).unwrap();
        writeln!(out, "w {}", join(&layer.weights)).unwrap();
        writeln!(out, "b {}", join(&layer.bias)).unwrap();
    }
    out
}

fn field<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str, PpoError> {
    let line = line.ok_or_else(|| PpoError::Checkpoint(format!("missing '{key}' line")))?;
    let rest = line
        .strip_prefix(key)
        .ok_or_else(|| PpoError::Checkpoint(format!("expected '{key}', found '{line}'")))?;
    Ok(rest.trim())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, PpoError> {
    text.split_whitespace()
        .map(|t| t.parse().map_err(|_| PpoError::Checkpoint(format!("bad {what} value '{t}'"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(text: &str, what: &str) -> Result<T, PpoError> {
    text.parse().map_err(|_| PpoError::Checkpoint(format!("bad {what} '{text}'")))
}

pub fn from_text(text: &str) -> Result<PolicyParams, PpoError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(MAGIC) {
        return Err(PpoError::Checkpoint(format!("missing '{MAGIC}' header")));
    }
    let obs_dim = parse_one(field(lines.next(), "obs_dim")?, "obs_dim")?;
    let action_count = parse_one(field(lines.next(), "action_count")?, "action_count")?;
    let hidden: Vec<usize> = parse_list(field(lines.next(), "hidden")?, "hidden")?;
    let seed = parse_one(field(lines.next(), "seed")?, "seed")?;

    let mut params = PolicyParams::init(obs_dim, action_count, &hidden, seed)?;
    for expected in params.layers.iter_mut() {
        let dims: Vec<usize> = parse_list(field(lines.next(), "layer")?, "layer")?;
        if dims != [expected.inputs, expected.outputs] {
            return Err(PpoError::Checkpoint(format!(
                "layer shape {dims:?} does not match [{}, {}]",
                expected.inputs, expected.outputs
            )));
        }
        let weights: Vec<f64> = parse_list(field(lines.next(), "w")?, "weight")?;
        let bias: Vec<f64> = parse_list(field(lines.next(), "b")?, "bias")?;
        if weights.len() != expected.weights.len() || bias.len() != expected.bias.len() {
            return Err(PpoError::Checkpoint("parameter count mismatch".into()));
        }
        *expected = Layer { weights, bias, ..*expected };
    }
    if let Some(extra) = lines.next() {
        return Err(PpoError::Checkpoint(format!("trailing content '{extra}'")));
    }
    Ok(params)
}

pub fn save(params: &PolicyParams, path: &Path) -> std::io::Result<()> {
    fs::write(path, to_text(params))
}

pub fn load(path: &Path) -> Result<PolicyParams, PpoError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PpoError::Checkpoint(format!("{}: {e}", path.display())))?;
    from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_exact(seed in any::<u64>(), obs in 1usize..12, actions in 2usize..6, h in 1usize..9) {
            let p = PolicyParams::init(obs, actions, &[h, h + 1], seed).unwrap();
            prop_assert_eq!(from_text(&to_text(&p)).unwrap(), p);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_text("hello").is_err());
        let p = PolicyParams::init(3, 2, &[4], 1).unwrap();
        let text = to_text(&p);
        let truncated: String = text.lines().take(7).collect::<Vec<_>>().join("\n");
        assert!(from_text(&truncated).is_err());
        assert!(from_text(&format!("{text}extra 1\n")).is_err());
        assert!(text.starts_with("cybergym-policy v1\nobs_dim 3\naction_count 2\nhidden 4\nseed 1\nlayer 3 4\n"));
    }
}

//! Round-stamped text dumps of the full network state.
//!
//! One labeled vector per line: `<round> <label> <v1> <v2> ...`. Labels are
//! `x.i`, `u.i`, `x_hat.i` for agent quantities and `z.i.j`, `s.i.j`,
//! `z_hat.i.j` for the directed edge `(i, j)`. Values use the shortest
//! representation that parses back to the same `f64`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::Vector;

use super::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub round: u64,
    pub vectors: BTreeMap<String, Vector>,
}

impl Snapshot {
    pub(crate) fn capture(net: &Network) -> Self {
        let mut vectors = BTreeMap::new();
        for a in net.agents() {
            let i = a.id;
            vectors.insert(format!("x.{i}"), a.x.clone());
            vectors.insert(format!("u.{i}"), a.u.clone());
            vectors.insert(format!("x_hat.{i}"), a.x_hat.clone());
            for (slot, &j) in a.neighbors.iter().enumerate() {
                vectors.insert(format!("z.{i}.{j}"), a.z[slot].clone());
                vectors.insert(format!("s.{i}.{j}"), a.s[slot].clone());
                vectors.insert(format!("z_hat.{i}.{j}"), a.z_hat[slot].clone());
            }
        }
        Self {
            round: net.round(),
            vectors,
        }
    }

    pub fn get(&self, label: &str) -> Option<&Vector> {
        self.vectors.get(label)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (label, v) in &self.vectors {
            let _ = write!(out, "{} {label}", self.round);
            for x in v.iter() {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }
}

/// Parses one or more concatenated snapshots, grouped by round in order of
/// first appearance.
pub fn parse_snapshots(text: &str) -> Result<Vec<Snapshot>> {
    let mut out: Vec<Snapshot> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let mut fields = line.split_whitespace();
        let round = fields
            .next()
            .unwrap_or_default()
            .parse::<u64>()
            .map_err(|e| bad(format!("bad round: {e}")))?;
        let label = fields
            .next()
            .ok_or_else(|| bad("missing label".into()))?
            .to_string();
        let values = fields
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("bad value: {e}")))?;
        let idx = match out.iter().position(|s| s.round == round) {
            Some(idx) => idx,
            None => {
                out.push(Snapshot {
                    round,
                    vectors: BTreeMap::new(),
                });
                out.len() - 1
            }
        };
        if out[idx]
            .vectors
            .insert(label.clone(), Vector::from_vec(values))
            .is_some()
        {
            return Err(bad(format!("label {label} repeated in round {round}")));
        }
    }
    Ok(out)
}

//! Plain-text weight checkpoints.
//!
//! ```text
//! owc-noma-checkpoint 1
//! nets <count>
//! net <name> <layer-count>
//! layer <input> <output> <activation>
//! w <output*input values, row-major>
//! b <output values>
//! ```
//!
//! Values use Rust's shortest round-trip exponent formatting, so a save/load
//! cycle is exact and identical weights always produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use super::{Activation, DenseNet};
use crate::error::{Error, Result};

const MAGIC: &str = "owc-noma-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub nets: Vec<(String, DenseNet)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, net: &DenseNet) {
        self.nets.push((name.to_string(), net.clone()));
    }

    pub fn get(&self, name: &str) -> Option<&DenseNet> {
        self.nets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, net)| net)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        let _ = writeln!(s, "nets {}", self.nets.len());
        for (name, net) in &self.nets {
            let _ = writeln!(s, "net {name} {}", net.layers().len());
            for (k, layer) in net.layers().iter().enumerate() {
                let _ = writeln!(
                    s,
                    "layer {} {} {}",
                    layer.input,
                    layer.output,
                    layer.activation.name()
                );
                s.push('w');
                for v in net.layer_weights(k) {
                    let _ = write!(s, " {v:e}");
                }
                s.push('\n');
                s.push('b');
                for v in net.layer_biases(k) {
                    let _ = write!(s, " {v:e}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
            let (n, line) = lines.next().ok_or_else(|| {
                Error::Checkpoint(format!("unexpected end of file, wanted {what}"))
            })?;
            Ok((n + 1, line.split_whitespace().collect()))
        };
        let (_, head) = next("header")?;
        if head.len() != 2 || head[0] != MAGIC {
            return Err(Error::Checkpoint("missing checkpoint header".into()));
        }
        if head[1] != VERSION.to_string() {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                head[1]
            )));
        }
        let (ln, count) = next("net count")?;
        let count = parse_tagged_usize(&count, "nets", ln)?;
        let mut nets = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, tok) = next("net")?;
            if tok.len() != 3 || tok[0] != "net" {
                return Err(Error::Checkpoint(format!(
                    "line {ln}: expected `net <name> <layers>`"
                )));
            }
            let name = tok[1].to_string();
            let n_layers: usize = tok[2]
                .parse()
                .map_err(|_| Error::Checkpoint(format!("line {ln}: bad layer count")))?;
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let (ln, tok) = next("layer")?;
                if tok.len() != 4 || tok[0] != "layer" {
                    return Err(Error::Checkpoint(format!(
                        "line {ln}: expected layer header"
                    )));
                }
                let input: usize = tok[1]
                    .parse()
                    .map_err(|_| Error::Checkpoint(format!("line {ln}: bad input")))?;
                let output: usize = tok[2]
                    .parse()
                    .map_err(|_| Error::Checkpoint(format!("line {ln}: bad output")))?;
                let act = Activation::from_name(tok[3]).ok_or_else(|| {
                    Error::Checkpoint(format!("line {ln}: unknown activation {}", tok[3]))
                })?;
                let (ln, w) = next("weights")?;
                let w = parse_values(&w, "w", input * output, ln)?;
                let (ln, b) = next("biases")?;
                let b = parse_values(&b, "b", output, ln)?;
                layers.push((w, b, act));
            }
            nets.push((name, DenseNet::from_layers(layers)?));
        }
        Ok(Self { nets })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse_tagged_usize(tok: &[&str], tag: &str, line: usize) -> Result<usize> {
    if tok.len() != 2 || tok[0] != tag {
        return Err(Error::Checkpoint(format!(
            "line {line}: expected `{tag} <n>`"
        )));
    }
    tok[1]
        .parse()
        .map_err(|_| Error::Checkpoint(format!("line {line}: bad count")))
}

fn parse_values(tok: &[&str], tag: &str, expected: usize, line: usize) -> Result<Vec<f64>> {
    if tok.first() != Some(&tag) {
        return Err(Error::Checkpoint(format!(
            "line {line}: expected `{tag}` row"
        )));
    }
    let vals = tok[1..]
        .iter()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Checkpoint(format!("line {line}: {e}")))?;
    if vals.len() != expected {
        return Err(Error::Checkpoint(format!(
            "line {line}: expected {expected} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DenseNet::init(
            &[5, 7, 3],
            Activation::Relu,
            Activation::Tanh,
            0.01,
            &mut rng,
        );
        let b = DenseNet::init(&[2, 1], Activation::Relu, Activation::Linear, 3.0, &mut rng);
        let mut ck = Checkpoint::new();
        ck.push("actor", &a);
        ck.push("critic", &b);
        let text = ck.to_text();
        let back = Checkpoint::from_text(&text).unwrap();
        assert_eq!(back.get("actor").unwrap().params(), a.params());
        assert_eq!(back.get("critic").unwrap().params(), b.params());
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn malformed_inputs() {
        assert!(Checkpoint::from_text("").is_err());
        assert!(Checkpoint::from_text("owc-noma-checkpoint 2\nnets 0\n").is_err());
        let bad = "owc-noma-checkpoint 1\nnets 1\nnet x 1\nlayer 2 1 relu\nw 1.0\nb 0\n";
        assert!(Checkpoint::from_text(bad).is_err());
    }
}

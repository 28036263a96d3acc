//! Plain-text network dump.
//!
//! ```text
//! dbfl-network 1
//! layers <count>
//! layer <outputs> <inputs> <activation>
//! <row-major weights as hex IEEE-754 bit patterns>
//! <biases as hex bit patterns>
//! ```
//!
//! Parameters are stored as raw bit patterns, so a dump round-trips bitwise.

use std::fmt::Write as _;

use super::matrix::Matrix;
use super::network::{Activation, DenseLayer, DenseNetwork};
use crate::error::{Error, Result};

const MAGIC: &str = "dbfl-network 1";

fn hex_line(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 17);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:016x}", v.to_bits());
    }
    s
}

fn parse_hex_line(line: Option<&str>, expected: usize) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| Error::ModelFormat("truncated parameter block".into()))?;
    let values = line
        .split_whitespace()
        .map(|t| {
            u64::from_str_radix(t, 16)
                .map(f64::from_bits)
                .map_err(|e| Error::ModelFormat(format!("bad parameter {t:?}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != expected {
        return Err(Error::ModelFormat(format!(
            "expected {expected} parameters, found {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn write_network(net: &DenseNetwork) -> String {
    let mut out = format!("{MAGIC}\nlayers {}\n", net.layers().len());
    for l in net.layers() {
        let _ = writeln!(out, "layer {} {} {}", l.outputs(), l.inputs(), l.activation.name());
        out.push_str(&hex_line(l.weights.as_slice()));
        out.push('\n');
        out.push_str(&hex_line(&l.bias));
        out.push('\n');
    }
    out
}

pub fn read_network(text: &str) -> Result<DenseNetwork> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::ModelFormat("missing header".into()));
    }
    let count: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("layers "))
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| Error::ModelFormat("missing layer count".into()))?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let head = lines
            .next()
            .and_then(|l| l.strip_prefix("layer "))
            .ok_or_else(|| Error::ModelFormat("missing layer header".into()))?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        let [outs, ins, act] = parts.as_slice() else {
            return Err(Error::ModelFormat(format!("bad layer header {head:?}")));
        };
        let outs: usize = outs
            .parse()
            .map_err(|_| Error::ModelFormat("bad output count".into()))?;
        let ins: usize = ins.parse().map_err(|_| Error::ModelFormat("bad input count".into()))?;
        let activation =
            Activation::from_name(act).ok_or_else(|| Error::ModelFormat(format!("unknown activation {act:?}")))?;
        let weights = Matrix::new(outs, ins, parse_hex_line(lines.next(), outs * ins)?)?;
        let bias = parse_hex_line(lines.next(), outs)?;
        layers.push(DenseLayer {
            weights,
            bias,
            activation,
        });
    }
    DenseNetwork::new(layers)
}

//! Line-oriented text checkpoints.
//!
//! ```text
//! LSNN-CKPT 1
//! arch 2 4 1
//! layer 1
//! w11 w12 b1
//! ...
//! layer 2
//! ...
//! ```
//!
//! Each neuron row lists its incoming weights followed by its (subtracted)
//! bias, written with 17 significant digits so that reading restores the
//! exact bits.

use std::io::{BufRead, Write};

use super::{Architecture, Network};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "LSNN-CKPT 1";

pub fn write_checkpoint<W: Write>(net: &Network, mut w: W) -> Result<()> {
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    let widths: Vec<String> = net.arch().widths().iter().map(|n| n.to_string()).collect();
    writeln!(w, "arch {}", widths.join(" "))?;
    for k in 0..net.arch().depth() {
        writeln!(w, "layer {}", k + 1)?;
        let (_, n_out) = net.layer_shape(k);
        for i in 0..n_out {
            let row: Vec<String> = net.row(k, i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Network> {
    let mut lines = r.lines().enumerate().filter_map(|(n, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((n + 1, other)),
    });
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(s))) => Ok((n, s)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(Error::Parse(format!("checkpoint ended while reading {what}"))),
        }
    };
    let (_, magic) = next("header")?;
    if magic.trim() != CHECKPOINT_MAGIC {
        return Err(Error::Parse(format!("not a checkpoint: header `{magic}`")));
    }
    let (n, arch_line) = next("architecture")?;
    let widths = arch_line
        .trim()
        .strip_prefix("arch")
        .ok_or_else(|| Error::Parse(format!("line {n}: expected `arch ...`")))?
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Parse(format!("line {n}: bad width")))?;
    let mut net = Network::zeros(Architecture::new(widths)?);
    for k in 0..net.arch().depth() {
        let (n, header) = next("layer header")?;
        if header.trim() != format!("layer {}", k + 1) {
            return Err(Error::Parse(format!("line {n}: expected `layer {}`", k + 1)));
        }
        let (n_in, n_out) = net.layer_shape(k);
        for i in 0..n_out {
            let (n, row) = next("neuron row")?;
            let vals = row
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Parse(format!("line {n}: bad number")))?;
            if vals.len() != n_in + 1 {
                return Err(Error::Parse(format!(
                    "line {n}: expected {} values, found {}",
                    n_in + 1,
                    vals.len()
                )));
            }
            net.row_mut(k, i).copy_from_slice(&vals);
        }
    }
    Ok(net)
}

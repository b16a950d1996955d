//! Flat textual parameter checkpoints.
//!
//! Format (line-oriented, UTF-8):
//!
//! ```text
//! mmrec-checkpoint v1
//! tensors <count>
//! tensor <name> <rows> <cols>
//! <cols space-separated values>      (one line per row)
//! ...
//! ```
//!
//! Values are written with Rust's shortest round-trippable float formatting,
//! so write → read is exact. Tensor order matches the network's parameter
//! walk, and loading into a network matches by name and shape, failing
//! loudly on any mismatch.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::nn::network::Network;

const MAGIC: &str = "mmrec-checkpoint";
const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub tensors: Vec<CheckpointTensor>,
}

impl Checkpoint {
    pub fn from_network(net: &Network) -> Self {
        let mut tensors = Vec::new();
        net.for_each_tensor(&mut |name, t| {
            let (rows, cols) = t.shape();
            tensors.push(CheckpointTensor {
                name: name.to_string(),
                rows,
                cols,
                values: t.as_slice().to_vec(),
            });
        });
        Checkpoint { tensors }
    }

    /// Extra tensors (e.g. anchor latents) can ride along with a network's
    /// parameters under their own names.
    pub fn push(&mut self, name: impl Into<String>, rows: usize, cols: usize, values: Vec<f64>) {
        self.tensors.push(CheckpointTensor {
            name: name.into(),
            rows,
            cols,
            values,
        });
    }

    pub fn find(&self, name: &str) -> Option<&CheckpointTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{} {}", MAGIC, VERSION)?;
        writeln!(w, "tensors {}", self.tensors.len())?;
        for t in &self.tensors {
            writeln!(w, "tensor {} {} {}", t.name, t.rows, t.cols)?;
            for row in t.values.chunks(t.cols.max(1)) {
                let mut line = String::new();
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        line.push(' ');
                    }
                    line.push_str(&format!("{:?}", v));
                }
                writeln!(w, "{}", line)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                }),
                None => Err(Error::Parse {
                    line: 0,
                    msg: format!("unexpected end of checkpoint, expected {}", expect),
                }),
            }
        };

        let (line_no, header) = next("header")?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(Error::Parse {
                line: line_no,
                msg: "not a checkpoint file".into(),
            });
        }
        let version = parts.next().unwrap_or("");
        if version != VERSION {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("unsupported checkpoint version {:?}", version),
            });
        }

        let (line_no, count_line) = next("tensor count")?;
        let count: usize = count_line
            .strip_prefix("tensors ")
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Parse {
                line: line_no,
                msg: "malformed tensor count".into(),
            })?;

        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let (line_no, head) = next("tensor header")?;
            let mut parts = head.split_whitespace();
            let (tag, name, rows, cols) = (
                parts.next(),
                parts.next(),
                parts.next().and_then(|s| s.parse::<usize>().ok()),
                parts.next().and_then(|s| s.parse::<usize>().ok()),
            );
            let (name, rows, cols) = match (tag, name, rows, cols) {
                (Some("tensor"), Some(n), Some(r), Some(c)) => (n.to_string(), r, c),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "malformed tensor header".into(),
                    })
                }
            };
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (line_no, row) = next("tensor row")?;
                for tok in row.split_whitespace() {
                    let v: f64 = tok.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("bad float {:?}", tok),
                    })?;
                    values.push(v);
                }
            }
            if values.len() != rows * cols {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!(
                        "tensor {} has {} values, expected {}",
                        name,
                        values.len(),
                        rows * cols
                    ),
                });
            }
            tensors.push(CheckpointTensor {
                name,
                rows,
                cols,
                values,
            });
        }
        Ok(Checkpoint { tensors })
    }

    /// Loads parameters into `net`, matching by name and shape.
    pub fn apply_to(&self, net: &mut Network) -> Result<()> {
        // Verify every network tensor is present with the right shape first.
        let mut missing = Vec::new();
        net.for_each_tensor(&mut |name, t| match self.find(name) {
            Some(ct) if (ct.rows, ct.cols) == t.shape() => {}
            Some(ct) => missing.push(format!(
                "{}: shape {}x{} vs expected {}x{}",
                name,
                ct.rows,
                ct.cols,
                t.shape().0,
                t.shape().1
            )),
            None => missing.push(format!("{}: absent", name)),
        });
        if !missing.is_empty() {
            return Err(Error::schema(format!(
                "checkpoint does not match network: {}",
                missing.join("; ")
            )));
        }
        net.for_each_tensor_mut(&mut |name, t| {
            let ct = self.tensors.iter().find(|c| c.name == name).unwrap();
            t.copy_from_slice(&ct.values);
        });
        Ok(())
    }
}

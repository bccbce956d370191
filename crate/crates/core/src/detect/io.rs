//! Line-based model files.
//!
//! ```text
//! dummyscan-model 1
//! arch <tag>
//! config <json>
//! seed <u64>
//! final_epoch <n>
//! classes idle iot_service mirai
//! scaler <len>
//! means <values>
//! stds <values>
//! constant <0|1 ...>
//! tensors <count>
//! tensor <name> <dims...>
//! <values>
//! ...
//! end
//! ```
//!
//! Reals are written in shortest round-trip form, so a save/load cycle
//! reproduces every weight bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{Arch, DetectorConfig};
use super::model::DetectorModel;
use super::nets::Net;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::features::Scaler;
use crate::rng::stream;
use crate::tracegen::ClassLabel;

pub const MODEL_MAGIC: &str = "dummyscan-model";
pub const MODEL_VERSION: u32 = 1;

fn join(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v:e}").expect("string write");
    }
    s
}

pub fn model_to_string(model: &DetectorModel) -> String {
    let mut out = String::new();
    let config = serde_json::to_string(&model.config).expect("config serializes");
    let classes: Vec<&str> = ClassLabel::ALL.iter().map(|c| c.as_str()).collect();
    let constant: Vec<&str> = model.scaler.constant.iter().map(|&c| if c { "1" } else { "0" }).collect();
    writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}").unwrap();
    writeln!(out, "arch {}", model.arch()).unwrap();
    writeln!(out, "config {config}").unwrap();
    writeln!(out, "seed {}", model.config.seed).unwrap();
    writeln!(out, "final_epoch {}", model.final_epoch).unwrap();
    writeln!(out, "classes {}", classes.join(" ")).unwrap();
    writeln!(out, "scaler {}", model.scaler.len()).unwrap();
    writeln!(out, "means {}", join(&model.scaler.means)).unwrap();
    writeln!(out, "stds {}", join(&model.scaler.stds)).unwrap();
    writeln!(out, "constant {}", constant.join(" ")).unwrap();
    let params = model.net.named_params();
    writeln!(out, "tensors {}", params.len()).unwrap();
    for (name, t) in params {
        let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
        writeln!(out, "tensor {name} {}", dims.join(" ")).unwrap();
        writeln!(out, "{}", join(&t.data)).unwrap();
    }
    out.push_str("end\n");
    out
}

pub fn save_model(model: &DetectorModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

struct Lines<'a> {
    path: PathBuf,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::format(&self.path, self.line, msg)
    }

    fn next(&mut self) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => {
                self.line += 1;
                Err(self.err("unexpected end of file"))
            }
        }
    }

    /// Next line, which must start with `key`; returns the remainder.
    fn field(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        match l.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest),
            _ if l == key => Ok(""),
            _ => Err(self.err(format!("expected '{key}' line"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.trim().parse().map_err(|_| self.err(format!("invalid {what}: '{s}'")))
    }

    fn reals(&self, s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
        let v: Vec<f64> = s.split_ascii_whitespace().map(|t| self.parse(t, what)).collect::<Result<_>>()?;
        if v.len() != n {
            return Err(self.err(format!("{what}: expected {n} values, found {}", v.len())));
        }
        Ok(v)
    }
}

pub fn model_from_str(text: &str, path: &Path) -> Result<DetectorModel> {
    let mut lines = Lines { path: path.to_path_buf(), iter: text.lines().enumerate(), line: 0 };
    let version: u32 = {
        let v = lines.field(MODEL_MAGIC)?;
        lines.parse(v, "format version")?
    };
    if version != MODEL_VERSION {
        return Err(lines.err(format!("unsupported model format version {version} (expected {MODEL_VERSION})")));
    }
    let arch: Arch = {
        let a = lines.field("arch")?;
        a.parse().map_err(|_| lines.err(format!("unknown arch tag '{a}'")))?
    };
    let config: DetectorConfig = {
        let c = lines.field("config")?;
        serde_json::from_str(c).map_err(|e| lines.err(format!("invalid config: {e}")))?
    };
    if config.arch != arch {
        return Err(lines.err(format!("config arch {} disagrees with header arch {arch}", config.arch)));
    }
    config.validate().map_err(|e| lines.err(e.to_string()))?;
    let seed: u64 = {
        let s = lines.field("seed")?;
        lines.parse(s, "seed")?
    };
    if seed != config.seed {
        return Err(lines.err("seed disagrees with config"));
    }
    let final_epoch: usize = {
        let s = lines.field("final_epoch")?;
        lines.parse(s, "final_epoch")?
    };
    let classes = lines.field("classes")?;
    let expected: Vec<&str> = ClassLabel::ALL.iter().map(|c| c.as_str()).collect();
    if classes.split_ascii_whitespace().collect::<Vec<_>>() != expected {
        return Err(lines.err(format!("unexpected class order '{classes}'")));
    }
    let n: usize = {
        let s = lines.field("scaler")?;
        lines.parse(s, "scaler length")?
    };
    let means = {
        let s = lines.field("means")?;
        lines.reals(s, n, "scaler means")?
    };
    let stds = {
        let s = lines.field("stds")?;
        lines.reals(s, n, "scaler stds")?
    };
    let constant: Vec<bool> = {
        let s = lines.field("constant")?;
        let flags: Vec<bool> = s
            .split_ascii_whitespace()
            .map(|t| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(lines.err(format!("invalid constant flag '{t}'"))),
            })
            .collect::<Result<_>>()?;
        if flags.len() != n {
            return Err(lines.err(format!("scaler constant flags: expected {n}, found {}", flags.len())));
        }
        flags
    };
    if stds.iter().any(|&s| !(s > 0.0)) {
        return Err(lines.err("scaler stds must be positive"));
    }

    let count: usize = {
        let s = lines.field("tensors")?;
        lines.parse(s, "tensor count")?
    };
    let mut read: BTreeMap<String, (Tensor, usize)> = BTreeMap::new();
    for _ in 0..count {
        let head = lines.field("tensor")?;
        let mut parts = head.split_ascii_whitespace();
        let name = parts.next().ok_or_else(|| lines.err("tensor without a name"))?.to_owned();
        let shape: Vec<usize> = parts.map(|d| lines.parse(d, "tensor dimension")).collect::<Result<_>>()?;
        let at = lines.line;
        let body = lines.next()?;
        let data = lines.reals(body, shape.iter().product(), &format!("tensor {name}"))?;
        if read.insert(name.clone(), (Tensor { shape, data }, at)).is_some() {
            return Err(lines.err(format!("duplicate tensor {name}")));
        }
    }
    if lines.next()? != "end" {
        return Err(lines.err("expected 'end'"));
    }

    let mut net = Net::new(&config, &mut stream(0, &[]));
    let expected: Vec<(String, Vec<usize>)> =
        net.named_params().into_iter().map(|(n, t)| (n, t.shape.clone())).collect();
    for ((name, shape), slot) in expected.iter().zip(net.params_mut()) {
        let (t, at) = read.remove(name).ok_or_else(|| lines.err(format!("missing tensor {name}")))?;
        if &t.shape != shape {
            return Err(Error::format(path, at, format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape)));
        }
        *slot = t;
    }
    if let Some(name) = read.keys().next() {
        return Err(lines.err(format!("unexpected tensor {name} for arch {arch}")));
    }
    Ok(DetectorModel { config, scaler: Scaler { means, stds, constant }, net, final_epoch })
}

pub fn load_model(path: &Path) -> Result<DetectorModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text, path)
}

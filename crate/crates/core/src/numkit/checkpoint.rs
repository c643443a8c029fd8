//! Plain-text network checkpoints.
//!
//! ```text
//! FDCKPT v1
//! 3 64 64 2 tanh
//! <one line per weight row, then one line for the bias, layer by layer>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::mlp::{Activation, Mlp};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "FDCKPT v1";

pub fn to_string(mlp: &Mlp) -> String {
    let mut s = String::new();
    s.push_str(CHECKPOINT_MAGIC);
    s.push('\n');
    let dims: Vec<String> = mlp.dims().iter().map(usize::to_string).collect();
    let _ = writeln!(s, "{} {}", dims.join(" "), mlp.activation());
    let line = |vals: &[f64], s: &mut String| {
        let parts: Vec<String> = vals.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&parts.join(" "));
        s.push('\n');
    };
    for l in 0..mlp.num_layers() {
        let fi = mlp.dims()[l];
        let (w, b) = mlp.layer(l);
        for row in w.chunks(fi) {
            line(row, &mut s);
        }
        line(b, &mut s);
    }
    s
}

pub fn from_str(text: &str) -> Result<Mlp> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == CHECKPOINT_MAGIC => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{CHECKPOINT_MAGIC}`"),
            })
        }
    }
    let (idx, spec) = lines.next().ok_or(Error::Parse {
        line: 2,
        message: "missing layer specification".into(),
    })?;
    let mut fields: Vec<&str> = spec.split_whitespace().collect();
    let act_name = fields.pop().ok_or(Error::Parse {
        line: idx + 1,
        message: "empty layer specification".into(),
    })?;
    let activation: Activation = act_name.parse().map_err(|e: Error| Error::Parse {
        line: idx + 1,
        message: e.to_string(),
    })?;
    let dims = fields
        .iter()
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("bad layer width: {e}"),
        })?;
    let mut params = Vec::new();
    for (idx, l) in lines {
        for tok in l.split_whitespace() {
            params.push(tok.parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad parameter `{tok}`: {e}"),
            })?);
        }
    }
    Mlp::from_params(&dims, activation, params)
}

pub fn save(mlp: &Mlp, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, to_string(mlp))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Mlp> {
    let text = fs::read_to_string(path).map_err(|source| Error::Path {
        path: path.to_path_buf(),
        source,
    })?;
    from_str(&text)
}

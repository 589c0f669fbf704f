//! alist text format for parity-check matrices.
//!
//! ```text
//! n C
//! max_var_degree max_check_degree
//! var degrees (n values)
//! check degrees (C values)
//! n lines: checks of each variable, 1-indexed
//! C lines: variables of each check, 1-indexed
//! ```
//!
//! Writing never pads adjacency lines; reading accepts zero padding.

use std::fs;
use std::path::Path;

use crate::code::LinearCode;
use crate::error::{Error, Result};

pub fn to_alist(code: &LinearCode) -> String {
    let n = code.n();
    let c = code.num_checks();
    let var_deg: Vec<usize> = (0..n).map(|v| code.var_neighbors(v).len()).collect();
    let chk_deg: Vec<usize> = (0..c).map(|k| code.check_neighbors(k).len()).collect();
    let join = |xs: &mut dyn Iterator<Item = usize>| {
        xs.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
    };

    let mut out = String::new();
    out.push_str(&format!("{n} {c}\n"));
    out.push_str(&format!(
        "{} {}\n",
        var_deg.iter().max().copied().unwrap_or(0),
        chk_deg.iter().max().copied().unwrap_or(0)
    ));
    out.push_str(&join(&mut var_deg.iter().copied()));
    out.push('\n');
    out.push_str(&join(&mut chk_deg.iter().copied()));
    out.push('\n');
    for v in 0..n {
        out.push_str(&join(&mut code.var_neighbors(v).iter().map(|x| x + 1)));
        out.push('\n');
    }
    for k in 0..c {
        out.push_str(&join(&mut code.check_neighbors(k).iter().map(|x| x + 1)));
        out.push('\n');
    }
    out
}

pub fn save_alist(code: &LinearCode, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_alist(code))?;
    Ok(())
}

pub fn load_alist(path: impl AsRef<Path>) -> Result<LinearCode> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "alist".to_string());
    parse_alist(&text, name)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-blank line as integers, with its 1-based line number.
    fn next_numbers(&mut self, what: &str) -> Result<(usize, Vec<usize>)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::parse(i + 1, format!("bad integer {t:?} in {what}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((i + 1, nums));
        }
        Err(Error::parse(
            self.last + 1,
            format!("unexpected end of file, expected {what}"),
        ))
    }
}

pub fn parse_alist(text: &str, name: impl Into<String>) -> Result<LinearCode> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };

    let (ln, dims) = lines.next_numbers("dimensions")?;
    let [n, c] = dims[..] else {
        return Err(Error::parse(ln, "expected \"n C\""));
    };
    if n == 0 || c == 0 {
        return Err(Error::parse(ln, "dimensions must be positive"));
    }
    let (ln, maxd) = lines.next_numbers("maximum degrees")?;
    let [max_var, max_chk] = maxd[..] else {
        return Err(Error::parse(ln, "expected two maximum degrees"));
    };
    let (ln, var_deg) = lines.next_numbers("variable degrees")?;
    if var_deg.len() != n {
        return Err(Error::parse(ln, format!("expected {n} variable degrees")));
    }
    if var_deg.iter().any(|&d| d > max_var) {
        return Err(Error::parse(ln, "variable degree exceeds declared maximum"));
    }
    let (ln, chk_deg) = lines.next_numbers("check degrees")?;
    if chk_deg.len() != c {
        return Err(Error::parse(ln, format!("expected {c} check degrees")));
    }
    if chk_deg.iter().any(|&d| d > max_chk) {
        return Err(Error::parse(ln, "check degree exceeds declared maximum"));
    }

    let mut h = vec![vec![0u8; n]; c];
    for (v, &deg) in var_deg.iter().enumerate() {
        let (ln, list) = lines.next_numbers("variable adjacency")?;
        let list: Vec<usize> = list.into_iter().filter(|&x| x != 0).collect();
        if list.len() != deg {
            return Err(Error::parse(
                ln,
                format!(
                    "variable {} lists {} checks, degree is {deg}",
                    v + 1,
                    list.len()
                ),
            ));
        }
        for chk in list {
            if chk > c {
                return Err(Error::parse(ln, format!("check index {chk} out of range")));
            }
            h[chk - 1][v] = 1;
        }
    }
    for (k, &deg) in chk_deg.iter().enumerate() {
        let (ln, list) = lines.next_numbers("check adjacency")?;
        let list: Vec<usize> = list.into_iter().filter(|&x| x != 0).collect();
        if list.len() != deg {
            return Err(Error::parse(
                ln,
                format!(
                    "check {} lists {} variables, degree is {deg}",
                    k + 1,
                    list.len()
                ),
            ));
        }
        let mut seen = vec![false; n + 1];
        for var in list {
            if var > n || h[k][var - 1] != 1 || std::mem::replace(&mut seen[var], true) {
                return Err(Error::parse(
                    ln,
                    format!("check {} entry {var} disagrees with variable lists", k + 1),
                ));
            }
        }
    }

    LinearCode::from_parity_check(name, h).map_err(|e| Error::parse(lines.last, e.to_string()))
}

//! The `LRSDP 1` plain-text problem format.
//!
//! ```text
//! LRSDP 1
//! cones <lp_dim> <psd_order>
//! constraints <m>
//! cost <nnz>
//! <col> <value>          (nnz lines)
//! rows <nnz>
//! <row> <col> <value>    (nnz lines)
//! rhs
//! <b_0> ... <b_{m-1}>    (whitespace separated, any line breaks)
//! truth <n> <r>          (optional)
//! <G row>                (n lines of r values)
//! ```
//!
//! Columns index the stacked primal vector `[lp | svec]`. Lines starting with `#` and blank
//! lines are ignored. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::cones::ConeLayout;
use crate::error::{Error, Result};
use crate::ipm::ConicProgram;
use crate::operator::SparseOperator;

pub const HEADER: &str = "LRSDP 1";

/// A parsed problem file.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub program: ConicProgram,
    /// Ground-truth factor `G` with `X★ = GGᵀ`, when embedded.
    pub truth: Option<DMatrix<f64>>,
}

pub fn write_problem(prog: &ConicProgram, truth: Option<&DMatrix<f64>>) -> String {
    let layout = prog.layout();
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "cones {} {}", layout.lp_dim, layout.psd_order);
    let _ = writeln!(s, "constraints {}", prog.m());
    let cost: Vec<(usize, f64)> = prog.cost.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
    let _ = writeln!(s, "cost {}", cost.len());
    for (c, v) in cost {
        let _ = writeln!(s, "{c} {v:e}");
    }
    let t = prog.op.triplets();
    let _ = writeln!(s, "rows {}", t.len());
    for (r, c, v) in t {
        let _ = writeln!(s, "{r} {c} {v:e}");
    }
    let _ = writeln!(s, "rhs");
    for v in &prog.b {
        let _ = writeln!(s, "{v:e}");
    }
    if let Some(g) = truth {
        let _ = writeln!(s, "truth {} {}", g.nrows(), g.ncols());
        for i in 0..g.nrows() {
            let row: Vec<String> = (0..g.ncols()).map(|j| format!("{:e}", g[(i, j)])).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    s
}

pub fn save_problem(path: &Path, prog: &ConicProgram, truth: Option<&DMatrix<f64>>) -> Result<()> {
    std::fs::write(path, write_problem(prog, truth))?;
    Ok(())
}

pub fn load_problem(path: &Path) -> Result<ProblemFile> {
    parse_problem(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.last = i + 1;
            return Some((i + 1, line.split_whitespace().collect()));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        let last = self.last;
        self.next_line().ok_or_else(|| perr(last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn keyword(&mut self, key: &str, nargs: usize) -> Result<(usize, Vec<&'a str>)> {
        let (ln, toks) = self.expect(key)?;
        if toks[0] != key || toks.len() != nargs + 1 {
            return Err(perr(ln, format!("expected `{key}` with {nargs} argument(s)")));
        }
        Ok((ln, toks[1..].to_vec()))
    }
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn num<T: std::str::FromStr>(ln: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| perr(ln, format!("cannot parse `{tok}`")))
}

pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let (ln, toks) = lines.expect("header")?;
    if toks.join(" ") != HEADER {
        return Err(perr(ln, format!("missing `{HEADER}` header")));
    }
    let (ln, a) = lines.keyword("cones", 2)?;
    let layout = ConeLayout::new(num(ln, a[0])?, num(ln, a[1])?).map_err(|e| perr(ln, e.to_string()))?;
    let dim = layout.dim();
    let (ln, a) = lines.keyword("constraints", 1)?;
    let m: usize = num(ln, a[0])?;

    let (ln, a) = lines.keyword("cost", 1)?;
    let nnz: usize = num(ln, a[0])?;
    let mut cost = vec![0.0; dim];
    for _ in 0..nnz {
        let (ln, t) = lines.expect("cost entry")?;
        if t.len() != 2 {
            return Err(perr(ln, "cost entry needs `col value`"));
        }
        let c: usize = num(ln, t[0])?;
        if c >= dim {
            return Err(perr(ln, format!("cost column {c} out of range")));
        }
        cost[c] += num::<f64>(ln, t[1])?;
    }

    let (ln, a) = lines.keyword("rows", 1)?;
    let nnz: usize = num(ln, a[0])?;
    let mut triplets = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (ln, t) = lines.expect("constraint entry")?;
        if t.len() != 3 {
            return Err(perr(ln, "constraint entry needs `row col value`"));
        }
        let (r, c): (usize, usize) = (num(ln, t[0])?, num(ln, t[1])?);
        if r >= m || c >= dim {
            return Err(perr(ln, format!("entry ({r}, {c}) out of range")));
        }
        triplets.push((r, c, num::<f64>(ln, t[2])?));
    }

    let (rhs_ln, _) = lines.keyword("rhs", 0)?;
    let mut b = Vec::with_capacity(m);
    while b.len() < m {
        let (ln, t) = lines.expect("rhs values")?;
        for tok in t {
            b.push(num::<f64>(ln, tok)?);
        }
    }
    if b.len() != m {
        return Err(perr(lines.last, format!("rhs has {} values, expected {m}", b.len())));
    }

    let mut truth = None;
    if let Some((ln, t)) = lines.next_line() {
        if t[0] != "truth" || t.len() != 3 {
            return Err(perr(ln, "expected `truth n r` or end of file"));
        }
        let (n, r): (usize, usize) = (num(ln, t[1])?, num(ln, t[2])?);
        let mut g = DMatrix::zeros(n, r);
        for i in 0..n {
            let (ln, row) = lines.expect("truth row")?;
            if row.len() != r {
                return Err(perr(ln, format!("truth row needs {r} values")));
            }
            for (j, tok) in row.iter().enumerate() {
                g[(i, j)] = num(ln, tok)?;
            }
        }
        if let Some((ln, _)) = lines.next_line() {
            return Err(perr(ln, "trailing content"));
        }
        truth = Some(g);
    }

    let op = SparseOperator::from_triplets(layout, m, &triplets).map_err(|e| perr(rhs_ln, e.to_string()))?;
    let program = ConicProgram::new(Arc::new(op), b, cost).map_err(|e| perr(rhs_ln, e.to_string()))?;
    Ok(ProblemFile { program, truth })
}

//! Problem data: a free vector variable `w`, scalar linear rows, and
//! symmetric matrix-valued affine maps constrained to be PSD or zero.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::ConicError;

/// A sparse linear row `<a, w>` together with its right-hand side.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * w[j]).sum()
    }
}

/// One nonzero of the linear part of a [`MatrixMap`]: the entry
/// `(row, col)` (and its mirror) receives `coef * w[var]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixEntry {
    pub row: usize,
    pub col: usize,
    pub var: usize,
    pub coef: f64,
}

/// Symmetric affine map `w -> F0 + sum_j w_j F_j`.
///
/// Only the upper triangle (`row <= col`) is stored; the lower triangle is
/// implied by symmetry. Repeated `(row, col, var)` triples are summed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatrixMap {
    pub size: usize,
    pub entries: Vec<MatrixEntry>,
    pub constant: Vec<(usize, usize, f64)>,
}

impl MatrixMap {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            entries: Vec::new(),
            constant: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, var: usize, coef: f64) {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        self.entries.push(MatrixEntry { row, col, var, coef });
    }

    pub fn push_constant(&mut self, row: usize, col: usize, value: f64) {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        self.constant.push((row, col, value));
    }

    /// Full symmetric matrix at `w`.
    pub fn evaluate(&self, w: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant_matrix();
        for e in &self.entries {
            let v = e.coef * w[e.var];
            m[(e.row, e.col)] += v;
            if e.row != e.col {
                m[(e.col, e.row)] += v;
            }
        }
        m
    }

    /// Linear part only (`F0` dropped).
    pub fn evaluate_linear(&self, w: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for e in &self.entries {
            let v = e.coef * w[e.var];
            m[(e.row, e.col)] += v;
            if e.row != e.col {
                m[(e.col, e.row)] += v;
            }
        }
        m
    }

    pub fn constant_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for &(r, c, v) in &self.constant {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        m
    }

    /// Adjoint of the linear part: `g_j = <Z, F_j>` accumulated into `out`.
    pub fn adjoint_into(&self, z: &DMatrix<f64>, scale: f64, out: &mut [f64]) {
        for e in &self.entries {
            let zz = if e.row == e.col {
                z[(e.row, e.col)]
            } else {
                z[(e.row, e.col)] + z[(e.col, e.row)]
            };
            out[e.var] += scale * e.coef * zz;
        }
    }

    /// `<Z, F0>`.
    pub fn constant_pairing(&self, z: &DMatrix<f64>) -> f64 {
        self.constant
            .iter()
            .map(|&(r, c, v)| {
                if r == c {
                    v * z[(r, c)]
                } else {
                    v * (z[(r, c)] + z[(c, r)])
                }
            })
            .sum()
    }
}

/// Linear conic program
///
/// ```text
/// minimize    <c, w>
/// subject to  <a_i, w>  = b_i        (eq_rows)
///             <a_i, w> >= b_i        (ineq_rows)
///             F_j(w)   PSD           (psd_blocks)
///             G_j(w)   = 0           (zero_blocks)
/// ```
/// over a free vector `w` of length `dim`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicProgram {
    pub dim: usize,
    pub objective: Vec<f64>,
    pub eq_rows: Vec<LinearRow>,
    pub ineq_rows: Vec<LinearRow>,
    pub psd_blocks: Vec<MatrixMap>,
    pub zero_blocks: Vec<MatrixMap>,
}

impl ConicProgram {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            objective: vec![0.0; dim],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.dim == 0 {
            return Err(ConicError::EmptyProgram);
        }
        if self.objective.len() != self.dim {
            return Err(ConicError::DimensionMismatch {
                what: "objective",
                expected: self.dim,
                found: self.objective.len(),
            });
        }
        let rows = self.eq_rows.iter().chain(&self.ineq_rows);
        for row in rows {
            for &(j, a) in &row.coeffs {
                if j >= self.dim {
                    return Err(ConicError::IndexOutOfRange {
                        index: j,
                        dim: self.dim,
                    });
                }
                if !a.is_finite() {
                    return Err(ConicError::NonFinite("row coefficient"));
                }
            }
            if !row.rhs.is_finite() {
                return Err(ConicError::NonFinite("row right-hand side"));
            }
        }
        for map in self.psd_blocks.iter().chain(&self.zero_blocks) {
            if map.size == 0 {
                return Err(ConicError::EmptyBlock);
            }
            for e in &map.entries {
                if e.var >= self.dim {
                    return Err(ConicError::IndexOutOfRange {
                        index: e.var,
                        dim: self.dim,
                    });
                }
                if e.row >= map.size || e.col >= map.size {
                    return Err(ConicError::IndexOutOfRange {
                        index: e.row.max(e.col),
                        dim: map.size,
                    });
                }
                if !e.coef.is_finite() {
                    return Err(ConicError::NonFinite("block coefficient"));
                }
            }
            for &(r, c, v) in &map.constant {
                if r >= map.size || c >= map.size {
                    return Err(ConicError::IndexOutOfRange {
                        index: r.max(c),
                        dim: map.size,
                    });
                }
                if !v.is_finite() {
                    return Err(ConicError::NonFinite("block constant"));
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(ConicError::NonFinite("objective"));
        }
        Ok(())
    }

    pub fn objective_value(&self, w: &[f64]) -> f64 {
        self.objective.iter().zip(w).map(|(c, x)| c * x).sum()
    }

    /// Sparse text dump, one nonzero per line:
    ///
    /// ```text
    /// <block> <i> <j> <w-index|const> <coefficient>
    /// ```
    ///
    /// Blocks are `obj`, `eq<r>`, `ge<r>`, `psd<b>` and `zero<b>`. Scalar
    /// rows use `i = j = 0`; right-hand sides and matrix constants use the
    /// `const` index. Comment lines start with `#` and carry the dimension
    /// and block sizes.
    pub fn to_sparse_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# gtmp-conic sparse dump v1");
        let _ = writeln!(out, "# dim {}", self.dim);
        for (b, m) in self.psd_blocks.iter().enumerate() {
            let _ = writeln!(out, "# psd{} size {}", b, m.size);
        }
        for (b, m) in self.zero_blocks.iter().enumerate() {
            let _ = writeln!(out, "# zero{} size {}", b, m.size);
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = writeln!(out, "obj 0 0 {} {:e}", j, c);
            }
        }
        for (tag, rows) in [("eq", &self.eq_rows), ("ge", &self.ineq_rows)] {
            for (r, row) in rows.iter().enumerate() {
                for &(j, a) in &row.coeffs {
                    let _ = writeln!(out, "{}{} 0 0 {} {:e}", tag, r, j, a);
                }
                let _ = writeln!(out, "{}{} 0 0 const {:e}", tag, r, row.rhs);
            }
        }
        for (tag, blocks) in [("psd", &self.psd_blocks), ("zero", &self.zero_blocks)] {
            for (b, m) in blocks.iter().enumerate() {
                for e in &m.entries {
                    let _ = writeln!(out, "{}{} {} {} {} {:e}", tag, b, e.row, e.col, e.var, e.coef);
                }
                for &(r, c, v) in &m.constant {
                    let _ = writeln!(out, "{}{} {} {} const {:e}", tag, b, r, c, v);
                }
            }
        }
        out
    }

    /// Parse the format written by [`ConicProgram::to_sparse_text`].
    pub fn from_sparse_text(text: &str) -> Result<Self, ConicError> {
        let bad = |line: usize, msg: &str| ConicError::Dump {
            line: line + 1,
            message: msg.to_string(),
        };
        let mut prog = ConicProgram::default();
        let mut have_dim = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                match toks.as_slice() {
                    ["dim", d] => {
                        let dim: usize = d.parse().map_err(|_| bad(ln, "bad dim"))?;
                        prog.dim = dim;
                        prog.objective = vec![0.0; dim];
                        have_dim = true;
                    }
                    [name, "size", s] => {
                        let size: usize = s.parse().map_err(|_| bad(ln, "bad block size"))?;
                        let (list, idx) = block_slot(&mut prog, name).ok_or_else(|| bad(ln, "bad block name"))?;
                        if list.len() <= idx {
                            list.resize(idx + 1, MatrixMap::default());
                        }
                        list[idx].size = size;
                    }
                    _ => {}
                }
                continue;
            }
            if !have_dim {
                return Err(bad(ln, "data before '# dim' header"));
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 5 {
                return Err(bad(ln, "expected 5 fields"));
            }
            let i: usize = toks[1].parse().map_err(|_| bad(ln, "bad row index"))?;
            let j: usize = toks[2].parse().map_err(|_| bad(ln, "bad column index"))?;
            let var: Option<usize> = if toks[3] == "const" {
                None
            } else {
                Some(toks[3].parse().map_err(|_| bad(ln, "bad variable index"))?)
            };
            let val: f64 = toks[4].parse().map_err(|_| bad(ln, "bad coefficient"))?;
            let name = toks[0];
            if name == "obj" {
                let v = var.ok_or_else(|| bad(ln, "objective has no constant"))?;
                if v >= prog.dim {
                    return Err(bad(ln, "objective index out of range"));
                }
                prog.objective[v] = val;
            } else if let Some(r) = name.strip_prefix("eq") {
                let r: usize = r.parse().map_err(|_| bad(ln, "bad row name"))?;
                push_row(&mut prog.eq_rows, r, var, val);
            } else if let Some(r) = name.strip_prefix("ge") {
                let r: usize = r.parse().map_err(|_| bad(ln, "bad row name"))?;
                push_row(&mut prog.ineq_rows, r, var, val);
            } else {
                let (list, idx) = block_slot(&mut prog, name).ok_or_else(|| bad(ln, "unknown block"))?;
                if list.len() <= idx {
                    list.resize(idx + 1, MatrixMap::default());
                }
                match var {
                    Some(v) => list[idx].entries.push(MatrixEntry {
                        row: i,
                        col: j,
                        var: v,
                        coef: val,
                    }),
                    None => list[idx].constant.push((i, j, val)),
                }
            }
        }
        prog.validate()?;
        Ok(prog)
    }
}

fn push_row(rows: &mut Vec<LinearRow>, r: usize, var: Option<usize>, val: f64) {
    if rows.len() <= r {
        rows.resize(r + 1, LinearRow::default());
    }
    match var {
        Some(v) => rows[r].coeffs.push((v, val)),
        None => rows[r].rhs = val,
    }
}

fn block_slot<'a>(prog: &'a mut ConicProgram, name: &str) -> Option<(&'a mut Vec<MatrixMap>, usize)> {
    if let Some(b) = name.strip_prefix("psd") {
        Some((&mut prog.psd_blocks, b.parse().ok()?))
    } else if let Some(b) = name.strip_prefix("zero") {
        Some((&mut prog.zero_blocks, b.parse().ok()?))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConicProgram {
        let mut p = ConicProgram::new(3);
        p.objective = vec![1.0, 0.0, -2.5];
        p.eq_rows.push(LinearRow::new(vec![(0, 1.0), (2, 1.0)], 2.0));
        p.ineq_rows.push(LinearRow::new(vec![(1, -1.0)], -4.0));
        let mut m = MatrixMap::new(2);
        m.push(0, 0, 0, 1.0);
        m.push(1, 0, 1, 0.5);
        m.push(1, 1, 2, 1.0);
        m.push_constant(0, 1, 0.25);
        p.psd_blocks.push(m);
        let mut z = MatrixMap::new(1);
        z.push(0, 0, 1, 1.0);
        z.push_constant(0, 0, -1.0);
        p.zero_blocks.push(z);
        p
    }

    #[test]
    fn dump_round_trips() {
        let p = sample();
        let text = p.to_sparse_text();
        let q = ConicProgram::from_sparse_text(&text).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn map_adjoint_matches_inner_product() {
        let p = sample();
        let m = &p.psd_blocks[0];
        let z = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 3.0]);
        let mut g = vec![0.0; 3];
        m.adjoint_into(&z, 1.0, &mut g);
        for j in 0..3 {
            let mut e = vec![0.0; 3];
            e[j] = 1.0;
            let f = m.evaluate_linear(&e);
            assert!((f.dot(&z) - g[j]).abs() < 1e-14);
        }
        assert!((m.constant_pairing(&z) - m.constant_matrix().dot(&z)).abs() < 1e-14);
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let mut p = sample();
        p.eq_rows[0].coeffs.push((7, 1.0));
        assert!(matches!(p.validate(), Err(ConicError::IndexOutOfRange { .. })));
    }
}

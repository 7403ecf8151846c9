//! Matrices over O = F_q[t]: exact determinants, adjugates, and the Smith
//! normal form C = T.D.S with unimodular T, S.

use crate::error::{Error, Result};
use crate::field::{Fq, FqElem};
use crate::poly::{self, Poly};

#[derive(Clone, PartialEq, Eq)]
pub struct PolyMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<Poly>,
}

impl std::fmt::Debug for PolyMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "[")?;
        for i in 0..self.rows {
            write!(f, "  [")?;
            for j in 0..self.cols {
                write!(f, "{:?}, ", self[(i, j)])?;
            }
            writeln!(f, "]")?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for PolyMatrix {
    type Output = Poly;
    fn index(&self, (i, j): (usize, usize)) -> &Poly {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for PolyMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Poly {
        &mut self.entries[i * self.cols + j]
    }
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        PolyMatrix { rows, cols, entries: vec![Poly::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = PolyMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Poly::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Poly>>) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        assert!(rows.iter().all(|x| x.len() == c));
        PolyMatrix { rows: r, cols: c, entries: rows.into_iter().flatten().collect() }
    }

    pub fn from_int_rows(fq: &Fq, rows: &[Vec<i64>]) -> Self {
        PolyMatrix::from_rows(
            rows.iter().map(|r| r.iter().map(|&v| Poly::from_ints(fq, &[v])).collect()).collect(),
        )
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in 0..i {
                if self[(i, j)] != self[(j, i)] {
                    return false;
                }
            }
        }
        true
    }

    pub fn transpose(&self) -> PolyMatrix {
        let mut out = PolyMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn add(&self, other: &PolyMatrix, fq: &Fq) -> PolyMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = PolyMatrix::zeros(self.rows, self.cols);
        for i in 0..self.entries.len() {
            out.entries[i] = self.entries[i].add(&other.entries[i], fq);
        }
        out
    }

    pub fn scale(&self, c: &Poly, fq: &Fq) -> PolyMatrix {
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            *e = e.mul(c, fq);
        }
        out
    }

    pub fn scale_elem(&self, c: FqElem, fq: &Fq) -> PolyMatrix {
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            *e = e.scale(c, fq);
        }
        out
    }

    pub fn mul(&self, other: &PolyMatrix, fq: &Fq) -> PolyMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = PolyMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self[(i, k)].is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = self[(i, k)].mul(&other[(k, j)], fq);
                    out[(i, j)] = out[(i, j)].add(&t, fq);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Poly], fq: &Fq) -> Vec<Poly> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = Poly::zero();
                for j in 0..self.cols {
                    acc = acc.add(&self[(i, j)].mul(&v[j], fq), fq);
                }
                acc
            })
            .collect()
    }

    /// Exact determinant by cofactor expansion (desk-scale sizes).
    pub fn det(&self, fq: &Fq) -> Poly {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        match n {
            0 => Poly::one(),
            1 => self[(0, 0)].clone(),
            2 => self[(0, 0)]
                .mul(&self[(1, 1)], fq)
                .sub(&self[(0, 1)].mul(&self[(1, 0)], fq), fq),
            _ => {
                let mut acc = Poly::zero();
                for j in 0..n {
                    if self[(0, j)].is_zero() {
                        continue;
                    }
                    let minor = self.minor(0, j);
                    let term = self[(0, j)].mul(&minor.det(fq), fq);
                    if j % 2 == 0 {
                        acc = acc.add(&term, fq);
                    } else {
                        acc = acc.sub(&term, fq);
                    }
                }
                acc
            }
        }
    }

    pub fn minor(&self, row: usize, col: usize) -> PolyMatrix {
        let mut out = PolyMatrix::zeros(self.rows - 1, self.cols - 1);
        let mut r = 0;
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let mut c = 0;
            for j in 0..self.cols {
                if j == col {
                    continue;
                }
                out[(r, c)] = self[(i, j)].clone();
                c += 1;
            }
            r += 1;
        }
        out
    }

    /// Adjugate: adj(M) * M = det(M) * I, entries in O (no division).
    pub fn adjugate(&self, fq: &Fq) -> PolyMatrix {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 1 {
            let mut out = PolyMatrix::zeros(1, 1);
            out[(0, 0)] = Poly::one();
            return out;
        }
        let mut out = PolyMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let m = self.minor(j, i).det(fq);
                out[(i, j)] = if (i + j) % 2 == 0 { m } else { m.neg(fq) };
            }
        }
        out
    }

    /// Inverse of a unimodular matrix (det a unit in F_q^*).
    pub fn unimodular_inverse(&self, fq: &Fq) -> Result<PolyMatrix> {
        let d = self.det(fq);
        if !d.is_unit() {
            return Err(Error::invalid("matrix is not unimodular over O"));
        }
        let dinv = fq.inv(d.leading());
        Ok(self.adjugate(fq).scale_elem(dinv, fq))
    }
}

/// Smith normal form data: input = T * diag(mu) * S with T, S unimodular and
/// mu_i | mu_{i+1}, each mu_i monic or zero.
#[derive(Debug, Clone)]
pub struct SmithData {
    pub t: PolyMatrix,
    pub mu: Vec<Poly>,
    pub s: PolyMatrix,
}

impl SmithData {
    pub fn diag_matrix(&self) -> PolyMatrix {
        let n = self.mu.len();
        let mut d = PolyMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = self.mu[i].clone();
        }
        d
    }

    pub fn reassemble(&self, fq: &Fq) -> PolyMatrix {
        self.t.mul(&self.diag_matrix(), fq).mul(&self.s, fq)
    }

    pub fn rank(&self) -> usize {
        self.mu.iter().filter(|m| !m.is_zero()).count()
    }
}

/// Smith normal form over the Euclidean domain O. The transforms are tracked
/// as inverses of the applied elementary operations so that the identity
/// C = T.D.S holds exactly at every step.
pub fn smith_normal_form(c: &PolyMatrix, fq: &Fq) -> SmithData {
    assert_eq!(c.rows, c.cols, "square matrices only");
    let n = c.rows;
    let mut a = c.clone();
    let mut t = PolyMatrix::identity(n);
    let mut s = PolyMatrix::identity(n);

    // elementary operations on a, mirrored by inverse ops on t (rows) / s (cols)
    fn swap_rows(a: &mut PolyMatrix, t: &mut PolyMatrix, i: usize, j: usize) {
        if i == j {
            return;
        }
        for col in 0..a.cols {
            let tmp = a[(i, col)].clone();
            a[(i, col)] = a[(j, col)].clone();
            a[(j, col)] = tmp;
        }
        // inverse of a row swap on the left factor: swap columns of t
        for row in 0..t.rows {
            let tmp = t[(row, i)].clone();
            t[(row, i)] = t[(row, j)].clone();
            t[(row, j)] = tmp;
        }
    }
    fn swap_cols(a: &mut PolyMatrix, s: &mut PolyMatrix, i: usize, j: usize) {
        if i == j {
            return;
        }
        for row in 0..a.rows {
            let tmp = a[(row, i)].clone();
            a[(row, i)] = a[(row, j)].clone();
            a[(row, j)] = tmp;
        }
        for col in 0..s.cols {
            let tmp = s[(i, col)].clone();
            s[(i, col)] = s[(j, col)].clone();
            s[(j, col)] = tmp;
        }
    }
    // row_j += f * row_i on a; t gets col_i -= f * col_j
    fn add_row(a: &mut PolyMatrix, t: &mut PolyMatrix, fq: &Fq, i: usize, j: usize, f: &Poly) {
        for col in 0..a.cols {
            let add = a[(i, col)].mul(f, fq);
            a[(j, col)] = a[(j, col)].add(&add, fq);
        }
        for row in 0..t.rows {
            let sub = t[(row, j)].mul(f, fq);
            t[(row, i)] = t[(row, i)].sub(&sub, fq);
        }
    }
    // col_j += f * col_i on a; s gets row_i -= f * row_j
    fn add_col(a: &mut PolyMatrix, s: &mut PolyMatrix, fq: &Fq, i: usize, j: usize, f: &Poly) {
        for row in 0..a.rows {
            let add = a[(row, i)].mul(f, fq);
            a[(row, j)] = a[(row, j)].add(&add, fq);
        }
        for col in 0..s.cols {
            let sub = s[(j, col)].mul(f, fq);
            s[(i, col)] = s[(i, col)].sub(&sub, fq);
        }
    }
    // row_i *= u (unit); t col_i *= u^{-1}
    fn scale_row(a: &mut PolyMatrix, t: &mut PolyMatrix, fq: &Fq, i: usize, u: FqElem) {
        for col in 0..a.cols {
            a[(i, col)] = a[(i, col)].scale(u, fq);
        }
        let uinv = fq.inv(u);
        for row in 0..t.rows {
            t[(row, i)] = t[(row, i)].scale(uinv, fq);
        }
    }

    let mut k = 0;
    while k < n {
        // find pivot of minimal degree in a[k.., k..]
        let mut pivot: Option<(usize, usize)> = None;
        for i in k..n {
            for j in k..n {
                if !a[(i, j)].is_zero()
                    && pivot.map_or(true, |(pi, pj)| a[(i, j)].degree() < a[(pi, pj)].degree())
                {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        swap_rows(&mut a, &mut t, k, pi);
        swap_cols(&mut a, &mut s, k, pj);

        loop {
            let mut dirty = false;
            for i in k + 1..n {
                if !a[(i, k)].is_zero() {
                    let (q, _) = a[(i, k)].divrem(&a[(k, k)], fq).unwrap();
                    add_row(&mut a, &mut t, fq, k, i, &q.neg(fq));
                    if !a[(i, k)].is_zero() {
                        // remainder has smaller degree: swap up and continue
                        swap_rows(&mut a, &mut t, k, i);
                    }
                    dirty = true;
                }
            }
            for j in k + 1..n {
                if !a[(k, j)].is_zero() {
                    let (q, _) = a[(k, j)].divrem(&a[(k, k)], fq).unwrap();
                    add_col(&mut a, &mut s, fq, k, j, &q.neg(fq));
                    if !a[(k, j)].is_zero() {
                        swap_cols(&mut a, &mut s, k, j);
                    }
                    dirty = true;
                }
            }
            if !dirty {
                break;
            }
        }
        k += 1;
    }

    // enforce the divisibility chain mu_i | mu_{i+1}
    loop {
        let mut fixed = true;
        for i in 0..n.saturating_sub(1) {
            let di = a[(i, i)].clone();
            let dj = a[(i + 1, i + 1)].clone();
            if di.is_zero() && !dj.is_zero() {
                swap_rows(&mut a, &mut t, i, i + 1);
                swap_cols(&mut a, &mut s, i, i + 1);
                fixed = false;
                continue;
            }
            if di.is_zero() || dj.is_zero() {
                continue;
            }
            if !dj.rem(&di, fq).is_zero() {
                // bring dj into column i and redo the local 2x2 reduction
                add_col(&mut a, &mut s, fq, i + 1, i, &Poly::one());
                // euclidean gcd steps on column i rows (i, i+1)
                loop {
                    let lo = a[(i + 1, i)].clone();
                    if lo.is_zero() {
                        break;
                    }
                    let hi = a[(i, i)].clone();
                    if hi.is_zero() || lo.degree() < hi.degree() {
                        swap_rows(&mut a, &mut t, i, i + 1);
                        continue;
                    }
                    // deg lo >= deg hi: row_{i+1} -= (lo/hi) * row_i
                    let (q, _) = lo.divrem(&hi, fq).unwrap();
                    add_row(&mut a, &mut t, fq, i, i + 1, &q.neg(fq));
                }
                // clear the fill-in at (i, i+1)
                let fill = a[(i, i + 1)].clone();
                if !fill.is_zero() {
                    let (q, r) = fill.divrem(&a[(i, i)], fq).unwrap();
                    assert!(r.is_zero(), "divisibility step must clear exactly");
                    add_col(&mut a, &mut s, fq, i, i + 1, &q.neg(fq));
                }
                let fill = a[(i + 1, i)].clone();
                if !fill.is_zero() {
                    let (q, r) = fill.divrem(&a[(i, i)], fq).unwrap();
                    assert!(r.is_zero());
                    add_row(&mut a, &mut t, fq, i, i + 1, &q.neg(fq));
                }
                fixed = false;
            }
        }
        if fixed {
            break;
        }
    }

    // monic normalization
    for i in 0..n {
        if !a[(i, i)].is_zero() && !a[(i, i)].is_monic() {
            let u = fq.inv(a[(i, i)].leading());
            scale_row(&mut a, &mut t, fq, i, u);
        }
    }

    let mu: Vec<Poly> = (0..n).map(|i| a[(i, i)].clone()).collect();
    SmithData { t, mu, s }
}

/// Determinantal-divisor oracle for SNF invariant factors: mu_k equals
/// gcd(k-minors) / gcd((k-1)-minors). Exponential in size; test use only.
pub fn invariant_factors_by_minors(c: &PolyMatrix, fq: &Fq) -> Vec<Poly> {
    let n = c.rows;
    let mut prev = Poly::one();
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        // gcd over all k x k minors
        let mut g = Poly::zero();
        let rows_sel = combinations(n, k);
        for rs in &rows_sel {
            for cs in &rows_sel {
                let mut sub = PolyMatrix::zeros(k, k);
                for (ii, &i) in rs.iter().enumerate() {
                    for (jj, &j) in cs.iter().enumerate() {
                        sub[(ii, jj)] = c[(i, j)].clone();
                    }
                }
                g = poly::gcd(&g, &sub.det(fq), fq);
            }
        }
        if g.is_zero() {
            out.push(Poly::zero());
        } else {
            out.push(g.div_exact(&prev, fq).monic(fq).1);
            prev = g;
        }
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

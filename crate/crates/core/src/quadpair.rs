//! Geometry of a pencil of two quadrics over O: the determinant binary form,
//! bad pairs, Smith-reduced (n-1)-variable forms, dual forms, the dual
//! variety, the bad-prime divisor, and brute-force counting utilities.

use serde::{Deserialize, Serialize};

use crate::binform::{self, BinForm};
use crate::error::{Error, Result};
use crate::field::Fq;
use crate::matrix::{self, PolyMatrix, SmithData};
use crate::poly::{self, Poly};

/// A pair of quadratic forms F_i(x) = x^t M_i x with congruence data
/// (N, b): F_1(b) = F_2(b) = 0 mod N.
#[derive(Debug, Clone)]
pub struct QuadricPair {
    pub n: usize,
    pub m1: PolyMatrix,
    pub m2: PolyMatrix,
    pub modulus: Poly,
    pub b: Vec<Poly>,
}

impl QuadricPair {
    /// Validates symmetry, det(M1) != 0, the squarefree determinant form
    /// (the smoothness certificate) and the congruence on b.
    pub fn new(
        m1: PolyMatrix,
        m2: PolyMatrix,
        modulus: Poly,
        b: Vec<Poly>,
        fq: &Fq,
    ) -> Result<QuadricPair> {
        let n = m1.rows;
        if n < 2 || m1.cols != n || m2.rows != n || m2.cols != n {
            return Err(Error::invalid("pair needs two square matrices of dimension >= 2"));
        }
        if !m1.is_symmetric() || !m2.is_symmetric() {
            return Err(Error::invalid("defining matrices must be symmetric"));
        }
        if !modulus.is_monic() {
            return Err(Error::invalid("congruence modulus must be monic"));
        }
        if b.len() != n {
            return Err(Error::invalid("congruence vector has wrong dimension"));
        }
        if m1.det(fq).is_zero() {
            return Err(Error::invalid("M1 must have full rank"));
        }
        let pair = QuadricPair { n, m1, m2, modulus, b };
        let det = det_form(&pair, fq)?;
        if !det.squarefree {
            return Err(Error::invalid(
                "determinant form has a repeated factor: the pencil is not smooth",
            ));
        }
        for mi in [&pair.m1, &pair.m2] {
            let v = quad_eval(mi, &pair.b, fq).rem(&pair.modulus, fq);
            if !v.is_zero() {
                return Err(Error::invalid("b must satisfy F_i(b) = 0 mod N"));
            }
        }
        Ok(pair)
    }

    /// The pencil matrix M_c = -c2 M1 + c1 M2.
    pub fn pencil_matrix(&self, c: &(Poly, Poly), fq: &Fq) -> PolyMatrix {
        let a = self.m1.scale(&c.1.neg(fq), fq);
        let b = self.m2.scale(&c.0, fq);
        a.add(&b, fq)
    }

    pub fn f1(&self, x: &[Poly], fq: &Fq) -> Poly {
        quad_eval(&self.m1, x, fq)
    }

    pub fn f2(&self, x: &[Poly], fq: &Fq) -> Poly {
        quad_eval(&self.m2, x, fq)
    }

    /// Height exponent of the pair: max degree of any coefficient of F_1, F_2.
    pub fn height_exp(&self, fq: &Fq) -> i64 {
        let mut h = 0i64;
        for m in [&self.m1, &self.m2] {
            for i in 0..self.n {
                for j in 0..self.n {
                    let c = if i == j {
                        m[(i, j)].clone()
                    } else {
                        m[(i, j)].scale(fq.from_int(2), fq)
                    };
                    h = h.max(c.degree());
                }
            }
        }
        h.max(0)
    }
}

/// x^t M x, exact.
pub fn quad_eval(m: &PolyMatrix, x: &[Poly], fq: &Fq) -> Poly {
    let mx = m.mul_vec(x, fq);
    let mut acc = Poly::zero();
    for (xi, mxi) in x.iter().zip(&mx) {
        acc = acc.add(&xi.mul(mxi, fq), fq);
    }
    acc
}

/// The determinant form F(x, y) = det(-y M1 + x M2) with its content,
/// discriminant and the squarefree certificate.
#[derive(Debug, Clone)]
pub struct DetFormData {
    pub form: BinForm,
    /// monic gcd of the coefficients
    pub content: Poly,
    pub disc: Poly,
    pub squarefree: bool,
}

pub fn det_form(pair: &QuadricPair, fq: &Fq) -> Result<DetFormData> {
    let n = pair.n;
    // mixed determinants: choose per column whether it comes from x M2 or
    // -y M1; the subset size gives the power of x
    let mut coeffs = vec![Poly::zero(); n + 1];
    for mask in 0u32..(1 << n) {
        let k = mask.count_ones() as usize;
        let mut m = PolyMatrix::zeros(n, n);
        for j in 0..n {
            let from2 = mask & (1 << j) != 0;
            for i in 0..n {
                m[(i, j)] = if from2 { pair.m2[(i, j)].clone() } else { pair.m1[(i, j)].clone() };
            }
        }
        let d = m.det(fq);
        let signed = if (n - k) % 2 == 0 { d } else { d.neg(fq) };
        coeffs[k] = coeffs[k].add(&signed, fq);
    }
    let form = BinForm::new(n, coeffs);
    if form.is_zero() {
        return Err(Error::invalid("determinant form vanishes identically: not a pencil"));
    }
    let content = form.content(fq);
    let disc = binform::discriminant_binform(&form, fq);
    let squarefree = !binform::has_repeated_root(&form, fq);
    Ok(DetFormData { form, content, disc, squarefree })
}

/// The primitive directions c with det(M_c) = 0 (at most n of them).
pub fn bad_pairs(pair: &QuadricPair, fq: &Fq) -> Result<Vec<(Poly, Poly)>> {
    let det = det_form(pair, fq)?;
    let f = &det.form;
    let mut out: Vec<(Poly, Poly)> = Vec::new();
    // root at infinity (x : y) = (1 : 0): coefficient of x^n is det(M2)
    if f.coeffs[pair.n].is_zero() {
        out.push((Poly::one(), Poly::zero()));
    }
    // finite roots u = c1/c2 of f(u) = F(u, 1): a primitive linear factor
    // (c2 u - c1) of the primitive part has c1 | const coeff, c2 | lc
    let prim = {
        let c = det.form.content(fq);
        BinForm::new(f.deg, f.coeffs.iter().map(|x| x.div_exact(&c, fq)).collect())
    };
    let dehom = prim.dehomogenize();
    let du = dehom.iter().rposition(|c| !c.is_zero()).unwrap();
    let lc = &dehom[du];
    let c0 = &dehom[0];
    debug_assert!(!c0.is_zero(), "F(0,1) = +-det(M1) != 0");
    for c1 in poly::monic_divisors(c0, fq)? {
        for d2 in poly::monic_divisors(lc, fq)? {
            for unit in 1..fq.q as u16 {
                let c2 = d2.scale(unit, fq);
                if !poly::gcd(&c1, &c2, fq).is_one() {
                    continue;
                }
                if f.eval(&c1, &c2, fq).is_zero() {
                    out.push((c1.clone(), c2.clone()));
                }
            }
        }
    }
    out.sort();
    out.dedup();
    if out.len() > pair.n {
        return Err(Error::Verification(format!(
            "{} bad pairs exceed the dimension bound n = {}",
            out.len(),
            pair.n
        )));
    }
    Ok(out)
}

/// Smith-normal reduction data of a pencil member.
#[derive(Debug, Clone)]
pub struct ReducedForm {
    pub smith: SmithData,
    /// the (n-1)x(n-1) matrix of Q_c in the basis y_j = S^{-1} e_j
    pub qc: PolyMatrix,
    /// the basis vectors y_j (columns of S^{-1})
    pub basis: Vec<Vec<Poly>>,
    /// S^{-1}, kept for the congruence conditions ((S^{-1})^t v)_n
    pub s_inv: PolyMatrix,
}

pub fn reduce_qc(pair: &QuadricPair, c: &(Poly, Poly), fq: &Fq) -> Result<ReducedForm> {
    let mc = pair.pencil_matrix(c, fq);
    let smith = matrix::smith_normal_form(&mc, fq);
    let s_inv = smith.s.unimodular_inverse(fq)?;
    let n = pair.n;
    let full = s_inv.transpose().mul(&mc, fq).mul(&s_inv, fq);
    let mut qc = PolyMatrix::zeros(n - 1, n - 1);
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            qc[(i, j)] = full[(i, j)].clone();
        }
    }
    let basis: Vec<Vec<Poly>> =
        (0..n).map(|j| (0..n).map(|i| s_inv[(i, j)].clone()).collect()).collect();
    if mc.det(fq).is_zero() {
        let ylast = &basis[n - 1];
        let img = mc.mul_vec(ylast, fq);
        if img.iter().any(|x| !x.is_zero()) {
            return Err(Error::Verification("M_c y_n != 0 for a bad direction".into()));
        }
        if qc.det(fq).is_zero() {
            return Err(Error::Verification(
                "reduced form Q_c is singular for a bad direction".into(),
            ));
        }
    }
    Ok(ReducedForm { smith, qc, basis, s_inv })
}

/// Dual form value f*(v) = det(M_c) v^t M_c^{-1} v = v^t adj(M_c) v,
/// computed without division. Errors when M_c is singular.
pub fn dual_form_fstar(
    pair: &QuadricPair,
    c: &(Poly, Poly),
    v: &[Poly],
    fq: &Fq,
) -> Result<Poly> {
    let mc = pair.pencil_matrix(c, fq);
    if mc.det(fq).is_zero() {
        return Err(Error::invalid(
            "M_c singular: route through the Smith-reduced form Q_c instead",
        ));
    }
    Ok(quad_eval(&mc.adjugate(fq), v, fq))
}

/// Dual form of an arbitrary symmetric matrix (used for Q_c^*).
pub fn dual_of_matrix(m: &PolyMatrix, v: &[Poly], fq: &Fq) -> Poly {
    quad_eval(&m.adjugate(fq), v, fq)
}

/// The binary form F*(x, y, v) = v^t adj(x M2 - y M1) v of degree n-1.
pub fn dual_pencil_form(pair: &QuadricPair, v: &[Poly], fq: &Fq) -> BinForm {
    let n = pair.n;
    let mut coeffs = vec![Poly::zero(); n];
    for i in 0..n {
        if v[i].is_zero() {
            continue;
        }
        for j in 0..n {
            if v[j].is_zero() {
                continue;
            }
            // adj entry (i, j) = (-1)^{i+j} det(pencil minor at (j, i))
            let rows: Vec<usize> = (0..n).filter(|&r| r != j).collect();
            let cols: Vec<usize> = (0..n).filter(|&s| s != i).collect();
            let k = n - 1;
            for mask in 0u32..(1 << k) {
                let bits = mask.count_ones() as usize;
                let mut m = PolyMatrix::zeros(k, k);
                for (jj, &col) in cols.iter().enumerate() {
                    let from2 = mask & (1 << jj) != 0;
                    for (ii, &row) in rows.iter().enumerate() {
                        m[(ii, jj)] = if from2 {
                            pair.m2[(row, col)].clone()
                        } else {
                            pair.m1[(row, col)].clone()
                        };
                    }
                }
                let mut d = m.det(fq);
                if (k - bits) % 2 == 1 {
                    d = d.neg(fq);
                }
                if (i + j) % 2 == 1 {
                    d = d.neg(fq);
                }
                let term = d.mul(&v[i], fq).mul(&v[j], fq);
                coeffs[bits] = coeffs[bits].add(&term, fq);
            }
        }
    }
    BinForm::new(n - 1, coeffs)
}

/// The dual-variety value: discriminant in (x, y) of F*(x, y, v).
pub fn dual_variety_eval(pair: &QuadricPair, v: &[Poly], fq: &Fq) -> Poly {
    let form = dual_pencil_form(pair, v, fq);
    if form.is_zero() {
        return Poly::zero();
    }
    binform::discriminant_binform(&form, fq)
}

/// Prime classification relative to the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrimeClass {
    TypeI,
    TypeII,
    Bad,
}

/// The bad-prime divisor D_F with its factorization and prime set.
#[derive(Debug, Clone)]
pub struct BadPrimeData {
    pub d_f: Poly,
    pub primes: Vec<Poly>,
    pub content: Poly,
    pub disc: Poly,
    pub qc_discs: Vec<Poly>,
}

/// D_F = N . h . disc(F) . prod over bad c of disc(Q_c); the Galois
/// pairwise-root-difference factor has the same prime support as disc(F)
/// and is folded into it.
pub fn bad_primes(pair: &QuadricPair, fq: &Fq) -> Result<BadPrimeData> {
    let det = det_form(pair, fq)?;
    let mut d_f = pair.modulus.mul(&det.content, fq).mul(&det.disc, fq);
    let mut qc_discs = Vec::new();
    for c in bad_pairs(pair, fq)? {
        let red = reduce_qc(pair, &c, fq)?;
        let disc = red.qc.det(fq);
        d_f = d_f.mul(&disc, fq);
        qc_discs.push(disc);
    }
    if d_f.is_zero() {
        return Err(Error::Verification("bad-prime divisor degenerated to zero".into()));
    }
    let fac = poly::factor(&d_f, fq)?;
    let primes = fac.factors.into_iter().map(|(p, _)| p).collect();
    Ok(BadPrimeData { d_f, primes, content: det.content, disc: det.disc, qc_discs })
}

pub fn classify_prime(
    pair: &QuadricPair,
    c: &(Poly, Poly),
    prime: &Poly,
    bad: &BadPrimeData,
    fq: &Fq,
) -> PrimeClass {
    if bad.primes.contains(prime) {
        return PrimeClass::Bad;
    }
    let mc = pair.pencil_matrix(c, fq);
    let det = mc.det(fq);
    if det.is_zero() {
        // bad direction: every good prime is of type I
        return PrimeClass::TypeI;
    }
    if prime.divides(&det, fq) {
        PrimeClass::TypeII
    } else {
        PrimeClass::TypeI
    }
}

// ---------------------------------------------------------------------------
// Brute-force counting utilities
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CountReport {
    pub count: u64,
    pub boxes: u64,
    /// diagnostic ratio count / side^{n-1} (quadric) or count / q^Z (binary)
    pub ratio: f64,
}

/// Count {(x, s): F(x) = s^2, |x| <= q^beta} for a nonsingular quadratic
/// form given by its symmetric matrix.
pub fn count_quadric_square(
    m: &PolyMatrix,
    beta: i64,
    fq: &Fq,
    budget: f64,
) -> Result<CountReport> {
    let n = m.rows;
    if m.det(fq).is_zero() {
        return Err(Error::invalid("form must be non-singular"));
    }
    let per = (fq.q as f64).powi(beta as i32 + 1);
    let total = per.powi(n as i32);
    if total > budget {
        return Err(Error::infeasible("quadric-square count", total, budget));
    }
    let coords = poly::polys_below_degree(fq, beta + 1);
    let mut idx = vec![0usize; n];
    let mut x: Vec<Poly> = vec![coords[0].clone(); n];
    let mut count = 0u64;
    loop {
        let val = quad_eval(m, &x, fq);
        if val.is_zero() {
            count += 1;
        } else if val.sqrt(fq).is_some() {
            count += 2;
        }
        let mut j = 0;
        loop {
            if j == n {
                let ratio = count as f64 / per.powi(n as i32 - 1);
                return Ok(CountReport { count, boxes: total as u64, ratio });
            }
            idx[j] += 1;
            if idx[j] < coords.len() {
                x[j] = coords[idx[j]].clone();
                break;
            }
            idx[j] = 0;
            x[j] = coords[0].clone();
            j += 1;
        }
    }
}

/// Count {(x, y, z): F(x, y) = z^2, |x|, |y| < q^Z} for a squarefree binary
/// form of even degree.
pub fn count_binary_square(
    form: &BinForm,
    z_exp: i64,
    fq: &Fq,
    budget: f64,
) -> Result<CountReport> {
    if form.deg % 2 != 0 {
        return Err(Error::invalid("binary form must have even degree"));
    }
    if binform::has_repeated_root(form, fq) {
        return Err(Error::invalid("binary form must be squarefree"));
    }
    let per = (fq.q as f64).powi(z_exp as i32);
    let total = per * per;
    if total > budget {
        return Err(Error::infeasible("binary-square count", total, budget));
    }
    let coords = poly::polys_below_degree(fq, z_exp);
    let mut count = 0u64;
    for x in &coords {
        for y in &coords {
            let val = form.eval(x, y, fq);
            if val.is_zero() {
                count += 1;
            } else if val.sqrt(fq).is_some() {
                count += 2;
            }
        }
    }
    Ok(CountReport { count, boxes: total as u64, ratio: count as f64 / per })
}

// ---------------------------------------------------------------------------
// Canonical smooth pairs used by tests and CLI defaults
// ---------------------------------------------------------------------------

/// A smooth n = 2 pair over any odd q: x1^2 + x2^2 and 2 x1 x2.
pub fn toy_pair_n2(fq: &Fq) -> QuadricPair {
    let m1 = PolyMatrix::from_int_rows(fq, &[vec![1, 0], vec![0, 1]]);
    let m2 = PolyMatrix::from_int_rows(fq, &[vec![0, 1], vec![1, 0]]);
    QuadricPair::new(m1, m2, Poly::one(), vec![Poly::zero(), Poly::zero()], fq)
        .expect("toy n=2 pair is smooth")
}

/// A smooth n = 3 pair: I_3 against diag(0, 1, t).
pub fn toy_pair_n3(fq: &Fq) -> QuadricPair {
    let m1 = PolyMatrix::identity(3);
    let mut m2 = PolyMatrix::zeros(3, 3);
    m2[(1, 1)] = Poly::one();
    m2[(2, 2)] = Poly::t();
    QuadricPair::new(m1, m2, Poly::one(), vec![Poly::zero(); 3], fq)
        .expect("toy n=3 pair is smooth")
}

/// A smooth n = 4 pair for the counting pipeline:
/// 2(x1 x2 - x3 x4) and x1^2 + x2^2 - x3^2 - 2 x4^2.
pub fn toy_pair_n4(fq: &Fq) -> QuadricPair {
    let m1 = PolyMatrix::from_int_rows(
        fq,
        &[
            vec![0, 1, 0, 0],
            vec![1, 0, 0, 0],
            vec![0, 0, 0, -1],
            vec![0, 0, -1, 0],
        ],
    );
    let m2 = PolyMatrix::from_int_rows(
        fq,
        &[
            vec![1, 0, 0, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, -1, 0],
            vec![0, 0, 0, -2],
        ],
    );
    QuadricPair::new(m1, m2, Poly::one(), vec![Poly::zero(); 4], fq)
        .expect("toy n=4 pair is smooth")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;

    fn f3() -> Fq {
        FieldSpec::new(3, 1).build().unwrap()
    }

    fn example_pair(fq: &Fq) -> QuadricPair {
        // M1 = I2, M2 = diag(0, 1): F = (-y)(x - y)
        let m1 = PolyMatrix::from_int_rows(fq, &[vec![1, 0], vec![0, 1]]);
        let m2 = PolyMatrix::from_int_rows(fq, &[vec![0, 0], vec![0, 1]]);
        QuadricPair::new(m1, m2, Poly::one(), vec![Poly::zero(), Poly::zero()], fq).unwrap()
    }

    #[test]
    fn det_form_2x2_example() {
        let fq = f3();
        let pair = example_pair(&fq);
        let det = det_form(&pair, &fq).unwrap();
        // F = det(diag(-y, x-y)) = -y(x - y) = -xy + y^2
        assert_eq!(det.form.coeffs[0], Poly::one());
        assert_eq!(det.form.coeffs[1], Poly::constant(2));
        assert!(det.form.coeffs[2].is_zero());
        assert!(det.squarefree);
        for c1 in poly::polys_below_degree(&fq, 2) {
            for c2 in poly::polys_below_degree(&fq, 2) {
                let mc = pair.pencil_matrix(&(c1.clone(), c2.clone()), &fq);
                assert_eq!(det.form.eval(&c1, &c2, &fq), mc.det(&fq));
            }
        }
    }

    #[test]
    fn degenerate_pencil_rejected() {
        let fq = f3();
        let m1 = PolyMatrix::from_int_rows(&fq, &[vec![1, 0], vec![0, 1]]);
        let m2 = m1.clone();
        assert!(QuadricPair::new(m1, m2, Poly::one(), vec![Poly::zero(); 2], &fq).is_err());
    }

    #[test]
    fn bad_pairs_example() {
        let fq = f3();
        let pair = example_pair(&fq);
        let bad = bad_pairs(&pair, &fq).unwrap();
        assert_eq!(bad, vec![(Poly::one(), Poly::zero()), (Poly::one(), Poly::one())]);
        // a pencil with irreducible determinant form has no bad pairs:
        // M2 = [[0,1],[1,1]]: F = -x^2 - xy + y^2, disc 5 = 2 mod 3 non-square
        let m1 = PolyMatrix::from_int_rows(&fq, &[vec![1, 0], vec![0, 1]]);
        let m2 = PolyMatrix::from_int_rows(&fq, &[vec![0, 1], vec![1, 1]]);
        let pair2 =
            QuadricPair::new(m1, m2, Poly::one(), vec![Poly::zero(); 2], &fq).unwrap();
        assert!(bad_pairs(&pair2, &fq).unwrap().is_empty());
    }

    #[test]
    fn reduce_qc_bad_direction() {
        let fq = f3();
        let pair = example_pair(&fq);
        for c in bad_pairs(&pair, &fq).unwrap() {
            let red = reduce_qc(&pair, &c, &fq).unwrap();
            assert_eq!(red.qc.rows, 1);
            assert!(!red.qc[(0, 0)].is_zero());
        }
    }

    #[test]
    fn dual_form_identities() {
        let fq = f3();
        let pair = toy_pair_n3(&fq);
        let c = (Poly::one(), Poly::constant(2));
        let mc = pair.pencil_matrix(&c, &fq);
        let det = mc.det(&fq);
        assert!(!det.is_zero());
        let zero = vec![Poly::zero(); 3];
        assert!(dual_form_fstar(&pair, &c, &zero, &fq).unwrap().is_zero());
        // adjugate identity f*(M_c w) = det(M_c) F_c(w)
        for wi in 0..27u64 {
            let w = vec![
                poly::poly_from_index(&fq, 1, wi % 3),
                poly::poly_from_index(&fq, 1, (wi / 3) % 3),
                poly::poly_from_index(&fq, 1, (wi / 9) % 3),
            ];
            let mw = mc.mul_vec(&w, &fq);
            let lhs = dual_form_fstar(&pair, &c, &mw, &fq).unwrap();
            let rhs = det.mul(&quad_eval(&mc, &w, &fq), &fq);
            assert_eq!(lhs, rhs);
        }
        // M_c = -I (c = (0,1) against M1 = I): f*(v) = sum v_i^2
        let c01 = (Poly::zero(), Poly::one());
        let v = vec![Poly::one(), Poly::t(), Poly::constant(2)];
        let got = dual_form_fstar(&pair, &c01, &v, &fq).unwrap();
        let expect = quad_eval(&PolyMatrix::identity(3), &v, &fq);
        assert_eq!(got, expect);
        // singular M_c rejected
        let bad_pair = example_pair(&fq);
        let cbad = (Poly::one(), Poly::zero());
        assert!(dual_form_fstar(&bad_pair, &cbad, &[Poly::one(), Poly::one()], &fq).is_err());
    }

    #[test]
    fn dual_variety_against_gcd_oracle() {
        let fq = f3();
        let pair = toy_pair_n3(&fq);
        let mut checked = 0;
        for vi in 0..200u64 {
            let v = vec![
                poly::poly_from_index(&fq, 2, vi % 9),
                poly::poly_from_index(&fq, 2, (vi / 9) % 9),
                poly::poly_from_index(&fq, 2, (vi / 81) % 9),
            ];
            if v.iter().all(|x| x.is_zero()) {
                assert!(dual_variety_eval(&pair, &v, &fq).is_zero());
                continue;
            }
            let fstar = dual_variety_eval(&pair, &v, &fq);
            let form = dual_pencil_form(&pair, &v, &fq);
            if form.is_zero() {
                assert!(fstar.is_zero());
                continue;
            }
            let repeated = binform::has_repeated_root(&form, &fq);
            assert_eq!(fstar.is_zero(), repeated, "mismatch at v = {v:?}");
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn dual_variety_homogeneity_degree() {
        let fq = f3();
        let pair = toy_pair_n3(&fq);
        // degree 4(n-2) = 4: F*(t v) = t^4 F*(v)
        let v = vec![Poly::one(), Poly::t(), Poly::constant(2)];
        let f1 = dual_variety_eval(&pair, &v, &fq);
        assert!(!f1.is_zero());
        let tv: Vec<Poly> = v.iter().map(|x| x.mul(&Poly::t(), &fq)).collect();
        let f2 = dual_variety_eval(&pair, &tv, &fq);
        assert_eq!(f2, f1.mul(&Poly::t_pow(4), &fq));
    }

    #[test]
    fn bad_primes_and_classification() {
        let fq = f3();
        let pair = example_pair(&fq);
        let bad = bad_primes(&pair, &fq).unwrap();
        for c in bad_pairs(&pair, &fq).unwrap() {
            let red = reduce_qc(&pair, &c, &fq).unwrap();
            let disc = red.qc.det(&fq);
            for (p, _) in poly::factor(&disc, &fq).unwrap().factors {
                assert!(bad.primes.contains(&p));
            }
        }
        // N = t forces t into the set
        let m1 = PolyMatrix::from_int_rows(&fq, &[vec![1, 0], vec![0, 1]]);
        let m2 = PolyMatrix::from_int_rows(&fq, &[vec![0, 0], vec![0, 1]]);
        let pair_n =
            QuadricPair::new(m1, m2, Poly::t(), vec![Poly::zero(), Poly::zero()], &fq).unwrap();
        let bad_n = bad_primes(&pair_n, &fq).unwrap();
        assert!(bad_n.primes.contains(&Poly::t()));
        // bad c, good prime: type I
        let c = (Poly::one(), Poly::zero());
        let good_prime = poly::primes_of_degree(&fq, 2)
            .into_iter()
            .find(|p| !bad.primes.contains(p))
            .unwrap();
        assert_eq!(classify_prime(&pair, &c, &good_prime, &bad, &fq), PrimeClass::TypeI);
        // untouched prime for a good c: type I
        let cg = (Poly::one(), Poly::constant(2));
        assert_eq!(classify_prime(&pair, &cg, &good_prime, &bad, &fq), PrimeClass::TypeI);
    }

    #[test]
    fn type_ii_constructed_instance() {
        let fq = f3();
        let pair = toy_pair_n3(&fq);
        let bad = bad_primes(&pair, &fq).unwrap();
        let mut found = false;
        'outer: for (c1, c2) in poly::primitive_pairs(&fq, 2) {
            let mc = pair.pencil_matrix(&(c1.clone(), c2.clone()), &fq);
            let det = mc.det(&fq);
            if det.is_zero() {
                continue;
            }
            for (p, _) in poly::factor(&det, &fq).unwrap().factors {
                if !bad.primes.contains(&p) {
                    assert_eq!(
                        classify_prime(&pair, &(c1.clone(), c2.clone()), &p, &bad, &fq),
                        PrimeClass::TypeII
                    );
                    found = true;
                    break 'outer;
                }
            }
        }
        assert!(found, "no type II instance found in the scan");
    }

    #[test]
    fn rank_at_least_n_minus_1_smooth() {
        let fq = f3();
        for pair in [toy_pair_n2(&fq), toy_pair_n3(&fq), toy_pair_n4(&fq)] {
            let det = det_form(&pair, &fq).unwrap();
            for (c1, c2) in poly::primitive_pairs(&fq, 2) {
                let mc = pair.pencil_matrix(&(c1.clone(), c2.clone()), &fq);
                let snf = matrix::smith_normal_form(&mc, &fq);
                assert!(
                    !snf.mu[pair.n - 2].is_zero(),
                    "rank(M_c) < n-1 at c = ({c1:?}, {c2:?})"
                );
                assert_eq!(det.form.eval(&c1, &c2, &fq), mc.det(&fq));
            }
        }
    }

    #[test]
    fn counting_utilities() {
        let fq = f3();
        let m = PolyMatrix::from_int_rows(&fq, &[vec![0, 1], vec![1, 0]]);
        let rep = count_quadric_square(&m, 1, &fq, 1e7).unwrap();
        let coords = poly::polys_below_degree(&fq, 2);
        let mut oracle = 0u64;
        for x1 in &coords {
            for x2 in &coords {
                let val = x1.mul(x2, &fq).scale(2, &fq);
                for s in poly::polys_below_degree(&fq, 3) {
                    if s.mul(&s, &fq) == val {
                        oracle += 1;
                    }
                }
            }
        }
        assert_eq!(rep.count, oracle);
        let f1 = BinForm::new(2, vec![Poly::one(), Poly::zero(), Poly::one()]);
        let f2 = BinForm::new(2, vec![Poly::constant(2), Poly::zero(), Poly::one()]);
        let quartic = f1.mul(&f2, &fq);
        let rep = count_binary_square(&quartic, 2, &fq, 1e7).unwrap();
        let mut oracle = 0u64;
        for x in poly::polys_below_degree(&fq, 2) {
            for y in poly::polys_below_degree(&fq, 2) {
                let val = quartic.eval(&x, &y, &fq);
                if val.is_zero() {
                    oracle += 1;
                } else if val.sqrt(&fq).is_some() {
                    oracle += 2;
                }
            }
        }
        assert_eq!(rep.count, oracle);
        let sq = f1.mul(&f1, &fq);
        assert!(count_binary_square(&sq, 1, &fq, 1e7).is_err());
        let odd = BinForm::new(1, vec![Poly::one(), Poly::one()]);
        assert!(count_binary_square(&odd, 1, &fq, 1e7).is_err());
    }

    #[test]
    fn growth_trend_ratios_bounded() {
        let fq = f3();
        // ratio stays bounded as the box grows for a fixed smooth form
        let m = PolyMatrix::from_int_rows(&fq, &[vec![1, 0], vec![0, 1]]);
        let mut ratios = Vec::new();
        for beta in 0..=2 {
            let rep = count_quadric_square(&m, beta, &fq, 1e8).unwrap();
            ratios.push(rep.ratio);
        }
        for r in &ratios {
            assert!(*r < 20.0, "ratio blow-up: {ratios:?}");
        }
        // binary: Z in {1,2,3}
        let f1 = BinForm::new(2, vec![Poly::one(), Poly::zero(), Poly::one()]);
        let f2 = BinForm::new(2, vec![Poly::constant(2), Poly::zero(), Poly::one()]);
        let quartic = f1.mul(&f2, &fq);
        for z in 1..=3 {
            let rep = count_binary_square(&quartic, z, &fq, 1e8).unwrap();
            assert!(rep.ratio < 20.0);
        }
    }
}

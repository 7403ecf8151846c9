//! Binary forms over O: homogeneous polynomials in (x, y) with Poly
//! coefficients, together with resultants and discriminants computed
//! exactly via Sylvester determinants.

use crate::field::Fq;
use crate::matrix::PolyMatrix;
use crate::poly::{self, Poly};

/// Homogeneous form of the stated degree: coeffs[j] multiplies x^j y^{deg-j}.
#[derive(Clone, PartialEq, Eq)]
pub struct BinForm {
    pub deg: usize,
    pub coeffs: Vec<Poly>,
}

impl std::fmt::Debug for BinForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinForm(deg {}, {:?})", self.deg, self.coeffs)
    }
}

impl BinForm {
    pub fn new(deg: usize, coeffs: Vec<Poly>) -> Self {
        assert_eq!(coeffs.len(), deg + 1);
        BinForm { deg, coeffs }
    }

    pub fn zero(deg: usize) -> Self {
        BinForm { deg, coeffs: vec![Poly::zero(); deg + 1] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn eval(&self, x: &Poly, y: &Poly, fq: &Fq) -> Poly {
        let mut acc = Poly::zero();
        // Horner in x with y-powers precomputed
        let mut ypows = vec![Poly::one()];
        for _ in 0..self.deg {
            ypows.push(ypows.last().unwrap().mul(y, fq));
        }
        let mut xpow = Poly::one();
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                let term = c.mul(&xpow, fq).mul(&ypows[self.deg - j], fq);
                acc = acc.add(&term, fq);
            }
            if j < self.deg {
                xpow = xpow.mul(x, fq);
            }
        }
        acc
    }

    pub fn add(&self, other: &BinForm, fq: &Fq) -> BinForm {
        assert_eq!(self.deg, other.deg);
        BinForm {
            deg: self.deg,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.add(b, fq))
                .collect(),
        }
    }

    pub fn mul(&self, other: &BinForm, fq: &Fq) -> BinForm {
        let deg = self.deg + other.deg;
        let mut coeffs = vec![Poly::zero(); deg + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = coeffs[i + j].add(&a.mul(b, fq), fq);
            }
        }
        BinForm { deg, coeffs }
    }

    pub fn scale(&self, c: &Poly, fq: &Fq) -> BinForm {
        BinForm { deg: self.deg, coeffs: self.coeffs.iter().map(|a| a.mul(c, fq)).collect() }
    }

    /// Dehomogenization f(u) = F(u, 1) as a polynomial in u with Poly
    /// coefficients, returned as the coefficient list (may have lower degree).
    pub fn dehomogenize(&self) -> Vec<Poly> {
        self.coeffs.clone()
    }

    /// gcd of all coefficients, monic (the content).
    pub fn content(&self, fq: &Fq) -> Poly {
        let mut g = Poly::zero();
        for c in &self.coeffs {
            g = poly::gcd(&g, c, fq);
        }
        g
    }

    /// Substitute (x, y) -> (x, s x + y): unimodular, keeps the degree and
    /// the discriminant, moves roots away from infinity.
    pub fn shear(&self, s: &Poly, fq: &Fq) -> BinForm {
        let mut coeffs = vec![Poly::zero(); self.deg + 1];
        // x^j (s x + y)^{deg-j} expanded
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let k = self.deg - j;
            // (s x + y)^k = sum binom(k,i) s^i x^i y^{k-i}
            let mut binom = 1i64;
            let mut spow = Poly::one();
            for i in 0..=k {
                let coeff = c
                    .mul(&spow, fq)
                    .scale(fq.from_int(binom), fq);
                coeffs[j + i] = coeffs[j + i].add(&coeff, fq);
                binom = binom * (k - i) as i64 / (i + 1) as i64;
                spow = spow.mul(s, fq);
            }
        }
        BinForm { deg: self.deg, coeffs }
    }
}

/// Resultant of two univariate polynomials over O (coefficient lists,
/// ascending), via the Sylvester matrix determinant.
pub fn resultant(f: &[Poly], g: &[Poly], fq: &Fq) -> Poly {
    let df = f.iter().rposition(|c| !c.is_zero());
    let dg = g.iter().rposition(|c| !c.is_zero());
    let (Some(df), Some(dg)) = (df, dg) else {
        return Poly::zero();
    };
    if df == 0 {
        return f[0].pow(dg as u64, fq);
    }
    if dg == 0 {
        return g[0].pow(df as u64, fq);
    }
    let n = df + dg;
    let mut syl = PolyMatrix::zeros(n, n);
    for i in 0..dg {
        for (k, c) in f.iter().enumerate().take(df + 1) {
            syl[(i, i + df - k)] = c.clone();
        }
    }
    for i in 0..df {
        for (k, c) in g.iter().enumerate().take(dg + 1) {
            syl[(dg + i, i + dg - k)] = c.clone();
        }
    }
    syl.det(fq)
}

/// Discriminant of a univariate polynomial over O (ascending coefficients):
/// disc = (-1)^{d(d-1)/2} Res_{d,d-1}(f, f') / lc(f), with the formal-degree
/// resultant (in char p the derivative can drop degree, so
/// Res_{d,d-1} = lc(f)^{d-1-deg f'} Res(f, f')). Returns zero when f has a
/// repeated root (including the derivative-vanishing case).
pub fn discriminant_univariate(f: &[Poly], fq: &Fq) -> Poly {
    let Some(d) = f.iter().rposition(|c| !c.is_zero()) else {
        return Poly::zero();
    };
    if d <= 1 {
        return Poly::one();
    }
    let mut df = Vec::with_capacity(d);
    for (i, c) in f.iter().enumerate().skip(1).take(d) {
        df.push(c.scale(fq.from_int(i as i64), fq));
    }
    let Some(ddf) = df.iter().rposition(|c| !c.is_zero()) else {
        return Poly::zero();
    };
    let res = resultant(&f[..=d], &df[..=ddf], fq);
    let lead = &f[d];
    let sign = if (d * (d - 1) / 2) % 2 == 0 { 1 } else { -1 };
    let disc = if ddf == d - 1 {
        let (q, r) = res.divrem(lead, fq).expect("lc nonzero");
        debug_assert!(r.is_zero(), "Res(f, f') must be divisible by lc(f)");
        q
    } else {
        // disc = lc^{d-2-deg f'} Res(f, f'), exponent >= 0 here
        res.mul(&lead.pow((d - 2 - ddf) as u64, fq), fq)
    };
    disc.scale(fq.from_int(sign), fq)
}

/// Discriminant of a binary form: after a shear making the x^deg coefficient
/// nonzero (det-1 substitution, discriminant-invariant), the univariate
/// discriminant of F(u, 1).
pub fn discriminant_binform(form: &BinForm, fq: &Fq) -> Poly {
    if form.is_zero() {
        return Poly::zero();
    }
    if form.deg <= 1 {
        return Poly::one();
    }
    // find s with leading coefficient (x^deg) nonzero after shear; the
    // leading coefficient of shear(s) is F(1, s)
    let mut s = Poly::zero();
    let mut idx = 0u64;
    let sheared = loop {
        let cand = form.shear(&s, fq);
        if !cand.coeffs[form.deg].is_zero() {
            break cand;
        }
        idx += 1;
        s = crate::poly::poly_from_index(fq, 4, idx);
    };
    discriminant_univariate(&sheared.dehomogenize(), fq)
}

/// Does the binary form have a repeated root over the algebraic closure
/// (including at infinity)? Decided via gcd with both partials.
pub fn has_repeated_root(form: &BinForm, fq: &Fq) -> bool {
    if form.is_zero() {
        return true;
    }
    if form.deg <= 1 {
        return false;
    }
    // multiplicity at infinity: y-multiplicity = deg - deg_u(F(u,1))
    let f = form.dehomogenize();
    let du = f.iter().rposition(|c| !c.is_zero()).unwrap();
    if form.deg - du >= 2 {
        return true;
    }
    // finite repeated roots: f(u) squarefree over K iff Res(f, f') != 0
    let dfu: Vec<Poly> = f
        .iter()
        .enumerate()
        .skip(1)
        .take(du)
        .map(|(i, c)| c.scale(fq.from_int(i as i64), fq))
        .collect();
    if dfu.iter().all(|c| c.is_zero()) {
        // derivative vanishes identically: f is a p-th power in K[u]
        return true;
    }
    resultant(&f[..=du], &dfu, fq).is_zero()
}

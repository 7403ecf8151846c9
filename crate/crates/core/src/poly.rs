//! The polynomial ring O = F_q[t]: exact arithmetic, gcd machinery,
//! factorization at desk scale, square roots, residue symbols and the
//! deterministic enumeration streams used everywhere else.
//!
//! Representation: coefficients lowest degree first, no trailing zeros, the
//! empty vector is the zero polynomial. The absolute value is |x| = q^{deg x}.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Fq, FqElem};

#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<FqElem>,
}

impl std::fmt::Debug for Poly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => {
                    if c == 1 {
                        write!(f, "t")?
                    } else {
                        write!(f, "{c}t")?
                    }
                }
                _ => {
                    if c == 1 {
                        write!(f, "t^{i}")?
                    } else {
                        write!(f, "{c}t^{i}")?
                    }
                }
            }
        }
        Ok(())
    }
}

impl Poly {
    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn one() -> Self {
        Poly { coeffs: vec![1] }
    }

    pub fn constant(c: FqElem) -> Self {
        if c == 0 {
            Poly::zero()
        } else {
            Poly { coeffs: vec![c] }
        }
    }

    /// The monomial t.
    pub fn t() -> Self {
        Poly { coeffs: vec![0, 1] }
    }

    /// t^k.
    pub fn t_pow(k: usize) -> Self {
        let mut coeffs = vec![0; k + 1];
        coeffs[k] = 1;
        Poly { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<FqElem>) -> Self {
        let mut p = Poly { coeffs };
        p.normalize();
        p
    }

    pub fn from_ints(fq: &Fq, coeffs: &[i64]) -> Self {
        Poly::from_coeffs(coeffs.iter().map(|&c| fq.from_int(c)).collect())
    }

    fn normalize(&mut self) {
        while let Some(&0) = self.coeffs.last() {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs == [1]
    }

    /// Degree, with -1 standing in for deg 0 = -infinity.
    pub fn degree(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn coeffs(&self) -> &[FqElem] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> FqElem {
        self.coeffs.get(i).copied().unwrap_or(0)
    }

    pub fn leading(&self) -> FqElem {
        self.coeffs.last().copied().unwrap_or(0)
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == 1
    }

    pub fn is_unit(&self) -> bool {
        self.coeffs.len() == 1
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn add(&self, other: &Poly, fq: &Fq) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(fq.add(self.coeff(i), other.coeff(i)));
        }
        Poly::from_coeffs(out)
    }

    pub fn sub(&self, other: &Poly, fq: &Fq) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(fq.sub(self.coeff(i), other.coeff(i)));
        }
        Poly::from_coeffs(out)
    }

    pub fn neg(&self, fq: &Fq) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|&c| fq.neg(c)).collect() }
    }

    pub fn mul(&self, other: &Poly, fq: &Fq) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0 as FqElem; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = fq.add(out[i + j], fq.mul(a, b));
            }
        }
        Poly::from_coeffs(out)
    }

    pub fn scale(&self, c: FqElem, fq: &Fq) -> Poly {
        if c == 0 {
            return Poly::zero();
        }
        Poly { coeffs: self.coeffs.iter().map(|&a| fq.mul(a, c)).collect() }
    }

    /// Multiply by t^k.
    pub fn shift(&self, k: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![0; k];
        coeffs.extend_from_slice(&self.coeffs);
        Poly { coeffs }
    }

    /// Euclidean division: self = q*b + r with deg r < deg b.
    pub fn divrem(&self, b: &Poly, fq: &Fq) -> Result<(Poly, Poly)> {
        if b.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if self.degree() < b.degree() {
            return Ok((Poly::zero(), self.clone()));
        }
        let lead_inv = fq.inv(b.leading());
        let mut rem = self.coeffs.clone();
        let db = b.coeffs.len() - 1;
        let mut quot = vec![0 as FqElem; rem.len() - db];
        for k in (db..rem.len()).rev() {
            let c = rem[k];
            if c == 0 {
                continue;
            }
            let qc = fq.mul(c, lead_inv);
            quot[k - db] = qc;
            for (j, &bj) in b.coeffs.iter().enumerate() {
                rem[k - db + j] = fq.sub(rem[k - db + j], fq.mul(qc, bj));
            }
        }
        Ok((Poly::from_coeffs(quot), Poly::from_coeffs(rem)))
    }

    pub fn rem(&self, b: &Poly, fq: &Fq) -> Poly {
        self.divrem(b, fq).expect("nonzero modulus").1
    }

    /// Exact division; panics if the division is not exact.
    pub fn div_exact(&self, b: &Poly, fq: &Fq) -> Poly {
        let (q, r) = self.divrem(b, fq).expect("nonzero divisor");
        assert!(r.is_zero(), "division was not exact");
        q
    }

    pub fn divides(&self, other: &Poly, fq: &Fq) -> bool {
        if self.is_zero() {
            return other.is_zero();
        }
        other.rem(self, fq).is_zero()
    }

    /// Split into (unit, monic associate).
    pub fn monic(&self, fq: &Fq) -> (FqElem, Poly) {
        if self.is_zero() {
            return (1, Poly::zero());
        }
        let lead = self.leading();
        (lead, self.scale(fq.inv(lead), fq))
    }

    pub fn eval(&self, x: FqElem, fq: &Fq) -> FqElem {
        let mut acc = 0 as FqElem;
        for &c in self.coeffs.iter().rev() {
            acc = fq.add(fq.mul(acc, x), c);
        }
        acc
    }

    /// Evaluate at a polynomial argumentable (composition self(g)).
    pub fn compose(&self, g: &Poly, fq: &Fq) -> Poly {
        let mut acc = Poly::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc.mul(g, fq).add(&Poly::constant(c), fq);
        }
        acc
    }

    pub fn derivative(&self, fq: &Fq) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        let mut out = Vec::with_capacity(self.coeffs.len() - 1);
        for (i, &c) in self.coeffs.iter().enumerate().skip(1) {
            let mut m = 0 as FqElem;
            let im = fq.from_int(i as i64);
            if im != 0 && c != 0 {
                m = fq.mul(c, im);
            }
            out.push(m);
        }
        Poly::from_coeffs(out)
    }

    pub fn pow(&self, mut e: u64, fq: &Fq) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base, fq);
            }
            base = base.mul(&base, fq);
            e >>= 1;
        }
        acc
    }

    pub fn pow_mod(&self, mut e: u64, m: &Poly, fq: &Fq) -> Poly {
        let mut acc = Poly::one().rem(m, fq);
        let mut base = self.rem(m, fq);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base, fq).rem(m, fq);
            }
            base = base.mul(&base, fq).rem(m, fq);
            e >>= 1;
        }
        acc
    }

    /// Serialize as an integer coefficient array (lowest degree first).
    pub fn to_ints(&self) -> Vec<u32> {
        self.coeffs.iter().map(|&c| c as u32).collect()
    }

    /// Coefficient reversal: t^deg * self(1/t), used for Laurent expansions
    /// and for moving between t and x = 1/t conventions.
    pub fn reversed(&self) -> Poly {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        Poly::from_coeffs(coeffs)
    }

    /// Exact square root in O, if one exists (char is odd).
    pub fn sqrt(&self, fq: &Fq) -> Option<Poly> {
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let d = self.degree();
        if d % 2 != 0 {
            return None;
        }
        let (lead, _) = self.monic(fq);
        if fq.legendre(lead) != 1 {
            return None;
        }
        // leading coefficient of the root: any square root of lead
        let mut rl = 0 as FqElem;
        for x in fq.elems() {
            if fq.mul(x, x) == lead {
                rl = x;
                break;
            }
        }
        let half = (d / 2) as usize;
        let mut root = vec![0 as FqElem; half + 1];
        root[half] = rl;
        // solve top-down: coefficient of t^{d-k} in root^2 must match
        for k in 1..=half {
            // coefficient of t^{2*half - k} of root^2, excluding the unknown root[half-k]
            let target = self.coeff(2 * half - k);
            let mut acc = 0 as FqElem;
            for i in 0..=k {
                if i == k || i == 0 {
                    continue; // involves root[half-k]
                }
                let a = root[half - i];
                let b = root[half - (k - i)];
                acc = fq.add(acc, fq.mul(a, b));
            }
            // 2 * root[half] * root[half-k] = target - acc
            let rhs = fq.sub(target, acc);
            let denom = fq.mul(2 % fq.p as FqElem, root[half]);
            root[half - k] = fq.mul(rhs, fq.inv(denom));
        }
        let cand = Poly::from_coeffs(root);
        if cand.mul(&cand, fq) == *self {
            Some(cand)
        } else {
            None
        }
    }
}

pub fn gcd(a: &Poly, b: &Poly, fq: &Fq) -> Poly {
    let mut a = a.clone();
    let mut b = b.clone();
    while !b.is_zero() {
        let r = a.rem(&b, fq);
        a = b;
        b = r;
    }
    a.monic(fq).1
}

/// Extended gcd: returns (g monic, s, u) with g = s*a + u*b.
pub fn extended_gcd(a: &Poly, b: &Poly, fq: &Fq) -> (Poly, Poly, Poly) {
    let mut r0 = a.clone();
    let mut r1 = b.clone();
    let mut s0 = Poly::one();
    let mut s1 = Poly::zero();
    let mut t0 = Poly::zero();
    let mut t1 = Poly::one();
    while !r1.is_zero() {
        let (q, r) = r0.divrem(&r1, fq).unwrap();
        let s = s0.sub(&q.mul(&s1, fq), fq);
        let t = t0.sub(&q.mul(&t1, fq), fq);
        r0 = r1;
        r1 = r;
        s0 = s1;
        s1 = s;
        t0 = t1;
        t1 = t;
    }
    if r0.is_zero() {
        return (Poly::zero(), Poly::zero(), Poly::zero());
    }
    let (lead, g) = r0.monic(fq);
    let li = fq.inv(lead);
    (g, s0.scale(li, fq), t0.scale(li, fq))
}

/// Inverse of a modulo m, when gcd(a, m) = 1.
pub fn inv_mod(a: &Poly, m: &Poly, fq: &Fq) -> Result<Poly> {
    let (g, s, _) = extended_gcd(a, m, fq);
    if !g.is_one() {
        return Err(Error::invalid(format!("{a:?} is not invertible mod {m:?}")));
    }
    Ok(s.rem(m, fq))
}

pub fn lcm(a: &Poly, b: &Poly, fq: &Fq) -> Poly {
    if a.is_zero() || b.is_zero() {
        return Poly::zero();
    }
    let g = gcd(a, b, fq);
    a.mul(b, fq).div_exact(&g, fq).monic(fq).1
}

/// Splits y = y1 * y2 with y1 | x^inf, gcd(y2, x) = 1, and returns the
/// monic gcd as well. Errors when both inputs are zero.
pub fn gcd_split(x: &Poly, y: &Poly, fq: &Fq) -> Result<(Poly, Poly, Poly)> {
    if x.is_zero() && y.is_zero() {
        return Err(Error::invalid("gcd_split(0, 0) undefined"));
    }
    let g = gcd(x, y, fq);
    if y.is_zero() {
        // y = 0: every prime divides it; the split is degenerate
        return Ok((g, Poly::zero(), Poly::one()));
    }
    let (unit, mut y2) = y.monic(fq);
    let mut y1 = Poly::constant(unit);
    loop {
        let h = gcd(x, &y2, fq);
        if h.is_one() {
            break;
        }
        // move the h-part of y2 into y1 entirely
        let mut hk = h.clone();
        loop {
            let next = gcd(&y2, &hk, fq);
            if next.is_one() {
                break;
            }
            y2 = y2.div_exact(&next, fq);
            y1 = y1.mul(&next, fq);
            hk = next;
        }
    }
    Ok((g, y1, y2))
}

/// The y1 | x^inf part of y (monic), per the `y | x^inf` convention.
pub fn part_supported_on(y: &Poly, x: &Poly, fq: &Fq) -> Poly {
    match gcd_split(x, y, fq) {
        Ok((_, y1, _)) => y1.monic(fq).1,
        Err(_) => Poly::one(),
    }
}

// ---------------------------------------------------------------------------
// Factorization (deterministic, desk scale)
// ---------------------------------------------------------------------------

/// Factorization of a nonzero polynomial: unit * prod(prime^exp), primes
/// monic, sorted by (degree, coefficient order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub unit: FqElem,
    pub factors: Vec<(Poly, u32)>,
}

impl Factorization {
    pub fn product(&self, fq: &Fq) -> Poly {
        let mut acc = Poly::constant(self.unit);
        for (p, e) in &self.factors {
            acc = acc.mul(&p.pow(*e as u64, fq), fq);
        }
        acc
    }

    /// Number of prime factors counted with multiplicity.
    pub fn omega(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn moebius(&self) -> i64 {
        if self.is_squarefree() {
            if self.factors.len() % 2 == 0 {
                1
            } else {
                -1
            }
        } else {
            0
        }
    }
}

/// p-th root of a polynomial in F_q[t^p] (Frobenius inverse on coefficients).
fn pth_root(x: &Poly, fq: &Fq) -> Poly {
    let p = fq.p as usize;
    let mut out = vec![0 as FqElem; x.coeffs().len() / p + 1];
    for (i, &c) in x.coeffs().iter().enumerate() {
        if c == 0 {
            continue;
        }
        debug_assert!(i % p == 0);
        // c^{p^{l0-1}} inverts Frobenius on F_q
        let e = (fq.p as u64).pow(fq.ell0 - 1);
        out[i / p] = fq.pow(c, e);
    }
    Poly::from_coeffs(out)
}

/// Factor a nonzero polynomial. Distinct-degree + deterministic equal-degree
/// splitting (q odd), with squarefree reduction first.
pub fn factor(x: &Poly, fq: &Fq) -> Result<Factorization> {
    if x.is_zero() {
        return Err(Error::invalid("cannot factor the zero polynomial"));
    }
    let (unit, mon) = x.monic(fq);
    let mut factors: Vec<(Poly, u32)> = Vec::new();
    factor_monic(&mon, 1, fq, &mut factors);
    factors.sort();
    // merge duplicates
    let mut merged: Vec<(Poly, u32)> = Vec::new();
    for (p, e) in factors {
        if let Some(last) = merged.last_mut() {
            if last.0 == p {
                last.1 += e;
                continue;
            }
        }
        merged.push((p, e));
    }
    Ok(Factorization { unit, factors: merged })
}

fn factor_monic(x: &Poly, mult: u32, fq: &Fq, out: &mut Vec<(Poly, u32)>) {
    if x.is_one() {
        return;
    }
    let dx = x.derivative(fq);
    if dx.is_zero() {
        // x is a p-th power
        let root = pth_root(x, fq);
        factor_monic(&root, mult * fq.p, fq, out);
        return;
    }
    let g = gcd(x, &dx, fq);
    if g.is_one() {
        factor_squarefree(x, fq, out, mult);
        return;
    }
    // x/gcd(x, x') collects the primes whose exponent is prime to p; strip
    // each full power from x and recurse on what is left.
    let sqfree = x.div_exact(&g, fq);
    let mut local = Vec::new();
    factor_squarefree(&sqfree, fq, &mut local, 1);
    let mut remaining = x.clone();
    for (p, _) in local {
        let mut e = 0u32;
        while p.divides(&remaining, fq) {
            remaining = remaining.div_exact(&p, fq);
            e += 1;
        }
        if e > 0 {
            out.push((p, e * mult));
        }
    }
    if !remaining.is_one() {
        factor_monic(&remaining, mult, fq, out);
    }
}

fn factor_squarefree(x: &Poly, fq: &Fq, out: &mut Vec<(Poly, u32)>, mult: u32) {
    // distinct-degree split
    let mut rest = x.clone();
    let mut d = 1u32;
    let q = fq.q as u64;
    while rest.degree() >= 2 * d as i64 {
        // t^{q^d} mod rest
        let mut frob = Poly::t().rem(&rest, fq);
        for _ in 0..d {
            frob = frob.pow_mod(q, &rest, fq);
        }
        let g = gcd(&frob.sub(&Poly::t(), fq), &rest, fq);
        if !g.is_one() {
            split_equal_degree(&g, d, fq, out, mult);
            rest = rest.div_exact(&g, fq);
        }
        d += 1;
    }
    if rest.degree() >= 1 {
        out.push((rest, mult));
    }
}

fn split_equal_degree(x: &Poly, d: u32, fq: &Fq, out: &mut Vec<(Poly, u32)>, mult: u32) {
    if x.degree() == d as i64 {
        out.push((x.clone(), mult));
        return;
    }
    let q = fq.q as u64;
    let e = (q.pow(d) - 1) / 2;
    // deterministic candidate sweep: v runs over all residues mod x
    let deg_bound = x.degree() as usize;
    let count = q.pow(deg_bound as u32);
    for idx in 1..count {
        let v = poly_from_index(fq, deg_bound, idx);
        if v.is_constant() {
            continue;
        }
        let w = v.pow_mod(e, x, fq).sub(&Poly::one(), fq);
        let g = gcd(&w, x, fq);
        if !g.is_one() && g != *x {
            let other = x.div_exact(&g, fq);
            split_equal_degree(&g, d, fq, out, mult);
            split_equal_degree(&other, d, fq, out, mult);
            return;
        }
    }
    unreachable!("equal-degree splitting terminates for squarefree input");
}

/// Is x (not necessarily monic) squarefree?
pub fn is_squarefree(x: &Poly, fq: &Fq) -> bool {
    if x.is_zero() {
        return false;
    }
    if x.is_constant() {
        return true;
    }
    let dx = x.derivative(fq);
    if dx.is_zero() {
        return false;
    }
    gcd(x, &dx, fq).is_one()
}

pub fn is_irreducible(x: &Poly, fq: &Fq) -> bool {
    if x.degree() < 1 {
        return false;
    }
    match factor(x, fq) {
        Ok(f) => f.factors.len() == 1 && f.factors[0].1 == 1,
        Err(_) => false,
    }
}

/// Membership in O#: monic and squarefree.
pub fn is_sharp(x: &Poly, fq: &Fq) -> bool {
    x.is_monic() && is_squarefree(x, fq)
}

// ---------------------------------------------------------------------------
// Residue symbols
// ---------------------------------------------------------------------------

/// Quadratic residue symbol (a/prime) in {0, +1, -1}.
pub fn residue_symbol(a: &Poly, prime: &Poly, fq: &Fq) -> Result<i8> {
    if !is_irreducible(prime, fq) {
        return Err(Error::invalid("residue symbol requires a prime modulus"));
    }
    let r = a.rem(prime, fq);
    if r.is_zero() {
        return Ok(0);
    }
    let norm = (fq.q as u64).pow(prime.degree() as u32);
    let e = (norm - 1) / 2;
    let v = r.pow_mod(e, prime, fq);
    if v.is_one() {
        Ok(1)
    } else {
        // must be -1
        debug_assert_eq!(v, Poly::constant(fq.neg(1)));
        Ok(-1)
    }
}

/// (a/prime^k) := (a/prime)^k.
pub fn residue_symbol_power(a: &Poly, prime: &Poly, k: u32, fq: &Fq) -> Result<i8> {
    let s = residue_symbol(a, prime, fq)?;
    Ok(if k % 2 == 0 { (s != 0) as i8 * s * s } else { s })
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

/// The idx-th polynomial of degree < d_bound coefficients, in the canonical
/// order: lexicographic on (c_{d-1}, ..., c_0), constant term varying fastest.
pub fn poly_from_index(fq: &Fq, d_bound: usize, idx: u64) -> Poly {
    let q = fq.q as u64;
    let mut coeffs = vec![0 as FqElem; d_bound];
    let mut m = idx;
    for c in coeffs.iter_mut().take(d_bound) {
        *c = (m % q) as FqElem;
        m /= q;
    }
    Poly::from_coeffs(coeffs)
}

/// All q^d monic polynomials of degree exactly d, deterministic order.
pub fn monic_of_degree(fq: &Fq, d: i64) -> Vec<Poly> {
    if d < 0 {
        return vec![];
    }
    if d == 0 {
        return vec![Poly::one()];
    }
    let d = d as usize;
    let count = (fq.q as u64).pow(d as u32);
    (0..count)
        .map(|idx| {
            let mut p = poly_from_index(fq, d, idx);
            let mut c = p.coeffs().to_vec();
            c.resize(d + 1, 0);
            c[d] = 1;
            p = Poly::from_coeffs(c);
            p
        })
        .collect()
}

/// All monic polynomials of degree <= d, degree-ascending.
pub fn monic_up_to_degree(fq: &Fq, d: i64) -> Vec<Poly> {
    let mut out = Vec::new();
    for k in 0..=d {
        out.extend(monic_of_degree(fq, k));
    }
    out
}

/// All polynomials of degree < d (q^d of them, includes zero).
pub fn polys_below_degree(fq: &Fq, d: i64) -> Vec<Poly> {
    if d <= 0 {
        return vec![Poly::zero()];
    }
    let count = (fq.q as u64).pow(d as u32);
    (0..count).map(|idx| poly_from_index(fq, d as usize, idx)).collect()
}

/// Monic squarefree polynomials of degree <= d.
pub fn squarefree_monic_up_to(fq: &Fq, d: i64) -> Vec<Poly> {
    monic_up_to_degree(fq, d).into_iter().filter(|p| is_squarefree(p, fq)).collect()
}

/// Units of O.
pub fn units(fq: &Fq) -> Vec<Poly> {
    (1..fq.q).map(|c| Poly::constant(c as FqElem)).collect()
}

/// Primitive pairs per the monic convention: gcd(c1, c2) = 1 and either c1
/// monic, or c1 = 0 and c2 monic. Bounded by max(|c1|, |c2|) <= q^height.
pub fn primitive_pairs(fq: &Fq, height: i64) -> Vec<(Poly, Poly)> {
    let mut out = Vec::new();
    // c1 = 0 case
    if height >= 0 {
        out.push((Poly::zero(), Poly::one()));
    }
    for d1 in 0..=height {
        for c1 in monic_of_degree(fq, d1) {
            for c2 in polys_below_degree(fq, height + 1) {
                if gcd(&c1, &c2, fq).is_one() {
                    out.push((c1.clone(), c2));
                }
            }
        }
    }
    out
}

/// Monic irreducible polynomials of degree exactly d.
pub fn primes_of_degree(fq: &Fq, d: i64) -> Vec<Poly> {
    monic_of_degree(fq, d).into_iter().filter(|p| is_irreducible(p, fq)).collect()
}

/// All monic divisors of x (including 1 and the monic associate of x).
pub fn monic_divisors(x: &Poly, fq: &Fq) -> Result<Vec<Poly>> {
    let f = factor(x, fq)?;
    let mut out = vec![Poly::one()];
    for (p, e) in &f.factors {
        let mut next = Vec::with_capacity(out.len() * (*e as usize + 1));
        for d in &out {
            let mut pk = Poly::one();
            for _ in 0..=*e {
                next.push(d.mul(&pk, fq));
                pk = pk.mul(p, fq);
            }
        }
        out = next;
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Euler phi: the number of units mod x.
pub fn euler_phi(x: &Poly, fq: &Fq) -> Result<u64> {
    let f = factor(x, fq)?;
    let mut out = 1u64;
    for (p, e) in &f.factors {
        let norm = (fq.q as u64).pow(p.degree() as u32);
        out *= norm.pow(e - 1) * (norm - 1);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;

    fn f3() -> Fq {
        FieldSpec::new(3, 1).build().unwrap()
    }

    #[test]
    fn divrem_degree_one() {
        let fq = f3();
        // (t^2 + 1, t) -> (t, 1)
        let a = Poly::from_ints(&fq, &[1, 0, 1]);
        let b = Poly::t();
        let (q, r) = a.divrem(&b, &fq).unwrap();
        assert_eq!(q, Poly::t());
        assert_eq!(r, Poly::one());
    }

    #[test]
    fn divrem_identity_case() {
        let fq = f3();
        for idx in 1..40 {
            let x = poly_from_index(&fq, 4, idx);
            if x.is_zero() {
                continue;
            }
            let (q, r) = x.divrem(&x, &fq).unwrap();
            assert_eq!(q, Poly::one());
            assert!(r.is_zero());
        }
    }

    #[test]
    fn divrem_hand_long_division() {
        let fq = f3();
        // (t^3 + 2t + 1) / (t^2 + 1) over F_3 -> quotient t, remainder t + 1
        let a = Poly::from_ints(&fq, &[1, 2, 0, 1]);
        let b = Poly::from_ints(&fq, &[1, 0, 1]);
        let (q, r) = a.divrem(&b, &fq).unwrap();
        assert_eq!(q, Poly::t());
        assert_eq!(r, Poly::from_ints(&fq, &[1, 1]));
        // re-multiplication cross-check
        assert_eq!(q.mul(&b, &fq).add(&r, &fq), a);
    }

    #[test]
    fn divide_by_zero_rejected() {
        let fq = f3();
        assert!(Poly::one().divrem(&Poly::zero(), &fq).is_err());
    }

    #[test]
    fn gcd_split_prime_by_prime() {
        let fq = f3();
        // (t, t^2(t+1)) -> g = t, y1 = t^2, y2 = t+1
        let x = Poly::t();
        let y = Poly::t_pow(2).mul(&Poly::from_ints(&fq, &[1, 1]), &fq);
        let (g, y1, y2) = gcd_split(&x, &y, &fq).unwrap();
        assert_eq!(g, Poly::t());
        assert_eq!(y1, Poly::t_pow(2));
        assert_eq!(y2, Poly::from_ints(&fq, &[1, 1]));
    }

    #[test]
    fn gcd_split_units() {
        let fq = f3();
        let y = Poly::from_ints(&fq, &[2, 0, 1]);
        let (g, y1, y2) = gcd_split(&Poly::one(), &y, &fq).unwrap();
        assert!(g.is_one());
        assert!(y1.is_one());
        assert_eq!(y2, y);
        let (g, y1, y2) = gcd_split(&y, &Poly::one(), &fq).unwrap();
        assert!(g.is_one());
        assert!(y1.is_one());
        assert!(y2.is_one());
        assert!(gcd_split(&Poly::zero(), &Poly::zero(), &fq).is_err());
    }

    #[test]
    fn factor_small_cases() {
        let fq = f3();
        // t^2 + 1 irreducible over F_3
        let x = Poly::from_ints(&fq, &[1, 0, 1]);
        let f = factor(&x, &fq).unwrap();
        assert_eq!(f.factors, vec![(x.clone(), 1)]);
        assert_eq!(f.unit, 1);
        // t^2 -> (t, 2)
        let f = factor(&Poly::t_pow(2), &fq).unwrap();
        assert_eq!(f.factors, vec![(Poly::t(), 2)]);
        // 2t -> unit 2 times t
        let f = factor(&Poly::from_ints(&fq, &[0, 2]), &fq).unwrap();
        assert_eq!(f.unit, 2);
        assert_eq!(f.factors, vec![(Poly::t(), 1)]);
        assert!(factor(&Poly::zero(), &fq).is_err());
    }

    #[test]
    fn factor_reassembles_exhaustive_deg4() {
        let fq = f3();
        for x in monic_up_to_degree(&fq, 4) {
            if x.is_zero() {
                continue;
            }
            let f = factor(&x, &fq).unwrap();
            assert_eq!(f.product(&fq), x, "factorization of {x:?} does not reassemble");
            for (p, _) in &f.factors {
                assert!(is_irreducible(p, &fq), "{p:?} not irreducible");
                assert!(p.is_monic());
            }
        }
    }

    #[test]
    fn factor_pth_power_and_omega() {
        let fq = f3();
        // (t+1)^3 has zero derivative path
        let x = Poly::from_ints(&fq, &[1, 1]).pow(3, &fq);
        let f = factor(&x, &fq).unwrap();
        assert_eq!(f.factors, vec![(Poly::from_ints(&fq, &[1, 1]), 3)]);
        assert_eq!(f.omega(), 3);
        assert!(!f.is_squarefree());
    }

    #[test]
    fn enumeration_counts() {
        let fq = f3();
        assert_eq!(monic_of_degree(&fq, 0), vec![Poly::one()]);
        let d1 = monic_of_degree(&fq, 1);
        assert_eq!(d1.len(), 3);
        assert_eq!(d1[0], Poly::t());
        assert_eq!(d1[1], Poly::from_ints(&fq, &[1, 1]));
        assert_eq!(d1[2], Poly::from_ints(&fq, &[2, 1]));
        assert_eq!(monic_of_degree(&fq, 3).len(), 27);
        assert!(monic_of_degree(&fq, -1).is_empty());
    }

    #[test]
    fn primitive_pairs_against_filter() {
        let fq = f3();
        // oracle: all pairs with the monic convention and gcd 1, |c| <= q
        let mut count = 0usize;
        for c1 in polys_below_degree(&fq, 2) {
            for c2 in polys_below_degree(&fq, 2) {
                let monic_ok = (!c1.is_zero() && c1.is_monic()) || (c1.is_zero() && c2.is_monic());
                if monic_ok && gcd(&c1, &c2, &fq).is_one() {
                    count += 1;
                }
            }
        }
        let got = primitive_pairs(&fq, 1);
        assert_eq!(got.len(), count);
        let mut set: Vec<_> = got.clone();
        set.sort();
        set.dedup();
        assert_eq!(set.len(), got.len(), "no duplicates");
    }

    #[test]
    fn residue_symbol_cases() {
        let fq = f3();
        let t = Poly::t();
        // (1/prime) = 1
        assert_eq!(residue_symbol(&Poly::one(), &t, &fq).unwrap(), 1);
        // q=3, prime=t, a=t+2: a mod t = 2, 2^1 = 2 = -1
        let a = Poly::from_ints(&fq, &[2, 1]);
        assert_eq!(residue_symbol(&a, &t, &fq).unwrap(), -1);
        // prime | a
        assert_eq!(residue_symbol(&Poly::t_pow(2), &t, &fq).unwrap(), 0);
        // non-prime modulus rejected
        assert!(residue_symbol(&Poly::one(), &Poly::t_pow(2), &fq).is_err());
    }

    #[test]
    fn residue_symbol_multiplicative_exhaustive() {
        let fq = f3();
        for prime in [Poly::t(), Poly::from_ints(&fq, &[1, 0, 1]), Poly::from_ints(&fq, &[2, 1])]
        {
            for a in polys_below_degree(&fq, 3) {
                for b in polys_below_degree(&fq, 2) {
                    let ab = a.mul(&b, &fq);
                    let sa = residue_symbol(&a, &prime, &fq).unwrap();
                    let sb = residue_symbol(&b, &prime, &fq).unwrap();
                    let sab = residue_symbol(&ab, &prime, &fq).unwrap();
                    assert_eq!(sab, sa * sb);
                }
            }
        }
    }

    #[test]
    fn sqrt_roundtrip() {
        let fq = f3();
        for x in monic_up_to_degree(&fq, 3) {
            let sq = x.mul(&x, &fq);
            let r = sq.sqrt(&fq).expect("square must have a root");
            assert_eq!(r.mul(&r, &fq), sq);
        }
        // a non-square
        let ns = Poly::from_ints(&fq, &[0, 1]); // t, odd degree
        assert!(ns.sqrt(&fq).is_none());
    }

    #[test]
    fn euler_phi_matches_unit_count() {
        let fq = f3();
        for m in monic_up_to_degree(&fq, 3) {
            if m.is_one() {
                assert_eq!(euler_phi(&m, &fq).unwrap(), 1);
                continue;
            }
            let mut count = 0u64;
            for a in polys_below_degree(&fq, m.degree()) {
                if gcd(&a, &m, &fq).is_one() {
                    count += 1;
                }
            }
            assert_eq!(euler_phi(&m, &fq).unwrap(), count, "phi({m:?})");
        }
    }
}

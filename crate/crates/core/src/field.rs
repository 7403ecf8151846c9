//! The coefficient field F_q, q = p^l0 with p an odd prime.
//!
//! Elements are stored as indices 0..q. For l0 = 1 the index is the residue
//! itself; for l0 > 1 the index encodes a polynomial in the generator u,
//! `sum c_i u^i` with index `sum c_i p^i` and u a root of the defining
//! irreducible modulus over F_p. All arithmetic goes through tables built
//! once at construction, so every operation is exact and O(1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element of F_q, as an index into the field tables.
pub type FqElem = u16;

/// Field description as it appears in run configurations.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FieldSpec {
    pub p: u32,
    #[serde(default = "one")]
    pub ell0: u32,
    /// Coefficients of the degree-l0 modulus over F_p, lowest degree first,
    /// including the leading 1. Ignored for l0 = 1; generated
    /// deterministically (smallest in lexicographic coefficient order, most
    /// significant coefficient first) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<Vec<u32>>,
}

fn one() -> u32 {
    1
}

impl FieldSpec {
    pub fn new(p: u32, ell0: u32) -> Self {
        FieldSpec { p, ell0, modulus: None }
    }

    pub fn q(&self) -> u64 {
        (self.p as u64).pow(self.ell0)
    }

    pub fn build(&self) -> Result<Fq> {
        Fq::new(self)
    }
}

/// F_q with precomputed arithmetic tables.
pub struct Fq {
    pub p: u32,
    pub ell0: u32,
    pub q: u32,
    /// Defining modulus over F_p (monic, length ell0+1); `[0, 1]` for l0 = 1.
    pub modulus: Vec<u32>,
    add: Vec<FqElem>,
    sub: Vec<FqElem>,
    mul: Vec<FqElem>,
    neg: Vec<FqElem>,
    inv: Vec<FqElem>,
    /// Tr_{F_q/F_p}(x) as a residue 0..p.
    trace: Vec<u16>,
    /// x^{(q-1)/2} mapped to {0, 1, -1}.
    legendre: Vec<i8>,
}

impl std::fmt::Debug for Fq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fq(p={}, ell0={}, q={})", self.p, self.ell0, self.q)
    }
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Multiply two F_p[u] polynomials and reduce modulo `modulus` (monic).
fn fp_mulmod(a: &[u32], b: &[u32], modulus: &[u32], p: u32) -> Vec<u32> {
    let deg_m = modulus.len() - 1;
    let mut prod = vec![0u64; a.len() + b.len()];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ai as u64 * bj as u64) % p as u64;
        }
    }
    // reduce: subtract prod[k] * u^{k-deg_m} * modulus for k from top down
    for k in (deg_m..prod.len()).rev() {
        let c = prod[k] % p as u64;
        if c == 0 {
            continue;
        }
        for (j, &mj) in modulus.iter().enumerate() {
            let idx = k - deg_m + j;
            let sub = c * mj as u64 % p as u64;
            prod[idx] = (prod[idx] + p as u64 - sub) % p as u64;
        }
    }
    prod.truncate(deg_m.max(1));
    prod.iter().map(|&x| x as u32).collect()
}

fn fp_poly_is_irreducible(f: &[u32], p: u32) -> bool {
    // Trial division by all monic polynomials of degree 1..=deg/2 over F_p.
    let deg = f.len() - 1;
    if deg == 0 {
        return false;
    }
    for d in 1..=deg / 2 {
        let count = (p as u64).pow(d as u32);
        for idx in 0..count {
            let mut g = vec![0u32; d + 1];
            let mut m = idx;
            for c in g.iter_mut().take(d) {
                *c = (m % p as u64) as u32;
                m /= p as u64;
            }
            g[d] = 1;
            if fp_poly_divides(&g, f, p) {
                return false;
            }
        }
    }
    true
}

fn fp_poly_divides(g: &[u32], f: &[u32], p: u32) -> bool {
    // remainder of f by monic g over F_p is zero?
    let mut r: Vec<u32> = f.to_vec();
    let dg = g.len() - 1;
    while r.len() > dg {
        let lead = *r.last().unwrap() % p;
        let k = r.len() - 1 - dg;
        if lead != 0 {
            for (j, &gj) in g.iter().enumerate() {
                let idx = k + j;
                r[idx] = (r[idx] + p - (lead * gj) % p) % p;
            }
        }
        r.pop();
    }
    r.iter().all(|&c| c % p == 0)
}

impl Fq {
    pub fn new(spec: &FieldSpec) -> Result<Self> {
        let p = spec.p;
        let ell0 = spec.ell0;
        if !is_prime(p) || p < 3 {
            return Err(Error::invalid(format!(
                "p = {p} rejected: the construction assumes an odd prime p (q odd)"
            )));
        }
        if ell0 == 0 {
            return Err(Error::invalid("ell0 must be positive"));
        }
        let q64 = (p as u64).pow(ell0);
        if q64 > 1 << 14 {
            return Err(Error::invalid(format!("q = {q64} too large for table-based field")));
        }
        let q = q64 as u32;

        let modulus: Vec<u32> = if ell0 == 1 {
            vec![0, 1]
        } else {
            match &spec.modulus {
                Some(m) => {
                    if m.len() != ell0 as usize + 1 || *m.last().unwrap() % p != 1 {
                        return Err(Error::invalid("modulus must be monic of degree ell0"));
                    }
                    let m: Vec<u32> = m.iter().map(|&c| c % p).collect();
                    if !fp_poly_is_irreducible(&m, p) {
                        return Err(Error::invalid("modulus is not irreducible over F_p"));
                    }
                    m
                }
                None => {
                    // smallest irreducible, lexicographic on (c_{l0-1},...,c_0)
                    let mut found = None;
                    'outer: for idx in 0..(p as u64).pow(ell0) {
                        let mut m = vec![0u32; ell0 as usize + 1];
                        let mut v = idx;
                        for j in 0..ell0 as usize {
                            m[j] = (v % p as u64) as u32;
                            v /= p as u64;
                        }
                        m[ell0 as usize] = 1;
                        if fp_poly_is_irreducible(&m, p) {
                            found = Some(m);
                            break 'outer;
                        }
                    }
                    found.ok_or_else(|| Error::invalid("no irreducible modulus found"))?
                }
            }
        };

        let n = q as usize;
        let elem_poly = |e: u32| -> Vec<u32> {
            let mut v = vec![0u32; ell0 as usize];
            let mut m = e;
            for c in v.iter_mut() {
                *c = m % p;
                m /= p;
            }
            v
        };
        let poly_elem = |v: &[u32]| -> u32 {
            let mut e = 0u32;
            for &c in v.iter().rev() {
                e = e * p + c % p;
            }
            e
        };

        let mut add = vec![0 as FqElem; n * n];
        let mut sub = vec![0 as FqElem; n * n];
        let mut mul = vec![0 as FqElem; n * n];
        let mut neg = vec![0 as FqElem; n];
        for a in 0..q {
            let pa = elem_poly(a);
            let negp: Vec<u32> = pa.iter().map(|&c| (p - c % p) % p).collect();
            neg[a as usize] = poly_elem(&negp) as FqElem;
            for b in 0..q {
                let pb = elem_poly(b);
                let s: Vec<u32> = pa.iter().zip(&pb).map(|(&x, &y)| (x + y) % p).collect();
                let d: Vec<u32> = pa.iter().zip(&pb).map(|(&x, &y)| (x + p - y) % p).collect();
                add[(a * q + b) as usize] = poly_elem(&s) as FqElem;
                sub[(a * q + b) as usize] = poly_elem(&d) as FqElem;
                let m = fp_mulmod(&pa, &pb, &modulus, p);
                mul[(a * q + b) as usize] = poly_elem(&m) as FqElem;
            }
        }

        let mut inv = vec![0 as FqElem; n];
        for a in 1..q {
            // a^(q-2)
            let mut acc = 1u32;
            let mut base = a;
            let mut e = q - 2;
            while e > 0 {
                if e & 1 == 1 {
                    acc = mul[(acc * q + base) as usize] as u32;
                }
                base = mul[(base * q + base) as usize] as u32;
                e >>= 1;
            }
            inv[a as usize] = acc as FqElem;
        }

        // trace: sum of p-power Frobenius images; lands in the prime field.
        let mut trace = vec![0u16; n];
        for a in 0..q {
            let mut s = 0u32;
            let mut frob = a;
            for _ in 0..ell0 {
                s = add[(s * q + frob) as usize] as u32;
                let mut acc = 1u32;
                let mut base = frob;
                let mut e = p;
                while e > 0 {
                    if e & 1 == 1 {
                        acc = mul[(acc * q + base) as usize] as u32;
                    }
                    base = mul[(base * q + base) as usize] as u32;
                    e >>= 1;
                }
                frob = acc;
            }
            debug_assert!(s < p, "trace must land in the prime subfield");
            trace[a as usize] = s as u16;
        }

        let mut legendre = vec![0i8; n];
        for a in 1..q {
            let mut acc = 1u32;
            let mut base = a;
            let mut e = (q - 1) / 2;
            while e > 0 {
                if e & 1 == 1 {
                    acc = mul[(acc * q + base) as usize] as u32;
                }
                base = mul[(base * q + base) as usize] as u32;
                e >>= 1;
            }
            legendre[a as usize] = if acc == 1 { 1 } else { -1 };
        }

        Ok(Fq { p, ell0, q, modulus, add, sub, mul, neg, inv, trace, legendre })
    }

    #[inline(always)]
    pub fn add(&self, a: FqElem, b: FqElem) -> FqElem {
        self.add[a as usize * self.q as usize + b as usize]
    }

    #[inline(always)]
    pub fn sub(&self, a: FqElem, b: FqElem) -> FqElem {
        self.sub[a as usize * self.q as usize + b as usize]
    }

    #[inline(always)]
    pub fn mul(&self, a: FqElem, b: FqElem) -> FqElem {
        self.mul[a as usize * self.q as usize + b as usize]
    }

    #[inline(always)]
    pub fn neg(&self, a: FqElem) -> FqElem {
        self.neg[a as usize]
    }

    /// Multiplicative inverse; panics on zero (callers guard).
    #[inline(always)]
    pub fn inv(&self, a: FqElem) -> FqElem {
        assert!(a != 0, "inverse of zero in F_q");
        self.inv[a as usize]
    }

    #[inline(always)]
    pub fn trace(&self, a: FqElem) -> u16 {
        self.trace[a as usize]
    }

    /// Quadratic character of F_q: 0 on 0, else ±1.
    #[inline(always)]
    pub fn legendre(&self, a: FqElem) -> i8 {
        self.legendre[a as usize]
    }

    pub fn pow(&self, a: FqElem, mut e: u64) -> FqElem {
        let mut acc: FqElem = 1;
        let mut base = a;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Iterator over all field elements.
    pub fn elems(&self) -> impl Iterator<Item = FqElem> {
        (0..self.q as u16).map(|x| x as FqElem)
    }

    /// Elements of the prime field F_p inside F_q (indices 0..p).
    pub fn prime_subfield(&self) -> impl Iterator<Item = FqElem> {
        (0..self.p as u16).map(|x| x as FqElem)
    }

    /// Embed an integer residue (mod p) into F_q.
    pub fn from_int(&self, v: i64) -> FqElem {
        (v.rem_euclid(self.p as i64)) as FqElem
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f3_basic() {
        let fq = FieldSpec::new(3, 1).build().unwrap();
        assert_eq!(fq.q, 3);
        assert_eq!(fq.add(2, 2), 1);
        assert_eq!(fq.mul(2, 2), 1);
        assert_eq!(fq.inv(2), 2);
        assert_eq!(fq.neg(1), 2);
        assert_eq!(fq.trace(2), 2);
        assert_eq!(fq.legendre(1), 1);
        assert_eq!(fq.legendre(2), -1);
    }

    #[test]
    fn even_q_rejected() {
        assert!(FieldSpec::new(2, 1).build().is_err());
        assert!(FieldSpec::new(4, 1).build().is_err());
    }

    #[test]
    fn f9_field_axioms() {
        let fq = FieldSpec::new(3, 2).build().unwrap();
        assert_eq!(fq.q, 9);
        // the deterministic modulus for p=3 is u^2+1 (u^2, u^2+u reducible? u^2 reducible,
        // u^2+1 has no root in F_3)
        assert_eq!(fq.modulus, vec![1, 0, 1]);
        for a in fq.elems() {
            for b in fq.elems() {
                assert_eq!(fq.add(a, b), fq.add(b, a));
                assert_eq!(fq.mul(a, b), fq.mul(b, a));
                if b != 0 {
                    let binv = fq.inv(b);
                    assert_eq!(fq.mul(fq.mul(a, b), binv), a);
                }
                for c in fq.elems() {
                    assert_eq!(fq.mul(a, fq.add(b, c)), fq.add(fq.mul(a, b), fq.mul(a, c)));
                }
            }
        }
    }

    #[test]
    fn trace_is_additive_onto_fp() {
        let fq = FieldSpec::new(3, 2).build().unwrap();
        let mut seen = [0usize; 3];
        for a in fq.elems() {
            for b in fq.elems() {
                let t = fq.trace(fq.add(a, b));
                let s = (fq.trace(a) + fq.trace(b)) % 3;
                assert_eq!(t, s);
            }
            seen[fq.trace(a) as usize] += 1;
        }
        // trace is a surjective F_p-linear map: fibers of equal size
        assert_eq!(seen, [3, 3, 3]);
    }

    #[test]
    fn legendre_multiplicative_f25() {
        let fq = FieldSpec::new(5, 2).build().unwrap();
        for a in fq.elems() {
            for b in fq.elems() {
                assert_eq!(
                    fq.legendre(fq.mul(a, b)) as i32,
                    fq.legendre(a) as i32 * fq.legendre(b) as i32
                );
            }
        }
    }
}

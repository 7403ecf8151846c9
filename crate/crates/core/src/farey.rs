//! Generalised lines in T^2 and the two-dimensional Farey dissection.
//!
//! A generalised line L(d.c) is the set of rationals a/r in T^2 lying on an
//! affine line d.c . x = k with gcd(a1,a2,r) = gcd(d,k) = 1. The dissection
//! partitions T^2 into ultrametric balls D(a,r,Q) centred at rationals lying
//! on lines whose height sits in an explicit window. All height inequalities
//! carry half-integer exponents; they are evaluated exactly by comparing
//! doubled degrees, never by rounding.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Fq;
use crate::laurent::Laurent;
use crate::poly::{self, Poly};

/// Stand-in for deg 0 = -infinity in height arithmetic.
pub(crate) const NEG_INF: i64 = i64::MIN / 8;

fn deg_or(p: &Poly) -> i64 {
    if p.is_zero() {
        NEG_INF
    } else {
        p.degree()
    }
}

/// A generalised line: monic d together with a primitive pair c.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GenLine {
    pub d: Poly,
    pub c: (Poly, Poly),
}

/// Is (c1, c2) primitive: gcd 1 and c1 monic, or c1 = 0 and c2 monic.
pub fn is_primitive_pair(c1: &Poly, c2: &Poly, fq: &Fq) -> bool {
    let monic_ok = if c1.is_zero() { c2.is_monic() } else { c1.is_monic() };
    monic_ok && poly::gcd(c1, c2, fq).is_one()
}

impl GenLine {
    pub fn new(d: Poly, c1: Poly, c2: Poly, fq: &Fq) -> Result<GenLine> {
        if !d.is_monic() {
            return Err(Error::invalid("line parameter d must be monic"));
        }
        if !is_primitive_pair(&c1, &c2, fq) {
            return Err(Error::invalid("c must be a primitive pair"));
        }
        Ok(GenLine { d, c: (c1, c2) })
    }

    /// deg |d c1| (NEG_INF when c1 = 0).
    pub fn dc1_deg(&self) -> i64 {
        deg_or(&self.c.0).saturating_add(self.d.degree())
    }

    pub fn dc2_deg(&self) -> i64 {
        deg_or(&self.c.1).saturating_add(self.d.degree())
    }

    /// deg |d c| = deg d + max(deg c1, deg c2).
    pub fn dc_deg(&self) -> i64 {
        self.dc1_deg().max(self.dc2_deg())
    }

    /// c^perp = (-c2, c1).
    pub fn c_perp(&self, fq: &Fq) -> (Poly, Poly) {
        (self.c.1.neg(fq), self.c.0.clone())
    }
}

/// A rational point a/r in T^2 with gcd(a1, a2, r) = 1 and |a| < |r|.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalPoint2 {
    pub a: (Poly, Poly),
    pub r: Poly,
}

impl RationalPoint2 {
    pub fn new(a1: Poly, a2: Poly, r: Poly, fq: &Fq) -> Result<RationalPoint2> {
        if !r.is_monic() {
            return Err(Error::invalid("denominator must be monic"));
        }
        if a1.degree() >= r.degree() || a2.degree() >= r.degree() {
            return Err(Error::invalid("numerator must satisfy |a| < |r|"));
        }
        let g = poly::gcd(&poly::gcd(&a1, &a2, fq), &r, fq);
        if !g.is_one() {
            return Err(Error::invalid("point must be primitive: gcd(a1, a2, r) = 1"));
        }
        Ok(RationalPoint2 { a: (a1, a2), r })
    }

    pub fn y(&self) -> i64 {
        self.r.degree()
    }
}

/// The k with d c . a = k r, when membership holds.
pub fn line_k(pt: &RationalPoint2, line: &GenLine, fq: &Fq) -> Option<Poly> {
    let s = line.c.0.mul(&pt.a.0, fq).add(&line.c.1.mul(&pt.a.1, fq), fq);
    let ds = line.d.mul(&s, fq);
    let (k, rem) = ds.divrem(&pt.r, fq).ok()?;
    if !rem.is_zero() {
        return None;
    }
    if poly::gcd(&line.d, &k, fq).is_one() {
        Some(k)
    } else {
        None
    }
}

/// Does a/r lie on L(d.c)?
pub fn line_membership(pt: &RationalPoint2, line: &GenLine, fq: &Fq) -> bool {
    line_k(pt, line, fq).is_some()
}

/// All lines through the point with deg|d c1| <= Y/2 and deg|d c2| < Y/2
/// (exact half-integer comparisons), sorted by (deg|dc|, d, c).
pub fn find_lines(pt: &RationalPoint2, fq: &Fq) -> Result<Vec<GenLine>> {
    let y = pt.y();
    let mut out = Vec::new();
    for d in poly::monic_divisors(&pt.r, fq)? {
        let dd = d.degree();
        if 2 * dd > y {
            continue;
        }
        // deg c1 <= (y - 2 dd)/2, deg c2 <= ceil((y - 2 dd)/2) - 1
        let c1_max = (y - 2 * dd).div_euclid(2);
        let c2_max = (y - 2 * dd - 1).div_euclid(2);
        for (c1, c2) in primitive_pairs_windowed(fq, c1_max, c2_max) {
            let line = GenLine { d: d.clone(), c: (c1, c2) };
            if line_membership(pt, &line, fq) {
                out.push(line);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Verification(format!(
            "no admissible line through {pt:?}: contradicts the existence lemma"
        )));
    }
    out.sort_by_key(|l| (l.dc_deg(), l.d.clone(), l.c.0.clone(), l.c.1.clone()));
    Ok(out)
}

/// Primitive pairs with deg c1 <= c1_max, deg c2 <= c2_max (negative bound
/// means the coordinate must vanish).
fn primitive_pairs_windowed(fq: &Fq, c1_max: i64, c2_max: i64) -> Vec<(Poly, Poly)> {
    let mut out = Vec::new();
    if c2_max >= 0 {
        // c1 = 0 forces c2 = 1 (primitivity)
        out.push((Poly::zero(), Poly::one()));
    }
    if c1_max < 0 {
        return out;
    }
    for d1 in 0..=c1_max {
        for c1 in poly::monic_of_degree(fq, d1) {
            for c2 in poly::polys_below_degree(fq, c2_max + 1) {
                if poly::gcd(&c1, &c2, fq).is_one() {
                    out.push((c1.clone(), c2));
                }
            }
        }
    }
    out
}

/// Decomposition a/r = alpha c^perp / r + dd/d: |alpha| < |r/d|,
/// gcd(alpha, r/d) = 1, dd an integer pair with |dd| < |d|, gcd(dd, d) = 1.
pub fn decompose_on_line(
    pt: &RationalPoint2,
    line: &GenLine,
    fq: &Fq,
) -> Result<(Poly, (Poly, Poly))> {
    if !line_membership(pt, line, fq) {
        return Err(Error::invalid("point does not lie on the line"));
    }
    let rd = pt.r.div_exact(&line.d, fq);
    let alpha = solve_scalar_on_line(&pt.a, &line.c, &rd, fq)?;
    let cperp = line.c_perp(fq);
    let num1 = pt.a.0.sub(&alpha.mul(&cperp.0, fq), fq);
    let num2 = pt.a.1.sub(&alpha.mul(&cperp.1, fq), fq);
    let dd1 = num1.div_exact(&rd, fq);
    let dd2 = num2.div_exact(&rd, fq);
    // gcd(dd, d) = 1 is forced by gcd(d, k) = 1 with k = c . dd
    debug_assert!(poly::gcd(&poly::gcd(&dd1, &dd2, fq), &line.d, fq).is_one());
    Ok((alpha, (dd1, dd2)))
}

/// Find alpha with a = alpha c^perp mod m (componentwise), gcd(alpha, m)=1.
fn solve_scalar_on_line(
    a: &(Poly, Poly),
    c: &(Poly, Poly),
    m: &Poly,
    fq: &Fq,
) -> Result<Poly> {
    if m.is_one() {
        return Ok(Poly::zero());
    }
    let fac = poly::factor(m, fq)?;
    let mut alpha = Poly::zero();
    let mut modulus = Poly::one();
    for (prime, e) in &fac.factors {
        let pk = prime.pow(*e as u64, fq);
        // a1 = -alpha c2, a2 = alpha c1 mod pk
        let local = if !prime.divides(&c.0, fq) {
            let inv = poly::inv_mod(&c.0, &pk, fq)?;
            a.1.mul(&inv, fq).rem(&pk, fq)
        } else {
            let mc2 = c.1.neg(fq);
            let inv = poly::inv_mod(&mc2, &pk, fq)?;
            a.0.mul(&inv, fq).rem(&pk, fq)
        };
        // CRT combine alpha (mod modulus) with local (mod pk)
        let (_, u, v) = poly::extended_gcd(&modulus, &pk, fq);
        let new_mod = modulus.mul(&pk, fq);
        let part1 = alpha.mul(&v, fq).mul(&pk, fq);
        let part2 = local.mul(&u, fq).mul(&modulus, fq);
        alpha = part1.add(&part2, fq).rem(&new_mod, fq);
        modulus = new_mod;
    }
    let c_perp = (c.1.neg(fq), c.0.clone());
    let ok1 = a.0.sub(&alpha.mul(&c_perp.0, fq), fq).rem(m, fq).is_zero();
    let ok2 = a.1.sub(&alpha.mul(&c_perp.1, fq), fq).rem(m, fq).is_zero();
    if !ok1 || !ok2 {
        return Err(Error::Verification("scalar solve failed: point not on line mod m".into()));
    }
    Ok(alpha)
}

/// One-dimensional sharpened Dirichlet step: given gcd(a, r) = 1 with
/// |r| = q^M, produce (a1, r1) with r1 monic, |r1| = q^{M+1},
/// gcd(a1, r1) = 1 and |a/r - a1/r1| = q^{-2M-1} exactly.
pub fn dio1dim(a: &Poly, r: &Poly, fq: &Fq) -> Result<(Poly, Poly)> {
    if !poly::gcd(a, r, fq).is_one() {
        return Err(Error::invalid("dio1dim needs gcd(a, r) = 1"));
    }
    let m = r.degree();
    // y = a/r + t^{-2M-1} = (a t^{2M+1} + r) / (r t^{2M+1})
    let shift = (2 * m + 1) as usize;
    let num = a.shift(shift).add(r, fq);
    let den = r.shift(shift);
    // best approximation with |den| <= q^{M+1} via continued fractions
    let (mut p0, mut p1) = (Poly::zero(), Poly::one());
    let (mut q0, mut q1) = (Poly::one(), Poly::zero());
    let mut x0 = num;
    let mut x1 = den;
    let mut best: Option<(Poly, Poly)> = None;
    // convergents of den/num style iteration: standard CF on (num, den)
    std::mem::swap(&mut x0, &mut x1);
    // x0 = den, x1 = num: we expand num/den, so start with integer part of num/den
    std::mem::swap(&mut x0, &mut x1);
    loop {
        if x1.is_zero() {
            break;
        }
        let (quot, rem) = x0.divrem(&x1, fq).unwrap();
        let pn = quot.mul(&p1, fq).add(&p0, fq);
        let qn = quot.mul(&q1, fq).add(&q0, fq);
        if qn.degree() <= m + 1 {
            best = Some((pn.clone(), qn.clone()));
        } else {
            break;
        }
        p0 = p1;
        p1 = pn;
        q0 = q1;
        q1 = qn;
        x0 = x1.clone();
        x1 = rem;
    }
    let (a1, r1) =
        best.ok_or_else(|| Error::Verification("no convergent found in dio1dim".into()))?;
    let (unit, r1m) = r1.monic(fq);
    let a1 = a1.scale(fq.inv(unit), fq).rem(&r1m, fq);
    if r1m.degree() != m + 1 {
        return Err(Error::Verification(format!(
            "dio1dim: |r1| = q^{} instead of q^{}",
            r1m.degree(),
            m + 1
        )));
    }
    // |a/r - a1/r1| = |a r1 - a1 r| / |r r1| must equal q^{-2M-1}
    let diff = a.mul(&r1m, fq).sub(&a1.mul(r, fq), fq);
    if diff.degree() != 0 {
        return Err(Error::Verification("dio1dim: distance is not exactly (|r||r1|)^{-1}".into()));
    }
    if !poly::gcd(&a1, &r1m, fq).is_one() {
        return Err(Error::Verification("dio1dim: gcd(a1, r1) != 1".into()));
    }
    Ok((a1, r1m))
}

/// Same-line neighbour: a point a2/r2 on L(d.c) and the same affine line,
/// with |r2| = q |r| and distance exactly |d c|/(|r||r2|). Requires
/// |d c|^2 <= |r|.
pub fn neighbor_on_line(
    pt: &RationalPoint2,
    line: &GenLine,
    fq: &Fq,
) -> Result<RationalPoint2> {
    if 2 * line.dc_deg() > pt.y() {
        return Err(Error::invalid("height condition |dc|^2 <= |r| violated"));
    }
    let (alpha, dd) = decompose_on_line(pt, line, fq)?;
    let rd = pt.r.div_exact(&line.d, fq);
    let cperp = line.c_perp(fq);
    let (alpha1, rho1) = dio1dim(&alpha, &rd, fq)?;
    // a2/r2 = alpha1 c^perp/(rho1 d) + dd/d
    let r2 = rho1.mul(&line.d, fq);
    let a2_1 = alpha1.mul(&cperp.0, fq).add(&rho1.mul(&dd.0, fq), fq);
    let a2_2 = alpha1.mul(&cperp.1, fq).add(&rho1.mul(&dd.1, fq), fq);
    let neighbor = RationalPoint2::new(a2_1, a2_2, r2.clone(), fq)?;
    if r2.degree() != pt.y() + 1 {
        return Err(Error::Verification("neighbour: |r2| != q |r|".into()));
    }
    let k1 = line_k(pt, line, fq)
        .ok_or_else(|| Error::Verification("input left the line".into()))?;
    let k2 = line_k(&neighbor, line, fq)
        .ok_or_else(|| Error::Verification("neighbour is not on the line".into()))?;
    if k1 != k2 {
        return Err(Error::Verification("neighbour changed the affine line k".into()));
    }
    let dist = point_distance_deg(pt, &neighbor, fq);
    let expect = line.dc_deg() - pt.y() - r2.degree();
    if dist != expect {
        return Err(Error::Verification(format!(
            "neighbour distance q^{dist} instead of q^{expect}"
        )));
    }
    Ok(neighbor)
}

/// deg |a1/r1 - a2/r2| (NEG_INF when equal).
pub fn point_distance_deg(p1: &RationalPoint2, p2: &RationalPoint2, fq: &Fq) -> i64 {
    let n1 = p1.a.0.mul(&p2.r, fq).sub(&p2.a.0.mul(&p1.r, fq), fq);
    let n2 = p1.a.1.mul(&p2.r, fq).sub(&p2.a.1.mul(&p1.r, fq), fq);
    let dn = deg_or(&n1).max(deg_or(&n2));
    if dn == NEG_INF {
        return NEG_INF;
    }
    dn - p1.r.degree() - p2.r.degree()
}

/// On-line residues mod r via the unit-scalar parametrisation
/// { alpha c^perp mod r : gcd(alpha, r) = 1 }, verified against the direct
/// filter { a : gcd(a, r) = 1, c.a = 0 mod r }.
pub fn residues_on_line(c: &(Poly, Poly), r: &Poly, fq: &Fq) -> Result<Vec<(Poly, Poly)>> {
    let g = poly::gcd(&poly::gcd(&c.0, &c.1, fq), r, fq);
    if !g.is_one() {
        return Err(Error::invalid("c must be primitive relative to r"));
    }
    if r.is_one() {
        return Ok(vec![(Poly::zero(), Poly::zero())]);
    }
    let cperp = (c.1.neg(fq), c.0.clone());
    let mut set: Vec<(Poly, Poly)> = Vec::new();
    for alpha in poly::polys_below_degree(fq, r.degree()) {
        if !poly::gcd(&alpha, r, fq).is_one() {
            continue;
        }
        set.push((alpha.mul(&cperp.0, fq).rem(r, fq), alpha.mul(&cperp.1, fq).rem(r, fq)));
    }
    set.sort();
    set.dedup();
    let mut filt: Vec<(Poly, Poly)> = Vec::new();
    for a1 in poly::polys_below_degree(fq, r.degree()) {
        for a2 in poly::polys_below_degree(fq, r.degree()) {
            let prim = poly::gcd(&poly::gcd(&a1, &a2, fq), r, fq).is_one();
            if !prim {
                continue;
            }
            let dot = c.0.mul(&a1, fq).add(&c.1.mul(&a2, fq), fq);
            if dot.rem(r, fq).is_zero() {
                filt.push((a1.clone(), a2));
            }
        }
    }
    filt.sort();
    if set != filt {
        return Err(Error::Verification(
            "on-line residue parametrisation disagrees with the direct filter".into(),
        ));
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// The partition of T^2
// ---------------------------------------------------------------------------

/// One ball D(a, r, Q) of the dissection together with its line datum.
#[derive(Debug, Clone)]
pub struct PartitionCell {
    pub point: RationalPoint2,
    pub line: GenLine,
    pub q_param: i64,
}

impl PartitionCell {
    pub fn y(&self) -> i64 {
        self.point.y()
    }

    /// Number of leading Laurent coefficients (t^{-1}..t^{-m}) pinned by the
    /// strict ball inequality |xi - a/r| < |r|^{-1} q^{-Q/2}: the unique
    /// integer realization is m = Y + floor(Q/2).
    pub fn pinned_coeffs(&self) -> i64 {
        self.y() + self.q_param.div_euclid(2)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "r": self.point.r.to_ints(),
            "d": self.line.d.to_ints(),
            "c": [self.line.c.0.to_ints(), self.line.c.1.to_ints()],
            "a": [self.point.a.0.to_ints(), self.point.a.1.to_ints()],
            "y": self.y(),
            "pinned_coeffs": self.pinned_coeffs(),
        })
    }

    pub fn check_invariants(&self, fq: &Fq) -> Result<()> {
        let y = self.y();
        if !self.line.d.divides(&self.point.r, fq) {
            return Err(Error::Verification("d does not divide r".into()));
        }
        if 2 * self.line.dc_deg() < 2 * y - self.q_param {
            return Err(Error::Verification("lower height window violated".into()));
        }
        if 2 * self.line.dc_deg() > y || 2 * self.line.dc2_deg() >= y {
            return Err(Error::Verification("upper height window violated".into()));
        }
        if !line_membership(&self.point, &self.line, fq) {
            return Err(Error::Verification("cell point not on its line".into()));
        }
        Ok(())
    }
}

/// Line family for a fixed r under the square-root window (the uniqueness
/// window; the partition's lower bound is applied separately).
fn window_lines(fq: &Fq, r: &Poly) -> Result<Vec<GenLine>> {
    let y = r.degree();
    let mut out = Vec::new();
    for d in poly::monic_divisors(r, fq)? {
        let dd = d.degree();
        if 2 * dd > y {
            continue;
        }
        let c1_max = (y - 2 * dd).div_euclid(2);
        let c2_max = (y - 2 * dd - 1).div_euclid(2);
        for (c1, c2) in primitive_pairs_windowed(fq, c1_max, c2_max) {
            out.push(GenLine { d: d.clone(), c: (c1, c2) });
        }
    }
    Ok(out)
}

/// For one monic r: every primitive a assigned to its unique window line.
/// Asserts the disjoint-cover property of the window family over primitive
/// residues (the corollary-level statement), so callers get it re-verified
/// on every run.
pub fn line_decomposition_for_r(
    fq: &Fq,
    r: &Poly,
) -> Result<Vec<(GenLine, Vec<(Poly, Poly)>)>> {
    let y = r.degree();
    let q = fq.q as u64;
    let lines = window_lines(fq, r)?;
    let size = q.pow(y as u32);
    let idx_of = |p: &Poly| -> u64 {
        let mut acc = 0u64;
        for (i, &c) in p.coeffs().iter().enumerate() {
            acc += c as u64 * q.pow(i as u32);
        }
        acc
    };
    let all: Vec<Poly> = poly::polys_below_degree(fq, y);
    let mut primitive = vec![false; (size * size) as usize];
    let mut prim_count = 0u64;
    for a1 in &all {
        let g1 = poly::gcd(a1, r, fq);
        for a2 in &all {
            if poly::gcd(&g1, a2, fq).is_one() {
                primitive[(idx_of(a1) * size + idx_of(a2)) as usize] = true;
                prim_count += 1;
            }
        }
    }
    let mut hits = vec![0u8; (size * size) as usize];
    let mut out: Vec<(GenLine, Vec<(Poly, Poly)>)> = Vec::new();
    for line in lines {
        let mut pts: Vec<(Poly, Poly)> = Vec::new();
        if line.d.is_one() {
            let cperp = line.c_perp(fq);
            let mut seen = std::collections::BTreeSet::new();
            for alpha in &all {
                if !poly::gcd(alpha, r, fq).is_one() {
                    continue;
                }
                let a1 = alpha.mul(&cperp.0, fq).rem(r, fq);
                let a2 = alpha.mul(&cperp.1, fq).rem(r, fq);
                if seen.insert((a1.clone(), a2.clone())) {
                    let pt = RationalPoint2 { a: (a1.clone(), a2.clone()), r: r.clone() };
                    if !line_membership(&pt, &line, fq) {
                        return Err(Error::Verification(
                            "parametrised point fails line membership".into(),
                        ));
                    }
                    pts.push((a1, a2));
                }
            }
        } else {
            for a1 in &all {
                for a2 in &all {
                    if !primitive[(idx_of(a1) * size + idx_of(a2)) as usize] {
                        continue;
                    }
                    let pt = RationalPoint2 { a: (a1.clone(), a2.clone()), r: r.clone() };
                    if line_membership(&pt, &line, fq) {
                        pts.push((a1.clone(), a2.clone()));
                    }
                }
            }
        }
        for (a1, a2) in &pts {
            hits[(idx_of(a1) * size + idx_of(a2)) as usize] += 1;
        }
        if !pts.is_empty() {
            out.push((line, pts));
        }
    }
    let mut covered = 0u64;
    for (i, &h) in hits.iter().enumerate() {
        if h > 1 {
            return Err(Error::Verification(format!(
                "residue index {i} lies on {h} window lines for r = {r:?}"
            )));
        }
        if h == 1 {
            if !primitive[i] {
                return Err(Error::Verification("non-primitive residue claimed by a line".into()));
            }
            covered += 1;
        }
    }
    if covered != prim_count {
        return Err(Error::Verification(format!(
            "window lines cover {covered} of {prim_count} primitive residues for r = {r:?}"
        )));
    }
    Ok(out)
}

/// Enumerate the full dissection for the given Q.
pub fn enumerate_partition(fq: &Fq, q_param: i64) -> Result<Vec<PartitionCell>> {
    if q_param < 0 {
        return Ok(vec![]);
    }
    let mut rs: Vec<Poly> = Vec::new();
    for y in 0..=q_param {
        rs.extend(poly::monic_of_degree(fq, y));
    }
    let per_r: Result<Vec<Vec<PartitionCell>>> = rs
        .par_iter()
        .map(|r| {
            let y = r.degree();
            let mut cells = Vec::new();
            for (line, pts) in line_decomposition_for_r(fq, r)? {
                if 2 * line.dc_deg() < 2 * y - q_param {
                    continue;
                }
                for (a1, a2) in pts {
                    let cell = PartitionCell {
                        point: RationalPoint2 { a: (a1, a2), r: r.clone() },
                        line: line.clone(),
                        q_param,
                    };
                    cell.check_invariants(fq)?;
                    cells.push(cell);
                }
            }
            Ok(cells)
        })
        .collect();
    Ok(per_r?.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub q: u32,
    pub q_param: i64,
    pub cells: u64,
    pub grid: u64,
    pub cover: bool,
    pub disjoint: bool,
    /// grid precision (Laurent coefficients per coordinate)
    pub precision: i64,
}

/// Exhaustive cover/disjointness check of the dissection over the grid of
/// T^2 at precision Q + ceil(Q/2).
pub fn verify_partition(fq: &Fq, q_param: i64, budget: f64) -> Result<PartitionReport> {
    let g = q_param + (q_param + 1).div_euclid(2);
    let q = fq.q as u64;
    let grid: u64 = q
        .checked_pow((2 * g) as u32)
        .ok_or_else(|| Error::infeasible("partition grid", f64::INFINITY, budget))?;
    if (grid as f64) > budget {
        return Err(Error::infeasible(
            format!("partition grid of {grid} points"),
            grid as f64,
            budget,
        ));
    }
    let cells = enumerate_partition(fq, q_param)?;
    let mut counts = vec![0u8; grid as usize];
    let gpow: Vec<u64> = (0..2 * g.max(1)).map(|e| q.pow(e as u32)).collect();
    for cell in &cells {
        let m = cell.pinned_coeffs();
        let mut digits = [vec![0u16; m as usize], vec![0u16; m as usize]];
        for (coord, digit) in digits.iter_mut().enumerate() {
            let a = if coord == 0 { &cell.point.a.0 } else { &cell.point.a.1 };
            let l = Laurent::from_rational(a, &cell.point.r, g.max(1), fq)?;
            for e in 1..=m {
                digit[(e - 1) as usize] = l.coeff(-e)?;
            }
        }
        let free = (g - m) as u32;
        let free_count = q.pow(free);
        let mut base = 0u64;
        for e in 0..m {
            base += digits[0][e as usize] as u64 * gpow[(g - 1 - e) as usize];
            base += digits[1][e as usize] as u64 * gpow[(2 * g - 1 - e) as usize];
        }
        for f1 in 0..free_count {
            let mut idx1 = base;
            let mut v = f1;
            for e in m..g {
                idx1 += (v % q) * gpow[(g - 1 - e) as usize];
                v /= q;
            }
            for f2 in 0..free_count {
                let mut idx = idx1;
                let mut w = f2;
                for e in m..g {
                    idx += (w % q) * gpow[(2 * g - 1 - e) as usize];
                    w /= q;
                }
                counts[idx as usize] = counts[idx as usize].saturating_add(1);
            }
        }
    }
    let cover = counts.iter().all(|&c| c >= 1);
    let disjoint = counts.iter().all(|&c| c <= 1);
    Ok(PartitionReport {
        q: fq.q,
        q_param,
        cells: cells.len() as u64,
        grid,
        cover,
        disjoint,
        precision: g,
    })
}

// ---------------------------------------------------------------------------
// Spacing / repulsion checks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RepulsionReport {
    pub pairs_checked: u64,
    pub violations: u64,
    pub kernel_checks: u64,
    pub uniqueness_checks: u64,
    pub low_r_cells_once: bool,
}

/// Exhaustive scan of the line-repulsion dichotomy (two on-line points are
/// either equal or at distance >= max |d_i c_i| / |r_1 r_2|), the kernel
/// emptiness statement behind it, the shared-point uniqueness of (d, c),
/// and the low-denominator single-appearance variant of the dissection.
pub fn check_line_repulsion(fq: &Fq, max_rdeg: i64) -> Result<RepulsionReport> {
    let mut pairs_checked = 0u64;
    let mut violations = 0u64;

    let mut by_line: Vec<(GenLine, RationalPoint2)> = Vec::new();
    for y in 0..=max_rdeg {
        for r in poly::monic_of_degree(fq, y) {
            for (line, pts) in line_decomposition_for_r(fq, &r)? {
                for (a1, a2) in pts {
                    by_line.push((
                        line.clone(),
                        RationalPoint2 { a: (a1, a2), r: r.clone() },
                    ));
                }
            }
        }
    }
    for (l1, p1) in &by_line {
        if 2 * l1.dc_deg() > p1.y() {
            continue;
        }
        for (l2, p2) in &by_line {
            if 2 * l2.dc_deg() > p2.y() {
                continue;
            }
            pairs_checked += 1;
            let dist = point_distance_deg(p1, p2, fq);
            if dist == NEG_INF {
                continue;
            }
            let threshold = l1.dc_deg().max(l2.dc_deg()) - p1.y() - p2.y();
            if dist < threshold {
                violations += 1;
            }
        }
    }

    // kernel emptiness behind the repulsion: primitive solutions of
    // C a = 0 mod prime^k require k <= v_prime(det C)
    let mut kernel_checks = 0u64;
    for prime in poly::primes_of_degree(fq, 1) {
        for (c1, c2) in poly::primitive_pairs(fq, 1) {
            for (c3, c4) in poly::primitive_pairs(fq, 1) {
                let det = c1.mul(&c4, fq).sub(&c2.mul(&c3, fq), fq);
                if det.is_zero() {
                    continue;
                }
                let mut k0 = 0i64;
                let mut d = det.clone();
                while prime.divides(&d, fq) {
                    d = d.div_exact(&prime, fq);
                    k0 += 1;
                }
                for k in (k0 + 1)..=(k0 + 2).min(3) {
                    kernel_checks += 1;
                    let pk = prime.pow(k as u64, fq);
                    for a1 in poly::polys_below_degree(fq, pk.degree()) {
                        for a2 in poly::polys_below_degree(fq, pk.degree()) {
                            let prim = poly::gcd(&poly::gcd(&a1, &a2, fq), &prime, fq).is_one();
                            if !prim {
                                continue;
                            }
                            let e1 = c1.mul(&a1, fq).add(&c2.mul(&a2, fq), fq).rem(&pk, fq);
                            let e2 = c3.mul(&a1, fq).add(&c4.mul(&a2, fq), fq).rem(&pk, fq);
                            if e1.is_zero() && e2.is_zero() {
                                violations += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    // shared-point uniqueness of d.c under the smallness hypothesis
    let mut uniqueness_checks = 0u64;
    for y in 0..=max_rdeg {
        for r in poly::monic_of_degree(fq, y) {
            let mut points: Vec<(Poly, Poly)> = Vec::new();
            for (_, pts) in line_decomposition_for_r(fq, &r)? {
                points.extend(pts);
            }
            points.sort();
            points.dedup();
            for pt in points {
                let p = RationalPoint2 { a: pt, r: r.clone() };
                let mut through: Vec<GenLine> = Vec::new();
                for d in poly::monic_divisors(&r, fq)? {
                    if 2 * d.degree() > y {
                        continue;
                    }
                    let cmax = (y - 2 * d.degree()).div_euclid(2);
                    for (c1, c2) in primitive_pairs_windowed(fq, cmax, cmax) {
                        let line = GenLine { d: d.clone(), c: (c1, c2) };
                        if 2 * line.dc_deg() > y {
                            continue;
                        }
                        if line_membership(&p, &line, fq) {
                            through.push(line);
                        }
                    }
                }
                for l1 in &through {
                    for l2 in &through {
                        let small1 = deg_or(&l1.c.0).saturating_add(deg_or(&l2.c.1));
                        let small2 = deg_or(&l1.c.1).saturating_add(deg_or(&l2.c.0));
                        let bound = y - l1.d.degree() - l2.d.degree();
                        if small1 < bound && small2 < bound {
                            uniqueness_checks += 1;
                            let same = l1.d == l2.d && l1.c == l2.c;
                            if !same {
                                violations += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    // low-denominator variant: for 2Y <= Q every D(a, r, Q) appears exactly
    // once in the dissection
    let q_param = max_rdeg.max(2);
    let cells = enumerate_partition(fq, q_param)?;
    let mut low_counts: std::collections::BTreeMap<(Poly, Poly, Poly), u32> = Default::default();
    for cell in &cells {
        if 2 * cell.y() <= q_param {
            *low_counts
                .entry((cell.point.a.0.clone(), cell.point.a.1.clone(), cell.point.r.clone()))
                .or_insert(0) += 1;
        }
    }
    let mut expected = 0u64;
    for y in 0..=(q_param / 2) {
        for r in poly::monic_of_degree(fq, y) {
            for a1 in poly::polys_below_degree(fq, y) {
                for a2 in poly::polys_below_degree(fq, y) {
                    if poly::gcd(&poly::gcd(&a1, &a2, fq), &r, fq).is_one() {
                        expected += 1;
                    }
                }
            }
        }
    }
    let low_r_cells_once = low_counts.values().all(|&c| c == 1)
        && low_counts.len() as u64 == expected;

    Ok(RepulsionReport {
        pairs_checked,
        violations,
        kernel_checks,
        uniqueness_checks,
        low_r_cells_once,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;

    fn f3() -> Fq {
        FieldSpec::new(3, 1).build().unwrap()
    }

    #[test]
    fn membership_examples() {
        let fq = f3();
        let pt = RationalPoint2::new(Poly::zero(), Poly::zero(), Poly::one(), &fq).unwrap();
        let line = GenLine::new(Poly::one(), Poly::one(), Poly::zero(), &fq).unwrap();
        assert!(line_membership(&pt, &line, &fq));
        let pt =
            RationalPoint2::new(Poly::one(), Poly::one(), Poly::t_pow(2), &fq).unwrap();
        let line =
            GenLine::new(Poly::one(), Poly::one(), Poly::constant(2), &fq).unwrap();
        assert!(line_membership(&pt, &line, &fq));
        let line2 = GenLine::new(Poly::from_ints(&fq, &[1, 1]), Poly::one(), Poly::zero(), &fq)
            .unwrap();
        assert!(!line_membership(&pt, &line2, &fq));
    }

    #[test]
    fn find_lines_examples() {
        let fq = f3();
        let pt = RationalPoint2::new(Poly::zero(), Poly::zero(), Poly::one(), &fq).unwrap();
        let lines = find_lines(&pt, &fq).unwrap();
        assert!(lines
            .iter()
            .any(|l| l.d.is_one() && l.c.0.is_one() && l.c.1.is_zero()));
        let pt =
            RationalPoint2::new(Poly::one(), Poly::one(), Poly::t_pow(2), &fq).unwrap();
        let lines = find_lines(&pt, &fq).unwrap();
        assert!(lines
            .iter()
            .any(|l| l.d.is_one() && l.c.0.is_one() && l.c.1 == Poly::constant(2)));
        // non-primitive point rejected at construction
        assert!(RationalPoint2::new(Poly::t(), Poly::zero(), Poly::t_pow(2), &fq).is_err());
    }

    #[test]
    fn find_lines_existence_prime_r() {
        let fq = f3();
        for r in poly::primes_of_degree(&fq, 1) {
            for a1 in poly::polys_below_degree(&fq, 1) {
                for a2 in poly::polys_below_degree(&fq, 1) {
                    if !poly::gcd(&poly::gcd(&a1, &a2, &fq), &r, &fq).is_one() {
                        continue;
                    }
                    let pt = RationalPoint2::new(a1.clone(), a2.clone(), r.clone(), &fq).unwrap();
                    assert!(!find_lines(&pt, &fq).unwrap().is_empty());
                }
            }
        }
    }

    #[test]
    fn decompose_reconstructs_exactly() {
        let fq = f3();
        let pt =
            RationalPoint2::new(Poly::one(), Poly::one(), Poly::t_pow(2), &fq).unwrap();
        let line =
            GenLine::new(Poly::one(), Poly::one(), Poly::constant(2), &fq).unwrap();
        let (alpha, dd) = decompose_on_line(&pt, &line, &fq).unwrap();
        let cperp = line.c_perp(&fq);
        let rd = pt.r.div_exact(&line.d, &fq);
        let rhs1 = alpha.mul(&cperp.0, &fq).add(&dd.0.mul(&rd, &fq), &fq);
        let rhs2 = alpha.mul(&cperp.1, &fq).add(&dd.1.mul(&rd, &fq), &fq);
        assert_eq!(pt.a.0, rhs1.rem(&pt.r, &fq));
        assert_eq!(pt.a.1, rhs2.rem(&pt.r, &fq));
        assert!(poly::gcd(&alpha, &rd, &fq).is_one());
    }

    #[test]
    fn decompose_roundtrip_exhaustive() {
        let fq = f3();
        for y in 0..=3i64 {
            for r in poly::monic_of_degree(&fq, y) {
                for (line, pts) in line_decomposition_for_r(&fq, &r).unwrap() {
                    for (a1, a2) in pts {
                        let pt = RationalPoint2 { a: (a1, a2), r: r.clone() };
                        let (alpha, dd) = decompose_on_line(&pt, &line, &fq).unwrap();
                        let rd = pt.r.div_exact(&line.d, &fq);
                        let cperp = line.c_perp(&fq);
                        let b1 =
                            alpha.mul(&cperp.0, &fq).add(&dd.0.mul(&rd, &fq), &fq).rem(&pt.r, &fq);
                        let b2 =
                            alpha.mul(&cperp.1, &fq).add(&dd.1.mul(&rd, &fq), &fq).rem(&pt.r, &fq);
                        assert_eq!((b1, b2), (pt.a.0.clone(), pt.a.1.clone()));
                    }
                }
            }
        }
    }

    #[test]
    fn neighbor_example_and_invariants() {
        let fq = f3();
        let pt = RationalPoint2::new(Poly::zero(), Poly::zero(), Poly::one(), &fq).unwrap();
        let line = GenLine::new(Poly::one(), Poly::one(), Poly::zero(), &fq).unwrap();
        let nb = neighbor_on_line(&pt, &line, &fq).unwrap();
        assert_eq!(nb.r.degree(), 1);
        assert!(nb.a.0.is_zero());
        assert_eq!(point_distance_deg(&pt, &nb, &fq), -1);
    }

    #[test]
    fn neighbor_exhaustive_small() {
        let fq = f3();
        for y in 0..=2i64 {
            for r in poly::monic_of_degree(&fq, y) {
                for (line, pts) in line_decomposition_for_r(&fq, &r).unwrap() {
                    if 2 * line.dc_deg() > y {
                        continue;
                    }
                    for (a1, a2) in pts {
                        let pt = RationalPoint2 { a: (a1, a2), r: r.clone() };
                        neighbor_on_line(&pt, &line, &fq).unwrap();
                    }
                }
            }
        }
    }

    #[test]
    fn residues_on_line_examples() {
        let fq = f3();
        let set = residues_on_line(&(Poly::one(), Poly::one()), &Poly::one(), &fq).unwrap();
        assert_eq!(set, vec![(Poly::zero(), Poly::zero())]);
        let set = residues_on_line(&(Poly::one(), Poly::one()), &Poly::t(), &fq).unwrap();
        assert_eq!(set.len(), 2);
        for r in poly::monic_up_to_degree(&fq, 3) {
            if r.is_one() {
                continue;
            }
            let set = residues_on_line(&(Poly::one(), Poly::one()), &r, &fq).unwrap();
            assert_eq!(set.len() as u64, poly::euler_phi(&r, &fq).unwrap());
        }
        assert!(residues_on_line(&(Poly::t(), Poly::t()), &Poly::t(), &fq).is_err());
    }

    #[test]
    fn partition_q0_and_q1() {
        let fq = f3();
        let cells = enumerate_partition(&fq, 0).unwrap();
        assert_eq!(cells.len(), 1);
        assert!(cells[0].point.r.is_one());
        assert_eq!(cells[0].pinned_coeffs(), 0);
        let rep = verify_partition(&fq, 0, 1e8).unwrap();
        assert!(rep.cover && rep.disjoint);
        assert_eq!(rep.cells, 1);
        assert_eq!(rep.grid, 1);
        // odd Q: strict-radius reading keeps the cover exact
        let rep = verify_partition(&fq, 1, 1e8).unwrap();
        assert!(rep.cover && rep.disjoint, "{rep:?}");
    }

    #[test]
    fn partition_q2_exact() {
        let fq = f3();
        let rep = verify_partition(&fq, 2, 1e8).unwrap();
        assert_eq!(rep.grid, 729);
        assert!(rep.cover, "cover fails: {rep:?}");
        assert!(rep.disjoint, "disjoint fails: {rep:?}");
    }

    #[test]
    fn repulsion_scan_small() {
        let fq = f3();
        let rep = check_line_repulsion(&fq, 2).unwrap();
        assert_eq!(rep.violations, 0, "{rep:?}");
        assert!(rep.pairs_checked > 0);
        assert!(rep.low_r_cells_once);
    }
}

//! Integer lattice geometry: sites, norms, cubes, rational directions, the
//! modules `L_{m,ω} = m·{k ∈ τℤ^d : ω·k = 0}` and their fundamental domains.
//!
//! Everything here is exact integer arithmetic. Heights `(ω/|ω|₁)·i` are
//! rationals with denominator `|ω|₁`.

use crate::error::{Error, Result};
use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A point of ℤ^d, `2 ≤ d ≤ MAX_DIM`. Unused trailing coordinates are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Site {
    c: [i64; MAX_DIM],
    d: u8,
}

impl Site {
    /// Panics unless `2 <= coords.len() <= MAX_DIM`.
    pub fn new(coords: &[i64]) -> Self {
        Self::try_new(coords).expect("site dimension out of range")
    }

    pub fn try_new(coords: &[i64]) -> Result<Self> {
        let d = coords.len();
        if !(2..=MAX_DIM).contains(&d) {
            return Err(Error::Dimension(d));
        }
        let mut c = [0; MAX_DIM];
        c[..d].copy_from_slice(coords);
        Ok(Self { c, d: d as u8 })
    }

    pub fn zero(d: usize) -> Self {
        Self::new(&vec![0; d])
    }

    /// The unit vector `e_axis`.
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut s = Self::zero(d);
        s.c[axis] = 1;
        s
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.c[..self.d as usize]
    }

    #[inline]
    pub fn get(&self, axis: usize) -> i64 {
        self.c[axis]
    }

    #[inline]
    pub fn set(&mut self, axis: usize, v: i64) {
        debug_assert!(axis < self.dim());
        self.c[axis] = v;
    }

    #[inline]
    pub fn l1_norm(&self) -> i64 {
        self.coords().iter().map(|x| x.abs()).sum()
    }

    #[inline]
    pub fn linf_norm(&self) -> i64 {
        self.coords().iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    #[inline]
    pub fn dot(&self, o: &Site) -> i64 {
        debug_assert_eq!(self.d, o.d);
        self.coords().iter().zip(o.coords()).map(|(a, b)| a * b).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0)
    }

    /// Componentwise Euclidean remainder modulo `tau`, each entry in `[0, tau)`.
    pub fn rem_euclid(&self, tau: i64) -> Site {
        let mut r = *self;
        for x in r.c[..self.dim()].iter_mut() {
            *x = x.rem_euclid(tau);
        }
        r
    }

    /// Index of `self.rem_euclid(tau)` in row-major order, in `[0, tau^d)`.
    pub fn class_index(&self, tau: i64) -> usize {
        let mut idx = 0usize;
        for &x in self.coords() {
            idx = idx * tau as usize + x.rem_euclid(tau) as usize;
        }
        idx
    }
}

impl Ord for Site {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d.cmp(&o.d).then_with(|| self.c.cmp(&o.c))
    }
}

impl PartialOrd for Site {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (n, x) in self.coords().iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl Add for Site {
    type Output = Site;
    #[inline]
    fn add(mut self, o: Site) -> Site {
        debug_assert_eq!(self.d, o.d);
        for n in 0..MAX_DIM {
            self.c[n] += o.c[n];
        }
        self
    }
}

impl Sub for Site {
    type Output = Site;
    #[inline]
    fn sub(mut self, o: Site) -> Site {
        debug_assert_eq!(self.d, o.d);
        for n in 0..MAX_DIM {
            self.c[n] -= o.c[n];
        }
        self
    }
}

impl Neg for Site {
    type Output = Site;
    #[inline]
    fn neg(mut self) -> Site {
        for x in self.c.iter_mut() {
            *x = -*x;
        }
        self
    }
}

impl Mul<i64> for Site {
    type Output = Site;
    #[inline]
    fn mul(mut self, k: i64) -> Site {
        for x in self.c.iter_mut() {
            *x *= k;
        }
        self
    }
}

impl Serialize for Site {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        Site::try_new(&v).map_err(serde::de::Error::custom)
    }
}

pub fn l1_norm(s: &Site) -> i64 {
    s.l1_norm()
}

pub fn linf_norm(s: &Site) -> i64 {
    s.linf_norm()
}

/// `T_k` acting on sites: `i ↦ i + k`.
pub fn translate(s: Site, k: Site) -> Site {
    s + k
}

/// A primitive integer direction ω with its ℓ¹ norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Direction {
    omega: Site,
    norm_l1: i64,
}

impl Direction {
    /// Rejects ω = 0 and non-primitive vectors.
    pub fn new(omega: &[i64]) -> Result<Self> {
        let s = Site::try_new(omega)?;
        if s.is_zero() {
            return Err(Error::Precondition("direction omega must be nonzero".into()));
        }
        let g = omega.iter().fold(0i64, |g, &x| g.gcd(&x));
        if g != 1 {
            return Err(Error::Precondition(format!(
                "direction {s} is not primitive (gcd {g}); divide it out"
            )));
        }
        Ok(Self { omega: s, norm_l1: s.l1_norm() })
    }

    /// Reduces any nonzero integer vector to its primitive multiple.
    pub fn primitive(omega: &[i64]) -> Result<Self> {
        let g = omega.iter().fold(0i64, |g, &x| g.gcd(&x));
        if g == 0 {
            return Err(Error::Precondition("direction omega must be nonzero".into()));
        }
        let v: Vec<i64> = omega.iter().map(|x| x / g).collect();
        Self::new(&v)
    }

    #[inline]
    pub fn omega(&self) -> &Site {
        &self.omega
    }

    #[inline]
    pub fn norm_l1(&self) -> i64 {
        self.norm_l1
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    /// Integer level `ω·i`.
    #[inline]
    pub fn level(&self, i: &Site) -> i64 {
        self.omega.dot(i)
    }

    /// Height `(ω/|ω|₁)·i`.
    pub fn height(&self, i: &Site) -> Ratio<i64> {
        Ratio::new(self.level(i), self.norm_l1)
    }

    pub fn height_f64(&self, i: &Site) -> f64 {
        self.level(i) as f64 / self.norm_l1 as f64
    }

    /// Squared Euclidean norm `|ω|₂²`.
    pub fn norm2_sq(&self) -> i64 {
        self.omega.dot(&self.omega)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.omega)
    }
}

/// `Q_ℓ(q) = {i : |i − q|_∞ ≤ ℓ}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub center: Site,
    pub half_side: i64,
}

impl Cube {
    pub fn new(center: Site, half_side: i64) -> Self {
        assert!(half_side >= 0, "cube half-side must be nonnegative");
        Self { center, half_side }
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn side(&self) -> i64 {
        2 * self.half_side + 1
    }

    pub fn len(&self) -> usize {
        (self.side() as usize).pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn contains(&self, s: &Site) -> bool {
        (*s - self.center).linf_norm() <= self.half_side
    }

    /// Row-major index with the last axis fastest.
    #[inline]
    pub fn index_of(&self, s: &Site) -> Option<usize> {
        let side = self.side();
        let mut idx = 0i64;
        for n in 0..self.dim() {
            let x = s.get(n) - self.center.get(n) + self.half_side;
            if x < 0 || x >= side {
                return None;
            }
            idx = idx * side + x;
        }
        Some(idx as usize)
    }

    pub fn site_at(&self, mut idx: usize) -> Site {
        let side = self.side() as usize;
        let d = self.dim();
        let mut s = self.center;
        for n in (0..d).rev() {
            let x = (idx % side) as i64;
            idx /= side;
            s.set(n, self.center.get(n) - self.half_side + x);
        }
        s
    }

    /// Sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len()).map(move |k| self.site_at(k))
    }
}

/// Heights `A < B` bounding a slab `{A ≤ (ω/|ω|)·i ≤ B}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlabSpec {
    pub a: Ratio<i64>,
    pub b: Ratio<i64>,
}

/// Which endpoints of `[A, B]` a slab query includes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoints {
    Closed,
    /// `(A, B]`: the free region of the constrained problem.
    LeftOpen,
}

impl SlabSpec {
    pub fn new(a: Ratio<i64>, b: Ratio<i64>) -> Result<Self> {
        if a >= b {
            return Err(Error::Precondition(format!("slab requires A < B, got A={a}, B={b}")));
        }
        Ok(Self { a, b })
    }

    pub fn from_ints(a: i64, b: i64) -> Result<Self> {
        Self::new(Ratio::from_integer(a), Ratio::from_integer(b))
    }

    pub fn width(&self) -> Ratio<i64> {
        self.b - self.a
    }

    pub fn shifted(&self, dh: Ratio<i64>) -> Self {
        Self { a: self.a + dh, b: self.b + dh }
    }

    pub fn contains(&self, dir: &Direction, i: &Site, ends: Endpoints) -> bool {
        let h = dir.height(i);
        match ends {
            Endpoints::Closed => self.a <= h && h <= self.b,
            Endpoints::LeftOpen => self.a < h && h <= self.b,
        }
    }
}

/// Parses `p`, `p/q`, or a finite decimal into a rational.
pub fn parse_ratio(s: &str) -> Result<Ratio<i64>> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse rational '{s}'"));
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(p, q));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.starts_with('-');
        let ipv: i64 = if ip.is_empty() || ip == "-" { 0 } else { ip.parse().map_err(|_| bad())? };
        if fp.is_empty() || fp.len() > 12 || !fp.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10i64.pow(fp.len() as u32);
        let f: i64 = fp.parse().map_err(|_| bad())?;
        let num = ipv.abs() * den + f;
        return Ok(Ratio::new(if neg { -num } else { num }, den));
    }
    s.parse::<i64>().map(Ratio::from_integer).map_err(|_| bad())
}

pub fn format_ratio(r: &Ratio<i64>) -> String {
    if *r.denom() == 1 {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// The module `L_{m,ω}` with generators `m·basis`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotientLattice {
    pub tau: i64,
    pub m: i64,
    pub direction: Direction,
    /// Basis of `L_ω`; `d − 1` vectors.
    pub basis: Vec<Site>,
    gens: Vec<Site>,
    adj: Vec<Vec<i128>>,
    det: i128,
}

impl QuotientLattice {
    pub fn new(direction: Direction, tau: i64, m: i64) -> Result<Self> {
        if tau < 1 || m < 1 {
            return Err(Error::Precondition(format!("need tau >= 1 and m >= 1, got tau={tau}, m={m}")));
        }
        let basis = module_basis(&direction, tau)?;
        let gens: Vec<Site> = basis.iter().map(|b| *b * m).collect();
        let r = gens.len();
        let gram: Vec<Vec<i128>> = (0..r)
            .map(|a| (0..r).map(|b| gens[a].dot(&gens[b]) as i128).collect())
            .collect();
        let det = det_i128(&gram);
        let adj = adjugate(&gram);
        Ok(Self { tau, m, direction, basis, gens, adj, det })
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    /// Generators of `L_{m,ω}`.
    pub fn generators(&self) -> &[Site] {
        &self.gens
    }

    /// Numerators of the coordinates of `i` along the generators, over `det`.
    fn coords_num(&self, i: &Site) -> [i128; MAX_DIM] {
        let r = self.gens.len();
        let mut bt = [0i128; MAX_DIM];
        for (b, g) in bt.iter_mut().zip(&self.gens) {
            *b = g.dot(i) as i128;
        }
        let mut out = [0i128; MAX_DIM];
        for (o, row) in out.iter_mut().zip(&self.adj) {
            *o = row.iter().zip(&bt[..r]).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// `k ∈ L_{m,ω}`.
    pub fn contains(&self, k: &Site) -> bool {
        if self.direction.level(k) != 0 {
            return false;
        }
        let c = self.coords_num(k);
        let c = &c[..self.gens.len()];
        if c.iter().any(|x| x % self.det != 0) {
            return false;
        }
        let mut back = Site::zero(self.dim());
        for (ck, g) in c.iter().zip(&self.gens) {
            back = back + *g * ((ck / self.det) as i64);
        }
        back == *k
    }

    /// Representative of `i + L_{m,ω}` in the half-open parallelepiped of the generators.
    pub fn representative(&self, i: &Site) -> Site {
        let c = self.coords_num(i);
        let mut r = *i;
        for (ck, g) in c.iter().zip(&self.gens) {
            let f = ck.div_euclid(self.det) as i64;
            if f != 0 {
                r = r - *g * f;
            }
        }
        r
    }

    /// Translation carrying the representative of `i` back to `i`.
    pub fn offset_of(&self, i: &Site) -> Site {
        *i - self.representative(i)
    }

    /// Representatives of the cosets meeting the slab, sorted.
    pub fn fundamental_domain(&self, slab: &SlabSpec, ends: Endpoints) -> Vec<Site> {
        let d = self.dim();
        let w = &self.direction;
        let n2 = w.norm2_sq() as f64;
        let t_lo = (*slab.a.numer() as f64 / *slab.a.denom() as f64) * w.norm_l1() as f64 / n2;
        let t_hi = (*slab.b.numer() as f64 / *slab.b.denom() as f64) * w.norm_l1() as f64 / n2;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let r = self.gens.len();
        for mask in 0..(1usize << r) {
            for &t in &[t_lo, t_hi] {
                for n in 0..d {
                    let mut x = t * w.omega().get(n) as f64;
                    for (k, g) in self.gens.iter().enumerate() {
                        if mask >> k & 1 == 1 {
                            x += g.get(n) as f64;
                        }
                    }
                    lo[n] = lo[n].min(x);
                    hi[n] = hi[n].max(x);
                }
            }
        }
        let lo: Vec<i64> = lo.iter().map(|x| x.floor() as i64 - 1).collect();
        let hi: Vec<i64> = hi.iter().map(|x| x.ceil() as i64 + 1).collect();
        let mut out = Vec::new();
        let mut cur = lo.clone();
        loop {
            let s = Site::new(&cur);
            if slab.contains(w, &s, ends) && self.representative(&s) == s {
                out.push(s);
            }
            let mut n = d;
            loop {
                if n == 0 {
                    out.sort();
                    return out;
                }
                n -= 1;
                if cur[n] < hi[n] {
                    cur[n] += 1;
                    break;
                }
                cur[n] = lo[n];
            }
        }
    }

    /// Number of cosets per integer level `ω·i = t`: `det(L_{m,ω})`-index along the level set.
    pub fn cosets_per_level(&self) -> i64 {
        (self.m * self.tau).pow(self.dim() as u32 - 1)
    }
}

/// Basis of `{k ∈ τℤ^d : ω·k = 0}` in row Hermite normal form, scaled by τ.
pub fn module_basis(omega: &Direction, tau: i64) -> Result<Vec<Site>> {
    if tau < 1 {
        return Err(Error::Precondition(format!("tau must be >= 1, got {tau}")));
    }
    let d = omega.dim();
    let mut w: Vec<i64> = omega.omega().coords().to_vec();
    // Columns of u are unimodular images of the unit vectors; w = ω·u.
    let mut u: Vec<Vec<i64>> = (0..d).map(|r| (0..d).map(|c| (r == c) as i64).collect()).collect();
    loop {
        let nz: Vec<usize> = (0..d).filter(|&k| w[k] != 0).collect();
        if nz.len() <= 1 {
            break;
        }
        let p = *nz.iter().min_by_key(|&&k| (w[k].abs(), k)).unwrap();
        for &q in &nz {
            if q == p {
                continue;
            }
            let t = w[q].div_euclid(w[p]);
            w[q] -= t * w[p];
            for row in u.iter_mut() {
                row[q] -= t * row[p];
            }
        }
    }
    let p = (0..d).find(|&k| w[k] != 0).ok_or_else(|| Error::Precondition("omega must be nonzero".into()))?;
    if w[p].abs() != 1 {
        return Err(Error::Precondition("omega must be primitive".into()));
    }
    let mut rows: Vec<Vec<i64>> = (0..d).filter(|&c| c != p).map(|c| (0..d).map(|r| u[r][c]).collect()).collect();
    hermite_rows(&mut rows);
    let out: Vec<Site> = rows.iter().map(|r| Site::new(r) * tau).collect();
    for k in &out {
        debug_assert_eq!(omega.level(k), 0);
    }
    Ok(out)
}

/// In-place row Hermite normal form: echelon, positive pivots, reduced above pivots.
fn hermite_rows(rows: &mut [Vec<i64>]) {
    let n = rows.len();
    if n == 0 {
        return;
    }
    let d = rows[0].len();
    let mut r = 0;
    for col in 0..d {
        if r == n {
            break;
        }
        loop {
            let nz: Vec<usize> = (r..n).filter(|&k| rows[k][col] != 0).collect();
            if nz.is_empty() {
                break;
            }
            let p = *nz.iter().min_by_key(|&&k| (rows[k][col].abs(), k)).unwrap();
            rows.swap(r, p);
            let mut done = true;
            for k in r + 1..n {
                if rows[k][col] != 0 {
                    let t = rows[k][col].div_euclid(rows[r][col]);
                    for c in 0..d {
                        rows[k][c] -= t * rows[r][c];
                    }
                    if rows[k][col] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if rows[r][col] == 0 {
            continue;
        }
        if rows[r][col] < 0 {
            for c in 0..d {
                rows[r][c] = -rows[r][c];
            }
        }
        for k in 0..r {
            let t = rows[k][col].div_euclid(rows[r][col]);
            for c in 0..d {
                rows[k][c] -= t * rows[r][c];
            }
        }
        r += 1;
    }
}

fn det_i128(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    match n {
        0 => 1,
        1 => m[0][0],
        _ => (0..n)
            .map(|c| {
                let minor: Vec<Vec<i128>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(k, _)| k != c).map(|(_, &x)| x).collect())
                    .collect();
                let s = if c % 2 == 0 { 1 } else { -1 };
                s * m[0][c] * det_i128(&minor)
            })
            .sum(),
    }
}

fn adjugate(m: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let n = m.len();
    if n == 1 {
        return vec![vec![1]];
    }
    let mut adj = vec![vec![0i128; n]; n];
    for r in 0..n {
        for c in 0..n {
            let minor: Vec<Vec<i128>> = m
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != r)
                .map(|(_, row)| row.iter().enumerate().filter(|&(k, _)| k != c).map(|(_, &x)| x).collect())
                .collect();
            let s = if (r + c) % 2 == 0 { 1 } else { -1 };
            adj[c][r] = s * det_i128(&minor);
        }
    }
    adj
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        assert_eq!(Site::new(&[3, -4, 0]).l1_norm(), 7);
        assert_eq!(Site::new(&[3, -4, 0]).linf_norm(), 4);
        assert_eq!(Site::new(&[1, -1]).l1_norm(), 2);
        assert_eq!(Site::new(&[0, 0]).linf_norm(), 0);
    }

    #[test]
    fn hermite_basis_examples() {
        let b = module_basis(&Direction::new(&[1, 0]).unwrap(), 1).unwrap();
        assert_eq!(b, vec![Site::new(&[0, 1])]);
        let b = module_basis(&Direction::new(&[1, 1]).unwrap(), 2).unwrap();
        assert_eq!(b, vec![Site::new(&[2, -2])]);
        let b = module_basis(&Direction::new(&[2, 3]).unwrap(), 1).unwrap();
        assert_eq!(b, vec![Site::new(&[3, -2])]);
    }

    #[test]
    fn rejects_zero_direction() {
        assert!(Direction::new(&[0, 0]).is_err());
        assert!(Direction::new(&[2, 4]).is_err());
        assert_eq!(Direction::primitive(&[2, 4]).unwrap().omega(), &Site::new(&[1, 2]));
    }

    #[test]
    fn cube_indexing_roundtrip() {
        let q = Cube::new(Site::new(&[3, -1, 2]), 2);
        for (k, s) in q.sites().enumerate() {
            assert_eq!(q.index_of(&s), Some(k));
        }
        assert_eq!(q.len(), 125);
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!(parse_ratio("3/2").unwrap(), Ratio::new(3, 2));
        assert_eq!(parse_ratio("-0.25").unwrap(), Ratio::new(-1, 4));
        assert_eq!(parse_ratio("7").unwrap(), Ratio::from_integer(7));
        assert!(parse_ratio("x").is_err());
    }
}

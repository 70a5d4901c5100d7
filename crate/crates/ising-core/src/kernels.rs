//! Interaction coefficients `J_ij`, periodic fields `h_i`, the tail functions
//! `σ(R)` and `Σ(R)`, continuum kernels `K(x,y)` and their cell discretization
//! `J^(ε)`.
//!
//! Distances `|i − j|` are ℓ¹ on the lattice. Continuum kernels use the
//! Euclidean distance.

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::scalar::Scalar;
use std::fmt;
use std::sync::Arc;

/// Interaction coefficients `J_ij ≥ 0`.
#[derive(Clone)]
pub enum CouplingSpec<T: Scalar = f64> {
    /// `J_ij = λ/|i−j|^{d+s}`; `upper` is the declared Λ of the two-sided bound.
    PowerLike { lambda: T, upper: T, s: T },
    /// `J_ij = base_ij` for `|i−j|₁ ≤ range`, zero beyond.
    Truncated { base: Box<CouplingSpec<T>>, range: i64 },
    /// `J_ij = table[c(i)][c(j)]/|i−j|^{d+s}` for `|i−j|₁ ≤ range`, where `c` is the
    /// class of a site in `ℤ^d/τℤ^d` (row-major index of `i mod τ`).
    PeriodicTable { tau: i64, dim: usize, s: T, range: i64, table: Vec<T> },
    /// Two-dimensional kernel enhanced by `lambda_big` inside the τℤ²-translates of
    /// the centred block of half-side `(τ−1)/4`.
    AppendixB { tau: i64, lambda_big: T, s: T },
    /// Cell-pair integrals `J^(ε)` of a continuum kernel.
    Discretized(Arc<DiscreteKernel<T>>),
}

impl<T: Scalar> fmt::Debug for CouplingSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

#[inline]
fn pow_neg<T: Scalar>(n: i64, e: T) -> T {
    T::c((n as f64).powf(-e.f64()))
}

impl<T: Scalar> CouplingSpec<T> {
    pub fn power_like(lambda: T, upper: T, s: T) -> Self {
        Self::PowerLike { lambda, upper, s }
    }

    /// Nearest-neighbour interaction of strength λ: power-like truncated at range 1.
    pub fn nearest_neighbor(lambda: T) -> Self {
        Self::power_like(lambda, lambda, T::c(0.5)).truncated(1)
    }

    pub fn truncated(self, range: i64) -> Self {
        Self::Truncated { base: Box::new(self), range }
    }

    pub fn appendix_b(tau: i64, lambda_big: T, s: T) -> Self {
        Self::AppendixB { tau, lambda_big, s }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(m));
        let s_ok = |s: T| s.f64() > 0.0 && s.f64() < 1.0;
        match self {
            Self::PowerLike { lambda, upper, s } => {
                if !(lambda.f64() > 0.0) || upper.f64() < lambda.f64() {
                    return bad(format!("power-like needs 0 < lambda <= Lambda, got {lambda}, {upper}"));
                }
                if !s_ok(*s) {
                    return bad(format!("s must lie in (0,1), got {s}"));
                }
            }
            Self::Truncated { base, range } => {
                if *range < 1 {
                    return bad(format!("truncation range must be >= 1, got {range}"));
                }
                base.validate()?;
            }
            Self::PeriodicTable { tau, dim, s, range, table } => {
                if *tau < 1 || *range < 1 || !(2..=4).contains(dim) {
                    return bad("periodic table needs tau >= 1, range >= 1, 2 <= d <= 4".into());
                }
                if !s_ok(*s) {
                    return bad(format!("s must lie in (0,1), got {s}"));
                }
                let n = (*tau as usize).pow(*dim as u32);
                if table.len() != n * n {
                    return bad(format!("periodic table must have {}x{} entries, got {}", n, n, table.len()));
                }
                for a in 0..n {
                    for b in 0..n {
                        let v = table[a * n + b];
                        if !(v.f64() > 0.0) {
                            return bad(format!("periodic table entry ({a},{b}) must be positive"));
                        }
                        if v != table[b * n + a] {
                            return bad(format!("periodic table not symmetric at ({a},{b})"));
                        }
                    }
                }
            }
            Self::AppendixB { tau, lambda_big, s } => {
                if *tau < 1 || tau % 4 != 1 {
                    return bad(format!("appendix-B kernel needs tau in 4N+1, got {tau}"));
                }
                if !(lambda_big.f64() > 0.0) {
                    return bad("appendix-B Lambda must be positive".into());
                }
                if !s_ok(*s) {
                    return bad(format!("s must lie in (0,1), got {s}"));
                }
            }
            Self::Discretized(k) => k.kernel.validate()?,
        }
        Ok(())
    }

    /// Lattice dimension forced by the variant, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            Self::PowerLike { .. } => None,
            Self::Truncated { base, .. } => base.fixed_dim(),
            Self::PeriodicTable { dim, .. } => Some(*dim),
            Self::AppendixB { .. } => Some(2),
            Self::Discretized(k) => Some(k.kernel.dim),
        }
    }

    pub fn s(&self) -> T {
        match self {
            Self::PowerLike { s, .. } | Self::PeriodicTable { s, .. } | Self::AppendixB { s, .. } => *s,
            Self::Truncated { base, .. } => base.s(),
            Self::Discretized(k) => T::c(k.kernel.s),
        }
    }

    /// `J_ij`; zero on the diagonal.
    #[inline]
    pub fn coupling(&self, i: &Site, j: &Site) -> T {
        if i == j {
            return T::zero();
        }
        match self {
            Self::PowerLike { lambda, s, .. } => {
                let k = *j - *i;
                *lambda * pow_neg(k.l1_norm(), T::from_usize(k.dim()).unwrap() + *s)
            }
            Self::Truncated { base, range } => {
                if (*j - *i).l1_norm() <= *range {
                    base.coupling(i, j)
                } else {
                    T::zero()
                }
            }
            Self::PeriodicTable { tau, dim, s, range, table } => {
                let k = *j - *i;
                let n1 = k.l1_norm();
                if n1 > *range {
                    return T::zero();
                }
                let n = (*tau as usize).pow(*dim as u32);
                let v = table[i.class_index(*tau) * n + j.class_index(*tau)];
                v * pow_neg(n1, T::from_usize(*dim).unwrap() + *s)
            }
            Self::AppendixB { tau, lambda_big, s } => {
                let k = *j - *i;
                let base = pow_neg(k.l1_norm(), T::c(2.0) + *s);
                if appendix_b_same_block(*tau, i, j) {
                    *lambda_big * base
                } else {
                    base
                }
            }
            Self::Discretized(k) => k.coupling(i, j),
        }
    }

    /// Smallest period `p` with `J_{i+pe, j+pe} = J_ij`.
    pub fn period(&self) -> i64 {
        match self {
            Self::PowerLike { .. } => 1,
            Self::Truncated { base, .. } => base.period(),
            Self::PeriodicTable { tau, .. } | Self::AppendixB { tau, .. } => *tau,
            Self::Discretized(k) => k.period().unwrap_or(0),
        }
    }

    /// Finite ℓ¹ interaction range, `None` for infinite range.
    pub fn range(&self) -> Option<i64> {
        match self {
            Self::PowerLike { .. } | Self::AppendixB { .. } | Self::Discretized(_) => None,
            Self::Truncated { base, range } => Some(base.range().map_or(*range, |r| r.min(*range))),
            Self::PeriodicTable { range, .. } => Some(*range),
        }
    }

    /// Ferromagnetic floor: the least `J_ij` over `|i − j| = 1`.
    pub fn nn_floor(&self) -> T {
        match self {
            Self::PowerLike { lambda, .. } => *lambda,
            Self::Truncated { base, .. } => base.nn_floor(),
            Self::PeriodicTable { table, .. } => table.iter().copied().fold(T::infinity(), T::min),
            Self::AppendixB { lambda_big, .. } => lambda_big.min(T::one()),
            Self::Discretized(k) => T::c(k.lower_constant()),
        }
    }

    /// The constant Λ of the power-like upper bound `J_ij ≤ Λ/|i−j|^{d+s}`.
    pub fn upper_power_constant(&self) -> T {
        match self {
            Self::PowerLike { upper, .. } => *upper,
            Self::Truncated { base, .. } => base.upper_power_constant(),
            Self::PeriodicTable { table, .. } => table.iter().copied().fold(T::zero(), T::max),
            Self::AppendixB { lambda_big, .. } => lambda_big.max(T::one()),
            Self::Discretized(k) => T::c(k.upper_constant()),
        }
    }

    /// Whether `J_ij` depends on `j − i` only.
    pub fn translation_invariant(&self) -> bool {
        self.period() == 1
    }

    /// Row-sum bound `sup_i Σ_j J_ij = σ(1)`.
    pub fn row_sum_bound(&self, dim: usize) -> Result<T> {
        self.sigma(dim, 1)
    }

    pub fn describe(&self) -> String {
        match self {
            Self::PowerLike { lambda, upper, s } => format!("PowerLike(lambda={lambda}, Lambda={upper}, s={s})"),
            Self::Truncated { base, range } => format!("Truncated({}, R={range})", base.describe()),
            Self::PeriodicTable { tau, dim, s, range, table } => {
                format!("PeriodicTable(tau={tau}, d={dim}, s={s}, R={range}, entries={})", table.len())
            }
            Self::AppendixB { tau, lambda_big, s } => format!("AppendixB(tau={tau}, Lambda={lambda_big}, s={s})"),
            Self::Discretized(k) => format!("Discretized(eps={}, {})", k.eps, k.kernel.describe()),
        }
    }

    /// `σ(R) = sup_i Σ_{|j−i|_∞ ≥ R} J_ij`, an upper bound accurate to the stated tolerance.
    pub fn sigma(&self, dim: usize, r: i64) -> Result<T> {
        if r < 1 {
            return Err(Error::Precondition(format!("sigma requires R >= 1, got {r}")));
        }
        match self {
            Self::PowerLike { lambda, s, .. } => {
                if let Some(fd) = self.fixed_dim() {
                    debug_assert_eq!(fd, dim);
                }
                Ok(T::c(lambda.f64() * power_sigma(dim, s.f64(), r)))
            }
            Self::AppendixB { tau, lambda_big, s } if dim == 2 => {
                let extra = appendix_b_block_profile(*tau, s.f64(), r)[r as usize - 1];
                Ok(T::c(power_sigma(2, s.f64(), r) + ((lambda_big.f64() - 1.0) * extra).max(0.0)))
            }
            Self::Discretized(k) if dim == k.kernel.dim => {
                Ok(T::c(k.upper_constant() * power_sigma(dim, k.kernel.s, r)))
            }
            _ => Ok(self.sigma_profile(dim, r)?[r as usize - 1]),
        }
    }

    /// `Σ(R) = (1/R)·Σ_{m=1}^R σ(m)`.
    #[allow(non_snake_case)]
    pub fn Sigma(&self, dim: usize, r: i64) -> Result<T> {
        if r < 1 {
            return Err(Error::Precondition(format!("Sigma requires R >= 1, got {r}")));
        }
        let p = self.sigma_profile(dim, r)?;
        Ok(crate::scalar::ksum(p.iter().copied()) / T::int(r))
    }

    /// `[σ(1), …, σ(r_max)]`.
    pub fn sigma_profile(&self, dim: usize, r_max: i64) -> Result<Vec<T>> {
        if r_max < 1 {
            return Err(Error::Precondition(format!("sigma requires R >= 1, got {r_max}")));
        }
        if let Some(fd) = self.fixed_dim() {
            if fd != dim {
                return Err(Error::Precondition(format!("spec is {fd}-dimensional, asked for d={dim}")));
            }
        }
        let out: Vec<f64> = match self {
            Self::PowerLike { lambda, s, .. } => {
                power_sigma_profile(dim, s.f64(), r_max).iter().map(|v| v * lambda.f64()).collect()
            }
            Self::AppendixB { tau, lambda_big, s } => {
                let base = power_sigma_profile(2, s.f64(), r_max);
                let extra = appendix_b_block_profile(*tau, s.f64(), r_max);
                let l = lambda_big.f64() - 1.0;
                base.iter().zip(&extra).map(|(b, e)| b + (l * e).max(0.0)).collect()
            }
            Self::Discretized(k) => {
                // Certified bound J ≤ Λ_*|k|^{−d−s}; not sharp.
                let ls = k.upper_constant();
                power_sigma_profile(dim, k.kernel.s, r_max).iter().map(|b| ls * b).collect()
            }
            Self::Truncated { .. } | Self::PeriodicTable { .. } => self.finite_sigma_profile(dim, r_max),
        };
        Ok(out.into_iter().map(T::c).collect())
    }

    fn finite_sigma_profile(&self, dim: usize, r_max: i64) -> Vec<f64> {
        let range = self.range().expect("finite-range spec");
        let p = self.period();
        let classes = class_representatives(dim, p);
        // shell[n] = Σ_{|k|∞ = n} J(i, i+k) per class; sup taken after tail accumulation.
        let mut best = vec![0.0f64; r_max as usize];
        for i in &classes {
            let mut shell = vec![0.0f64; range as usize + 1];
            for_each_in_box(dim, range, |k| {
                if k.l1_norm() <= range && !k.is_zero() {
                    let j = *i + *k;
                    shell[k.linf_norm() as usize] += self.coupling(i, &j).f64();
                }
            });
            let mut tail = 0.0;
            let mut cum = vec![0.0f64; range as usize + 2];
            for n in (1..=range as usize).rev() {
                tail += shell[n];
                cum[n] = tail;
            }
            for r in 1..=r_max as usize {
                let v = if r <= range as usize { cum[r] } else { 0.0 };
                best[r - 1] = best[r - 1].max(v);
            }
        }
        best
    }
}

/// Calls `f` on every `k` with `|k|_∞ ≤ r`, row-major.
pub fn for_each_in_box<F: FnMut(&Site)>(dim: usize, r: i64, mut f: F) {
    let mut cur = vec![-r; dim];
    loop {
        f(&Site::new(&cur));
        let mut n = dim;
        loop {
            if n == 0 {
                return;
            }
            n -= 1;
            if cur[n] < r {
                cur[n] += 1;
                break;
            }
            cur[n] = -r;
        }
    }
}

/// Sites of `[0, p)^d`, row-major.
pub fn class_representatives(dim: usize, p: i64) -> Vec<Site> {
    let p = p.max(1);
    let n = (p as usize).pow(dim as u32);
    (0..n)
        .map(|mut idx| {
            let mut c = vec![0i64; dim];
            for a in (0..dim).rev() {
                c[a] = (idx % p as usize) as i64;
                idx /= p as usize;
            }
            Site::new(&c)
        })
        .collect()
}

/// Whether `i` and `j` lie in one τℤ²-translate of the centred block `Q̂`.
pub fn appendix_b_same_block(tau: i64, i: &Site, j: &Site) -> bool {
    let q = (tau - 1) / 4;
    let centre = |x: i64| (x + tau / 2).div_euclid(tau);
    let (ci0, ci1) = (centre(i.get(0)), centre(i.get(1)));
    if ci0 != centre(j.get(0)) || ci1 != centre(j.get(1)) {
        return false;
    }
    let inside = |x: i64, c: i64| (x - c * tau).abs() <= q;
    inside(i.get(0), ci0) && inside(i.get(1), ci1) && inside(j.get(0), ci0) && inside(j.get(1), ci1)
}

/// Number of `k ∈ ℤ^d` with `|k|₁ = n`.
pub fn l1_shell_count(dim: usize, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=dim.min(n as usize) {
        total += 2f64.powi(k as i32) * binom(dim as f64, k as f64) * binom((n - 1) as f64, (k - 1) as f64);
    }
    total
}

fn binom(n: f64, k: f64) -> f64 {
    let mut r = 1.0;
    let mut i = 0.0;
    while i < k {
        r *= (n - i) / (i + 1.0);
        i += 1.0;
    }
    r
}

/// `cnt[n] = #{k : |k|_∞ ≤ m, |k|₁ = n}`.
fn box_l1_counts(dim: usize, m: i64) -> Vec<f64> {
    let mut cnt = vec![1.0f64];
    for _ in 0..dim {
        let mut next = vec![0.0f64; cnt.len() + m as usize];
        for (n, c) in cnt.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            next[n] += c;
            for v in 1..=m as usize {
                next[n + v] += 2.0 * c;
            }
        }
        cnt = next;
    }
    cnt
}

/// Upper bound on `Σ_{|k|₁ > n} |k|₁^{−d−s}` from the shell-count polynomial.
fn power_tail_bound(dim: usize, s: f64, n: f64) -> f64 {
    let e = dim as f64 + s;
    let mut total = 0.0;
    let mut fact = 1.0;
    for k in 1..=dim {
        if k > 1 {
            fact *= (k - 1) as f64;
        }
        let a = 2f64.powi(k as i32) * binom(dim as f64, k as f64) / fact;
        total += a * n.powf(k as f64 - e) / (e - k as f64);
    }
    total
}

/// `σ(r)` for `J = |k|₁^{−d−s}`: exact ℓ¹ shells up to `max(10³, 100r)`, then the integral bound.
pub fn power_sigma(dim: usize, s: f64, r: i64) -> f64 {
    let e = dim as f64 + s;
    let cutoff = 1000.max(100 * r) as u64;
    let inner = box_l1_counts(dim, r - 1);
    let mut acc = 0.0f64;
    // Summed from the far end so small terms accumulate first.
    for n in (1..=cutoff).rev() {
        let c_in = inner.get(n as usize).copied().unwrap_or(0.0);
        let cnt = l1_shell_count(dim, n) - c_in;
        if cnt > 0.0 {
            acc += cnt * (n as f64).powf(-e);
        }
    }
    acc + power_tail_bound(dim, s, cutoff as f64)
}

fn power_sigma_profile(dim: usize, s: f64, r_max: i64) -> Vec<f64> {
    (1..=r_max).map(|r| power_sigma(dim, s, r)).collect()
}

/// `sup_{i ∈ Q̂} Σ_{j ∈ Q̂, |j−i|_∞ ≥ r} |i−j|^{−2−s}` for `r = 1..=r_max`.
fn appendix_b_block_profile(tau: i64, s: f64, r_max: i64) -> Vec<f64> {
    let q = (tau - 1) / 4;
    let e = 2.0 + s;
    let mut best = vec![0.0f64; r_max as usize];
    for a in -q..=q {
        for b in -q..=q {
            let mut shell = vec![0.0f64; (2 * q + 2) as usize];
            for x in -q..=q {
                for y in -q..=q {
                    if x == a && y == b {
                        continue;
                    }
                    let (dx, dy) = ((x - a).abs(), (y - b).abs());
                    shell[dx.max(dy) as usize] += ((dx + dy) as f64).powf(-e);
                }
            }
            let mut tail = 0.0;
            let mut cum = vec![0.0; shell.len() + 1];
            for n in (1..shell.len()).rev() {
                tail += shell[n];
                cum[n] = tail;
            }
            for r in 1..=r_max as usize {
                let v = cum.get(r).copied().unwrap_or(0.0);
                best[r - 1] = best[r - 1].max(v);
            }
        }
    }
    best
}

/// `J(c, c + k)` tabulated for every class `c` of `ℤ^d/pℤ^d` and `|k|_∞ ≤ radius`.
pub struct CouplingTable<T: Scalar = f64> {
    dim: usize,
    radius: i64,
    period: i64,
    side: usize,
    block: usize,
    values: Vec<T>,
}

impl<T: Scalar> CouplingTable<T> {
    /// Fails for specs without a lattice period (non-commensurate discretizations).
    pub fn new(spec: &CouplingSpec<T>, dim: usize, radius: i64) -> Result<Self> {
        let period = spec.period();
        if period < 1 {
            return Err(Error::Precondition("coupling has no lattice period; cannot tabulate".into()));
        }
        let radius = match spec.range() {
            Some(r) => radius.min(r),
            None => radius,
        };
        let side = (2 * radius + 1) as usize;
        let block = side.pow(dim as u32);
        let classes = class_representatives(dim, period);
        let mut values = Vec::with_capacity(block * classes.len());
        for c in &classes {
            for_each_in_box(dim, radius, |k| values.push(spec.coupling(c, &(*c + *k))));
        }
        Ok(Self { dim, radius, period, side, block, values })
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn period(&self) -> i64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn offset_index(&self, k: &Site) -> Option<usize> {
        let mut idx = 0usize;
        for n in 0..self.dim {
            let x = k.get(n) + self.radius;
            if x < 0 || x as usize >= self.side {
                return None;
            }
            idx = idx * self.side + x as usize;
        }
        Some(idx)
    }

    /// `J(i, i + k)`, zero beyond the radius.
    #[inline]
    pub fn get(&self, i: &Site, k: &Site) -> T {
        match self.offset_index(k) {
            Some(o) => {
                let c = if self.period == 1 { 0 } else { i.class_index(self.period) };
                self.values[c * self.block + o]
            }
            None => T::zero(),
        }
    }

    /// Row of class `c`, indexed by `offset_index`.
    pub fn row(&self, c: usize) -> &[T] {
        &self.values[c * self.block..(c + 1) * self.block]
    }

    /// Largest row sum over classes.
    pub fn max_row_sum(&self) -> T {
        (0..self.values.len() / self.block)
            .map(|c| crate::scalar::ksum(self.row(c).iter().copied()))
            .fold(T::zero(), T::max)
    }
}

/// Periodic magnetic field `h_i = table[c(i)]` with zero flux and `sup|h| ≤ μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec<T: Scalar = f64> {
    tau: i64,
    dim: usize,
    table: Vec<T>,
    mu: T,
}

impl<T: Scalar> FieldSpec<T> {
    pub fn zero(dim: usize) -> Self {
        Self { tau: 1, dim, table: vec![T::zero()], mu: T::zero() }
    }

    /// `table` is indexed by the row-major class index of `i mod τ`.
    pub fn new(tau: i64, dim: usize, table: Vec<T>, mu: T) -> Result<Self> {
        if tau < 1 || !(2..=4).contains(&dim) {
            return Err(Error::Precondition(format!("field needs tau >= 1 and 2 <= d <= 4, got tau={tau}, d={dim}")));
        }
        let n = (tau as usize).pow(dim as u32);
        if table.len() != n {
            return Err(Error::Precondition(format!("field table needs {n} entries, got {}", table.len())));
        }
        if mu.f64() < 0.0 {
            return Err(Error::Precondition("mu must be nonnegative".into()));
        }
        let mut flux = 0.0f64;
        let mut mass = 0.0f64;
        for (c, h) in table.iter().enumerate() {
            if h.f64().abs() > mu.f64() * (1.0 + 1e-12) {
                return Err(Error::Precondition(format!("|h| at class {c} is {} > mu = {mu}", h.f64().abs())));
            }
            flux += h.f64();
            mass += h.f64().abs();
        }
        if flux.abs() > 1e-9 * mass.max(1.0) {
            return Err(Error::Precondition(format!("field has nonzero flux {flux} over a fundamental domain")));
        }
        Ok(Self { tau, dim, table, mu })
    }

    pub fn tau(&self) -> i64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    pub fn is_zero(&self) -> bool {
        self.table.iter().all(|h| *h == T::zero())
    }

    #[inline]
    pub fn field(&self, i: &Site) -> T {
        if self.tau == 1 {
            return self.table[0];
        }
        self.table[i.class_index(self.tau)]
    }
}

/// `μ₀ = λ τ^{−d}`.
pub fn mu0<T: Scalar>(lambda: T, tau: i64, dim: usize) -> T {
    lambda * T::c((tau as f64).powi(-(dim as i32)))
}

/// `λ_* = (2√d)^{−d−s} λ`.
pub fn lambda_star(lambda: f64, dim: usize, s: f64) -> f64 {
    (2.0 * (dim as f64).sqrt()).powf(-(dim as f64) - s) * lambda
}

type ModFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Modulation `a(x,y) ∈ [λ, Λ]` of `K(x,y) = a(x,y)·|x−y|^{−d−s}`.
#[derive(Clone)]
pub enum Modulation {
    Constant(f64),
    /// Symmetric, ℤ^d-periodic in the pair `(x,y)`.
    Periodic { name: String, f: ModFn },
}

/// Continuum kernel `K(x,y) = a(x,y)|x−y|₂^{−d−s}` with `λ ≤ a ≤ Λ`.
#[derive(Clone)]
pub struct ContinuumKernel {
    pub dim: usize,
    pub s: f64,
    pub lambda: f64,
    pub upper: f64,
    pub modulation: Modulation,
}

impl ContinuumKernel {
    /// `K(x,y) = c|x−y|^{−d−s}`.
    pub fn fractional(dim: usize, s: f64, c: f64) -> Self {
        Self { dim, s, lambda: c, upper: c, modulation: Modulation::Constant(c) }
    }

    /// `a(x,y) = λ + (Λ−λ)·φ(x)φ(y)` with `φ(x) = Π_n (1 + cos 2πx_n)/2`.
    pub fn periodic_cosine(dim: usize, s: f64, lambda: f64, upper: f64) -> Self {
        let f: ModFn = Arc::new(move |x: &[f64], y: &[f64]| {
            let phi = |z: &[f64]| z.iter().map(|t| 0.5 * (1.0 + (2.0 * std::f64::consts::PI * t).cos())).product::<f64>();
            lambda + (upper - lambda) * phi(x) * phi(y)
        });
        Self { dim, s, lambda, upper, modulation: Modulation::Periodic { name: "cosine".into(), f } }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.dim) {
            return Err(Error::Dimension(self.dim));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::Precondition(format!("kernel s must lie in (0,1), got {}", self.s)));
        }
        if !(self.lambda > 0.0) || self.upper < self.lambda {
            return Err(Error::Precondition("kernel needs 0 < lambda <= Lambda".into()));
        }
        Ok(())
    }

    pub fn translation_invariant(&self) -> bool {
        matches!(self.modulation, Modulation::Constant(_))
    }

    #[inline]
    pub fn modulation_at(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.modulation {
            Modulation::Constant(c) => *c,
            Modulation::Periodic { f, .. } => f(x, y),
        }
    }

    /// `K(x,y)`; infinite on the diagonal.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.modulation_at(x, y) * r2.powf(-(self.dim as f64 + self.s) / 2.0)
    }

    pub fn describe(&self) -> String {
        match &self.modulation {
            Modulation::Constant(c) => format!("Fractional(d={}, s={}, c={c})", self.dim, self.s),
            Modulation::Periodic { name, .. } => {
                format!("Periodic[{name}](d={}, s={}, lambda={}, Lambda={})", self.dim, self.s, self.lambda, self.upper)
            }
        }
    }
}

/// Quadrature settings for cell-pair integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    /// Dyadic refinement depth for touching cell pairs.
    pub levels: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { levels: 3 }
    }
}

/// `J^(ε)` for a continuum kernel; evaluation is deterministic and cached per offset class.
pub struct DiscreteKernel<T: Scalar = f64> {
    pub kernel: ContinuumKernel,
    pub eps: f64,
    pub quad: Quadrature,
    touch: Vec<f64>,
    cells_per_period: Option<i64>,
    cache: std::sync::RwLock<std::collections::HashMap<(usize, Site), f64>>,
    _t: std::marker::PhantomData<T>,
}

/// Self-similar integrals `I_δ = ∫_{Q(0)}∫_{Q(δ)} |x−y|^{−d−s}` over touching unit cells,
/// `δ ∈ {−1,0,1}^d \ {0}`, indexed base 3.
pub fn touching_integrals(dim: usize, s: f64) -> Vec<f64> {
    let n3 = 3usize.pow(dim as u32);
    let idx = |dl: &[i64]| dl.iter().fold(0usize, |a, &x| a * 3 + (x + 1) as usize);
    let mut a = vec![vec![0.0f64; n3]; n3];
    let mut b = vec![0.0f64; n3];
    let c = 2f64.powf(-(dim as f64 - s));
    let unit = |x: &[f64], y: &[f64]| {
        let r2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        r2.powf(-(dim as f64 + s) / 2.0)
    };
    for row in 0..n3 {
        let dl = base3(row, dim);
        if dl.iter().all(|&x| x == 0) {
            a[row][row] = 1.0;
            continue;
        }
        for ma in 0..(1usize << dim) {
            for mb in 0..(1usize << dim) {
                let dp: Vec<i64> =
                    (0..dim).map(|k| 2 * dl[k] + ((mb >> k) & 1) as i64 - ((ma >> k) & 1) as i64).collect();
                if dp.iter().all(|x| x.abs() <= 1) {
                    a[row][idx(&dp)] -= c;
                } else {
                    let zero = [0.0f64; 4];
                    let off: Vec<f64> = dp.iter().map(|&x| x as f64).collect();
                    b[row] += c * far_rule(dim, &zero[..dim], &off, 1.0, 4, &unit);
                }
            }
        }
        a[row][row] += 1.0;
    }
    solve_dense(a, b)
}

fn base3(mut idx: usize, dim: usize) -> Vec<i64> {
    let mut v = vec![0i64; dim];
    for k in (0..dim).rev() {
        v[k] = (idx % 3) as i64 - 1;
        idx /= 3;
    }
    v
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Richardson-extrapolated tensor midpoint rule over two cubes of side `h`
/// centred at `ca` and `ca + off·h`: `(4·M(2n) − M(n))/3`.
fn far_rule<F: Fn(&[f64], &[f64]) -> f64>(dim: usize, ca: &[f64], off: &[f64], h: f64, n: usize, f: &F) -> f64 {
    let cb: Vec<f64> = (0..dim).map(|k| ca[k] + off[k] * h).collect();
    let m1 = midpoint(dim, ca, &cb, h, n, f);
    let m2 = midpoint(dim, ca, &cb, h, 2 * n, f);
    (4.0 * m2 - m1) / 3.0
}

fn midpoint<F: Fn(&[f64], &[f64]) -> f64>(dim: usize, ca: &[f64], cb: &[f64], h: f64, n: usize, f: &F) -> f64 {
    let nodes = n.pow(dim as u32);
    let node = |c: &[f64], mut idx: usize, out: &mut [f64; 4]| {
        for k in (0..dim).rev() {
            let p = idx % n;
            idx /= n;
            out[k] = c[k] + h * ((p as f64 + 0.5) / n as f64 - 0.5);
        }
    };
    let mut x = [0.0f64; 4];
    let mut y = [0.0f64; 4];
    let mut acc = 0.0;
    for a in 0..nodes {
        node(ca, a, &mut x);
        for b in 0..nodes {
            node(cb, b, &mut y);
            acc += f(&x[..dim], &y[..dim]);
        }
    }
    acc * h.powi(2 * dim as i32) / (nodes * nodes) as f64
}

/// Base points per axis of the far rule at ℓ∞ cell offset `m ≥ 2`.
fn far_points(dim: usize, m: i64) -> usize {
    match (dim, m) {
        (2, 2) => 3,
        (2, 3..=4) => 2,
        (3, 2) => 2,
        _ => 1,
    }
}

impl<T: Scalar> DiscreteKernel<T> {
    pub fn new(kernel: ContinuumKernel, eps: f64, quad: Quadrature) -> Result<Self> {
        kernel.validate()?;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Precondition(format!("eps must lie in (0,1], got {eps}")));
        }
        let touch = touching_integrals(kernel.dim, kernel.s);
        let cells_per_period = if kernel.translation_invariant() {
            Some(1)
        } else {
            let p = (1.0 / eps).round();
            ((1.0 / eps - p).abs() < 1e-9).then_some(p as i64)
        };
        Ok(Self {
            kernel,
            eps,
            quad,
            touch,
            cells_per_period,
            cache: Default::default(),
            _t: Default::default(),
        })
    }

    /// Lattice period of `J^(ε)`, if commensurate.
    pub fn period(&self) -> Option<i64> {
        self.cells_per_period
    }

    /// Touching-cell integrals `I_δ` of the unmodulated kernel.
    pub fn touching(&self) -> &[f64] {
        &self.touch
    }

    /// Lower constant `λ_* = (2√d)^{−d−s}λ`.
    pub fn lower_constant(&self) -> f64 {
        lambda_star(self.kernel.lambda, self.kernel.dim, self.kernel.s)
    }

    /// `Λ_* = Λ·max(2^{d+s}, max_δ I_δ |δ|₁^{d+s})·(1 + 10⁻²)`, independent of ε.
    pub fn upper_constant(&self) -> f64 {
        let d = self.kernel.dim;
        let e = d as f64 + self.kernel.s;
        let mut m = 2f64.powf(e);
        for (idx, v) in self.touch.iter().enumerate() {
            let dl = base3(idx, d);
            let n1: i64 = dl.iter().map(|x| x.abs()).sum();
            if n1 > 0 {
                m = m.max(v * (n1 as f64).powf(e));
            }
        }
        self.kernel.upper * m * 1.01
    }

    pub fn coupling(&self, i: &Site, j: &Site) -> T {
        if i == j {
            return T::zero();
        }
        T::c(self.pair_value(i, j))
    }

    /// `J^(ε)(0, k)` for translation-invariant kernels.
    pub fn coupling_offset_f64(&self, k: &Site) -> f64 {
        self.pair_value(&Site::zero(k.dim()), k)
    }

    fn pair_value(&self, i: &Site, j: &Site) -> f64 {
        // Canonical orientation makes J_ij = J_ji bitwise.
        let (a, b) = if i <= j { (*i, *j) } else { (*j, *i) };
        let key = match self.cells_per_period {
            Some(p) => Some((a.class_index(p), b - a)),
            None => None,
        };
        if let Some(k) = &key {
            if let Some(v) = self.cache.read().unwrap().get(k) {
                return *v;
            }
        }
        let v = match &key {
            Some((_, off)) => {
                let p = self.cells_per_period.unwrap();
                let a0 = a.rem_euclid(p);
                self.integrate(&a0, &(a0 + *off))
            }
            None => self.integrate(&a, &b),
        };
        if let Some(k) = key {
            self.cache.write().unwrap().insert(k, v);
        }
        v
    }

    /// `ε^{−d+s}∫∫ K` over the cells of `a` and `b`, in unit-cell coordinates.
    fn integrate(&self, a: &Site, b: &Site) -> f64 {
        let d = self.kernel.dim;
        let ca: Vec<f64> = a.coords().iter().map(|&x| x as f64).collect();
        let cb: Vec<f64> = b.coords().iter().map(|&x| x as f64).collect();
        let m = (*b - *a).linf_norm();
        if m >= 2 {
            let off: Vec<f64> = (0..d).map(|k| cb[k] - ca[k]).collect();
            return far_rule(d, &ca, &off, 1.0, far_points(d, m), &|x: &[f64], y: &[f64]| self.unit_integrand(x, y));
        }
        self.touching_pair(&ca, &cb, 1.0, self.quad.levels)
    }

    #[inline]
    fn unit_integrand(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.kernel.dim;
        let r2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        let a = match &self.kernel.modulation {
            Modulation::Constant(c) => *c,
            Modulation::Periodic { f, .. } => {
                let mut xs = [0.0f64; 4];
                let mut ys = [0.0f64; 4];
                for k in 0..d {
                    xs[k] = x[k] * self.eps;
                    ys[k] = y[k] * self.eps;
                }
                f(&xs[..d], &ys[..d])
            }
        };
        a * r2.powf(-(d as f64 + self.kernel.s) / 2.0)
    }

    fn touching_pair(&self, ca: &[f64], cb: &[f64], h: f64, level: u32) -> f64 {
        let d = self.kernel.dim;
        let dl: Vec<i64> = (0..d).map(|k| ((cb[k] - ca[k]) / h).round() as i64).collect();
        let m = dl.iter().map(|x| x.abs()).max().unwrap();
        if m >= 2 {
            let off: Vec<f64> = dl.iter().map(|&x| x as f64).collect();
            return far_rule(d, ca, &off, h, far_points(d, m), &|x: &[f64], y: &[f64]| self.unit_integrand(x, y));
        }
        if level == 0 {
            let idx = dl.iter().fold(0usize, |acc, &x| acc * 3 + (x + 1) as usize);
            let xa: Vec<f64> = ca.iter().map(|x| x * self.eps).collect();
            let xb: Vec<f64> = cb.iter().map(|x| x * self.eps).collect();
            let a = self.kernel.modulation_at(&xa, &xb);
            return a * h.powf(d as f64 - self.kernel.s) * self.touch[idx];
        }
        let hh = h / 2.0;
        let mut acc = 0.0;
        for ma in 0..(1usize << d) {
            let sa: Vec<f64> = (0..d).map(|k| ca[k] + hh * (((ma >> k) & 1) as f64 - 0.5)).collect();
            for mb in 0..(1usize << d) {
                let sb: Vec<f64> = (0..d).map(|k| cb[k] + hh * (((mb >> k) & 1) as f64 - 0.5)).collect();
                acc += self.touching_pair(&sa, &sb, hh, level - 1);
            }
        }
        acc
    }
}

/// The coefficients `J^(ε)_ij = ε^{−d+s}∫∫_{cells} K`.
pub fn discretize<T: Scalar>(kernel: &ContinuumKernel, eps: f64, quad: Quadrature) -> Result<CouplingSpec<T>> {
    Ok(CouplingSpec::Discretized(Arc::new(DiscreteKernel::new(kernel.clone(), eps, quad)?)))
}

//! Spin configurations: ±1 values on a finite window plus a closure rule
//! that fixes every site outside it.

use crate::error::{Error, Result};
use crate::lattice::{Cube, Direction, Endpoints, QuotientLattice, Site, SlabSpec};
use num_rational::Ratio;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

/// Finite set of sites carrying explicit spins.
#[derive(Clone)]
pub enum Window {
    Cube(Cube),
    Sites { sites: Vec<Site>, index: HashMap<Site, usize> },
}

impl Window {
    /// Sorts and deduplicates.
    pub fn from_sites(mut sites: Vec<Site>) -> Self {
        sites.sort();
        sites.dedup();
        let index = sites.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        Window::Sites { sites, index }
    }

    pub fn len(&self) -> usize {
        match self {
            Window::Cube(c) => c.len(),
            Window::Sites { sites, .. } => sites.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index_of(&self, s: &Site) -> Option<usize> {
        match self {
            Window::Cube(c) => c.index_of(s),
            Window::Sites { index, .. } => index.get(s).copied(),
        }
    }

    pub fn site_at(&self, k: usize) -> Site {
        match self {
            Window::Cube(c) => c.site_at(k),
            Window::Sites { sites, .. } => sites[k],
        }
    }

    pub fn sites(&self) -> Vec<Site> {
        (0..self.len()).map(|k| self.site_at(k)).collect()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index_of(s).is_some()
    }

    pub fn translated(&self, k: Site) -> Window {
        match self {
            Window::Cube(c) => Window::Cube(Cube::new(c.center + k, c.half_side)),
            Window::Sites { sites, .. } => Window::from_sites(sites.iter().map(|s| *s + k).collect()),
        }
    }

    /// Lower and upper corners of the bounding box.
    pub fn bounds(&self) -> Option<(Site, Site)> {
        if self.is_empty() {
            return None;
        }
        match self {
            Window::Cube(c) => {
                let h = Site::new(&vec![c.half_side; c.dim()]);
                Some((c.center - h, c.center + h))
            }
            Window::Sites { sites, .. } => {
                let d = sites[0].dim();
                let mut lo = sites[0];
                let mut hi = sites[0];
                for s in sites {
                    for n in 0..d {
                        lo.set(n, lo.get(n).min(s.get(n)));
                        hi.set(n, hi.get(n).max(s.get(n)));
                    }
                }
                Some((lo, hi))
            }
        }
    }

    fn same_sites(&self, o: &Window) -> bool {
        match (self, o) {
            (Window::Cube(a), Window::Cube(b)) => a == b,
            _ => self.len() == o.len() && (0..self.len()).all(|k| self.site_at(k) == o.site_at(k)),
        }
    }
}

/// Rule fixing the spins outside the window.
#[derive(Clone)]
pub enum Closure {
    Constant(i8),
    /// `+1` where `(ω/|ω|)·i ≤ below`, `−1` where `≥ above`; sites strictly
    /// between take `+1` below the mid-level and `−1` from it on.
    Planelike { dir: Direction, below: Ratio<i64>, above: Ratio<i64> },
    /// `(m,ω)`-periodic extension of the window spins; the window holds the free
    /// representatives, `+1` at heights `≤ A` and `−1` above `B`.
    Periodic { lattice: Arc<QuotientLattice>, slab: SlabSpec },
    /// `u_i = base_{i − shift}`.
    Extend { base: Arc<Configuration>, shift: Site },
    Min(Arc<Configuration>, Arc<Configuration>),
    Max(Arc<Configuration>, Arc<Configuration>),
    /// `u_i = −base_i`.
    Negated(Arc<Configuration>),
}

impl Closure {
    fn same_as(&self, o: &Closure) -> bool {
        match (self, o) {
            (Closure::Constant(a), Closure::Constant(b)) => a == b,
            (
                Closure::Planelike { dir: d1, below: b1, above: a1 },
                Closure::Planelike { dir: d2, below: b2, above: a2 },
            ) => d1 == d2 && b1 == b2 && a1 == a2,
            (Closure::Periodic { lattice: l1, slab: s1 }, Closure::Periodic { lattice: l2, slab: s2 }) => {
                l1 == l2 && s1 == s2
            }
            (Closure::Extend { base: b1, shift: s1 }, Closure::Extend { base: b2, shift: s2 }) => {
                Arc::ptr_eq(b1, b2) && s1 == s2
            }
            _ => false,
        }
    }
}

/// A configuration `u: ℤ^d → {−1, +1}`.
#[derive(Clone)]
pub struct Configuration {
    dim: usize,
    window: Window,
    spins: Vec<i8>,
    closure: Closure,
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration(d={}, window={} sites, +1 count={})", self.dim, self.window.len(), self.count_plus())
    }
}

impl Configuration {
    pub fn new(dim: usize, window: Window, spins: Vec<i8>, closure: Closure) -> Result<Self> {
        if spins.len() != window.len() {
            return Err(Error::Precondition(format!(
                "spin vector has {} entries for a window of {}",
                spins.len(),
                window.len()
            )));
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Precondition("spins must be +1 or -1".into()));
        }
        if let Some((lo, _)) = window.bounds() {
            if lo.dim() != dim {
                return Err(Error::Precondition("window dimension mismatch".into()));
            }
        }
        Ok(Self { dim, window, spins, closure })
    }

    /// The constant configuration on a cube window.
    pub fn constant(cube: Cube, value: i8) -> Self {
        let n = cube.len();
        Self::new(cube.dim(), Window::Cube(cube), vec![value; n], Closure::Constant(value)).unwrap()
    }

    /// Spins from a function on a cube window.
    pub fn from_fn<F: Fn(&Site) -> i8>(cube: Cube, closure: Closure, f: F) -> Self {
        let spins = cube.sites().map(|s| f(&s)).collect();
        Self::new(cube.dim(), Window::Cube(cube), spins, closure).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn closure(&self) -> &Closure {
        &self.closure
    }

    pub fn count_plus(&self) -> usize {
        self.spins.iter().filter(|&&s| s == 1).count()
    }

    /// `u_i` for any site.
    pub fn spin(&self, i: &Site) -> i8 {
        if let Some(k) = self.window.index_of(i) {
            return self.spins[k];
        }
        self.closure_spin(i)
    }

    fn closure_spin(&self, i: &Site) -> i8 {
        match &self.closure {
            Closure::Constant(v) => *v,
            Closure::Planelike { dir, below, above } => {
                let h = dir.height(i);
                if h <= *below {
                    1
                } else if h >= *above {
                    -1
                } else if h * 2 < *below + *above {
                    1
                } else {
                    -1
                }
            }
            Closure::Periodic { lattice, slab } => {
                let dir = &lattice.direction;
                if slab.contains(dir, i, Endpoints::LeftOpen) {
                    let r = lattice.representative(i);
                    match self.window.index_of(&r) {
                        Some(k) => self.spins[k],
                        None => {
                            if dir.height(i) <= slab.a {
                                1
                            } else {
                                -1
                            }
                        }
                    }
                } else if dir.height(i) <= slab.a {
                    1
                } else {
                    -1
                }
            }
            Closure::Extend { base, shift } => base.spin(&(*i - *shift)),
            Closure::Min(a, b) => a.spin(i).min(b.spin(i)),
            Closure::Max(a, b) => a.spin(i).max(b.spin(i)),
            Closure::Negated(b) => -b.spin(i),
        }
    }

    /// Same window and closure, new window spins.
    pub fn with_spins(&self, spins: Vec<i8>) -> Result<Self> {
        Self::new(self.dim, self.window.clone(), spins, self.closure.clone())
    }

    /// Flips the window sites in `flips`; sites outside the window are rejected.
    pub fn flipped(&self, flips: &[Site]) -> Result<Self> {
        let mut sp = self.spins.clone();
        for f in flips {
            let k = self
                .window
                .index_of(f)
                .ok_or_else(|| Error::Precondition(format!("flip site {f} outside the window")))?;
            sp[k] = -sp[k];
        }
        self.with_spins(sp)
    }

    /// `(T_k u)_i = u_{i−k}`.
    pub fn translate(&self, k: Site) -> Self {
        let closure = match &self.closure {
            Closure::Constant(v) => Closure::Constant(*v),
            _ => Closure::Extend { base: Arc::new(self.clone()), shift: k },
        };
        Self { dim: self.dim, window: self.window.translated(k), spins: self.spins.clone(), closure }
    }

    /// The same function of `ℤ^d` restricted to a new window.
    pub fn rewindow(&self, window: Window) -> Self {
        let spins = (0..window.len()).map(|k| self.spin(&window.site_at(k))).collect();
        Self { dim: self.dim, window, spins, closure: Closure::Extend { base: Arc::new(self.clone()), shift: Site::zero(self.dim) } }
    }

    /// `−u`.
    pub fn negated(&self) -> Self {
        let closure = match &self.closure {
            Closure::Constant(v) => Closure::Constant(-*v),
            _ => Closure::Negated(Arc::new(self.clone())),
        };
        Self { dim: self.dim, window: self.window.clone(), spins: self.spins.iter().map(|s| -s).collect(), closure }
    }

    /// Spins on a cube, in the cube's row-major order.
    pub fn sample(&self, cube: &Cube) -> Vec<i8> {
        cube.sites().map(|s| self.spin(&s)).collect()
    }

    /// Pointwise equality on a finite set of sites.
    pub fn agrees_on(&self, o: &Configuration, sites: &[Site]) -> bool {
        sites.iter().all(|s| self.spin(s) == o.spin(s))
    }
}

fn combine(u: &Configuration, v: &Configuration, take_min: bool) -> Result<Configuration> {
    if u.dim != v.dim || !u.window.same_sites(&v.window) {
        return Err(Error::Precondition("min/max need identical windows".into()));
    }
    let f = |a: i8, b: i8| if take_min { a.min(b) } else { a.max(b) };
    let spins = u.spins.iter().zip(&v.spins).map(|(&a, &b)| f(a, b)).collect();
    let closure = if u.closure.same_as(&v.closure) {
        match &u.closure {
            Closure::Constant(_) | Closure::Planelike { .. } | Closure::Extend { .. } => u.closure.clone(),
            Closure::Periodic { .. } => u.closure.clone(),
            _ => unreachable!(),
        }
    } else if let (Closure::Constant(a), Closure::Constant(b)) = (&u.closure, &v.closure) {
        Closure::Constant(f(*a, *b))
    } else if take_min {
        Closure::Min(Arc::new(u.clone()), Arc::new(v.clone()))
    } else {
        Closure::Max(Arc::new(u.clone()), Arc::new(v.clone()))
    };
    Configuration::new(u.dim, u.window.clone(), spins, closure)
}

/// Pointwise minimum.
pub fn min_config(u: &Configuration, v: &Configuration) -> Result<Configuration> {
    combine(u, v, true)
}

/// Pointwise maximum.
pub fn max_config(u: &Configuration, v: &Configuration) -> Result<Configuration> {
    combine(u, v, false)
}

/// `T_k u`.
pub fn translate_config(u: &Configuration, k: Site) -> Configuration {
    u.translate(k)
}

/// Dense spin values on a box, materialized once for fast inner loops.
pub struct SpinField {
    pub lo: Site,
    pub dims: Vec<usize>,
    pub values: Vec<i8>,
}

impl SpinField {
    pub fn new(u: &Configuration, lo: Site, hi: Site) -> Self {
        let d = lo.dim();
        let dims: Vec<usize> = (0..d).map(|n| (hi.get(n) - lo.get(n) + 1) as usize).collect();
        let total: usize = dims.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut cur = lo;
        for _ in 0..total {
            values.push(u.spin(&cur));
            for n in (0..d).rev() {
                if cur.get(n) < hi.get(n) {
                    cur.set(n, cur.get(n) + 1);
                    break;
                }
                cur.set(n, lo.get(n));
            }
        }
        Self { lo, dims, values }
    }

    #[inline]
    pub fn index(&self, s: &Site) -> Option<usize> {
        let mut idx = 0usize;
        for (n, &len) in self.dims.iter().enumerate() {
            let x = s.get(n) - self.lo.get(n);
            if x < 0 || x as usize >= len {
                return None;
            }
            idx = idx * len + x as usize;
        }
        Some(idx)
    }

    #[inline]
    pub fn get(&self, s: &Site) -> Option<i8> {
        self.index(s).map(|k| self.values[k])
    }
}

//! Brute-force reference evaluations shared by the integration tests.
//!
//! Networks are described independently of the library types: winding loops
//! and rectangles, each carrying a product of characters. U(1) expectations
//! come from the enclosed charge of every plaquette. SU(2) expectations come
//! from summing irreps over all regions of the lattice, with gluing
//! multiplicities taken from triple-character integrals.

#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use osr_core::action::{local_action, PlaquetteAction};
use osr_core::group::{character, GroupFamily, GroupSpec, IrrepLabel};
use osr_core::lattice::{build_lattice, CylinderLattice, FoliationSpec, LatticeLoop, LoopNetwork, Topology};
use osr_core::measure::{HistoryVector, Measure};
use osr_core::group::QuadratureSpec;
use num_complex::Complex64;
use rand::Rng;

/// Rectangle with lower-left plaquette `(k, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rect {
    pub k: i32,
    pub l: i32,
    pub w: i32,
    pub h: i32,
}

impl Rect {
    pub fn contains(&self, k: i32, l: i32) -> bool {
        (self.k..self.k + self.w).contains(&k) && (self.l..self.l + self.h).contains(&l)
    }

    pub fn area(&self) -> i32 {
        self.w * self.h
    }

    fn disjoint(&self, o: &Rect) -> bool {
        self.k + self.w <= o.k || o.k + o.w <= self.k || self.l + self.h <= o.l || o.l + o.h <= self.l
    }

    /// A slice line at `row` cuts through the rectangle.
    fn cut_by(&self, row: i32) -> bool {
        self.l < row && row < self.l + self.h
    }

    pub fn to_loop(&self) -> LatticeLoop {
        LatticeLoop::rectangle(self.k, self.l, self.w, self.h)
    }
}

/// A product of characters on windings and rectangles. Labels on the same
/// loop multiply.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Spec {
    pub windings: BTreeMap<i32, Vec<i32>>,
    pub rects: BTreeMap<Rect, Vec<i32>>,
}

impl Spec {
    pub fn winding(mut self, row: i32, label: i32) -> Self {
        self.windings.entry(row).or_default().push(label);
        self
    }

    pub fn rect(mut self, r: Rect, label: i32) -> Self {
        self.rects.entry(r).or_default().push(label);
        self
    }

    /// `conj(self) · other`.
    pub fn conj_times(&self, family: GroupFamily, other: &Spec) -> Spec {
        let d = |n: i32| if family == GroupFamily::CircleGroup { -n } else { n };
        let mut out = other.clone();
        for (row, ls) in &self.windings {
            out.windings.entry(*row).or_default().extend(ls.iter().map(|&n| d(n)));
        }
        for (r, ls) in &self.rects {
            out.rects.entry(*r).or_default().extend(ls.iter().map(|&n| d(n)));
        }
        out
    }

    /// Library network; every loop must carry exactly one label.
    pub fn network(&self) -> LoopNetwork {
        let mut entries = Vec::new();
        for (row, ls) in &self.windings {
            assert_eq!(ls.len(), 1);
            entries.push((LatticeLoop::winding(*row), IrrepLabel(ls[0])));
        }
        for (r, ls) in &self.rects {
            assert_eq!(ls.len(), 1);
            entries.push((r.to_loop(), IrrepLabel(ls[0])));
        }
        LoopNetwork::new(entries).unwrap()
    }
}

/// Single-plaquette character ratios, computed without the library tables.
pub struct Ratios {
    pub group: GroupSpec,
    pub action: PlaquetteAction,
    cache: RefCell<HashMap<i32, f64>>,
}

impl Ratios {
    pub fn new(group: GroupSpec, action: PlaquetteAction) -> Self {
        Self {
            group,
            action,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn get(&self, n: i32) -> f64 {
        if n == 0 {
            return 1.0;
        }
        if let Some(v) = self.cache.borrow().get(&n) {
            return *v;
        }
        let v = match &self.action {
            PlaquetteAction::HeatKernelYM { g2, plaq_area } => {
                let c = match self.group.family {
                    GroupFamily::CircleGroup => (n * n) as f64,
                    GroupFamily::SpecialUnitary2 => 0.25 * (n * (n + 2)) as f64,
                };
                (-0.5 * g2 * plaq_area * c * self.group.killing_scale).exp()
            }
            action => self.by_midpoint(action, n),
        };
        self.cache.borrow_mut().insert(n, v);
        v
    }

    /// Midpoint rule; the integrands are smooth and periodic, so it converges
    /// geometrically.
    fn by_midpoint(&self, action: &PlaquetteAction, n: i32) -> f64 {
        const M: usize = 40_000;
        let (span, dim) = match self.group.family {
            GroupFamily::CircleGroup => (2.0 * PI, 1.0),
            GroupFamily::SpecialUnitary2 => (PI, (n + 1) as f64),
        };
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..M {
            let t = (i as f64 + 0.5) * span / M as f64;
            let w = (-local_action(action, &self.group, t)).exp();
            let (chi, density) = match self.group.family {
                GroupFamily::CircleGroup => ((n as f64 * t).cos(), 1.0),
                GroupFamily::SpecialUnitary2 => (((n + 1) as f64 * t).sin() / t.sin(), t.sin().powi(2)),
            };
            num += chi * w * density;
            den += w * density;
        }
        num / den / dim
    }
}

/// `∫ χ_{out} Π χ_{labels} conj(χ_{in})` over SU(2), rounded to the integer it must be.
fn su2_coupling(cache: &mut HashMap<(i32, Vec<i32>, i32), i64>, out: i32, labels: &[i32], inside: i32) -> i64 {
    let key = (out, labels.to_vec(), inside);
    if let Some(v) = cache.get(&key) {
        return *v;
    }
    let total: i32 = out + labels.iter().sum::<i32>();
    let v = if inside > total || (total - inside) % 2 != 0 {
        0
    } else {
        const M: usize = 400;
        let g = GroupSpec::su2();
        let mut s = 0.0;
        for i in 0..M {
            let t = (i as f64 + 0.5) * PI / M as f64;
            let mut f = character(&g, IrrepLabel(out), t).re * character(&g, IrrepLabel(inside), t).re;
            for &p in labels {
                f *= character(&g, IrrepLabel(p), t).re;
            }
            s += f * 2.0 / PI * t.sin().powi(2) * PI / M as f64;
        }
        let r = s.round();
        assert!((s - r).abs() < 1e-6, "coupling integral {s} is not an integer");
        r as i64
    };
    cache.insert(key, v);
    v
}

/// `∫ Π χ` for the given spec under the lattice measure with the given ratios.
pub fn oracle(lattice: &CylinderLattice, ratios: &Ratios, spec: &Spec) -> f64 {
    match ratios.group.family {
        GroupFamily::CircleGroup => u1_oracle(lattice, ratios, spec),
        GroupFamily::SpecialUnitary2 => su2_oracle(lattice, ratios, spec),
    }
}

fn u1_oracle(lattice: &CylinderLattice, ratios: &Ratios, spec: &Spec) -> f64 {
    let total: i32 = spec.windings.values().flatten().sum();
    if total != 0 {
        return 0.0;
    }
    let (hc, hr) = (lattice.half_columns, lattice.half_rows);
    let mut value = 1.0;
    for k in -hc..hc {
        for l in -hr..hr {
            let mut q: i32 = spec
                .windings
                .iter()
                .filter(|(row, _)| **row <= l)
                .flat_map(|(_, ls)| ls)
                .sum();
            for (r, ls) in &spec.rects {
                if r.contains(k, l) {
                    q += ls.iter().sum::<i32>();
                }
            }
            value *= ratios.get(q);
        }
    }
    value
}

fn su2_oracle(lattice: &CylinderLattice, ratios: &Ratios, spec: &Spec) -> f64 {
    let rows: Vec<i32> = spec.windings.keys().copied().collect();
    let m = rows.len();
    let columns = lattice.columns();
    let band_of = |r: &Rect| rows.iter().filter(|&&w| w <= r.l).count();
    // Free ends force the outermost bands to the trivial irrep.
    let mut band_area = vec![0i32; m + 1];
    let mut band_holes = vec![0i32; m + 1];
    for b in 1..m {
        band_area[b] = (rows[b] - rows[b - 1]) * columns;
    }
    let rects: Vec<(Rect, Vec<i32>, usize)> = spec.rects.iter().map(|(r, ls)| (*r, ls.clone(), band_of(r))).collect();
    for (r, _, b) in &rects {
        band_area[*b] -= r.area();
        band_holes[*b] += 1;
    }
    let winding_labels: Vec<Vec<i32>> = spec.windings.values().cloned().collect();
    let bound: i32 = spec.windings.values().chain(spec.rects.values()).flatten().sum();
    let mut cache = HashMap::new();

    let dim_pow = |s: i32, chi: i32| ((s + 1) as f64).powi(chi);
    let mut total = 0.0;
    let mut bands = vec![0i32; m + 1];
    // Odometer over the interior band irreps.
    loop {
        let mut term = 1.0;
        for b in 0..m {
            let c = su2_coupling(&mut cache, bands[b], &winding_labels[b], bands[b + 1]);
            term *= c as f64;
            if term == 0.0 {
                break;
            }
        }
        if term != 0.0 {
            for b in 1..m {
                term *= dim_pow(bands[b], -band_holes[b]) * ratios.get(bands[b]).powi(band_area[b]);
            }
            for (r, ls, b) in &rects {
                let outside = bands[*b];
                let mut disk = 0.0;
                for tau in 0..=bound {
                    let c = su2_coupling(&mut cache, outside, ls, tau);
                    if c != 0 {
                        disk += c as f64 * dim_pow(tau, 1) * ratios.get(tau).powi(r.area());
                    }
                }
                term *= disk;
            }
            total += term;
        }
        let mut b = 1;
        loop {
            if b >= m {
                return total;
            }
            bands[b] += 1;
            if bands[b] <= bound {
                break;
            }
            bands[b] = 0;
            b += 1;
        }
    }
}

pub fn lattice(epsilon: f64, t_cutoff: f64) -> CylinderLattice {
    build_lattice(epsilon, 1.0, t_cutoff, Topology::Cylinder).unwrap()
}

pub fn foliation() -> FoliationSpec {
    FoliationSpec::new(0, 1.0, 2.0).unwrap()
}

/// Library measure and matching oracle ratios.
pub fn measures(group: GroupSpec, lattice: CylinderLattice, wilson: bool, g2: f64) -> (Measure, Ratios) {
    let fol = foliation();
    let plaq_area = lattice.plaquette_area(fol.length);
    let action = if wilson {
        PlaquetteAction::WilsonYM { g2, plaq_area, kappa: None }
    } else {
        PlaquetteAction::HeatKernelYM { g2, plaq_area }
    };
    let m = Measure::lattice_gauge(group, action.clone(), lattice, fol, 48, &QuadratureSpec::default()).unwrap();
    (m, Ratios::new(group, action))
}

pub fn random_label<R: Rng>(rng: &mut R, family: GroupFamily, max: i32) -> i32 {
    match family {
        GroupFamily::CircleGroup => {
            let n = rng.gen_range(1..=max);
            if rng.gen_bool(0.5) {
                n
            } else {
                -n
            }
        }
        GroupFamily::SpecialUnitary2 => rng.gen_range(1..=max),
    }
}

/// Random rectangle on the lattice avoiding `taken` and not cut by any of `rows`.
pub fn random_rect<R: Rng>(rng: &mut R, lattice: &CylinderLattice, rows: &[i32], taken: &[Rect]) -> Option<Rect> {
    let (hc, hr) = (lattice.half_columns, lattice.half_rows);
    for _ in 0..50 {
        let w = rng.gen_range(1..=2 * hc - 1);
        let h = rng.gen_range(1..=(2 * hr).min(2));
        let k = rng.gen_range(-hc..=hc - w);
        let l = rng.gen_range(-hr..=hr - h);
        let r = Rect { k, l, w, h };
        if rows.iter().all(|&row| !r.cut_by(row)) && taken.iter().all(|t| t.disjoint(&r)) {
            return Some(r);
        }
    }
    None
}

pub fn history(spec: &Spec) -> HistoryVector {
    HistoryVector::network(spec.network())
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

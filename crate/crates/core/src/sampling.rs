//! Seeded random loop networks, history vectors and area-preserving
//! transformations, used by the axiom checks and the test suites.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OsrError, Result};
use crate::group::{GroupFamily, GroupSpec, IrrepLabel};
use crate::lattice::{CylinderLattice, FoliationSpec, LatticeLoop, LoopNetwork, Plaquette, Topology};
use crate::measure::HistoryVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    /// Every loop in the closed half space `t_E ≥ 0`.
    Positive,
    /// Anywhere within `row_span` rows of the time-zero line.
    Anywhere,
}

#[derive(Debug, Clone)]
pub struct NetworkSampler {
    pub group: GroupSpec,
    pub lattice: CylinderLattice,
    pub foliation: FoliationSpec,
    /// Largest label magnitude put on a sampled loop.
    pub max_irrep: u32,
    pub max_loops: usize,
    /// Rows above (and, for `Anywhere`, below) the time-zero line that loops may use.
    pub row_span: i32,
}

impl NetworkSampler {
    pub fn new(group: GroupSpec, lattice: CylinderLattice, foliation: FoliationSpec) -> Self {
        Self {
            group,
            lattice,
            foliation,
            max_irrep: 2,
            max_loops: 3,
            row_span: 3,
        }
    }

    pub fn random_irrep<R: Rng>(&self, rng: &mut R) -> IrrepLabel {
        let m = self.max_irrep.max(1) as i32;
        let v = rng.gen_range(1..=m);
        match self.group.family {
            GroupFamily::SpecialUnitary2 => IrrepLabel(v),
            GroupFamily::CircleGroup => IrrepLabel(if rng.gen_bool(0.5) { v } else { -v }),
        }
    }

    fn row_range(&self, support: Support) -> (i32, i32) {
        let z = self.foliation.time_zero_row;
        let n = self.lattice.half_rows;
        let hi = (z + self.row_span).min(n);
        let lo = match support {
            Support::Positive => z,
            Support::Anywhere => (z - self.row_span).max(-n),
        };
        (lo, hi)
    }

    fn random_loop<R: Rng>(&self, rng: &mut R, support: Support) -> LatticeLoop {
        let (lo, hi) = self.row_range(support);
        let nc = self.lattice.half_columns;
        let winding_allowed = self.lattice.topology == Topology::Cylinder;
        if winding_allowed && rng.gen_bool(0.4) {
            return LatticeLoop::winding(rng.gen_range(lo..=hi));
        }
        let max_w = self.lattice.columns().clamp(1, 3);
        let w = rng.gen_range(1..=max_w);
        let h = rng.gen_range(1..=2.min((hi - lo).max(1)));
        let l = rng.gen_range(lo..=(hi - h).max(lo));
        let k = match self.lattice.topology {
            Topology::Cylinder => rng.gen_range(-nc..nc),
            Topology::Plane => rng.gen_range(-nc..=(nc - w).max(-nc)),
        };
        let region = (0..w).flat_map(|dk| (0..h).map(move |dl| (dk, dl))).map(|(dk, dl)| {
            let kk = k + dk;
            let kk = if self.lattice.topology == Topology::Cylinder {
                (kk + nc).rem_euclid(2 * nc) - nc
            } else {
                kk
            };
            Plaquette::new(kk, l + dl)
        });
        LatticeLoop::contractible(region)
    }

    /// A random non-crossing network; occasionally nests a single plaquette
    /// inside a larger rectangle.
    pub fn random_network<R: Rng>(&self, rng: &mut R, support: Support) -> LoopNetwork {
        let count = rng.gen_range(1..=self.max_loops.max(1));
        let mut entries: Vec<(LatticeLoop, IrrepLabel)> = Vec::new();
        for _ in 0..count * 8 {
            if entries.len() >= count {
                break;
            }
            let lp = self.random_loop(rng, support);
            if self.lattice.validate_loop(&lp).is_err() {
                continue;
            }
            let mut candidate = entries.clone();
            candidate.push((lp, self.random_irrep(rng)));
            if LoopNetwork::new(candidate.clone()).is_ok() {
                entries = candidate;
            }
        }
        if rng.gen_bool(0.2) {
            if let Some(inner) = self.nested_candidate(rng, &entries) {
                let mut candidate = entries.clone();
                candidate.push((inner, self.random_irrep(rng)));
                if LoopNetwork::new(candidate.clone()).is_ok() {
                    entries = candidate;
                }
            }
        }
        LoopNetwork::new(entries).expect("entries were checked incrementally")
    }

    fn nested_candidate<R: Rng>(&self, rng: &mut R, entries: &[(LatticeLoop, IrrepLabel)]) -> Option<LatticeLoop> {
        let hosts: Vec<_> = entries
            .iter()
            .filter_map(|(l, _)| l.region())
            .filter(|r| r.len() >= 2)
            .collect();
        let host = hosts.choose(rng)?;
        let p = *host.iter().collect::<Vec<_>>().choose(rng)?;
        let inner = LatticeLoop::contractible([*p]);
        self.lattice.validate_loop(&inner).ok()?;
        Some(inner)
    }

    /// `Σ z_I P_{f_I}` with `terms` random networks and complex coefficients.
    pub fn random_history<R: Rng>(&self, rng: &mut R, terms: usize, support: Support) -> HistoryVector {
        let terms = (0..terms.max(1))
            .map(|_| {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let net = if rng.gen_bool(0.15) {
                    LoopNetwork::unit()
                } else {
                    self.random_network(rng, support)
                };
                (z, net)
            })
            .collect();
        HistoryVector::new(terms)
    }
}

/// Diffeomorphisms of the lattice cylinder that preserve the area form up to
/// orientation, together with moves of a single region within its face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transformation {
    Translate(i32),
    Reflect,
    RotateColumns(i32),
    Mirror,
    /// Moves the `index`-th outermost contractible loop, with the loops nested
    /// inside it, sideways by the given number of columns.
    Relocate { index: usize, columns: i32 },
}

pub fn random_transformation<R: Rng>(rng: &mut R, lattice: &CylinderLattice) -> Transformation {
    let c = lattice.columns();
    match rng.gen_range(0..5) {
        0 => Transformation::Translate(rng.gen_range(-2..=2)),
        1 => Transformation::Reflect,
        2 => Transformation::RotateColumns(rng.gen_range(1..c.max(2))),
        3 => Transformation::Mirror,
        _ => Transformation::Relocate {
            index: rng.gen_range(0..4),
            columns: rng.gen_range(-c..=c),
        },
    }
}

pub fn apply_transformation(
    network: &LoopNetwork,
    t: Transformation,
    group: &GroupSpec,
    lattice: &CylinderLattice,
    foliation: &FoliationSpec,
) -> Result<LoopNetwork> {
    match t {
        Transformation::Translate(s) => network.translate(s, lattice),
        Transformation::Reflect => network.reflect(group, foliation, lattice),
        Transformation::RotateColumns(dk) => network.shift_columns(dk, lattice),
        Transformation::Mirror => network.mirror(group, lattice),
        Transformation::Relocate { index, columns } => {
            let outer: Vec<&LatticeLoop> = network
                .entries()
                .iter()
                .map(|(l, _)| l)
                .filter(|l| {
                    l.region().is_some_and(|r| {
                        !network.entries().iter().any(|(o, _)| {
                            o.region().is_some_and(|ro| ro.len() > r.len() && r.is_subset(ro))
                        })
                    })
                })
                .collect();
            let Some(host) = outer.get(index).map(|l| (*l).clone()) else {
                return Err(OsrError::InvalidParameter("no region to relocate".into()));
            };
            let host_region = host.region().expect("contractible").clone();
            let entries = network
                .entries()
                .iter()
                .map(|(l, p)| {
                    let inside = l.region().is_some_and(|r| r.is_subset(&host_region));
                    if inside {
                        let m = l.shift_columns(lattice, columns);
                        lattice.validate_loop(&m)?;
                        Ok((m, *p))
                    } else {
                        Ok((l.clone(), *p))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            // A move that changes which regions contain which is not a diffeomorphism.
            let before = network.entries();
            for (i, ((old, _), (new, _))) in before.iter().zip(&entries).enumerate() {
                let (Some(r_old), Some(r_new)) = (old.region(), new.region()) else { continue };
                if r_old == r_new {
                    continue;
                }
                for (j, (other, _)) in before.iter().enumerate() {
                    let Some(s) = other.region() else { continue };
                    if i == j || entries[j].0.region() != Some(s) {
                        continue;
                    }
                    if nesting(r_old, s) != nesting(r_new, s) {
                        return Err(OsrError::InvalidParameter("relocation changes the nesting of regions".into()));
                    }
                }
            }
            LoopNetwork::new(entries)
        }
    }
}

/// `Some(None)` if disjoint, `Some(Some(true))` if `r ⊆ s`,
/// `Some(Some(false))` if `s ⊂ r`, `None` for a partial overlap.
fn nesting(r: &BTreeSet<Plaquette>, s: &BTreeSet<Plaquette>) -> Option<Option<bool>> {
    if r.is_disjoint(s) {
        Some(None)
    } else if r.is_subset(s) {
        Some(Some(true))
    } else if s.is_subset(r) {
        Some(Some(false))
    } else {
        None
    }
}

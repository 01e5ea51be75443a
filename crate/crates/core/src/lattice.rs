//! The regularized space-time: a cylinder `ℝ × S¹` (or the plane) cut off at
//! `|t| ≤ T`, with a square lattice of spacing `εa`.
//!
//! Lattice lines at constant time are indexed by `row ∈ [-N, N]`; plaquette
//! `(k, l)` spans columns `[k, k+1]` and time rows `[l, l+1]`, with
//! `k ∈ [-N', N')` and `l ∈ [-N, N)`. On the cylinder column `k` is identified
//! with `k + 2N'`.
//!
//! Loops are stored by homotopy data: a contractible loop is the boundary of a
//! simply connected plaquette region (traversed counterclockwise in the
//! `(x, t)` plane), and a winding loop is a constant-time lattice circle
//! traversed in the `+x` direction.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{OsrError, Result};
use crate::group::{dual, GroupSpec, IrrepLabel};

const INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    Cylinder,
    Plane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderLattice {
    pub epsilon: f64,
    pub a: f64,
    pub t_cutoff: f64,
    pub topology: Topology,
    /// `N' = 1/ε`; the circle has `2N'` columns.
    pub half_columns: i32,
    /// `N = T/(εa)`; lines run over rows `-N..=N`.
    pub half_rows: i32,
}

fn as_integer(x: f64, what: &str) -> Result<i32> {
    let r = x.round();
    if r < 1.0 || (x - r).abs() > INTEGRALITY_TOL * x.abs().max(1.0) {
        return Err(OsrError::InvalidLattice(format!(
            "{what} = {x} is not a positive integer"
        )));
    }
    Ok(r as i32)
}

pub fn build_lattice(epsilon: f64, a: f64, t_cutoff: f64, topology: Topology) -> Result<CylinderLattice> {
    for (name, v) in [("epsilon", epsilon), ("a", a), ("T", t_cutoff)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(OsrError::InvalidLattice(format!("{name} must be positive, got {v}")));
        }
    }
    let half_columns = as_integer(1.0 / epsilon, "1/epsilon")?;
    let half_rows = as_integer(t_cutoff / (epsilon * a), "T/(epsilon a)")?;
    Ok(CylinderLattice {
        epsilon,
        a,
        t_cutoff,
        topology,
        half_columns,
        half_rows,
    })
}

/// Lattice with spacing `ε/m` covering the same cylinder.
pub fn refine_lattice(lattice: &CylinderLattice, m: i32) -> Result<CylinderLattice> {
    if m < 1 {
        return Err(OsrError::InvalidParameter(format!("refinement factor must be positive, got {m}")));
    }
    build_lattice(lattice.epsilon / m as f64, lattice.a, lattice.t_cutoff, lattice.topology)
}

impl CylinderLattice {
    pub fn columns(&self) -> i32 {
        2 * self.half_columns
    }

    pub fn plaquette_rows(&self) -> i32 {
        2 * self.half_rows
    }

    pub fn plaquette_total(&self) -> usize {
        (self.columns() as usize) * (self.plaquette_rows() as usize)
    }

    /// Coordinate-time separation of neighbouring lattice lines.
    pub fn time_step(&self) -> f64 {
        self.epsilon * self.a
    }

    /// Area of one plaquette for an area form whose slices have length `length`.
    pub fn plaquette_area(&self, length: f64) -> f64 {
        length * self.time_step() / self.columns() as f64
    }

    pub fn contains_line(&self, row: i32) -> bool {
        (-self.half_rows..=self.half_rows).contains(&row)
    }

    pub fn contains_plaquette(&self, p: Plaquette) -> bool {
        (-self.half_columns..self.half_columns).contains(&p.k)
            && (-self.half_rows..self.half_rows).contains(&p.l)
    }

    fn wrap_column(&self, k: i32) -> i32 {
        match self.topology {
            Topology::Cylinder => {
                let c = self.columns();
                (k + self.half_columns).rem_euclid(c) - self.half_columns
            }
            Topology::Plane => k,
        }
    }

    /// Checks that a loop lies on this lattice and has the admissible shape.
    pub fn validate_loop(&self, lp: &LatticeLoop) -> Result<()> {
        match lp {
            LatticeLoop::Winding { row } => {
                if self.topology == Topology::Plane {
                    return Err(OsrError::InvalidLoop(
                        "winding loops do not exist on the plane".into(),
                    ));
                }
                if !self.contains_line(*row) {
                    return Err(OsrError::OffLattice(format!("slice row {row}")));
                }
                Ok(())
            }
            LatticeLoop::Contractible { region } => {
                if region.is_empty() {
                    return Err(OsrError::InvalidLoop("empty region".into()));
                }
                if let Some(p) = region.iter().find(|p| !self.contains_plaquette(**p)) {
                    return Err(OsrError::OffLattice(format!("plaquette ({}, {})", p.k, p.l)));
                }
                if !self.is_connected(region) {
                    return Err(OsrError::InvalidLoop("region is not edge-connected".into()));
                }
                let chi = self.euler_characteristic(region);
                if chi != 1 {
                    return Err(OsrError::InvalidLoop(format!(
                        "region is not simply connected (Euler characteristic {chi})"
                    )));
                }
                Ok(())
            }
        }
    }

    fn is_connected(&self, region: &BTreeSet<Plaquette>) -> bool {
        let start = match region.iter().next() {
            Some(p) => *p,
            None => return true,
        };
        let mut seen = HashSet::from([start]);
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for (dk, dl) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let q = Plaquette::new(self.wrap_column(p.k + dk), p.l + dl);
                if region.contains(&q) && seen.insert(q) {
                    stack.push(q);
                }
            }
        }
        seen.len() == region.len()
    }

    /// `V - E + F` of the closed region, with the column identification applied.
    fn euler_characteristic(&self, region: &BTreeSet<Plaquette>) -> i64 {
        let mut vertices = HashSet::new();
        let mut edges = HashSet::new();
        for p in region {
            let (k0, k1) = (self.wrap_column(p.k), self.wrap_column(p.k + 1));
            let (l0, l1) = (p.l, p.l + 1);
            for v in [(k0, l0), (k1, l0), (k0, l1), (k1, l1)] {
                vertices.insert(v);
            }
            // Horizontal edges keyed by left end, vertical edges by bottom end.
            edges.insert((k0, l0, true));
            edges.insert((k0, l1, true));
            edges.insert((k0, l0, false));
            edges.insert((k1, l0, false));
        }
        vertices.len() as i64 - edges.len() as i64 + region.len() as i64
    }
}

/// Foliation data: which lattice line is `t = 0`, the rate `b` at which the
/// foliation's time runs relative to the lattice coordinate time, and the
/// slice length `L` (the area swept per unit coordinate time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoliationSpec {
    pub time_zero_row: i32,
    pub b: f64,
    pub length: f64,
}

impl FoliationSpec {
    pub fn new(time_zero_row: i32, b: f64, length: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(OsrError::InvalidParameter(format!("b must be positive, got {b}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(OsrError::InvalidParameter(format!("L must be positive, got {length}")));
        }
        Ok(Self {
            time_zero_row,
            b,
            length,
        })
    }

    pub fn validate_on(&self, lattice: &CylinderLattice) -> Result<()> {
        if lattice.contains_line(self.time_zero_row) {
            Ok(())
        } else {
            Err(OsrError::OffLattice(format!(
                "time-zero row {} outside ±{}",
                self.time_zero_row, lattice.half_rows
            )))
        }
    }

    /// Lattice rows swept by the time translation `φ^t_E`.
    pub fn rows_for_time(&self, lattice: &CylinderLattice, t: f64) -> f64 {
        self.b * t / lattice.time_step()
    }
}

/// Area enclosed between the slices `E_0` and `E_t`; linear in `t`.
pub fn area_between_slices(foliation: &FoliationSpec, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(OsrError::InvalidParameter(format!("t must be non-negative, got {t}")));
    }
    Ok(foliation.length * foliation.b * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Plaquette {
    pub k: i32,
    pub l: i32,
}

impl Plaquette {
    pub fn new(k: i32, l: i32) -> Self {
        Self { k, l }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LatticeLoop {
    /// Constant-time circle at lattice line `row`, winding once in `+x`.
    Winding { row: i32 },
    /// Counterclockwise boundary of a simply connected plaquette region.
    Contractible { region: BTreeSet<Plaquette> },
}

impl LatticeLoop {
    pub fn winding(row: i32) -> Self {
        LatticeLoop::Winding { row }
    }

    pub fn contractible<I: IntoIterator<Item = Plaquette>>(plaquettes: I) -> Self {
        LatticeLoop::Contractible {
            region: plaquettes.into_iter().collect(),
        }
    }

    /// Axis-aligned rectangle with lower-left plaquette `(k, l)`.
    pub fn rectangle(k: i32, l: i32, width: i32, height: i32) -> Self {
        Self::contractible(
            (0..width).flat_map(|dk| (0..height).map(move |dl| Plaquette::new(k + dk, l + dl))),
        )
    }

    pub fn winding_number(&self) -> i32 {
        match self {
            LatticeLoop::Winding { .. } => 1,
            LatticeLoop::Contractible { .. } => 0,
        }
    }

    pub fn slice_row(&self) -> Option<i32> {
        match self {
            LatticeLoop::Winding { row } => Some(*row),
            LatticeLoop::Contractible { .. } => None,
        }
    }

    pub fn region(&self) -> Option<&BTreeSet<Plaquette>> {
        match self {
            LatticeLoop::Contractible { region } => Some(region),
            LatticeLoop::Winding { .. } => None,
        }
    }

    /// Inclusive range of plaquette rows, for contractible loops.
    pub fn plaquette_row_span(&self) -> Option<(i32, i32)> {
        let region = self.region()?;
        let lo = region.iter().map(|p| p.l).min()?;
        let hi = region.iter().map(|p| p.l).max()?;
        Some((lo, hi))
    }

    fn map_rows(&self, line: impl Fn(i32) -> i32, plaquette_row: impl Fn(i32) -> i32) -> Self {
        match self {
            LatticeLoop::Winding { row } => LatticeLoop::Winding { row: line(*row) },
            LatticeLoop::Contractible { region } => LatticeLoop::Contractible {
                region: region.iter().map(|p| Plaquette::new(p.k, plaquette_row(p.l))).collect(),
            },
        }
    }

    /// Mirror image under `x → -x` (orientation is not tracked here).
    pub fn mirror_columns(&self) -> Self {
        match self {
            LatticeLoop::Winding { .. } => self.clone(),
            LatticeLoop::Contractible { region } => LatticeLoop::Contractible {
                region: region.iter().map(|p| Plaquette::new(-p.k - 1, p.l)).collect(),
            },
        }
    }

    /// The same loop on the lattice with spacing `ε/m`: lines `r → m·r`,
    /// every plaquette becomes an `m × m` block.
    pub fn refine(&self, m: i32) -> Self {
        match self {
            LatticeLoop::Winding { row } => LatticeLoop::Winding { row: m * row },
            LatticeLoop::Contractible { region } => LatticeLoop::Contractible {
                region: region
                    .iter()
                    .flat_map(|p| (0..m).flat_map(move |i| (0..m).map(move |j| Plaquette::new(m * p.k + i, m * p.l + j))))
                    .collect(),
            },
        }
    }

    pub fn shift_columns(&self, lattice: &CylinderLattice, dk: i32) -> Self {
        match self {
            LatticeLoop::Winding { .. } => self.clone(),
            LatticeLoop::Contractible { region } => LatticeLoop::Contractible {
                region: region
                    .iter()
                    .map(|p| Plaquette::new(lattice.wrap_column(p.k + dk), p.l))
                    .collect(),
            },
        }
    }
}

/// Number of plaquettes enclosed by the loop; zero for winding loops.
pub fn plaquette_count(lp: &LatticeLoop) -> usize {
    lp.region().map_or(0, BTreeSet::len)
}

/// Reflection `θ_E` about the foliation's time-zero line.
pub fn time_reflect(lp: &LatticeLoop, foliation: &FoliationSpec, lattice: &CylinderLattice) -> Result<LatticeLoop> {
    let z = foliation.time_zero_row;
    let out = lp.map_rows(|r| 2 * z - r, |l| 2 * z - l - 1);
    lattice.validate_loop(&out)?;
    Ok(out)
}

/// Time translation by a whole number of lattice rows.
pub fn time_translate(lp: &LatticeLoop, steps: i32, lattice: &CylinderLattice) -> Result<LatticeLoop> {
    let out = lp.map_rows(|r| r + steps, |l| l + steps);
    lattice.validate_loop(&out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HalfSpace {
    Plus,
    Minus,
    Straddles,
}

/// Which closed half space `±t_E ≥ 0` contains the loop. A loop on the
/// time-zero line lies in both and is reported as `Plus`.
pub fn half_space_of(lp: &LatticeLoop, foliation: &FoliationSpec) -> HalfSpace {
    let z = foliation.time_zero_row;
    let (lo, hi) = match lp {
        LatticeLoop::Winding { row } => (*row, *row),
        // Plaquette row l covers the strip [l, l+1].
        LatticeLoop::Contractible { .. } => {
            let (lo, hi) = lp.plaquette_row_span().unwrap_or((z, z));
            (lo, hi + 1)
        }
    };
    if lo >= z {
        HalfSpace::Plus
    } else if hi <= z {
        HalfSpace::Minus
    } else {
        HalfSpace::Straddles
    }
}

/// Finite family of mutually non-overlapping loops, each carrying a
/// non-trivial irrep. The empty network is the constant function 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LoopNetwork {
    entries: Vec<(LatticeLoop, IrrepLabel)>,
}

impl LoopNetwork {
    pub fn unit() -> Self {
        Self::default()
    }

    /// Builds a network, checking the non-overlap invariants. Entries are kept
    /// in canonical (sorted) order.
    pub fn new(mut entries: Vec<(LatticeLoop, IrrepLabel)>) -> Result<Self> {
        if let Some((_, p)) = entries.iter().find(|(_, p)| p.is_trivial()) {
            return Err(OsrError::InvalidIrrep(format!(
                "network loops must carry non-trivial irreps, got {p}"
            )));
        }
        entries.sort();
        check_non_overlapping(entries.iter().map(|(l, _)| l))?;
        Ok(Self { entries })
    }

    pub fn single(lp: LatticeLoop, irrep: IrrepLabel) -> Result<Self> {
        Self::new(vec![(lp, irrep)])
    }

    pub fn entries(&self) -> &[(LatticeLoop, IrrepLabel)] {
        &self.entries
    }

    pub fn is_unit(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate_on(&self, lattice: &CylinderLattice) -> Result<()> {
        self.entries.iter().try_for_each(|(l, _)| lattice.validate_loop(l))
    }

    pub fn map_loops<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&LatticeLoop) -> Result<LatticeLoop>,
    {
        let entries = self
            .entries
            .iter()
            .map(|(l, p)| Ok((f(l)?, *p)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Time reflection of every loop. Reflection reverses the orientation of
    /// contractible loops, so their irreps are replaced by the duals to keep
    /// the counterclockwise convention; winding loops keep their direction.
    pub fn reflect(&self, group: &GroupSpec, foliation: &FoliationSpec, lattice: &CylinderLattice) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|(l, p)| {
                let q = if l.winding_number() == 0 { dual(group, *p) } else { *p };
                Ok((time_reflect(l, foliation, lattice)?, q))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Spatial mirror `k → -k-1`. Every loop changes orientation.
    pub fn mirror(&self, group: &GroupSpec, lattice: &CylinderLattice) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|(l, p)| {
                let m = l.mirror_columns();
                lattice.validate_loop(&m)?;
                Ok((m, dual(group, *p)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn shift_columns(&self, dk: i32, lattice: &CylinderLattice) -> Result<Self> {
        self.map_loops(|l| {
            let m = l.shift_columns(lattice, dk);
            lattice.validate_loop(&m)?;
            Ok(m)
        })
    }

    /// Image on `refine_lattice(lattice, m)`.
    pub fn refine(&self, m: i32, fine: &CylinderLattice) -> Result<Self> {
        self.map_loops(|l| {
            let r = l.refine(m);
            fine.validate_loop(&r)?;
            Ok(r)
        })
    }

    pub fn translate(&self, steps: i32, lattice: &CylinderLattice) -> Result<Self> {
        self.map_loops(|l| time_translate(l, steps, lattice))
    }

    pub fn half_space(&self, foliation: &FoliationSpec) -> HalfSpace {
        let mut plus = true;
        let mut minus = true;
        for (l, _) in &self.entries {
            match half_space_of(l, foliation) {
                HalfSpace::Plus => minus &= l.slice_row() == Some(foliation.time_zero_row),
                HalfSpace::Minus => plus = false,
                HalfSpace::Straddles => return HalfSpace::Straddles,
            }
        }
        match (plus, minus) {
            (true, _) => HalfSpace::Plus,
            (false, true) => HalfSpace::Minus,
            (false, false) => HalfSpace::Straddles,
        }
    }

    /// One loop per line: `W <winding> <row> <irrep>` or `R <irrep> <k,l> ...`.
    /// The unit network is written as a single `U` line.
    pub fn to_text(&self) -> String {
        if self.entries.is_empty() {
            return "U\n".to_string();
        }
        let mut out = String::new();
        for (lp, irrep) in &self.entries {
            match lp {
                LatticeLoop::Winding { row } => {
                    let _ = writeln!(out, "W 1 {row} {irrep}");
                }
                LatticeLoop::Contractible { region } => {
                    let _ = write!(out, "R {irrep}");
                    for p in region {
                        let _ = write!(out, " {},{}", p.k, p.l);
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Pairwise non-overlap: distinct slice rows, disjoint regions, and no slice
/// line cutting through a region.
pub fn check_non_overlapping<'a, I>(loops: I) -> Result<()>
where
    I: IntoIterator<Item = &'a LatticeLoop>,
{
    let loops: Vec<&LatticeLoop> = loops.into_iter().collect();
    for (i, a) in loops.iter().enumerate() {
        for b in &loops[i + 1..] {
            match (a, b) {
                (LatticeLoop::Winding { row: r1 }, LatticeLoop::Winding { row: r2 }) if r1 == r2 => {
                    return Err(OsrError::Overlap(format!("two winding loops on row {r1}")));
                }
                (LatticeLoop::Contractible { region: ra }, LatticeLoop::Contractible { region: rb }) => {
                    // Disjoint or strictly nested regions have non-crossing boundaries.
                    let nested = ra.len() != rb.len() && (ra.is_subset(rb) || rb.is_subset(ra));
                    if !ra.is_disjoint(rb) && !nested {
                        return Err(OsrError::Overlap("contractible loops cross or coincide".into()));
                    }
                }
                (LatticeLoop::Winding { row }, c @ LatticeLoop::Contractible { .. })
                | (c @ LatticeLoop::Contractible { .. }, LatticeLoop::Winding { row }) => {
                    if slice_cuts_region(*row, c) {
                        return Err(OsrError::Overlap(format!(
                            "winding loop on row {row} crosses a contractible loop"
                        )));
                    }
                }
                _ => {}
            }
        }
    }
    Ok(())
}

pub(crate) fn slice_cuts_region(row: i32, contractible: &LatticeLoop) -> bool {
    contractible
        .plaquette_row_span()
        .is_some_and(|(lo, hi)| lo < row && row <= hi)
}

fn parse_err(line: usize, message: impl Into<String>) -> OsrError {
    OsrError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_loop_line(line_no: usize, line: &str) -> Result<Option<(LatticeLoop, IrrepLabel)>> {
    let mut tokens = line.split_whitespace();
    let kind = tokens.next().ok_or_else(|| parse_err(line_no, "empty line"))?;
    let int = |tok: Option<&str>, what: &str| -> Result<i32> {
        let tok = tok.ok_or_else(|| parse_err(line_no, format!("missing {what}")))?;
        tok.parse::<i32>()
            .map_err(|_| parse_err(line_no, format!("bad {what} `{tok}`")))
    };
    match kind {
        "U" => {
            if tokens.next().is_some() {
                return Err(parse_err(line_no, "unexpected tokens after U"));
            }
            Ok(None)
        }
        "W" => {
            let winding = int(tokens.next(), "winding")?;
            let row = int(tokens.next(), "row")?;
            let irrep = int(tokens.next(), "irrep")?;
            if tokens.next().is_some() {
                return Err(parse_err(line_no, "unexpected trailing tokens"));
            }
            match winding {
                1 => Ok(Some((LatticeLoop::winding(row), IrrepLabel(irrep)))),
                // The reversed circle carries the conjugate character. For the
                // groups in scope this only flips a U(1) charge.
                -1 => Ok(Some((LatticeLoop::winding(row), IrrepLabel(-irrep)))),
                w => Err(parse_err(line_no, format!("winding {w} unsupported (only ±1)"))),
            }
        }
        "R" => {
            let irrep = int(tokens.next(), "irrep")?;
            let mut region = BTreeSet::new();
            for tok in tokens {
                let (k, l) = tok
                    .split_once(',')
                    .ok_or_else(|| parse_err(line_no, format!("bad plaquette `{tok}`")))?;
                let k = int(Some(k), "plaquette column")?;
                let l = int(Some(l), "plaquette row")?;
                if !region.insert(Plaquette::new(k, l)) {
                    return Err(parse_err(line_no, format!("duplicate plaquette `{tok}`")));
                }
            }
            if region.is_empty() {
                return Err(parse_err(line_no, "region without plaquettes"));
            }
            Ok(Some((LatticeLoop::Contractible { region }, IrrepLabel(irrep))))
        }
        other => Err(parse_err(line_no, format!("unknown loop kind `{other}`"))),
    }
}

/// Parses a file of networks: blocks of loop lines separated by blank lines.
/// `#` starts a comment line. Returns each network with the line it starts on.
pub fn parse_networks(text: &str) -> Result<Vec<(usize, LoopNetwork)>> {
    let mut out = Vec::new();
    let mut current: Vec<(LatticeLoop, IrrepLabel)> = Vec::new();
    let mut start: Option<usize> = None;
    let mut saw_unit = false;

    let mut flush = |start: &mut Option<usize>,
                     current: &mut Vec<(LatticeLoop, IrrepLabel)>,
                     saw_unit: &mut bool|
     -> Result<()> {
        if let Some(line) = start.take() {
            if *saw_unit && !current.is_empty() {
                return Err(parse_err(line, "U must stand alone in its network"));
            }
            let net = LoopNetwork::new(std::mem::take(current)).map_err(|e| parse_err(line, e.to_string()))?;
            out.push((line, net));
        }
        *saw_unit = false;
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            flush(&mut start, &mut current, &mut saw_unit)?;
            continue;
        }
        start.get_or_insert(line_no);
        match parse_loop_line(line_no, line)? {
            Some(entry) => current.push(entry),
            None => saw_unit = true,
        }
    }
    flush(&mut start, &mut current, &mut saw_unit)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lat() -> CylinderLattice {
        build_lattice(0.25, 1.0, 2.0, Topology::Cylinder).unwrap()
    }

    fn fol() -> FoliationSpec {
        FoliationSpec::new(0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn lattice_sizes() {
        let l = build_lattice(0.5, 1.0, 1.0, Topology::Cylinder).unwrap();
        assert_eq!((l.half_columns, l.half_rows), (2, 2));
        let enumerated = (-l.half_columns..l.half_columns)
            .flat_map(|k| (-l.half_rows..l.half_rows).map(move |r| (k, r)))
            .count();
        assert_eq!(enumerated, 16);
        assert_eq!(l.plaquette_total(), 16);
        let smallest = build_lattice(1.0, 1.0, 1.0, Topology::Cylinder).unwrap();
        assert_eq!(smallest.plaquette_total(), 4);
        assert!(build_lattice(0.3, 1.0, 1.0, Topology::Cylinder).is_err());
        assert!(build_lattice(0.5, 1.0, 0.3, Topology::Cylinder).is_err());
    }

    #[test]
    fn plaquette_counts() {
        assert_eq!(plaquette_count(&LatticeLoop::winding(2)), 0);
        assert_eq!(plaquette_count(&LatticeLoop::rectangle(0, 0, 3, 2)), 6);
    }

    #[test]
    fn region_shapes_are_checked() {
        let l = lat();
        assert!(l.validate_loop(&LatticeLoop::rectangle(-4, 0, 3, 2)).is_ok());
        // Full ring around the cylinder is an annulus.
        assert!(l.validate_loop(&LatticeLoop::rectangle(-4, 0, 8, 1)).is_err());
        // Ring with a hole in the middle.
        let mut ring: BTreeSet<_> = LatticeLoop::rectangle(0, 0, 3, 3).region().unwrap().clone();
        ring.remove(&Plaquette::new(1, 1));
        assert!(l.validate_loop(&LatticeLoop::Contractible { region: ring }).is_err());
        // Disconnected pair.
        let pair = LatticeLoop::contractible([Plaquette::new(0, 0), Plaquette::new(2, 0)]);
        assert!(l.validate_loop(&pair).is_err());
        // A region that wraps across the seam but is still a disk.
        let seam = LatticeLoop::contractible([Plaquette::new(3, 0), Plaquette::new(-4, 0)]);
        assert!(l.validate_loop(&seam).is_ok());
        assert!(l.validate_loop(&LatticeLoop::rectangle(0, 7, 1, 2)).is_err());
    }

    #[test]
    fn reflection_examples() {
        let (l, f) = (lat(), fol());
        let sym = LatticeLoop::rectangle(0, -1, 2, 2);
        assert_eq!(time_reflect(&sym, &f, &l).unwrap(), sym);
        assert_eq!(time_reflect(&LatticeLoop::winding(3), &f, &l).unwrap(), LatticeLoop::winding(-3));
    }

    #[test]
    fn half_spaces() {
        let f = fol();
        assert_eq!(half_space_of(&LatticeLoop::winding(2), &f), HalfSpace::Plus);
        assert_eq!(half_space_of(&LatticeLoop::winding(0), &f), HalfSpace::Plus);
        assert_eq!(half_space_of(&LatticeLoop::rectangle(0, -1, 1, 3), &f), HalfSpace::Straddles);
        assert_eq!(half_space_of(&LatticeLoop::rectangle(0, -2, 1, 2), &f), HalfSpace::Minus);
        assert_eq!(half_space_of(&LatticeLoop::rectangle(0, 0, 1, 2), &f), HalfSpace::Plus);
    }

    #[test]
    fn areas() {
        let f = FoliationSpec::new(0, 1.0, 1.0).unwrap();
        assert_eq!(area_between_slices(&f, 0.0).unwrap(), 0.0);
        assert_eq!(area_between_slices(&f, 2.5).unwrap(), 2.5);
        let g = FoliationSpec::new(0, 3.0, 1.0).unwrap();
        assert_eq!(area_between_slices(&g, 1.0).unwrap(), 3.0);
        assert!(area_between_slices(&f, -1.0).is_err());
    }

    #[test]
    fn network_overlap_rules() {
        let w = |r| (LatticeLoop::winding(r), IrrepLabel(1));
        assert!(LoopNetwork::new(vec![w(1), w(1)]).is_err());
        assert!(LoopNetwork::new(vec![w(1), w(2)]).is_ok());
        let rect = (LatticeLoop::rectangle(0, 0, 2, 3), IrrepLabel(1));
        assert!(LoopNetwork::new(vec![rect.clone(), w(1)]).is_err());
        assert!(LoopNetwork::new(vec![rect.clone(), w(0)]).is_ok());
        assert!(LoopNetwork::new(vec![rect.clone(), w(3)]).is_ok());
        let inner = (LatticeLoop::rectangle(1, 1, 1, 1), IrrepLabel(2));
        assert!(LoopNetwork::new(vec![rect.clone(), inner]).is_ok());
        let crossing = (LatticeLoop::rectangle(1, 1, 2, 1), IrrepLabel(2));
        assert!(LoopNetwork::new(vec![rect.clone(), crossing]).is_err());
        assert!(LoopNetwork::new(vec![rect.clone(), rect]).is_err());
        assert!(LoopNetwork::new(vec![(LatticeLoop::winding(0), IrrepLabel(0))]).is_err());
    }

    #[test]
    fn text_format_round_trip_and_errors() {
        let text = "# sample\nU\n\nW 1 2 3\nR 1 0,0 1,0\n\nW -1 0 2\n";
        let nets = parse_networks(text).unwrap();
        assert_eq!(nets.len(), 3);
        assert!(nets[0].1.is_unit());
        assert_eq!(nets[1].0, 4);
        assert_eq!(nets[2].1.entries()[0].1, IrrepLabel(-2));
        let again = parse_networks(&nets[1].1.to_text()).unwrap();
        assert_eq!(again[0].1, nets[1].1);

        match parse_networks("W 1 0 1\nR 1 0;0\n") {
            Err(OsrError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_networks("W 2 0 1\n").is_err());
        assert!(parse_networks("X\n").is_err());
    }

    fn arb_loop() -> impl Strategy<Value = LatticeLoop> {
        prop_oneof![
            (-3i32..=3).prop_map(LatticeLoop::winding),
            (-4i32..2, -3i32..1, 1i32..3, 1i32..3)
                .prop_map(|(k, l, w, h)| LatticeLoop::rectangle(k, l, w, h)),
        ]
    }

    proptest! {
        #[test]
        fn reflection_is_an_involution(lp in arb_loop()) {
            let (l, f) = (lat(), fol());
            prop_assume!(l.validate_loop(&lp).is_ok());
            let once = time_reflect(&lp, &f, &l).unwrap();
            prop_assert_eq!(plaquette_count(&once), plaquette_count(&lp));
            prop_assert_eq!(once.winding_number(), lp.winding_number());
            prop_assert_eq!(time_reflect(&once, &f, &l).unwrap(), lp);
        }

        #[test]
        fn translations_compose_and_commute_with_reflection(lp in arb_loop(), s in -2i32..=2, t in -2i32..=2) {
            let (l, f) = (lat(), fol());
            prop_assume!(l.validate_loop(&lp).is_ok());
            prop_assert_eq!(time_translate(&lp, 0, &l).unwrap(), lp.clone());
            let st = time_translate(&time_translate(&lp, s, &l).unwrap(), t, &l).unwrap();
            prop_assert_eq!(st.clone(), time_translate(&lp, s + t, &l).unwrap());
            prop_assert_eq!(plaquette_count(&st), plaquette_count(&lp));
            let lhs = time_reflect(&time_translate(&lp, t, &l).unwrap(), &f, &l).unwrap();
            let rhs = time_translate(&time_reflect(&lp, &f, &l).unwrap(), -t, &l).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn reflection_maps_plus_to_minus(lp in arb_loop()) {
            let (l, f) = (lat(), fol());
            prop_assume!(l.validate_loop(&lp).is_ok());
            prop_assume!(half_space_of(&lp, &f) == HalfSpace::Plus);
            let r = time_reflect(&lp, &f, &l).unwrap();
            if lp.slice_row() == Some(f.time_zero_row) {
                prop_assert_eq!(half_space_of(&r, &f), HalfSpace::Plus);
            } else {
                prop_assert_eq!(half_space_of(&r, &f), HalfSpace::Minus);
            }
        }

        #[test]
        fn slice_area_is_additive(s in 0.0f64..10.0, t in 0.0f64..10.0, b in 0.1f64..4.0, len in 0.1f64..4.0) {
            let f = FoliationSpec::new(0, b, len).unwrap();
            let sum = area_between_slices(&f, s).unwrap() + area_between_slices(&f, t).unwrap();
            prop_assert!((area_between_slices(&f, s + t).unwrap() - sum).abs() <= 1e-12 * sum.max(1.0));
        }
    }
}

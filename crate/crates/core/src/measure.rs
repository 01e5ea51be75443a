//! Expectation values of loop networks and inner products of history vectors.
//!
//! Lattice and continuum Yang-Mills expectations are computed by gluing faces:
//! the non-crossing loops cut space-time into faces (bands between winding
//! loops, and disks inside contractible loops). Each face carries an irrep
//! `σ` and contributes `r(σ)^{area} · dim(σ)^{χ(face)}`; crossing a loop that
//! carries `π` changes the face irrep by `σ → σ ⊗ π` (face on the left of the
//! loop is the face on its right tensored with `π`). Faces of infinite area
//! carry the trivial irrep.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::action::{IrrepCoefficients, PlaquetteAction};
use crate::error::{OsrError, Result};
use crate::extrapolate::{richardson, Extrapolation};
use crate::group::{casimir, dual, irrep_dim, tensor_decompose, GroupSpec, IrrepLabel, QuadratureSpec};
use crate::lattice::{
    area_between_slices, build_lattice, CylinderLattice, FoliationSpec, LatticeLoop, LoopNetwork, Topology,
};

/// Which measure a [`Measure`] realizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum MeasureKind {
    Uniform,
    LatticeGauge2D { action: PlaquetteAction },
    Continuum2DYM { g2: f64 },
}

/// A measure on generalized connections, given by its characteristic
/// functional. The lattice also serves as the coordinate grid on which loops of
/// the uniform and continuum measures are drawn.
#[derive(Debug, Clone)]
pub struct Measure {
    pub group: GroupSpec,
    pub kind: MeasureKind,
    pub lattice: CylinderLattice,
    pub foliation: FoliationSpec,
    coefficients: Option<Arc<IrrepCoefficients>>,
    corrupted: Option<IrrepLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Expectation {
    pub value: f64,
    /// Bound on the numerical error propagated from the coefficient table.
    pub error: f64,
}

impl Expectation {
    fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }

    fn mul(self, o: Self) -> Self {
        Self {
            value: self.value * o.value,
            error: self.value.abs() * o.error + o.value.abs() * self.error + self.error * o.error,
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            value: self.value + o.value,
            error: self.error + o.error,
        }
    }

    fn scale(self, c: f64) -> Self {
        Self {
            value: c * self.value,
            error: c.abs() * self.error,
        }
    }
}

impl Measure {
    pub fn uniform(group: GroupSpec, lattice: CylinderLattice, foliation: FoliationSpec) -> Result<Self> {
        foliation.validate_on(&lattice)?;
        Ok(Self {
            group,
            kind: MeasureKind::Uniform,
            lattice,
            foliation,
            coefficients: None,
            corrupted: None,
        })
    }

    /// Lattice measure with coefficients tabulated up to `max_label`.
    /// Yang-Mills actions must use the plaquette area of the lattice.
    pub fn lattice_gauge(
        group: GroupSpec,
        action: PlaquetteAction,
        lattice: CylinderLattice,
        foliation: FoliationSpec,
        max_label: u32,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        foliation.validate_on(&lattice)?;
        action.validate()?;
        if let Some(area) = action.plaq_area() {
            let expected = lattice.plaquette_area(foliation.length);
            if (area - expected).abs() > 1e-12 * expected {
                return Err(OsrError::InvalidParameter(format!(
                    "plaq_area {area} differs from the lattice plaquette area {expected}"
                )));
            }
        }
        let coefficients = IrrepCoefficients::compute(&action, &group, max_label, quad)?;
        Ok(Self {
            group,
            kind: MeasureKind::LatticeGauge2D { action },
            lattice,
            foliation,
            coefficients: Some(Arc::new(coefficients)),
            corrupted: None,
        })
    }

    pub fn continuum_ym(group: GroupSpec, g2: f64, lattice: CylinderLattice, foliation: FoliationSpec) -> Result<Self> {
        foliation.validate_on(&lattice)?;
        if !(g2 > 0.0 && g2.is_finite()) {
            return Err(OsrError::InvalidParameter(format!("g2 must be positive, got {g2}")));
        }
        Ok(Self {
            group,
            kind: MeasureKind::Continuum2DYM { g2 },
            lattice,
            foliation,
            coefficients: None,
            corrupted: None,
        })
    }

    /// Test hook: flips the sign of every face amplitude carrying `irrep`.
    /// The result is not a positive measure; it exists to exercise the
    /// reflection-positivity check.
    pub fn with_corrupted_face(mut self, irrep: IrrepLabel) -> Self {
        self.corrupted = Some(irrep);
        self
    }

    pub fn corrupted_face(&self) -> Option<IrrepLabel> {
        self.corrupted
    }

    pub fn coefficients(&self) -> Option<&IrrepCoefficients> {
        self.coefficients.as_deref()
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, MeasureKind::Uniform)
    }

    /// The same measure with a different foliation. Lattice Yang-Mills
    /// measures are rebuilt because their plaquette area depends on `L`.
    pub fn with_foliation(&self, foliation: FoliationSpec, quad: &QuadratureSpec) -> Result<Self> {
        let mut out = match &self.kind {
            MeasureKind::LatticeGauge2D { action } if action.plaq_area().is_some() => {
                let area = self.lattice.plaquette_area(foliation.length);
                let max_label = self.coefficients.as_ref().map_or(0, |c| c.max_label);
                Self::lattice_gauge(self.group, action.with_plaq_area(area), self.lattice, foliation, max_label, quad)?
            }
            _ => {
                foliation.validate_on(&self.lattice)?;
                Self {
                    foliation,
                    ..self.clone()
                }
            }
        };
        out.corrupted = self.corrupted;
        Ok(out)
    }

    /// Largest irrep label the measure can evaluate, if bounded.
    pub fn max_label(&self) -> Option<u32> {
        self.coefficients.as_ref().map(|c| c.max_label)
    }

    /// Area of one plaquette in the measure's area form.
    pub fn plaquette_area(&self) -> f64 {
        self.lattice.plaquette_area(self.foliation.length)
    }

    /// Face amplitude `r(σ)^n` for a face of `n` plaquettes (`n` may be
    /// fractional when it comes from a continuous time translation).
    pub fn face_weight(&self, sigma: IrrepLabel, plaquettes: f64) -> Result<Expectation> {
        let sign = if self.corrupted == Some(sigma) { -1.0 } else { 1.0 };
        let w = self.face_weight_plain(sigma, plaquettes)?;
        Ok(w.scale(sign))
    }

    fn face_weight_plain(&self, sigma: IrrepLabel, plaquettes: f64) -> Result<Expectation> {
        self.group.validate(sigma)?;
        if sigma.is_trivial() || plaquettes == 0.0 {
            return Ok(Expectation::exact(1.0));
        }
        match &self.kind {
            MeasureKind::Uniform => Ok(Expectation::exact(0.0)),
            MeasureKind::Continuum2DYM { g2 } => {
                let area = plaquettes * self.plaquette_area();
                Ok(Expectation::exact((-0.5 * g2 * area * casimir(&self.group, sigma)).exp()))
            }
            MeasureKind::LatticeGauge2D { .. } => {
                let table = self.coefficients.as_ref().expect("lattice measures carry coefficients");
                let r = table.ratio(sigma)?;
                let dr = table.ratio_error(sigma);
                let integral = plaquettes.fract() == 0.0;
                if r < 0.0 && !integral {
                    return Err(OsrError::NonLatticeTranslation { rows: plaquettes });
                }
                let value = if integral && plaquettes.abs() < i32::MAX as f64 {
                    r.powi(plaquettes as i32)
                } else {
                    r.powf(plaquettes)
                };
                let error = if r == 0.0 {
                    0.0
                } else {
                    value.abs() * plaquettes * dr / r.abs()
                };
                Ok(Expectation { value, error })
            }
        }
    }
}

/// Characteristic functional `χ(f) = ⟨P_f⟩` with unnormalized characters.
pub fn expect(measure: &Measure, network: &LoopNetwork) -> Result<f64> {
    Ok(expect_with_error(measure, network)?.value)
}

pub fn expect_with_error(measure: &Measure, network: &LoopNetwork) -> Result<Expectation> {
    network.validate_on(&measure.lattice)?;
    if measure.is_uniform() {
        return Ok(Expectation::exact(if network.is_unit() { 1.0 } else { 0.0 }));
    }
    FaceTree::build(measure, network)?.evaluate(measure)
}

/// `⟨conj χ_π(β_{t₁}) χ_π'(β_{t₂})⟩` for winding loops on rows `t₁ < t₂`.
pub fn expect_winding_correlator(measure: &Measure, rows: [i32; 2], irreps: [IrrepLabel; 2]) -> Result<f64> {
    let [t1, t2] = rows;
    if t1 == t2 {
        return Err(OsrError::InvalidParameter(
            "winding correlator needs distinct rows; use inner_product for coincident loops".into(),
        ));
    }
    let entries = vec![
        (LatticeLoop::winding(t1), dual(&measure.group, irreps[0])),
        (LatticeLoop::winding(t2), irreps[1]),
    ];
    expect_product(measure, entries).map(|e| e.value)
}

/// Expands a product of loop functions, some of which may share a loop, into
/// a sum of loop networks (coincident loops fused with the Clebsch-Gordan
/// series).
pub fn expand_product(group: &GroupSpec, entries: Vec<(LatticeLoop, IrrepLabel)>) -> Result<Vec<LoopNetwork>> {
    let mut by_loop: BTreeMap<LatticeLoop, Vec<IrrepLabel>> = BTreeMap::new();
    for (lp, p) in entries {
        group.validate(p)?;
        by_loop.entry(lp).or_default().push(p);
    }
    let mut partial: Vec<Vec<(LatticeLoop, IrrepLabel)>> = vec![Vec::new()];
    for (lp, irreps) in by_loop {
        let mut fused = vec![IrrepLabel::TRIVIAL];
        for p in irreps {
            let mut next = Vec::new();
            for q in &fused {
                next.extend(tensor_decompose(group, *q, p)?);
            }
            fused = next;
        }
        let mut grown = Vec::with_capacity(partial.len() * fused.len());
        for base in &partial {
            for &q in &fused {
                let mut e = base.clone();
                if !q.is_trivial() {
                    e.push((lp.clone(), q));
                }
                grown.push(e);
            }
        }
        partial = grown;
    }
    partial.into_iter().map(LoopNetwork::new).collect()
}

fn expect_product(measure: &Measure, entries: Vec<(LatticeLoop, IrrepLabel)>) -> Result<Expectation> {
    let mut total = Expectation::exact(0.0);
    for net in expand_product(&measure.group, entries)? {
        total = total.add(expect_with_error(measure, &net)?);
    }
    Ok(total)
}

/// `⟨P_f, P_f'⟩ = ∫ conj(P_f) P_f'`.
pub fn network_inner_product(measure: &Measure, f: &LoopNetwork, g: &LoopNetwork) -> Result<Expectation> {
    let mut entries: Vec<_> = f
        .entries()
        .iter()
        .map(|(l, p)| (l.clone(), dual(&measure.group, *p)))
        .collect();
    entries.extend(g.entries().iter().cloned());
    expect_product(measure, entries)
}

/// Finite linear combination `Σ z_I P_{f_I}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HistoryVector {
    pub terms: Vec<(Complex64, LoopNetwork)>,
}

impl HistoryVector {
    pub fn new(terms: Vec<(Complex64, LoopNetwork)>) -> Self {
        Self { terms }
    }

    pub fn unit() -> Self {
        Self::network(LoopNetwork::unit())
    }

    pub fn network(net: LoopNetwork) -> Self {
        Self {
            terms: vec![(Complex64::new(1.0, 0.0), net)],
        }
    }

    /// Merges duplicate networks and drops zero coefficients.
    pub fn canonical(&self) -> Self {
        let mut merged: BTreeMap<LoopNetwork, Complex64> = BTreeMap::new();
        for (z, n) in &self.terms {
            *merged.entry(n.clone()).or_default() += z;
        }
        Self {
            terms: merged.into_iter().filter(|(_, z)| z.norm() != 0.0).map(|(n, z)| (z, n)).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            terms: self.terms.iter().map(|(z, n)| (c * z, n.clone())).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }
    }

    pub fn map_networks<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&LoopNetwork) -> Result<LoopNetwork>,
    {
        let terms = self
            .terms
            .iter()
            .map(|(z, n)| Ok((*z, f(n)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { terms })
    }
}

/// `⟨ψ, ψ'⟩ = ∫ conj(ψ) ψ'`, sesquilinear and conjugate symmetric.
pub fn inner_product(measure: &Measure, psi: &HistoryVector, phi: &HistoryVector) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    for (z, f) in &psi.terms {
        for (w, g) in &phi.terms {
            let v = network_inner_product(measure, f, g)?.value;
            total += z.conj() * w * v;
        }
    }
    Ok(total)
}

/// Normalized contractible Wilson loop `⟨χ_π/dim π⟩` of the given area,
/// evaluated along a refinement schedule for lattice measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilsonLoopSeries {
    /// `(ε, value)` pairs in schedule order.
    pub values: Vec<(f64, f64)>,
    pub finest: f64,
    pub extrapolated: Option<Extrapolation>,
}

/// For the continuum measure the closed form is returned as a single entry.
/// Lattice measures are rebuilt at each `ε` of `schedule` (halving steps
/// expected) with the plaquette area rescaled, keeping `g²`, `a` and `L`.
pub fn continuum_wilson_loop(
    measure: &Measure,
    area: f64,
    irrep: IrrepLabel,
    schedule: &[f64],
    quad: &QuadratureSpec,
) -> Result<WilsonLoopSeries> {
    if !(area >= 0.0 && area.is_finite()) {
        return Err(OsrError::InvalidParameter(format!("area must be non-negative, got {area}")));
    }
    measure.group.validate(irrep)?;
    match &measure.kind {
        MeasureKind::Continuum2DYM { g2 } => {
            let v = (-0.5 * g2 * area * casimir(&measure.group, irrep)).exp();
            Ok(WilsonLoopSeries {
                values: vec![(0.0, v)],
                finest: v,
                extrapolated: Some(Extrapolation { estimate: v, error: 0.0 }),
            })
        }
        MeasureKind::Uniform => {
            let v = if irrep.is_trivial() || area == 0.0 { 1.0 } else { 0.0 };
            Ok(WilsonLoopSeries {
                values: vec![(0.0, v)],
                finest: v,
                extrapolated: Some(Extrapolation { estimate: v, error: 0.0 }),
            })
        }
        MeasureKind::LatticeGauge2D { action } => {
            if schedule.is_empty() {
                return Err(OsrError::InvalidParameter("empty refinement schedule".into()));
            }
            let mut values = Vec::with_capacity(schedule.len());
            for &eps in schedule {
                let lattice = build_lattice(eps, measure.lattice.a, eps * measure.lattice.a, measure.lattice.topology)?;
                let plaq = lattice.plaquette_area(measure.foliation.length);
                let table = IrrepCoefficients::compute(&action.with_plaq_area(plaq), &measure.group, irrep.0.unsigned_abs(), quad)?;
                let r = table.ratio(irrep)?;
                let n = area / plaq;
                let v = if area == 0.0 { 1.0 } else { r.powf(n) };
                values.push((eps, v));
            }
            let finest = values.last().map(|v| v.1).unwrap_or(1.0);
            let extrapolated = if values.len() >= 2 {
                let ys: Vec<f64> = values.iter().map(|v| v.1).collect();
                Some(richardson(&ys, 2.0, 2)?)
            } else {
                None
            };
            Ok(WilsonLoopSeries {
                values,
                finest,
                extrapolated,
            })
        }
    }
}

/// `∫ conj(P_{θf}) · P_{φ_Δ g}`: the network `f` reflected about the
/// time-zero line of `foliation` and conjugated, against `g` translated
/// forward by `rows` lattice rows (which may be fractional). With `rows = 0`
/// this is the reflected pairing of the two networks.
pub fn reflected_transfer(
    measure: &Measure,
    foliation: &FoliationSpec,
    f: &LoopNetwork,
    g: &LoopNetwork,
    rows: f64,
) -> Result<Expectation> {
    if !(rows >= 0.0 && rows.is_finite()) {
        return Err(OsrError::InvalidParameter(format!("translation must be non-negative, got {rows}")));
    }
    g.validate_on(&measure.lattice)?;
    let reflected = f.reflect(&measure.group, foliation, &measure.lattice)?;
    let conj: Vec<_> = reflected
        .entries()
        .iter()
        .map(|(l, p)| (l.clone(), dual(&measure.group, *p)))
        .collect();
    if rows == 0.0 {
        let mut entries = conj;
        entries.extend(g.entries().iter().cloned());
        return expect_product(measure, entries);
    }
    if measure.is_uniform() {
        return Ok(Expectation::exact(if f.is_unit() && g.is_unit() { 1.0 } else { 0.0 }));
    }
    let conj = LoopNetwork::new(conj)?;
    let z = foliation.time_zero_row as f64;
    let top_of_reflected = conj
        .entries()
        .iter()
        .map(|(l, _)| match l {
            LatticeLoop::Winding { row } => *row as f64,
            _ => l.plaquette_row_span().map_or(f64::NEG_INFINITY, |(_, hi)| (hi + 1) as f64),
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let bottom_of_translated = g
        .entries()
        .iter()
        .map(|(l, _)| match l {
            LatticeLoop::Winding { row } => *row as f64,
            _ => l.plaquette_row_span().map_or(f64::INFINITY, |(lo, _)| lo as f64),
        })
        .fold(f64::INFINITY, f64::min)
        + rows;
    if top_of_reflected > z || bottom_of_translated < z + rows {
        return Err(OsrError::SupportViolation(
            "translated pairing needs both networks in the positive half space".into(),
        ));
    }
    FaceTree::build_parts(measure, &[(&conj, 0.0), (g, rows)])?.evaluate(measure)
}

/// Area between the foliation slices at times `t₁ < t₂`.
pub fn slice_area(foliation: &FoliationSpec, t1: f64, t2: f64) -> Result<f64> {
    area_between_slices(foliation, t2 - t1)
}

struct Disk {
    irrep: IrrepLabel,
    /// Own face area: region size minus the children's region sizes.
    area: usize,
    children: Vec<usize>,
}

/// Nesting structure of a non-crossing loop network.
struct FaceTree {
    disks: Vec<Disk>,
    /// Winding loops sorted by row: `(row, irrep)`. Rows are real because a
    /// part of the network may be translated by a fractional number of rows.
    windings: Vec<(f64, IrrepLabel)>,
    /// Top-level disks per band; band `i` lies above `i` winding loops.
    band_children: Vec<Vec<usize>>,
    /// Face area (in plaquettes) of each band strictly between winding loops.
    band_area: Vec<f64>,
}

impl FaceTree {
    fn build(measure: &Measure, network: &LoopNetwork) -> Result<Self> {
        Self::build_parts(measure, &[(network, 0.0)])
    }

    /// Builds the tree for the union of several networks, each translated in
    /// time by the given number of rows. The parts must occupy disjoint,
    /// non-interleaved row ranges.
    fn build_parts(measure: &Measure, parts: &[(&LoopNetwork, f64)]) -> Result<Self> {
        let mut windings: Vec<(f64, IrrepLabel)> = Vec::new();
        // (loop, irrep, part, offset)
        let mut contractible: Vec<(&LatticeLoop, IrrepLabel, usize, f64)> = Vec::new();
        for (part, &(network, offset)) in parts.iter().enumerate() {
            for (lp, p) in network.entries() {
                match lp {
                    LatticeLoop::Winding { row } => {
                        if measure.lattice.topology == Topology::Plane {
                            return Err(OsrError::InvalidLoop("winding loop on the plane".into()));
                        }
                        windings.push((*row as f64 + offset, *p));
                    }
                    LatticeLoop::Contractible { .. } => contractible.push((lp, *p, part, offset)),
                }
            }
        }
        windings.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // Larger regions first so that parents precede children.
        let size = |lp: &LatticeLoop| lp.region().map_or(0, |r| r.len());
        contractible.sort_by_key(|(lp, _, _, _)| std::cmp::Reverse(size(lp)));

        let mut disks: Vec<Disk> = Vec::with_capacity(contractible.len());
        let mut parent: Vec<Option<usize>> = Vec::with_capacity(contractible.len());
        for (i, (lp, p, part, _)) in contractible.iter().enumerate() {
            let region = lp.region().expect("contractible");
            let par = (0..i)
                .filter(|&j| contractible[j].2 == *part && region.is_subset(contractible[j].0.region().expect("contractible")))
                .min_by_key(|&j| size(contractible[j].0));
            parent.push(par);
            disks.push(Disk {
                irrep: *p,
                area: region.len(),
                children: Vec::new(),
            });
        }
        let mut band_children = vec![Vec::new(); windings.len() + 1];
        for i in 0..disks.len() {
            match parent[i] {
                Some(j) => {
                    disks[j].area -= size(contractible[i].0);
                    disks[j].children.push(i);
                }
                None => {
                    let (lo, _) = contractible[i].0.plaquette_row_span().expect("non-empty region");
                    let lo = lo as f64 + contractible[i].3;
                    let band = windings.iter().filter(|(r, _)| *r <= lo).count();
                    band_children[band].push(i);
                }
            }
        }
        let columns = measure.lattice.columns() as f64;
        let band_area = (0..=windings.len())
            .map(|b| {
                if b == 0 || b == windings.len() {
                    return 0.0;
                }
                let rows = windings[b].0 - windings[b - 1].0;
                let holes: usize = band_children[b].iter().map(|&i| size(contractible[i].0)).sum();
                rows * columns - holes as f64
            })
            .collect();
        Ok(Self {
            disks,
            windings,
            band_children,
            band_area,
        })
    }

    fn dim_power(group: &GroupSpec, sigma: IrrepLabel, chi: i32) -> Result<f64> {
        Ok((irrep_dim(group, sigma)? as f64).powi(chi))
    }

    /// Sum over the irreps of disk `i` given the irrep of its outside face.
    fn disk_sum(&self, measure: &Measure, i: usize, outside: IrrepLabel) -> Result<Expectation> {
        let disk = &self.disks[i];
        let chi = 1 - disk.children.len() as i32;
        let mut total = Expectation::exact(0.0);
        for rho in tensor_decompose(&measure.group, outside, disk.irrep)? {
            let mut term = measure
                .face_weight(rho, disk.area as f64)?
                .scale(Self::dim_power(&measure.group, rho, chi)?);
            if term.value == 0.0 && term.error == 0.0 {
                continue;
            }
            for &c in &disk.children {
                term = term.mul(self.disk_sum(measure, c, rho)?);
            }
            total = total.add(term);
        }
        Ok(total)
    }

    fn band_children_product(&self, measure: &Measure, band: usize, sigma: IrrepLabel) -> Result<Expectation> {
        let mut acc = Expectation::exact(1.0);
        for &c in &self.band_children[band] {
            acc = acc.mul(self.disk_sum(measure, c, sigma)?);
        }
        Ok(acc)
    }

    fn evaluate(&self, measure: &Measure) -> Result<Expectation> {
        let trivial = IrrepLabel::TRIVIAL;
        let mut state: BTreeMap<IrrepLabel, Expectation> = BTreeMap::new();
        state.insert(trivial, self.band_children_product(measure, 0, trivial)?);
        let m = self.windings.len();
        for (b, &(_, pi)) in self.windings.iter().enumerate() {
            let band = b + 1;
            let mut next: BTreeMap<IrrepLabel, Expectation> = BTreeMap::new();
            for (&sigma, &val) in &state {
                for rho in tensor_decompose(&measure.group, sigma, pi)? {
                    if band == m && !rho.is_trivial() {
                        continue;
                    }
                    let holes = self.band_children[band].len() as i32;
                    let factor = measure
                        .face_weight(rho, self.band_area[band])?
                        .scale(Self::dim_power(&measure.group, rho, -holes)?);
                    if factor.value == 0.0 && factor.error == 0.0 {
                        continue;
                    }
                    let contribution = val.mul(factor).mul(self.band_children_product(measure, band, rho)?);
                    let slot = next.entry(rho).or_default();
                    *slot = slot.add(contribution);
                }
            }
            state = next;
        }
        Ok(state.get(&trivial).copied().unwrap_or_default())
    }
}

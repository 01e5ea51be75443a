//! Reconstruction of the physical Hilbert space and Hamiltonian from a
//! measure and a foliation: reflected inner product, Gram matrix, null-space
//! quotient, contraction semigroup and its generator, and the axiom checks.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OsrError, Result};
use crate::group::{GroupSpec, IrrepLabel, QuadratureSpec};
use crate::lattice::{FoliationSpec, HalfSpace, LatticeLoop, LoopNetwork, Topology};
use crate::measure::{expect, reflected_transfer, HistoryVector, Measure};
use crate::sampling::{apply_transformation, random_transformation, NetworkSampler, Support};

/// Times at which the generator is extracted and compared.
pub const GENERATOR_TIMES: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
pub const GENERATOR_TOL: f64 = 1e-9;
pub const NULL_TOL: f64 = 1e-10;
/// Contraction eigenvalues at or below this are treated as underflowed.
const UNDERFLOW: f64 = 1e-280;

fn check_area_form(measure: &Measure, foliation: &FoliationSpec) -> Result<()> {
    let l = measure.foliation.length;
    if (foliation.length - l).abs() > 1e-12 * l {
        return Err(OsrError::InvalidParameter(format!(
            "foliation slice length {} differs from the measure's {l}; rebuild the measure with Measure::with_foliation",
            foliation.length
        )));
    }
    foliation.validate_on(&measure.lattice)
}

fn check_support(network: &LoopNetwork, foliation: &FoliationSpec) -> Result<()> {
    match network.half_space(foliation) {
        HalfSpace::Plus => Ok(()),
        _ => Err(OsrError::SupportViolation(format!(
            "network is not supported in the positive half space:\n{}",
            network.to_text()
        ))),
    }
}

/// `(ψ, C^Δ ψ')_E` with `Δ` given in lattice rows; `rows = 0` is the reflected
/// inner product `⟨Û(θ_E)ψ, ψ'⟩`.
pub fn transfer_inner(
    measure: &Measure,
    foliation: &FoliationSpec,
    psi: &HistoryVector,
    phi: &HistoryVector,
    rows: f64,
) -> Result<Complex64> {
    check_area_form(measure, foliation)?;
    let mut total = Complex64::new(0.0, 0.0);
    for (z, f) in &psi.terms {
        check_support(f, foliation)?;
        for (w, g) in &phi.terms {
            check_support(g, foliation)?;
            let v = reflected_transfer(measure, foliation, f, g, rows)?.value;
            total += z.conj() * w * v;
        }
    }
    Ok(total)
}

/// `(ψ, ψ')_E = ⟨Û(θ_E)ψ, ψ'⟩`. Û acts linearly on labels; the conjugation
/// comes from the first slot of the inner product.
pub fn reflected_inner(
    measure: &Measure,
    foliation: &FoliationSpec,
    psi: &HistoryVector,
    phi: &HistoryVector,
) -> Result<Complex64> {
    transfer_inner(measure, foliation, psi, phi, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Solved through the real symmetric embedding `[[A, -B], [B, A]]` of
/// `A + iB`: the complex solver loses absolute accuracy on Gram matrices whose
/// entries span hundreds of orders of magnitude. Each eigenvalue appears twice
/// in the embedding; the copy `(-y, x)` is `i` times `x + iy` and is dropped.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    let real = DMatrix::<f64>::from_fn(2 * n, 2 * n, |r, c| {
        let z = m[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = SymmetricEigen::new(real);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(n);
    for &k in &order {
        if columns.len() == n {
            break;
        }
        let mut v = nalgebra::DVector::from_fn(n, |r, _| Complex64::new(eig.eigenvectors[(r, k)], eig.eigenvectors[(r + n, k)]));
        for u in &columns {
            let proj = u.dotc(&v);
            v -= u * proj;
        }
        let norm = v.norm();
        if norm > 0.5 {
            columns.push(v / Complex64::new(norm, 0.0));
            values.push(eig.eigenvalues[k]);
        }
    }
    let vectors = DMatrix::from_columns(&columns);
    (values, vectors)
}

fn is_diagonal(m: &DMatrix<Complex64>, tol: f64) -> bool {
    let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(f64::MIN_POSITIVE);
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)].norm() <= tol * scale))
}

#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub basis: Vec<HistoryVector>,
    pub entries: DMatrix<Complex64>,
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// `max |G_ij - conj(G_ji)|`.
    pub hermiticity_defect: f64,
}

impl GramMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

/// Matrix of reflected inner products of `basis` (entries computed in parallel).
pub fn gram(measure: &Measure, foliation: &FoliationSpec, basis: &[HistoryVector]) -> Result<GramMatrix> {
    let n = basis.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| reflected_inner(measure, foliation, &basis[i], &basis[j]))
        .collect::<Result<Vec<_>>>()?;
    let raw = DMatrix::from_row_slice(n, n, &values);
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            defect = defect.max((raw[(i, j)] - raw[(j, i)].conj()).norm());
        }
    }
    let entries = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
    let (eigenvalues, _) = hermitian_eigen(&entries);
    Ok(GramMatrix {
        basis: basis.to_vec(),
        entries,
        eigenvalues,
        hermiticity_defect: defect,
    })
}

/// Concrete model of `ℋ_D^E`: the quotient of the span of a basis by the null
/// directions of the reflected inner product.
#[derive(Debug, Clone)]
pub struct PhysicalSpace {
    pub basis: Vec<HistoryVector>,
    /// Irrep carried by each basis vector when the basis is a character basis.
    pub basis_labels: Vec<Option<IrrepLabel>>,
    /// Columns map quotient coordinates to basis coefficients and are
    /// orthonormal for the reflected inner product.
    pub transform: DMatrix<Complex64>,
    /// Irrep label of each quotient direction, when identifiable.
    pub directions: Vec<Option<IrrepLabel>>,
    pub metric_eigenvalues: Vec<f64>,
    pub min_gram_eigenvalue: f64,
    pub null_rank: usize,
}

impl PhysicalSpace {
    pub fn dimension(&self) -> usize {
        self.directions.len()
    }
}

/// Splits off the null space `𝒩_E`: eigenvalues at or below `tol · λ_max`
/// are null; an eigenvalue below `-tol · max(1, λ_max)` means the form is not
/// positive.
pub fn quotient(gram: &GramMatrix, labels: &[Option<IrrepLabel>], tol: f64) -> Result<PhysicalSpace> {
    let n = gram.entries.nrows();
    let (values, vectors) = if is_diagonal(&gram.entries, 1e-14) {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| gram.entries[(a, a)].re.total_cmp(&gram.entries[(b, b)].re));
        let values: Vec<f64> = idx.iter().map(|&i| gram.entries[(i, i)].re).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| {
            if r == idx[c] {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        (values, vectors)
    } else {
        hermitian_eigen(&gram.entries)
    };
    let lmax = values.iter().copied().fold(0.0f64, f64::max);
    let lmin = values.first().copied().unwrap_or(0.0);
    if lmin < -tol * lmax.max(1.0) {
        return Err(OsrError::IndefiniteGram {
            eigenvalue: lmin,
            tolerance: tol * lmax.max(1.0),
        });
    }
    let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] > tol * lmax).collect();
    let transform = DMatrix::from_fn(n, keep.len(), |r, c| {
        vectors[(r, keep[c])] / values[keep[c]].sqrt()
    });
    let directions = keep
        .iter()
        .map(|&k| {
            let (best, _) = (0..n)
                .map(|r| (r, vectors[(r, k)].norm()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            labels.get(best).copied().flatten()
        })
        .collect::<Vec<_>>();
    let directions = if directions.len() == 1 {
        vec![Some(directions[0].unwrap_or(IrrepLabel::TRIVIAL))]
    } else {
        directions
    };
    Ok(PhysicalSpace {
        basis: gram.basis.clone(),
        basis_labels: labels.to_vec(),
        transform,
        directions,
        metric_eigenvalues: keep.iter().map(|&k| values[k]).collect(),
        min_gram_eigenvalue: lmin,
        null_rank: n - keep.len(),
    })
}

/// Probe basis of `𝒜_E^+`. On the cylinder: the unit network and the
/// characters `χ_π` of the circle on the time-zero line, `π` up to
/// `max_label`. On the plane: the unit network and a few contractible loops
/// touching the time-zero line.
pub fn physical_basis(
    measure: &Measure,
    foliation: &FoliationSpec,
    max_label: u32,
) -> Result<(Vec<HistoryVector>, Vec<Option<IrrepLabel>>)> {
    let g = &measure.group;
    let z = foliation.time_zero_row;
    let mut vectors = vec![HistoryVector::unit()];
    let mut labels = vec![Some(IrrepLabel::TRIVIAL)];
    match measure.lattice.topology {
        Topology::Cylinder => {
            for p in g.irreps_up_to(max_label).into_iter().filter(|p| !p.is_trivial()) {
                vectors.push(HistoryVector::network(LoopNetwork::single(LatticeLoop::winding(z), p)?));
                labels.push(Some(p));
            }
        }
        Topology::Plane => {
            let f = g.fundamental();
            let shapes = [(0, z, 1, 1), (-1, z, 2, 1), (0, z, 1, 2)];
            for (i, &(k, l, w, h)) in shapes.iter().enumerate() {
                let lp = LatticeLoop::rectangle(k, l, w, h);
                if measure.lattice.validate_loop(&lp).is_err() {
                    continue;
                }
                let p = if i == 2 && max_label >= 2 { IrrepLabel(2) } else { f };
                vectors.push(HistoryVector::network(LoopNetwork::single(lp, p)?));
                labels.push(None);
            }
        }
    }
    Ok((vectors, labels))
}

/// Gram matrix of [`physical_basis`] followed by [`quotient`].
pub fn reconstruct_space(measure: &Measure, foliation: &FoliationSpec, max_label: u32, tol: f64) -> Result<PhysicalSpace> {
    let (basis, labels) = physical_basis(measure, foliation, max_label)?;
    let g = gram(measure, foliation, &basis)?;
    let space = quotient(&g, &labels, tol)?;
    if let Some(probe) = band_probe(measure, foliation, max_label)? {
        quotient(&gram(measure, foliation, &probe)?, &vec![None; probe.len()], tol)?;
    }
    Ok(space)
}

/// Windings one row above time zero. Their reflected pairs enclose a band of
/// faces, which the slice windings alone never see.
fn band_probe(measure: &Measure, foliation: &FoliationSpec, max_label: u32) -> Result<Option<Vec<HistoryVector>>> {
    if measure.lattice.topology != Topology::Cylinder {
        return Ok(None);
    }
    let lp = LatticeLoop::winding(foliation.time_zero_row + 1);
    if measure.lattice.validate_loop(&lp).is_err() {
        return Ok(None);
    }
    let mut probe = vec![HistoryVector::unit()];
    for p in measure.group.irreps_up_to(max_label).into_iter().filter(|p| !p.is_trivial()) {
        probe.push(HistoryVector::network(LoopNetwork::single(lp.clone(), p)?));
    }
    Ok(Some(probe))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupOperator {
    pub t: f64,
    /// `(irrep, eigenvalue)`, sorted by irrep.
    pub eigenvalues: Vec<(IrrepLabel, f64)>,
}

impl SemigroupOperator {
    pub fn eigenvalue(&self, irrep: IrrepLabel) -> Option<f64> {
        self.eigenvalues.iter().find(|(p, _)| *p == irrep).map(|(_, v)| *v)
    }
}

/// Matrix of `[Ĉ^t_E]` in the orthonormal quotient coordinates.
pub fn contraction_matrix(
    measure: &Measure,
    foliation: &FoliationSpec,
    space: &PhysicalSpace,
    t: f64,
) -> Result<DMatrix<Complex64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(OsrError::InvalidParameter(format!("t must be non-negative, got {t}")));
    }
    let rows = foliation.rows_for_time(&measure.lattice, t);
    let n = space.basis.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| transfer_inner(measure, foliation, &space.basis[i], &space.basis[j], rows))
        .collect::<Result<Vec<_>>>()?;
    let m = DMatrix::from_row_slice(n, n, &values);
    Ok(space.transform.adjoint() * m * &space.transform)
}

/// `[Ĉ^t_E][ψ]_E = [Û(φ^t_E)ψ]_E`, diagonalized on the quotient.
pub fn contraction(measure: &Measure, foliation: &FoliationSpec, space: &PhysicalSpace, t: f64) -> Result<SemigroupOperator> {
    let a = contraction_matrix(measure, foliation, space, t)?;
    let mut eigenvalues: Vec<(IrrepLabel, f64)> = if is_diagonal(&a, 1e-13) {
        (0..a.nrows())
            .map(|k| Ok((direction_label(space, k)?, a[(k, k)].re)))
            .collect::<Result<_>>()?
    } else {
        let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let (values, vectors) = hermitian_eigen(&h);
        (0..values.len())
            .map(|c| {
                let (best, _) = (0..vectors.nrows())
                    .map(|r| (r, vectors[(r, c)].norm()))
                    .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
                Ok((direction_label(space, best)?, values[c]))
            })
            .collect::<Result<_>>()?
    };
    eigenvalues.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(SemigroupOperator { t, eigenvalues })
}

fn direction_label(space: &PhysicalSpace, k: usize) -> Result<IrrepLabel> {
    space.directions[k].ok_or_else(|| {
        OsrError::Unsupported("physical direction without an irrep label; use a character basis".into())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpectrum {
    /// `(irrep, eigenvalue)`, sorted by irrep.
    pub eigenvalues: Vec<(IrrepLabel, f64)>,
    pub foliation: FoliationSpec,
    /// Smallest non-zero eigenvalue.
    pub gap: Option<f64>,
    /// Dimension of the eigenvalue-zero space.
    pub vacuum_multiplicity: usize,
}

impl HamiltonianSpectrum {
    pub fn eigenvalue(&self, irrep: IrrepLabel) -> Option<f64> {
        self.eigenvalues.iter().find(|(p, _)| *p == irrep).map(|(_, v)| *v)
    }
}

/// Generator `-(1/t) log λ_π(t)`, checked to be independent of `t` over the
/// times at which `λ_π(t)` is representable.
pub fn hamiltonian(measure: &Measure, foliation: &FoliationSpec, space: &PhysicalSpace) -> Result<HamiltonianSpectrum> {
    let ops = GENERATOR_TIMES
        .iter()
        .map(|&t| contraction(measure, foliation, space, t))
        .collect::<Result<Vec<_>>>()?;
    let mut eigenvalues = Vec::new();
    for (p, _) in &ops[0].eigenvalues {
        let mut gens = Vec::with_capacity(ops.len());
        let mut at_one = None;
        for (i, op) in ops.iter().enumerate() {
            let lam = op.eigenvalue(*p).ok_or_else(|| OsrError::Unsupported(format!("irrep {p} missing at t = {}", op.t)))?;
            if lam < 0.0 || (i == 0 && !(lam > UNDERFLOW)) {
                return Err(OsrError::NoGenerator { irrep: *p, value: lam });
            }
            // Past the shortest time a vanishing value is exponent underflow.
            if lam <= UNDERFLOW {
                continue;
            }
            let g = -lam.ln() / op.t;
            if op.t == 1.0 {
                at_one = Some(g);
            }
            gens.push(g);
        }
        if gens.len() < 2 {
            return Err(OsrError::NoGenerator { irrep: *p, value: 0.0 });
        }
        let hi = gens.iter().copied().fold(f64::MIN, f64::max);
        let lo = gens.iter().copied().fold(f64::MAX, f64::min);
        if hi - lo > GENERATOR_TOL * hi.abs().max(1.0) {
            return Err(OsrError::NonSemigroup { irrep: *p, spread: hi - lo });
        }
        let e = at_one.unwrap_or(gens[gens.len() - 1]);
        // Clean rounding noise on the vacuum.
        let e = if e.abs() < 1e-14 { 0.0 } else { e };
        eigenvalues.push((*p, e));
    }
    let gap = eigenvalues
        .iter()
        .map(|(_, e)| *e)
        .filter(|e| *e > 1e-12)
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.min(e))));
    let vacuum_multiplicity = eigenvalues.iter().filter(|(_, e)| e.abs() <= 1e-12).count();
    Ok(HamiltonianSpectrum {
        eigenvalues,
        foliation: *foliation,
        gap,
        vacuum_multiplicity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AxiomId {
    II,
    III,
    GI,
    I,
    IV,
}

impl fmt::Display for AxiomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxiomStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomRecord {
    pub axiom: AxiomId,
    pub status: AxiomStatus,
    pub witness: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// Which diffeomorphisms are declared gauge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffGChoice {
    /// Only the identity.
    Trivial,
    /// Every diffeomorphism preserving the structure, time translations included.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxiomConfig {
    pub seed: u64,
    pub max_label: u32,
    pub diff_g: DiffGChoice,
    pub invariance_networks: usize,
    pub transformations_per_network: usize,
    pub invariance_tol: f64,
    pub positivity_bases: usize,
    pub max_basis_size: usize,
    pub positivity_tol: f64,
    pub gauge_vectors: usize,
    pub gauge_tol: f64,
    pub continuity_vectors: usize,
    pub dyadic_levels: u32,
    pub continuity_tol: f64,
    pub cluster_pairs: usize,
    pub cluster_times: Vec<f64>,
    pub cluster_tol: f64,
    pub sampler_max_irrep: u32,
}

impl Default for AxiomConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_label: 12,
            diff_g: DiffGChoice::Trivial,
            invariance_networks: 200,
            transformations_per_network: 5,
            invariance_tol: 1e-12,
            positivity_bases: 200,
            max_basis_size: 12,
            positivity_tol: 1e-10,
            gauge_vectors: 10,
            gauge_tol: 1e-10,
            continuity_vectors: 20,
            dyadic_levels: 24,
            continuity_tol: 1e-4,
            cluster_pairs: 20,
            cluster_times: vec![1.0, 5.0, 10.0],
            cluster_tol: 1e-10,
            sampler_max_irrep: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub records: Vec<AxiomRecord>,
    pub diff_g: DiffGChoice,
    /// Decay rate used for the clustering check; `None` when every
    /// non-vacuum eigenvalue of the contraction vanishes.
    pub gap: Option<f64>,
}

impl AxiomReport {
    pub fn record(&self, axiom: AxiomId) -> Option<&AxiomRecord> {
        self.records.iter().find(|r| r.axiom == axiom)
    }

    pub fn status(&self, axiom: AxiomId) -> Option<AxiomStatus> {
        self.record(axiom).map(|r| r.status)
    }

    /// Invariance and reflection positivity both hold.
    pub fn mandatory_pass(&self) -> bool {
        [AxiomId::II, AxiomId::III]
            .iter()
            .all(|a| self.status(*a) == Some(AxiomStatus::Pass))
    }
}

fn pass_if(ok: bool) -> AxiomStatus {
    if ok {
        AxiomStatus::Pass
    } else {
        AxiomStatus::Fail
    }
}

/// Deterministic probe: the fundamental character one row above the slice
/// (cylinder) or a unit plaquette loop on the slice (plane).
fn probe_vectors(measure: &Measure, foliation: &FoliationSpec, max_label: u32, row_offset: i32) -> Result<Vec<HistoryVector>> {
    let z = foliation.time_zero_row;
    let mut out = Vec::new();
    for p in measure.group.irreps_up_to(max_label.min(3)).into_iter().filter(|p| !p.is_trivial()) {
        let lp = match measure.lattice.topology {
            Topology::Cylinder => LatticeLoop::winding(z + row_offset),
            Topology::Plane => LatticeLoop::rectangle(0, z + row_offset, 1, 1),
        };
        if measure.lattice.validate_loop(&lp).is_ok() {
            out.push(HistoryVector::network(LoopNetwork::single(lp, p)?));
        }
    }
    Ok(out)
}

fn norm_e(measure: &Measure, foliation: &FoliationSpec, psi: &HistoryVector) -> Result<f64> {
    Ok(reflected_inner(measure, foliation, psi, psi)?.re.max(0.0).sqrt())
}

fn check_invariance(measure: &Measure, foliation: &FoliationSpec, cfg: &AxiomConfig, sampler: &NetworkSampler) -> Result<AxiomRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x11);
    let mut jobs = Vec::new();
    for _ in 0..cfg.invariance_networks {
        let net = sampler.random_network(&mut rng, Support::Anywhere);
        let mut images = Vec::new();
        let mut attempts = 0;
        while images.len() < cfg.transformations_per_network && attempts < 20 * cfg.transformations_per_network {
            attempts += 1;
            let t = random_transformation(&mut rng, &measure.lattice);
            if let Ok(img) = apply_transformation(&net, t, &measure.group, &measure.lattice, foliation) {
                images.push(img);
            }
        }
        jobs.push((net, images));
    }
    let worst = jobs
        .par_iter()
        .map(|(net, images)| {
            let base = expect(measure, net)?;
            let mut w = 0.0f64;
            for img in images {
                let v = expect(measure, img)?;
                w = w.max((v - base).abs() / base.abs().max(1.0));
            }
            Ok(w)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let compared: usize = jobs.iter().map(|j| j.1.len()).sum();
    Ok(AxiomRecord {
        axiom: AxiomId::II,
        status: pass_if(worst <= cfg.invariance_tol),
        witness: worst,
        tolerance: cfg.invariance_tol,
        detail: format!(
            "max relative change of expectations over {} networks, {compared} transformed images",
            jobs.len()
        ),
    })
}

fn check_positivity(measure: &Measure, foliation: &FoliationSpec, cfg: &AxiomConfig, sampler: &NetworkSampler) -> Result<AxiomRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x33);
    let mut bases = Vec::with_capacity(cfg.positivity_bases);
    let mut probe = vec![HistoryVector::unit()];
    probe.extend(probe_vectors(measure, foliation, cfg.max_label, 1)?);
    probe.extend(probe_vectors(measure, foliation, cfg.max_label, 0)?);
    probe.truncate(cfg.max_basis_size.max(1));
    bases.push(probe);
    while bases.len() < cfg.positivity_bases.max(1) {
        let size = rng.gen_range(1..=cfg.max_basis_size.max(1));
        let basis: Vec<_> = (0..size)
            .map(|_| {
                let terms = rng.gen_range(1..=2);
                sampler.random_history(&mut rng, terms, Support::Positive)
            })
            .collect();
        bases.push(basis);
    }
    let minima = bases
        .par_iter()
        .map(|b| Ok(gram(measure, foliation, b)?.min_eigenvalue()))
        .collect::<Result<Vec<f64>>>()?;
    let worst = minima.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AxiomRecord {
        axiom: AxiomId::III,
        status: pass_if(worst >= -cfg.positivity_tol),
        witness: worst,
        tolerance: cfg.positivity_tol,
        detail: format!("minimum Gram eigenvalue over {} bases", bases.len()),
    })
}

fn positive_vectors(
    measure: &Measure,
    foliation: &FoliationSpec,
    cfg: &AxiomConfig,
    sampler: &NetworkSampler,
    count: usize,
    salt: u64,
) -> Result<Vec<HistoryVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ salt);
    let mut out = probe_vectors(measure, foliation, cfg.max_label, 0)?;
    out.truncate(1);
    while out.len() < count.max(1) {
        let terms = rng.gen_range(1..=3);
        out.push(sampler.random_history(&mut rng, terms, Support::Positive));
    }
    Ok(out)
}

fn check_gauge(measure: &Measure, foliation: &FoliationSpec, cfg: &AxiomConfig, sampler: &NetworkSampler) -> Result<AxiomRecord> {
    if cfg.diff_g == DiffGChoice::Trivial {
        return Ok(AxiomRecord {
            axiom: AxiomId::GI,
            status: AxiomStatus::Pass,
            witness: 0.0,
            tolerance: cfg.gauge_tol,
            detail: "Diff_G contains only the identity; the condition holds identically".into(),
        });
    }
    let vectors = positive_vectors(measure, foliation, cfg, sampler, cfg.gauge_vectors, 0x55)?;
    let mut worst = 0.0f64;
    let mut used = 0;
    for psi in &vectors {
        // A one-row time translation is a gauge diffeomorphism under this choice.
        let Ok(moved) = psi.map_networks(|n| n.translate(1, &measure.lattice)) else {
            continue;
        };
        let diff = moved.add(&psi.scale(Complex64::new(-1.0, 0.0)));
        worst = worst.max(norm_e(measure, foliation, &diff)?);
        used += 1;
    }
    Ok(AxiomRecord {
        axiom: AxiomId::GI,
        status: pass_if(worst <= cfg.gauge_tol),
        witness: worst,
        tolerance: cfg.gauge_tol,
        detail: format!("max ‖(U(φ) - 1)ψ‖_E over {used} vectors, φ a one-row time translation"),
    })
}

fn check_continuity(measure: &Measure, foliation: &FoliationSpec, cfg: &AxiomConfig, sampler: &NetworkSampler) -> Result<AxiomRecord> {
    if cfg.diff_g == DiffGChoice::Full {
        return Ok(AxiomRecord {
            axiom: AxiomId::I,
            status: AxiomStatus::Pass,
            witness: 0.0,
            tolerance: cfg.continuity_tol,
            detail: "time translations are gauge; no non-trivial translations to test".into(),
        });
    }
    let vectors = positive_vectors(measure, foliation, cfg, sampler, cfg.continuity_vectors, 0x77)?;
    let mut norms = Vec::with_capacity(vectors.len());
    for psi in &vectors {
        let n = norm_e(measure, foliation, psi)?;
        if n > 1e-12 {
            norms.push((psi, n));
        }
    }
    let mut schedule = Vec::new();
    for k in 0..=cfg.dyadic_levels {
        let t = 0.5f64.powi(k as i32);
        let rows = foliation.rows_for_time(&measure.lattice, t);
        let mut worst = 0.0f64;
        for (psi, n) in &norms {
            let a = transfer_inner(measure, foliation, psi, psi, 0.0);
            let b = transfer_inner(measure, foliation, psi, psi, rows);
            let c = transfer_inner(measure, foliation, psi, psi, 2.0 * rows);
            let (a, b, c) = match (a, b, c) {
                (Ok(a), Ok(b), Ok(c)) => (a, b, c),
                (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => {
                    return Ok(AxiomRecord {
                        axiom: AxiomId::I,
                        status: AxiomStatus::Fail,
                        witness: f64::MAX,
                        tolerance: cfg.continuity_tol,
                        detail: format!("time translation by t = {t} not available: {e}"),
                    })
                }
            };
            let sq = (a.re - 2.0 * b.re + c.re).max(0.0);
            worst = worst.max(sq.sqrt() / n);
        }
        schedule.push((t, worst));
    }
    let last = schedule.last().map_or(0.0, |s| s.1);
    let first = schedule.first().map_or(0.0, |s| s.1);
    let ok = last <= cfg.continuity_tol && last <= first;
    Ok(AxiomRecord {
        axiom: AxiomId::I,
        status: pass_if(ok),
        witness: last,
        tolerance: cfg.continuity_tol,
        detail: format!(
            "max ‖(C^t - 1)ψ‖/‖ψ‖ over {} vectors: {first:.3e} at t = 1, {last:.3e} at t = 2^-{}",
            norms.len(),
            cfg.dyadic_levels
        ),
    })
}

/// Decay rate of the clustering bound: the Hamiltonian gap when a generator
/// exists, otherwise read off the contraction at `t = 1`.
pub fn clustering_rate(measure: &Measure, foliation: &FoliationSpec, max_label: u32) -> Result<Option<f64>> {
    let space = reconstruct_space(measure, foliation, max_label, NULL_TOL)?;
    if let Ok(h) = hamiltonian(measure, foliation, &space) {
        return Ok(h.gap);
    }
    let op = contraction(measure, foliation, &space, 1.0)?;
    let top = op
        .eigenvalues
        .iter()
        .filter(|(p, _)| !p.is_trivial())
        .map(|(_, v)| v.abs())
        .fold(0.0f64, f64::max);
    Ok(if top > 0.0 { Some(-top.ln()) } else { None })
}

fn check_clustering(
    measure: &Measure,
    foliation: &FoliationSpec,
    cfg: &AxiomConfig,
    sampler: &NetworkSampler,
    gap: Option<f64>,
) -> Result<AxiomRecord> {
    let unit = HistoryVector::unit();
    let vectors = positive_vectors(measure, foliation, cfg, sampler, 2 * cfg.cluster_pairs, 0x99)?;
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for pair in vectors.chunks(2) {
        let [psi, phi] = pair else { continue };
        let p1 = reflected_inner(measure, foliation, psi, &unit)?;
        let q1 = reflected_inner(measure, foliation, &unit, phi)?;
        let perp = |v: &HistoryVector, c: Complex64| -> Result<f64> {
            Ok((reflected_inner(measure, foliation, v, v)?.re - c.norm_sqr()).max(0.0).sqrt())
        };
        let k = perp(psi, p1)? * perp(phi, q1)?;
        for &t in &cfg.cluster_times {
            let rows = foliation.rows_for_time(&measure.lattice, t);
            let delta = (transfer_inner(measure, foliation, psi, phi, rows)? - p1 * q1).norm();
            let bound = gap.map_or(0.0, |g| k * (-g * t).exp());
            worst = worst.max(delta - bound * (1.0 + 1e-9));
        }
        pairs += 1;
    }
    Ok(AxiomRecord {
        axiom: AxiomId::IV,
        status: pass_if(worst <= cfg.cluster_tol),
        witness: worst.max(0.0),
        tolerance: cfg.cluster_tol,
        detail: format!(
            "max excess of |(ψ,C^tψ')_E - (ψ,1)_E(1,ψ')_E| over K·exp(-γt), {pairs} pairs, γ = {}",
            gap.map_or("none (exact factorization)".to_string(), |g| format!("{g:.6e}"))
        ),
    })
}

/// Samples the five axioms. Failures become report entries; only set-up
/// problems (invalid measure or foliation) are errors.
pub fn verify_axioms(measure: &Measure, foliation: &FoliationSpec, cfg: &AxiomConfig) -> Result<AxiomReport> {
    check_area_form(measure, foliation)?;
    let mut sampler = NetworkSampler::new(measure.group, measure.lattice, *foliation);
    sampler.max_irrep = cfg.sampler_max_irrep;
    let gap = match clustering_rate(measure, foliation, cfg.max_label) {
        Ok(g) => g,
        Err(OsrError::IndefiniteGram { .. }) => None,
        Err(e) => return Err(e),
    };
    let records = vec![
        check_invariance(measure, foliation, cfg, &sampler)?,
        check_positivity(measure, foliation, cfg, &sampler)?,
        check_gauge(measure, foliation, cfg, &sampler)?,
        check_continuity(measure, foliation, cfg, &sampler)?,
        check_clustering(measure, foliation, cfg, &sampler, gap)?,
    ];
    Ok(AxiomReport {
        records,
        diff_g: cfg.diff_g,
        gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceMap {
    /// `b·L` agrees for both foliations.
    pub strong: bool,
    /// `(b̃ L̃)/(b L)`: the factor relating the two Hamiltonians.
    pub scale: f64,
    pub spectrum: Option<HamiltonianSpectrum>,
    pub spectrum_tilde: Option<HamiltonianSpectrum>,
    /// `max_π |Ẽ_π - scale · E_π|`, when both spectra exist.
    pub max_deviation: Option<f64>,
}

/// Relates the reconstructions along two foliations. All compatible
/// foliations here are weakly equivalent, and the unitary is the identity on
/// the shared character basis.
pub fn equivalence_map(
    measure: &Measure,
    e: &FoliationSpec,
    e_tilde: &FoliationSpec,
    max_label: u32,
    quad: &QuadratureSpec,
) -> Result<EquivalenceMap> {
    let bl = e.b * e.length;
    let bl_tilde = e_tilde.b * e_tilde.length;
    let spectrum_for = |f: &FoliationSpec| -> Result<Option<HamiltonianSpectrum>> {
        let m = measure.with_foliation(*f, quad)?;
        let space = reconstruct_space(&m, f, max_label, NULL_TOL)?;
        Ok(hamiltonian(&m, f, &space).ok())
    };
    let spectrum = spectrum_for(e)?;
    let spectrum_tilde = spectrum_for(e_tilde)?;
    let scale = bl_tilde / bl;
    let max_deviation = match (&spectrum, &spectrum_tilde) {
        (Some(a), Some(b)) => Some(
            a.eigenvalues
                .iter()
                .zip(&b.eigenvalues)
                .map(|((_, x), (_, y))| (y - scale * x).abs())
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    Ok(EquivalenceMap {
        strong: (bl - bl_tilde).abs() <= 1e-12 * bl.max(bl_tilde),
        scale,
        spectrum,
        spectrum_tilde,
        max_deviation,
    })
}

/// Group used by a measure; convenience for callers holding only a report.
pub fn group_of(measure: &Measure) -> GroupSpec {
    measure.group
}

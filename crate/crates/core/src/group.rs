//! Harmonic analysis on the compact groups U(1) and SU(2).
//!
//! Class functions are parametrized by a single angle: `e^{iθ}` for U(1) and
//! `diag(e^{iθ}, e^{-iθ})` for SU(2). Haar integrals of class functions are
//! reduced to one-dimensional integrals by the Weyl integration formula.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{OsrError, Result};

/// Below this `|sin θ|` the SU(2) character switches to its Taylor expansion.
const SERIES_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupFamily {
    CircleGroup,
    SpecialUnitary2,
}

/// A structure group together with the scale of its invariant Laplacian.
///
/// `killing_scale` multiplies every Casimir eigenvalue; the default of 1 gives
/// `C₂(n) = n²` for U(1) and `C₂(j) = j(j+1)` for SU(2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub family: GroupFamily,
    pub killing_scale: f64,
}

impl GroupSpec {
    pub fn new(family: GroupFamily, killing_scale: f64) -> Result<Self> {
        if !(killing_scale > 0.0 && killing_scale.is_finite()) {
            return Err(OsrError::InvalidParameter(format!(
                "killing_scale must be positive, got {killing_scale}"
            )));
        }
        Ok(Self {
            family,
            killing_scale,
        })
    }

    pub fn u1() -> Self {
        Self {
            family: GroupFamily::CircleGroup,
            killing_scale: 1.0,
        }
    }

    pub fn su2() -> Self {
        Self {
            family: GroupFamily::SpecialUnitary2,
            killing_scale: 1.0,
        }
    }

    /// Dimension `N` of the defining representation.
    pub fn fundamental_dim(&self) -> usize {
        match self.family {
            GroupFamily::CircleGroup => 1,
            GroupFamily::SpecialUnitary2 => 2,
        }
    }

    pub fn fundamental(&self) -> IrrepLabel {
        IrrepLabel(1)
    }

    /// Upper end of the class-angle domain.
    pub fn angle_span(&self) -> f64 {
        match self.family {
            GroupFamily::CircleGroup => 2.0 * PI,
            GroupFamily::SpecialUnitary2 => PI,
        }
    }

    pub fn validate(&self, irrep: IrrepLabel) -> Result<()> {
        match self.family {
            GroupFamily::SpecialUnitary2 if irrep.0 < 0 => Err(OsrError::InvalidIrrep(format!(
                "SU(2) label 2j must be non-negative, got {}",
                irrep.0
            ))),
            _ => Ok(()),
        }
    }

    /// Irreps whose label magnitude does not exceed `max_label`, trivial first.
    ///
    /// U(1) charges are ordered `0, 1, -1, 2, -2, ...`.
    pub fn irreps_up_to(&self, max_label: u32) -> Vec<IrrepLabel> {
        let max = max_label as i32;
        match self.family {
            GroupFamily::CircleGroup => {
                let mut out = vec![IrrepLabel(0)];
                for n in 1..=max {
                    out.push(IrrepLabel(n));
                    out.push(IrrepLabel(-n));
                }
                out
            }
            GroupFamily::SpecialUnitary2 => (0..=max).map(IrrepLabel).collect(),
        }
    }
}

/// Irreducible-representation label: U(1) charge `n`, or `2j` for SU(2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IrrepLabel(pub i32);

impl IrrepLabel {
    pub const TRIVIAL: IrrepLabel = IrrepLabel(0);

    pub fn is_trivial(self) -> bool {
        self.0 == 0
    }

    pub fn value(self) -> i32 {
        self.0
    }
}

impl std::fmt::Display for IrrepLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Conjugacy-class coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPoint(pub f64);

impl ClassPoint {
    pub fn new(group: &GroupSpec, theta: f64) -> Result<Self> {
        let ok = match group.family {
            GroupFamily::CircleGroup => (0.0..2.0 * PI).contains(&theta),
            GroupFamily::SpecialUnitary2 => (0.0..=PI).contains(&theta),
        };
        if ok {
            Ok(Self(theta))
        } else {
            Err(OsrError::InvalidParameter(format!(
                "class angle {theta} outside the domain of {:?}",
                group.family
            )))
        }
    }

    pub fn identity() -> Self {
        Self(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureRule {
    GaussLegendre,
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub node_count: usize,
    pub rule: QuadratureRule,
}

impl QuadratureSpec {
    pub fn gauss_legendre(node_count: usize) -> Self {
        Self {
            node_count,
            rule: QuadratureRule::GaussLegendre,
        }
    }

    pub fn trapezoid(node_count: usize) -> Self {
        Self {
            node_count,
            rule: QuadratureRule::Trapezoid,
        }
    }

    /// The same rule with half as many nodes (never below 2); used for error estimates.
    pub fn coarsened(&self) -> Self {
        Self {
            node_count: (self.node_count / 2).max(2),
            rule: self.rule,
        }
    }

    /// Nodes and weights on the reference interval `[-1, 1]`.
    fn reference_rule(&self) -> Result<Vec<(f64, f64)>> {
        if self.node_count < 2 {
            return Err(OsrError::InvalidQuadrature(self.node_count));
        }
        match self.rule {
            QuadratureRule::GaussLegendre => {
                let rule = gauss_quad::legendre::GaussLegendre::new(self.node_count)
                    .map_err(|_| OsrError::InvalidQuadrature(self.node_count))?;
                Ok(rule.as_node_weight_pairs().to_vec())
            }
            QuadratureRule::Trapezoid => {
                let n = self.node_count;
                let h = 2.0 / (n - 1) as f64;
                Ok((0..n)
                    .map(|i| {
                        let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                        (-1.0 + i as f64 * h, w)
                    })
                    .collect())
            }
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::gauss_legendre(256)
    }
}

pub fn irrep_dim(group: &GroupSpec, irrep: IrrepLabel) -> Result<usize> {
    group.validate(irrep)?;
    Ok(match group.family {
        GroupFamily::CircleGroup => 1,
        GroupFamily::SpecialUnitary2 => irrep.0 as usize + 1,
    })
}

/// Character `χ_π(θ)`. Real for SU(2); `e^{inθ}` for U(1).
///
/// Labels are not validated here so that the function stays infallible; pass
/// labels that satisfy [`GroupSpec::validate`].
pub fn character(group: &GroupSpec, irrep: IrrepLabel, theta: f64) -> Complex64 {
    match group.family {
        GroupFamily::CircleGroup => Complex64::from_polar(1.0, irrep.0 as f64 * theta),
        GroupFamily::SpecialUnitary2 => Complex64::new(su2_character(irrep.0, theta), 0.0),
    }
}

fn su2_character(two_j: i32, theta: f64) -> f64 {
    let n = (two_j + 1) as f64;
    let s = theta.sin();
    if s.abs() >= SERIES_THRESHOLD {
        return (n * theta).sin() / s;
    }
    // Expand about the nearer centre element, θ = 0 or θ = π.
    let (delta, sign) = if theta < 0.5 * PI {
        (theta, 1.0)
    } else {
        let sign = if two_j % 2 == 0 { 1.0 } else { -1.0 };
        (PI - theta, sign)
    };
    let d2 = delta * delta;
    let m2 = n * n - 1.0;
    sign * n * (1.0 - m2 * d2 / 6.0 + m2 * (3.0 * n * n - 7.0) * d2 * d2 / 360.0)
}

/// Eigenvalue of minus the invariant Laplacian on `χ_π`.
pub fn casimir(group: &GroupSpec, irrep: IrrepLabel) -> f64 {
    let bare = match group.family {
        GroupFamily::CircleGroup => {
            let n = irrep.0 as f64;
            n * n
        }
        GroupFamily::SpecialUnitary2 => {
            let j = 0.5 * irrep.0 as f64;
            j * (j + 1.0)
        }
    };
    bare * group.killing_scale
}

/// Label of the complex-conjugate representation.
pub fn dual(group: &GroupSpec, irrep: IrrepLabel) -> IrrepLabel {
    match group.family {
        GroupFamily::CircleGroup => IrrepLabel(-irrep.0),
        GroupFamily::SpecialUnitary2 => irrep,
    }
}

/// Irreducible summands of `π ⊗ π'` (all multiplicities are one).
pub fn tensor_decompose(group: &GroupSpec, a: IrrepLabel, b: IrrepLabel) -> Result<Vec<IrrepLabel>> {
    group.validate(a)?;
    group.validate(b)?;
    Ok(match group.family {
        GroupFamily::CircleGroup => vec![IrrepLabel(a.0 + b.0)],
        GroupFamily::SpecialUnitary2 => {
            let lo = (a.0 - b.0).abs();
            let hi = a.0 + b.0;
            (lo..=hi).step_by(2).map(IrrepLabel).collect()
        }
    })
}

/// Weyl density times the normalization, so that the constant 1 integrates to 1.
fn weyl_density(group: &GroupSpec, theta: f64) -> f64 {
    match group.family {
        GroupFamily::CircleGroup => 0.5 / PI,
        GroupFamily::SpecialUnitary2 => {
            let s = theta.sin();
            2.0 / PI * s * s
        }
    }
}

/// Haar integral of a real class function.
pub fn haar_integrate_class<F>(group: &GroupSpec, f: F, quad: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    haar_integrate_class_split(group, f, quad, &[])
}

/// Haar integral of a complex class function.
pub fn haar_integrate_class_complex<F>(
    group: &GroupSpec,
    f: F,
    quad: &QuadratureSpec,
) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let re = haar_integrate_class_split(group, |t| f(t).re, quad, &[])?;
    let im = haar_integrate_class_split(group, |t| f(t).im, quad, &[])?;
    Ok(Complex64::new(re, im))
}

/// Haar integral with the class-angle domain split into panels at `breakpoints`.
///
/// Each panel gets the full `quad.node_count` nodes. Breakpoints outside the
/// open domain are ignored.
pub fn haar_integrate_class_split<F>(
    group: &GroupSpec,
    f: F,
    quad: &QuadratureSpec,
    breakpoints: &[f64],
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let reference = quad.reference_rule()?;
    let span = group.angle_span();
    let mut edges: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > 0.0 && b < span)
        .collect();
    edges.push(0.0);
    edges.push(span);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut total = 0.0;
    for panel in edges.windows(2) {
        let (a, b) = (panel[0], panel[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        total += reference
            .iter()
            .map(|&(x, w)| {
                let theta = mid + half * x;
                w * f(theta) * weyl_density(group, theta)
            })
            .sum::<f64>()
            * half;
    }
    Ok(total)
}

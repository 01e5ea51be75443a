//! Single-plaquette Boltzmann weights `e^{-s(h)}` and their character
//! coefficients `J_π = (1/dim π) ∫ χ_π e^{-s}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OsrError, Result};
use crate::group::{
    casimir, character, haar_integrate_class_split, irrep_dim, GroupFamily, GroupSpec, IrrepLabel,
    QuadratureSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum PlaquetteAction {
    /// `s = κ/(g² A) · 2(1 - Re χ_f/dim_f)`. `kappa = None` selects the value
    /// for which small plaquettes reproduce the heat-kernel ratios.
    WilsonYM {
        g2: f64,
        plaq_area: f64,
        #[serde(default)]
        kappa: Option<f64>,
    },
    /// Defined by its character expansion `Σ dim σ χ_σ e^{-½ g² A C₂(σ)}`.
    HeatKernelYM { g2: f64, plaq_area: f64 },
    GenCovSqrt,
    /// `s = Σ a_n P_n(F)^{1/n}` with `P_n = (F·F)^{n/2}`.
    GenCovPoly { terms: Vec<(u32, f64)> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(OsrError::InvalidAction(format!("{name} must be positive, got {v}")))
    }
}

impl PlaquetteAction {
    pub fn validate(&self) -> Result<()> {
        match self {
            PlaquetteAction::WilsonYM { g2, plaq_area, kappa } => {
                positive("g2", *g2)?;
                positive("plaq_area", *plaq_area)?;
                if let Some(k) = kappa {
                    positive("kappa", *k)?;
                }
                Ok(())
            }
            PlaquetteAction::HeatKernelYM { g2, plaq_area } => {
                positive("g2", *g2)?;
                positive("plaq_area", *plaq_area)
            }
            PlaquetteAction::GenCovSqrt => Ok(()),
            PlaquetteAction::GenCovPoly { terms } => {
                if terms.is_empty() {
                    return Err(OsrError::InvalidAction("GenCovPoly needs at least one term".into()));
                }
                for &(n, a) in terms {
                    if n == 0 {
                        return Err(OsrError::InvalidAction("polynomial degree must be positive".into()));
                    }
                    if n % 2 == 1 {
                        // A homogeneous polynomial of odd degree changes sign
                        // under F -> -F, so it cannot be positive semi-definite
                        // unless it vanishes.
                        return Err(OsrError::InvalidAction(format!(
                            "degree {n} admits no non-zero positive semi-definite invariant"
                        )));
                    }
                    if !(a >= 0.0 && a.is_finite()) {
                        return Err(OsrError::InvalidAction(format!("coefficient a_{n} = {a}")));
                    }
                }
                if !terms.iter().any(|&(_, a)| a > 0.0) {
                    return Err(OsrError::InvalidAction("all GenCovPoly coefficients are zero".into()));
                }
                Ok(())
            }
        }
    }

    pub fn is_generally_covariant(&self) -> bool {
        matches!(self, PlaquetteAction::GenCovSqrt | PlaquetteAction::GenCovPoly { .. })
    }

    /// Plaquette area carried by the Yang-Mills variants.
    pub fn plaq_area(&self) -> Option<f64> {
        match self {
            PlaquetteAction::WilsonYM { plaq_area, .. } | PlaquetteAction::HeatKernelYM { plaq_area, .. } => {
                Some(*plaq_area)
            }
            _ => None,
        }
    }

    pub fn g2(&self) -> Option<f64> {
        match self {
            PlaquetteAction::WilsonYM { g2, .. } | PlaquetteAction::HeatKernelYM { g2, .. } => Some(*g2),
            _ => None,
        }
    }

    /// Same action with the plaquette area replaced (YM variants only).
    pub fn with_plaq_area(&self, area: f64) -> Self {
        match self.clone() {
            PlaquetteAction::WilsonYM { g2, kappa, .. } => PlaquetteAction::WilsonYM {
                g2,
                plaq_area: area,
                kappa,
            },
            PlaquetteAction::HeatKernelYM { g2, .. } => PlaquetteAction::HeatKernelYM { g2, plaq_area: area },
            other => other,
        }
    }

    fn gencov_weight(&self) -> f64 {
        match self {
            PlaquetteAction::GenCovSqrt => 1.0,
            PlaquetteAction::GenCovPoly { terms } => terms.iter().map(|&(_, a)| a).sum(),
            _ => 0.0,
        }
    }
}

/// Default Wilson normalization: `2/k` for SU(2), `1/(2k)` for U(1).
pub fn default_wilson_kappa(group: &GroupSpec) -> f64 {
    match group.family {
        GroupFamily::SpecialUnitary2 => 2.0 / group.killing_scale,
        GroupFamily::CircleGroup => 0.5 / group.killing_scale,
    }
}

/// Inverse width `β` of the Wilson weight `e^{-β(1 - cos θ)}`.
fn wilson_beta(group: &GroupSpec, g2: f64, plaq_area: f64, kappa: Option<f64>) -> f64 {
    2.0 * kappa.unwrap_or_else(|| default_wilson_kappa(group)) / (g2 * plaq_area)
}

/// Killing norm of the plaquette curvature `F^i = -(2/N) Re tr(τ_i (h - 1))`,
/// with `tr(τ_i τ_j) = -N δ_ij`. Both groups give `2|sin θ|`.
pub fn curvature_norm(_group: &GroupSpec, theta: f64) -> f64 {
    2.0 * theta.sin().abs()
}

/// Real part of the heat kernel `Σ dim σ χ_σ(θ) e^{-½ g² A C₂(σ)}`, summed
/// until the remaining terms are negligible.
pub fn heat_kernel(group: &GroupSpec, g2: f64, plaq_area: f64, theta: f64) -> f64 {
    let t = 0.5 * g2 * plaq_area;
    let mut total = 1.0;
    let mut label = 1;
    loop {
        let (term, bound) = match group.family {
            GroupFamily::CircleGroup => {
                let w = (-t * casimir(group, IrrepLabel(label))).exp();
                (2.0 * w * (label as f64 * theta).cos(), 2.0 * w)
            }
            GroupFamily::SpecialUnitary2 => {
                let d = (label + 1) as f64;
                let w = (-t * casimir(group, IrrepLabel(label))).exp();
                (d * w * character(group, IrrepLabel(label), theta).re, d * d * w)
            }
        };
        total += term;
        if bound < 1e-18 * total.abs().max(1.0) || label > 1_000_000 {
            break;
        }
        label += 1;
    }
    total
}

/// `s(θ) ≥ 0`, normalized so that `s(identity) = 0`.
pub fn local_action(action: &PlaquetteAction, group: &GroupSpec, theta: f64) -> f64 {
    match action {
        PlaquetteAction::WilsonYM { g2, plaq_area, kappa } => {
            let f = group.fundamental();
            let dim = group.fundamental_dim() as f64;
            let beta = wilson_beta(group, *g2, *plaq_area, *kappa);
            beta * (1.0 - character(group, f, theta).re / dim)
        }
        PlaquetteAction::HeatKernelYM { g2, plaq_area } => {
            let k = heat_kernel(group, *g2, *plaq_area, theta);
            let k0 = heat_kernel(group, *g2, *plaq_area, 0.0);
            if k <= 0.0 {
                f64::INFINITY
            } else {
                (k0 / k).ln().max(0.0)
            }
        }
        PlaquetteAction::GenCovSqrt | PlaquetteAction::GenCovPoly { .. } => {
            action.gencov_weight() * curvature_norm(group, theta)
        }
    }
}

/// Panel edges concentrated around the peaks of `e^{-s}` and at kinks.
fn breakpoints(action: &PlaquetteAction, group: &GroupSpec) -> Vec<f64> {
    let span = group.angle_span();
    let (width, mut centres) = match action {
        PlaquetteAction::WilsonYM { g2, plaq_area, kappa } => {
            (wilson_beta(group, *g2, *plaq_area, *kappa).sqrt().recip(), vec![0.0])
        }
        PlaquetteAction::HeatKernelYM { g2, plaq_area } => ((g2 * plaq_area).sqrt(), vec![0.0]),
        _ => {
            let c = 2.0 * action.gencov_weight();
            (c.max(1.0).recip(), vec![0.0, PI])
        }
    };
    if group.family == GroupFamily::CircleGroup {
        centres.push(span);
    }
    let mut out: Vec<f64> = centres.clone();
    for &c in &centres {
        let mut d = 0.25 * width;
        while d < span {
            out.push(c + d);
            out.push(c - d);
            d *= 2.0;
        }
    }
    out.retain(|&b| b > 0.0 && b < span);
    out
}

fn coefficient_with(action: &PlaquetteAction, group: &GroupSpec, irrep: IrrepLabel, quad: &QuadratureSpec) -> Result<f64> {
    let dim = irrep_dim(group, irrep)? as f64;
    let cuts = breakpoints(action, group);
    let integral = haar_integrate_class_split(
        group,
        |t| {
            let s = local_action(action, group, t);
            if s.is_finite() {
                character(group, irrep, t).re * (-s).exp()
            } else {
                0.0
            }
        },
        quad,
        &cuts,
    )?;
    Ok(integral / dim)
}

/// `J_π` by quadrature of `χ_π e^{-s}`.
pub fn irrep_coefficient(action: &PlaquetteAction, group: &GroupSpec, irrep: IrrepLabel, quad: &QuadratureSpec) -> Result<f64> {
    action.validate()?;
    coefficient_with(action, group, irrep, quad)
}

/// Table of `J_π` for all irreps up to a label cutoff, with per-entry
/// quadrature error estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrepCoefficients {
    pub group: GroupSpec,
    pub max_label: u32,
    pub normalization: f64,
    pub coefficients: BTreeMap<IrrepLabel, f64>,
    pub errors: BTreeMap<IrrepLabel, f64>,
}

impl IrrepCoefficients {
    pub fn compute(action: &PlaquetteAction, group: &GroupSpec, max_label: u32, quad: &QuadratureSpec) -> Result<Self> {
        action.validate()?;
        let labels = group.irreps_up_to(max_label);
        let rows: Vec<(IrrepLabel, f64, f64)> = match action {
            PlaquetteAction::HeatKernelYM { g2, plaq_area } => {
                // The heat kernel is defined by its expansion; its coefficients are
                // exact, up to the common factor 1/K(identity).
                let k0 = heat_kernel(group, *g2, *plaq_area, 0.0);
                labels
                    .iter()
                    .map(|&p| (p, (-0.5 * g2 * plaq_area * casimir(group, p)).exp() / k0, 0.0))
                    .collect()
            }
            _ => {
                let coarse = quad.coarsened();
                labels
                    .par_iter()
                    .map(|&p| {
                        let fine = coefficient_with(action, group, p, quad)?;
                        let rough = coefficient_with(action, group, p, &coarse)?;
                        Ok((p, fine, (fine - rough).abs()))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let mut coefficients = BTreeMap::new();
        let mut errors = BTreeMap::new();
        for (p, j, e) in rows {
            coefficients.insert(p, j);
            errors.insert(p, e);
        }
        let normalization = coefficients[&IrrepLabel::TRIVIAL];
        if !(normalization > 0.0) {
            return Err(OsrError::InvalidAction(format!(
                "J for the trivial irrep is {normalization}, expected positive"
            )));
        }
        Ok(Self {
            group: *group,
            max_label,
            normalization,
            coefficients,
            errors,
        })
    }

    pub fn coefficient(&self, irrep: IrrepLabel) -> Result<f64> {
        self.coefficients.get(&irrep).copied().ok_or_else(|| {
            OsrError::InvalidIrrep(format!("{irrep} beyond the irrep cutoff {}", self.max_label))
        })
    }

    /// `J_π / J_{π₀}`.
    pub fn ratio(&self, irrep: IrrepLabel) -> Result<f64> {
        if irrep.is_trivial() {
            return Ok(1.0);
        }
        Ok(self.coefficient(irrep)? / self.normalization)
    }

    /// First-order error estimate for [`Self::ratio`].
    pub fn ratio_error(&self, irrep: IrrepLabel) -> f64 {
        if irrep.is_trivial() {
            return 0.0;
        }
        let (Some(j), Some(dj)) = (self.coefficients.get(&irrep), self.errors.get(&irrep)) else {
            return f64::INFINITY;
        };
        let d0 = self.errors[&IrrepLabel::TRIVIAL];
        (dj + (j / self.normalization).abs() * d0) / self.normalization
    }

    pub fn labels(&self) -> impl Iterator<Item = IrrepLabel> + '_ {
        self.coefficients.keys().copied()
    }
}

pub fn ratio(coeffs: &IrrepCoefficients, irrep: IrrepLabel) -> Result<f64> {
    coeffs.ratio(irrep)
}

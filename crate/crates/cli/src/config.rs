//! Run configuration, read from a sectioned `key = value` file (TOML).

use std::path::Path;

use anyhow::{bail, Context, Result};
use osr_core::action::PlaquetteAction;
use osr_core::group::{GroupFamily, GroupSpec, IrrepLabel, QuadratureSpec};
use osr_core::lattice::{build_lattice, CylinderLattice, FoliationSpec, Topology};
use osr_core::measure::Measure;
use osr_core::reconstruct::AxiomConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub group: GroupSection,
    pub measure: MeasureSection,
    pub lattice: LatticeSection,
    pub foliation: FoliationSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub reconstruct: ReconstructSection,
    #[serde(default)]
    pub axioms: AxiomConfig,
    #[serde(default)]
    pub universality: Option<UniversalitySection>,
    #[serde(default)]
    pub converge: Option<ConvergeSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub test_hooks: TestHooks,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupName {
    U1,
    SU2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub family: GroupName,
    #[serde(default = "one")]
    pub killing_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSection {
    Uniform,
    HeatKernel { g2: f64 },
    Wilson {
        g2: f64,
        #[serde(default)]
        kappa: Option<f64>,
    },
    GencovSqrt,
    GencovPoly { terms: Vec<(u32, f64)> },
    Continuum { g2: f64 },
}

impl MeasureSection {
    /// Plaquette action on a lattice with the given plaquette area.
    pub fn action(&self, plaq_area: f64) -> Option<PlaquetteAction> {
        match self {
            MeasureSection::HeatKernel { g2 } => Some(PlaquetteAction::HeatKernelYM { g2: *g2, plaq_area }),
            MeasureSection::Wilson { g2, kappa } => Some(PlaquetteAction::WilsonYM {
                g2: *g2,
                plaq_area,
                kappa: *kappa,
            }),
            MeasureSection::GencovSqrt => Some(PlaquetteAction::GenCovSqrt),
            MeasureSection::GencovPoly { terms } => Some(PlaquetteAction::GenCovPoly { terms: terms.clone() }),
            MeasureSection::Uniform | MeasureSection::Continuum { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyName {
    Cylinder,
    Plane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub epsilon: f64,
    pub a: f64,
    pub t_cutoff: f64,
    #[serde(default = "cylinder")]
    pub topology: TopologyName,
}

fn cylinder() -> TopologyName {
    TopologyName::Cylinder
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationSection {
    #[serde(default)]
    pub time_zero_row: i32,
    #[serde(default = "one")]
    pub b: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSection {
    /// Largest irrep label in the coefficient tables.
    pub max_label: u32,
    pub quadrature_nodes: usize,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self {
            max_label: 40,
            quadrature_nodes: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructSection {
    /// Largest irrep label in the physical probe basis.
    pub basis_max_label: u32,
    pub null_tol: f64,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        Self {
            basis_max_label: 6,
            null_tol: osr_core::reconstruct::NULL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniversalitySection {
    pub actions: Vec<MeasureSection>,
    #[serde(default = "four")]
    pub max_label: u32,
    /// Extra `(ε, T)` lattices on which the ratios are recomputed.
    #[serde(default)]
    pub lattices: Vec<(f64, f64)>,
    /// Refinement factors `m` (lattice spacing `ε/m`) for the limit table.
    #[serde(default = "default_refinements")]
    pub refinements: Vec<i32>,
}

fn four() -> u32 {
    4
}

fn default_refinements() -> Vec<i32> {
    vec![1, 2, 4, 8]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub area: f64,
    pub irreps: Vec<i32>,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub csv: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "osr-out".into(),
            csv: true,
        }
    }
}

/// Hooks for exercising failure paths.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestHooks {
    /// Negates every face amplitude carrying this irrep.
    pub corrupt_irrep: Option<i32>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).context("invalid config")?;
        cfg.set_seed(cfg.run.seed);
        cfg.group()?;
        cfg.lattice()?;
        cfg.foliation()?;
        Ok(cfg)
    }

    /// The axiom sampler always follows `[run] seed`.
    pub fn set_seed(&mut self, seed: u64) {
        self.run.seed = seed;
        self.axioms.seed = seed;
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn group(&self) -> Result<GroupSpec> {
        let family = match self.group.family {
            GroupName::U1 => GroupFamily::CircleGroup,
            GroupName::SU2 => GroupFamily::SpecialUnitary2,
        };
        Ok(GroupSpec::new(family, self.group.killing_scale)?)
    }

    pub fn lattice(&self) -> Result<CylinderLattice> {
        let l = &self.lattice;
        let topology = match l.topology {
            TopologyName::Cylinder => Topology::Cylinder,
            TopologyName::Plane => Topology::Plane,
        };
        Ok(build_lattice(l.epsilon, l.a, l.t_cutoff, topology)?)
    }

    pub fn foliation(&self) -> Result<FoliationSpec> {
        let f = &self.foliation;
        let fol = FoliationSpec::new(f.time_zero_row, f.b, f.length)?;
        fol.validate_on(&self.lattice()?)?;
        Ok(fol)
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec::gauss_legendre(self.truncation.quadrature_nodes)
    }

    pub fn measure(&self) -> Result<Measure> {
        self.measure_for(&self.measure)
    }

    /// Builds `spec` on the configured lattice and foliation, applying test hooks.
    pub fn measure_for(&self, spec: &MeasureSection) -> Result<Measure> {
        let group = self.group()?;
        let lattice = self.lattice()?;
        let fol = self.foliation()?;
        let m = match spec {
            MeasureSection::Uniform => Measure::uniform(group, lattice, fol)?,
            MeasureSection::Continuum { g2 } => Measure::continuum_ym(group, *g2, lattice, fol)?,
            other => {
                let action = other.action(lattice.plaquette_area(fol.length)).expect("lattice action");
                Measure::lattice_gauge(group, action, lattice, fol, self.truncation.max_label, &self.quadrature())?
            }
        };
        Ok(match self.test_hooks.corrupt_irrep {
            Some(p) => {
                group.validate(IrrepLabel(p))?;
                m.with_corrupted_face(IrrepLabel(p))
            }
            None => m,
        })
    }

    /// Returns an error unless the config carries the named section.
    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
        match section {
            Some(s) => Ok(s),
            None => bail!("config is missing the [{name}] section"),
        }
    }
}

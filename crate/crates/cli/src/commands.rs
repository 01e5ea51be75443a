//! The five `osr` subcommands. Each returns a payload, CSV series and whether
//! the command's pass condition held.

use anyhow::{bail, Context, Result};
use osr_core::action::{IrrepCoefficients, PlaquetteAction};
use osr_core::group::{casimir, IrrepLabel};
use osr_core::lattice::{build_lattice, parse_networks, refine_lattice, LatticeLoop, LoopNetwork, Topology};
use osr_core::measure::{continuum_wilson_loop, expect, expect_with_error, Measure};
use osr_core::reconstruct::{
    contraction, equivalence_map, hamiltonian, reconstruct_space, verify_axioms, AxiomReport, SemigroupOperator,
};
use osr_core::OsrError;
use serde::{Deserialize, Serialize};

use crate::config::{ConvergeSection, MeasureSection, RunConfig};
use crate::report::{num, opt_int, opt_num, CsvSeries};

/// `|ratio|^{threshold}` must drop below this.
pub const DECAY_TARGET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Expect(ExpectPayload),
    Axioms(AxiomsPayload),
    Reconstruct(ReconstructPayload),
    Universality(UniversalityPayload),
    Converge(ConvergePayload),
}

pub struct CommandOutput {
    pub payload: Payload,
    pub csv: Vec<CsvSeries>,
    /// Pass condition of the command; decides the exit status.
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectRow {
    pub id: usize,
    pub line: usize,
    pub network: String,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectPayload {
    pub measure: String,
    pub rows: Vec<ExpectRow>,
}

fn measure_name(spec: &MeasureSection) -> String {
    match spec {
        MeasureSection::Uniform => "uniform".into(),
        MeasureSection::HeatKernel { g2 } => format!("heat-kernel(g2={g2})"),
        MeasureSection::Wilson { g2, kappa } => match kappa {
            Some(k) => format!("wilson(g2={g2},kappa={k})"),
            None => format!("wilson(g2={g2})"),
        },
        MeasureSection::GencovSqrt => "gencov-sqrt".into(),
        MeasureSection::GencovPoly { terms } => {
            let t: Vec<String> = terms.iter().map(|(n, a)| format!("{a}*P{n}")).collect();
            format!("gencov-poly({})", t.join("+"))
        }
        MeasureSection::Continuum { g2 } => format!("continuum(g2={g2})"),
    }
}

pub fn cmd_expect(cfg: &RunConfig, networks_text: &str) -> Result<CommandOutput> {
    let measure = cfg.measure()?;
    let networks = parse_networks(networks_text).context("parsing networks file")?;
    let mut rows = Vec::with_capacity(networks.len());
    for (i, (line, net)) in networks.iter().enumerate() {
        let e = expect_with_error(&measure, net).with_context(|| format!("network {} (line {line})", i + 1))?;
        rows.push(ExpectRow {
            id: i + 1,
            line: *line,
            network: net.to_text(),
            value: e.value,
            error: e.error,
        });
    }
    let mut csv = CsvSeries::new("expectations", &["id", "line", "value", "error", "network"]);
    for r in &rows {
        csv.push([r.id.to_string(), r.line.to_string(), num(r.value), num(r.error), r.network.clone()]);
    }
    Ok(CommandOutput {
        payload: Payload::Expect(ExpectPayload {
            measure: measure_name(&cfg.measure),
            rows,
        }),
        csv: vec![csv],
        success: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomsPayload {
    pub measure: String,
    /// Axioms II and III both hold; this alone sets the exit status.
    pub mandatory_pass: bool,
    pub report: AxiomReport,
}

pub fn cmd_axioms(cfg: &RunConfig) -> Result<CommandOutput> {
    let measure = cfg.measure()?;
    let fol = cfg.foliation()?;
    let mut ax = cfg.axioms.clone();
    ax.seed = cfg.run.seed;
    if let Some(m) = measure.max_label() {
        ax.max_label = ax.max_label.min(m);
    }
    let report = verify_axioms(&measure, &fol, &ax)?;
    let mut csv = CsvSeries::new("axioms", &["axiom", "status", "witness", "tolerance", "detail"]);
    for r in &report.records {
        let status = serde_json::to_value(r.status)?.as_str().unwrap_or_default().to_string();
        csv.push([r.axiom.to_string(), status, num(r.witness), num(r.tolerance), r.detail.clone()]);
    }
    let mandatory_pass = report.mandatory_pass();
    Ok(CommandOutput {
        payload: Payload::Axioms(AxiomsPayload {
            measure: measure_name(&cfg.measure),
            mandatory_pass,
            report,
        }),
        csv: vec![csv],
        success: mandatory_pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub irrep: i32,
    pub casimir: f64,
    pub eigenvalue: f64,
    /// Eigenvalue for the foliation with `b` doubled.
    pub eigenvalue_doubled_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructPayload {
    pub measure: String,
    pub basis_max_label: u32,
    pub basis_size: usize,
    pub dimension: usize,
    pub null_rank: usize,
    pub min_gram_eigenvalue: f64,
    pub contraction_t1: SemigroupOperator,
    pub spectrum: Option<Vec<SpectrumRow>>,
    pub vacuum_multiplicity: Option<usize>,
    pub gap: Option<f64>,
    /// Ratio of the doubled-`b` spectrum to this one.
    pub doubled_b_scale: Option<f64>,
    pub doubled_b_max_deviation: Option<f64>,
    /// Why no Hamiltonian was extracted, when none was.
    pub no_generator: Option<String>,
}

pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<CommandOutput> {
    let measure = cfg.measure()?;
    let fol = cfg.foliation()?;
    let cutoff = cfg.reconstruct.basis_max_label;
    let space = reconstruct_space(&measure, &fol, cutoff, cfg.reconstruct.null_tol).map_err(|e| match e {
        OsrError::IndefiniteGram { eigenvalue, tolerance } => anyhow::anyhow!(
            "reflection positivity fails: Gram eigenvalue {eigenvalue:e} below -{tolerance:e}"
        ),
        other => other.into(),
    })?;
    let op = contraction(&measure, &fol, &space, 1.0)?;
    let group = measure.group;
    let (spectrum, vacuum, gap, scale, deviation, no_generator) = match hamiltonian(&measure, &fol, &space) {
        Ok(h) => {
            let mut doubled = fol;
            doubled.b *= 2.0;
            let eq = equivalence_map(&measure, &fol, &doubled, cutoff, &cfg.quadrature())?;
            let rows: Vec<SpectrumRow> = h
                .eigenvalues
                .iter()
                .map(|(p, e)| SpectrumRow {
                    irrep: p.0,
                    casimir: casimir(&group, *p),
                    eigenvalue: *e,
                    eigenvalue_doubled_b: eq.spectrum_tilde.as_ref().and_then(|s| s.eigenvalue(*p)),
                })
                .collect();
            (Some(rows), Some(h.vacuum_multiplicity), h.gap, Some(eq.scale), eq.max_deviation, None)
        }
        Err(e @ (OsrError::NoGenerator { .. } | OsrError::NonSemigroup { .. })) => {
            (None, None, None, None, None, Some(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let mut csv = Vec::new();
    let mut c = CsvSeries::new("contraction", &["irrep", "t", "eigenvalue"]);
    for (p, v) in &op.eigenvalues {
        c.push([p.0.to_string(), num(op.t), num(*v)]);
    }
    csv.push(c);
    if let Some(rows) = spectrum.as_ref() {
        let mut s = CsvSeries::new("spectrum", &["irrep", "casimir", "eigenvalue", "eigenvalue_doubled_b"]);
        for r in rows.iter() {
            s.push([r.irrep.to_string(), num(r.casimir), num(r.eigenvalue), opt_num(r.eigenvalue_doubled_b)]);
        }
        csv.push(s);
    }
    Ok(CommandOutput {
        payload: Payload::Reconstruct(ReconstructPayload {
            measure: measure_name(&cfg.measure),
            basis_max_label: cutoff,
            basis_size: space.basis.len(),
            dimension: space.dimension(),
            null_rank: space.null_rank,
            min_gram_eigenvalue: space.min_gram_eigenvalue,
            contraction_t1: op,
            spectrum,
            vacuum_multiplicity: vacuum,
            gap,
            doubled_b_scale: scale,
            doubled_b_max_deviation: deviation,
            no_generator,
        }),
        csv,
        success: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub action: String,
    pub irrep: i32,
    pub ratio: f64,
    pub ratio_error: f64,
    /// Smallest `|α|` with `|ratio|^{|α|} < 10⁻⁶`; absent for the trivial irrep.
    pub threshold: Option<u64>,
    pub decayed_at_threshold: Option<f64>,
    /// Largest change of the ratio across the extra `(ε, T)` lattices.
    pub lattice_variation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub action: String,
    pub network: String,
    /// `(m, expectation)` on the lattice with spacing `ε/m`.
    pub refinements: Vec<(i32, f64)>,
    /// Expectation under the uniform measure.
    pub uniform: f64,
    /// Distance of the finest refinement from the uniform value.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalityPayload {
    pub group: String,
    pub ratios: Vec<RatioRow>,
    pub limits: Vec<LimitRow>,
    pub all_ratios_below_one: bool,
}

/// Smallest integer `n ≥ 1` with `|r|^n < target`, for `|r| < 1`.
pub fn decay_threshold(r: f64, target: f64) -> Option<u64> {
    let a = r.abs();
    if a >= 1.0 || a.is_nan() {
        return None;
    }
    if a == 0.0 {
        return Some(1);
    }
    let mut n = (target.ln() / a.ln()).ceil().max(1.0) as u64;
    while a.powi(n as i32) >= target {
        n += 1;
    }
    Some(n)
}

fn limit_networks(cfg: &RunConfig, networks_text: Option<&str>) -> Result<Vec<LoopNetwork>> {
    if let Some(text) = networks_text {
        return Ok(parse_networks(text)?.into_iter().map(|(_, n)| n).collect());
    }
    let group = cfg.group()?;
    let lattice = cfg.lattice()?;
    let z = cfg.foliation.time_zero_row;
    let f = group.fundamental();
    let fbar = osr_core::group::dual(&group, f);
    let mut out = vec![
        LoopNetwork::unit(),
        LoopNetwork::single(LatticeLoop::rectangle(0, z, 1, 1), f)?,
        LoopNetwork::single(LatticeLoop::rectangle(-1, z, 2, 1), f)?,
    ];
    if lattice.topology == Topology::Cylinder && lattice.contains_line(z + 1) {
        out.push(LoopNetwork::new(vec![(LatticeLoop::winding(z), f), (LatticeLoop::winding(z + 1), fbar)])?);
    }
    Ok(out)
}

pub fn cmd_universality(cfg: &RunConfig, networks_text: Option<&str>) -> Result<CommandOutput> {
    let sweep = RunConfig::require(&cfg.universality, "universality")?;
    if !sweep.actions.iter().any(|a| matches!(a, MeasureSection::GencovSqrt | MeasureSection::GencovPoly { .. })) {
        bail!("the universality sweep needs at least one generally covariant action");
    }
    let group = cfg.group()?;
    let lattice = cfg.lattice()?;
    let fol = cfg.foliation()?;
    let quad = cfg.quadrature();
    let networks = limit_networks(cfg, networks_text)?;
    let uniform = Measure::uniform(group, lattice, fol)?;
    let mut ratios = Vec::new();
    let mut limits = Vec::new();
    let mut all_below = true;
    for spec in &sweep.actions {
        let name = measure_name(spec);
        let Some(action) = spec.action(lattice.plaquette_area(fol.length)) else {
            bail!("{name} is not a plaquette action");
        };
        if !action.is_generally_covariant() {
            bail!("{name} is not generally covariant");
        }
        let table = IrrepCoefficients::compute(&action, &group, sweep.max_label.max(1), &quad)?;
        let variants = sweep
            .lattices
            .iter()
            .map(|&(eps, t)| {
                let l = build_lattice(eps, cfg.lattice.a, t, lattice.topology)?;
                let f = osr_core::lattice::FoliationSpec::new(0, fol.b, fol.length)?;
                Ok(Measure::lattice_gauge(group, action.clone(), l, f, sweep.max_label.max(1), &quad)?)
            })
            .collect::<Result<Vec<_>>>()?;
        for p in group.irreps_up_to(sweep.max_label) {
            let r = table.ratio(p)?;
            let mut variation = 0.0f64;
            for m in &variants {
                let other = m.coefficients().expect("lattice measure").ratio(p)?;
                variation = variation.max((other - r).abs());
            }
            let (threshold, decayed) = if p.is_trivial() {
                (None, None)
            } else {
                if r.abs() >= 1.0 - 1e-6 {
                    all_below = false;
                }
                let n = decay_threshold(r, DECAY_TARGET);
                (n, n.map(|n| r.abs().powi(n as i32)))
            };
            ratios.push(RatioRow {
                action: name.clone(),
                irrep: p.0,
                ratio: r,
                ratio_error: table.ratio_error(p),
                threshold,
                decayed_at_threshold: decayed,
                lattice_variation: variation,
            });
        }
        for net in &networks {
            net.validate_on(&lattice)?;
            let mut refinements = Vec::new();
            for &m in &sweep.refinements {
                let fine = refine_lattice(&lattice, m)?;
                let mut ffol = fol;
                ffol.time_zero_row *= m;
                let fine_action = action.with_plaq_area(fine.plaquette_area(fol.length));
                let measure = Measure::lattice_gauge(group, fine_action, fine, ffol, sweep.max_label.max(2), &quad)?;
                refinements.push((m, expect(&measure, &net.refine(m, &fine)?)?));
            }
            let u = expect(&uniform, net)?;
            let last = refinements.last().map_or(f64::NAN, |r| r.1);
            limits.push(LimitRow {
                action: name.clone(),
                network: net.to_text(),
                refinements,
                uniform: u,
                deviation: (last - u).abs(),
            });
        }
    }
    let mut r_csv = CsvSeries::new(
        "universality",
        &["action", "irrep", "ratio", "ratio_error", "threshold", "decayed_at_threshold", "lattice_variation"],
    );
    for r in &ratios {
        r_csv.push([
            r.action.clone(),
            r.irrep.to_string(),
            num(r.ratio),
            num(r.ratio_error),
            opt_int(r.threshold),
            opt_num(r.decayed_at_threshold),
            num(r.lattice_variation),
        ]);
    }
    let mut l_csv = CsvSeries::new("universality_limits", &["action", "network", "refinement", "expectation", "uniform"]);
    for l in &limits {
        for (m, v) in &l.refinements {
            l_csv.push([l.action.clone(), l.network.clone(), m.to_string(), num(*v), num(l.uniform)]);
        }
    }
    Ok(CommandOutput {
        payload: Payload::Universality(UniversalityPayload {
            group: format!("{:?}", cfg.group.family),
            ratios,
            limits,
            all_ratios_below_one: all_below,
        }),
        csv: vec![r_csv, l_csv],
        success: all_below,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub irrep: i32,
    pub casimir: f64,
    pub closed_form: f64,
    /// `(ε, value)` for the Wilson action.
    pub wilson: Vec<(f64, f64)>,
    /// `(ε, value)` for the heat-kernel action.
    pub heat_kernel: Vec<(f64, f64)>,
    pub extrapolated: Option<f64>,
    pub extrapolation_error: Option<f64>,
    /// `|extrapolated - closed_form|`.
    pub deviation: Option<f64>,
    /// Largest spread of the heat-kernel values over the schedule.
    pub heat_kernel_spread: f64,
    /// Distance to the closed form never grows along the schedule.
    pub monotone: bool,
    /// Set when the Wilson sequence does not settle.
    pub divergence: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergePayload {
    pub g2: f64,
    pub area: f64,
    pub rows: Vec<ConvergeRow>,
}

pub fn cmd_converge(cfg: &RunConfig) -> Result<CommandOutput> {
    let sec: &ConvergeSection = RunConfig::require(&cfg.converge, "converge")?;
    let (g2, kappa) = match &cfg.measure {
        MeasureSection::Wilson { g2, kappa } => (*g2, *kappa),
        MeasureSection::HeatKernel { g2 } => (*g2, None),
        other => bail!("converge needs a wilson or heat-kernel measure, got {}", measure_name(other)),
    };
    let group = cfg.group()?;
    let lattice = cfg.lattice()?;
    let fol = cfg.foliation()?;
    let quad = cfg.quadrature();
    let plaq = lattice.plaquette_area(fol.length);
    let max_label = sec.irreps.iter().map(|p| p.unsigned_abs()).max().unwrap_or(1).max(1);
    let wilson = Measure::lattice_gauge(
        group,
        PlaquetteAction::WilsonYM { g2, plaq_area: plaq, kappa },
        lattice,
        fol,
        max_label,
        &quad,
    )?;
    let heat = Measure::lattice_gauge(group, PlaquetteAction::HeatKernelYM { g2, plaq_area: plaq }, lattice, fol, max_label, &quad)?;
    let mut rows = Vec::new();
    let mut success = true;
    for &label in &sec.irreps {
        let p = IrrepLabel(label);
        group.validate(p)?;
        let c2 = casimir(&group, p);
        let target = (-0.5 * g2 * sec.area * c2).exp();
        let heat_kernel = raw_wilson_values(&heat, sec.area, p, &sec.epsilons, &quad)?;
        let hk_values: Vec<f64> = heat_kernel.iter().map(|v| v.1).collect();
        let spread = hk_values.iter().copied().fold(f64::MIN, f64::max) - hk_values.iter().copied().fold(f64::MAX, f64::min);
        let (values, extrapolated, divergence) = match continuum_wilson_loop(&wilson, sec.area, p, &sec.epsilons, &quad) {
            Ok(s) => (s.values, s.extrapolated, None),
            Err(OsrError::ExtrapolationDivergence(msg)) => {
                success = false;
                let raw = raw_wilson_values(&wilson, sec.area, p, &sec.epsilons, &quad)?;
                (raw, None, Some(msg))
            }
            Err(e) => return Err(e.into()),
        };
        let dists: Vec<f64> = values.iter().map(|v| (v.1 - target).abs()).collect();
        let monotone = dists.windows(2).all(|w| w[1] <= w[0] + 1e-15);
        rows.push(ConvergeRow {
            irrep: label,
            casimir: c2,
            closed_form: target,
            wilson: values,
            heat_kernel,
            extrapolated: extrapolated.as_ref().map(|x| x.estimate),
            extrapolation_error: extrapolated.as_ref().map(|x| x.error),
            deviation: extrapolated.as_ref().map(|x| (x.estimate - target).abs()),
            heat_kernel_spread: spread.max(0.0),
            monotone,
            divergence,
        });
    }
    let mut csv = CsvSeries::new("converge", &["irrep", "epsilon", "wilson", "heat_kernel", "closed_form"]);
    for r in &rows {
        for (i, (eps, w)) in r.wilson.iter().enumerate() {
            let h = r.heat_kernel.get(i).map(|v| v.1);
            csv.push([r.irrep.to_string(), num(*eps), num(*w), opt_num(h), num(r.closed_form)]);
        }
    }
    Ok(CommandOutput {
        payload: Payload::Converge(ConvergePayload {
            g2,
            area: sec.area,
            rows,
        }),
        csv: vec![csv],
        success,
    })
}

/// Wilson values one `ε` at a time, for reporting a sequence that failed to extrapolate.
fn raw_wilson_values(
    measure: &Measure,
    area: f64,
    p: IrrepLabel,
    schedule: &[f64],
    quad: &osr_core::group::QuadratureSpec,
) -> Result<Vec<(f64, f64)>> {
    schedule
        .iter()
        .map(|&eps| Ok(continuum_wilson_loop(measure, area, p, &[eps], quad)?.values[0]))
        .collect()
}

//! Bundled experiment cases: mesh + field registry, the bounds/oracle/PCG
//! pipeline behind the CLI, report serialization and the randomized
//! verification suite.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{
    assemble_diffusion, assemble_elasticity_2d, assemble_load_scalar, assemble_load_vector2,
    QuadraturePlan, SparseSymMatrix,
};
use crate::bounds::{
    diffusion_bounds, elasticity_bounds, verify_bracketing, write_bounds_csv, write_spectrum_csv,
    BoundsMode, BoundsResult, SpectrumReport,
};
use crate::error::{Error, Result};
use crate::material::{example_field, RobinField, TensorField};
use crate::mesh::{
    build_uniform_quad_mesh, build_uniform_tri_mesh, parse_mesh, BoundaryTag, Mesh, Rect, SideTags,
};
use crate::pcg::{pcg_solve, write_pcg_history_csv, PcgReport};
use crate::smalleig::{gen_eig_dense, DenseSymMatrix, GenEigDense};

pub const EX41C_MESH: &str = include_str!("../fixtures/ex41c.mesh");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    Ex41a,
    Ex41b,
    Ex41c,
    Ex45,
    Ex46,
}

impl CaseId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ex41a" => Ok(Self::Ex41a),
            "ex41b" => Ok(Self::Ex41b),
            "ex41c" => Ok(Self::Ex41c),
            "ex45" => Ok(Self::Ex45),
            "ex46" => Ok(Self::Ex46),
            other => Err(Error::UnknownCase(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ex41a => "ex41a",
            Self::Ex41b => "ex41b",
            Self::Ex41c => "ex41c",
            Self::Ex45 => "ex45",
            Self::Ex46 => "ex46",
        }
    }

    pub fn all() -> [CaseId; 5] {
        [Self::Ex41a, Self::Ex41b, Self::Ex41c, Self::Ex45, Self::Ex46]
    }

    pub fn default_n(&self) -> Option<usize> {
        match self {
            Self::Ex41a => Some(11),
            Self::Ex41b => Some(21),
            Self::Ex41c => None, // bundled fixture mesh
            Self::Ex45 => Some(22),
            Self::Ex46 => Some(10),
        }
    }

    /// Valid --precond ids, first entry is the default.
    pub fn preconditioners(&self) -> &'static [&'static str] {
        match self {
            Self::Ex41a | Self::Ex41b | Self::Ex41c => &["Atilde1", "Atilde2"],
            Self::Ex45 => &["Ctilde1", "Ctilde2"],
            Self::Ex46 => &["identity"],
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseConfig {
    pub case: CaseId,
    /// Mesh subdivisions per axis; None picks the case default. Must stay
    /// None for the fixture-backed ex41c.
    pub n: Option<usize>,
    /// Preconditioner id; None picks the case default.
    pub precond: Option<String>,
    pub with_pcg: bool,
}

impl CaseConfig {
    pub fn new(case: CaseId) -> Self {
        Self {
            case,
            n: None,
            precond: None,
            with_pcg: false,
        }
    }
}

/// Everything a solved case produces, kept in memory for verification.
pub struct SolvedCase {
    pub case: CaseId,
    pub n: Option<usize>,
    pub precond: String,
    pub mesh: Mesh,
    pub matrix: SparseSymMatrix,
    pub precond_matrix: SparseSymMatrix,
    pub bounds: BoundsResult,
    pub oracle: GenEigDense,
    pub report: SpectrumReport,
    pub pcg: Option<PcgReport>,
}

impl SolvedCase {
    pub fn label(&self) -> String {
        match self.n {
            Some(n) => format!("{}_n{}_{}", self.case.name(), n, self.precond),
            None => format!("{}_{}", self.case.name(), self.precond),
        }
    }
}

fn pick_precond(case: CaseId, requested: &Option<String>) -> Result<String> {
    let valid = case.preconditioners();
    match requested {
        None => Ok(valid[0].to_string()),
        Some(p) if valid.contains(&p.as_str()) => Ok(p.clone()),
        Some(p) => Err(Error::InvalidParameter(format!(
            "case {} accepts preconditioners {:?}, got `{p}`",
            case.name(),
            valid
        ))),
    }
}

fn square_dirichlet(lo: f64, hi: f64, n: usize) -> Result<Mesh> {
    build_uniform_quad_mesh(Rect::square(lo, hi), n, SideTags::all(BoundaryTag::Dirichlet))
}

/// Runs the full bounds → oracle → bracketing pipeline for one bundled case.
pub fn solve_case(config: &CaseConfig) -> Result<SolvedCase> {
    let case = config.case;
    let precond = pick_precond(case, &config.precond)?;
    if case == CaseId::Ex41c && config.n.is_some() {
        return Err(Error::InvalidParameter(
            "ex41c uses the bundled fixture mesh; --n is not applicable".into(),
        ));
    }
    let n = config.n.or(case.default_n());
    if let Some(n_val) = n {
        // all bundled domains lose every vertex to the Dirichlet boundary at n=1
        if n_val < 2 && case != CaseId::Ex41b {
            return Err(Error::InvalidParameter(format!(
                "case {} has no free DOFs at n={n_val}; increase --n",
                case.name()
            )));
        }
    }

    match case {
        CaseId::Ex41a | CaseId::Ex41b | CaseId::Ex41c => {
            let a_field = example_field("ex41-A")?;
            let at_field = example_field(&format!("ex41-{precond}"))?;
            let (mesh, g3, g3t, singular) = match case {
                CaseId::Ex41a => {
                    let mesh = square_dirichlet(-PI, PI, n.unwrap())?;
                    (mesh, RobinField::Zero, RobinField::Zero, false)
                }
                CaseId::Ex41b => {
                    let mesh = build_uniform_quad_mesh(
                        Rect::square(-PI, PI),
                        n.unwrap(),
                        SideTags::all(BoundaryTag::Periodic),
                    )?;
                    (mesh, RobinField::Zero, RobinField::Zero, true)
                }
                _ => {
                    let mesh = parse_mesh(EX41C_MESH)?;
                    let g = RobinField::one_plus_x2_squared();
                    (mesh, g.clone(), g, false)
                }
            };
            let plan = QuadraturePlan::for_fields(&mesh, &[&a_field, &at_field]);
            let a = assemble_diffusion(&mesh, &a_field, &g3, &plan)?;
            let at = assemble_diffusion(&mesh, &at_field, &g3t, &plan)?;
            let bounds = diffusion_bounds(&mesh, &a_field, &at_field, &g3, &g3t, singular)?;
            let oracle = gen_eig_dense(&a, &at, singular)?;
            let report = verify_bracketing(&bounds, &oracle.spectrum)?;
            let pcg = if config.with_pcg && case == CaseId::Ex41a {
                let b = assemble_load_scalar(&mesh, |_| 1.0)?;
                Some(pcg_solve(&a, &at, &b, 1e-9)?)
            } else {
                None
            };
            Ok(SolvedCase {
                case,
                n,
                precond,
                mesh,
                matrix: a,
                precond_matrix: at,
                bounds,
                oracle,
                report,
                pcg,
            })
        }
        CaseId::Ex45 => {
            let c_field = example_field("ex45-C")?;
            let ct_field = example_field(&format!("ex45-{precond}"))?;
            let mesh = square_dirichlet(-PI, PI, n.unwrap())?;
            let plan = QuadraturePlan::for_fields(&mesh, &[&c_field, &ct_field]);
            let c = assemble_elasticity_2d(&mesh, &c_field, &plan)?;
            let ct = assemble_elasticity_2d(&mesh, &ct_field, &plan)?;
            let bounds = elasticity_bounds(&mesh, &c_field, &ct_field, 2)?;
            let oracle = gen_eig_dense(&c, &ct, false)?;
            let report = verify_bracketing(&bounds, &oracle.spectrum)?;
            let pcg = if config.with_pcg {
                let b = assemble_load_vector2(&mesh, |_| [1.0, 0.0])?;
                Some(pcg_solve(&c, &ct, &b, 1e-9)?)
            } else {
                None
            };
            Ok(SolvedCase {
                case,
                n,
                precond,
                mesh,
                matrix: c,
                precond_matrix: ct,
                bounds,
                oracle,
                report,
                pcg,
            })
        }
        CaseId::Ex46 => {
            let a_field = example_field("ex46-A")?;
            let at_field = example_field("ex46-I")?;
            let mesh = square_dirichlet(0.0, 1.0, n.unwrap())?;
            let plan = QuadraturePlan::for_fields(&mesh, &[&a_field, &at_field]);
            let a = assemble_diffusion(&mesh, &a_field, &RobinField::Zero, &plan)?;
            let at = assemble_diffusion(&mesh, &at_field, &RobinField::Zero, &plan)?;
            let bounds = diffusion_bounds(
                &mesh,
                &a_field,
                &at_field,
                &RobinField::Zero,
                &RobinField::Zero,
                false,
            )?;
            let oracle = gen_eig_dense(&a, &at, false)?;
            let report = verify_bracketing(&bounds, &oracle.spectrum)?;
            Ok(SolvedCase {
                case,
                n,
                precond,
                mesh,
                matrix: a,
                precond_matrix: at,
                bounds,
                oracle,
                report,
                pcg: None,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PcgSummary {
    pub iterations: usize,
    pub converged: bool,
    pub reduction_factor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub case: String,
    pub precond: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub dofs: usize,
    pub pencil_order: usize,
    pub mode: String,
    pub certified: bool,
    pub pass: bool,
    pub checks: usize,
    pub violations: usize,
    pub min_lower_margin: f64,
    pub min_upper_margin: f64,
    pub oracle_max_rel_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pcg: Option<PcgSummary>,
}

pub fn case_report(solved: &SolvedCase) -> CaseReport {
    CaseReport {
        case: solved.case.name().to_string(),
        precond: solved.precond.clone(),
        n: solved.n,
        dofs: solved.mesh.num_dofs(),
        pencil_order: solved.matrix.order(),
        mode: match solved.bounds.mode {
            BoundsMode::Regular => "regular".to_string(),
            BoundsMode::SingularShift => "singular_shift".to_string(),
        },
        certified: solved.bounds.certified,
        pass: solved.report.pass,
        checks: solved.report.checks,
        violations: solved.report.violations.len(),
        min_lower_margin: solved.report.min_lower_margin,
        min_upper_margin: solved.report.min_upper_margin,
        oracle_max_rel_residual: solved.oracle.max_rel_residual,
        pcg: solved.pcg.as_ref().map(|p| PcgSummary {
            iterations: p.iterations,
            converged: p.converged,
            reduction_factor: 1e-9,
        }),
    }
}

/// Writes bounds.csv, spectrum.csv, report.json (and pcg_history.csv when a
/// PCG run is attached) under `out_dir/<label>/`.
pub fn write_case_outputs(solved: &SolvedCase, out_dir: &Path) -> Result<PathBuf> {
    let dir = out_dir.join(solved.label());
    fs::create_dir_all(&dir)?;
    let mut f = fs::File::create(dir.join("bounds.csv"))?;
    write_bounds_csv(&solved.bounds, Some(&solved.oracle.spectrum), &mut f)?;
    let mut f = fs::File::create(dir.join("spectrum.csv"))?;
    write_spectrum_csv(&solved.oracle.spectrum, &mut f)?;
    let mut f = fs::File::create(dir.join("matrix.mtx"))?;
    solved.matrix.write_matrix_market(&mut f)?;
    if let Some(pcg) = &solved.pcg {
        let mut f = fs::File::create(dir.join("pcg_history.csv"))?;
        write_pcg_history_csv(pcg, &mut f)?;
    }
    let report = case_report(solved);
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(dir)
}

/// Runs one configured case and writes its report files.
pub fn run_case(config: &CaseConfig, out_dir: &Path) -> Result<(CaseReport, PathBuf)> {
    let solved = solve_case(config)?;
    let dir = write_case_outputs(&solved, out_dir)?;
    Ok((case_report(&solved), dir))
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomCaseOutcome {
    pub index: usize,
    pub kind: String,
    pub shape: String,
    pub n: usize,
    pub dofs: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomSuiteSummary {
    pub seed: u64,
    pub cases: usize,
    pub failures: usize,
    pub scaling_equivariant: bool,
    pub perfect_preconditioner_exact: bool,
    pub outcomes: Vec<RandomCaseOutcome>,
}

impl RandomSuiteSummary {
    pub fn pass(&self) -> bool {
        self.failures == 0 && self.scaling_equivariant && self.perfect_preconditioner_exact
    }
}

fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> DenseSymMatrix {
    // random rotation times eigenvalues in [0.2, 3.0]
    let mut g = vec![0.0; dim * dim];
    for v in g.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    // thin QR by Gram-Schmidt
    for c in 0..dim {
        for prev in 0..c {
            let mut dot = 0.0;
            for r in 0..dim {
                dot += g[r * dim + c] * g[r * dim + prev];
            }
            for r in 0..dim {
                g[r * dim + c] -= dot * g[r * dim + prev];
            }
        }
        let norm: f64 = (0..dim).map(|r| g[r * dim + c] * g[r * dim + c]).sum::<f64>().sqrt();
        if norm < 1e-8 {
            g[c * dim + c] += 1.0;
        }
        let norm: f64 = (0..dim).map(|r| g[r * dim + c] * g[r * dim + c]).sum::<f64>().sqrt();
        for r in 0..dim {
            g[r * dim + c] /= norm;
        }
    }
    let evals: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..3.0)).collect();
    let mut m = DenseSymMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..dim {
                s += g[i * dim + k] * evals[k] * g[j * dim + k];
            }
            m.set_sym(i, j, s);
        }
    }
    m
}

fn random_element_constant(
    dim: usize,
    elements: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TensorField> {
    let mats = (0..elements).map(|_| random_spd(dim, rng)).collect();
    TensorField::element_constant(dim, mats)
}

/// Randomized bracketing suite: element-constant SPD pencils on random small
/// meshes, diffusion and elasticity alternating, each verified against the
/// dense oracle. Also spot-checks scaling equivariance and the perfect
/// preconditioner.
pub fn randomized_suite(count: usize, seed: u64) -> Result<RandomSuiteSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::with_capacity(count);
    let mut failures = 0usize;
    for index in 0..count {
        let n = rng.gen_range(2..=8usize);
        let tri = rng.gen_bool(0.5);
        let elasticity = index % 2 == 1;
        let lo = rng.gen_range(-1.5..0.0);
        let hi = lo + rng.gen_range(0.5..2.5);
        let bc = SideTags::all(BoundaryTag::Dirichlet);
        let mesh = if tri {
            build_uniform_tri_mesh(Rect::square(lo, hi), n, bc)?
        } else {
            build_uniform_quad_mesh(Rect::square(lo, hi), n, bc)?
        };
        if mesh.num_dofs() == 0 {
            continue;
        }
        let plan = QuadraturePlan::uniform(&mesh);
        let pass = if elasticity {
            let c_field = random_element_constant(3, mesh.num_elements(), &mut rng)?;
            let ct_field = random_element_constant(3, mesh.num_elements(), &mut rng)?;
            let c = assemble_elasticity_2d(&mesh, &c_field, &plan)?;
            let ct = assemble_elasticity_2d(&mesh, &ct_field, &plan)?;
            let bounds = elasticity_bounds(&mesh, &c_field, &ct_field, 2)?;
            let oracle = gen_eig_dense(&c, &ct, false)?;
            verify_bracketing(&bounds, &oracle.spectrum)?.pass
        } else {
            let a_field = random_element_constant(2, mesh.num_elements(), &mut rng)?;
            let at_field = random_element_constant(2, mesh.num_elements(), &mut rng)?;
            let a = assemble_diffusion(&mesh, &a_field, &RobinField::Zero, &plan)?;
            let at = assemble_diffusion(&mesh, &at_field, &RobinField::Zero, &plan)?;
            let bounds = diffusion_bounds(
                &mesh, &a_field, &at_field, &RobinField::Zero, &RobinField::Zero, false,
            )?;
            let oracle = gen_eig_dense(&a, &at, false)?;
            verify_bracketing(&bounds, &oracle.spectrum)?.pass
        };
        if !pass {
            failures += 1;
        }
        outcomes.push(RandomCaseOutcome {
            index,
            kind: if elasticity { "elasticity" } else { "diffusion" }.to_string(),
            shape: if tri { "tri" } else { "quad" }.to_string(),
            n,
            dofs: mesh.num_dofs(),
            pass,
        });
    }

    // scaling equivariance: power-of-two factor is bit-exact, generic factor
    // to 1e-12 relative
    let mesh = build_uniform_quad_mesh(
        Rect::square(0.0, 1.0),
        5,
        SideTags::all(BoundaryTag::Dirichlet),
    )?;
    let a_mats: Vec<DenseSymMatrix> =
        (0..mesh.num_elements()).map(|_| random_spd(2, &mut rng)).collect();
    let at_field = random_element_constant(2, mesh.num_elements(), &mut rng)?;
    let base = diffusion_bounds(
        &mesh,
        &TensorField::element_constant(2, a_mats.clone())?,
        &at_field,
        &RobinField::Zero,
        &RobinField::Zero,
        false,
    )?;
    let mut scaling_equivariant = true;
    for c in [2.0f64, 1.3] {
        let scaled = diffusion_bounds(
            &mesh,
            &TensorField::element_constant(2, a_mats.iter().map(|m| m.scaled(c)).collect())?,
            &at_field,
            &RobinField::Zero,
            &RobinField::Zero,
            false,
        )?;
        for k in 0..base.len() {
            let (dl, du) = (
                (scaled.lower[k] - c * base.lower[k]).abs(),
                (scaled.upper[k] - c * base.upper[k]).abs(),
            );
            let tol = if c == 2.0 {
                0.0
            } else {
                1e-12 * (c * base.upper[k]).abs()
            };
            if dl > tol || du > tol {
                scaling_equivariant = false;
            }
        }
    }

    // perfect preconditioner: bounds and all eigenvalues equal 1 to 1e-10
    let shared = random_element_constant(2, mesh.num_elements(), &mut rng)?;
    let bounds = diffusion_bounds(
        &mesh,
        &shared,
        &shared.clone(),
        &RobinField::Zero,
        &RobinField::Zero,
        false,
    )?;
    let plan = QuadraturePlan::uniform(&mesh);
    let a = assemble_diffusion(&mesh, &shared, &RobinField::Zero, &plan)?;
    let oracle = gen_eig_dense(&a, &a, false)?;
    let perfect_preconditioner_exact = bounds
        .lower
        .iter()
        .chain(bounds.upper.iter())
        .all(|&v| v == 1.0)
        && oracle
            .spectrum
            .values()
            .iter()
            .all(|&l| (l - 1.0).abs() <= 1e-10);

    Ok(RandomSuiteSummary {
        seed,
        cases: count,
        failures,
        scaling_equivariant,
        perfect_preconditioner_exact,
        outcomes,
    })
}

/// The full bundled-case list: every example/preconditioner pair, with the
/// PCG experiments attached where a reference count exists.
pub fn bundled_configs() -> Vec<CaseConfig> {
    let mut configs = Vec::new();
    for (n, pcg) in [(11, true), (31, true)] {
        for p in ["Atilde1", "Atilde2"] {
            configs.push(CaseConfig {
                case: CaseId::Ex41a,
                n: Some(n),
                precond: Some(p.to_string()),
                with_pcg: pcg,
            });
        }
    }
    for p in ["Atilde1", "Atilde2"] {
        configs.push(CaseConfig {
            case: CaseId::Ex41b,
            n: Some(21),
            precond: Some(p.to_string()),
            with_pcg: false,
        });
        configs.push(CaseConfig {
            case: CaseId::Ex41c,
            n: None,
            precond: Some(p.to_string()),
            with_pcg: false,
        });
    }
    for p in ["Ctilde1", "Ctilde2"] {
        configs.push(CaseConfig {
            case: CaseId::Ex45,
            n: Some(22),
            precond: Some(p.to_string()),
            with_pcg: true,
        });
    }
    for n in [10, 20] {
        configs.push(CaseConfig {
            case: CaseId::Ex46,
            n: Some(n),
            precond: None,
            with_pcg: false,
        });
    }
    configs
}

#[derive(Debug, Clone, Serialize)]
pub struct PcgCountRow {
    pub case: String,
    pub n: usize,
    pub precond: String,
    pub iterations: usize,
    pub reference: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunAllSummary {
    pub cases: Vec<CaseReport>,
    pub pcg_counts: Vec<PcgCountRow>,
    pub random_suite: RandomSuiteSummary,
    pub all_pass: bool,
}

/// Reference iteration counts reported for the bundled experiments.
pub fn reference_pcg_count(case: CaseId, n: usize, precond: &str) -> Option<usize> {
    match (case, n, precond) {
        (CaseId::Ex41a, 11, "Atilde1") => Some(17),
        (CaseId::Ex41a, 11, "Atilde2") => Some(13),
        (CaseId::Ex41a, 31, "Atilde1") => Some(20),
        (CaseId::Ex41a, 31, "Atilde2") => Some(15),
        (CaseId::Ex45, 22, "Ctilde1") => Some(14),
        (CaseId::Ex45, 22, "Ctilde2") => Some(11),
        _ => None,
    }
}

/// Executes every bundled case plus the randomized suite; returns the summary
/// and writes everything under `out_dir`.
pub fn run_all(out_dir: &Path, seed: u64, random_count: usize) -> Result<RunAllSummary> {
    let mut cases = Vec::new();
    let mut pcg_counts = Vec::new();
    let mut all_pass = true;
    for config in bundled_configs() {
        let solved = solve_case(&config)?;
        write_case_outputs(&solved, out_dir)?;
        let report = case_report(&solved);
        all_pass = all_pass && report.pass;
        if let (Some(pcg), Some(n)) = (&solved.pcg, solved.n) {
            if let Some(reference) = reference_pcg_count(solved.case, n, &solved.precond) {
                all_pass = all_pass
                    && pcg.converged
                    && pcg.iterations.abs_diff(reference) <= 2;
                pcg_counts.push(PcgCountRow {
                    case: solved.case.name().to_string(),
                    n,
                    precond: solved.precond.clone(),
                    iterations: pcg.iterations,
                    reference,
                });
            }
        }
        cases.push(report);
    }
    let random_suite = randomized_suite(random_count, seed)?;
    all_pass = all_pass && random_suite.pass();
    let summary = RunAllSummary {
        cases,
        pcg_counts,
        random_suite,
        all_pass,
    };
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(summary)
}

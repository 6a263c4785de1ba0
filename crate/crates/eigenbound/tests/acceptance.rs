//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Heavy cases are solved once in shared lazies and reused across criteria.

use std::f64::consts::PI;
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use eigenbound::assembly::{assemble_diffusion, QuadraturePlan, SparseSymMatrix};
use eigenbound::bounds::{diffusion_bounds, exact_eigenvalue_check, verify_bracketing};
use eigenbound::cases::{randomized_suite, solve_case, CaseConfig, CaseId, SolvedCase};
use eigenbound::material::{example_field, robin_ratio_extremes, RobinField, TensorField};
use eigenbound::mesh::{build_uniform_quad_mesh, BoundaryTag, Rect, SideTags};
use eigenbound::pcg::pcg_solve;
use eigenbound::smalleig::{gen_eig_dense, gen_eig_small, DenseSymMatrix};

struct Timed {
    solved: SolvedCase,
    elapsed: Duration,
}

fn solve_timed(case: CaseId, n: Option<usize>, precond: &str, with_pcg: bool) -> Timed {
    let start = Instant::now();
    let solved = solve_case(&CaseConfig {
        case,
        n,
        precond: Some(precond.to_string()),
        with_pcg,
    })
    .expect("bundled case must solve");
    Timed {
        solved,
        elapsed: start.elapsed(),
    }
}

static EX41A_N11_AT1: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex41a, Some(11), "Atilde1", true));
static EX41A_N11_AT2: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex41a, Some(11), "Atilde2", true));
static EX41A_N31_AT1: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex41a, Some(31), "Atilde1", true));
static EX41A_N31_AT2: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex41a, Some(31), "Atilde2", true));
static EX41B_AT1: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex41b, Some(21), "Atilde1", false));
static EX41B_AT2: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex41b, Some(21), "Atilde2", false));
static EX41C_AT1: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex41c, None, "Atilde1", false));
static EX41C_AT2: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex41c, None, "Atilde2", false));
static EX45_CT1: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex45, Some(22), "Ctilde1", true));
static EX45_CT2: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex45, Some(22), "Ctilde2", true));
static EX46_N10: LazyLock<Timed> =
    LazyLock::new(|| solve_timed(CaseId::Ex46, Some(10), "identity", false));

fn criterion(name: &str, pass: bool, detail: &str) {
    println!(
        "[{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{name} failed: {detail}");
}

#[test]
fn criterion_1_bracketing_diffusion_dirichlet() {
    let limit = Duration::from_secs(60);
    let cases = [&EX41A_N11_AT1, &EX41A_N11_AT2, &EX41A_N31_AT1, &EX41A_N31_AT2];
    let mut detail = String::new();
    let mut pass = true;
    for case in cases {
        let t = &case.solved;
        pass = pass && t.report.pass && t.bounds.certified && case.elapsed <= limit;
        detail.push_str(&format!(
            "{}: checks={} violations={} {:.1}s; ",
            t.label(),
            t.report.checks,
            t.report.violations.len(),
            case.elapsed.as_secs_f64()
        ));
    }
    assert_eq!(EX41A_N11_AT1.solved.mesh.num_dofs(), 100);
    assert_eq!(EX41A_N31_AT1.solved.mesh.num_dofs(), 900);
    // the identity-preconditioned pencil stays inside the global data range
    // [0.7 − 0.4, 1.3 + 0.4]
    let s = &EX41A_N11_AT1.solved.oracle.spectrum;
    pass = pass && s.min() >= 0.3 - 1e-12 && s.max() <= 1.7 + 1e-12;
    criterion("criterion 1 (diffusion bracketing, ex41a)", pass, &detail);
}

#[test]
fn criterion_2_bracketing_robin() {
    let mut pass = true;
    let mut detail = String::new();
    for case in [&EX41C_AT1, &EX41C_AT2] {
        let t = &case.solved;
        pass = pass && t.report.pass && t.bounds.certified;
        detail.push_str(&format!(
            "{}: N={} checks={}; ",
            t.label(),
            t.mesh.num_dofs(),
            t.report.checks
        ));
    }
    assert_eq!(EX41C_AT1.solved.mesh.num_dofs(), 400);

    // the Robin ratio branch contributes exactly (1, 1) on Robin edges
    let mesh = &EX41C_AT2.solved.mesh;
    let g = RobinField::one_plus_x2_squared();
    let a_field = example_field("ex41-A").unwrap();
    let at2 = example_field("ex41-Atilde2").unwrap();
    let mut merged_to_one = 0usize;
    for be in mesh.boundary_edges() {
        if be.tag != BoundaryTag::Robin {
            continue;
        }
        let edge = mesh.edge_endpoints(be.element, be.local_edge);
        let ratio = robin_ratio_extremes(&g, &g.clone(), edge).unwrap().unwrap();
        pass = pass && ratio.lo == 1.0 && ratio.hi == 1.0 && ratio.certified;
        let alpha = eigenbound::bounds::element_alpha(
            mesh, be.element, &a_field, &at2, &g, &g.clone(),
        )
        .unwrap();
        pass = pass && alpha.alpha_min <= 1.0 && alpha.alpha_max >= 1.0;
        if alpha.alpha_max == 1.0 {
            merged_to_one += 1;
        }
    }
    // on sin(x2) < 0 elements the tensor range stays below 1, so the merged
    // maximum is the Robin ratio itself
    pass = pass && merged_to_one > 0;
    detail.push_str(&format!("robin edges with alpha_max == 1: {merged_to_one}"));
    criterion("criterion 2 (Robin bracketing, ex41c)", pass, &detail);
}

#[test]
fn criterion_3_bracketing_singular_periodic() {
    let mut pass = true;
    let mut detail = String::new();
    for case in [&EX41B_AT1, &EX41B_AT2] {
        let t = &case.solved;
        pass = pass
            && t.report.pass
            && t.oracle.deflated
            && t.oracle.spectrum.len() == 440
            && t.report.checks == 440;
        detail.push_str(&format!(
            "{}: N={} deflated checks={}; ",
            t.label(),
            t.mesh.num_dofs(),
            t.report.checks
        ));
    }
    assert_eq!(EX41B_AT1.solved.mesh.num_dofs(), 441);
    criterion("criterion 3 (singular periodic, ex41b)", pass, &detail);
}

#[test]
fn criterion_4_bracketing_elasticity() {
    let mut pass = true;
    let mut detail = String::new();
    for case in [&EX45_CT1, &EX45_CT2] {
        let t = &case.solved;
        pass = pass && t.report.pass && t.report.checks == 882 && t.bounds.certified;
        detail.push_str(&format!(
            "{}: checks={} violations={}; ",
            t.label(),
            t.report.checks,
            t.report.violations.len()
        ));
    }
    criterion("criterion 4 (elasticity bracketing, ex45)", pass, &detail);
}

#[test]
fn criterion_5_cluster_exactness() {
    let t = &EX45_CT2.solved;
    let spectrum = &t.oracle.spectrum;
    let mut pass = spectrum.min() >= 0.7 - 1e-9 && spectrum.max() <= 1.3 + 1e-9;

    // patches strictly interior to one E-region, counted combinatorially from
    // cell-center signs on the 22x22 grid
    let mesh = &t.mesh;
    let n = 22usize;
    let h = 2.0 * PI / n as f64;
    let cell_center = |c: usize| -> f64 { -PI + (c as f64 + 0.5) * h };
    let mut dofs07 = Vec::new();
    let mut dofs13 = Vec::new();
    for j in 1..n {
        for i in 1..n {
            let mut signs = Vec::new();
            for (ci, cj) in [(i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)] {
                signs.push(cell_center(ci) * cell_center(cj) > 0.0);
            }
            let vertex = j * (n + 1) + i;
            let k = mesh.dof_of_vertex(vertex).expect("interior vertex is free");
            if signs.iter().all(|&s| !s) {
                dofs07.push(k);
            } else if signs.iter().all(|&s| s) {
                dofs13.push(k);
            }
        }
    }
    pass = pass && dofs07.len() == 200 && dofs13.len() == 200;

    let c_field = example_field("ex45-C").unwrap();
    let ct2 = example_field("ex45-Ctilde2").unwrap();
    let count07 = exact_eigenvalue_check(
        mesh, &c_field, &ct2, &RobinField::Zero, &RobinField::Zero, 0.7, &dofs07, spectrum,
    )
    .unwrap();
    let count13 = exact_eigenvalue_check(
        mesh, &c_field, &ct2, &RobinField::Zero, &RobinField::Zero, 1.3, &dofs13, spectrum,
    )
    .unwrap();
    pass = pass && count07 >= 2 * dofs07.len() && count13 >= 2 * dofs13.len();
    criterion(
        "criterion 5 (ex45 clusters at 0.7/1.3)",
        pass,
        &format!(
            "spectrum in [{:.12}, {:.12}]; multiplicities {count07} >= {} and {count13} >= {}",
            spectrum.min(),
            spectrum.max(),
            2 * dofs07.len(),
            2 * dofs13.len()
        ),
    );
}

#[test]
fn criterion_6_constant_data_sharpness() {
    let mesh = build_uniform_quad_mesh(
        Rect::square(-PI, PI),
        31,
        SideTags::all(BoundaryTag::Dirichlet),
    )
    .unwrap();
    let a_field = TensorField::constant(
        DenseSymMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap(),
    )
    .unwrap();
    let at_field = example_field("ex41-Atilde1").unwrap();
    let bounds = diffusion_bounds(
        &mesh, &a_field, &at_field, &RobinField::Zero, &RobinField::Zero, false,
    )
    .unwrap();
    let mut pass = bounds.lower.iter().all(|&v| v == 1.0) && bounds.upper.iter().all(|&v| v == 2.0);

    let plan = QuadraturePlan::uniform(&mesh);
    let a = assemble_diffusion(&mesh, &a_field, &RobinField::Zero, &plan).unwrap();
    let at = assemble_diffusion(&mesh, &at_field, &RobinField::Zero, &plan).unwrap();
    let oracle = gen_eig_dense(&a, &at, false).unwrap();
    let (min, max) = (oracle.spectrum.min(), oracle.spectrum.max());
    pass = pass && min > 1.0 && min <= 1.1 && (1.9..2.0).contains(&max);
    pass = pass && verify_bracketing(&bounds, &oracle.spectrum).unwrap().pass;
    criterion(
        "criterion 6 (constant-data sharpness)",
        pass,
        &format!("bounds exactly [1,2]; oracle extremes ({min:.6}, {max:.6}) at n=31"),
    );
}

#[test]
fn criterion_7_pcg_iteration_counts() {
    let start = Instant::now();
    let runs: [(&LazyLock<Timed>, usize); 6] = [
        (&EX41A_N11_AT1, 17),
        (&EX41A_N11_AT2, 13),
        (&EX41A_N31_AT1, 20),
        (&EX41A_N31_AT2, 15),
        (&EX45_CT1, 14),
        (&EX45_CT2, 11),
    ];
    let mut pass = true;
    let mut detail = String::new();
    let mut counts = Vec::new();
    for (case, reference) in runs {
        let t = &case.solved;
        let pcg = t.pcg.as_ref().expect("PCG attached");
        pass = pass && pcg.converged && pcg.iterations.abs_diff(reference) <= 2;
        // energy error history is non-increasing
        for w in pcg.energy_error_history.windows(2) {
            pass = pass && w[1] <= w[0] + 1e-14;
        }
        counts.push(pcg.iterations);
        detail.push_str(&format!("{}: {} (ref {reference}); ", t.label(), pcg.iterations));
    }
    // the better-matched preconditioner strictly wins each pairing
    pass = pass && counts[1] < counts[0] && counts[3] < counts[2] && counts[5] < counts[4];

    // the PCG solves themselves fit the stated budget (re-run on the
    // assembled matrices, excluding oracle time)
    let t0 = Instant::now();
    for (case, _) in runs {
        let t = &case.solved;
        let b = vec![1.0; t.matrix.order()];
        pcg_solve(&t.matrix, &t.precond_matrix, &b, 1e-9).unwrap();
    }
    let pcg_time = t0.elapsed();
    pass = pass && pcg_time <= Duration::from_secs(30);
    detail.push_str(&format!(
        "pcg-only time {:.1}s (total incl. shared solves {:.1}s)",
        pcg_time.as_secs_f64(),
        start.elapsed().as_secs_f64()
    ));
    criterion("criterion 7 (PCG iteration counts)", pass, &detail);
}

#[test]
fn criterion_8_randomized_property_suite() {
    let start = Instant::now();
    let summary = randomized_suite(50, 20260810).unwrap();
    let elapsed = start.elapsed();
    let pass = summary.failures == 0
        && summary.scaling_equivariant
        && summary.perfect_preconditioner_exact
        && elapsed <= Duration::from_secs(120);
    criterion(
        "criterion 8 (randomized suite)",
        pass,
        &format!(
            "{} cases, {} failures, scaling={}, perfect={}, {:.1}s",
            summary.cases,
            summary.failures,
            summary.scaling_equivariant,
            summary.perfect_preconditioner_exact,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_9_oracle_validity() {
    let mut pass = true;
    let mut worst = 0.0f64;
    for case in [
        &EX41A_N11_AT1,
        &EX41A_N11_AT2,
        &EX41A_N31_AT1,
        &EX41A_N31_AT2,
        &EX41B_AT1,
        &EX41B_AT2,
        &EX41C_AT1,
        &EX41C_AT2,
        &EX45_CT1,
        &EX45_CT2,
        &EX46_N10,
    ] {
        let r = case.solved.oracle.max_rel_residual;
        worst = worst.max(r);
        pass = pass && r <= 1e-8;
    }

    // gen_eig_small vs gen_eig_dense on 1000 random small pencils
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(99);
    let mut random_spd = |n: usize| -> DenseSymMatrix {
        let g: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut m = DenseSymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = if i == j { 0.4 } else { 0.0 };
                for k in 0..n {
                    s += g[i * n + k] * g[j * n + k];
                }
                m.set_sym(i, j, s);
            }
        }
        m
    };
    let mut worst_gap = 0.0f64;
    for trial in 0..1000 {
        let n = 1 + trial % 6;
        let a = random_spd(n);
        let b = random_spd(n);
        let small = gen_eig_small(&a, &b).unwrap();
        let dense = gen_eig_dense(
            &SparseSymMatrix::from_dense(&a).unwrap(),
            &SparseSymMatrix::from_dense(&b).unwrap(),
            false,
        )
        .unwrap();
        for (x, y) in small.values().iter().zip(dense.spectrum.values()) {
            let gap = (x - y).abs() / x.abs().max(1.0);
            worst_gap = worst_gap.max(gap);
        }
    }
    pass = pass && worst_gap <= 1e-10;
    criterion(
        "criterion 9 (oracle validity)",
        pass,
        &format!(
            "worst bundled-case residual {worst:.2e}; small-vs-dense agreement {worst_gap:.2e} \
             over 1000 pencils"
        ),
    );
}

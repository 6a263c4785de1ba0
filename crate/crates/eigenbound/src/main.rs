//! CLI for the eigenvalue-bound experiments.
//!
//! Exit codes: 0 verification passed, 1 verification failure, 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eigenbound::cases::{case_report, solve_case, run_all, write_case_outputs, CaseConfig, CaseId};
use eigenbound::error::Error;
use eigenbound::mesh::{parse_mesh, BoundaryTag};

#[derive(Parser)]
#[command(
    name = "eigenbound",
    version,
    about = "Guaranteed two-sided eigenvalue bounds for preconditioned FEM pencils",
    after_help = "Bundled cases:\n  \
        ex41a  diffusion, Dirichlet square, preconds Atilde1 | Atilde2 (default n=11)\n  \
        ex41b  diffusion, fully periodic square, singular pencil (default n=21)\n  \
        ex41c  diffusion, fixture triangle mesh, Robin right side (N=400)\n  \
        ex45   plane-strain elasticity, preconds Ctilde1 | Ctilde2 (default n=22)\n  \
        ex46   diffusion with sin(x1+x2) data, identity precond (default n=10)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one bundled case: bounds CSV, oracle spectrum, bracketing report
    Run {
        /// Case id (ex41a, ex41b, ex41c, ex45, ex46)
        case: String,
        /// Mesh subdivisions per axis; the case default when omitted
        #[arg(long)]
        n: Option<usize>,
        /// Preconditioner id, e.g. Atilde2 or Ctilde1
        #[arg(long)]
        precond: Option<String>,
        /// Output directory
        #[arg(long, env = "EIGENBOUND_OUT", default_value = "out")]
        out: PathBuf,
        /// Seed for randomized components (single cases are deterministic)
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every bundled case plus the randomized verification suite
    RunAll {
        #[arg(long, env = "EIGENBOUND_OUT", default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a summary of a mesh file
    MeshInfo { file: PathBuf },
}

const RANDOM_SUITE_CASES: usize = 50;

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::UnknownCase(_) | Error::InvalidParameter(_) | Error::MeshParse { .. }
    )
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if is_usage_error(e) {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn cmd_run(
    case: &str,
    n: Option<usize>,
    precond: Option<String>,
    out: &Path,
) -> ExitCode {
    let case = match CaseId::parse(case) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let with_pcg = matches!(case, CaseId::Ex41a | CaseId::Ex45);
    let config = CaseConfig {
        case,
        n,
        precond,
        with_pcg,
    };
    let solved = match solve_case(&config) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let dir = match write_case_outputs(&solved, out) {
        Ok(d) => d,
        Err(e) => return fail(&e),
    };
    let report = case_report(&solved);
    println!(
        "{}: N={} order={} mode={} certified={} checks={} -> {}",
        solved.label(),
        report.dofs,
        report.pencil_order,
        report.mode,
        report.certified,
        report.checks,
        if report.pass { "PASS" } else { "FAIL" }
    );
    if let Some(pcg) = &report.pcg {
        println!(
            "  pcg: {} iterations to reduce the energy error by 1e-9",
            pcg.iterations
        );
    }
    println!("  reports written to {}", dir.display());
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_run_all(out: &Path, seed: u64) -> ExitCode {
    let summary = match run_all(out, seed, RANDOM_SUITE_CASES) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    for c in &summary.cases {
        println!(
            "{}{} {}: N={} -> {}",
            c.case,
            c.n.map(|n| format!(" n={n}")).unwrap_or_default(),
            c.precond,
            c.dofs,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    for row in &summary.pcg_counts {
        println!(
            "pcg {} n={} {}: {} iterations (reference {})",
            row.case, row.n, row.precond, row.iterations, row.reference
        );
    }
    println!(
        "random suite: {} cases, {} failures, scaling={}, perfect-precond={}",
        summary.random_suite.cases,
        summary.random_suite.failures,
        summary.random_suite.scaling_equivariant,
        summary.random_suite.perfect_preconditioner_exact
    );
    println!(
        "summary written to {} -> {}",
        out.join("summary.json").display(),
        if summary.all_pass { "PASS" } else { "FAIL" }
    );
    if summary.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_mesh_info(file: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(2);
        }
    };
    let mesh = match parse_mesh(&text) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let (mut tris, mut quads) = (0usize, 0usize);
    for e in mesh.elements() {
        match e {
            eigenbound::mesh::Element::Tri(_) => tris += 1,
            eigenbound::mesh::Element::Quad(_) => quads += 1,
        }
    }
    println!("vertices:       {}", mesh.num_vertices());
    println!("elements:       {} ({} tri, {} quad)", mesh.num_elements(), tris, quads);
    println!("free DOFs:      {}", mesh.num_dofs());
    println!("periodic pairs: {}", mesh.num_periodic_slaves());
    println!("total area:     {:.6}", mesh.total_area());
    for tag in [
        BoundaryTag::Dirichlet,
        BoundaryTag::Robin,
        BoundaryTag::Neumann,
        BoundaryTag::Periodic,
    ] {
        let count = mesh.boundary_edges().iter().filter(|b| b.tag == tag).count();
        if count > 0 {
            println!("boundary {tag}: {count} edges");
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run {
            case,
            n,
            precond,
            out,
            seed: _,
        } => cmd_run(case, *n, precond.clone(), out),
        Command::RunAll { out, seed } => cmd_run_all(out, *seed),
        Command::MeshInfo { file } => cmd_mesh_info(file),
    }
}

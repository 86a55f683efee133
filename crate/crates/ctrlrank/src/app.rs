//! Command implementations behind the `ctrlrank` binary.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ctrlrank_core::controlize::{theorem0_pipeline, theorem8_bipartite, TwoTermControl};
use ctrlrank_core::detect::theorem9_scan;
use ctrlrank_core::generate::{generate, Family, GeneratorSpec};
use ctrlrank_core::model::apply_locals;
use ctrlrank_core::schmidt::decompose;
use ctrlrank_core::verify::{verify_certificate, VerificationReport};
use ctrlrank_core::{linalg, CMatrix, Cut, Error, MultipartiteOperator, PartyDims, Tolerances};

use crate::cert::{CertError, CertificateDocument};
use crate::uop::{format_uop, parse_uop, UopError};

#[derive(Debug, Parser)]
#[command(name = "ctrlrank", version, about = "Operator Schmidt rank and controlled forms of multipartite unitaries")]
pub struct Cli {
    /// Residual tolerance (default 1e-8; `verify` defaults to the certificate's own).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for generators and randomized sketches.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print only the essential result.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Operator Schmidt coefficients and rank across a cut.
    Rank {
        /// UOP file, `-` or omitted for stdin.
        input: Option<PathBuf>,
        /// Comma-separated parties on the left of the cut.
        #[arg(long, default_value = "0")]
        cut: String,
    },
    /// Controlled / diagonal form certificate of a rank-2 unitary.
    Controlize {
        input: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Which parties can act as controls.
    Detect { input: Option<PathBuf> },
    /// Generate an instance: rank2, vanishing, cnot, swap, xyz, scramble.
    Gen {
        family: String,
        /// Comma-separated party dimensions.
        #[arg(long, default_value = "2,2")]
        dims: String,
        #[command(flatten)]
        out: Output,
    },
    /// Re-check a certificate. With two arguments the first is the operator;
    /// otherwise the certificate's embedded operator is used.
    Verify {
        #[arg(num_args = 0..=2)]
        files: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Failure classes, mapped onto exit codes 1, 2 and 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Negative(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Negative(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NotRank2(_) | Error::RankMismatch { .. } => CliError::Negative(msg),
            Error::NumericalFailure { .. }
            | Error::ClusterCountMismatch { .. }
            | Error::NonUnitaryBlock { .. }
            | Error::NonNormal { .. }
            | Error::PreconditionFailed(_) => CliError::Numerical(msg),
            _ => CliError::Input(msg),
        }
    }
}

impl From<UopError> for CliError {
    fn from(e: UopError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CertError> for CliError {
    fn from(e: CertError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub struct Io<'a> {
    pub stdin: &'a mut dyn Read,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: &Cli, io: &mut Io) -> i32 {
    match dispatch(cli, io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn tolerances(cli: &Cli) -> Result<Tolerances, CliError> {
    let tol = match cli.tol {
        Some(t) => Tolerances::default().with_residual(t),
        None => Tolerances::default(),
    };
    tol.validate()?;
    Ok(tol)
}

fn read_text(path: Option<&Path>, stdin: &mut dyn Read) -> Result<String, CliError> {
    match path {
        Some(p) if p != Path::new("-") => fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        _ => {
            let mut s = String::new();
            stdin.read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn read_operator(path: Option<&Path>, stdin: &mut dyn Read) -> Result<MultipartiteOperator, CliError> {
    let text = read_text(path, stdin)?;
    parse_uop(&text).map_err(|e| match path {
        Some(p) if p != Path::new("-") => CliError::Input(format!("{}: {e}", p.display())),
        _ => e.into(),
    })
}

fn emit(out: &Output, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &out.output {
        Some(p) if p != Path::new("-") => fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        _ => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::Input(format!("malformed {what} `{s}`"))))
        .collect()
}

fn dispatch(cli: &Cli, io: &mut Io) -> Result<i32, CliError> {
    let tol = tolerances(cli)?;
    match &cli.command {
        Command::Rank { input, cut } => {
            let u = read_operator(input.as_deref(), io.stdin)?;
            let cut = Cut::new(&parse_list(cut, "cut")?, u.parties())?;
            let dec = decompose(&u, &cut, &tol)?;
            if cli.quiet {
                writeln!(io.stdout, "{}", dec.rank())?;
            } else {
                writeln!(io.stdout, "cut {:?}|{:?}", cut.left(), cut.right())?;
                writeln!(io.stdout, "rank {}", dec.rank())?;
                let coeffs: Vec<String> = dec.coeffs.iter().map(|c| format!("{c:.12e}")).collect();
                writeln!(io.stdout, "coefficients {}", coeffs.join(" "))?;
            }
            Ok(0)
        }
        Command::Controlize { input, out } => {
            let u = read_operator(input.as_deref(), io.stdin)?;
            let doc = if u.parties() == 2 {
                let both = theorem8_bipartite(&u, &tol, cli.seed)?;
                if !cli.quiet {
                    let t = &both.two_term;
                    writeln!(
                        io.stderr,
                        "two-term control: party {} controls ({}), residual {:.3e}",
                        t.control_party,
                        t.branch.name(),
                        t.residual
                    )?;
                }
                CertificateDocument::bipartite(&u, &both, 0)
            } else {
                CertificateDocument::new(&u, &theorem0_pipeline(&u, &tol, cli.seed)?)
            };
            if !cli.quiet {
                let c = &doc.certificate;
                let controls: Vec<usize> = c.control_parties.iter().map(|l| l.party).collect();
                writeln!(
                    io.stderr,
                    "controls {controls:?}, target {}, branch {}, residual {:.3e}",
                    c.target_party,
                    c.branch.as_deref().unwrap_or("-"),
                    c.residual
                )?;
            }
            emit(out, &doc.to_json(), io.stdout)?;
            Ok(0)
        }
        Command::Detect { input } => {
            let u = read_operator(input.as_deref(), io.stdin)?;
            let report = theorem9_scan(&u, &tol)?;
            if !cli.quiet {
                for s in &report.parties {
                    let branch = s.diagonalizer.as_ref().map_or("-", |d| d.branch.name());
                    writeln!(
                        io.stdout,
                        "party {}: schmidt_rank {} span_dim {} identity {} verdict {} branch {}",
                        s.party,
                        s.schmidt_rank,
                        s.span_dim,
                        s.contains_identity,
                        s.verdict.name(),
                        branch
                    )?;
                }
            }
            writeln!(io.stdout, "can_control {:?}", report.can_control())?;
            Ok(0)
        }
        Command::Gen { family, dims, out } => {
            let family = Family::from_name(family).ok_or_else(|| {
                let names: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
                CliError::Input(format!("unknown family `{family}` (expected one of {})", names.join(", ")))
            })?;
            let dims = PartyDims::new(parse_list(dims, "dims")?)?;
            let generated = generate(&GeneratorSpec { dims, seed: cli.seed, family })?;
            if !cli.quiet && generated.redraws > 0 {
                writeln!(io.stderr, "redraws {}", generated.redraws)?;
            }
            emit(out, &format_uop(&generated.operator), io.stdout)?;
            Ok(0)
        }
        Command::Verify { files } => {
            let (op_path, cert_path) = match files.as_slice() {
                [op, cert] => (Some(op.as_path()), Some(cert.as_path())),
                [cert] => (None, Some(cert.as_path())),
                _ => (None, None),
            };
            let doc = CertificateDocument::from_json(&read_text(cert_path, io.stdin)?)?;
            let u = match op_path {
                Some(p) => read_operator(Some(p), io.stdin)?,
                None => doc
                    .input_operator()?
                    .ok_or_else(|| CliError::Input("certificate has no embedded operator; pass the operator file".into()))?,
            };
            let mut bodies = vec![("certificate", &doc.certificate)];
            if let Some(s) = &doc.swapped {
                bodies.push(("swapped", s));
            }
            let mut passed = true;
            for (name, body) in bodies {
                let cert = body.to_certificate()?;
                let check_tol = cli.tol.map_or(cert.tolerances, |t| cert.tolerances.with_residual(t));
                let report = verify_certificate(&u, &cert, &check_tol)?;
                passed &= report.passed;
                if !cli.quiet {
                    print_report(io.stdout, name, &report)?;
                }
            }
            if let Some(t) = &doc.two_term {
                let residual = two_term_residual(&u, &t.to_two_term()?, &tol)?;
                let ok = residual <= cli.tol.unwrap_or(doc.certificate.tolerances.residual);
                passed &= ok;
                if !cli.quiet {
                    writeln!(io.stdout, "two_term residual {residual:.3e} {}", if ok { "ok" } else { "FAILED" })?;
                }
            }
            writeln!(io.stdout, "{}", if passed { "verified" } else { "verification FAILED" })?;
            Ok(if passed { 0 } else { 1 })
        }
    }
}

fn print_report(w: &mut dyn Write, name: &str, r: &VerificationReport) -> std::io::Result<()> {
    writeln!(w, "{name}:")?;
    for (k, v) in [
        ("local_unitarity", r.local_unitarity),
        ("block_structure", r.block_structure),
        ("block_mismatch", r.block_mismatch),
        ("block_unitarity", r.block_unitarity),
        ("diagonality", r.diagonality),
        ("phase_mismatch", r.phase_mismatch),
        ("unimodularity", r.unimodularity),
        ("reconstruction", r.reconstruction),
    ] {
        writeln!(w, "  {k} {v:.3e}")?;
    }
    writeln!(w, "  residual {:.3e} (tolerance {:.1e})", r.residual, r.tolerance)
}

/// `‖(⊗L) U (⊗R)† − Σ P_j ⊗ W_j‖` together with the projector identities
/// and unitarity of every local and `W_j`.
fn two_term_residual(u: &MultipartiteOperator, t: &TwoTermControl, tol: &Tolerances) -> Result<f64, CliError> {
    if u.parties() != 2 {
        return Err(CliError::Input("two-term control needs a bipartite operator".into()));
    }
    let mut lefts = vec![None, None];
    let mut rights = vec![None, None];
    for l in &t.locals {
        if l.party > 1 {
            return Err(CliError::Input(format!("two-term locals name party {}", l.party)));
        }
        lefts[l.party] = Some(l.left.clone());
        rights[l.party] = Some(l.right.clone());
    }
    // loose unitarity gate; the residual below is what counts
    let loose = tol.with_residual(1.0);
    let moved = apply_locals(u, &lefts, &rights, &loose)?;
    let form = t.controlled_form(u.dims())?;
    let [p1, p2] = &t.projectors;
    let n = p1.nrows();
    let eye = CMatrix::identity(n, n);
    let mut residual = (moved.matrix() - form).norm().max((p1 * p2).norm()).max((p1 + p2 - eye).norm());
    for m in t.locals.iter().flat_map(|l| [&l.left, &l.right]).chain(&t.unitaries) {
        residual = residual.max(linalg::unitarity_deviation_frob(m));
    }
    Ok(residual)
}

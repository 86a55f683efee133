use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use ctrlrank::cert::CertificateDocument;
use ctrlrank::uop::{format_uop, parse_uop};
use ctrlrank_core::model::is_unitary;
use ctrlrank_core::{CMatrix, MultipartiteOperator, PartyDims, Tolerances, C64};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ctrlrank"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn identity_fixture_is_unitary_rank_one() {
    let u = parse_uop(&std::fs::read_to_string(fixture("identity.uop")).unwrap()).unwrap();
    assert!(is_unitary(u.matrix(), &Tolerances::default()));
    let out = run(&["rank", fixture("identity.uop").to_str().unwrap(), "--quiet"], b"");
    assert_eq!(text(&out.stdout).trim(), "1");
}

#[test]
fn rank_of_fixtures() {
    let out = run(&["rank", fixture("swap.uop").to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("rank 4"));
    let out = run(&["rank", fixture("cnot.uop").to_str().unwrap()], b"");
    assert!(text(&out.stdout).contains("rank 2"));
    let out = run(&["rank", "--cut", "0,2", fixture("xyz.uop").to_str().unwrap(), "-q"], b"");
    assert_eq!(text(&out.stdout).trim(), "3");
}

#[test]
fn rank_output_is_stable() {
    let a = run(&["rank", fixture("cnot.uop").to_str().unwrap()], b"");
    let b = run(&["rank", fixture("cnot.uop").to_str().unwrap()], b"");
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn controlize_swap_is_negative() {
    let out = run(&["controlize", fixture("swap.uop").to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("NotRank2"));
}

#[test]
fn format_errors_exit_2_with_position() {
    let bad = "UOP 1\ndims 2 2\n1,0 0,0 0,0 0,0\n0,0 1,0 0,0 0,0\n0,0 0,0 0,0\n0,0 0,0 1,0 0,0\n";
    let out = run(&["rank"], bad.as_bytes());
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("line 5"), "{}", text(&out.stderr));
    assert_eq!(run(&["gen", "nonsense"], b"").status.code(), Some(2));
    assert_eq!(run(&["rank", "/nonexistent/file.uop"], b"").status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], b"").status.code(), Some(2));
}

#[test]
fn non_unitary_input_is_a_format_error() {
    let out = run(&["controlize"], b"UOP 1\ndims 2 2\n1,0 0,0 0,0 0,0\n0,0 1,0 0,0 0,0\n0,0 0,0 1,0 0,0\n0,0 0,0 0,0 2,0\n");
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
}

#[test]
fn detect_cnot() {
    let out = run(&["detect", fixture("cnot.uop").to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("can_control [0, 1]"));
    let out = run(&["detect", fixture("xyz.uop").to_str().unwrap(), "--quiet"], b"");
    assert_eq!(text(&out.stdout).trim(), "can_control []");
}

#[test]
fn verify_variants() {
    let dir = tempfile::tempdir().unwrap();
    let uop = dir.path().join("u.uop");
    let cert = dir.path().join("c.json");
    let (u, c) = (uop.to_str().unwrap(), cert.to_str().unwrap());
    assert!(run(&["gen", "vanishing", "--dims", "2,3,2", "--seed", "4", "-o", u], b"").status.success());
    assert!(run(&["controlize", u, "-o", c, "-q"], b"").status.success());

    assert_eq!(run(&["verify", u, c], b"").status.code(), Some(0));
    assert_eq!(run(&["verify", c], b"").status.code(), Some(0));
    assert_eq!(run(&["verify"], &std::fs::read(&cert).unwrap()).status.code(), Some(0));

    // certificate checked against a different operator
    let other = dir.path().join("v.uop");
    run(&["gen", "vanishing", "--dims", "2,3,2", "--seed", "5", "-o", other.to_str().unwrap()], b"");
    let out = run(&["verify", other.to_str().unwrap(), c], b"");
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stdout).contains("FAILED"));

    // tampered local
    let mut doc = CertificateDocument::from_json(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    doc.certificate.target.left[0][1][0] += 1e-3;
    let tampered = dir.path().join("t.json");
    std::fs::write(&tampered, doc.to_json()).unwrap();
    assert_eq!(run(&["verify", tampered.to_str().unwrap()], b"").status.code(), Some(1));

    // no embedded operator and none given
    doc.input = None;
    std::fs::write(&tampered, doc.to_json()).unwrap();
    assert_eq!(run(&["verify", tampered.to_str().unwrap()], b"").status.code(), Some(2));
    assert_eq!(run(&["verify"], b"{not json").status.code(), Some(2));
}

#[test]
fn bipartite_certificate_has_two_term_report() {
    let gen = run(&["gen", "rank2", "--dims", "3,2", "--seed", "2"], b"");
    let cert = run(&["controlize", "-q"], &gen.stdout);
    assert!(cert.status.success());
    let doc = CertificateDocument::from_json(&text(&cert.stdout)).unwrap();
    assert!(doc.two_term.is_some());
    assert_eq!(doc.swapped.unwrap().control_parties[0].party, 1);
}

#[test]
fn gen_is_repeatable() {
    let a = run(&["gen", "rank2", "--dims", "2,3,2", "--seed", "11"], b"");
    let b = run(&["gen", "rank2", "--dims", "2,3,2", "--seed", "11"], b"");
    let c = run(&["gen", "rank2", "--dims", "2,3,2", "--seed", "12"], b"");
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

proptest! {
    #[test]
    fn uop_round_trip_is_exact(
        dims in prop::sample::select(vec![vec![1], vec![2], vec![2, 2], vec![3, 1]]),
        values in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 72),
    ) {
        let dims = PartyDims::new(dims).unwrap();
        let n = dims.total();
        let m = CMatrix::from_fn(n, n, |i, j| C64::new(values[2 * (i * n + j)], values[2 * (i * n + j) + 1]));
        let u = MultipartiteOperator::new(dims, m).unwrap();
        let back = parse_uop(&format_uop(&u)).unwrap();
        for (a, b) in back.matrix().iter().zip(u.matrix().iter()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}

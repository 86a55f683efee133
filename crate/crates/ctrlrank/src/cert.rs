//! JSON certificate documents.
//!
//! Matrices are stored as arrays of rows, each row an array of `[re, im]`
//! pairs. A document embeds the operator it certifies so that `verify` can
//! run from the certificate alone.

use ctrlrank_core::controlize::{
    BipartiteControl, ControlledFormCertificate, PartyLocals, PartyRoute, PipelineBranch, PipelineTrace, QuadraticBranch,
    TwoTermControl,
};
use ctrlrank_core::simdiag::AppendixBranch;
use ctrlrank_core::{CMatrix, MultipartiteOperator, PartyDims, Tolerances, C64};
use serde::{Deserialize, Serialize};

pub type Complex = [f64; 2];
pub type Matrix = Vec<Vec<Complex>>;

#[derive(Debug, thiserror::Error)]
pub enum CertError {
    #[error("invalid certificate JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid certificate: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> CertError {
    CertError::Invalid(msg.into())
}

pub fn matrix_to_doc(m: &CMatrix) -> Matrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_doc(rows: &Matrix) -> Result<CMatrix, CertError> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(invalid("ragged matrix"));
    }
    Ok(CMatrix::from_fn(n, cols, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

fn complex_vec(v: &[C64]) -> Vec<Complex> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_complex_vec(v: &[Complex]) -> Vec<C64> {
    v.iter().map(|z| C64::new(z[0], z[1])).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalsDoc {
    pub party: usize,
    pub left: Matrix,
    pub right: Matrix,
}

impl LocalsDoc {
    fn from_locals(l: &PartyLocals) -> Self {
        LocalsDoc { party: l.party, left: matrix_to_doc(&l.left), right: matrix_to_doc(&l.right) }
    }

    fn to_locals(&self) -> Result<PartyLocals, CertError> {
        Ok(PartyLocals { party: self.party, left: matrix_from_doc(&self.left)?, right: matrix_from_doc(&self.right)? })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TolerancesDoc {
    pub rank_cut: f64,
    pub residual: f64,
    pub eig_cluster: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceDoc {
    pub schmidt_ranks: Vec<usize>,
    pub span_dims: Vec<usize>,
    pub factored_parties: Vec<usize>,
    /// `lemma2:<branch>`, `similarity`, `target` or null per party.
    pub routes: Vec<Option<String>>,
    pub vanishing_party: Option<usize>,
    pub vanishing_constant: Option<f64>,
    pub mu: Option<Vec<[Complex; 2]>>,
    pub quadratic_rows: Option<Vec<[Complex; 3]>>,
    pub sketch_attempts: usize,
}

fn route_name(r: &PartyRoute) -> String {
    match r {
        PartyRoute::Lemma2(b) => format!("lemma2:{}", b.name()),
        PartyRoute::Similarity => "similarity".into(),
        PartyRoute::Target => "target".into(),
    }
}

fn route_from_name(s: &str) -> Result<PartyRoute, CertError> {
    match s {
        "similarity" => Ok(PartyRoute::Similarity),
        "target" => Ok(PartyRoute::Target),
        _ => s
            .strip_prefix("lemma2:")
            .and_then(AppendixBranch::from_name)
            .map(PartyRoute::Lemma2)
            .ok_or_else(|| invalid(format!("unknown route `{s}`"))),
    }
}

fn pair(z: [C64; 2]) -> [Complex; 2] {
    z.map(|z| [z.re, z.im])
}

impl TraceDoc {
    fn from_trace(t: &PipelineTrace) -> Self {
        TraceDoc {
            schmidt_ranks: t.schmidt_ranks.clone(),
            span_dims: t.span_dims.clone(),
            factored_parties: t.factored_parties.clone(),
            routes: t.routes.iter().map(|r| r.as_ref().map(route_name)).collect(),
            vanishing_party: t.vanishing_party,
            vanishing_constant: t.vanishing_constant,
            mu: t.mu.as_ref().map(|m| m.iter().copied().map(pair).collect()),
            quadratic_rows: t.quadratic_rows.as_ref().map(|rows| rows.iter().map(|r| r.map(|z| [z.re, z.im])).collect()),
            sketch_attempts: t.sketch_attempts,
        }
    }

    fn to_trace(&self, branch: Option<PipelineBranch>) -> Result<PipelineTrace, CertError> {
        let c = |z: Complex| C64::new(z[0], z[1]);
        Ok(PipelineTrace {
            schmidt_ranks: self.schmidt_ranks.clone(),
            span_dims: self.span_dims.clone(),
            branch,
            factored_parties: self.factored_parties.clone(),
            routes: self.routes.iter().map(|r| r.as_deref().map(route_from_name).transpose()).collect::<Result<_, _>>()?,
            vanishing_party: self.vanishing_party,
            vanishing_constant: self.vanishing_constant,
            mu: self.mu.as_ref().map(|m| m.iter().map(|p| p.map(c)).collect()),
            quadratic_rows: self.quadratic_rows.as_ref().map(|rows| rows.iter().map(|r| r.map(c)).collect()),
            sketch_attempts: self.sketch_attempts,
        })
    }
}

/// One controlled-form certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateBody {
    pub dims: Vec<usize>,
    pub branch: Option<String>,
    pub control_parties: Vec<LocalsDoc>,
    pub target_party: usize,
    pub target: LocalsDoc,
    pub blocks: Vec<Matrix>,
    pub diagonal_phases: Vec<Complex>,
    pub residual: f64,
    pub tolerances: TolerancesDoc,
    pub trace: TraceDoc,
}

impl CertificateBody {
    pub fn from_certificate(c: &ControlledFormCertificate) -> Self {
        CertificateBody {
            dims: c.dims.dims().to_vec(),
            branch: c.trace.branch.map(|b| b.name().to_string()),
            control_parties: c.control_parties.iter().map(LocalsDoc::from_locals).collect(),
            target_party: c.target.party,
            target: LocalsDoc::from_locals(&c.target),
            blocks: c.blocks.iter().map(matrix_to_doc).collect(),
            diagonal_phases: complex_vec(&c.diagonal_phases),
            residual: c.residual,
            tolerances: TolerancesDoc {
                rank_cut: c.tolerances.rank_cut,
                residual: c.tolerances.residual,
                eig_cluster: c.tolerances.eig_cluster,
            },
            trace: TraceDoc::from_trace(&c.trace),
        }
    }

    pub fn to_certificate(&self) -> Result<ControlledFormCertificate, CertError> {
        if self.target.party != self.target_party {
            return Err(invalid("target_party disagrees with target locals"));
        }
        let branch = match &self.branch {
            Some(name) => Some(PipelineBranch::from_name(name).ok_or_else(|| invalid(format!("unknown branch `{name}`")))?),
            None => None,
        };
        let t = &self.tolerances;
        Ok(ControlledFormCertificate {
            dims: PartyDims::new(self.dims.clone()).map_err(|e| invalid(e.to_string()))?,
            control_parties: self.control_parties.iter().map(LocalsDoc::to_locals).collect::<Result<_, _>>()?,
            target: self.target.to_locals()?,
            blocks: self.blocks.iter().map(matrix_from_doc).collect::<Result<_, _>>()?,
            diagonal_phases: from_complex_vec(&self.diagonal_phases),
            residual: self.residual,
            tolerances: Tolerances::new(t.rank_cut, t.residual, t.eig_cluster).map_err(|e| invalid(e.to_string()))?,
            trace: self.trace.to_trace(branch)?,
        })
    }
}

/// Two-term control summary for bipartite inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoTermDoc {
    pub branch: String,
    pub control_party: usize,
    pub projectors: [Matrix; 2],
    pub unitaries: [Matrix; 2],
    pub locals: [LocalsDoc; 2],
    pub residual: f64,
}

impl TwoTermDoc {
    pub fn from_two_term(t: &TwoTermControl) -> Self {
        TwoTermDoc {
            branch: t.branch.name().to_string(),
            control_party: t.control_party,
            projectors: [matrix_to_doc(&t.projectors[0]), matrix_to_doc(&t.projectors[1])],
            unitaries: [matrix_to_doc(&t.unitaries[0]), matrix_to_doc(&t.unitaries[1])],
            locals: [LocalsDoc::from_locals(&t.locals[0]), LocalsDoc::from_locals(&t.locals[1])],
            residual: t.residual,
        }
    }

    pub fn to_two_term(&self) -> Result<TwoTermControl, CertError> {
        let branch = [QuadraticBranch::EigenSplit, QuadraticBranch::DiagonalSelect]
            .into_iter()
            .find(|b| b.name() == self.branch)
            .ok_or_else(|| invalid(format!("unknown two-term branch `{}`", self.branch)))?;
        Ok(TwoTermControl {
            control_party: self.control_party,
            projectors: [matrix_from_doc(&self.projectors[0])?, matrix_from_doc(&self.projectors[1])?],
            unitaries: [matrix_from_doc(&self.unitaries[0])?, matrix_from_doc(&self.unitaries[1])?],
            locals: [self.locals[0].to_locals()?, self.locals[1].to_locals()?],
            residual: self.residual,
            branch,
        })
    }
}

/// Top-level document written by `controlize`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateDocument {
    pub format: String,
    #[serde(flatten)]
    pub certificate: CertificateBody,
    /// The certified operator.
    pub input: Option<Matrix>,
    /// Bipartite inputs: the two-term control.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_term: Option<TwoTermDoc>,
    /// Bipartite inputs: the certificate with the roles of the parties exchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swapped: Option<CertificateBody>,
}

pub const FORMAT: &str = "ctrlrank-certificate/1";

impl CertificateDocument {
    pub fn new(input: &MultipartiteOperator, cert: &ControlledFormCertificate) -> Self {
        CertificateDocument {
            format: FORMAT.to_string(),
            certificate: CertificateBody::from_certificate(cert),
            input: Some(matrix_to_doc(input.matrix())),
            two_term: None,
            swapped: None,
        }
    }

    /// `out.certificates[primary]` becomes the main body and the other one
    /// goes in `swapped`.
    pub fn bipartite(input: &MultipartiteOperator, out: &BipartiteControl, primary: usize) -> Self {
        let mut doc = Self::new(input, &out.certificates[primary]);
        doc.two_term = Some(TwoTermDoc::from_two_term(&out.two_term));
        doc.swapped = Some(CertificateBody::from_certificate(&out.certificates[1 - primary]));
        doc
    }

    pub fn input_operator(&self) -> Result<Option<MultipartiteOperator>, CertError> {
        let Some(rows) = &self.input else { return Ok(None) };
        let dims = PartyDims::new(self.certificate.dims.clone()).map_err(|e| invalid(e.to_string()))?;
        MultipartiteOperator::new(dims, matrix_from_doc(rows)?).map(Some).map_err(|e| invalid(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CertError> {
        let doc: CertificateDocument = serde_json::from_str(text)?;
        if doc.format != FORMAT {
            return Err(invalid(format!("unknown format `{}`", doc.format)));
        }
        Ok(doc)
    }
}

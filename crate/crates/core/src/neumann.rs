//! Neumann series inversion `f = sum_m K^m A chi h` and the plain time
//! reversal baseline.

use serde::{Deserialize, Serialize};

use crate::elliptic::project_hd;
use crate::error::{Error, Result};
use crate::grid::{hd_norm, l2_rel_error, Region, ScalarField};
use crate::time_reversal::{ErrorOperator, TimeReversal};
use crate::wave::{BoundaryTrace, ForwardOperator, PmlProfile};

pub const DEFAULT_TOL: f64 = 0.05;
pub const DEFAULT_MAX_TERMS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxTerms,
    NormIncrease,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop(StopReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsOptions {
    /// Number of series terms, counting `A chi h` itself.
    pub max_terms: usize,
    /// Stop once a term norm falls below `tol` times the first one.
    pub tol: f64,
    /// Project every term onto `H_D(K)` (discontinuous speeds).
    pub region_k: Option<Region>,
}

impl Default for NsOptions {
    fn default() -> Self {
        Self { max_terms: DEFAULT_MAX_TERMS, tol: DEFAULT_TOL, region_k: None }
    }
}

/// Stop rule applied after each new term norm. The norm-increase rule is
/// only active for partial data.
pub fn stop_decision(term_norms: &[f64], opts: &NsOptions, partial: bool) -> Decision {
    let Some(&last) = term_norms.last() else {
        return Decision::Continue;
    };
    let m = term_norms.len() - 1;
    if partial && m >= 1 && last > term_norms[m - 1] {
        return Decision::Stop(StopReason::NormIncrease);
    }
    let first = term_norms[0];
    if first == 0.0 || last / first < opts.tol {
        return Decision::Stop(StopReason::Tolerance);
    }
    if term_norms.len() >= opts.max_terms {
        return Decision::Stop(StopReason::MaxTerms);
    }
    Decision::Continue
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    /// Partial sums `g_0, ..., g_k`.
    pub iterates: Vec<ScalarField>,
    /// `H_D` norms of the computed terms. On a norm increase the last entry
    /// belongs to the rejected term.
    pub term_norms: Vec<f64>,
    /// Relative L2 error of each iterate, when the truth is known.
    pub rel_errors: Vec<f64>,
    pub stop_reason: StopReason,
    pub k_used: usize,
}

impl ReconstructionReport {
    pub fn result(&self) -> &ScalarField {
        self.iterates.last().expect("at least one iterate")
    }

    pub fn final_rel_error(&self) -> Option<f64> {
        self.rel_errors.last().copied()
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            term_norms: self.term_norms.clone(),
            rel_errors: self.rel_errors.clone(),
            stop_reason: self.stop_reason,
            k_used: self.k_used,
            rel_error: self.final_rel_error(),
        }
    }
}

/// Serializable part of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub term_norms: Vec<f64>,
    pub rel_errors: Vec<f64>,
    pub stop_reason: StopReason,
    pub k_used: usize,
    pub rel_error: Option<f64>,
}

/// Forward and backward solvers for one speed, square and final time.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    forward: ForwardOperator,
    reverse: TimeReversal,
    t_final: f64,
}

impl Reconstructor {
    pub fn new(c: &ScalarField, omega: Region, t_final: f64, pml: &PmlProfile) -> Result<Self> {
        Ok(Self {
            forward: ForwardOperator::new(c, omega, t_final, pml)?,
            reverse: TimeReversal::new(c, omega)?,
            t_final,
        })
    }

    pub fn forward(&self) -> &ForwardOperator {
        &self.forward
    }

    pub fn omega(&self) -> &Region {
        self.forward.omega()
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// Synthetic data `Lambda f` with observation weights `mask`.
    pub fn measure(&self, f: &ScalarField, mask: &[f64]) -> Result<BoundaryTrace> {
        let mut tr = self.forward.measure(f)?;
        tr.set_mask(mask.to_vec())?;
        Ok(tr)
    }

    /// `A chi h`, the time reversal baseline.
    pub fn reconstruct_tr(&self, trace: &BoundaryTrace) -> Result<ScalarField> {
        self.reverse.apply(trace, self.t_final)
    }

    /// Partial sums of the Neumann series for `trace`, with errors against
    /// `truth` when given.
    pub fn reconstruct_ns(
        &self,
        trace: &BoundaryTrace,
        opts: &NsOptions,
        truth: Option<&ScalarField>,
    ) -> Result<ReconstructionReport> {
        if opts.max_terms < 1 {
            return Err(Error::InvalidParameter("max_terms must be at least 1".into()));
        }
        let omega = *self.omega();
        let partial = trace.mask.iter().any(|&m| m < 1.0);
        let k_op = ErrorOperator::from_parts(self.forward.clone(), self.reverse.clone(), trace.mask.clone(), self.t_final)?;
        let project = |f: ScalarField| -> Result<ScalarField> {
            match &opts.region_k {
                Some(k) => project_hd(&f, k, &omega),
                None => Ok(f),
            }
        };
        let error_of = |g: &ScalarField| -> Result<Option<f64>> { truth.map(|t| l2_rel_error(g, t, &omega)).transpose() };

        let mut term = project(self.reverse.apply(trace, self.t_final)?)?;
        let mut term_norms = vec![hd_norm(&term, &omega)?];
        let mut iterates = vec![term.clone()];
        let mut rel_errors: Vec<f64> = error_of(&term)?.into_iter().collect();
        let stop_reason = loop {
            if let Decision::Stop(reason) = stop_decision(&term_norms, opts, partial) {
                break reason;
            }
            let next = project(k_op.apply(&term)?)?;
            term_norms.push(hd_norm(&next, &omega)?);
            if partial && term_norms[term_norms.len() - 1] > term_norms[term_norms.len() - 2] {
                break StopReason::NormIncrease;
            }
            let mut g = iterates.last().unwrap().clone();
            g.axpy(1.0, &next)?;
            if let Some(e) = error_of(&g)? {
                rel_errors.push(e);
            }
            iterates.push(g);
            term = next;
        };
        let k_used = iterates.len() - 1;
        Ok(ReconstructionReport { iterates, term_norms, rel_errors, stop_reason, k_used })
    }
}

/// Neumann series reconstruction on `[0, T]`.
pub fn reconstruct_ns(
    trace: &BoundaryTrace,
    c: &ScalarField,
    omega: &Region,
    t_final: f64,
    pml: &PmlProfile,
    opts: &NsOptions,
    truth: Option<&ScalarField>,
) -> Result<ReconstructionReport> {
    Reconstructor::new(c, *omega, t_final, pml)?.reconstruct_ns(trace, opts, truth)
}

/// Time reversal baseline `A chi h`.
pub fn reconstruct_tr(trace: &BoundaryTrace, c: &ScalarField, omega: &Region, t_final: f64) -> Result<ScalarField> {
    TimeReversal::new(c, *omega)?.apply(trace, t_final)
}

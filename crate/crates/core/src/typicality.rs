//! Quantum and probabilistic mutual typicality measures.
//!
//! For two s-sets the quantum measure is
//!
//! ```text
//! M_Ψ(S₁, S₂) = ‖Ŝ₁Ψ₀ − Ŝ₂Ψ₀‖² / max(‖Ŝ₁Ψ₀‖², ‖Ŝ₂Ψ₀‖²)
//! ```
//!
//! and `m_Ψ` uses `min` in the denominator. The probabilistic analogues replace
//! the numerator by `μ(S₁ △ S₂)` and the norms by `μ(Sᵢ)`. Verdicts are gated
//! on `M` only.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::structure::{QuantumStructure, SSet};

/// Default cutoff for "M ≪ 1".
pub const DEFAULT_THRESHOLD: f64 = 0.08;
/// Below this the larger of the two norms counts as zero.
pub const DEGENERATE_NORM: f64 = 1e-14;
const CHAIN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    MutuallyTypical,
    NotTypical,
    /// Both projected norms vanish; the pair describes a dead branch.
    Degenerate,
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypicalityReport {
    pub m_big: f64,
    /// Infinite (serialized as `null`) when exactly one norm vanishes.
    #[serde(serialize_with = "finite_or_null")]
    pub m_small: f64,
    pub norm1_sq: f64,
    pub norm2_sq: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

impl TypicalityReport {
    /// Builds a report from the numerator and the two (squared) norms.
    pub fn from_parts(diff_sq: f64, norm1_sq: f64, norm2_sq: f64, threshold: f64) -> Self {
        let hi = norm1_sq.max(norm2_sq);
        let lo = norm1_sq.min(norm2_sq);
        if hi < DEGENERATE_NORM {
            return TypicalityReport {
                m_big: 0.0,
                m_small: 0.0,
                norm1_sq,
                norm2_sq,
                threshold,
                verdict: Verdict::Degenerate,
            };
        }
        let m_big = diff_sq / hi;
        let m_small = if lo > 0.0 {
            diff_sq / lo
        } else {
            f64::INFINITY
        };
        let verdict = if m_big <= threshold {
            Verdict::MutuallyTypical
        } else {
            Verdict::NotTypical
        };
        TypicalityReport {
            m_big,
            m_small,
            norm1_sq,
            norm2_sq,
            threshold,
            verdict,
        }
    }

    pub fn is_typical(&self) -> bool {
        self.verdict == Verdict::MutuallyTypical
    }

    /// `√M ≤ √m ≤ √M / (1 − √M)`, plus `m ≤ 2M` whenever `M ≤ 0.08`.
    ///
    /// Only the lower inequality is checked when `√M ≥ 1`. Degenerate reports
    /// hold vacuously.
    pub fn check_inequality_chain(&self) -> bool {
        if self.verdict == Verdict::Degenerate {
            return true;
        }
        let big = self.m_big.sqrt();
        let small = self.m_small.sqrt();
        if big > small + CHAIN_TOL {
            return false;
        }
        if big >= 1.0 {
            return true;
        }
        if small > big / (1.0 - big) + CHAIN_TOL {
            return false;
        }
        self.m_big > 0.08 || self.m_small <= 2.0 * self.m_big + CHAIN_TOL
    }

    /// `M ≤ m ≤ M / (1 − M)`: the chain satisfied by the probabilistic
    /// measures. Only the lower inequality is checked when `M ≥ 1`.
    pub fn check_measure_chain(&self) -> bool {
        if self.verdict == Verdict::Degenerate {
            return true;
        }
        if self.m_big > self.m_small + CHAIN_TOL {
            return false;
        }
        self.m_big >= 1.0 || self.m_small <= self.m_big / (1.0 - self.m_big) + CHAIN_TOL
    }
}

pub(crate) fn check_threshold(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1), got {value}")))
    }
}

/// `M_Ψ` and `m_Ψ` for the pair `(s1, s2)`.
pub fn mutual_typicality(
    structure: &QuantumStructure,
    s1: &SSet,
    s2: &SSet,
    threshold: f64,
) -> Result<TypicalityReport> {
    check_threshold("threshold", threshold)?;
    let t = s1.time.max(s2.time);
    let v1 = structure.evolve(&structure.project_at(s1)?, t)?;
    let v2 = structure.evolve(&structure.project_at(s2)?, t)?;
    let diff = structure.distance_sq(&v1, &v2)?;
    Ok(TypicalityReport::from_parts(
        diff,
        v1.norm_sq(),
        v2.norm_sq(),
        threshold,
    ))
}

/// `‖E(Δ̄) Ψ(t)‖²`: the mass outside the s-set's region at its time.
pub fn exclusion_measure(structure: &QuantumStructure, sset: &SSet) -> Result<f64> {
    structure.check_time(sset.time)?;
    let inside = structure.region_mask(&sset.region)?;
    let psi = structure.state_at(sset.time)?;
    Ok(psi
        .amplitudes
        .iter()
        .zip(inside)
        .filter(|(_, inside)| !inside)
        .map(|(z, _)| z.norm_sqr())
        .sum())
}

/// `M_μ` and `m_μ` from `μ(S₁)`, `μ(S₂)` and `μ(S₁ △ S₂)`.
pub fn mutual_typicality_measure_mu(
    mu1: f64,
    mu2: f64,
    mu_symm_diff: f64,
    threshold: f64,
) -> Result<TypicalityReport> {
    check_threshold("threshold", threshold)?;
    const TOL: f64 = 1e-12;
    for (name, v) in [("μ(S₁)", mu1), ("μ(S₂)", mu2), ("μ(S₁△S₂)", mu_symm_diff)] {
        if !(-TOL..=1.0 + TOL).contains(&v) {
            return Err(invalid(format!("{name} = {v} is not a probability")));
        }
    }
    if (mu1 - mu2).abs() > mu_symm_diff + TOL || mu_symm_diff > mu1 + mu2 + TOL {
        return Err(invalid(format!(
            "inconsistent measures: need |{mu1} − {mu2}| ≤ {mu_symm_diff} ≤ {mu1} + {mu2}"
        )));
    }
    Ok(TypicalityReport::from_parts(
        mu_symm_diff,
        mu1,
        mu2,
        threshold,
    ))
}

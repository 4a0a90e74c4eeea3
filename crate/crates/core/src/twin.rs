//! Finite Markov processes over the cell labels of a quantum structure, used
//! to audit the quantum ↔ stochastic correspondences.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scenarios::nonadditivity;
use crate::structure::{QuantumStructure, SSet};
use crate::typicality::{
    check_threshold, mutual_typicality, mutual_typicality_measure_mu, Verdict,
};

const STOCHASTIC_TOL: f64 = 1e-12;
/// Marginal agreement required for the single-set correspondence.
pub const MARGINAL_TOL: f64 = 1e-10;
/// Minimum gap between a chained quantum norm and `μ(S₁ ∩ S₂)` that counts
/// as an interference witness.
pub const INTERFERENCE_GAP: f64 = 0.1;

pub type Kernel = Vec<Vec<f64>>;

/// Initial distribution plus one row-stochastic kernel per time step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StochasticProcessSpec {
    states: Vec<String>,
    initial: Vec<f64>,
    kernels: Vec<Kernel>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

fn check_distribution(what: &str, row: &[f64]) -> Result<()> {
    if row.iter().any(|&p| !(p >= 0.0)) {
        return Err(invalid(format!("{what} has a negative entry")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(invalid(format!("{what} sums to {total}, expected 1")));
    }
    Ok(())
}

impl StochasticProcessSpec {
    pub fn new(states: Vec<String>, initial: Vec<f64>, kernels: Vec<Kernel>) -> Result<Self> {
        let n = states.len();
        if initial.len() != n {
            return Err(invalid(format!(
                "initial distribution has {} entries for {n} states",
                initial.len()
            )));
        }
        check_distribution("initial distribution", &initial)?;
        for (k, kernel) in kernels.iter().enumerate() {
            if kernel.len() != n || kernel.iter().any(|r| r.len() != n) {
                return Err(invalid(format!("kernel {k} must be {n}×{n}")));
            }
            for (i, row) in kernel.iter().enumerate() {
                check_distribution(&format!("kernel {k} row {i}"), row)?;
            }
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        if states.len() != BTreeSet::from_iter(states.iter()).len() {
            return Err(invalid("state labels must be distinct"));
        }
        Ok(StochasticProcessSpec {
            states,
            initial,
            kernels,
            index,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn final_time(&self) -> usize {
        self.kernels.len()
    }

    fn mask(&self, region: &BTreeSet<String>) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.states.len()];
        for label in region {
            let i = self
                .index
                .get(label)
                .ok_or_else(|| Error::UnknownCell(label.clone()))?;
            mask[*i] = true;
        }
        Ok(mask)
    }

    fn step(&self, dist: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; dist.len()];
        for (i, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &w) in self.kernels[k][i].iter().enumerate() {
                out[j] += p * w;
            }
        }
        out
    }

    /// Single-time distribution at `t`.
    pub fn marginal(&self, time: usize) -> Result<Vec<f64>> {
        if time > self.final_time() {
            return Err(Error::Range {
                time,
                max: self.final_time(),
            });
        }
        let mut dist = self.initial.clone();
        for k in 0..time {
            dist = self.step(&dist, k);
        }
        Ok(dist)
    }

    /// `μ(S₁ ∩ … ∩ Sₙ)` by masked forward propagation; the empty list has measure 1.
    pub fn cylinder_measure(&self, ssets: &[SSet]) -> Result<f64> {
        let mut masks: Vec<(usize, Vec<bool>)> = Vec::with_capacity(ssets.len());
        for s in ssets {
            if s.time > self.final_time() {
                return Err(Error::Range {
                    time: s.time,
                    max: self.final_time(),
                });
            }
            masks.push((s.time, self.mask(&s.region)?));
        }
        masks.sort_by_key(|(t, _)| *t);
        let horizon = masks.last().map_or(0, |(t, _)| *t);
        let mut dist = self.initial.clone();
        let mut pending = masks.iter().peekable();
        for t in 0..=horizon {
            while let Some((_, mask)) = pending.next_if(|(mt, _)| *mt == t) {
                dist.iter_mut()
                    .zip(mask)
                    .filter(|(_, keep)| !**keep)
                    .for_each(|(p, _)| *p = 0.0);
            }
            if t < horizon {
                dist = self.step(&dist, t);
            }
        }
        Ok(dist.iter().sum())
    }

    /// `μ(S₁ ∩ S̄₂) + μ(S̄₁ ∩ S₂)`
    pub fn mu_symmetric_difference(&self, s1: &SSet, s2: &SSet) -> Result<f64> {
        let all: BTreeSet<String> = self.states.iter().cloned().collect();
        let not = |s: &SSet| SSet {
            time: s.time,
            region: all.difference(&s.region).cloned().collect(),
        };
        Ok(self.cylinder_measure(&[s1.clone(), not(s2)])?
            + self.cylinder_measure(&[not(s1), s2.clone()])?)
    }

    /// `M_μ` / `m_μ` for a pair of s-sets.
    pub fn typicality(
        &self,
        s1: &SSet,
        s2: &SSet,
        threshold: f64,
    ) -> Result<crate::typicality::TypicalityReport> {
        let mu1 = self.cylinder_measure(std::slice::from_ref(s1))?;
        let mu2 = self.cylinder_measure(std::slice::from_ref(s2))?;
        let sd = self.mu_symmetric_difference(s1, s2)?;
        mutual_typicality_measure_mu(mu1, mu2, sd, threshold)
    }

    /// Per-step occupation transfer of a quantum structure,
    /// `K[a][b] = ‖E(b) U_k E(a) Ψ(k)‖² / ‖E(a) Ψ(k)‖²`. Rows of unoccupied
    /// cells copy the next marginal.
    pub fn transfer_kernels(q: &QuantumStructure) -> Result<Vec<Kernel>> {
        let labels: Vec<String> = q.cell_labels().map(str::to_owned).collect();
        let mut kernels = Vec::with_capacity(q.final_time());
        for k in 0..q.final_time() {
            let next = quantum_marginal(q, k + 1)?;
            let mut kernel = Vec::with_capacity(labels.len());
            for a in &labels {
                let start = q.project_at(&SSet::new(k, [a.as_str()]))?;
                let mass = start.norm_sq();
                if mass < 1e-14 {
                    kernel.push(next.clone());
                    continue;
                }
                let moved = q.evolve(&start, k + 1)?;
                let mut row = Vec::with_capacity(labels.len());
                for b in &labels {
                    let mut v = moved.amplitudes.clone();
                    q.apply_projector(&BTreeSet::from([b.clone()]), &mut v)?;
                    row.push(crate::structure::norm_sq(&v) / mass);
                }
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= total);
                kernel.push(row);
            }
            kernels.push(kernel);
        }
        Ok(kernels)
    }

    /// A chain whose single-time marginals equal the structure's occupations.
    /// Each step uses the occupation transfer when it reproduces the next
    /// marginal and the memoryless kernel (every row equal to the next
    /// marginal) otherwise, which is the case across interference.
    pub fn matched_to(q: &QuantumStructure) -> Result<Self> {
        let labels: Vec<String> = q.cell_labels().map(str::to_owned).collect();
        let initial = quantum_marginal(q, 0)?;
        let transfer = Self::transfer_kernels(q)?;
        let mut kernels = Vec::with_capacity(transfer.len());
        let mut dist = initial.clone();
        for (k, kernel) in transfer.into_iter().enumerate() {
            let next = quantum_marginal(q, k + 1)?;
            let pushed: Vec<f64> = (0..labels.len())
                .map(|j| dist.iter().zip(&kernel).map(|(p, row)| p * row[j]).sum())
                .collect();
            let consistent = pushed
                .iter()
                .zip(&next)
                .all(|(a, b)| (a - b).abs() <= MARGINAL_TOL);
            kernels.push(if consistent {
                kernel
            } else {
                vec![next.clone(); labels.len()]
            });
            dist = next;
        }
        Self::new(labels, initial, kernels)
    }
}

/// Cell occupations `‖E(cell)Ψ(t)‖²`, in cell order, renormalized to sum to one.
pub fn quantum_marginal(q: &QuantumStructure, time: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for label in q.cell_labels() {
        out.push(q.occupation(&SSet::new(time, [label]))?);
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalCheck {
    pub passed: bool,
    pub max_deviation: f64,
    pub witness: Option<SSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairWitness {
    pub s1: SSet,
    pub s2: SSet,
    pub m_quantum: f64,
    pub m_measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeCheck {
    pub passed: bool,
    pub threshold: f64,
    /// Pairs where both measures are at or below the threshold.
    pub pairs_in_regime: usize,
    pub disagreements: Vec<PairWitness>,
    /// Pairs typical under exactly one of the two measures. Reported, not
    /// failed: the correspondence is only claimed inside the regime.
    pub outside_regime: Vec<PairWitness>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainCheck {
    /// `max |‖T(Ŝ₁Ŝ₂)Ψ₀‖² − μ(S₁ ∩ S₂)|` over cross-time pairs.
    pub max_discrepancy: f64,
    pub interference_detected: bool,
    pub witness: Option<PairWitness>,
    /// Largest `|‖Ŝ₂(Ŝ₁+Ŝ′₁)Ψ₀‖² − ‖Ŝ₂Ŝ₁Ψ₀‖² − ‖Ŝ₂Ŝ′₁Ψ₀‖²|` over cell pairs.
    pub max_nonadditivity: f64,
    /// Largest additivity defect of the chain over the same decompositions.
    pub chain_additivity_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub passed: bool,
    pub single_set: MarginalCheck,
    pub typicality: RegimeCheck,
    pub finite_dimensional: ChainCheck,
}

/// Audits a quantum structure against a Markov chain over the same labels.
/// `pairing` lists `(quantum time, chain time)` pairs; pass the identity for
/// equal step counts.
pub fn correspondence_audit(
    q: &QuantumStructure,
    c: &StochasticProcessSpec,
    pairing: &[(usize, usize)],
    threshold: f64,
) -> Result<AuditReport> {
    check_threshold("threshold", threshold)?;
    let labels: Vec<String> = q.cell_labels().map(str::to_owned).collect();
    if labels != c.states() {
        return Err(invalid(
            "quantum structure and chain must share cell labels in order",
        ));
    }
    if pairing.is_empty() {
        return Err(invalid("time pairing is empty"));
    }
    for &(tq, tc) in pairing {
        q.check_time(tq)?;
        if tc > c.final_time() {
            return Err(Error::Range {
                time: tc,
                max: c.final_time(),
            });
        }
    }
    let to_chain = |s: &SSet| -> SSet {
        let tc = pairing
            .iter()
            .find(|(tq, _)| *tq == s.time)
            .map(|p| p.1)
            .expect("paired time");
        SSet {
            time: tc,
            region: s.region.clone(),
        }
    };

    let singles: Vec<SSet> = pairing
        .iter()
        .flat_map(|&(t, _)| labels.iter().map(move |l| SSet::new(t, [l.as_str()])))
        .collect();

    let mut single_set = MarginalCheck {
        passed: true,
        max_deviation: 0.0,
        witness: None,
    };
    for s in &singles {
        let dev = (q.occupation(s)? - c.cylinder_measure(&[to_chain(s)])?).abs();
        if dev > single_set.max_deviation {
            single_set.max_deviation = dev;
            single_set.witness = Some(s.clone());
        }
    }
    single_set.passed = single_set.max_deviation <= MARGINAL_TOL;
    if single_set.passed {
        single_set.witness = None;
    }

    let mut typicality = RegimeCheck {
        passed: true,
        threshold,
        pairs_in_regime: 0,
        disagreements: Vec::new(),
        outside_regime: Vec::new(),
    };
    let mut chain = ChainCheck {
        max_discrepancy: 0.0,
        interference_detected: false,
        witness: None,
        max_nonadditivity: 0.0,
        chain_additivity_defect: 0.0,
    };
    for (i, s1) in singles.iter().enumerate() {
        for s2 in &singles[i + 1..] {
            let quantum = mutual_typicality(q, s1, s2, threshold)?;
            let measure = c.typicality(&to_chain(s1), &to_chain(s2), threshold)?;
            let witness = PairWitness {
                s1: s1.clone(),
                s2: s2.clone(),
                m_quantum: quantum.m_big,
                m_measure: measure.m_big,
            };
            if quantum.verdict == Verdict::Degenerate || measure.verdict == Verdict::Degenerate {
                continue;
            }
            match (quantum.m_big <= threshold, measure.m_big <= threshold) {
                (true, true) => {
                    typicality.pairs_in_regime += 1;
                    if quantum.verdict != measure.verdict {
                        typicality.disagreements.push(witness);
                    }
                }
                (false, false) => {}
                _ => typicality.outside_regime.push(witness),
            }

            if s1.time == s2.time {
                continue;
            }
            let quantum_joint = q.chain_project(&[s1.clone(), s2.clone()])?.norm_sq();
            let joint = c.cylinder_measure(&[to_chain(s1), to_chain(s2)])?;
            let gap = (quantum_joint - joint).abs();
            if gap > chain.max_discrepancy {
                chain.max_discrepancy = gap;
                chain.witness = Some(PairWitness {
                    s1: s1.clone(),
                    s2: s2.clone(),
                    m_quantum: quantum_joint,
                    m_measure: joint,
                });
            }
        }
    }
    chain.interference_detected = chain.max_discrepancy > INTERFERENCE_GAP;

    // Split each earlier single-cell s-set against every other cell at the
    // same time and compare the union with the sum of the parts.
    for &(t1, _) in pairing {
        for &(t2, _) in pairing.iter().filter(|(t, _)| *t > t1) {
            for (a, la) in labels.iter().enumerate() {
                for lb in &labels[a + 1..] {
                    for l2 in &labels {
                        let (s1, s1p, s2) = (
                            SSet::new(t1, [la.as_str()]),
                            SSet::new(t1, [lb.as_str()]),
                            SSet::new(t2, [l2.as_str()]),
                        );
                        let w = nonadditivity(q, &s1, &s1p, &s2)?;
                        chain.max_nonadditivity =
                            chain.max_nonadditivity.max(w.interference().abs());
                        let union = SSet::new(t1, [la.as_str(), lb.as_str()]);
                        let whole = c.cylinder_measure(&[to_chain(&union), to_chain(&s2)])?;
                        let parts = c.cylinder_measure(&[to_chain(&s1), to_chain(&s2)])?
                            + c.cylinder_measure(&[to_chain(&s1p), to_chain(&s2)])?;
                        chain.chain_additivity_defect =
                            chain.chain_additivity_defect.max((whole - parts).abs());
                    }
                }
            }
        }
    }

    typicality.passed = typicality.disagreements.is_empty();
    Ok(AuditReport {
        passed: single_set.passed && typicality.passed,
        single_set,
        typicality,
        finite_dimensional: chain,
    })
}

/// `(t, t)` for every time index of the structure.
pub fn identity_pairing(q: &QuantumStructure) -> Vec<(usize, usize)> {
    (0..=q.final_time()).map(|t| (t, t)).collect()
}

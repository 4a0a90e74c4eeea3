//! Statistical experiments as typicality statements.
//!
//! `N` identical systems are each measured with outcome probabilities `p_s`.
//! An outcome sequence is close to random when its quadratic deviation
//! `δ = Σ_s (f_s − p_s)²` from the expected frequencies stays below `ε`. The
//! mass of the non-typical sequences, `Σ_{δ ≥ ε} Π p_{sᵢ}`, is bounded by
//! `1/(εN)`; this module computes it exactly, either by enumerating all `n^N`
//! sequences or by summing over frequency-count vectors with multinomial
//! weights, and builds the equivalent quantum structure whose final cells are
//! the sequence supports.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::Num;
use crate::structure::{QuantumStructure, SSet, Step};

/// Largest `n^N` enumerated sequence by sequence.
pub const ENUMERATION_LIMIT: u64 = 1 << 20;
/// Largest number of count vectors aggregated.
pub const AGGREGATION_LIMIT: u64 = 50_000_000;
/// Label of the pre-measurement cell of a measurement chain.
pub const READY: &str = "ready";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub probs: Vec<f64>,
    /// `N`
    pub repetitions: usize,
    pub epsilon: f64,
}

impl ExperimentSpec {
    pub fn new(probs: Vec<f64>, repetitions: usize, epsilon: f64) -> Result<Self> {
        let spec = ExperimentSpec {
            probs,
            repetitions,
            epsilon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn outcomes(&self) -> usize {
        self.probs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.is_empty() {
            return Err(invalid("at least one outcome is required"));
        }
        if self.probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("probabilities must be nonnegative"));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("probabilities sum to {total}, expected 1")));
        }
        if self.repetitions == 0 {
            return Err(invalid("N must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("ε must be positive"));
        }
        Ok(())
    }

    /// `n^N`, or `None` on overflow.
    pub fn sequence_count(&self) -> Option<u64> {
        (self.outcomes() as u64).checked_pow(u32::try_from(self.repetitions).ok()?)
    }

    /// `1/(εN)`
    pub fn bound(&self) -> f64 {
        1.0 / (self.epsilon * self.repetitions as f64)
    }

    /// `Σ p_s(1 − p_s)/(εN)`: the Markov bound on `P(δ ≥ ε)` from `E[δ]`.
    pub fn markov_bound(&self) -> f64 {
        self.probs.iter().map(|p| p * (1.0 - p)).sum::<f64>() * self.bound()
    }
}

fn check_outcomes(sequence: &[usize], n: usize) -> Result<()> {
    if sequence.is_empty() {
        return Err(invalid("outcome sequence is empty"));
    }
    match sequence.iter().find(|&&s| s >= n) {
        Some(s) => Err(invalid(format!("outcome {s} out of range 0..{n}"))),
        None => Ok(()),
    }
}

/// Relative frequency of outcome `s` in `sequence`.
pub fn frequency(s: usize, sequence: &[usize]) -> Result<f64> {
    if sequence.is_empty() {
        return Err(invalid("outcome sequence is empty"));
    }
    let hits = sequence.iter().filter(|&&x| x == s).count();
    Ok(hits as f64 / sequence.len() as f64)
}

/// `δ = Σ_s (f_s − p_s)²`
pub fn deviation(sequence: &[usize], probs: &[f64]) -> Result<f64> {
    check_outcomes(sequence, probs.len())?;
    let mut counts = vec![0usize; probs.len()];
    for &s in sequence {
        counts[s] += 1;
    }
    Ok(deviation_from_counts(&counts, probs))
}

/// `δ` from a frequency-count vector. Every path through this module
/// evaluates `δ` here so that all of them agree on boundary sequences.
pub fn deviation_from_counts(counts: &[usize], probs: &[f64]) -> f64 {
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let f = c as f64 / total as f64;
            (f - p) * (f - p)
        })
        .sum()
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.carry += (self.total - t) + x;
        } else {
            self.carry += (x - t) + self.total;
        }
        self.total = t;
    }

    fn value(&self) -> f64 {
        self.total + self.carry
    }
}

/// Visits every outcome sequence in lexicographic order with its count
/// vector and probability.
fn for_each_sequence(spec: &ExperimentSpec, mut visit: impl FnMut(&[usize], &[usize], f64)) {
    let n = spec.outcomes();
    let len = spec.repetitions;
    let mut seq = vec![0usize; len];
    let mut counts = vec![0usize; n];
    counts[0] = len;
    'outer: loop {
        let weight: f64 = seq.iter().map(|&s| spec.probs[s]).product();
        visit(&seq, &counts, weight);
        for k in (0..len).rev() {
            counts[seq[k]] -= 1;
            seq[k] += 1;
            if seq[k] < n {
                counts[seq[k]] += 1;
                continue 'outer;
            }
            seq[k] = 0;
            counts[0] += 1;
        }
        break;
    }
}

/// Tail mass by enumerating all `n^N` sequences.
pub fn tail_mass_by_enumeration(spec: &ExperimentSpec) -> Result<f64> {
    spec.validate()?;
    match spec.sequence_count() {
        Some(count) if count <= ENUMERATION_LIMIT => {}
        _ => {
            return Err(Error::Resource(format!(
                "{}^{} sequences exceed the enumeration limit",
                spec.outcomes(),
                spec.repetitions
            )))
        }
    }
    let mut sum = Sum::default();
    for_each_sequence(spec, |_, counts, weight| {
        if deviation_from_counts(counts, &spec.probs) >= spec.epsilon {
            sum.add(weight);
        }
    });
    Ok(sum.value())
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `N! / Π cᵢ!`, exact through `u128` when it fits.
fn multinomial(counts: &[usize]) -> f64 {
    let mut remaining = counts.iter().sum::<usize>() as u64;
    let mut exact: Option<u128> = Some(1);
    for &c in counts {
        exact = exact.and_then(|acc| acc.checked_mul(binomial_u128(remaining, c as u64)?));
        remaining -= c as u64;
    }
    match exact {
        Some(v) => v as f64,
        None => {
            let total = counts.iter().sum::<usize>();
            (ln_factorial(total) - counts.iter().map(|&c| ln_factorial(c)).sum::<f64>()).exp()
        }
    }
}

/// Number of count vectors, `C(N + n − 1, n − 1)`, or `None` on overflow.
fn composition_count(n: usize, len: usize) -> Option<u128> {
    binomial_u128((len + n - 1) as u64, (n - 1) as u64)
}

/// Tail mass by summing multinomial weights over frequency-count vectors.
pub fn tail_mass_by_counts(spec: &ExperimentSpec) -> Result<f64> {
    spec.validate()?;
    let n = spec.outcomes();
    let len = spec.repetitions;
    match composition_count(n, len) {
        Some(c) if c <= u128::from(AGGREGATION_LIMIT) => {}
        _ => {
            return Err(Error::Resource(format!(
                "count vectors for n={n}, N={len} exceed the aggregation limit"
            )))
        }
    }
    let mut sum = Sum::default();
    let mut counts = vec![0usize; n];
    visit_compositions(&mut counts, 0, len, &mut |counts| {
        if deviation_from_counts(counts, &spec.probs) >= spec.epsilon {
            let weight = counts
                .iter()
                .zip(&spec.probs)
                .map(|(&c, &p)| p.powi(c as i32))
                .product::<f64>();
            sum.add(multinomial(counts) * weight);
        }
    });
    Ok(sum.value())
}

fn visit_compositions(
    counts: &mut [usize],
    slot: usize,
    left: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if slot + 1 == counts.len() {
        counts[slot] = left;
        f(counts);
        return;
    }
    for c in (0..=left).rev() {
        counts[slot] = c;
        visit_compositions(counts, slot + 1, left - c, f);
    }
}

/// Exact `‖E(Δ̄_N^ε) Ψ(t₂)‖²`: enumeration up to `2²⁰` sequences, count
/// vectors beyond.
pub fn typical_set_complement_mass(spec: &ExperimentSpec) -> Result<f64> {
    spec.validate()?;
    match spec.sequence_count() {
        Some(count) if count <= ENUMERATION_LIMIT => tail_mass_by_enumeration(spec),
        _ => tail_mass_by_counts(spec),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub n: usize,
    #[serde(rename = "N")]
    pub repetitions: usize,
    pub epsilon: f64,
    pub mass: f64,
    pub bound: f64,
    pub markov_bound: f64,
    pub holds: bool,
}

impl TailReport {
    pub const CSV_HEADER: &'static str = "n,N,eps,mass,bound,holds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n,
            self.repetitions,
            Num(self.epsilon),
            Num(self.mass),
            Num(self.bound),
            self.holds
        )
    }
}

/// Tail mass with both bounds; `holds` is `mass < 1/(εN)` and
/// `mass ≤ Σp(1−p)/(εN)`.
pub fn tail_report(spec: &ExperimentSpec) -> Result<TailReport> {
    let mass = typical_set_complement_mass(spec)?;
    let bound = spec.bound();
    let markov_bound = spec.markov_bound();
    Ok(TailReport {
        n: spec.outcomes(),
        repetitions: spec.repetitions,
        epsilon: spec.epsilon,
        mass,
        bound,
        markov_bound,
        holds: mass < bound && mass <= markov_bound * (1.0 + 1e-12),
    })
}

/// Repetition counts and cutoffs covered by [`bound_sweep`].
pub const SWEEP_EPSILONS: [f64; 6] = [0.02, 0.05, 0.1, 0.125, 0.25, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub draw: usize,
    pub probs: Vec<f64>,
    #[serde(flatten)]
    pub report: TailReport,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "n,N,eps,mass,bound,holds,draw,p";

    pub fn csv_row(&self) -> String {
        let p: Vec<String> = self.probs.iter().map(|&x| Num(x).to_string()).collect();
        format!("{},{},{}", self.report.csv_row(), self.draw, p.join(";"))
    }
}

/// Tail reports for `n ∈ outcomes`, `N ∈ 1..=max_repetitions`, every cutoff in
/// [`SWEEP_EPSILONS`] and `draws` seeded random `p` per `n`. Rows are ordered by
/// `(n, draw, N, ε)`.
pub fn bound_sweep(
    outcomes: &[usize],
    max_repetitions: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rng = crate::random::rng(seed);
    let mut rows = Vec::new();
    let mut outcomes = outcomes.to_vec();
    outcomes.sort_unstable();
    for &n in &outcomes {
        for draw in 0..draws {
            let probs = crate::random::random_probs(n, &mut rng);
            for len in 1..=max_repetitions {
                for eps in SWEEP_EPSILONS {
                    let spec = ExperimentSpec::new(probs.clone(), len, eps)?;
                    rows.push(SweepRow {
                        draw,
                        probs: probs.clone(),
                        report: tail_report(&spec)?,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Cell label of an outcome sequence.
pub fn sequence_label(sequence: &[usize], n: usize) -> String {
    if n <= 10 {
        return sequence
            .iter()
            .map(|&s| char::from_digit(s as u32, 10).expect("outcome below 10"))
            .collect();
    }
    sequence
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(".")
}

/// Two-time structure for `N` measured systems. Time 0 holds the laboratory
/// in the `ready` cell; one step (a Householder reflection) produces
/// `Σ Π √p_{sᵢ} |s₁…s_N⟩` at time 1, one cell per outcome sequence.
pub fn build_measurement_chain(spec: &ExperimentSpec) -> Result<QuantumStructure> {
    spec.validate()?;
    let count = spec
        .sequence_count()
        .filter(|&c| c <= ENUMERATION_LIMIT)
        .ok_or_else(|| {
            Error::Resource(format!(
                "{}^{} outcome sequences exceed the chain dimension limit",
                spec.outcomes(),
                spec.repetitions
            ))
        })? as usize;
    let dim = count + 1;
    let amps: Vec<f64> = spec.probs.iter().map(|p| p.sqrt()).collect();
    let mut target = Array1::<C64>::zeros(dim);
    let mut cells = IndexMap::with_capacity(dim);
    cells.insert(READY.to_owned(), vec![0]);
    let mut index = 1;
    for_each_sequence(spec, |seq, _, _| {
        target[index] = C64::new(seq.iter().map(|&s| amps[s]).product(), 0.0);
        cells.insert(sequence_label(seq, spec.outcomes()), vec![index]);
        index += 1;
    });
    // Renormalize away the rounding in the products.
    let norm = crate::structure::norm_sq(&target).sqrt();
    target.mapv_inplace(|z| z / norm);
    let mut psi0 = Array1::<C64>::zeros(dim);
    psi0[0] = C64::new(1.0, 0.0);
    QuantumStructure::new(psi0, vec![Step::reflection_from_origin(&target)?], cells)
}

/// `(1, Δ_N^ε)`: the sequences with `δ < ε`, on a measurement chain.
pub fn typical_sset(spec: &ExperimentSpec) -> SSet {
    let mut region = BTreeSet::new();
    for_each_sequence(spec, |seq, counts, _| {
        if deviation_from_counts(counts, &spec.probs) < spec.epsilon {
            region.insert(sequence_label(seq, spec.outcomes()));
        }
    });
    SSet { time: 1, region }
}

/// Expected per-outcome counts `N·p_s`.
pub fn born_frequency_report(spec: &ExperimentSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(spec
        .probs
        .iter()
        .map(|p| p * spec.repetitions as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typicality::exclusion_measure;

    fn half(n_rep: usize, eps: f64) -> ExperimentSpec {
        ExperimentSpec::new(vec![0.5, 0.5], n_rep, eps).unwrap()
    }

    #[test]
    fn frequencies() {
        assert_eq!(frequency(1, &[1, 1, 1, 1]).unwrap(), 1.0);
        assert_eq!(frequency(0, &[0, 1, 0, 1]).unwrap(), 0.5);
        let seq = [2, 0, 1, 2, 2];
        let total: f64 = (0..3).map(|s| frequency(s, &seq).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!(frequency(0, &[]).is_err());
    }

    #[test]
    fn deviations() {
        assert_eq!(deviation(&[0, 1, 0, 1], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(deviation(&[0; 7], &[0.5, 0.5]).unwrap(), 0.5);
        assert_eq!(deviation(&[0, 0, 0, 1], &[0.5, 0.5]).unwrap(), 0.125);
        assert!(deviation(&[0, 2], &[0.5, 0.5]).is_err());
        assert!(deviation(&[], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn binomial_tail_point() {
        // 2·Σ_{k≤4} C(16,k) = 2·(1+16+120+560+1820)
        let expected = 5034.0 / 65536.0;
        let spec = half(16, 0.125);
        assert!((tail_mass_by_enumeration(&spec).unwrap() - expected).abs() < 1e-12);
        assert!((tail_mass_by_counts(&spec).unwrap() - expected).abs() < 1e-12);
        let r = tail_report(&spec).unwrap();
        assert_eq!(r.bound, 0.5);
        assert!(r.holds);
    }

    #[test]
    fn tail_edge_cases() {
        assert_eq!(typical_set_complement_mass(&half(5, 3.0)).unwrap(), 0.0);
        let one = half(1, 0.4);
        assert_eq!(typical_set_complement_mass(&one).unwrap(), 1.0);
        assert_eq!(one.bound(), 2.5);
        let single = ExperimentSpec::new(vec![1.0], 4, 0.01).unwrap();
        assert_eq!(typical_set_complement_mass(&single).unwrap(), 0.0);
    }

    #[test]
    fn counts_path_handles_large_n() {
        let spec = ExperimentSpec::new(vec![0.2, 0.3, 0.5], 200, 0.01).unwrap();
        let mass = typical_set_complement_mass(&spec).unwrap();
        assert!(mass < spec.markov_bound());
        assert!(mass < spec.bound());
    }

    #[test]
    fn multinomial_fallback_is_close() {
        let exact = multinomial(&[3, 4, 5]);
        assert_eq!(exact, 27720.0);
        let big = multinomial(&[60, 60, 60]);
        let ln = ln_factorial(180) - 3.0 * ln_factorial(60);
        assert!((big.ln() - ln).abs() < 1e-9);
    }

    #[test]
    fn resource_guards() {
        let spec = half(100_000, 0.1);
        assert!(matches!(
            build_measurement_chain(&spec),
            Err(Error::Resource(_))
        ));
        let wide = ExperimentSpec::new(vec![0.1; 10], 40, 0.1).unwrap();
        assert!(matches!(
            typical_set_complement_mass(&wide),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn chain_occupations() {
        let spec = ExperimentSpec::new(vec![0.36, 0.64], 1, 0.1).unwrap();
        let q = build_measurement_chain(&spec).unwrap();
        assert!((q.occupation(&SSet::new(1, ["0"])).unwrap() - 0.36).abs() < 1e-12);
        assert!((q.occupation(&SSet::new(1, ["1"])).unwrap() - 0.64).abs() < 1e-12);
        assert!(q.occupation(&SSet::new(1, [READY])).unwrap() < 1e-24);
    }

    #[test]
    fn chain_matches_enumeration() {
        let spec = half(10, 0.1);
        let q = build_measurement_chain(&spec).unwrap();
        let quantum = exclusion_measure(&q, &typical_sset(&spec)).unwrap();
        let direct = typical_set_complement_mass(&spec).unwrap();
        assert!((quantum - direct).abs() < 1e-10);
    }

    #[test]
    fn single_outcome_chain() {
        let spec = ExperimentSpec::new(vec![1.0], 3, 0.2).unwrap();
        let q = build_measurement_chain(&spec).unwrap();
        assert_eq!(q.dim(), 2);
        assert!((q.occupation(&SSet::new(1, ["000"])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn born_counts() {
        assert_eq!(
            born_frequency_report(&half(100, 0.1)).unwrap(),
            vec![50.0, 50.0]
        );
        let spec = ExperimentSpec::new(vec![0.36, 0.64], 25, 0.1).unwrap();
        let counts = born_frequency_report(&spec).unwrap();
        assert!((counts[0] - 9.0).abs() < 1e-12 && (counts[1] - 16.0).abs() < 1e-12);
        let sure = ExperimentSpec::new(vec![1.0, 0.0], 7, 0.1).unwrap();
        assert_eq!(born_frequency_report(&sure).unwrap(), vec![7.0, 0.0]);
    }

    #[test]
    fn spec_validation() {
        assert!(ExperimentSpec::new(vec![0.5, 0.6], 3, 0.1).is_err());
        assert!(ExperimentSpec::new(vec![0.5, 0.5], 0, 0.1).is_err());
        assert!(ExperimentSpec::new(vec![0.5, 0.5], 3, 0.0).is_err());
        assert!(ExperimentSpec::new(vec![1.5, -0.5], 3, 0.1).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(sequence_label(&[0, 1, 1], 2), "011");
        assert_eq!(sequence_label(&[10, 3], 12), "10.3");
    }
}

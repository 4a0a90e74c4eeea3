//! Finite-dimensional quantum structures.
//!
//! A [`QuantumStructure`] bundles an initial state, a schedule of step
//! unitaries (step `k` carries the state from time index `k` to `k + 1`) and
//! a projection-valued measure given as a labeled partition of the
//! computational basis. Everything downstream consumes the Heisenberg
//! projected vectors `U†(t) E(Δ) U(t) Ψ₀` computed here.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexMap;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Maximum deviation of `U†U` from the identity accepted for a schedule step.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Maximum deviation of `‖Ψ₀‖²` from one.
pub const NORM_TOL: f64 = 1e-12;

/// Squared Euclidean norm.
pub fn norm_sq(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `⟨a, b⟩`, antilinear in the first argument.
pub fn inner(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// One evolution step of the schedule.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Dense(Array2<C64>),
    /// Householder reflection `I − 2 w w† / (w† w)`. Self-adjoint and unitary
    /// by construction; applying it costs O(dim), which keeps very large but
    /// structurally simple schedules (one-column splittings) tractable.
    Reflection(Array1<C64>),
}

impl Step {
    /// The reflection sending basis vector `e₀` to the unit vector `target`.
    /// Requires `target[0]` to be real.
    pub fn reflection_from_origin(target: &Array1<C64>) -> Result<Step> {
        if target.is_empty() {
            return Err(invalid("reflection target is empty"));
        }
        if (norm_sq(target) - 1.0).abs() > NORM_TOL {
            return Err(invalid("reflection target must have unit norm"));
        }
        if target[0].im.abs() > NORM_TOL {
            return Err(invalid("reflection target must have a real first entry"));
        }
        let mut w = target.mapv(|z| -z);
        w[0] += C64::new(1.0, 0.0);
        Ok(Step::Reflection(w))
    }

    pub fn dim(&self) -> usize {
        match self {
            Step::Dense(m) => m.nrows(),
            Step::Reflection(w) => w.len(),
        }
    }

    pub fn apply(&self, v: &Array1<C64>) -> Array1<C64> {
        match self {
            Step::Dense(m) => m.dot(v),
            Step::Reflection(w) => reflect(w, v),
        }
    }

    pub fn apply_adjoint(&self, v: &Array1<C64>) -> Array1<C64> {
        match self {
            Step::Dense(m) => {
                let n = m.ncols();
                let mut out = Array1::<C64>::zeros(n);
                for ((i, j), z) in m.indexed_iter() {
                    out[j] += z.conj() * v[i];
                }
                out
            }
            Step::Reflection(w) => reflect(w, v),
        }
    }

    /// `max |U†U − I|` over all entries; zero for reflections.
    pub fn unitarity_defect(&self) -> f64 {
        match self {
            Step::Dense(m) => {
                let gram = m.t().mapv(|z| z.conj()).dot(m);
                gram.indexed_iter()
                    .map(|((i, j), z)| {
                        let id = if i == j { 1.0 } else { 0.0 };
                        (z - C64::new(id, 0.0)).norm()
                    })
                    .fold(0.0, f64::max)
            }
            Step::Reflection(_) => 0.0,
        }
    }
}

fn reflect(w: &Array1<C64>, v: &Array1<C64>) -> Array1<C64> {
    let ww = norm_sq(w);
    if ww == 0.0 {
        return v.clone();
    }
    let coeff = inner(w, v) * (2.0 / ww);
    let mut out = v.clone();
    out.zip_mut_with(w, |o, wi| *o -= wi * coeff);
    out
}

/// A single-time cylinder set `(t, Δ)`: trajectories located in the cells of
/// `region` at time index `time`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SSet {
    pub time: usize,
    pub region: BTreeSet<String>,
}

impl SSet {
    pub fn new<I, S>(time: usize, cells: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SSet {
            time,
            region: cells.into_iter().map(Into::into).collect(),
        }
    }

    /// Parses `T:LABEL[,LABEL...]`; an empty label list (`T:`) is the empty region.
    pub fn parse(s: &str) -> Result<Self> {
        let (time, cells) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("s-set `{s}` must look like TIME:LABEL[,LABEL]")))?;
        let time = time
            .trim()
            .parse::<usize>()
            .map_err(|_| invalid(format!("bad time index in s-set `{s}`")))?;
        let region = cells
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_owned)
            .collect();
        Ok(SSet { time, region })
    }
}

impl fmt::Display for SSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<&str> = self.region.iter().map(String::as_str).collect();
        write!(f, "{}:{}", self.time, cells.join(","))
    }
}

/// A vector in the structure's Hilbert space tagged with the time index at
/// which it is expressed (Schrödinger picture at that time).
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedVector {
    pub amplitudes: Array1<C64>,
    pub at_time: usize,
}

impl ProjectedVector {
    pub fn new(amplitudes: Array1<C64>, at_time: usize) -> Self {
        ProjectedVector {
            amplitudes,
            at_time,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.amplitudes)
    }

    /// Largest entrywise modulus of `self − other`; both must share a time.
    pub fn max_abs_diff(&self, other: &ProjectedVector) -> f64 {
        assert_eq!(
            self.at_time, other.at_time,
            "vectors expressed at different times"
        );
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `(H, E(·), U(t), Ψ₀)` over a finite labeled basis partition.
#[derive(Clone, Debug)]
pub struct QuantumStructure {
    psi0: Array1<C64>,
    steps: Vec<Step>,
    cells: IndexMap<String, Vec<usize>>,
    cell_index: HashMap<String, usize>,
}

impl QuantumStructure {
    pub fn new(
        psi0: Array1<C64>,
        steps: Vec<Step>,
        cells: IndexMap<String, Vec<usize>>,
    ) -> Result<Self> {
        let dim = psi0.len();
        if dim == 0 {
            return Err(invalid("Hilbert space dimension must be positive"));
        }
        let n = norm_sq(&psi0);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(invalid(format!("initial state has norm² {n}, expected 1")));
        }
        for (k, step) in steps.iter().enumerate() {
            if step.dim() != dim {
                return Err(invalid(format!(
                    "step {k} acts on dimension {}, expected {dim}",
                    step.dim()
                )));
            }
            if let Step::Dense(m) = step {
                if m.ncols() != dim {
                    return Err(invalid(format!("step {k} is not square")));
                }
            }
            let defect = step.unitarity_defect();
            if defect > UNITARITY_TOL {
                return Err(invalid(format!(
                    "step {k} is not unitary (max |U†U − I| = {defect:e})"
                )));
            }
        }
        let mut owner = vec![None; dim];
        for (label, indices) in &cells {
            for &i in indices {
                if i >= dim {
                    return Err(invalid(format!(
                        "cell `{label}` references index {i} ≥ {dim}"
                    )));
                }
                if let Some(prev) = owner[i].replace(label) {
                    return Err(invalid(format!(
                        "basis index {i} belongs to both `{prev}` and `{label}`"
                    )));
                }
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(invalid(format!(
                "basis index {i} is not covered by any cell"
            )));
        }
        let cell_index = cells
            .keys()
            .enumerate()
            .map(|(k, label)| (label.clone(), k))
            .collect();
        Ok(QuantumStructure {
            psi0,
            steps,
            cells,
            cell_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.psi0.len()
    }

    pub fn psi0(&self) -> &Array1<C64> {
        &self.psi0
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn cells(&self) -> &IndexMap<String, Vec<usize>> {
        &self.cells
    }

    pub fn cell_labels(&self) -> impl Iterator<Item = &str> {
        self.cells.keys().map(String::as_str)
    }

    pub fn has_cell(&self, label: &str) -> bool {
        self.cell_index.contains_key(label)
    }

    /// Last valid time index.
    pub fn final_time(&self) -> usize {
        self.steps.len()
    }

    pub fn check_time(&self, time: usize) -> Result<()> {
        if time > self.final_time() {
            Err(Error::Range {
                time,
                max: self.final_time(),
            })
        } else {
            Ok(())
        }
    }

    pub fn check_sset(&self, sset: &SSet) -> Result<()> {
        self.check_time(sset.time)?;
        self.check_region(&sset.region)
    }

    pub fn check_region(&self, region: &BTreeSet<String>) -> Result<()> {
        match region.iter().find(|c| !self.has_cell(c)) {
            Some(c) => Err(Error::UnknownCell(c.clone())),
            None => Ok(()),
        }
    }

    /// All cell labels not in `region`.
    pub fn complement(&self, region: &BTreeSet<String>) -> BTreeSet<String> {
        self.cells
            .keys()
            .filter(|c| !region.contains(*c))
            .cloned()
            .collect()
    }

    pub fn all_cells(&self) -> BTreeSet<String> {
        self.cells.keys().cloned().collect()
    }

    /// Basis mask of `E(region)`.
    pub fn region_mask(&self, region: &BTreeSet<String>) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.dim()];
        for label in region {
            let indices = self
                .cells
                .get(label)
                .ok_or_else(|| Error::UnknownCell(label.clone()))?;
            for &i in indices {
                mask[i] = true;
            }
        }
        Ok(mask)
    }

    /// `E(region)` applied in place.
    pub fn apply_projector(&self, region: &BTreeSet<String>, v: &mut Array1<C64>) -> Result<()> {
        let mask = self.region_mask(region)?;
        v.iter_mut()
            .zip(mask)
            .filter(|(_, keep)| !keep)
            .for_each(|(z, _)| *z = C64::new(0.0, 0.0));
        Ok(())
    }

    pub fn initial(&self) -> ProjectedVector {
        ProjectedVector::new(self.psi0.clone(), 0)
    }

    /// Moves `state` to `to_time`, applying forward steps or their adjoints.
    pub fn evolve(&self, state: &ProjectedVector, to_time: usize) -> Result<ProjectedVector> {
        self.check_time(state.at_time)?;
        self.check_time(to_time)?;
        if state.amplitudes.len() != self.dim() {
            return Err(invalid("state dimension does not match the structure"));
        }
        let mut v = state.amplitudes.clone();
        if to_time >= state.at_time {
            for step in &self.steps[state.at_time..to_time] {
                v = step.apply(&v);
            }
        } else {
            for step in self.steps[to_time..state.at_time].iter().rev() {
                v = step.apply_adjoint(&v);
            }
        }
        Ok(ProjectedVector::new(v, to_time))
    }

    /// `Ψ(t) = U(t) Ψ₀`.
    pub fn state_at(&self, time: usize) -> Result<ProjectedVector> {
        self.evolve(&self.initial(), time)
    }

    /// `E(Δ) Ψ(t)` at time `t`, i.e. `U(t) Ŝ Ψ₀`.
    pub fn project_at(&self, sset: &SSet) -> Result<ProjectedVector> {
        self.check_sset(sset)?;
        let mut psi = self.state_at(sset.time)?;
        self.apply_projector(&sset.region, &mut psi.amplitudes)?;
        Ok(psi)
    }

    /// `‖E(Δ) Ψ(t)‖²`.
    pub fn occupation(&self, sset: &SSet) -> Result<f64> {
        Ok(self.project_at(sset)?.norm_sq())
    }

    /// `Ŝ state`, expressed at `state.at_time`.
    pub fn heisenberg_project(
        &self,
        sset: &SSet,
        state: &ProjectedVector,
    ) -> Result<ProjectedVector> {
        self.check_sset(sset)?;
        let mut v = self.evolve(state, sset.time)?;
        self.apply_projector(&sset.region, &mut v.amplitudes)?;
        self.evolve(&v, state.at_time)
    }

    /// `T(Ŝ₁ … Ŝₙ) Ψ₀` at time 0. Input order is irrelevant; equal-time
    /// s-sets compose as the intersection of their regions.
    pub fn chain_project(&self, ssets: &[SSet]) -> Result<ProjectedVector> {
        let mut sorted: Vec<&SSet> = ssets.iter().collect();
        sorted.sort_by_key(|s| s.time);
        let mut v = self.initial();
        for sset in sorted {
            self.check_sset(sset)?;
            v = self.evolve(&v, sset.time)?;
            self.apply_projector(&sset.region, &mut v.amplitudes)?;
        }
        self.evolve(&v, 0)
    }

    /// `‖a − b‖²`, moving `b` to `a`'s time first if needed.
    pub fn distance_sq(&self, a: &ProjectedVector, b: &ProjectedVector) -> Result<f64> {
        let b = if b.at_time == a.at_time {
            b.clone()
        } else {
            self.evolve(b, a.at_time)?
        };
        Ok(a.amplitudes
            .iter()
            .zip(b.amplitudes.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum())
    }

    /// The same structure with step `k` multiplied by a global phase.
    /// Dense steps only.
    pub fn with_step_phase(&self, k: usize, phase: C64) -> Result<Self> {
        let mut steps = self.steps.clone();
        match steps.get_mut(k) {
            Some(Step::Dense(m)) => m.mapv_inplace(|z| z * phase),
            Some(Step::Reflection(_)) => {
                return Err(invalid("phase rescaling only applies to dense steps"))
            }
            None => {
                return Err(Error::Range {
                    time: k,
                    max: self.steps.len(),
                })
            }
        }
        QuantumStructure::new(self.psi0.clone(), steps, self.cells.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn splitter() -> QuantumStructure {
        let s = FRAC_1_SQRT_2;
        let b = array![[c(s, 0.0), c(0.0, s)], [c(0.0, s), c(s, 0.0)]];
        let mut cells = IndexMap::new();
        cells.insert("A".to_string(), vec![0]);
        cells.insert("B".to_string(), vec![1]);
        QuantumStructure::new(
            array![c(0.0, 0.0), c(1.0, 0.0)],
            vec![
                Step::Dense(b.clone()),
                Step::Dense(b.clone()),
                Step::Dense(b),
            ],
            cells,
        )
        .unwrap()
    }

    #[test]
    fn evolve_identity_and_roundtrip() {
        let q = splitter();
        let psi = q.initial();
        assert_eq!(q.evolve(&psi, 0).unwrap(), psi);
        let fwd = q.evolve(&psi, 3).unwrap();
        assert!((fwd.norm_sq() - 1.0).abs() < 1e-12);
        let back = q.evolve(&fwd, 0).unwrap();
        assert!(back.max_abs_diff(&psi) < 1e-10);
    }

    #[test]
    fn evolve_out_of_range() {
        let q = splitter();
        assert!(matches!(
            q.evolve(&q.initial(), 4),
            Err(Error::Range { time: 4, max: 3 })
        ));
    }

    #[test]
    fn projection_is_idempotent_and_complete() {
        let q = splitter();
        let psi = q.initial();
        let a = SSet::new(2, ["A"]);
        let once = q.heisenberg_project(&a, &psi).unwrap();
        let twice = q.heisenberg_project(&a, &once).unwrap();
        assert!(once.max_abs_diff(&twice) < 1e-12);
        let all = SSet::new(2, ["A", "B"]);
        assert!(q.heisenberg_project(&all, &psi).unwrap().max_abs_diff(&psi) < 1e-12);
        let total: f64 = ["A", "B"]
            .iter()
            .map(|l| q.occupation(&SSet::new(1, [*l])).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unknown_cell_is_rejected() {
        let q = splitter();
        let err = q.heisenberg_project(&SSet::new(1, ["C"]), &q.initial());
        assert!(matches!(err, Err(Error::UnknownCell(c)) if c == "C"));
    }

    #[test]
    fn empty_chain_is_psi0() {
        let q = splitter();
        assert_eq!(q.chain_project(&[]).unwrap(), q.initial());
    }

    #[test]
    fn equal_time_chain_is_intersection() {
        let q = splitter();
        let v = q
            .chain_project(&[SSet::new(1, ["A", "B"]), SSet::new(1, ["A"])])
            .unwrap();
        let w = q
            .heisenberg_project(&SSet::new(1, ["A"]), &q.initial())
            .unwrap();
        assert!(v.max_abs_diff(&w) < 1e-14);
        let empty = q
            .chain_project(&[SSet::new(1, ["B"]), SSet::new(1, ["A"])])
            .unwrap();
        assert!(empty.norm_sq() < 1e-30);
    }

    #[test]
    fn rejects_bad_structures() {
        let mut cells = IndexMap::new();
        cells.insert("A".to_string(), vec![0]);
        let bad_norm =
            QuantumStructure::new(array![c(0.5, 0.0), c(0.0, 0.0)], vec![], cells.clone());
        assert!(matches!(bad_norm, Err(Error::Validation(_))));
        let uncovered =
            QuantumStructure::new(array![c(1.0, 0.0), c(0.0, 0.0)], vec![], cells.clone());
        assert!(matches!(uncovered, Err(Error::Validation(_))));
        cells.insert("B".to_string(), vec![0, 1]);
        let overlap =
            QuantumStructure::new(array![c(1.0, 0.0), c(0.0, 0.0)], vec![], cells.clone());
        assert!(matches!(overlap, Err(Error::Validation(_))));
        cells.insert("B".to_string(), vec![1]);
        let not_unitary = QuantumStructure::new(
            array![c(1.0, 0.0), c(0.0, 0.0)],
            vec![Step::Dense(array![
                [c(1.0, 0.0), c(1.0, 0.0)],
                [c(0.0, 0.0), c(1.0, 0.0)]
            ])],
            cells,
        );
        assert!(matches!(not_unitary, Err(Error::Validation(_))));
    }

    #[test]
    fn reflection_maps_origin_to_target() {
        let target = array![c(0.0, 0.0), c(0.6, 0.0), c(0.0, 0.8)];
        let step = Step::reflection_from_origin(&target).unwrap();
        let e0 = array![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let out = step.apply(&e0);
        for (a, b) in out.iter().zip(target.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        let back = step.apply_adjoint(&out);
        assert!((back[0] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sset_parse_and_display() {
        let s = SSet::parse("3:U,CLICK").unwrap();
        assert_eq!(s, SSet::new(3, ["U", "CLICK"]));
        assert_eq!(s.to_string(), "3:CLICK,U");
        assert_eq!(SSet::parse("2:").unwrap().region.len(), 0);
        assert!(SSet::parse("x:U").is_err());
        assert!(SSet::parse("U").is_err());
    }
}

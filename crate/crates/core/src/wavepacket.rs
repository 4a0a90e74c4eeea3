//! Free-particle wave packets on a periodic 1-D grid (ħ = m = 1).
//!
//! Evolution is spectral: `ψ̂(k) ↦ ψ̂(k) e^{−i k² dt / 2}`, which is exact on
//! the grid and unitary.

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::typicality::{check_threshold, TypicalityReport};

/// Mass near the seam that raises the wrap warning.
pub const WRAP_MASS: f64 = 1e-6;
/// Default mass left outside a packet's support.
pub const SUPPORT_CUTOFF: f64 = 1e-6;
const CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub n_points: usize,
    pub length: f64,
}

impl Grid {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(invalid(format!(
                "grid size must be a power of two ≥ 8, got {n_points}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(invalid(format!(
                "grid length must be positive, got {length}"
            )));
        }
        Ok(Grid { n_points, length })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_points as f64
    }

    /// Grid points `−L/2 + j·dx`.
    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.dx()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|j| self.x(j))
    }

    /// Angular wave numbers in FFT order.
    pub fn wave_numbers(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        let dk = 2.0 * PI / self.length;
        (0..n)
            .map(|j| dk * if j < n / 2 { j } else { j - n } as f64)
            .collect()
    }

    pub fn whole(&self) -> Interval {
        Interval {
            start: -0.5 * self.length,
            end: 0.5 * self.length,
        }
    }
}

/// Half-open interval `[start, end)` on the line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start < end) {
            return Err(invalid(format!("empty interval [{start}, {end})")));
        }
        Ok(Interval { start, end })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.start <= x && x < self.end
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridState {
    pub grid: Grid,
    #[serde(skip)]
    pub amplitudes: Array1<C64>,
    pub time: f64,
    /// Set when at least `WRAP_MASS` sits within three cells of the seam.
    pub wrap_warning: bool,
}

fn fft(values: &mut [C64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let plan = if inverse {
        planner.plan_fft_inverse(values.len())
    } else {
        planner.plan_fft_forward(values.len())
    };
    plan.process(values);
    if inverse {
        let scale = 1.0 / values.len() as f64;
        values.iter_mut().for_each(|v| *v *= scale);
    }
}

fn propagate(grid: &Grid, amplitudes: &Array1<C64>, dt: f64) -> Array1<C64> {
    if dt == 0.0 {
        return amplitudes.clone();
    }
    let mut buf = amplitudes.to_vec();
    fft(&mut buf, false);
    for (v, k) in buf.iter_mut().zip(grid.wave_numbers()) {
        *v *= C64::from_polar(1.0, -0.5 * k * k * dt);
    }
    fft(&mut buf, true);
    Array1::from(buf)
}

fn mass(grid: &Grid, amplitudes: &Array1<C64>) -> f64 {
    amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dx()
}

fn masked(grid: &Grid, amplitudes: &Array1<C64>, region: &Interval) -> Array1<C64> {
    Array1::from_iter(amplitudes.iter().enumerate().map(|(j, &a)| {
        if region.contains(grid.x(j)) {
            a
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

fn seam_mass(grid: &Grid, amplitudes: &Array1<C64>) -> f64 {
    let n = grid.n_points;
    let guard = 3.min(n / 2);
    (0..guard)
        .chain(n - guard..n)
        .map(|j| amplitudes[j].norm_sqr())
        .sum::<f64>()
        * grid.dx()
}

impl GridState {
    /// Normalizes `amplitudes` to unit continuum norm.
    pub fn from_amplitudes(grid: Grid, amplitudes: Array1<C64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.n_points {
            return Err(invalid(format!(
                "{} amplitudes for a {}-point grid",
                amplitudes.len(),
                grid.n_points
            )));
        }
        let total = mass(&grid, &amplitudes);
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid("state has zero norm"));
        }
        let amplitudes = amplitudes / C64::from(total.sqrt());
        let wrap_warning = seam_mass(&grid, &amplitudes) >= WRAP_MASS;
        Ok(GridState {
            grid,
            amplitudes,
            time,
            wrap_warning,
        })
    }

    /// `ψ(x) ∝ exp(−(x−x₀)²/(4σ²) + ikx)` at time zero; `σ` is the standard
    /// deviation of `|ψ|²`.
    pub fn gaussian_packet(grid: Grid, center: f64, sigma: f64, momentum: f64) -> Result<Self> {
        let dx = grid.dx();
        if !(sigma >= 4.0 * dx) {
            return Err(invalid(format!(
                "width σ = {sigma} is below 4·dx = {}",
                4.0 * dx
            )));
        }
        let half = 0.5 * grid.length;
        if center - 6.0 * sigma < -half || center + 6.0 * sigma > half {
            return Err(invalid(format!(
                "packet at {center} with σ = {sigma} is within 6σ of the boundary ±{half}"
            )));
        }
        let k_max = PI / dx;
        if momentum.abs() + 6.0 / (2.0 * sigma) > k_max {
            return Err(invalid(format!(
                "momentum {momentum} is not resolved (|k| limit {k_max})"
            )));
        }
        let amplitudes = Array1::from_iter(grid.positions().map(|x| {
            let u = x - center;
            C64::from_polar((-u * u / (4.0 * sigma * sigma)).exp(), momentum * x)
        }));
        Self::from_amplitudes(grid, amplitudes, 0.0)
    }

    /// Normalized linear combination of states on the same grid and time.
    pub fn superpose(terms: &[(C64, &GridState)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| invalid("empty superposition"))?;
        let mut sum = Array1::<C64>::zeros(first.grid.n_points);
        for (c, s) in terms {
            if s.grid != first.grid || s.time != first.time {
                return Err(invalid("superposed states must share grid and time"));
            }
            sum.scaled_add(*c, &s.amplitudes);
        }
        Self::from_amplitudes(first.grid, sum, first.time)
    }

    pub fn norm_sq(&self) -> f64 {
        mass(&self.grid, &self.amplitudes)
    }

    pub fn mass_in(&self, region: &Interval) -> f64 {
        mass(&self.grid, &masked(&self.grid, &self.amplitudes, region))
    }

    /// `|ψ(x)|²` sampled at every grid point.
    pub fn density(&self) -> Vec<(f64, f64)> {
        self.grid
            .positions()
            .zip(self.amplitudes.iter())
            .map(|(x, a)| (x, a.norm_sqr()))
            .collect()
    }

    /// `⟨x⟩`
    pub fn mean_position(&self) -> f64 {
        self.density().iter().map(|(x, p)| x * p).sum::<f64>() * self.grid.dx() / self.norm_sq()
    }

    /// Standard deviation of `|ψ|²`.
    pub fn position_spread(&self) -> f64 {
        let mean = self.mean_position();
        let var = self
            .density()
            .iter()
            .map(|(x, p)| (x - mean).powi(2) * p)
            .sum::<f64>()
            * self.grid.dx()
            / self.norm_sq();
        var.sqrt()
    }

    /// `⟨p²⟩` from the momentum-space amplitudes.
    pub fn mean_momentum_sq(&self) -> f64 {
        let mut buf = self.amplitudes.to_vec();
        fft(&mut buf, false);
        let (num, den) = buf
            .iter()
            .zip(self.grid.wave_numbers())
            .fold((0.0, 0.0), |(n, d), (v, k)| {
                (n + k * k * v.norm_sqr(), d + v.norm_sqr())
            });
        num / den
    }

    /// `⟨φ, ψ⟩` with the continuum measure `dx`.
    pub fn overlap(&self, other: &GridState) -> Result<C64> {
        if self.grid != other.grid {
            return Err(invalid("overlap of states on different grids"));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            * self.grid.dx())
    }

    /// Smallest interval centered on `⟨x⟩` holding `1 − cutoff` of the mass,
    /// snapped to grid points.
    pub fn support(&self, cutoff: f64) -> Result<Interval> {
        if !(cutoff > 0.0 && cutoff < 1.0) {
            return Err(invalid(format!(
                "support cutoff must lie in (0, 1), got {cutoff}"
            )));
        }
        let center = self.mean_position();
        let density = self.density();
        let mut order: Vec<usize> = (0..density.len()).collect();
        order.sort_by(|&a, &b| {
            (density[a].0 - center)
                .abs()
                .total_cmp(&(density[b].0 - center).abs())
                .then(a.cmp(&b))
        });
        let target = (1.0 - cutoff) * self.norm_sq() / self.grid.dx();
        let mut acc = 0.0;
        let mut radius = 0.0;
        for j in order {
            acc += density[j].1;
            radius = (density[j].0 - center).abs();
            if acc >= target {
                break;
            }
        }
        let dx = self.grid.dx();
        let lo = self
            .grid
            .positions()
            .find(|x| *x >= center - radius)
            .unwrap_or(-0.5 * self.grid.length);
        let hi = self
            .grid
            .positions()
            .filter(|x| *x <= center + radius)
            .last()
            .unwrap_or(lo);
        Interval::new(lo, hi + 0.5 * dx)
    }
}

/// Evolves by `dt` under the free Hamiltonian `p²/2`.
pub fn free_evolve(state: &GridState, dt: f64) -> GridState {
    let amplitudes = propagate(&state.grid, &state.amplitudes, dt);
    let wrap_warning = seam_mass(&state.grid, &amplitudes) >= WRAP_MASS;
    GridState {
        grid: state.grid,
        amplitudes,
        time: state.time + dt,
        wrap_warning,
    }
}

/// `M_Ψ` for `(t₁, Δ₁)` and `(t₂, Δ₂)`: the masked `t₁` state is evolved to
/// `t₂` and compared with the masked `t₂` state.
pub fn support_condition_check(
    state_t1: &GridState,
    region1: &Interval,
    state_t2: &GridState,
    region2: &Interval,
    threshold: f64,
) -> Result<TypicalityReport> {
    check_threshold("threshold", threshold)?;
    let grid = state_t1.grid;
    if state_t2.grid != grid {
        return Err(invalid("states live on different grids"));
    }
    let dt = state_t2.time - state_t1.time;
    let evolved = propagate(&grid, &state_t1.amplitudes, dt);
    let drift = evolved
        .iter()
        .zip(state_t2.amplitudes.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if drift > CONSISTENCY_TOL {
        return Err(invalid(format!(
            "state at t₂ is not the free evolution of the state at t₁ (max deviation {drift:e})"
        )));
    }
    let v1 = propagate(&grid, &masked(&grid, &state_t1.amplitudes, region1), dt);
    let v2 = masked(&grid, &state_t2.amplitudes, region2);
    let diff = &v1 - &v2;
    Ok(TypicalityReport::from_parts(
        mass(&grid, &diff),
        mass(&grid, &v1),
        mass(&grid, &v2),
        threshold,
    ))
}

/// `|⟨φ₁, φ₂⟩|` for equal-width, equal-momentum Gaussians `d` apart.
pub fn gaussian_overlap(separation: f64, sigma: f64) -> f64 {
    (-separation * separation / (8.0 * sigma * sigma)).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub n_points: usize,
    pub length: f64,
    pub sigma: f64,
    pub momentum: f64,
    pub dt: f64,
    /// Initial packet separations in units of σ.
    pub separations: Vec<f64>,
    pub support_cutoff: f64,
    pub threshold: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_points: 4096,
            length: 200.0,
            sigma: 1.0,
            momentum: 2.0,
            dt: 5.0,
            separations: vec![4.0, 6.0, 8.0, 10.0],
            support_cutoff: SUPPORT_CUTOFF,
            threshold: crate::typicality::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub separation_sigma: f64,
    /// Left half at t₁ against the left packet's support at t₂.
    pub same_branch: TypicalityReport,
    /// Left half at t₁ against the right packet's support at t₂.
    pub other_branch: TypicalityReport,
    pub packet_overlap: f64,
    pub wrap_warning: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterPropagating {
    pub left: GridState,
    pub right: GridState,
    pub psi: GridState,
}

/// `ψ = (φ_L + φ_R)/√2` with packets at `∓d/2` moving apart with momenta `∓k`.
pub fn counter_propagating(
    grid: Grid,
    separation: f64,
    sigma: f64,
    momentum: f64,
) -> Result<CounterPropagating> {
    let left = GridState::gaussian_packet(grid, -0.5 * separation, sigma, -momentum)?;
    let right = GridState::gaussian_packet(grid, 0.5 * separation, sigma, momentum)?;
    let c = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    let psi = GridState::superpose(&[(c, &left), (c, &right)])?;
    Ok(CounterPropagating { left, right, psi })
}

pub fn separation_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let grid = Grid::new(config.n_points, config.length)?;
    let mut separations = config.separations.clone();
    separations.sort_by(f64::total_cmp);
    let left_half = Interval::new(-0.5 * grid.length, 0.0)?;
    separations
        .iter()
        .map(|&d| {
            let setup = counter_propagating(grid, d * config.sigma, config.sigma, config.momentum)?;
            let psi2 = free_evolve(&setup.psi, config.dt);
            let left_support =
                free_evolve(&setup.left, config.dt).support(config.support_cutoff)?;
            let right_support =
                free_evolve(&setup.right, config.dt).support(config.support_cutoff)?;
            Ok(SweepRow {
                separation_sigma: d,
                same_branch: support_condition_check(
                    &setup.psi,
                    &left_half,
                    &psi2,
                    &left_support,
                    config.threshold,
                )?,
                other_branch: support_condition_check(
                    &setup.psi,
                    &left_half,
                    &psi2,
                    &right_support,
                    config.threshold,
                )?,
                packet_overlap: setup.left.overlap(&setup.right)?.norm(),
                wrap_warning: psi2.wrap_warning,
            })
        })
        .collect()
}

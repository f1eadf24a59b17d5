//! Energy coefficients E_p, truncated-series evaluation with its rigorous bound, order
//! selection and a heuristic convergence-radius estimate.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{vacuum_value, MAX_NESTING};
use crate::model::SpinModel;
use crate::scalar::Scalar;
use crate::setalg::VertexSet;
use crate::solver::{compositions, solve_with, SolveOptions, SolverState};

/// Counters collected while summing vacuum tuples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EnergyDiagnostics {
    /// Tuples evaluated, per nesting depth k = 1..4.
    pub tuples: [usize; MAX_NESTING],
    /// Tuples with k ≥ 3 whose vacuum element was nonzero (always 0).
    pub deep_nonzero: usize,
}

/// E₁..E_p with the model parameters needed for bounds.
#[derive(Clone, Debug)]
pub struct EnergySeries {
    pub coeffs: Vec<Complex64>,
    pub n: usize,
    pub delta: f64,
    pub eps0: f64,
    pub norms: Vec<f64>,
    pub diagnostics: EnergyDiagnostics,
}

impl EnergySeries {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// E_q, 1-based.
    pub fn coefficient(&self, q: usize) -> Complex64 {
        self.coeffs[q - 1]
    }

    /// Ceiling 2⁻¹⁶ nΔ/(2ε₀)^q on |E_q|.
    pub fn coefficient_bound(&self, q: usize) -> f64 {
        2f64.powi(-16) * self.n as f64 * self.delta / (2.0 * self.eps0).powi(q as i32)
    }
}

/// Truncated value and, inside the guaranteed regime, its rigorous error bound.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyEstimate {
    pub value: Complex64,
    pub bound: Option<f64>,
    pub warning: Option<String>,
}

/// E_p over the scalar ring of the solver state; needs orders 1..p−1.
pub fn energy_coefficient_in<S: Scalar>(state: &SolverState<S>, p: usize, diag: &mut EnergyDiagnostics) -> S {
    assert!(p >= 1);
    let mut total = S::zero();
    if p == 1 {
        for e in state.model().edges() {
            total += e.op[0][0].clone();
        }
        return total;
    }
    assert!(state.order() >= p - 1, "energy order {p} needs coefficients through {}", p - 1);
    let table = state.table();
    for e in state.model().edges() {
        let local = [
            VertexSet::singleton(e.v),
            VertexSet::singleton(e.u),
            VertexSet::from_ids([e.u, e.v]),
        ];
        // coeffs[q-1][mask-1] = C_q of the local set with that mask.
        let coeffs: Vec<[Option<&S>; 3]> = (1..p)
            .map(|q| std::array::from_fn(|m| table.get(q, &local[m])))
            .collect();
        let mut factorial = 1.0;
        for k in 1..=MAX_NESTING.min(p - 1) {
            factorial *= k as f64;
            let weight = S::real(factorial);
            for parts in compositions(p - 1, k) {
                let mut masks = [1u8; MAX_NESTING];
                loop {
                    let mut prod: Option<S> = None;
                    let mut present = true;
                    for j in 0..k {
                        match coeffs[parts[j] - 1][masks[j] as usize - 1] {
                            Some(c) => {
                                prod = Some(match prod {
                                    None => c.clone(),
                                    Some(x) => x * c.clone(),
                                })
                            }
                            None => {
                                present = false;
                                break;
                            }
                        }
                    }
                    if present {
                        diag.tuples[k - 1] += 1;
                        let vac = vacuum_value(&masks[..k], &e.op);
                        if !vac.is_zero() {
                            if k >= 3 {
                                diag.deep_nonzero += 1;
                            }
                            let prod = prod.expect("k ≥ 1");
                            total += (prod * vac).div_real(&weight);
                        }
                    }
                    if !next_masks(&mut masks[..k]) {
                        break;
                    }
                }
            }
        }
    }
    debug_assert_eq!(diag.deep_nonzero, 0, "k ≥ 3 vacuum tuples must vanish");
    total
}

fn next_masks(masks: &mut [u8]) -> bool {
    for m in masks.iter_mut() {
        if *m < 3 {
            *m += 1;
            return true;
        }
        *m = 1;
    }
    false
}

/// E₁..E_p over the solver's ring.
pub fn energy_coefficients_in<S: Scalar>(state: &SolverState<S>, p: usize, diag: &mut EnergyDiagnostics) -> Vec<S> {
    (1..=p).map(|q| energy_coefficient_in(state, q, diag)).collect()
}

pub fn energy_coefficient(state: &SolverState<Complex64>, p: usize) -> Complex64 {
    energy_coefficient_in(state, p, &mut EnergyDiagnostics::default())
}

/// Solves the model and returns E₁..E_p.
pub fn energy_series(model: &SpinModel, p: usize) -> EnergySeries {
    energy_series_with(model, p, SolveOptions::default())
}

pub fn energy_series_with(model: &SpinModel, p: usize, options: SolveOptions) -> EnergySeries {
    let state = solve_with(model, p.saturating_sub(1).max(1), options);
    series_from_state(model, &state, p)
}

pub fn series_from_state(model: &SpinModel, state: &SolverState<Complex64>, p: usize) -> EnergySeries {
    let mut diagnostics = EnergyDiagnostics::default();
    let coeffs = energy_coefficients_in(state, p, &mut diagnostics);
    EnergySeries {
        coeffs,
        n: model.n(),
        delta: model.delta(),
        eps0: model.eps0(),
        norms: state.norms().to_vec(),
        diagnostics,
    }
}

/// Rigorous truncation bound nΔ·2^{−16−p}.
pub fn truncation_bound(n: usize, delta: f64, p: usize) -> f64 {
    n as f64 * delta * 2f64.powi(-16 - p as i32)
}

/// Σ_{q≤p} E_q ε^q with the bound attached when |ε| ≤ ε₀.
pub fn energy_estimate(series: &EnergySeries, eps: f64) -> EnergyEstimate {
    let mut value = Complex64::new(0.0, 0.0);
    for c in series.coeffs.iter().rev() {
        value = (value + c) * eps;
    }
    let p = series.order();
    if eps.abs() <= series.eps0 {
        EnergyEstimate {
            value,
            bound: Some(truncation_bound(series.n, series.delta, p)),
            warning: None,
        }
    } else {
        EnergyEstimate {
            value,
            bound: None,
            warning: Some(format!(
                "|epsilon| = {:e} exceeds eps0 = {:e}; no rigorous error bound",
                eps.abs(),
                series.eps0
            )),
        }
    }
}

/// Smallest p ≥ 1 with nΔ·2^{−16−p} ≤ δ.
pub fn choose_order(n: usize, delta: f64, precision: f64) -> Result<usize> {
    if !(precision > 0.0) {
        return Err(Error::NonPositivePrecision(precision));
    }
    let mut p = 1usize;
    while truncation_bound(n, delta, p) > precision {
        p += 1;
    }
    Ok(p)
}

/// 1/max_{q in last half} |E_q|^{1/q}; `None` without at least four nonzero
/// coefficients beyond E₁ or when the window vanishes.
pub fn radius_estimate(series: &EnergySeries) -> Option<f64> {
    radius_estimate_of(&series.coeffs)
}

pub fn radius_estimate_of(coeffs: &[Complex64]) -> Option<f64> {
    let p = coeffs.len();
    let nonzero_tail = coeffs.iter().skip(1).filter(|c| c.norm() != 0.0).count();
    if nonzero_tail < 4 {
        return None;
    }
    let start = p / 2 + 1;
    let peak = (start..=p)
        .map(|q| coeffs[q - 1].norm().powf(1.0 / q as f64))
        .fold(0.0, f64::max);
    (peak > 0.0).then(|| 1.0 / peak)
}

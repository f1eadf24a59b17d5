//! Brute-force reference computations on the full 2^n-dimensional state space.
//!
//! Bit u of a basis index is the occupation of vertex u. Everything here is independent
//! of the series machinery: Hamiltonians are applied directly, eigenpairs come from dense
//! diagonalisation or Lanczos, and creation-operator coefficients are recovered from the
//! state by the set-partition recursion.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::LocalOp;
use crate::model::{SpinModel, TwoQubitOperator};
use crate::scalar::{Scalar, WideComplex, WideReal};
use crate::setalg::VertexSet;
use crate::solver::lift;

/// Largest qubit count accepted by the matrix-free routines.
pub const QUBIT_CAP: usize = 14;
/// Largest qubit count for which a dense 2^n × 2^n matrix is materialised.
pub const DENSE_MATRIX_CAP: usize = 12;
/// Up to this size the eigenproblem is solved densely; above it by Lanczos.
pub const DENSE_SOLVE_CAP: usize = 6;

fn check_size(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::TooManyQubits { n, cap })
    } else {
        Ok(())
    }
}

fn require_hermitian(model: &SpinModel) -> Result<()> {
    if model.is_hermitian() {
        Ok(())
    } else {
        Err(Error::InvalidArgument("the exact oracle needs a Hermitian model".into()))
    }
}

#[inline]
fn bit(x: usize, u: usize) -> usize {
    (x >> u) & 1
}

/// y += Σ_edges V_e x, evaluated edge by edge in the model's order.
fn apply_edges<S: Scalar>(edges: &[(usize, usize, LocalOp<S>)], x: &[S], y: &mut [S]) {
    for (u, v, op) in edges {
        let (u, v) = (*u, *v);
        let clear = !((1usize << u) | (1usize << v));
        for (c, xc) in x.iter().enumerate() {
            if xc.is_zero() {
                continue;
            }
            let col = (bit(c, u) << 1) | bit(c, v);
            let base = c & clear;
            for (row, line) in op.iter().enumerate() {
                let m = &line[col];
                if m.is_zero() {
                    continue;
                }
                let r = base | ((row >> 1) << u) | ((row & 1) << v);
                y[r] += m.clone() * xc.clone();
            }
        }
    }
}

fn lifted_edges<S: Scalar>(model: &SpinModel) -> Vec<(usize, usize, LocalOp<S>)> {
    model
        .edges()
        .iter()
        .map(|e| (e.u, e.v, lift::<S>(e.op.entries())))
        .collect()
}

/// Unperturbed energies E₀ of every basis state.
/// E₀ of every basis state, summed in the scalar ring so wide runs keep full precision.
fn diagonal_energies<S: Scalar>(model: &SpinModel) -> Vec<S> {
    let n = model.n();
    let gaps: Vec<S> = model.gaps().into_iter().map(S::from_f64).collect();
    (0..1usize << n)
        .map(|x| {
            (0..n)
                .filter(|&u| bit(x, u) == 1)
                .fold(S::zero(), |acc, u| acc + gaps[u].clone())
        })
        .collect()
}

/// H(ε) = H₀ + εV as a dense matrix.
pub fn build_hamiltonian(model: &SpinModel, eps: f64) -> Result<DMatrix<Complex64>> {
    check_size(model.n(), DENSE_MATRIX_CAP)?;
    let dim = 1usize << model.n();
    let edges = lifted_edges::<Complex64>(model);
    let e0 = diagonal_energies::<Complex64>(model);
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let mut unit = vec![Complex64::new(0.0, 0.0); dim];
    let mut col = vec![Complex64::new(0.0, 0.0); dim];
    for c in 0..dim {
        unit[c] = Complex64::new(1.0, 0.0);
        col.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        apply_edges(&edges, &unit, &mut col);
        for r in 0..dim {
            h[(r, c)] = col[r] * eps;
        }
        h[(c, c)] += e0[c];
        unit[c] = Complex64::new(0.0, 0.0);
    }
    Ok(h)
}

/// Matrix-free H(ε) for the iterative solvers.
pub struct HamiltonianOperator<S: Scalar> {
    edges: Vec<(usize, usize, LocalOp<S>)>,
    e0: Vec<S>,
    eps: S,
}

impl<S: Scalar> HamiltonianOperator<S> {
    pub fn new(model: &SpinModel, eps: S) -> Result<Self> {
        check_size(model.n(), QUBIT_CAP)?;
        Ok(HamiltonianOperator {
            edges: lifted_edges(model),
            e0: diagonal_energies(model),
            eps,
        })
    }

    pub fn dim(&self) -> usize {
        self.e0.len()
    }

    /// V x (without the ε factor).
    pub fn apply_perturbation(&self, x: &[S]) -> Vec<S> {
        let mut y = vec![S::zero(); x.len()];
        apply_edges(&self.edges, x, &mut y);
        y
    }

    pub fn apply(&self, x: &[S]) -> Vec<S> {
        let mut y = self.apply_perturbation(x);
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.e0) {
            *yi = yi.clone() * self.eps.clone() + xi.clone() * d.clone();
        }
        y
    }
}

fn norm_bound(model: &SpinModel, eps: f64) -> f64 {
    let diag: f64 = model.gaps().iter().sum();
    let off: f64 = model.edges().iter().map(|e| e.op.norm()).sum();
    diag + eps.abs() * off
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    /// Normalised, with ⟨Ω|ψ⟩ real and non-negative.
    pub state: Vec<Complex64>,
}

fn fix_phase(state: &mut [Complex64]) {
    let a = state[0];
    if a.norm() > 0.0 {
        let phase = a.conj() / a.norm();
        state.iter_mut().for_each(|z| *z *= phase);
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Lowest `count` Ritz pairs by restarted Lanczos with full reorthogonalisation.
fn lanczos(op: &HamiltonianOperator<Complex64>, scale: f64, count: usize) -> Result<Vec<(f64, Vec<Complex64>)>> {
    let dim = op.dim();
    let krylov = dim.min(160);
    let mut rng = ChaCha8Rng::seed_from_u64(0x4b54_5345);
    let mut start: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    for _ in 0..40 {
        let s = norm(&start);
        start.iter_mut().for_each(|z| *z /= s);
        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..krylov {
            let mut w = op.apply(&basis[j]);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = norm(&w);
            if j + 1 == krylov || b <= 1e-13 * scale {
                break;
            }
            beta.push(b);
            w.iter_mut().for_each(|z| *z /= b);
            basis.push(w);
        }
        let m = alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let want = count.min(m);
        let mut pairs = Vec::with_capacity(want);
        let mut converged = true;
        for &idx in order.iter().take(want) {
            let theta = eig.eigenvalues[idx];
            let mut y = vec![Complex64::new(0.0, 0.0); dim];
            for (k, q) in basis.iter().take(m).enumerate() {
                let coef = eig.eigenvectors[(k, idx)];
                y.iter_mut().zip(q).for_each(|(acc, x)| *acc += x * coef);
            }
            let ny = norm(&y);
            y.iter_mut().for_each(|z| *z /= ny);
            let hy = op.apply(&y);
            let res: f64 = hy
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b * theta).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if res > 1e-10 * scale {
                converged = false;
            }
            pairs.push((theta, y));
        }
        if converged || m == dim {
            return Ok(pairs);
        }
        start = vec![Complex64::new(0.0, 0.0); dim];
        for (k, (_, y)) in pairs.iter().enumerate() {
            let w = 1.0 / (k + 1) as f64;
            start.iter_mut().zip(y).for_each(|(s, x)| *s += x * w);
        }
    }
    Err(Error::NotConverged("Lanczos iteration for the lowest eigenpairs".into()))
}

fn lowest_pairs(model: &SpinModel, eps: f64, count: usize) -> Result<Vec<(f64, Vec<Complex64>)>> {
    require_hermitian(model)?;
    check_size(model.n(), QUBIT_CAP)?;
    if model.n() <= DENSE_SOLVE_CAP {
        let h = build_hamiltonian(model, eps)?;
        let dim = h.nrows();
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        Ok(order
            .iter()
            .take(count)
            .map(|&i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
            .collect())
    } else {
        let op = HamiltonianOperator::new(model, Complex64::new(eps, 0.0))?;
        lanczos(&op, norm_bound(model, eps), count)
    }
}

/// Smallest eigenvalue of H(ε) and its eigenvector.
pub fn ground(model: &SpinModel, eps: f64) -> Result<GroundState> {
    let mut pairs = lowest_pairs(model, eps, 1)?;
    let (energy, mut state) = pairs.swap_remove(0);
    fix_phase(&mut state);
    Ok(GroundState { energy, state })
}

/// λ₁ − λ₀ of H(ε).
pub fn gap(model: &SpinModel, eps: f64) -> Result<f64> {
    if model.n() == 0 {
        return Err(Error::EmptyModel);
    }
    let pairs = lowest_pairs(model, eps, 2)?;
    Ok(pairs[1].0 - pairs[0].0)
}

/// ‖Hψ − Eψ‖ for a computed eigenpair.
pub fn residual(model: &SpinModel, eps: f64, ground: &GroundState) -> Result<f64> {
    let op = HamiltonianOperator::new(model, Complex64::new(eps, 0.0))?;
    let hy = op.apply(&ground.state);
    Ok(hy
        .iter()
        .zip(&ground.state)
        .map(|(a, b)| (a - b * ground.energy).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Ground state in 256-bit arithmetic, normalised so that ψ(∅) = 1.
#[derive(Clone, Debug)]
pub struct PreciseGround {
    pub energy: WideComplex,
    pub state: Vec<WideComplex>,
    pub iterations: usize,
}

/// Solves ψ = Ω + φ, E = ε⟨Ω|Vψ⟩, φ(M) = ε(Vψ)(M)/(E − E₀(M)) by fixed-point iteration.
/// Converges for weak coupling (well inside |ε| ≤ ε₀).
pub fn precise_ground(model: &SpinModel, eps: f64) -> Result<PreciseGround> {
    let op = HamiltonianOperator::<WideComplex>::new(model, WideComplex::from_f64(eps))?;
    let dim = op.dim();
    let eps_w = WideComplex::from_f64(eps);
    let mut state = vec![WideComplex::zero(); dim];
    state[0] = WideComplex::one();
    let tolerance = 2f64.powi(-236);
    for iteration in 1..=400 {
        let applied = op.apply_perturbation(&state);
        let energy = eps_w.clone() * applied[0].clone();
        let mut change = 0.0f64;
        let mut next = Vec::with_capacity(dim);
        next.push(WideComplex::one());
        for m in 1..dim {
            let denom = energy.clone() - op.e0[m].clone();
            let value = (eps_w.clone() * applied[m].clone()) / denom;
            change = change.max((value.clone() - state[m].clone()).magnitude());
            next.push(value);
        }
        state = next;
        if change <= tolerance {
            let energy = eps_w.clone() * op.apply_perturbation(&state)[0].clone();
            return Ok(PreciseGround {
                energy,
                state,
                iterations: iteration,
            });
        }
        if !change.is_finite() || change > 1e6 {
            break;
        }
    }
    Err(Error::NotConverged(format!("fixed-point ground state at epsilon = {eps:e}")))
}

/// Coefficients C(M) of ψ ∝ exp(−C)Ω, indexed by the bitmask of M.
#[derive(Clone, Debug)]
pub struct CreationCoefficients<S> {
    pub n: usize,
    pub values: Vec<S>,
}

impl<S: Scalar> CreationCoefficients<S> {
    pub fn get(&self, set: &VertexSet) -> S {
        let mask = set.iter().fold(0usize, |m, u| m | (1 << u));
        self.values[mask].clone()
    }

    /// Nonzero entries in increasing bitmask order.
    pub fn entries(&self) -> Vec<(VertexSet, S)> {
        self.values
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, c)| (mask_set(m, self.n), c.clone()))
            .collect()
    }
}

pub fn mask_set(mask: usize, n: usize) -> VertexSet {
    VertexSet::from_usizes((0..n).filter(|&u| bit(mask, u) == 1))
}

/// Recovers C from ψ: with ψ normalised to ψ(∅) = 1 and c = −C,
/// ψ(M) = Σ_{B ∋ min M, B ⊆ M} c(B) ψ(M∖B).
pub fn extract_creation_coefficients<S: Scalar>(state: &[S]) -> Result<CreationCoefficients<S>> {
    let dim = state.len();
    assert!(dim.is_power_of_two(), "state length must be 2^n");
    let n = dim.trailing_zeros() as usize;
    let peak = state.iter().map(Scalar::magnitude).fold(0.0, f64::max);
    if state[0].is_zero() || state[0].magnitude() <= 1e-14 * peak {
        return Err(Error::OrthogonalToVacuum);
    }
    let psi: Vec<S> = state.iter().map(|a| a.clone() / state[0].clone()).collect();
    let mut c = vec![S::zero(); dim];
    for m in 1..dim {
        let low = m & m.wrapping_neg();
        let rest = m ^ low;
        let mut acc = psi[m].clone();
        // Proper blocks B = low ∪ sub with sub ⊊ rest.
        let mut sub = rest;
        while sub != 0 {
            sub = (sub - 1) & rest;
            let block = low | sub;
            if !c[block].is_zero() {
                acc = acc - c[block].clone() * psi[m ^ block].clone();
            }
            if sub == 0 {
                break;
            }
        }
        c[m] = acc;
    }
    Ok(CreationCoefficients {
        n,
        values: c.into_iter().map(|x| -x).collect(),
    })
}

/// exp(−C)Ω as a dense state with ψ(∅) = 1.
pub fn rebuild_state<S: Scalar>(coeffs: &CreationCoefficients<S>) -> Vec<S> {
    let dim = 1usize << coeffs.n;
    let c: Vec<S> = coeffs.values.iter().map(|x| -x.clone()).collect();
    let mut psi = vec![S::zero(); dim];
    psi[0] = S::one();
    for m in 1..dim {
        let low = m & m.wrapping_neg();
        let rest = m ^ low;
        let mut acc = S::zero();
        let mut sub = rest;
        loop {
            let block = low | sub;
            if !c[block].is_zero() {
                acc += c[block].clone() * psi[m ^ block].clone();
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        psi[m] = acc;
    }
    psi
}

/// ⟨ψ|O_st|ψ⟩ / ⟨ψ|ψ⟩ with s on the high local bit.
pub fn expectation(state: &[Complex64], observable: &TwoQubitOperator, s: usize, t: usize) -> f64 {
    let edges = vec![(s, t, *observable.entries())];
    let mut y = vec![Complex64::new(0.0, 0.0); state.len()];
    apply_edges(&edges, state, &mut y);
    (dot(state, &y) / dot(state, state)).re
}

/// Polynomial fit of E(ε) around ε = 0.
#[derive(Clone, Debug)]
pub struct NumericSeries {
    /// E₁..E_p.
    pub coeffs: Vec<f64>,
    /// Per-coefficient change when refitting at degree p+2.
    pub error: Vec<f64>,
    /// Condition number of the scaled least-squares design matrix.
    pub conditioning: f64,
    /// Sampling half-width ε*.
    pub radius: f64,
}

fn solve_normal_equations(design: &[Vec<WideReal>], rhs: &[WideReal]) -> Vec<WideReal> {
    let p = design[0].len();
    let mut a = vec![vec![WideReal::zero(); p + 1]; p];
    for (row, y) in design.iter().zip(rhs) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] = a[i][j].clone() + row[i].clone() * row[j].clone();
            }
            a[i][p] = a[i][p].clone() + row[i].clone() * y.clone();
        }
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).expect("finite"))
            .expect("nonempty");
        a.swap(col, pivot);
        for r in col + 1..p {
            let f = a[r][col].clone() / a[col][col].clone();
            for c in col..=p {
                a[r][c] = a[r][c].clone() - f.clone() * a[col][c].clone();
            }
        }
    }
    let mut x = vec![WideReal::zero(); p];
    for r in (0..p).rev() {
        let mut acc = a[r][p].clone();
        for c in r + 1..p {
            acc = acc - a[r][c].clone() * x[c].clone();
        }
        x[r] = acc / a[r][r].clone();
    }
    x
}

fn fit(nodes: &[WideReal], values: &[WideReal], degree: usize) -> Vec<WideReal> {
    let design: Vec<Vec<WideReal>> = nodes
        .iter()
        .map(|x| {
            let mut row = Vec::with_capacity(degree);
            let mut power = x.clone();
            for _ in 0..degree {
                row.push(power.clone());
                power = power * x.clone();
            }
            row
        })
        .collect();
    solve_normal_equations(&design, values)
}

/// E₁..E_p from a least-squares fit of the exact energy at 2p+1 Chebyshev nodes in
/// [−ε₀/4, ε₀/4]. Energies are computed in extended precision.
pub fn numeric_series(model: &SpinModel, p: usize) -> Result<NumericSeries> {
    require_hermitian(model)?;
    check_size(model.n(), QUBIT_CAP)?;
    if p == 0 || p > 8 {
        return Err(Error::InvalidArgument(format!("numeric_series supports 1 ≤ p ≤ 8, got {p}")));
    }
    let eps0 = model.eps0();
    let radius = if eps0.is_finite() { eps0 / 4.0 } else { 2f64.powi(-20) };
    let count = 2 * p + 1;
    let xs: Vec<f64> = (0..count)
        .map(|j| ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * count) as f64).cos())
        .collect();
    let mut values = Vec::with_capacity(count);
    let mut nodes = Vec::with_capacity(count);
    for &x in &xs {
        // The sampled ε is the rounded product; the node is recovered from it exactly.
        let eps = x * radius;
        values.push(precise_ground(model, eps)?.energy.re);
        nodes.push(WideReal::from_f64(eps) / WideReal::from_f64(radius));
    }
    let scale = |b: &[WideReal]| -> Vec<f64> {
        let unit = WideReal::from_f64(radius);
        let mut power = unit.clone();
        b.iter()
            .map(|bq| {
                let a = (bq.clone() / power.clone()).to_f64();
                power = power.clone() * unit.clone();
                a
            })
            .collect()
    };
    let coeffs = scale(&fit(&nodes, &values, p));
    let refined = scale(&fit(&nodes, &values, p + 2));
    let error = coeffs.iter().zip(&refined).map(|(a, b)| (a - b).abs()).collect();
    let design = DMatrix::from_fn(count, p, |r, c| xs[r].powi(c as i32 + 1));
    let sv = design.singular_values();
    let conditioning = sv.max() / sv.min();
    Ok(NumericSeries {
        coeffs,
        error,
        conditioning,
        radius,
    })
}

/// Dense evaluation of ⟨M| [a†_{M₁}, [⋯[a†_{M_k}, V_uv]⋯]] |Ω⟩ on `n` qubits.
pub fn dense_commutator_element(
    n: usize,
    target: &VertexSet,
    sets: &[&VertexSet],
    u: usize,
    v: usize,
    op: &TwoQubitOperator,
) -> Result<Complex64> {
    check_size(n, 8)?;
    let dim = 1usize << n;
    let edges = vec![(u, v, *op.entries())];
    let mut x = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let mut unit = vec![Complex64::new(0.0, 0.0); dim];
    for c in 0..dim {
        unit[c] = Complex64::new(1.0, 0.0);
        let mut col = vec![Complex64::new(0.0, 0.0); dim];
        apply_edges(&edges, &unit, &mut col);
        for r in 0..dim {
            x[(r, c)] = col[r];
        }
        unit[c] = Complex64::new(0.0, 0.0);
    }
    let to_mask = |s: &VertexSet| s.iter().fold(0usize, |m, w| m | (1 << w));
    for s in sets.iter().rev() {
        let m = to_mask(s);
        // a†_M X − X a†_M, with a†_M|y⟩ = |y ∪ M⟩ when y ∩ M = ∅.
        let mut next = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for r in 0..dim {
            for c in 0..dim {
                let mut val = Complex64::new(0.0, 0.0);
                if r & m == m {
                    val += x[(r ^ m, c)];
                }
                if c & m == 0 {
                    val -= x[(r, c | m)];
                }
                next[(r, c)] = val;
            }
        }
        x = next;
    }
    Ok(x[(to_mask(target), 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EdgeTerm;
    use crate::pauli::parse_pauli_expression;

    fn op(expr: &str) -> TwoQubitOperator {
        parse_pauli_expression(expr).unwrap()
    }

    fn transverse_edge() -> SpinModel {
        SpinModel::from_parts(&[1.0, 1.0], vec![EdgeTerm::new(0, 1, op("-1.0*XI - 1.0*IX"))]).unwrap()
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn hamiltonian_embedding() {
        let single = SpinModel::from_parts(&[1.0], vec![]).unwrap();
        let h = build_hamiltonian(&single, 0.3).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]));
        let xx = SpinModel::from_parts(&[1.0, 1.0], vec![EdgeTerm::new(0, 1, op("XX"))]).unwrap();
        let h = build_hamiltonian(&xx, 0.1).unwrap();
        assert_eq!(h[(3, 0)], c(0.1));
        for (i, d) in [0.0, 1.0, 1.0, 2.0].iter().enumerate() {
            assert_eq!(h[(i, i)], c(*d));
        }
    }

    #[test]
    fn embedding_respects_vertex_bits() {
        // ⟨10|V|00⟩ on edge (u,v) = (2,0): flipping vertex 2 sets bit 2.
        let model = SpinModel::from_parts(&[1.0, 1.0, 1.0], vec![EdgeTerm::new(2, 0, op("XI"))]).unwrap();
        let h = build_hamiltonian(&model, 1.0).unwrap();
        assert_eq!(h[(4, 0)], c(1.0));
        assert_eq!(h[(1, 0)], c(0.0));
    }

    #[test]
    fn transverse_ground_energy() {
        let model = transverse_edge();
        for eps in [0.0, 1e-3, 0.1, 0.4] {
            let g = ground(&model, eps).unwrap();
            let exact = 2.0 * (0.5 - (0.25 + eps * eps).sqrt());
            assert!((g.energy - exact).abs() < 1e-12, "eps={eps}");
            assert!(g.state[0].im == 0.0 && g.state[0].re > 0.0);
        }
        let g = ground(&model, 0.0).unwrap();
        assert!((g.state[0].re - 1.0).abs() < 1e-14);
        assert_eq!(gap(&model, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let a = op("0.4*XX + 0.3*YY - 0.2*ZI + 0.5*XZ + 0.5*ZX");
        let edges: Vec<EdgeTerm> = (0..8).map(|i| EdgeTerm::new(i, (i + 1) % 9, a.clone())).collect();
        let gaps: Vec<f64> = (0..9).map(|i| 1.0 + 0.05 * i as f64).collect();
        let model = SpinModel::from_parts(&gaps, edges).unwrap();
        let g = ground(&model, 0.05).unwrap();
        let h = build_hamiltonian(&model, 0.05).unwrap();
        let dense = SymmetricEigen::new(h).eigenvalues.min();
        assert!((g.energy - dense).abs() < 1e-11 * dense.abs().max(1.0));
        assert!(residual(&model, 0.05, &g).unwrap() < 1e-9 * norm_bound(&model, 0.05));
    }

    #[test]
    fn precise_ground_matches_ed() {
        let model = transverse_edge();
        let eps = 1e-3;
        let pg = precise_ground(&model, eps).unwrap();
        let exact = -2.0 * eps * eps / (0.5 + (0.25 + eps * eps).sqrt());
        assert!((pg.energy.leading().re - exact).abs() < 1e-15 * exact.abs());
        let g = ground(&model, eps).unwrap();
        let norm0 = g.state[0].re;
        for (a, b) in pg.state.iter().zip(&g.state) {
            assert!((a.leading() - b / norm0).norm() < 1e-12);
        }
    }

    #[test]
    fn product_state_extraction() {
        let alphas = [0.3, -0.2, 0.7];
        let dim = 8;
        let state: Vec<Complex64> = (0..dim)
            .map(|m| (0..3).filter(|&u| bit(m, u) == 1).map(|u| c(alphas[u])).product())
            .collect();
        let coeffs = extract_creation_coefficients(&state).unwrap();
        for u in 0..3 {
            assert!((coeffs.get(&VertexSet::singleton(u as u32)) - c(-alphas[u])).norm() < 1e-15);
        }
        for m in 1..dim {
            if m.count_ones() >= 2 {
                assert!(coeffs.values[m].norm() < 1e-15);
            }
        }
    }

    #[test]
    fn pair_state_extraction() {
        let beta = Complex64::new(0.4, -0.1);
        let state = vec![c(1.0), c(0.0), c(0.0), beta];
        let coeffs = extract_creation_coefficients(&state).unwrap();
        assert_eq!(coeffs.values[1], c(0.0));
        assert_eq!(coeffs.values[2], c(0.0));
        assert_eq!(coeffs.values[3], -beta);
        assert!(matches!(
            extract_creation_coefficients(&[c(0.0), c(1.0)]),
            Err(Error::OrthogonalToVacuum)
        ));
    }

    #[test]
    fn extraction_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut state: Vec<Complex64> = (0..32)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        state[0] = c(1.0);
        let coeffs = extract_creation_coefficients(&state).unwrap();
        let back = rebuild_state(&coeffs);
        for (a, b) in back.iter().zip(&state) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn expectation_values() {
        let mut omega = vec![c(0.0); 8];
        omega[0] = c(1.0);
        let o = op("0.3*ZZ + 0.5*XI + 0.2*II");
        assert!((expectation(&omega, &o, 0, 2) - o.get(0, 0).re).abs() < 1e-15);
        assert!((expectation(&omega, &op("II"), 1, 2) - 1.0).abs() < 1e-15);
        let alpha: f64 = 0.35;
        let product = vec![c(1.0), c(alpha), c(0.0), c(0.0)];
        let z = expectation(&product, &op("ZI"), 0, 1);
        assert!((z - (1.0 - alpha * alpha) / (1.0 + alpha * alpha)).abs() < 1e-14);
    }

    #[test]
    fn numeric_series_examples() {
        let diag = TwoQubitOperator::diagonal([0.25, 1.0, -1.0, 3.0]);
        let model = SpinModel::from_parts(&[1.0, 1.0, 2.0], vec![EdgeTerm::new(0, 1, diag.clone()), EdgeTerm::new(2, 1, diag)]).unwrap();
        let s = numeric_series(&model, 4).unwrap();
        assert!((s.coeffs[0] - 0.5).abs() < 1e-9);
        assert!(s.coeffs[1..].iter().all(|x| x.abs() < 1e-9), "{:?}", s.coeffs);
        let s = numeric_series(&transverse_edge(), 6).unwrap();
        assert!((s.coeffs[1] + 2.0).abs() < 1e-6, "{:?}", s.coeffs);
        assert!(s.conditioning.is_finite());
    }

    #[test]
    fn gap_at_zero_coupling() {
        let model = SpinModel::from_parts(&[1.5, 0.7, 2.0], vec![EdgeTerm::new(0, 1, op("XX"))]).unwrap();
        assert!((gap(&model, 0.0).unwrap() - 0.7).abs() < 1e-14);
        let single = SpinModel::from_parts(&[1.0], vec![]).unwrap();
        assert_eq!(gap(&single, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn dense_kernel_examples() {
        let set = |ids: &[u32]| VertexSet::from_ids(ids.iter().copied());
        let xx = op("XX");
        assert_eq!(dense_commutator_element(2, &set(&[0, 1]), &[], 0, 1, &xx).unwrap(), c(1.0));
        // Vertex 0 is the edge's first endpoint, i.e. the high local bit.
        let xi = op("XI");
        let got = dense_commutator_element(2, &VertexSet::empty(), &[&set(&[0])], 0, 1, &xi).unwrap();
        assert_eq!(got, c(-1.0));
    }

    #[test]
    fn size_caps() {
        let model = SpinModel::from_parts(&vec![1.0; 15], vec![]).unwrap();
        assert!(matches!(ground(&model, 0.0), Err(Error::TooManyQubits { n: 15, .. })));
        assert!(matches!(build_hamiltonian(&model, 0.0), Err(Error::TooManyQubits { .. })));
    }
}

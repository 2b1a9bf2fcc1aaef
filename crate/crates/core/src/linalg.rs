//! Dense complex linear-algebra helpers shared by the other modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

fn symmetrized(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrized(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending and
/// eigenvectors in the matching columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = symmetrized(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalue spread still treated as one degenerate cluster.
const CLUSTER_TOL: f64 = 1e-12;
/// Components with smaller weight are dropped.
const WEIGHT_FLOOR: f64 = 1e-15;

/// Split a Hermitian matrix as `shift * 1 + sum_k w_k v_k v_k^dag`, where
/// `shift` is the eigenvalue of largest multiplicity. Noisy states then
/// need only a few components.
pub fn shifted_low_rank(m: &CMat) -> (f64, Vec<(f64, Vec<C64>)>) {
    let (values, vectors) = hermitian_eigen(m);
    let n = values.len();
    // Longest run of sorted eigenvalues within CLUSTER_TOL of its start.
    let (mut best_start, mut best_len) = (0, 0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[start] <= CLUSTER_TOL {
            end += 1;
        }
        if end - start > best_len {
            best_start = start;
            best_len = end - start;
        }
        start = end;
    }
    let cluster = best_start..best_start + best_len;
    let shift = values[cluster.clone()].iter().sum::<f64>() / best_len.max(1) as f64;
    let components = (0..n)
        .filter(|i| !cluster.contains(i))
        .filter_map(|i| {
            let w = values[i] - shift;
            (w.abs() > WEIGHT_FLOOR).then(|| (w, vectors.column(i).iter().copied().collect()))
        })
        .collect();
    (shift, components)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)[0]
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// R's diagonal moved into Q.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for c in 0..n {
        let rc = r[(c, c)];
        let phase = if rc.norm() > 0.0 { rc / rc.norm() } else { ONE };
        for row in 0..n {
            q[(row, c)] *= phase;
        }
    }
    q
}

/// Normalized random pure state in `C^n`.
pub fn random_pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    let v = CVec::from_fn(n, |_, _| gaussian(rng));
    let norm = v.norm();
    v.unscale(norm)
}

/// Random full-rank density matrix `G G† / Tr(G G†)`.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| gaussian(rng));
    let rho = &g * g.adjoint();
    let tr = trace(&rho).re;
    rho.unscale(tr)
}

pub fn projector(v: &CVec) -> CMat {
    v * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..6 {
            let u = random_unitary(n, &mut rng);
            assert!(max_abs_diff(&(u.adjoint() * &u), &identity(n)) < 1e-12);
        }
    }

    #[test]
    fn eigen_sorted_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(5, &mut rng);
        let (vals, vecs) = hermitian_eigen(&rho);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let diag = CMat::from_diagonal(&CVec::from_iterator(5, vals.iter().map(|&v| C64::from(v))));
        let back = &vecs * diag * vecs.adjoint();
        assert!(max_abs_diff(&back, &rho) < 1e-12);
        assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

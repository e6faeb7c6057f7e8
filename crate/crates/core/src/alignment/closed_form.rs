//! Closed-form fits: ridge-stabilized least squares, orthogonal Procrustes
//! and the spectral-norm ball projection.

use ndarray::{Array1, Array2};

use super::{AnchorSet, LinearMap, Method};
use crate::error::Result;
use crate::linalg::{solve_spd, svd};

/// Ridge added to the diagonal of `X^T X`.
pub const RIDGE: f64 = 1e-8;

/// Minimizes `sum_i |x_i W^T - y_i|^2` through the normal equations.
pub fn align_least_squares(anchors: &AnchorSet) -> Result<LinearMap> {
    let x = &anchors.x;
    let mut gram = x.t().dot(x);
    gram.diag_mut().mapv_inplace(|v| v + RIDGE);
    let rhs = x.t().dot(&anchors.y);
    // solves for W^T
    let wt = solve_spd(&gram, &rhs)?;
    let mut map = LinearMap::new(wt.reversed_axes(), Method::LeastSquares)?;
    map.set_param("ridge", RIDGE);
    map.set_param("anchors", anchors.len());
    Ok(map)
}

/// The orthogonal `W` maximizing `sum_i <x_i W^T, y_i>`.
///
/// With `U S V^T = X^T Y` the optimum is `W = V U^T`. On unit-length
/// anchors this also maximizes the summed cosine similarity.
pub fn align_procrustes(anchors: &AnchorSet) -> Result<LinearMap> {
    if !anchors.normalized {
        log::debug!("Procrustes fit on anchors that are not flagged as normalized");
    }
    let m = anchors.x.t().dot(&anchors.y);
    let (u, _, vt) = svd(&m)?;
    let w = u.dot(&vt).reversed_axes();
    let mut map = LinearMap::new(w, Method::Procrustes)?;
    map.set_param("anchors", anchors.len());
    Ok(map)
}

/// Projects onto the unit spectral-norm ball by clamping singular values at 1.
pub fn spectral_project(w: &Array2<f64>) -> Result<Array2<f64>> {
    let (u, s, vt) = svd(w)?;
    let clamped = Array1::from_iter(s.into_iter().map(|v| v.min(1.0)));
    Ok((u * &clamped).dot(&vt))
}

/// `sum_i |x_i W^T - y_i|^2`.
pub fn residual(anchors: &AnchorSet, w: &Array2<f64>) -> f64 {
    let diff = anchors.x.dot(&w.t()) - &anchors.y;
    diff.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, orthogonality_error};
    use crate::synth::random_orthogonal;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| StandardNormal.sample(rng))
    }

    fn anchors(x: Array2<f64>, y: Array2<f64>) -> AnchorSet {
        AnchorSet::from_matrices(x, y).unwrap()
    }

    #[test]
    fn lstsq_swap() {
        let w = align_least_squares(&anchors(Array2::eye(2), array![[0.0, 1.0], [1.0, 0.0]])).unwrap();
        assert_abs_diff_eq!(w.matrix(), &array![[0.0, 1.0], [1.0, 0.0]], epsilon = 1e-6);
        assert!(!w.is_orthogonal());
    }

    #[test]
    fn lstsq_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(&mut rng, 20, 4);
        let w = align_least_squares(&anchors(x.clone(), x)).unwrap();
        assert_abs_diff_eq!(w.matrix(), &Array2::eye(4), epsilon = 1e-6);
    }

    #[test]
    fn lstsq_exact_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gaussian(&mut rng, 50, 8);
        let w_true = gaussian(&mut rng, 8, 8);
        let y = x.dot(&w_true.t());
        let w = align_least_squares(&anchors(x.clone(), y.clone())).unwrap();
        assert_abs_diff_eq!(w.matrix(), &w_true, epsilon = 1e-6);
        // mapped anchors land on their targets
        let mapped = x.dot(&w.matrix().t());
        assert_abs_diff_eq!(mapped, y, epsilon = 1e-6);
    }

    #[test]
    fn lstsq_rank_deficient_survives() {
        let x = array![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let y = array![[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let w = align_least_squares(&anchors(x.clone(), y.clone())).unwrap();
        assert!(residual(&anchors(x, y), w.matrix()) < 1e-12);
    }

    #[test]
    fn procrustes_identity_and_rotation() {
        let w = align_procrustes(&anchors(Array2::eye(3), Array2::eye(3))).unwrap();
        assert_abs_diff_eq!(w.matrix(), &Array2::eye(3), epsilon = 1e-12);

        // 90 degree rotation Q = [[0,-1],[1,0]] applied to rows: y = x Q^T
        let q = array![[0.0, -1.0], [1.0, 0.0]];
        let y = Array2::<f64>::eye(2).dot(&q.t());
        let w = align_procrustes(&anchors(Array2::eye(2), y)).unwrap();
        assert_abs_diff_eq!(w.matrix(), &q, epsilon = 1e-12);
        assert!(w.is_orthogonal());
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_orthogonal(50, &mut rng);
        let x = gaussian(&mut rng, 1000, 50);
        let y = x.dot(&q.t());
        let w = align_procrustes(&anchors(x, y)).unwrap();
        assert!(frobenius(&(w.matrix() - &q)) < 1e-6);
    }

    #[test]
    fn spectral_examples() {
        let p = spectral_project(&array![[2.0, 0.0], [0.0, 0.5]]).unwrap();
        assert_abs_diff_eq!(p, array![[1.0, 0.0], [0.0, 0.5]], epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = random_orthogonal(6, &mut rng);
        assert_abs_diff_eq!(spectral_project(&q).unwrap(), q, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn procrustes_always_orthogonal(seed: u64, m in 1usize..30, d in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = anchors(gaussian(&mut rng, m, d), gaussian(&mut rng, m, d));
            let w = align_procrustes(&a).unwrap();
            prop_assert!(orthogonality_error(w.matrix()) <= 1e-5);
            prop_assert!(w.is_orthogonal());
        }

        #[test]
        fn spectral_idempotent_and_shrinking(seed: u64, d in 1usize..8, scale in 0.1f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = gaussian(&mut rng, d, d) * scale;
            let p1 = spectral_project(&w).unwrap();
            let p2 = spectral_project(&p1).unwrap();
            prop_assert!((&p2 - &p1).iter().all(|v| v.abs() < 1e-9));
            let (_, s0, _) = svd(&w).unwrap();
            let (_, s1, _) = svd(&p1).unwrap();
            let mut s0 = s0; let mut s1 = s1;
            s0.sort_by(|a, b| b.partial_cmp(a).unwrap());
            s1.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (a, b) in s0.iter().zip(&s1) {
                prop_assert!(*b <= a + 1e-12);
                prop_assert!(*b <= 1.0 + 1e-12);
            }
        }
    }
}

mod common;

use netadapt::linalg::{self, kron, Matrix};
use num_complex::Complex64;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v))
}

fn square(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max).prop_flat_map(|n| matrix(n, n))
}

fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    a.shape() == b.shape() && (a - b).max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

proptest! {
    #[test]
    fn kron_is_bilinear(a in matrix(2, 3), b in matrix(3, 2), c in matrix(2, 3), alpha in -5.0..5.0f64) {
        let lhs = kron(&a.scale(alpha), &b).unwrap();
        prop_assert!(close(&lhs, &kron(&a, &b).unwrap().scale(alpha), 1e-14));
        prop_assert!(close(&kron(&a, &b.scale(alpha)).unwrap(), &lhs, 1e-14));
        let sum = kron(&(&a + &c), &b).unwrap();
        prop_assert!(close(&sum, &(&kron(&a, &b).unwrap() + &kron(&c, &b).unwrap()), 1e-14));
    }

    #[test]
    fn kron_mixed_product(n in 2usize..=3, k in 2usize..=3, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let a = common::uniform_matrix(&mut rng, n, k, -1.0, 1.0);
        let c = common::uniform_matrix(&mut rng, k, n, -1.0, 1.0);
        let b = common::uniform_matrix(&mut rng, k, n, -1.0, 1.0);
        let d = common::uniform_matrix(&mut rng, n, k, -1.0, 1.0);
        let lhs = &kron(&a, &b).unwrap() * &kron(&c, &d).unwrap();
        let rhs = kron(&(&a * &c), &(&b * &d)).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12);
    }

    #[test]
    fn kron_with_identity_repeats_eigenvalues(a in square(4), n in 1usize..=3) {
        let base = linalg::eigenvalues(&a).unwrap().eigenvalues;
        let expected: Vec<Complex64> = base.iter().flat_map(|&l| std::iter::repeat(l).take(n)).collect();
        let got = linalg::eigenvalues(&kron(&a, &Matrix::identity(n)).unwrap()).unwrap().eigenvalues;
        prop_assert!(common::multiset_match(&expected, &got, 1e-8));
    }

    #[test]
    fn eigenvalue_sum_is_trace(a in square(8)) {
        let sum: Complex64 = linalg::eigenvalues(&a).unwrap().eigenvalues.iter().sum();
        prop_assert!((sum.re - a.trace()).abs() <= 1e-8 * (1.0 + a.trace().abs()));
        prop_assert!(sum.im.abs() <= 1e-8);
    }

    #[test]
    fn symmetric_eigenvalue_sum_is_trace(a in square(8)) {
        let s = a.sym();
        let sum: f64 = linalg::symmetric_eigenvalues(&s).unwrap().iter().sum();
        prop_assert!((sum - s.trace()).abs() <= 1e-8 * (1.0 + s.trace().abs()));
    }

    #[test]
    fn lyapunov_solution_satisfies_equation(n in 1usize..=6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let h = common::hurwitz(&mut rng, n);
        let r = common::uniform_matrix(&mut rng, n, n, -1.0, 1.0);
        let q = &(&r * &r.transpose()) + &Matrix::identity(n).scale(0.1);
        let p = linalg::solve_lyapunov_continuous(&h, &q).unwrap();
        let residual = &(&(&h.transpose() * &p) + &(&p * &h)) + &q;
        prop_assert!(common::rel_residual(&residual, &q) <= 1e-8);
        prop_assert!(linalg::is_positive_definite(&p).unwrap());
    }

    #[test]
    fn stein_solution_satisfies_equation(n in 1usize..=6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let s = common::schur(&mut rng, n);
        let r = common::uniform_matrix(&mut rng, n, n, -1.0, 1.0);
        let q = &(&r * &r.transpose()) + &Matrix::identity(n).scale(0.1);
        let p = linalg::solve_stein(&s, &q).unwrap();
        let residual = &(&(&(&s.transpose() * &p) * &s) - &p) + &q;
        prop_assert!(common::rel_residual(&residual, &q) <= 1e-8);
        prop_assert!(linalg::is_positive_definite(&p).unwrap());
    }
}

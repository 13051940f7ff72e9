use approx::assert_relative_eq;
use proptest::prelude::*;

use imexdg_core::basis::{Basis1D, Matrix1D};
use imexdg_core::kernels::{apply_tensor, mass_apply, sum_factorized_interpolate, CollocatedInverse, TensorScratch};

fn dense_kron_apply(factors: &[&Matrix1D], x: &[f64]) -> Vec<f64> {
    let dim = factors.len();
    let rows: Vec<usize> = factors.iter().map(|m| m.rows).collect();
    let cols: Vec<usize> = factors.iter().map(|m| m.cols).collect();
    let n_out: usize = rows.iter().product();
    let n_in: usize = cols.iter().product();
    let split = |mut k: usize, ext: &[usize]| -> Vec<usize> {
        (0..dim)
            .map(|a| {
                let v = k % ext[a];
                k /= ext[a];
                v
            })
            .collect()
    };
    (0..n_out)
        .map(|o| {
            let oi = split(o, &rows);
            (0..n_in)
                .map(|i| {
                    let ii = split(i, &cols);
                    (0..dim).map(|a| factors[a].get(oi[a], ii[a])).product::<f64>() * x[i]
                })
                .sum()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sum_factorization_equals_the_kronecker_product(
        r in 1usize..=4,
        dim in 1usize..=3,
        vals in prop::collection::vec(-1.0f64..1.0, 125),
    ) {
        let b = Basis1D::consistent(r).unwrap();
        let factors: Vec<&Matrix1D> = (0..dim).map(|a| if a % 2 == 0 { &b.interp } else { &b.deriv }).collect();
        let nd = (r + 1).pow(dim as u32);
        let x = &vals[..nd];
        let mut out = vec![0.0; b.n_quad().pow(dim as u32)];
        apply_tensor(&factors, false, x, &mut out, &mut TensorScratch::new());
        let dense = dense_kron_apply(&factors, x);
        for (u, v) in out.iter().zip(&dense) {
            assert_relative_eq!(u, v, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn transposed_application_is_the_adjoint(
        r in 1usize..=4,
        dim in 2usize..=3,
        vals in prop::collection::vec(-1.0f64..1.0, 125 + 729),
    ) {
        let b = Basis1D::consistent(r).unwrap();
        let factors = vec![&b.interp; dim];
        let nd = (r + 1).pow(dim as u32);
        let nq = b.n_quad().pow(dim as u32);
        let x = &vals[..nd];
        let y = &vals[125..125 + nq];
        let mut s = TensorScratch::new();
        let mut tx = vec![0.0; nq];
        let mut ty = vec![0.0; nd];
        apply_tensor(&factors, false, x, &mut tx, &mut s);
        apply_tensor(&factors, true, y, &mut ty, &mut s);
        assert_relative_eq!(dot(&tx, y), dot(x, &ty), epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn collocated_inverse_undoes_the_mass(
        r in 1usize..=5,
        dim in 2usize..=3,
        x in prop::collection::vec(-1.0f64..1.0, 216),
        w in prop::collection::vec(0.1f64..3.0, 216),
    ) {
        let b = Basis1D::collocated(r).unwrap();
        let inv = CollocatedInverse::new(&b, dim).unwrap();
        let nd = inv.n_dofs();
        let mut s = TensorScratch::new();
        let mut mx = vec![0.0; nd];
        mass_apply(&b, dim, &w[..nd], &x[..nd], &mut mx, &mut s);
        let mut back = vec![0.0; nd];
        inv.apply(&w[..nd], &mx, &mut back, &mut s).unwrap();
        for (u, v) in back.iter().zip(&x[..nd]) {
            assert_relative_eq!(u, v, epsilon = 1e-11);
        }
    }
}

#[test]
fn interpolation_reproduces_polynomials_of_the_basis_degree() {
    for r in 1..=5 {
        let b = Basis1D::consistent(r).unwrap();
        let f = |x: f64, y: f64| (0..=r).map(|k| (k as f64 + 1.0) * x.powi(k as i32) * y.powi((r - k) as i32)).sum::<f64>();
        let n = r + 1;
        let coeffs: Vec<f64> = (0..n * n).map(|k| f(b.nodes[k % n], b.nodes[k / n])).collect();
        let vals = sum_factorized_interpolate(&[&b, &b], &coeffs).unwrap();
        let nq = b.n_quad();
        for (k, v) in vals.iter().enumerate() {
            let expect = f(b.rule.points[k % nq], b.rule.points[k / nq]);
            assert_relative_eq!(*v, expect, epsilon = 1e-12, max_relative = 1e-12);
        }
    }
}

#[test]
fn interpolation_rejects_bad_shapes() {
    let b = Basis1D::consistent(2).unwrap();
    assert!(sum_factorized_interpolate(&[&b, &b], &[0.0; 8]).is_err());
    assert!(sum_factorized_interpolate(&[&b, &b, &b, &b], &[0.0; 81]).is_err());
}

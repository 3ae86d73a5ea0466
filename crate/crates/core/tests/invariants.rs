//! Cross-module properties checked against the brute-force oracles.

use num_complex::Complex64;
use proptest::prelude::*;
use specdet_core::bundle::{bundle_determinant, flatten_symbol, BundleSymbol, DualObject};
use specdet_core::invariant::{invariant_determinant, BlockSymbol};
use specdet_core::lattice::{lattice_determinant, nuclear_norm_estimate, LatticeKernel};
use specdet_core::linalg::{lu_determinant, mat_mul, CMatrix};
use specdet_core::oracle::{assemble_truncation, direct_determinant};
use specdet_core::toroidal::{toroidal_matrix, ToroidalSymbol};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c(a, b))
}

fn matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    proptest::collection::vec(complex(), n * n).prop_map(move |d| CMatrix::new(n, n, d).unwrap())
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn entry_l1(m: &CMatrix) -> f64 {
    m.as_slice().iter().map(|z| z.norm()).sum()
}

/// Table kernel on ℤ with support radius `r0` and roughly half the box filled.
fn kernel(r0: i64) -> impl Strategy<Value = LatticeKernel> {
    let side = (2 * r0 + 1) as usize;
    proptest::collection::vec(proptest::option::weighted(0.5, complex()), side * side).prop_map(move |cells| {
        let entries = cells
            .into_iter()
            .enumerate()
            .filter_map(|(idx, v)| v.map(|v| (vec![(idx / side) as i64 - r0], vec![(idx % side) as i64 - r0], v)))
            .collect();
        LatticeKernel::table(1, "random", entries).unwrap()
    })
}

fn bundle(max_fiber: usize, max_dual: usize) -> impl Strategy<Value = BundleSymbol> {
    (1..=max_fiber, proptest::collection::vec(1..=max_dual, 1..=3)).prop_flat_map(|(fiber, dims)| {
        let per_block: Vec<_> =
            dims.iter().map(|&d| proptest::collection::vec(matrix(d), fiber * fiber)).collect();
        per_block.prop_map(move |sig| {
            let dual = DualObject::new("d", dims.iter().enumerate().map(|(k, &d)| (format!("x{k}"), d)).collect()).unwrap();
            BundleSymbol::new("b", fiber, dual, |i, r, xi| sig[xi][i * fiber + r].clone()).unwrap()
        })
    })
}

/// Householder reflection `I - 2vv*/|v|²`, which is unitary.
fn reflection(v: &[Complex64]) -> CMatrix {
    let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    CMatrix::from_fn(v.len(), v.len(), |p, q| {
        let delta = if p == q { c(1.0, 0.0) } else { c(0.0, 0.0) };
        if n2 == 0.0 {
            delta
        } else {
            delta - 2.0 * v[p] * v[q].conj() / n2
        }
    })
    .unwrap()
}

fn unflatten_block(s: &CMatrix, side: usize, i: usize, r: usize) -> CMatrix {
    CMatrix::from_fn(side, side, |p, q| s.get(r * side + p, i * side + q)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lattice_series_matches_truncation_oracle(k in (0i64..=3).prop_flat_map(kernel), extra in 0i64..=2, t in 0.0f64..1.0, phase in 0.0f64..6.3) {
        let r = k.declared_support().unwrap().max(1) + extra;
        let bound = nuclear_norm_estimate(&k, 1.0, r).unwrap().max(1.0);
        let lambda = Complex64::from_polar(0.5 * t / bound, phase);
        for order in [1usize, 5, 40] {
            let s = lattice_determinant(&k, lambda, order, r, 1e-14).unwrap();
            if s.converged {
                let o = direct_determinant(&assemble_truncation(&k, r).unwrap(), lambda).unwrap();
                prop_assert!((s.value - o).norm() <= 1e-6 * (1.0 + s.value.norm()));
            }
        }
    }

    #[test]
    fn nuclear_norm_is_monotone_in_cutoff(k in (0i64..=3).prop_flat_map(kernel), p in 1.0f64..3.0) {
        let norms: Vec<f64> = (1..=5).map(|r| nuclear_norm_estimate(&k, p, r).unwrap()).collect();
        prop_assert!(norms.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn oracle_determinant_is_multiplicative(a in kernel(2), b in kernel(2)) {
        let (ma, mb) = (assemble_truncation(&a, 2).unwrap(), assemble_truncation(&b, 2).unwrap());
        let id = CMatrix::identity(ma.rows());
        let prod = mat_mul(&id.add(&ma).unwrap(), &id.add(&mb).unwrap()).unwrap();
        let one = c(1.0, 0.0);
        let lhs = direct_determinant(&prod.add(&id.scale(-one)).unwrap(), one).unwrap();
        let rhs = direct_determinant(&ma, one).unwrap() * direct_determinant(&mb, one).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm().max(1.0));
    }

    #[test]
    fn det_of_ab_and_ba_agree_on_truncations(a in kernel(2), b in kernel(2)) {
        let (ma, mb) = (assemble_truncation(&a, 2).unwrap(), assemble_truncation(&b, 2).unwrap());
        let one = c(1.0, 0.0);
        let ab = direct_determinant(&mat_mul(&ma, &mb).unwrap(), one).unwrap();
        let ba = direct_determinant(&mat_mul(&mb, &ma).unwrap(), one).unwrap();
        prop_assert!((ab - ba).norm() <= 1e-9 * ba.norm().max(1.0));
    }

    #[test]
    fn trig_polynomial_quantization_is_exact(coeffs in proptest::collection::vec((complex(), -1.0f64..1.0), 5), cutoff in 1i64..=6) {
        // σ(x, k) = Σ_{|θ|≤2} c_θ(k) e^{2πixθ} with c_θ(k) = a_θ e^{i w_θ k}/(1+k²)
        let c_theta = move |th: i64, k: i64| {
            let (a, w) = coeffs[(th + 2) as usize];
            a * Complex64::from_polar(1.0 / (1.0 + (k * k) as f64), w * k as f64)
        };
        let sampled = c_theta.clone();
        let s = ToroidalSymbol::from_fn(1, -2.0, 64, "trig", move |x, k| {
            (-2..=2i64).map(|th| sampled(th, k[0]) * Complex64::from_polar(1.0, std::f64::consts::TAU * th as f64 * x[0])).sum()
        }).unwrap();
        let m = toroidal_matrix(&s, cutoff).unwrap();
        for j in -cutoff..=cutoff {
            for k in -cutoff..=cutoff {
                let want = if (j - k).abs() <= 2 { c_theta(j - k, k) } else { c(0.0, 0.0) };
                prop_assert!((m.eval_raw(&[j], &[k]) - want).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn block_determinant_factorizes(blocks in proptest::collection::vec((1usize..=4).prop_flat_map(matrix), 1..=6), t in 0.0f64..1.0, phase in 0.0f64..6.3) {
        let bound: f64 = blocks.iter().map(entry_l1).sum();
        let lambda = Complex64::from_polar(0.5 * t / bound.max(1e-12), phase);
        let sym = BlockSymbol::new("b", blocks.clone()).unwrap();
        let s = invariant_determinant(&sym, lambda, 60, 1e-15).unwrap();
        prop_assert!(s.converged);
        let mut o = c(1.0, 0.0);
        for b in &blocks {
            o *= lu_determinant(&b.identity_plus_scaled(lambda).unwrap()).unwrap();
        }
        prop_assert!(rel(s.value, o) <= 1e-8);
    }

    #[test]
    fn block_diagonal_matrix_acts_blockwise(blocks in proptest::collection::vec((1usize..=4).prop_flat_map(matrix), 1..=5), seed in proptest::collection::vec(complex(), 20)) {
        let sym = BlockSymbol::new("b", blocks.clone()).unwrap();
        let t = CMatrix::block_diagonal(&blocks).unwrap();
        let n = t.rows();
        let f = CMatrix::new(n, 1, seed[..n].to_vec()).unwrap();
        let tf = mat_mul(&t, &f).unwrap();
        for (l, off) in sym.offsets().into_iter().enumerate() {
            let d = sym.dims()[l];
            let f_l = CMatrix::new(d, 1, seed[off..off + d].to_vec()).unwrap();
            let want = mat_mul(sym.block(l), &f_l).unwrap();
            for p in 0..d {
                prop_assert_eq!(tf.get(off + p, 0), want.get(p, 0));
            }
        }
    }

    #[test]
    fn bundle_determinant_factorizes(a in bundle(3, 3), t in 0.0f64..1.0, phase in 0.0f64..6.3) {
        let flats: Vec<(usize, CMatrix)> = a.dual().blocks().iter().map(|(id, d)| (*d, flatten_symbol(&a, id).unwrap())).collect();
        let bound: f64 = flats.iter().map(|(d, s)| *d as f64 * entry_l1(s)).sum();
        let lambda = Complex64::from_polar(0.5 * t / bound.max(1e-12), phase);
        let s = bundle_determinant(&a, lambda, 60, 1e-15).unwrap();
        prop_assert!(s.converged);
        let mut o = c(1.0, 0.0);
        for (d, m) in &flats {
            o *= direct_determinant(m, lambda).unwrap().powu(*d as u32);
        }
        prop_assert!(rel(s.value, o) <= 1e-8);
    }

    #[test]
    fn bundle_determinant_is_unitarily_invariant(a in bundle(3, 2), v in proptest::collection::vec(complex(), 6), t in 0.0f64..1.0) {
        let mut conj = Vec::new();
        let mut bound = 0.0;
        for (id, d) in a.dual().blocks() {
            let s = flatten_symbol(&a, id).unwrap();
            bound += *d as f64 * entry_l1(&s);
            let u = reflection(&v[..s.rows()]);
            conj.push(mat_mul(&mat_mul(&u, &s).unwrap(), &u.conj_transpose()).unwrap());
        }
        let dims: Vec<usize> = a.dual().blocks().iter().map(|b| b.1).collect();
        let b = BundleSymbol::new("conj", a.fiber_dim(), a.dual().clone(), |i, r, xi| unflatten_block(&conj[xi], dims[xi], i, r)).unwrap();
        let lambda = c(0.5 * t / bound.max(1e-12), 0.0);
        let (da, db) = (bundle_determinant(&a, lambda, 60, 1e-15).unwrap(), bundle_determinant(&b, lambda, 60, 1e-15).unwrap());
        prop_assert!((da.value - db.value).norm() <= 1e-10 * da.value.norm().max(1.0));
    }

    #[test]
    fn scalar_fiber_bundles_reduce_to_block_symbols(a in bundle(1, 3), t in 0.0f64..1.0, phase in 0.0f64..6.3) {
        let mut blocks = Vec::new();
        let mut bound = 0.0;
        for (id, d) in a.dual().blocks() {
            let s = flatten_symbol(&a, id).unwrap();
            bound += *d as f64 * entry_l1(&s);
            blocks.extend(std::iter::repeat_n(s, *d));
        }
        let lambda = Complex64::from_polar(0.5 * t / bound.max(1e-12), phase);
        let via_bundle = bundle_determinant(&a, lambda, 60, 1e-15).unwrap();
        let via_blocks = invariant_determinant(&BlockSymbol::new("r", blocks).unwrap(), lambda, 60, 1e-15).unwrap();
        prop_assert!((via_bundle.value - via_blocks.value).norm() <= 1e-10 * via_blocks.value.norm().max(1.0));
    }
}

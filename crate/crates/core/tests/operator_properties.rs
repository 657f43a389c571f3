//! Algebraic invariants of the operator layer, checked against explicit
//! Kronecker products built here.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use qloop_core::operator::{
    evolve_exact, ground_state, hermitian_eigen, jordan_wigner, to_dense, FermionTerm, LanczosOptions, Ladder, Pauli,
    PauliString, PauliSum, StateVector,
};

type M = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single(p: Pauli) -> M {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    match p {
        Pauli::I => M::from_row_slice(2, 2, &[l, o, o, l]),
        Pauli::X => M::from_row_slice(2, 2, &[o, l, l, o]),
        Pauli::Y => M::from_row_slice(2, 2, &[o, -i, i, o]),
        Pauli::Z => M::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}

/// Qubit 0 is the least significant bit, so it is the rightmost factor.
fn kron_string(s: &PauliString) -> M {
    s.letters().iter().fold(M::identity(1, 1), |acc, &p| single(p).kronecker(&acc))
}

fn kron_sum(h: &PauliSum) -> M {
    let d = h.dim();
    h.terms().iter().fold(M::zeros(d, d), |acc, (coef, s)| acc + kron_string(s) * *coef)
}

fn pauli() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

fn pauli_sum(max_qubits: usize, hermitian: bool) -> impl Strategy<Value = PauliSum> {
    (1..=max_qubits).prop_flat_map(move |n| {
        prop::collection::vec(
            (prop::collection::vec(pauli(), n), -2.0..2.0f64, -2.0..2.0f64),
            1..10,
        )
        .prop_map(move |terms| {
            let terms = terms.into_iter().map(|(letters, re, im)| {
                let im = if hermitian { 0.0 } else { im };
                (c(re, im), PauliString::new(letters).unwrap())
            });
            PauliSum::from_terms(n, terms).unwrap()
        })
    })
}

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1usize << n).prop_filter_map("zero state", move |amps| {
        let v: Vec<Complex64> = amps.into_iter().map(|(a, b)| c(a, b)).collect();
        let s = StateVector::new(n, v).unwrap();
        (s.norm() > 1e-3).then(|| s.normalized())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_matches_kronecker(h in pauli_sum(6, false)) {
        let diff = (to_dense(&h).unwrap() - kron_sum(&h)).camax();
        prop_assert!(diff < 1e-12);
    }

    #[test]
    fn apply_matches_dense_columns(h in pauli_sum(6, false)) {
        let dense = to_dense(&h).unwrap();
        for k in 0..h.dim() {
            let col = h.apply(&StateVector::basis(h.n_qubits(), k).unwrap()).unwrap();
            for (r, a) in col.amplitudes().iter().enumerate() {
                prop_assert!((a - dense[(r, k)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn canonical_form_is_idempotent(h in pauli_sum(4, false)) {
        let again = h.clone().canonicalize();
        prop_assert_eq!(&again, &h);
        let mut strings: Vec<_> = h.terms().iter().map(|t| t.1.clone()).collect();
        strings.dedup();
        prop_assert_eq!(strings.len(), h.n_terms());
    }

    #[test]
    fn evolution_is_unitary_and_composes(
        (h, psi) in (1usize..=4).prop_flat_map(|n| {
            (prop::collection::vec((prop::collection::vec(pauli(), n), -1.5..1.5f64), 1..8)
                .prop_map(move |t| PauliSum::from_terms(n, t.into_iter().map(|(l, x)| (c(x, 0.0), PauliString::new(l).unwrap()))).unwrap()),
             state(n))
        }),
        t in -2.0..2.0f64,
        s in -2.0..2.0f64,
    ) {
        let a = evolve_exact(&h, &psi, t).unwrap();
        prop_assert!((a.norm() - 1.0).abs() < 1e-10);
        prop_assert!((a.expectation(&h).unwrap() - psi.expectation(&h).unwrap()).abs() < 1e-8);
        let ab = evolve_exact(&h, &a, s).unwrap();
        let direct = evolve_exact(&h, &psi, t + s).unwrap();
        let drift: f64 = ab.amplitudes().iter().zip(direct.amplitudes()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(drift < 1e-8);
    }
}

#[test]
fn lanczos_matches_dense_on_random_hermitian_sums() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = pauli_sum(8, true);
    for case in 0..100 {
        let h = strategy.new_tree(&mut runner).unwrap().current();
        let exact = hermitian_eigen(to_dense(&h).unwrap()).values[0];
        let opts = LanczosOptions { seed: case, ..Default::default() };
        let (e, _, _) = ground_state(&h, &opts).unwrap();
        assert!((e - exact).abs() < 1e-8, "case {case}: {e} vs {exact}\n{h}");
    }
}

fn ladder_dense(mode: usize, dagger: bool, n_modes: usize) -> M {
    let term = FermionTerm::new(c(1.0, 0.0), vec![Ladder { mode, dagger }]);
    to_dense(&jordan_wigner(&term, n_modes).unwrap()).unwrap()
}

#[test]
fn jordan_wigner_anticommutation() {
    for n in 1..=4 {
        let d = 1 << n;
        for i in 0..n {
            for j in 0..n {
                let a = ladder_dense(i, false, n);
                let b = ladder_dense(j, true, n);
                let anti = &a * &b + &b * &a;
                let expected = if i == j { M::identity(d, d) } else { M::zeros(d, d) };
                assert!((anti - expected).camax() < 1e-12, "{{a_{i}, a†_{j}}} n={n}");
                let aa = ladder_dense(j, false, n);
                assert!((&a * &aa + &aa * &a).camax() < 1e-12, "{{a_{i}, a_{j}}} n={n}");
            }
        }
    }
}

#[test]
fn hermitian_random_sums_are_hermitian() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let h = pauli_sum(5, true).new_tree(&mut runner).unwrap().current();
    let m = to_dense(&h).unwrap();
    assert!((&m - m.adjoint()).camax() < 1e-14);
    assert!(h.is_hermitian(1e-14));
}

use eprony_core::normalform::{HTensor, DEFAULT_DETUNING_FLOOR, DEFAULT_STEP};
use eprony_core::{
    analytic_response, expand_second_order, h_coefficients, initial_z, ode, resonance_degree,
    to_modal, Complex, QuadraticField, QuadraticModel, QuadraticTerm,
};
use nalgebra::{DMatrix, DVector};

fn term(equation: usize, i: usize, j: usize, coefficient: f64) -> QuadraticTerm {
    QuadraticTerm {
        equation,
        i,
        j,
        coefficient,
    }
}

fn random_stable_system() -> QuadraticField {
    QuadraticField::homogeneous(
        DMatrix::from_row_slice(3, 3, &[-1.2, 0.7, 0.1, -2.0, -0.4, 0.3, 0.2, -0.5, -3.1]),
        vec![
            term(0, 0, 1, 0.7),
            term(1, 2, 2, -1.1),
            term(2, 0, 0, 0.9),
            term(1, 0, 2, 0.4),
        ],
    )
    .unwrap()
}

fn smooth_field(x: &[f64]) -> Vec<f64> {
    vec![
        -1.2 * x[0] + 0.7 * x[1] + 0.4 * (x[2].exp() - 1.0),
        -2.0 * x[0] - 0.4 * x[1] + 0.3 * x[2].sin() + 0.5 * x[0] * x[1],
        0.2 * x[0] - 0.5 * x[1] - 3.1 * x[2] + 0.9 * x[0] * x[0] * x[1].cos(),
    ]
}

#[test]
fn modal_field_matches_projection_to_third_order() {
    // Φ⁻¹ f(Φy) - (Λy + C(y, y)) shrinks like ‖y‖³ for a non-polynomial f
    let model = expand_second_order(smooth_field, &[0.0; 3], DEFAULT_STEP).unwrap();
    let modal = to_modal(&model).unwrap();
    let residual = |s: f64| {
        let x = [0.3 * s, -0.2 * s, 0.5 * s];
        let u = DVector::from_iterator(3, x.iter().map(|&v| Complex::new(v, 0.0)));
        let y = modal.phi_inv() * &u;
        let fx = DVector::from_iterator(
            3,
            smooth_field(&x).into_iter().map(|v| Complex::new(v, 0.0)),
        );
        (modal.phi_inv() * fx - modal.modal_field(&y)).norm()
    };
    let slope = (residual(0.1) / residual(0.025)).log2() / 2.0;
    assert!((slope - 3.0).abs() < 0.3, "slope {slope}");
}

#[test]
fn finite_difference_model_agrees_with_exact_model() {
    let f = random_stable_system();
    let approx = expand_second_order(|x| f.eval(x), &[0.0; 3], DEFAULT_STEP).unwrap();
    let exact = f.expand_at(&[0.0; 3]).unwrap();
    assert!((approx.jacobian() - exact.jacobian()).amax() < 1e-8);
    for (a, b) in approx.hessians().iter().zip(exact.hessians()) {
        assert!((a - b).amax() < 1e-6);
    }
}

#[test]
fn nonzero_equilibrium_shifts_the_expansion() {
    // x' = x(1 - x) has equilibria 0 and 1; at 1 the Jacobian is -1
    let f =
        QuadraticField::homogeneous(DMatrix::from_element(1, 1, 1.0), vec![term(0, 0, 0, -1.0)])
            .unwrap();
    let m = expand_second_order(|x| f.eval(x), &[1.0], DEFAULT_STEP).unwrap();
    assert!((m.jacobian()[(0, 0)] + 1.0).abs() < 1e-8);
    assert!((m.hessians()[0][(0, 0)] + 2.0).abs() < 1e-6);
}

#[test]
fn linear_limit_equals_modal_solution() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -5.0, -0.6]);
    let model =
        QuadraticModel::new(vec![0.0; 2], a.clone(), vec![DMatrix::zeros(2, 2); 2]).unwrap();
    let modal = to_modal(&model).unwrap();
    let h = h_coefficients(&modal, DEFAULT_DETUNING_FLOOR).unwrap();
    let z0 = initial_z(&modal, &h, &[0.4, -0.1]).unwrap();
    let times = [0.0, 0.5, 1.7, 3.0];
    let x = analytic_response(&modal, &h, &z0, &times).unwrap();
    for (t, xt) in times.iter().zip(&x) {
        let y: Vec<Complex> = (0..2)
            .map(|j| z0[j] * (modal.eigenvalues()[j] * *t).exp())
            .collect();
        let linear = modal.phi() * DVector::from_vec(y);
        for i in 0..2 {
            assert!((xt[i] - linear[i].re).abs() < 1e-10 * linear.norm().max(1e-300));
        }
    }
}

#[test]
fn masked_entries_never_contribute() {
    // λ = {-1, -2}: the entry (k, l, j) = (0, 0, 1) is exactly resonant
    let f = QuadraticField::homogeneous(
        DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
        vec![term(1, 0, 0, 0.8), term(0, 1, 1, 0.5)],
    )
    .unwrap();
    let modal = to_modal(&f.expand_at(&[0.0, 0.0]).unwrap()).unwrap();
    let h = h_coefficients(&modal, DEFAULT_DETUNING_FLOOR).unwrap();
    assert!(h.is_masked(1, 0, 0));
    let mut c = modal.c().to_vec();
    c[1][(0, 0)] = Complex::new(0.0, 0.0);
    let forced = HTensor::from_parts(modal.eigenvalues(), &c, DEFAULT_DETUNING_FLOOR).unwrap();
    let z0 = initial_z(&modal, &h, &[0.1, 0.05]).unwrap();
    let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let a = analytic_response(&modal, &h, &z0, &times).unwrap();
    let b = analytic_response(&modal, &forced, &z0, &times).unwrap();
    assert_eq!(a, b);
}

#[test]
fn separated_spectrum_has_large_minimum_detuning() {
    let lambda = [
        Complex::new(-0.3, 0.0),
        Complex::new(-2.0, 0.0),
        Complex::new(-5.5, 0.0),
        Complex::new(-9.0, 0.0),
    ];
    let deg = resonance_degree(&lambda);
    assert!(deg.min > 1.0);
}

#[test]
fn second_order_response_beats_linear_response() {
    let f = QuadraticField::homogeneous(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -5.0, -0.6]),
        vec![term(1, 0, 0, 1.0), term(1, 0, 1, -0.5)],
    )
    .unwrap();
    let modal = to_modal(&f.expand_at(&[0.0, 0.0]).unwrap()).unwrap();
    let h = h_coefficients(&modal, DEFAULT_DETUNING_FLOOR).unwrap();
    let zero =
        HTensor::from_parts(modal.eigenvalues(), &vec![DMatrix::zeros(2, 2); 2], 1e-3).unwrap();
    let x0 = [0.2, 0.0];
    let times: Vec<f64> = (0..=5000).map(|k| k as f64 * 1e-3).collect();
    let rk = ode::rk4(|x| f.eval(x), &x0, 1e-3, 5000);
    let err = |h: &HTensor| {
        let z0 = initial_z(&modal, h, &x0).unwrap();
        let x = analytic_response(&modal, h, &z0, &times).unwrap();
        x.iter()
            .zip(&rk)
            .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
            .sum::<f64>()
    };
    assert!(err(&h) < 0.05 * err(&zero));
}

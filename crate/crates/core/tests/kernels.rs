use proptest::prelude::*;

use pdebc::control::backstepping::{
    control_hyperbolic, hyperbolic_feedback, solve_kernel_hyperbolic, solve_kernel_parabolic, KernelSettings,
    LinearFeedback,
};
use pdebc::grid::Grid1D;
use pdebc::profile::Coefficient;
use pdebc::solver::hyperbolic::{HyperbolicSolver, HyperbolicState};
use pdebc::solver::BoundaryKind;

/// Closed-form reaction-diffusion kernel for constant `lambda`, via the series of `I_1(z) / z`.
fn bessel_kernel(lambda: f64, x: f64, y: f64) -> f64 {
    let q = 0.25 * lambda * (x * x - y * y);
    let (mut term, mut sum) = (0.5, 0.5);
    for m in 1..100 {
        term *= q / (m as f64 * (m as f64 + 1.0));
        sum += term;
    }
    -lambda * y * sum
}

fn bessel_error(lambda: f64, nx: usize) -> f64 {
    let g = Grid1D::new(nx).unwrap();
    let k = solve_kernel_parabolic(&Coefficient::constant(lambda), g, &KernelSettings::default()).unwrap();
    (0..nx)
        .flat_map(|i| (0..=i).map(move |j| (i, j)))
        .map(|(i, j)| (k.k(i, j) - bessel_kernel(lambda, g.x(i), g.x(j))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn parabolic_kernel_converges_to_bessel_form() {
    let coarse = bessel_error(15.0, 51);
    let fine = bessel_error(15.0, 101);
    assert!(fine < 1e-3, "{fine}");
    assert!(coarse / fine > 3.0, "not second order: {coarse} -> {fine}");
}

#[test]
fn negative_reaction_coefficient_is_supported() {
    assert!(bessel_error(-10.0, 101) < 1e-3);
}

#[test]
fn transport_kernel_stabilizes_closed_loop() {
    let g = Grid1D::new(101).unwrap();
    let beta = Coefficient::chebyshev(5.0, 7.35);
    let k = solve_kernel_hyperbolic(&beta, g, &KernelSettings::default()).unwrap();
    let solver = HyperbolicSolver::new(g, &beta, 1e-3, BoundaryKind::Dirichlet).unwrap();
    let mut closed = HyperbolicState { u: vec![1.0; 101], t: 0.0 };
    let mut open = closed.clone();
    for _ in 0..5000 {
        let u = control_hyperbolic(&k, &closed.u).unwrap();
        solver.step(&mut closed, u);
        solver.step(&mut open, 0.0);
    }
    assert!(g.l2_norm(&closed.u) < 1e-2, "{}", g.l2_norm(&closed.u));
    assert!(g.l2_norm(&open.u) > 1.0);
}

#[test]
fn feedback_file_round_trip() {
    let g = Grid1D::new(81).unwrap();
    let fb = hyperbolic_feedback(&Coefficient::chebyshev(5.0, 7.35), g, &KernelSettings::default()).unwrap();
    let tmp = tempfile::NamedTempFile::new().unwrap();
    fb.write_csv(std::fs::File::create(tmp.path()).unwrap()).unwrap();
    let back = LinearFeedback::read_csv(std::io::BufReader::new(std::fs::File::open(tmp.path()).unwrap())).unwrap();
    assert_eq!(back, *fb);
}

#[test]
fn malformed_feedback_file_is_rejected() {
    assert!(LinearFeedback::read_csv("y,weight\n0,1\nx,2\n".as_bytes()).is_err());
    assert!(LinearFeedback::read_csv("".as_bytes()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn parabolic_boundary_identities(amp in -40.0f64..40.0, gamma in 0.5f64..10.0, nx in 21usize..81) {
        let g = Grid1D::new(nx).unwrap();
        let lam = Coefficient::chebyshev(amp, gamma);
        let k = solve_kernel_parabolic(&lam, g, &KernelSettings::default()).unwrap();
        for i in 0..nx {
            prop_assert_eq!(k.k(i, 0), 0.0);
            prop_assert!((k.k(i, i) + 0.5 * lam.integral(g.x(i))).abs() < 1e-10);
        }
    }

    #[test]
    fn transport_kernel_starts_at_minus_beta(amp in 0.1f64..6.0, gamma in 0.5f64..8.0) {
        let g = Grid1D::new(101).unwrap();
        let beta = Coefficient::chebyshev(amp, gamma);
        let k = solve_kernel_hyperbolic(&beta, g, &KernelSettings::default()).unwrap();
        prop_assert_eq!(k.values()[0], -beta.eval(0.0));
        prop_assert!(k.residual() < 1e-9);
    }
}

//! Full-order solver behavior on the reference configuration.

use cavity_rb::fom::{self, FomConfig, StepPatterns};
use cavity_rb::params::ParameterPoint;
use cavity_rb::spaces::centro_symmetric_image;
use cavity_rb::sparse;
use cavity_rb::system::FeSystem;

const PR: f64 = 0.71;
const CS: f64 = 0.1;

#[test]
fn conduction_state_is_exact_at_zero_rayleigh() {
    let sys = FeSystem::new(16).unwrap();
    let pat = StepPatterns::new(&sys).unwrap();
    let started = std::time::Instant::now();
    for &h in &[0.5, 1.0, 2.0] {
        let mu = ParameterPoint::new(0.0, h);
        let (sol, log) = fom::solve_fom(&sys, &pat, &mu, PR, CS, &FomConfig::default()).unwrap();
        assert!(log.rows.len() <= 2, "converged in {} steps", log.rows.len());
        // u = 0, p = 0, theta = 1 - x exactly: the stored fluctuation is zero
        assert!(sol.x_norm < 1e-10, "X-norm deviation {}", sol.x_norm);
    }
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn buoyant_cavity_reaches_steady_state_with_symmetry() {
    let sys = FeSystem::new(16).unwrap();
    let pat = StepPatterns::new(&sys).unwrap();
    let mu = ParameterPoint::new(1e4, 1.0);
    let (sol, log) = fom::solve_fom(&sys, &pat, &mu, PR, CS, &FomConfig::default()).unwrap();

    // flow is nontrivial
    assert!(sparse::norm2(&sol.velocity) > 1.0);

    // steady nonlinear residual in the dual norm
    let res = fom::steady_residual_dual_norm(&sys, &sol, PR, CS);
    let scale = sol.x_norm.max(1.0);
    assert!(
        res <= 10.0 * 1e-10 * scale,
        "steady residual {res:.3e} vs scale {scale:.3e}"
    );

    // discrete divergence
    let div = fom::divergence_residual(&sys, &sol.velocity, mu.height);
    assert!(div < 1e-9, "divergence residual {div:.3e}");

    // centro-symmetry of the square cavity solution
    let image = centro_symmetric_image(&sys.layout, &sol, PR);
    let err = sol.error_to(&image, &sys.xnorm);
    assert!(err < 1e-6, "centro-symmetry defect {err:.3e}");

    // monotone tail of the increment history
    let tail: Vec<f64> = log.rows.iter().rev().take(10).map(|r| r.1).collect();
    for w in tail.windows(2) {
        assert!(w[0] <= w[1], "increments not decreasing at the tail: {tail:?}");
    }
}

#[test]
fn supremizer_satisfies_galerkin_identity_and_linearity() {
    let sys = FeSystem::new(8).unwrap();
    // any zero-mean pressure
    let mut q = vec![0.0; sys.layout.n_pres];
    for (v, val) in q.iter_mut().enumerate() {
        *val = (v as f64 * 0.37).sin();
    }
    sys.project_pressure_zero_mean(&mut q);
    for &h in &[0.7, 1.0, 1.6] {
        let t = fom::solve_supremizer(&sys, &q, h);
        // (grad T, grad T) = -mu_g (q, dx T1) - (q, dy T2)
        let lhs = sys.xnorm.vel_inner(&t, &t);
        let mut rhs_vec = vec![0.0; sys.layout.n_vel];
        sparse::matvec_transpose_add(&sys.ops.b_x, &q, &mut rhs_vec, h);
        sparse::matvec_transpose_add(&sys.ops.b_y, &q, &mut rhs_vec, 1.0);
        let rhs = sparse::dot(&rhs_vec, &t);
        assert!(
            (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
            "galerkin identity: {lhs} vs {rhs}"
        );
        // linearity
        let q2: Vec<f64> = q.iter().map(|v| 3.0 * v).collect();
        let t2 = fom::solve_supremizer(&sys, &q2, h);
        let mut diff = t2.clone();
        sparse::axpy(&mut diff, -3.0, &t);
        assert!(sparse::norm2(&diff) < 1e-10 * sparse::norm2(&t2).max(1.0));
    }
    // zero in, zero out
    let z = fom::solve_supremizer(&sys, &vec![0.0; sys.layout.n_pres], 1.0);
    assert!(sparse::norm2(&z) == 0.0);
}

#[test]
fn skew_symmetry_of_convection_on_divergence_free_fields() {
    // c_ux(w,v,v) + c_uy(w,v,v) vanishes for solenoidal w and constrained v,
    // up to the (degree-4 rule on a degree-5 integrand) quadrature error and
    // the discrete divergence residual of w.
    let sys = FeSystem::new(16).unwrap();
    let pat = StepPatterns::new(&sys).unwrap();
    let mu = ParameterPoint::new(5e3, 1.0);
    let (sol, _) = fom::solve_fom(&sys, &pat, &mu, PR, CS, &FomConfig::default()).unwrap();
    let w = &sol.velocity;

    // v: arbitrary constrained velocity field
    let mut v = vec![0.0; sys.layout.n_vel];
    for (n, c) in sys.layout.p2_coords.iter().enumerate() {
        if !sys.layout.node_on_boundary[n] {
            v[2 * n] = (3.1 * c[0]).sin() * (1.7 * c[1]).cos();
            v[2 * n + 1] = c[0] * c[1] * (2.0 - c[0]);
        }
    }
    let tables = &sys.tables;
    let (kx, ky) = cavity_rb::assembly::convection_kernels(tables, &sys.layout, w);
    let v1 = cavity_rb::assembly::velocity_component(&v, 0, sys.layout.n_p2_nodes);
    let v2 = cavity_rb::assembly::velocity_component(&v, 1, sys.layout.n_p2_nodes);
    let c = mu.height * (sparse::quadform(&kx, &v1, &v1) + sparse::quadform(&kx, &v2, &v2))
        + sparse::quadform(&ky, &v1, &v1)
        + sparse::quadform(&ky, &v2, &v2);
    let div = fom::divergence_residual(&sys, w, mu.height);
    let vnorm2 = sys.xnorm.vel_inner(&v, &v);
    // quadrature-crime floor measured at this resolution, plus the divergence
    // residual scaled by the test field
    let tol = 1e-4 * vnorm2 * sparse::norm2(w) / (sys.layout.n_h as f64).powi(2) + 10.0 * div * vnorm2;
    assert!(c.abs() <= tol, "skew defect {c:.3e} vs tol {tol:.3e}");
}

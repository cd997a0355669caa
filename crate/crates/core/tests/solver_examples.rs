use nsoc::adjoint::{solve_adjoint, TrackingData};
use nsoc::assembly::{
    assemble_divergence, assemble_load, assemble_viscous, pressure_mean_weights, Analytic, PressureGauge, SaddleSystem,
};
use nsoc::elements::{build_space, ElementPair, FeFunction, Field, MixedSpace};
use nsoc::experiments::analytic_velocity_errors;
use nsoc::experiments::manufactured::ManufacturedFlow;
use nsoc::mesh::{Mesh, Rect};
use nsoc::quadrature::quadrature;
use nsoc::sparse_linalg::solve_saddle;

fn space(n: usize, pair: ElementPair) -> MixedSpace {
    build_space(&Mesh::build_structured(n, n, Rect::UNIT).unwrap(), pair)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn stokes_on_coarse_taylor_hood_is_interpolation_dominated() {
    let flow = ManufacturedFlow { nu: 1.0 };
    let s = space(4, ElementPair::TaylorHood);
    // Stokes load: −Δy + ∇p.
    let load = assemble_load(
        &s,
        &Analytic(|p: [f64; 2]| {
            let l = flow.laplacian(p);
            [-l[0] + 1.0, -l[1]]
        }),
    );
    let sys = SaddleSystem::new(
        assemble_viscous(&s, 1.0),
        assemble_divergence(&s),
        load,
        vec![0.0; s.pressure_dof_count()],
        Some(PressureGauge::PinFirstPressureDof { mean_weights: pressure_mean_weights(&s) }),
    )
    .unwrap()
    .apply_dirichlet(s.dirichlet_mask());
    let sol = solve_saddle(&sys).unwrap();
    let rhs_norm = norm(&sys.f.iter().chain(&sys.g).copied().collect::<Vec<_>>());
    assert!(sol.residual_norm <= 1e-10 * rhs_norm);

    let yh = FeFunction { field: Field::Velocity, coefficients: sol.velocity };
    let discrete = analytic_velocity_errors(&s, &yh, &flow);
    let interp = analytic_velocity_errors(&s, &s.interpolate_velocity(|p| flow.velocity(p)), &flow);
    assert!(discrete.l2 <= 3.0 * interp.l2, "{} vs {}", discrete.l2, interp.l2);
    assert!(discrete.h1 <= 3.0 * interp.h1, "{} vs {}", discrete.h1, interp.h1);
}

/// `‖z_h − z_ref‖_{L²}` evaluated with a degree-6 rule on the reference mesh.
fn adjoint_l2_gap(coarse: &MixedSpace, z: &FeFunction, fine: &MixedSpace, z_ref: &FeFunction) -> f64 {
    let tab = fine.tabulate(quadrature(6).unwrap());
    let mut sum = 0.0;
    for c in 0..fine.mesh().num_cells() {
        for q in 0..tab.num_points() {
            let x = fine.quad_point(&tab, c, q);
            let (r, _) = fine.velocity_in_cell(&z_ref.coefficients, c, tab.rule.points[q]);
            let v = coarse.evaluate_velocity(z, x).unwrap();
            sum += fine.quad_weight(&tab, c, q) * ((v[0] - r[0]).powi(2) + (v[1] - r[1]).powi(2));
        }
    }
    sum.sqrt()
}

#[test]
fn single_point_adjoint_converges_at_first_order() {
    let data = TrackingData::new(vec![[0.5, 0.5]], vec![[1.0, 0.0]]).unwrap();
    for pair in [ElementPair::TaylorHood, ElementPair::Mini] {
        let levels = [4, 8, 16];
        let fine = space(64, pair);
        let z_ref = solve_adjoint(&fine, 1.0, &FeFunction::zeros(&fine, Field::Velocity), &data).unwrap().z;
        let errs: Vec<f64> = levels
            .iter()
            .map(|&n| {
                let s = space(n, pair);
                let z = solve_adjoint(&s, 1.0, &FeFunction::zeros(&s, Field::Velocity), &data).unwrap().z;
                adjoint_l2_gap(&s, &z, &fine, &z_ref)
            })
            .collect();
        for w in errs.windows(2) {
            let eoc = (w[0] / w[1]).log2();
            assert!(eoc >= 0.9, "{pair:?}: {errs:?}");
        }
    }
}

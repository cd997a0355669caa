use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjoint::AdjointSolution;
use crate::assembly::{adjoint_matrix, assemble_load, linearized_matrix, pressure_mean_weights, Analytic};
use crate::elements::{build_space, ElementPair, FeFunction, MixedSpace};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, Rect};
use crate::nse_state::{FlowOperators, StateSolution};
use crate::optimize::{
    project_l2_piecewise_constant, ControlIterate, ControlProblem, OptimizationResult, ReducedProblem, Scheme,
};
use crate::quadrature::quadrature;

use super::config::{check_levels, ExperimentConfig};
use super::manufactured::ManufacturedFlow;
use super::report::{Check, ConvergenceRow, ConvergenceTable, DiagnosticReport};

/// `‖B·v‖∞ / (1 + ‖v‖∞)` for a velocity.
pub fn continuity_defect(ops: &FlowOperators, v: &FeFunction) -> f64 {
    let bv = ops.divergence().mul_vec(&v.coefficients);
    bv.iter().fold(0.0f64, |m, x| m.max(x.abs())) / (1.0 + v.max_abs())
}

/// `|∫p| / ‖p‖` with the Euclidean coefficient norm (0 for `p = 0`).
pub fn gauge_defect(space: &MixedSpace, p: &FeFunction) -> f64 {
    let mean: f64 = pressure_mean_weights(space).iter().zip(&p.coefficients).map(|(w, v)| w * v).sum();
    let n = p.coefficients.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        mean.abs()
    } else {
        mean.abs() / n
    }
}

/// Worst continuity and gauge defects over a list of (velocity, pressure) pairs.
fn constraint_checks(label: &str, ops: &FlowOperators, pairs: &[(&FeFunction, &FeFunction)]) -> Vec<Check> {
    let div = pairs.iter().map(|(v, _)| continuity_defect(ops, v)).fold(0.0, f64::max);
    let gauge = pairs.iter().map(|(_, p)| gauge_defect(ops.space(), p)).fold(0.0, f64::max);
    vec![
        Check::at_most(format!("{label}: discrete continuity |Bv|/(1+|v|)"), Some(div), 1e-9),
        Check::at_most(format!("{label}: pressure gauge |int p|/|p|"), Some(gauge), 1e-12),
    ]
}

/// Errors of a discrete velocity against the manufactured flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticErrors {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
}

/// L² and H¹-seminorm errors by a degree-8 rule; the maximum error is
/// sampled at vertices, edge midpoints and the quadrature points.
pub fn analytic_velocity_errors(space: &MixedSpace, y: &FeFunction, flow: &ManufacturedFlow) -> AnalyticErrors {
    let rule = quadrature(8).expect("degree 8 is supported");
    let mut samples: Vec<[f64; 3]> = vec![
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ];
    samples.extend(rule.points.iter().copied());
    let (mut l2, mut h1, mut linf) = (0.0, 0.0, 0.0f64);
    for c in 0..space.mesh().num_cells() {
        let area = space.mesh().cell_area(c);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = space.mesh().map_to_physical(c, *l);
            let (v, g) = space.velocity_in_cell(&y.coefficients, c, *l);
            let (ve, ge) = (flow.velocity(x), flow.gradient(x));
            let wq = 2.0 * area * w;
            for i in 0..2 {
                l2 += wq * (v[i] - ve[i]).powi(2);
                for j in 0..2 {
                    h1 += wq * (g[i][j] - ge[i][j]).powi(2);
                }
            }
        }
        for l in &samples {
            let x = space.mesh().map_to_physical(c, *l);
            let (v, _) = space.velocity_in_cell(&y.coefficients, c, *l);
            let ve = flow.velocity(x);
            linf = linf.max((v[0] - ve[0]).abs()).max((v[1] - ve[1]).abs());
        }
    }
    AnalyticErrors { l2: l2.sqrt(), h1: h1.sqrt(), linf }
}

fn unit_square_only(config: &ExperimentConfig) -> Result<()> {
    if config.domain != Rect::UNIT {
        return Err(Error::Config("the manufactured flow is defined on the unit square only".into()));
    }
    Ok(())
}

/// Manufactured-solution study for `config.pair` (default levels 8, 16, 32, 64).
pub fn run_verify_state(config: &ExperimentConfig) -> Result<ConvergenceTable> {
    unit_square_only(config)?;
    let levels = config.levels_or(&[8, 16, 32, 64]);
    check_levels(&levels)?;
    let flow = ManufacturedFlow { nu: config.nu };
    let mut table = ConvergenceTable::new("verify-state", config.pair, None);
    let opts = config.newton_options();
    for &n in &levels {
        let mesh = Mesh::build_structured(n, n, config.domain)?;
        let space = build_space(&mesh, config.pair);
        let ops = FlowOperators::new(&space, config.nu)?;
        let load = assemble_load(&space, &Analytic(|x: Point| flow.load(x)));
        let mut row = ConvergenceRow { n, h: mesh.h_max(), ..Default::default() };
        match ops.solve_state_load(&load, &opts, None) {
            Ok(state) => {
                let e = analytic_velocity_errors(&space, &state.y, &flow);
                row.e_y_l2 = Some(e.l2);
                row.e_y_linf = Some(e.linf);
                row.e_y_h1 = Some(e.h1);
                table.checks.extend(constraint_checks(&format!("{n}x{n} state"), &ops, &[(&state.y, &state.p)]));
            }
            Err(e) => {
                row.note = Some(e.to_string());
                table.checks.push(Check::flag(format!("{n}x{n}: state solve"), false));
            }
        }
        table.push(row);
    }
    let pairs: Vec<(usize, usize)> = table.rows.windows(2).map(|w| (w[0].n, w[1].n)).collect();
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let r = &table.rows[k + 1];
        let (linf, h1, l2) = (r.eoc_yinf, r.eoc_y_h1, r.eoc_y);
        match config.pair {
            ElementPair::TaylorHood => {
                table.checks.push(Check::at_least(format!("velocity Linf EOC {a}->{b}"), linf, 1.0));
                table.checks.push(Check::within(format!("velocity H1 EOC {a}->{b}"), h1, 1.8, 2.2));
                table.checks.push(Check::within(format!("velocity L2 EOC {a}->{b}"), l2, 2.7, 3.3));
            }
            ElementPair::Mini => {
                table.checks.push(Check::within(format!("velocity H1 EOC {a}->{b}"), h1, 0.8, 1.2));
            }
        }
    }
    Ok(table)
}

/// The outcome of optimizing on one mesh.
pub struct LevelRun {
    pub n: usize,
    pub space: MixedSpace,
    pub result: OptimizationResult,
}

pub fn optimize_level(config: &ExperimentConfig, problem: &ControlProblem, n: usize) -> Result<LevelRun> {
    let mesh = Mesh::build_structured(n, n, config.domain)?;
    let space = build_space(&mesh, problem.pair);
    let result = {
        let mut rp = ReducedProblem::new(problem, &space)?;
        rp.newton = config.newton_options();
        rp.optimize(&config.optimize_options(), None)?
    };
    Ok(LevelRun { n, space, result })
}

/// Certificate checks of a converged run.
pub fn certificate_checks(problem: &ControlProblem, run: &LevelRun, seed: u64) -> Result<Vec<Check>> {
    let rp = ReducedProblem::new(problem, &run.space)?;
    let r = &run.result;
    let n = run.n;
    let mut checks = vec![Check::flag(format!("{n}x{n}: optimizer converged"), r.converged)];
    let gap = rp.projection_identity_gap(&r.control, &r.adjoint);
    checks.push(match problem.scheme {
        Scheme::FullyDiscrete => Check::at_most(format!("{n}x{n}: cellwise projection identity"), Some(gap), 1e-8),
        Scheme::Semidiscrete => Check::at_most(format!("{n}x{n}: closure identity at quadrature points"), Some(gap), 0.0),
    });
    let vi = rp.sampled_variational_inequality(&r.control, &r.adjoint, 100, seed);
    checks.push(Check::at_least(format!("{n}x{n}: sampled variational inequality"), Some(vi), -1e-8));
    let ops = rp.operators();
    checks.extend(constraint_checks(
        &format!("{n}x{n} state/adjoint"),
        ops,
        &[(&r.state.y, &r.state.p), (&r.adjoint.z, &r.adjoint.r)],
    ));
    Ok(checks)
}

/// L² and sampled maximum differences between coarse and reference
/// quantities, integrated on the reference mesh with its assembly rule.
struct ReferenceErrors {
    u_l2: f64,
    y_l2: f64,
    y_linf: f64,
    z_l2: f64,
}

fn reference_errors(problem: &ControlProblem, coarse: &LevelRun, reference: &LevelRun) -> Result<ReferenceErrors> {
    let rs = &reference.space;
    let tab = rs.tabulation();
    let (mut u2, mut y2, mut z2, mut yinf) = (0.0, 0.0, 0.0, 0.0f64);
    let cr = &coarse.result;
    let rr = &reference.result;
    for c in 0..rs.mesh().num_cells() {
        for q in 0..tab.num_points() {
            let x = rs.quad_point(tab, c, q);
            let w = rs.quad_weight(tab, c, q);
            let uref = crate::assembly::ControlField::value(&rr.control, c, q, x);
            let uh = cr.control.evaluate_at(&coarse.space, problem, x)?;
            let yref = rs.combine_velocity(&rr.state.y.coefficients, c, &tab.vel[q], &tab.vel_dbary[q]).0;
            let zref = rs.combine_velocity(&rr.adjoint.z.coefficients, c, &tab.vel[q], &tab.vel_dbary[q]).0;
            let yh = coarse.space.evaluate_velocity(&cr.state.y, x)?;
            let zh = coarse.space.evaluate_velocity(&cr.adjoint.z, x)?;
            for i in 0..2 {
                u2 += w * (uh[i] - uref[i]).powi(2);
                y2 += w * (yh[i] - yref[i]).powi(2);
                z2 += w * (zh[i] - zref[i]).powi(2);
                yinf = yinf.max((yh[i] - yref[i]).abs());
            }
        }
    }
    Ok(ReferenceErrors { u_l2: u2.sqrt(), y_l2: y2.sqrt(), y_linf: yinf, z_l2: z2.sqrt() })
}

/// Control convergence study against a reference `2^offset` times finer
/// than the finest level (default levels 8, 16, 32).
pub fn run_control_study(config: &ExperimentConfig) -> Result<ConvergenceTable> {
    let levels = config.levels_or(&[8, 16, 32]);
    check_levels(&levels)?;
    config.tracking_data()?;
    let problem = config.problem();
    let n_ref = levels.last().unwrap() << config.reference_level_offset;
    let mut table = ConvergenceTable::new("control-study", problem.pair, Some(problem.scheme));

    let (reference, coarse) = std::thread::scope(|s| {
        let handle = s.spawn(|| optimize_level(config, &problem, n_ref));
        let coarse: Vec<(usize, Result<LevelRun>)> =
            levels.iter().map(|&n| (n, optimize_level(config, &problem, n))).collect();
        (handle.join().expect("reference run panicked"), coarse)
    });
    let reference = reference?;
    table.checks.extend(certificate_checks(&problem, &reference, config.seed)?);
    let vals = reference.result.control.values();
    let hits = |bound: fn(&ControlProblem) -> [f64; 2]| {
        vals.iter().any(|v| v[0] == bound(&problem)[0] || v[1] == bound(&problem)[1])
    };
    table.checks.push(Check::flag("reference control touches the lower bound", hits(|p| p.lower)));
    table.checks.push(Check::flag("reference control touches the upper bound", hits(|p| p.upper)));

    for (n, run) in coarse {
        let h = Mesh::build_structured(n, n, config.domain)?.h_max();
        let mut row = ConvergenceRow { n, h, ..Default::default() };
        match run {
            Ok(run) => {
                table.checks.extend(certificate_checks(&problem, &run, config.seed)?);
                let e = reference_errors(&problem, &run, &reference)?;
                row.e_u_l2 = Some(e.u_l2);
                row.e_y_l2 = Some(e.y_l2);
                row.e_y_linf = Some(e.y_linf);
                row.e_z_l2 = Some(e.z_l2);
            }
            Err(e) => {
                row.note = Some(e.to_string());
                table.checks.push(Check::flag(format!("{n}x{n}: optimization"), false));
            }
        }
        table.push(row);
    }
    for k in 1..table.rows.len() {
        let (a, b) = (table.rows[k - 1].n, table.rows[k].n);
        let r = &table.rows[k];
        let (eu, ez) = (r.eoc_u, r.eoc_z);
        table.checks.push(Check::at_least(format!("control L2 EOC {a}->{b}"), eu, 0.9));
        table.checks.push(Check::at_least(format!("adjoint L2 EOC {a}->{b}"), ez, 0.9));
    }
    Ok(table)
}

/// Random feasible control in the scheme's representation.
fn random_control(rp: &ReducedProblem, rng: &mut ChaCha8Rng) -> ControlIterate {
    let p = rp.problem();
    let v = (0..rp.control_len())
        .map(|_| [rng.gen_range(p.lower[0]..=p.upper[0]), rng.gen_range(p.lower[1]..=p.upper[1])])
        .collect();
    rp.control_from_values(v).unwrap()
}

fn random_direction(rp: &ReducedProblem, rng: &mut ChaCha8Rng) -> ControlIterate {
    let v = (0..rp.control_len()).map(|_| [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)]).collect();
    rp.control_from_values(v).unwrap()
}

fn shifted(rp: &ReducedProblem, u: &ControlIterate, g: &ControlIterate, eps: f64) -> ControlIterate {
    let v = u.values().iter().zip(g.values()).map(|(a, b)| [a[0] + eps * b[0], a[1] + eps * b[1]]).collect();
    rp.control_from_values(v).unwrap()
}

/// Central-difference gradient error `min_ε |fd(ε) − (d, g)|` and `(d, g)`.
pub fn gradient_check(
    rp: &ReducedProblem,
    u: &ControlIterate,
    state: &StateSolution,
    adjoint: &AdjointSolution,
    g: &ControlIterate,
) -> Result<(f64, f64)> {
    let d = rp.gradient_from_adjoint(u, adjoint);
    let dd = rp.inner(&d, g.values());
    let mut best = f64::INFINITY;
    for eps in [1e-2, 1e-3, 1e-4] {
        let (jp, _) = rp.evaluate(&shifted(rp, u, g, eps), Some(state))?;
        let (jm, _) = rp.evaluate(&shifted(rp, u, g, -eps), Some(state))?;
        best = best.min(((jp - jm) / (2.0 * eps) - dd).abs());
    }
    Ok((best, dd))
}

/// Second-difference error `|Δ²j/ε² − j''(u)g²|` at `ε = 1e-3`, and `j''(u)g²`.
pub fn hessian_check(
    rp: &ReducedProblem,
    u: &ControlIterate,
    state: &StateSolution,
    adjoint: &AdjointSolution,
    g: &ControlIterate,
) -> Result<(f64, f64)> {
    let eps = 1e-3;
    let j0 = rp.cost(&state.y, u)?;
    let (jp, _) = rp.evaluate(&shifted(rp, u, g, eps), Some(state))?;
    let (jm, _) = rp.evaluate(&shifted(rp, u, g, -eps), Some(state))?;
    let exact = rp.second_order_value(state, adjoint, g)?;
    Ok((((jp - 2.0 * j0 + jm) / (eps * eps) - exact).abs(), exact))
}

/// Gradient, Hessian and transpose-consistency checks for each pair and
/// scheme on an `n × n` mesh (default 16).
pub fn run_derivative_checks(
    config: &ExperimentConfig,
    pairs: &[ElementPair],
    schemes: &[Scheme],
) -> Result<DiagnosticReport> {
    config.tracking_data()?;
    let n = config.levels_or(&[16]).last().copied().unwrap();
    let mut report = DiagnosticReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mesh = Mesh::build_structured(n, n, config.domain)?;
    for &pair in pairs {
        let space = build_space(&mesh, pair);
        for &scheme in schemes {
            let problem = ControlProblem { pair, scheme, ..config.problem() };
            let mut rp = ReducedProblem::new(&problem, &space)?;
            rp.newton = config.newton_options();
            let tag = format!("{}/{} {n}x{n}", pair.short_name(), scheme.short_name());
            let u = random_control(&rp, &mut rng);
            let state = rp.solve_state(&u, None)?;
            let adjoint = rp.solve_adjoint(&state.y)?;
            for k in 0..5 {
                let g = random_direction(&rp, &mut rng);
                let (err, dd) = gradient_check(&rp, &u, &state, &adjoint, &g)?;
                report.checks.push(Check::at_most(
                    format!("{tag}: gradient direction {k} (relative FD error)"),
                    Some(err / (1.0 + dd.abs())),
                    1e-6,
                ));
            }
            for k in 0..3 {
                let g = random_direction(&rp, &mut rng);
                let (err, exact) = hessian_check(&rp, &u, &state, &adjoint, &g)?;
                report.checks.push(Check::at_most(
                    format!("{tag}: second-order identity direction {k} (relative error)"),
                    Some(err / (1.0 + exact.abs())),
                    1e-4,
                ));
            }
        }
        for level in [4, 8, n] {
            let m = Mesh::build_structured(level, level, config.domain)?;
            let s = build_space(&m, pair);
            let problem = ControlProblem { pair, ..config.problem() };
            let rp = ReducedProblem::new(&problem, &s)?;
            let y = rp.solve_state(&random_control(&rp, &mut rng), None)?.y;
            report.checks.push(transpose_check(&s, config.nu, &y, &format!("{} {level}x{level}", pair.short_name())));
        }
    }
    Ok(report)
}

/// `max|Adj − Linᵀ| ≤ 1e-12 max|Lin|` at the velocity `y`.
pub fn transpose_check(space: &MixedSpace, nu: f64, y: &FeFunction, tag: &str) -> Check {
    let lin = linearized_matrix(space, nu, y);
    let adj = adjoint_matrix(space, nu, y);
    let rel = adj.max_abs_diff(&lin.transpose()) / lin.max_abs();
    Check::at_most(format!("{tag}: adjoint matrix equals linearized transpose"), Some(rel), 1e-12)
}

/// Optimizes on the finest configured level (default 16) and writes the
/// mesh with state, adjoint and cellwise control to a VTK file.
pub fn run_export_vtk(config: &ExperimentConfig, path: &Path) -> Result<DiagnosticReport> {
    config.tracking_data()?;
    let n = config.levels_or(&[16]).last().copied().unwrap();
    let problem = config.problem();
    let run = optimize_level(config, &problem, n)?;
    let space = &run.space;
    let nv = space.mesh().num_vertices();
    let ns = space.scalar_velocity_count();
    let at_vertices = |f: &FeFunction| -> Vec<[f64; 2]> {
        (0..nv).map(|v| [f.coefficients[v], f.coefficients[ns + v]]).collect()
    };
    let control = project_l2_piecewise_constant(space, &run.result.control);
    space.mesh().write_vtk(
        path,
        &[("velocity", &at_vertices(&run.result.state.y)), ("adjoint", &at_vertices(&run.result.adjoint.z))],
        &[("control", &control)],
    )?;
    Ok(DiagnosticReport { checks: vec![Check::flag(format!("{n}x{n}: optimizer converged"), run.result.converged)] })
}

use nalgebra::{DMatrix, SymmetricEigen};

use crate::assembly::{assemble_divergence, assemble_mass_pressure, assemble_viscous, SaddleSystem};
use crate::elements::{build_space, ElementPair, MixedSpace};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::SparseMatrix;
use crate::sparse_linalg::SaddleFactorization;

use super::config::{check_levels, ExperimentConfig};
use super::report::{Check, InfSupLevel, InfSupReport};

/// Eigen-decomposition data of the pressure Schur complement pencil
/// `(B K⁻¹ Bᵀ, M_p)`.
#[derive(Clone, Debug)]
pub struct SchurSpectrum {
    /// Generalized eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Eigenvector of the smallest eigenvalue, as pressure coefficients.
    pub lowest_mode: Vec<f64>,
    /// `‖S·1‖∞ / max|S|`.
    pub constant_residual: f64,
}

fn dense(m: &SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (r, c, v) in m.triplets() {
        d[(r, c)] = v;
    }
    d
}

pub fn schur_spectrum(space: &MixedSpace) -> Result<SchurSpectrum> {
    let np = space.pressure_dof_count();
    let sys = SaddleSystem::new(
        assemble_viscous(space, 1.0),
        assemble_divergence(space),
        vec![0.0; space.velocity_dof_count()],
        vec![0.0; np],
        None,
    )?
    .apply_dirichlet(space.dirichlet_mask());
    let empty = SparseMatrix::zeros(0, sys.a.nrows());
    let k = SaddleFactorization::new(&sys.a, &empty, None)?;
    let bt = sys.b.transpose();
    let mut s = DMatrix::zeros(np, np);
    let mut col = vec![0.0; np];
    for q in 0..np {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[q] = 1.0;
        let x = k.solve(&bt.mul_vec(&col), &[])?.velocity;
        for (r, v) in sys.b.mul_vec(&x).into_iter().enumerate() {
            s[(r, q)] = v;
        }
    }
    let s = (&s + s.transpose()) * 0.5;
    let smax = s.amax();
    let constant_residual = (&s * DMatrix::from_element(np, 1, 1.0)).amax() / smax;

    let mp = dense(&assemble_mass_pressure(space));
    let chol = mp
        .cholesky()
        .ok_or_else(|| Error::Diagnostic("pressure mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let li_s = l
        .solve_lower_triangular(&s)
        .ok_or_else(|| Error::Diagnostic("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&li_s.transpose())
        .ok_or_else(|| Error::Diagnostic("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Diagnostic("symmetric eigen-solve did not converge".into()))?;
    let mut order: Vec<usize> = (0..np).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diagnostic("non-finite eigenvalue".into()));
    }
    // Back to pressure coefficients: q = L⁻ᵀ v.
    let v = eig.eigenvectors.column(order[0]).into_owned();
    let q = l
        .transpose()
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::Diagnostic("triangular solve failed".into()))?;
    Ok(SchurSpectrum { eigenvalues, lowest_mode: q.iter().copied().collect(), constant_residual })
}

/// Discrete inf-sup constant `β_h = sqrt(λ)`, with `λ` the smallest
/// eigenvalue after the constant-pressure mode.
pub fn infsup_constant(space: &MixedSpace) -> Result<(f64, SchurSpectrum)> {
    let spectrum = schur_spectrum(space)?;
    if spectrum.eigenvalues.len() < 2 {
        return Err(Error::Diagnostic("need at least two pressure dofs".into()));
    }
    Ok((spectrum.eigenvalues[1].max(0.0).sqrt(), spectrum))
}

/// Inf-sup constants for `config.pair` on each level (default 4, 8, 16).
pub fn run_infsup_diagnostic(config: &ExperimentConfig) -> Result<InfSupReport> {
    let levels = config.levels_or(&[4, 8, 16]);
    check_levels(&levels)?;
    if *levels.last().unwrap() > 32 {
        return Err(Error::Config("the dense inf-sup diagnostic is limited to meshes up to 32x32".into()));
    }
    infsup_for_pair(config, config.pair, &levels)
}

pub(crate) fn infsup_for_pair(config: &ExperimentConfig, pair: ElementPair, levels: &[usize]) -> Result<InfSupReport> {
    let mut report = InfSupReport { pair, levels: vec![], checks: vec![] };
    for &n in levels {
        let mesh = Mesh::build_structured(n, n, config.domain)?;
        let space = build_space(&mesh, pair);
        let (beta, spectrum) = infsup_constant(&space)?;
        let lmax = *spectrum.eigenvalues.last().unwrap();
        let qmax = spectrum.lowest_mode.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let spread = spectrum.lowest_mode.iter().fold(0.0f64, |m, v| m.max((v.abs() - qmax).abs())) / qmax;
        report.checks.push(Check::at_most(
            format!("{n}x{n}: constant pressure is a zero mode (relative eigenvalue)"),
            Some(spectrum.eigenvalues[0].abs() / lmax),
            1e-10,
        ));
        report.checks.push(Check::at_most(format!("{n}x{n}: lowest mode is constant"), Some(spread), 1e-8));
        report.checks.push(Check::at_most(format!("{n}x{n}: S*1 vanishes"), Some(spectrum.constant_residual), 1e-10));
        report.checks.push(Check::at_least(format!("{n}x{n}: beta_h positive"), Some(beta), 1e-8));
        report.levels.push(InfSupLevel { n, h: mesh.h_max(), beta, lambda_constant_mode: spectrum.eigenvalues[0] });
    }
    for w in report.levels.windows(2) {
        report.checks.push(Check::at_least(
            format!("beta_h ratio {} -> {} (less than 10% decay)", w[0].n, w[1].n),
            Some(w[1].beta / w[0].beta),
            0.9,
        ));
    }
    Ok(report)
}

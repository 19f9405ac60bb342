//! Effective-mass ground states on the device grid.
//!
//! The kinetic operator is the BenDaniel-Duke form -(hbar^2/2) div(1/m* grad)
//! discretized with harmonic-mean face masses, so probability flux is
//! continuous across mass steps. The box edge is a hard wall (Dirichlet zero).
//!
//! Sign conventions: the electron moves in `cb_edge - phi` (eV, phi in V) and
//! the heavy hole is treated as a positive-mass particle in `vb_edge + phi`,
//! so the dot is an energy minimum for both carriers.

use crate::constants::HBAR2_OVER_M0_EV_NM2;
use crate::device::MaterialMap;
use crate::error::{Result, SimError};
use crate::field::{FieldKind, ScalarField2D};
use crate::stencil::{dot, Stencil5};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CarrierKind {
    Electron,
    HeavyHole,
}

impl CarrierKind {
    /// Carrier charge in units of e.
    pub fn charge_sign(&self) -> f64 {
        match self {
            CarrierKind::Electron => -1.0,
            CarrierKind::HeavyHole => 1.0,
        }
    }

    pub fn mass<'a>(&self, map: &'a MaterialMap) -> &'a [f64] {
        match self {
            CarrierKind::Electron => &map.mass_e,
            CarrierKind::HeavyHole => &map.mass_hh,
        }
    }

    pub fn band_edge<'a>(&self, map: &'a MaterialMap) -> &'a [f64] {
        match self {
            CarrierKind::Electron => &map.cb_edge_ev,
            CarrierKind::HeavyHole => &map.vb_edge_ev,
        }
    }
}

/// Assembles H = -(hbar^2/2) div(1/m*(r) grad) + V_band(r) + q phi(r) as a
/// symmetric 5-point operator in eV.
pub fn build_hamiltonian(
    map: &MaterialMap,
    potential: &ScalarField2D,
    kind: CarrierKind,
) -> Result<Stencil5> {
    if potential.grid != map.grid {
        return Err(SimError::GridMismatch(
            "potential and material map grids differ".into(),
        ));
    }
    potential.assert_finite("potential")?;
    let grid = map.grid;
    let nx = grid.nx;
    let n = grid.n_cells();
    let h2 = grid.spacing_nm().powi(2);
    let mass = kind.mass(map);
    let band = kind.band_edge(map);
    if let Some(k) = mass.iter().position(|&m| !(m > 0.0)) {
        return Err(SimError::Degenerate(format!(
            "non-positive effective mass at cell {k}"
        )));
    }

    let mut a = Stencil5::zeros(grid);
    let face_t = |m1: f64, m2: f64| {
        // harmonic-mean face mass
        let m_f = 2.0 * m1 * m2 / (m1 + m2);
        0.5 * HBAR2_OVER_M0_EV_NM2 / (m_f * h2)
    };
    for k in 0..n {
        let i = k % nx;
        let j = k / nx;
        // interior faces
        if i + 1 < nx {
            let t = face_t(mass[k], mass[k + 1]);
            a.east[k] = -t;
            a.diag[k] += t;
            a.diag[k + 1] += t;
        }
        if j + 1 < grid.ny {
            let t = face_t(mass[k], mass[k + nx]);
            a.north[k] = -t;
            a.diag[k] += t;
            a.diag[k + nx] += t;
        }
        // hard-wall ghost faces at the box edge
        if i == 0 || i + 1 == nx {
            a.diag[k] += face_t(mass[k], mass[k]);
        }
        if j == 0 || j + 1 == grid.ny {
            a.diag[k] += face_t(mass[k], mass[k]);
        }
        a.diag[k] += band[k] + kind.charge_sign() * potential.data[k];
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOptions {
    /// Residual 2-norm target, eV.
    pub tol_ev: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol_ev: 1e-8,
            max_iter: 60_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub energy_ev: f64,
    pub wavefunction: ScalarField2D,
    pub iterations: usize,
    pub residual: f64,
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(x: &mut [f64], s: f64) {
    for v in x {
        *v *= s;
    }
}

/// Lowest eigenpair by single-vector LOBPCG with a diagonal preconditioner.
/// Deterministic for a fixed initial guess; the default guess is a Gaussian
/// at the device center with width 1/16 of the domain.
pub fn ground_state(
    hamiltonian: &Stencil5,
    initial_guess: Option<&ScalarField2D>,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let grid = hamiltonian.grid;
    let n = grid.n_cells();

    let mut x: Vec<f64> = match initial_guess {
        Some(g) => {
            if g.grid != grid {
                return Err(SimError::GridMismatch(
                    "initial guess grid differs from the operator grid".into(),
                ));
            }
            g.data.clone()
        }
        None => {
            let w = grid.extent_x_nm / 16.0;
            ScalarField2D::from_fn(grid, FieldKind::Wavefunction, |px, py| {
                (-(px * px + py * py) / (2.0 * w * w)).exp()
            })
            .data
        }
    };
    let norm = dot(&x, &x).sqrt();
    if !(norm > 0.0) {
        return Err(SimError::Degenerate("initial guess is the zero vector".into()));
    }
    scale(&mut x, 1.0 / norm);

    let mut ax = hamiltonian.apply(&x);
    let mut lambda = dot(&x, &ax);
    let mut p: Option<Vec<f64>> = None;
    let mut ap: Option<Vec<f64>> = None;
    let mut residual = f64::INFINITY;

    for it in 0..opts.max_iter {
        // r = A x - lambda x
        let mut r = ax.clone();
        axpy(&mut r, -lambda, &x);
        residual = dot(&r, &r).sqrt();
        if residual <= opts.tol_ev {
            return finish(grid, x, lambda, it, residual);
        }

        // diagonal preconditioner, floored to stay positive definite
        let mut w: Vec<f64> = r
            .iter()
            .zip(&hamiltonian.diag)
            .map(|(ri, di)| ri / (di - lambda).max(1e-2))
            .collect();

        // orthonormalize [x, w, p] by modified Gram-Schmidt
        let c = dot(&x, &w);
        axpy(&mut w, -c, &x);
        let wn = dot(&w, &w).sqrt();
        if !(wn > 1e-14) {
            // search space collapsed; report best so far
            return finish(grid, x, lambda, it, residual);
        }
        scale(&mut w, 1.0 / wn);
        let aw = hamiltonian.apply(&w);

        let mut use_p = false;
        if let (Some(pv), Some(apv)) = (&mut p, &mut ap) {
            let cx = dot(&x, pv);
            axpy(pv, -cx, &x);
            axpy(apv, -cx, &ax);
            let cw = dot(&w, pv);
            axpy(pv, -cw, &w);
            axpy(apv, -cw, &aw);
            let pn = dot(pv, pv).sqrt();
            if pn > 1e-10 {
                scale(pv, 1.0 / pn);
                scale(apv, 1.0 / pn);
                use_p = true;
            }
        }

        // Rayleigh-Ritz on the (2 or 3)-dimensional subspace
        let dim = if use_p { 3 } else { 2 };
        let basis: [&[f64]; 3] = [
            &x,
            &w,
            if use_p { p.as_ref().unwrap() } else { &x },
        ];
        let abasis: [&[f64]; 3] = [
            &ax,
            &aw,
            if use_p { ap.as_ref().unwrap() } else { &ax },
        ];
        let mut t = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for a_i in 0..dim {
            for b_i in a_i..dim {
                let v = dot(basis[a_i], abasis[b_i]);
                t[(a_i, b_i)] = v;
                t[(b_i, a_i)] = v;
            }
        }
        let eig = nalgebra::SymmetricEigen::new(t);
        let mut best = 0;
        for idx in 1..dim {
            if eig.eigenvalues[idx] < eig.eigenvalues[best] {
                best = idx;
            }
        }
        let coeffs: Vec<f64> = (0..dim).map(|i| eig.eigenvectors[(i, best)]).collect();
        lambda = eig.eigenvalues[best];

        let mut x_new = vec![0.0; n];
        let mut ax_new = vec![0.0; n];
        let mut p_new = vec![0.0; n];
        let mut ap_new = vec![0.0; n];
        for (ci, (b, abv)) in coeffs.iter().zip(basis.iter().zip(abasis.iter())) {
            axpy(&mut x_new, *ci, b);
            axpy(&mut ax_new, *ci, abv);
        }
        // implicit conjugate direction: everything except the x component
        axpy(&mut p_new, coeffs[1], &w);
        axpy(&mut ap_new, coeffs[1], &aw);
        if use_p {
            axpy(&mut p_new, coeffs[2], p.as_ref().unwrap());
            axpy(&mut ap_new, coeffs[2], ap.as_ref().unwrap());
        }
        let xn = dot(&x_new, &x_new).sqrt();
        scale(&mut x_new, 1.0 / xn);
        scale(&mut ax_new, 1.0 / xn);
        x = x_new;
        ax = ax_new;
        let pn = dot(&p_new, &p_new).sqrt();
        if pn > 1e-12 {
            scale(&mut p_new, 1.0 / pn);
            scale(&mut ap_new, 1.0 / pn);
            p = Some(p_new);
            ap = Some(ap_new);
        } else {
            p = None;
            ap = None;
        }
        // refresh tracked products to kill linear-combination drift
        if it % 32 == 31 {
            ax = hamiltonian.apply(&x);
            if let (Some(pv), Some(apv)) = (&p, &mut ap) {
                *apv = hamiltonian.apply(pv);
            }
            lambda = dot(&x, &ax);
        }
    }

    Err(SimError::NonConvergence {
        stage: "eigensolver",
        iterations: opts.max_iter,
        residual,
    })
}

fn finish(
    grid: crate::device::Grid2D,
    mut x: Vec<f64>,
    lambda: f64,
    iterations: usize,
    residual: f64,
) -> Result<EigenResult> {
    // sign convention: the dominant-amplitude cell is positive, which for the
    // nodeless ground state makes the dot-center value nonnegative
    let mut max_abs = 0.0;
    let mut sign = 1.0;
    for &v in &x {
        if v.abs() > max_abs {
            max_abs = v.abs();
            sign = if v >= 0.0 { 1.0 } else { -1.0 };
        }
    }
    if sign < 0.0 {
        scale(&mut x, -1.0);
    }
    let mut wf = ScalarField2D {
        grid,
        kind: FieldKind::Wavefunction,
        data: x,
    };
    wf.normalize_wavefunction()?;
    Ok(EigenResult {
        energy_ev: lambda,
        wavefunction: wf,
        iterations,
        residual,
    })
}

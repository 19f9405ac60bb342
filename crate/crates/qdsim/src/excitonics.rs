//! Exciton observables: wavefunction moments, electron-hole overlap, and the
//! fine-structure splitting of the bright exciton doublet.
//!
//! The splitting follows the analytic long-range-exchange result for Gaussian
//! envelopes, delta = K * beta * xi * (1 - xi) * gamma_z / l_y^3 with
//! gamma_z = 1 in the flat-dot limit and FSS = 2|delta|.
//!
//! Length convention: the Gaussian ansatz is written for the amplitude,
//! psi ~ exp(-x^2 / (2 l^2)), so the density variance gives l = sqrt(2) * sigma.
//! This conversion sets the absolute FSS scale and is applied uniformly.

use crate::constants::{COULOMB_EV_NM, HBAR2_OVER_M0_EV_NM2};
use crate::device::{
    build_material_map, gate_boundary_cells, DeviceSpec, Grid2D, MaterialParams,
};
use crate::error::{Result, SimError};
use crate::field::{fmt_sig9, FieldKind, ScalarField2D};
use crate::poisson::{solve_poisson, GateVoltages, PoissonOptions};
use crate::schrodinger::{build_hamiltonian, ground_state, CarrierKind, EigenOptions};
use serde::{Deserialize, Serialize};

/// Centroid and principal-axis widths of a 2D weight distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMoments {
    pub centroid_x_nm: f64,
    pub centroid_y_nm: f64,
    pub sigma_major_nm: f64,
    pub sigma_minor_nm: f64,
    /// Angle of the major axis relative to +x, degrees, in (-90, 90].
    pub angle_deg: f64,
    /// sigma_x / sigma_y in the fixed gate frame.
    pub elongation_gate_frame: f64,
}

/// First and second moments of a density (or squared amplitude) field,
/// with principal widths from the covariance eigendecomposition.
pub fn moments_fit(field: &ScalarField2D) -> Result<GaussianMoments> {
    let grid = field.grid;
    let weight_of = |v: f64| -> f64 {
        match field.kind {
            FieldKind::Wavefunction => v * v,
            _ => v,
        }
    };
    if field.kind == FieldKind::Density {
        let peak = field.data.iter().cloned().fold(0.0f64, f64::max);
        if field.data.iter().any(|&v| v < -1e-12 * peak.max(1.0)) {
            return Err(SimError::Degenerate(
                "density field has negative values".into(),
            ));
        }
    }

    let mut w_sum = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for j in 0..grid.ny {
        let y = grid.y(j);
        for i in 0..grid.nx {
            let w = weight_of(field.data[grid.idx(i, j)]).max(0.0);
            w_sum += w;
            mx += w * grid.x(i);
            my += w * y;
        }
    }
    if !(w_sum > 0.0) {
        return Err(SimError::Degenerate("total weight is zero".into()));
    }
    let (cx, cy) = (mx / w_sum, my / w_sum);

    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for j in 0..grid.ny {
        let dy = grid.y(j) - cy;
        for i in 0..grid.nx {
            let w = weight_of(field.data[grid.idx(i, j)]).max(0.0);
            let dx = grid.x(i) - cx;
            sxx += w * dx * dx;
            syy += w * dy * dy;
            sxy += w * dx * dy;
        }
    }
    sxx /= w_sum;
    syy /= w_sum;
    sxy /= w_sum;

    let half_tr = 0.5 * (sxx + syy);
    let disc = (0.5 * (sxx - syy)).hypot(sxy);
    let (l_major, l_minor) = (half_tr + disc, half_tr - disc);
    if !(l_minor > 0.0) {
        return Err(SimError::Degenerate(format!(
            "degenerate covariance (eigenvalues {l_major:.3e}, {l_minor:.3e})"
        )));
    }
    let mut angle = 0.5 * (2.0 * sxy).atan2(sxx - syy).to_degrees();
    if angle <= -90.0 {
        angle += 180.0;
    } else if angle > 90.0 {
        angle -= 180.0;
    }
    Ok(GaussianMoments {
        centroid_x_nm: cx,
        centroid_y_nm: cy,
        sigma_major_nm: l_major.sqrt(),
        sigma_minor_nm: l_minor.sqrt(),
        angle_deg: angle,
        elongation_gate_frame: (sxx / syy).sqrt(),
    })
}

/// e-h envelope overlap beta = |<psi_h | psi_e>|^2.
pub fn overlap_beta(psi_e: &ScalarField2D, psi_h: &ScalarField2D) -> Result<f64> {
    psi_e.assert_same_grid(psi_h)?;
    let h2 = psi_e.grid.spacing_nm().powi(2);
    let s: f64 = psi_e
        .data
        .iter()
        .zip(&psi_h.data)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * h2;
    Ok(s * s)
}

/// Length parameters of the hybridized wavefunction psi_eh = psi_h * psi_e.
///
/// Returns (l_x_eh, l_y_eh, xi). The principal axis within 45 degrees of the
/// x gate axis is reported as l_x, so for an unrotated dot the lengths are the
/// gate-frame ones and the sign of (1 - xi) tracks which axis is longer.
pub fn hybridized_lengths(
    psi_e: &ScalarField2D,
    psi_h: &ScalarField2D,
) -> Result<(f64, f64, f64)> {
    psi_e.assert_same_grid(psi_h)?;
    let product = ScalarField2D {
        grid: psi_e.grid,
        kind: FieldKind::Density,
        data: psi_e
            .data
            .iter()
            .zip(&psi_h.data)
            .map(|(a, b)| (a * b) * (a * b))
            .collect(),
    };
    let m = moments_fit(&product)?;
    let (sig_x, sig_y) = if m.angle_deg.abs() <= 45.0 {
        (m.sigma_major_nm, m.sigma_minor_nm)
    } else {
        (m.sigma_minor_nm, m.sigma_major_nm)
    };
    let l_x = std::f64::consts::SQRT_2 * sig_x;
    let l_y = std::f64::consts::SQRT_2 * sig_y;
    Ok((l_x, l_y, l_y / l_x))
}

/// Material prefactor K of the exchange splitting, eV nm^3.
pub fn fss_constant_k(materials: &MaterialParams) -> f64 {
    let geom = 3.0 * std::f64::consts::PI.sqrt() / (16.0 * std::f64::consts::SQRT_2);
    geom * COULOMB_EV_NM * HBAR2_OVER_M0_EV_NM2 * materials.kane_ep_ev
        / (materials.rel_permittivity * materials.bulk_gap_ev.powi(2))
}

/// delta and FSS = 2|delta| in micro-eV from the overlap, elongation and
/// hybridized length (gamma_z = 1).
pub fn compute_fss(
    materials: &MaterialParams,
    beta: f64,
    xi: f64,
    l_y_eh_nm: f64,
) -> Result<(f64, f64)> {
    if !(l_y_eh_nm > 0.0) || !beta.is_finite() || !xi.is_finite() || !(xi > 0.0) {
        return Err(SimError::Degenerate(format!(
            "invalid FSS inputs: beta={beta}, xi={xi}, l_y_eh={l_y_eh_nm}"
        )));
    }
    let delta_ev = fss_constant_k(materials) * beta * xi * (1.0 - xi) / l_y_eh_nm.powi(3);
    let delta_uev = delta_ev * 1e6;
    Ok((delta_uev, 2.0 * delta_uev.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub poisson: PoissonOptions,
    pub eigen: EigenOptions,
    /// When true, iterate potential <-> single e/hh densities (Hartree mode).
    /// Default is a single linear solve with zero charge: the empty dot is
    /// neutral, so the first Poisson solve is already self-consistent.
    pub self_consistent: bool,
    pub hartree_relax: f64,
    pub hartree_tol_v: f64,
    pub hartree_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            poisson: PoissonOptions::default(),
            eigen: EigenOptions::default(),
            self_consistent: false,
            hartree_relax: 0.5,
            hartree_tol_v: 1e-5,
            hartree_max_iter: 50,
        }
    }
}

/// Everything computed for one gate configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitonReport {
    pub gates: GateVoltages,
    pub delta_uev: f64,
    pub fss_uev: f64,
    pub beta: f64,
    pub xi: f64,
    pub l_x_eh_nm: f64,
    pub l_y_eh_nm: f64,
    /// Gate-frame single-particle elongations sigma_x / sigma_y.
    pub eps_e: f64,
    pub eps_h: f64,
    pub energy_e_ev: f64,
    pub energy_h_ev: f64,
    pub eigen_iterations_e: usize,
    pub eigen_iterations_h: usize,
}

impl ExcitonReport {
    /// Flat JSON object, snake_case keys with units, 9 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n");
        let mut push = |key: &str, val: String, last: bool| {
            s.push_str(&format!("  \"{key}\": {val}{}\n", if last { "" } else { "," }));
        };
        push("v_top_V", fmt_sig9(self.gates.v_top), false);
        push("v_bottom_V", fmt_sig9(self.gates.v_bottom), false);
        push("v_left_V", fmt_sig9(self.gates.v_left), false);
        push("v_right_V", fmt_sig9(self.gates.v_right), false);
        push("delta_ueV", fmt_sig9(self.delta_uev), false);
        push("fss_ueV", fmt_sig9(self.fss_uev), false);
        push("beta", fmt_sig9(self.beta), false);
        push("xi", fmt_sig9(self.xi), false);
        push("l_x_eh_nm", fmt_sig9(self.l_x_eh_nm), false);
        push("l_y_eh_nm", fmt_sig9(self.l_y_eh_nm), false);
        push("eps_e", fmt_sig9(self.eps_e), false);
        push("eps_h", fmt_sig9(self.eps_h), false);
        push("energy_e_eV", fmt_sig9(self.energy_e_ev), false);
        push("energy_h_eV", fmt_sig9(self.energy_h_ev), false);
        push(
            "eigen_iterations_e",
            self.eigen_iterations_e.to_string(),
            false,
        );
        push(
            "eigen_iterations_h",
            self.eigen_iterations_h.to_string(),
            true,
        );
        s.push('}');
        s
    }
}

/// Solved carrier states plus the potential they were solved in; kept around
/// for field exports.
pub struct PipelineFields {
    pub potential: ScalarField2D,
    pub electron: crate::schrodinger::EigenResult,
    pub hole: crate::schrodinger::EigenResult,
}

fn stage_err(stage: &'static str, e: SimError) -> SimError {
    match e {
        SimError::NonConvergence {
            iterations,
            residual,
            ..
        } => SimError::NonConvergence {
            stage,
            iterations,
            residual,
        },
        other => other,
    }
}

/// Runs material map -> Poisson -> two ground states and returns the solved
/// fields. The default initial eigensolver guess is a Gaussian of the dot
/// radius at the device center, which fixes determinism.
pub fn solve_fields(
    spec: &DeviceSpec,
    grid: &Grid2D,
    gates: &GateVoltages,
    opts: &SolverOptions,
) -> Result<PipelineFields> {
    let map = build_material_map(spec, grid)?;
    let gate_cells = gate_boundary_cells(spec, grid)?;

    let guess = ScalarField2D::from_fn(*grid, FieldKind::Wavefunction, |x, y| {
        let w = spec.dot_radius_mean_nm;
        (-(x * x + y * y) / (2.0 * w * w)).exp()
    });

    let mut potential = solve_poisson(&map, &gate_cells, gates, None, &opts.poisson)
        .map_err(|e| stage_err("poisson", e))?;

    let solve_one = |phi: &ScalarField2D, kind: CarrierKind| -> Result<crate::schrodinger::EigenResult> {
        let stage = match kind {
            CarrierKind::Electron => "electron eigensolver",
            CarrierKind::HeavyHole => "hole eigensolver",
        };
        let ham = build_hamiltonian(&map, phi, kind)?;
        ground_state(&ham, Some(&guess), &opts.eigen).map_err(|er| stage_err(stage, er))
    };

    let (res_e, res_h) = if opts.self_consistent {
        // Exciton Hartree: each carrier feels the gate potential plus the
        // screened field of the *other* carrier's density (no self term).
        let no_bias = GateVoltages::zero();
        let mut phi_from_e = ScalarField2D::zeros(*grid, FieldKind::Potential);
        let mut phi_from_h = ScalarField2D::zeros(*grid, FieldKind::Potential);
        let add = |a: &ScalarField2D, b: &ScalarField2D| ScalarField2D {
            grid: *grid,
            kind: FieldKind::Potential,
            data: a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect(),
        };
        let density = |psi: &ScalarField2D, sign: f64| ScalarField2D {
            grid: *grid,
            kind: FieldKind::Density,
            data: psi.data.iter().map(|v| sign * v * v).collect(),
        };
        let mut pair = None;
        let mut converged = false;
        let mut change = f64::INFINITY;
        for _ in 0..opts.hartree_max_iter {
            let e = solve_one(&add(&potential, &phi_from_h), CarrierKind::Electron)?;
            let h = solve_one(&add(&potential, &phi_from_e), CarrierKind::HeavyHole)?;
            let new_h = solve_poisson(
                &map,
                &gate_cells,
                &no_bias,
                Some(&density(&h.wavefunction, 1.0)),
                &opts.poisson,
            )
            .map_err(|er| stage_err("hartree poisson", er))?;
            let new_e = solve_poisson(
                &map,
                &gate_cells,
                &no_bias,
                Some(&density(&e.wavefunction, -1.0)),
                &opts.poisson,
            )
            .map_err(|er| stage_err("hartree poisson", er))?;
            change = phi_from_h
                .data
                .iter()
                .zip(&new_h.data)
                .chain(phi_from_e.data.iter().zip(&new_e.data))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            for (p, pn) in phi_from_h.data.iter_mut().zip(&new_h.data) {
                *p += opts.hartree_relax * (pn - *p);
            }
            for (p, pn) in phi_from_e.data.iter_mut().zip(&new_e.data) {
                *p += opts.hartree_relax * (pn - *p);
            }
            pair = Some((e, h));
            if change < opts.hartree_tol_v {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SimError::NonConvergence {
                stage: "hartree loop",
                iterations: opts.hartree_max_iter,
                residual: change,
            });
        }
        // Export the total potential including both induced parts.
        potential = add(&add(&potential, &phi_from_e), &phi_from_h);
        pair.unwrap()
    } else {
        (
            solve_one(&potential, CarrierKind::Electron)?,
            solve_one(&potential, CarrierKind::HeavyHole)?,
        )
    };

    Ok(PipelineFields {
        potential,
        electron: res_e,
        hole: res_h,
    })
}

/// Full pipeline for one gate configuration: map -> Poisson -> two ground
/// states -> overlap, lengths, FSS.
pub fn evaluate_configuration(
    spec: &DeviceSpec,
    grid: &Grid2D,
    gates: &GateVoltages,
    opts: &SolverOptions,
) -> Result<ExcitonReport> {
    let fields = solve_fields(spec, grid, gates, opts)?;
    report_from_fields(spec, gates, &fields)
}

/// Observable extraction, split out so field exports can reuse solved states.
pub fn report_from_fields(
    spec: &DeviceSpec,
    gates: &GateVoltages,
    fields: &PipelineFields,
) -> Result<ExcitonReport> {
    let psi_e = &fields.electron.wavefunction;
    let psi_h = &fields.hole.wavefunction;
    let eps_e = moments_fit(psi_e)
        .map_err(|e| stage_err("electron moments", e))?
        .elongation_gate_frame;
    let eps_h = moments_fit(psi_h)
        .map_err(|e| stage_err("hole moments", e))?
        .elongation_gate_frame;
    let beta = overlap_beta(psi_e, psi_h)?;
    let (l_x, l_y, xi) =
        hybridized_lengths(psi_e, psi_h).map_err(|e| stage_err("hybridized moments", e))?;
    let (delta_uev, fss_uev) = compute_fss(&spec.materials_dot, beta, xi, l_y)?;

    Ok(ExcitonReport {
        gates: *gates,
        delta_uev,
        fss_uev,
        beta,
        xi,
        l_x_eh_nm: l_x,
        l_y_eh_nm: l_y,
        eps_e,
        eps_h,
        energy_e_ev: fields.electron.energy_ev,
        energy_h_ev: fields.hole.energy_ev,
        eigen_iterations_e: fields.electron.iterations,
        eigen_iterations_h: fields.hole.iterations,
    })
}

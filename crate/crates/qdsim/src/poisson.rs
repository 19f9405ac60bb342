//! Variable-permittivity electrostatics on the device grid.
//!
//! Discretization: 5-point finite volumes with harmonic-mean face
//! permittivities, zero normal flux on the outer box boundary, and Dirichlet
//! values pinned on the gate arc cells. Solved by IC(0)-preconditioned CG.
//!
//! Carrier densities, when present, are interpreted as sheet densities in
//! e/nm^2 spread over a 1 nm slab when converting to the 2D source term.

use crate::constants::E_OVER_EPS0_V_NM;
use crate::device::{GateCells, MaterialMap, Region};
use crate::error::{Result, SimError};
use crate::field::{FieldKind, ScalarField2D};
use crate::stencil::{pcg, IcPrecond, Stencil5};
use serde::{Deserialize, Serialize};

/// The four gate potentials, volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateVoltages {
    pub v_top: f64,
    pub v_bottom: f64,
    pub v_left: f64,
    pub v_right: f64,
}

impl GateVoltages {
    pub fn zero() -> Self {
        GateVoltages {
            v_top: 0.0,
            v_bottom: 0.0,
            v_left: 0.0,
            v_right: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v_top", self.v_top),
            ("v_bottom", self.v_bottom),
            ("v_left", self.v_left),
            ("v_right", self.v_right),
        ] {
            if !v.is_finite() {
                return Err(SimError::Config(format!("gate voltage {name} is not finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoissonOptions {
    /// Relative residual target for the linear solve.
    pub rel_tol: f64,
    /// Iteration cap as a multiple of max(nx, ny).
    pub max_iter_factor: usize,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        PoissonOptions {
            rel_tol: 1e-8,
            max_iter_factor: 50,
        }
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Core solve with an explicit Dirichlet cell list. Used directly by the
/// manufactured-solution tests; gate-driven solves go through [`solve_poisson`].
pub fn solve_poisson_dirichlet(
    map: &MaterialMap,
    dirichlet: &[(usize, f64)],
    charge: Option<&ScalarField2D>,
    opts: &PoissonOptions,
) -> Result<ScalarField2D> {
    let grid = map.grid;
    let n = grid.n_cells();
    let nx = grid.nx;
    let h2 = grid.spacing_nm().powi(2);

    let mut fixed: Vec<f64> = vec![f64::NAN; n];
    for &(k, v) in dirichlet {
        if k >= n {
            return Err(SimError::GridMismatch(format!(
                "dirichlet cell index {k} out of range"
            )));
        }
        if !v.is_finite() {
            return Err(SimError::Config("dirichlet value not finite".into()));
        }
        fixed[k] = v;
    }
    if let Some(c) = charge {
        if c.grid != grid {
            return Err(SimError::GridMismatch(
                "charge field is on a different grid than the material map".into(),
            ));
        }
        c.assert_finite("charge")?;
    }

    let mut a = Stencil5::zeros(grid);
    let mut b = vec![0.0; n];
    for k in 0..n {
        if fixed[k].is_finite() {
            a.diag[k] = 1.0;
            b[k] = fixed[k];
            continue;
        }
        let i = k % nx;
        let j = k / nx;
        let mut neighbors = [0usize; 4];
        let mut m = 0;
        if i > 0 {
            neighbors[m] = k - 1;
            m += 1;
        }
        if i + 1 < nx {
            neighbors[m] = k + 1;
            m += 1;
        }
        if j > 0 {
            neighbors[m] = k - nx;
            m += 1;
        }
        if j + 1 < grid.ny {
            neighbors[m] = k + nx;
            m += 1;
        }
        for &nb in &neighbors[..m] {
            let c = harmonic(map.permittivity[k], map.permittivity[nb]);
            a.diag[k] += c;
            if fixed[nb].is_finite() {
                b[k] += c * fixed[nb];
            } else {
                // store symmetric couplings once (east/north slots)
                if nb == k + 1 {
                    a.east[k] = -c;
                } else if nb == k + nx {
                    a.north[k] = -c;
                }
            }
        }
        if let Some(c) = charge {
            b[k] += h2 * E_OVER_EPS0_V_NM * c.data[k];
        }
    }
    let pre = IcPrecond::factor(&a)?;
    let mut x = vec![0.0; n];
    let cap = opts.max_iter_factor * grid.nx.max(grid.ny);
    pcg(&a, &b, &mut x, opts.rel_tol, cap, &pre, "poisson")?;

    Ok(ScalarField2D {
        grid,
        kind: FieldKind::Potential,
        data: x,
    })
}

/// Solves div(eps grad phi) = -rho/eps0 with the gate arcs pinned to their
/// voltages and zero normal flux elsewhere on the outer boundary.
pub fn solve_poisson(
    map: &MaterialMap,
    gate_cells: &GateCells,
    voltages: &GateVoltages,
    charge: Option<&ScalarField2D>,
    opts: &PoissonOptions,
) -> Result<ScalarField2D> {
    voltages.validate()?;
    let mut dirichlet = Vec::new();
    for (name, set) in gate_cells.all() {
        let v = match name {
            "top" => voltages.v_top,
            "bottom" => voltages.v_bottom,
            "left" => voltages.v_left,
            _ => voltages.v_right,
        };
        dirichlet.extend(set.iter().map(|&k| (k, v)));
    }
    solve_poisson_dirichlet(map, &dirichlet, charge, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStats {
    pub max_v_per_nm: f64,
    pub mean_v_per_nm: f64,
}

/// Max and mean |grad phi| over cells of one region, via central differences.
pub fn field_magnitude_stats(
    potential: &ScalarField2D,
    map: &MaterialMap,
    region: Region,
) -> Result<FieldStats> {
    if potential.grid != map.grid {
        return Err(SimError::GridMismatch(
            "potential and material map grids differ".into(),
        ));
    }
    let grid = map.grid;
    let h = grid.spacing_nm();
    let mut max = 0.0f64;
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            if map.region[k] != region {
                continue;
            }
            let d = &potential.data;
            let gx = if i > 0 && i + 1 < grid.nx {
                (d[k + 1] - d[k - 1]) / (2.0 * h)
            } else if i + 1 < grid.nx {
                (d[k + 1] - d[k]) / h
            } else {
                (d[k] - d[k - 1]) / h
            };
            let gy = if j > 0 && j + 1 < grid.ny {
                (d[k + grid.nx] - d[k - grid.nx]) / (2.0 * h)
            } else if j + 1 < grid.ny {
                (d[k + grid.nx] - d[k]) / h
            } else {
                (d[k] - d[k - grid.nx]) / h
            };
            let g = (gx * gx + gy * gy).sqrt();
            max = max.max(g);
            sum += g;
            count += 1;
        }
    }
    if count == 0 {
        return Err(SimError::Degenerate(format!(
            "no cells in region {region:?}"
        )));
    }
    Ok(FieldStats {
        max_v_per_nm: max,
        mean_v_per_nm: sum / count as f64,
    })
}

/// Electric-field statistics over the dot interior.
pub fn interior_field_magnitude(
    potential: &ScalarField2D,
    map: &MaterialMap,
) -> Result<FieldStats> {
    field_magnitude_stats(potential, map, Region::Dot)
}

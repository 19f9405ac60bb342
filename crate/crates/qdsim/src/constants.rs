//! Physical constants in the simulation unit system (nm, eV, V).

/// hbar^2 / m0 in eV nm^2 (CODATA 2018).
pub const HBAR2_OVER_M0_EV_NM2: f64 = 0.07619964222971923;

/// e^2 / (4 pi eps0) in eV nm.
pub const COULOMB_EV_NM: f64 = 1.439964547842567;

/// e / eps0 in V nm, used to convert carrier densities to Poisson sources.
pub const E_OVER_EPS0_V_NM: f64 = 18.095128179727826;

/// Band-edge barrier assigned to dielectric and exterior cells, both bands (eV).
/// High enough that no gate voltage in the operating range can open a spurious well.
pub const OUTER_BARRIER_EV: f64 = 4.0;

/// Effective mass (in m0) assigned to dielectric and exterior cells.
pub const OUTER_MASS: f64 = 1.0;

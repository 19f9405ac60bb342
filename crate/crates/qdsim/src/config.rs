//! Run configuration: sectioned key = value file (TOML) with unit-suffixed
//! keys. Unknown keys are rejected. Unspecified fields fall back to the
//! default device.

use crate::device::{DeviceSpec, Grid2D, MaterialParams};
use crate::error::{Result, SimError};
use crate::excitonics::SolverOptions;
use crate::poisson::{GateVoltages, PoissonOptions};
use crate::schrodinger::EigenOptions;
use crate::sweep::{ExecMode, OptimizeOptions, QuadrupoleParam};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seeds optimizer restarts. Default 0.
    pub seed: u64,
    /// Worker pool width for sweeps; 0 means all available cores,
    /// 1 forces sequential execution.
    pub workers: usize,
    pub device: DeviceSection,
    pub materials: MaterialsSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub gates: GatesSection,
    pub sweep: SweepSection,
    pub optimize: OptimizeSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    pub dot_radius_mean_nm: f64,
    pub dot_elongation: f64,
    pub dot_axis_angle_deg: f64,
    pub shell_thickness_nm: f64,
    pub dielectric_thickness_nm: f64,
    pub gate_arc_width_nm: f64,
    pub dielectric_permittivity: f64,
}

impl Default for DeviceSection {
    fn default() -> Self {
        let d = DeviceSpec::default();
        DeviceSection {
            dot_radius_mean_nm: d.dot_radius_mean_nm,
            dot_elongation: d.dot_elongation,
            dot_axis_angle_deg: d.dot_axis_angle_deg,
            shell_thickness_nm: d.shell_thickness_nm,
            dielectric_thickness_nm: d.dielectric_thickness_nm,
            gate_arc_width_nm: d.gate_arc_width_nm,
            dielectric_permittivity: d.dielectric_permittivity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialsSection {
    pub dot: Option<MaterialParams>,
    pub shell: Option<MaterialParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub extent_x_nm: f64,
    pub extent_y_nm: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            nx: 512,
            ny: 512,
            extent_x_nm: 760.0,
            extent_y_nm: 760.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub poisson_rel_tol: f64,
    pub poisson_max_iter_factor: usize,
    pub eigen_tol_ev: f64,
    pub eigen_max_iter: usize,
    pub self_consistent: bool,
    pub hartree_relax: f64,
    pub hartree_tol_v: f64,
    pub hartree_max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let p = PoissonOptions::default();
        let e = EigenOptions::default();
        let s = SolverOptions::default();
        SolverSection {
            poisson_rel_tol: p.rel_tol,
            poisson_max_iter_factor: p.max_iter_factor,
            eigen_tol_ev: e.tol_ev,
            eigen_max_iter: e.max_iter,
            self_consistent: s.self_consistent,
            hartree_relax: s.hartree_relax,
            hartree_tol_v: s.hartree_tol_v,
            hartree_max_iter: s.hartree_max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GatesSection {
    pub v_top: f64,
    pub v_bottom: f64,
    pub v_left: f64,
    pub v_right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub v_min: f64,
    pub v_max: f64,
    pub n_points: usize,
    /// Quadrupole drive held fixed in grid mode.
    pub v_fixed: f64,
    pub dv_rl_min: f64,
    pub dv_rl_max: f64,
    pub dv_tb_min: f64,
    pub dv_tb_max: f64,
    pub n_rl: usize,
    pub n_tb: usize,
    pub crossing_tol_uev: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            v_min: -0.5,
            v_max: 0.7,
            n_points: 13,
            v_fixed: 0.5,
            dv_rl_min: 0.0,
            dv_rl_max: 0.2,
            dv_tb_min: 0.0,
            dv_tb_max: 0.2,
            n_rl: 9,
            n_tb: 9,
            crossing_tol_uev: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub v_start: f64,
    pub dv_rl_start: f64,
    pub dv_tb_start: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub dv_min: f64,
    pub dv_max: f64,
    pub max_evals: usize,
    pub target_fss_uev: f64,
    pub simplex_tol_v: f64,
    pub max_restarts: usize,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let o = OptimizeOptions::default();
        OptimizeSection {
            v_start: 0.5,
            dv_rl_start: 0.05,
            dv_tb_start: 0.05,
            v_min: o.bounds_lo[0],
            v_max: o.bounds_hi[0],
            dv_min: 0.0,
            dv_max: 0.2,
            max_evals: o.max_evals,
            target_fss_uev: o.target_fss_uev,
            simplex_tol_v: o.simplex_tol_v,
            max_restarts: o.max_restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub sweep_csv: String,
    pub grid_csv: String,
    pub grid_matrix_csv: String,
    pub trace_csv: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".to_string(),
            sweep_csv: "sweep.csv".to_string(),
            grid_csv: "grid.csv".to_string(),
            grid_matrix_csv: "grid_matrix.csv".to_string(),
            trace_csv: "trace.csv".to_string(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: 0,
            device: DeviceSection::default(),
            materials: MaterialsSection::default(),
            grid: GridSection::default(),
            solver: SolverSection::default(),
            gates: GatesSection::default(),
            sweep: SweepSection::default(),
            optimize: OptimizeSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn device_spec(&self) -> DeviceSpec {
        DeviceSpec {
            dot_radius_mean_nm: self.device.dot_radius_mean_nm,
            dot_elongation: self.device.dot_elongation,
            dot_axis_angle_deg: self.device.dot_axis_angle_deg,
            shell_thickness_nm: self.device.shell_thickness_nm,
            dielectric_thickness_nm: self.device.dielectric_thickness_nm,
            gate_arc_width_nm: self.device.gate_arc_width_nm,
            dielectric_permittivity: self.device.dielectric_permittivity,
            materials_dot: self
                .materials
                .dot
                .clone()
                .unwrap_or_else(MaterialParams::gaas_dot),
            materials_shell: self
                .materials
                .shell
                .clone()
                .unwrap_or_else(MaterialParams::algaas_shell),
        }
    }

    pub fn grid2d(&self) -> Grid2D {
        Grid2D {
            nx: self.grid.nx,
            ny: self.grid.ny,
            extent_x_nm: self.grid.extent_x_nm,
            extent_y_nm: self.grid.extent_y_nm,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            poisson: PoissonOptions {
                rel_tol: self.solver.poisson_rel_tol,
                max_iter_factor: self.solver.poisson_max_iter_factor,
            },
            eigen: EigenOptions {
                tol_ev: self.solver.eigen_tol_ev,
                max_iter: self.solver.eigen_max_iter,
            },
            self_consistent: self.solver.self_consistent,
            hartree_relax: self.solver.hartree_relax,
            hartree_tol_v: self.solver.hartree_tol_v,
            hartree_max_iter: self.solver.hartree_max_iter,
        }
    }

    pub fn gate_voltages(&self) -> GateVoltages {
        GateVoltages {
            v_top: self.gates.v_top,
            v_bottom: self.gates.v_bottom,
            v_left: self.gates.v_left,
            v_right: self.gates.v_right,
        }
    }

    pub fn optimize_options(&self) -> OptimizeOptions {
        OptimizeOptions {
            bounds_lo: [self.optimize.v_min, self.optimize.dv_min, self.optimize.dv_min],
            bounds_hi: [self.optimize.v_max, self.optimize.dv_max, self.optimize.dv_max],
            max_evals: self.optimize.max_evals,
            target_fss_uev: self.optimize.target_fss_uev,
            simplex_tol_v: self.optimize.simplex_tol_v,
            max_restarts: self.optimize.max_restarts,
            seed: self.seed,
        }
    }

    pub fn optimize_start(&self) -> QuadrupoleParam {
        QuadrupoleParam {
            v: self.optimize.v_start,
            dv_rl: self.optimize.dv_rl_start,
            dv_tb: self.optimize.dv_tb_start,
        }
    }

    pub fn exec_mode(&self) -> ExecMode {
        if self.workers == 1 {
            ExecMode::Sequential
        } else {
            ExecMode::Parallel
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trip_is_identity() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back = RunConfig::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_key_is_rejected_and_named() {
        let err = RunConfig::from_str("[device]\nshell_thikness_nm = 110.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("shell_thikness_nm"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn partial_config_takes_defaults() {
        let cfg = RunConfig::from_str("[device]\ndot_axis_angle_deg = 20.0\n").unwrap();
        assert_eq!(cfg.device.dot_axis_angle_deg, 20.0);
        assert_eq!(cfg.device.shell_thickness_nm, 110.0);
        assert_eq!(cfg.grid.nx, 512);
        let spec = cfg.device_spec();
        assert_eq!(spec.materials_dot, MaterialParams::gaas_dot());
    }

    #[test]
    fn material_override_applies() {
        let cfg = RunConfig::from_str(
            "[materials.shell]\nbulk_gap_ev = 1.929\nkane_ep_ev = 23.0\neff_mass_e = 0.094\n\
             eff_mass_hh = 0.57\nrel_permittivity = 12.0\ncb_offset_ev = 0.3\nvb_offset_ev = 0.15\n",
        )
        .unwrap();
        assert_eq!(cfg.device_spec().materials_shell.cb_offset_ev, 0.3);
    }
}

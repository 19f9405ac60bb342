#![allow(dead_code)]
//! Shared fixtures: a shrunken device on a coarse grid so that the full
//! pipeline runs in well under a second per configuration.

use qdsim::device::{DeviceSpec, Grid2D};
use qdsim::excitonics::SolverOptions;

pub fn small_device() -> DeviceSpec {
    DeviceSpec {
        shell_thickness_nm: 30.0,
        dielectric_thickness_nm: 30.0,
        gate_arc_width_nm: 60.0,
        ..DeviceSpec::default()
    }
}

pub fn small_grid() -> Grid2D {
    Grid2D::square(96, 210.0)
}

pub fn small_options() -> SolverOptions {
    SolverOptions::default()
}

/// TOML matching `small_device()` / `small_grid()` for CLI-level tests.
pub fn small_config_toml() -> String {
    "\
workers = 1

[device]
shell_thickness_nm = 30.0
dielectric_thickness_nm = 30.0
gate_arc_width_nm = 60.0

[grid]
nx = 96
ny = 96
extent_x_nm = 210.0
extent_y_nm = 210.0
"
    .to_string()
}

/// Fresh scratch directory under the target dir, unique per test name.
pub fn scratch_dir(name: &str) -> std::path::PathBuf {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

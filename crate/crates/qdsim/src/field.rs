//! Scalar fields sampled on the simulation grid.

use crate::device::Grid2D;
use crate::error::{Result, SimError};
use std::io::Write;

/// Physical meaning of a sampled field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Electrostatic potential in V.
    Potential,
    /// Real wavefunction amplitude in nm^-1, normalized so that
    /// sum(psi^2) * h^2 == 1.
    Wavefunction,
    /// Density in nm^-2.
    Density,
}

#[derive(Debug, Clone)]
pub struct ScalarField2D {
    pub grid: Grid2D,
    pub kind: FieldKind,
    pub data: Vec<f64>,
}

impl ScalarField2D {
    pub fn zeros(grid: Grid2D, kind: FieldKind) -> Self {
        ScalarField2D {
            grid,
            kind,
            data: vec![0.0; grid.n_cells()],
        }
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(grid: Grid2D, kind: FieldKind, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                data.push(f(grid.x(i), y));
            }
        }
        ScalarField2D { grid, kind, data }
    }

    pub fn assert_same_grid(&self, other: &ScalarField2D) -> Result<()> {
        if self.grid != other.grid {
            return Err(SimError::GridMismatch(format!(
                "{}x{} vs {}x{}",
                self.grid.nx, self.grid.ny, other.grid.nx, other.grid.ny
            )));
        }
        Ok(())
    }

    pub fn assert_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Degenerate(format!("{what} contains non-finite values")));
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescales so that sum(psi^2) * h^2 == 1 and tags the field as a
    /// wavefunction. Fails on an all-zero field.
    pub fn normalize_wavefunction(&mut self) -> Result<()> {
        let h = self.grid.spacing_nm();
        let norm = self.l2_norm() * h;
        if norm <= 0.0 || !norm.is_finite() {
            return Err(SimError::Degenerate("cannot normalize a zero field".into()));
        }
        for v in &mut self.data {
            *v /= norm;
        }
        self.kind = FieldKind::Wavefunction;
        Ok(())
    }

    /// Writes `x_nm,y_nm,<value_header>` rows, y-major, LF line endings.
    pub fn write_csv<W: Write>(&self, mut w: W, value_header: &str) -> Result<()> {
        write!(w, "x_nm,y_nm,{value_header}\n")?;
        for j in 0..self.grid.ny {
            let y = self.grid.y(j);
            for i in 0..self.grid.nx {
                write!(
                    w,
                    "{},{},{}\n",
                    fmt_sig9(self.grid.x(i)),
                    fmt_sig9(y),
                    fmt_sig9(self.data[self.grid.idx(i, j)])
                )?;
            }
        }
        Ok(())
    }
}

/// Formats a float with 9 significant digits, stable across runs.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    format!("{x:.8e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_contract() {
        let grid = Grid2D::square(64, 32.0);
        let mut f = ScalarField2D::from_fn(grid, FieldKind::Density, |x, y| {
            (-(x * x + y * y) / 18.0).exp()
        });
        f.normalize_wavefunction().unwrap();
        let h2 = grid.spacing_nm().powi(2);
        let total: f64 = f.data.iter().map(|v| v * v).sum::<f64>() * h2;
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_field_cannot_be_normalized() {
        let grid = Grid2D::square(8, 8.0);
        let mut f = ScalarField2D::zeros(grid, FieldKind::Density);
        assert!(f.normalize_wavefunction().is_err());
    }

    #[test]
    fn sig9_formatting_is_stable() {
        assert_eq!(fmt_sig9(0.0), "0.0");
        assert_eq!(fmt_sig9(11.0), "1.10000000e1");
        assert_eq!(fmt_sig9(-2.5e-7), "-2.50000000e-7");
    }
}

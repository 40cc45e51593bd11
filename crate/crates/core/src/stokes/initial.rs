//! Divergence-free initial data.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::field::VectorSlice;
use crate::geometry::grid::Lattice;
use crate::geometry::random::random_vector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    Zero,
    /// `amplitude sin(2 pi m.x / L) e_component`, needs `m_component = 0`.
    SingleMode { mode: [i64; 3], component: usize, amplitude: f64 },
    /// `amplitude (sin x cos y cos z, -cos x sin y cos z, 0)` in units of
    /// `2 pi / L`; the `z` factor is dropped when `d = 2`.
    TaylorGreen { amplitude: f64 },
    /// Seeded solenoidal field with unit RMS magnitude times `amplitude`.
    Random { modes: usize, amplitude: f64, seed: u64 },
}

impl InitialData {
    pub fn kind(&self) -> &'static str {
        match self {
            InitialData::Zero => "zero",
            InitialData::SingleMode { .. } => "single_mode",
            InitialData::TaylorGreen { .. } => "taylor_green",
            InitialData::Random { .. } => "random",
        }
    }
}

pub fn initial_velocity(lattice: &Lattice, spec: &InitialData) -> Result<VectorSlice> {
    let k = 2.0 * PI / lattice.period();
    let dim = lattice.dim();
    let n = lattice.points() as i64;
    match *spec {
        InitialData::Zero => Ok(VectorSlice::zeros(*lattice)),
        InitialData::SingleMode { mode, component, amplitude } => {
            if component >= dim || mode[component] != 0 {
                return Err(Error::Precondition(
                    "single mode must be orthogonal to its component".into(),
                ));
            }
            if mode[dim..].iter().any(|&m| m != 0) || mode.iter().all(|&m| m == 0) {
                return Err(Error::Precondition(format!("mode {mode:?} invalid for d = {dim}")));
            }
            if mode.iter().any(|&m| 3 * m.abs() >= n) {
                return Err(Error::Precondition(format!("mode {mode:?} outside the resolved band")));
            }
            Ok(VectorSlice::from_fn(*lattice, |x| {
                let phase: f64 = (0..3).map(|a| mode[a] as f64 * x[a]).sum::<f64>() * k;
                let mut v = [0.0; 3];
                v[component] = amplitude * phase.sin();
                v
            }))
        }
        InitialData::TaylorGreen { amplitude } => {
            if n < 4 {
                return Err(Error::Precondition("Taylor-Green needs N >= 4".into()));
            }
            Ok(VectorSlice::from_fn(*lattice, |x| {
                let (a, b) = (k * x[0], k * x[1]);
                let cz = if dim == 3 { (k * x[2]).cos() } else { 1.0 };
                [amplitude * a.sin() * b.cos() * cz, -amplitude * a.cos() * b.sin() * cz, 0.0]
            }))
        }
        InitialData::Random { modes, amplitude, seed } => {
            let comps = random_vector(lattice, modes, seed, 0, true)?;
            Ok(VectorSlice { lattice: *lattice, comps }.scaled(amplitude))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::spectral::plan;

    #[test]
    fn catalog_is_divergence_free() {
        let lat = Lattice::new(3, 2.0, 16).unwrap();
        for spec in [
            InitialData::TaylorGreen { amplitude: 1.5 },
            InitialData::SingleMode { mode: [1, 0, 2], component: 1, amplitude: 1.0 },
            InitialData::Random { modes: 3, amplitude: 2.0, seed: 7 },
        ] {
            let u = initial_velocity(&lat, &spec).unwrap();
            let div = plan(&lat).divergence_slice(&u.comps);
            assert!(div.iter().all(|v| v.abs() < 1e-12), "{}", spec.kind());
        }
    }

    #[test]
    fn bad_modes_rejected() {
        let lat = Lattice::new(3, 1.0, 16).unwrap();
        let bad = InitialData::SingleMode { mode: [0, 1, 0], component: 1, amplitude: 1.0 };
        assert!(initial_velocity(&lat, &bad).is_err());
        let bad = InitialData::SingleMode { mode: [6, 0, 0], component: 1, amplitude: 1.0 };
        assert!(initial_velocity(&lat, &bad).is_err());
    }
}

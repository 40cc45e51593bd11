//! Test-field library: constants, band-limited random fields, a periodized
//! truncated logarithm and lacunary cosine series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::field::{upper_pairs, ScalarField, SkewTensorField, VectorField};
use crate::geometry::grid::{Lattice, SpaceTimeGrid};
use crate::geometry::random::random_scalar;

/// A reproducible catalog construction; serialized into report metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CatalogSpec {
    Constant { value: f64 },
    /// Unit-RMS band-limited field times `amplitude`.
    Random { modes: usize, amplitude: f64, seed: u64 },
    /// `amplitude * ln(L / max(|x - c|, L 2^-depth))` with the torus distance.
    Log { depth: u32, amplitude: f64, center: [f64; 3] },
    /// `amplitude * sum_{k < levels} cos(2 pi 2^k x_a / L)`.
    Lacunary { levels: u32, amplitude: f64 },
}

impl CatalogSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            CatalogSpec::Constant { .. } => "constant",
            CatalogSpec::Random { .. } => "random",
            CatalogSpec::Log { .. } => "log",
            CatalogSpec::Lacunary { .. } => "lacunary",
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        match self.clone() {
            CatalogSpec::Constant { value } => CatalogSpec::Constant { value: lambda * value },
            CatalogSpec::Random { modes, amplitude, seed } => {
                CatalogSpec::Random { modes, amplitude: lambda * amplitude, seed }
            }
            CatalogSpec::Log { depth, amplitude, center } => {
                CatalogSpec::Log { depth, amplitude: lambda * amplitude, center }
            }
            CatalogSpec::Lacunary { levels, amplitude } => {
                CatalogSpec::Lacunary { levels, amplitude: lambda * amplitude }
            }
        }
    }
}

/// Builds a spec from a kind name and numeric parameters
/// (`value`, `modes`, `amplitude`, `seed`, `depth`, `levels`).
pub fn bmo_catalog(kind: &str, params: &[(&str, f64)]) -> Result<CatalogSpec> {
    let get = |name: &str, default: f64| {
        params.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).unwrap_or(default)
    };
    match kind {
        "constant" => Ok(CatalogSpec::Constant { value: get("value", 0.0) }),
        "random" => Ok(CatalogSpec::Random {
            modes: get("modes", 3.0) as usize,
            amplitude: get("amplitude", 1.0),
            seed: get("seed", 0.0) as u64,
        }),
        "log" => Ok(CatalogSpec::Log {
            depth: get("depth", 4.0) as u32,
            amplitude: get("amplitude", 1.0),
            center: [get("cx", 0.0), get("cy", 0.0), get("cz", 0.0)],
        }),
        "lacunary" => Ok(CatalogSpec::Lacunary {
            levels: get("levels", 3.0) as u32,
            amplitude: get("amplitude", 1.0),
        }),
        other => Err(Error::UnknownKind(other.to_string())),
    }
}

/// One scalar slice; `stream` selects an independent variant (component).
pub fn catalog_scalar(lattice: &Lattice, spec: &CatalogSpec, stream: u64) -> Result<Vec<f64>> {
    let l = lattice.period();
    match *spec {
        CatalogSpec::Constant { value } => Ok(vec![value; lattice.len()]),
        CatalogSpec::Random { modes, amplitude, seed } => {
            Ok(random_scalar(lattice, modes, seed, stream)?.into_iter().map(|v| amplitude * v).collect())
        }
        CatalogSpec::Log { depth, amplitude, center } => {
            if depth == 0 || depth > 40 {
                return Err(Error::Precondition(format!("log depth {depth} out of range 1..=40")));
            }
            let floor = l * 0.5f64.powi(depth as i32);
            let mut c = center;
            c[0] += stream as f64 * l / 3.0;
            Ok(lattice
                .indices()
                .map(|idx| {
                    let r = lattice.distance(lattice.position(idx), c).max(floor);
                    amplitude * (l / r).ln()
                })
                .collect())
        }
        CatalogSpec::Lacunary { levels, amplitude } => {
            if levels == 0 || 3 * (1usize << (levels - 1)) >= lattice.points() {
                return Err(Error::Precondition(format!(
                    "{levels} lacunary levels are not resolved by N = {}",
                    lattice.points()
                )));
            }
            let axis = stream as usize % lattice.dim();
            let w = 2.0 * std::f64::consts::PI / l;
            Ok(lattice
                .indices()
                .map(|idx| {
                    let x = lattice.position(idx)[axis];
                    amplitude * (0..levels).map(|k| ((1u64 << k) as f64 * w * x).cos()).sum::<f64>()
                })
                .collect())
        }
    }
}

/// Steady skew tensor whose independent components are catalog variants.
pub fn catalog_tensor(grid: &SpaceTimeGrid, spec: &CatalogSpec) -> Result<SkewTensorField> {
    let lat = grid.lattice();
    let upper = (0..upper_pairs(lat.dim()).len())
        .map(|p| {
            let s = catalog_scalar(lat, spec, p as u64)?;
            ScalarField::from_data(*grid, s.repeat(grid.steps()))
        })
        .collect::<Result<Vec<_>>>()?;
    SkewTensorField::from_upper(*grid, upper)
}

/// Steady stream field `omega` (d = 3) whose components are catalog variants.
pub fn catalog_stream(grid: &SpaceTimeGrid, spec: &CatalogSpec) -> Result<VectorField> {
    let lat = grid.lattice();
    if lat.dim() != 3 {
        return Err(Error::Grid("stream fields need d = 3".into()));
    }
    let comps = (0..3)
        .map(|c| {
            let s = catalog_scalar(lat, spec, 10 + c as u64)?;
            ScalarField::from_data(*grid, s.repeat(grid.steps()))
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmo::{bmo_seminorm, BallLadder, BmoRegion};

    #[test]
    fn unknown_kind_rejected() {
        assert!(matches!(bmo_catalog("wavelet", &[]), Err(Error::UnknownKind(_))));
        let s = bmo_catalog("random", &[("modes", 2.0), ("seed", 5.0)]).unwrap();
        assert_eq!(s, CatalogSpec::Random { modes: 2, amplitude: 1.0, seed: 5 });
    }

    #[test]
    fn spec_json_round_trip() {
        let s = CatalogSpec::Log { depth: 6, amplitude: 0.5, center: [0.1, 0.2, 0.3] };
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"kind\":\"log\""));
        assert_eq!(serde_json::from_str::<CatalogSpec>(&j).unwrap(), s);
    }

    #[test]
    fn constant_and_homogeneity() {
        let g = SpaceTimeGrid::with_dims(2, 1.0, 32, 0.0, 1.0, 1).unwrap();
        let ladder = BallLadder::geometric(g.lattice());
        let c = ScalarField::from_data(g, catalog_scalar(g.lattice(), &CatalogSpec::Constant { value: 2.0 }, 0).unwrap())
            .unwrap();
        assert_eq!(bmo_seminorm(&c, &BmoRegion::Torus, &ladder).unwrap(), 0.0);
        let spec = CatalogSpec::Lacunary { levels: 3, amplitude: 1.0 };
        let a = ScalarField::from_data(g, catalog_scalar(g.lattice(), &spec, 0).unwrap()).unwrap();
        let b = ScalarField::from_data(g, catalog_scalar(g.lattice(), &spec.scaled(2.5), 0).unwrap()).unwrap();
        let na = bmo_seminorm(&a, &BmoRegion::Torus, &ladder).unwrap();
        let nb = bmo_seminorm(&b, &BmoRegion::Torus, &ladder).unwrap();
        assert!((nb - 2.5 * na).abs() < 1e-12 * nb);
    }

    #[test]
    fn stream_and_tensor_shapes() {
        let g = SpaceTimeGrid::with_dims(3, 1.0, 16, 0.0, 1.0, 1).unwrap();
        let spec = CatalogSpec::Random { modes: 3, amplitude: 1.0, seed: 1 };
        assert_eq!(catalog_tensor(&g, &spec).unwrap().upper().len(), 3);
        assert_eq!(catalog_stream(&g, &spec).unwrap().dim(), 3);
        let g2 = SpaceTimeGrid::with_dims(2, 1.0, 16, 0.0, 1.0, 1).unwrap();
        assert_eq!(catalog_tensor(&g2, &spec).unwrap().upper().len(), 1);
        assert!(catalog_stream(&g2, &spec).is_err());
    }
}

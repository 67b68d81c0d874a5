//! Temperature-dependent material data per mesh region.

use std::collections::HashMap;

use crate::error::Error;
use crate::fem::ElasticModuli;
use crate::Result;

/// Piecewise-linear table over a strictly increasing abscissa, clamped to
/// the end values outside the sampled range. Queries exactly at a sample
/// return the stored value bitwise.
#[derive(Debug, Clone)]
pub struct PropertyTable {
    points: Vec<f64>,
    values: Vec<f64>,
}

impl PropertyTable {
    pub fn new(samples: &[(f64, f64)]) -> Result<PropertyTable> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("property table needs at least one sample".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidConfig(format!(
                    "table abscissae must be strictly increasing, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if samples.iter().any(|s| !s.0.is_finite() || !s.1.is_finite()) {
            return Err(Error::InvalidConfig("table samples must be finite".into()));
        }
        Ok(PropertyTable {
            points: samples.iter().map(|s| s.0).collect(),
            values: samples.iter().map(|s| s.1).collect(),
        })
    }

    /// A table that is the same value everywhere.
    pub fn constant(value: f64) -> PropertyTable {
        PropertyTable { points: vec![0.0], values: vec![value] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.points.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => self.values[i],
            Err(0) => self.values[0],
            Err(i) if i == self.points.len() => self.values[i - 1],
            Err(i) => {
                let (x0, x1) = (self.points[i - 1], self.points[i]);
                let (y0, y1) = (self.values[i - 1], self.values[i]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Slope of the active segment; zero in the clamped regions. At an
    /// interior sample the right-hand segment's slope is used.
    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.points.len();
        let i = match self.points.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => i + 1,
            Err(i) => i,
        };
        if i == 0 || i >= n {
            return 0.0;
        }
        (self.values[i] - self.values[i - 1]) / (self.points[i] - self.points[i - 1])
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One region's material model. Thermal expansion, stiffness, conductivity
/// and specific heat vary with temperature; density and the Poisson ratio
/// are constants.
#[derive(Debug, Clone)]
pub struct Material {
    pub alpha: PropertyTable,
    pub young: PropertyTable,
    pub kappa: PropertyTable,
    pub c_v: PropertyTable,
    pub rho: f64,
    pub poisson: f64,
    pub t_ref: f64,
}

impl Material {
    pub fn new(
        alpha: PropertyTable,
        young: PropertyTable,
        kappa: PropertyTable,
        c_v: PropertyTable,
        rho: f64,
        poisson: f64,
        t_ref: f64,
    ) -> Result<Material> {
        for (what, table) in [("E", &young), ("kappa", &kappa), ("c_v", &c_v)] {
            if table.min_value() <= 0.0 {
                return Err(Error::InvalidMaterialValue {
                    what,
                    value: table.min_value(),
                    temperature: f64::NAN,
                });
            }
        }
        if rho <= 0.0 {
            return Err(Error::InvalidMaterialValue {
                what: "rho",
                value: rho,
                temperature: f64::NAN,
            });
        }
        if !(-1.0 < poisson && poisson < 0.5) {
            return Err(Error::InvalidModuli { young: young.eval(t_ref), poisson });
        }
        Ok(Material { alpha, young, kappa, c_v, rho, poisson, t_ref })
    }

    /// A material with temperature-independent properties.
    pub fn constant(
        alpha: f64,
        young: f64,
        kappa: f64,
        c_v: f64,
        rho: f64,
        poisson: f64,
        t_ref: f64,
    ) -> Result<Material> {
        Material::new(
            PropertyTable::constant(alpha),
            PropertyTable::constant(young),
            PropertyTable::constant(kappa),
            PropertyTable::constant(c_v),
            rho,
            poisson,
            t_ref,
        )
    }

    pub fn moduli_at(&self, temperature: f64) -> Result<ElasticModuli> {
        ElasticModuli::new(self.young.eval(temperature), self.poisson)
    }
}

/// Region id to material map covering every cell region of a mesh.
#[derive(Debug, Clone, Default)]
pub struct MaterialTable {
    materials: HashMap<i32, Material>,
}

impl MaterialTable {
    pub fn new() -> MaterialTable {
        MaterialTable { materials: HashMap::new() }
    }

    pub fn insert(&mut self, region: i32, material: Material) {
        self.materials.insert(region, material);
    }

    pub fn get(&self, region: i32) -> Result<&Material> {
        self.materials.get(&region).ok_or(Error::UnknownRegion(region))
    }

    /// (alpha_L, E, kappa, c_v) interpolated at the given temperature.
    pub fn eval(&self, region: i32, temperature: f64) -> Result<(f64, f64, f64, f64)> {
        let m = self.get(region)?;
        Ok((
            m.alpha.eval(temperature),
            m.young.eval(temperature),
            m.kappa.eval(temperature),
            m.c_v.eval(temperature),
        ))
    }

    pub fn regions(&self) -> Vec<i32> {
        let mut r: Vec<i32> = self.materials.keys().copied().collect();
        r.sort_unstable();
        r
    }
}

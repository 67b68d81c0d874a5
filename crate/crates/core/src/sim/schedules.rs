//! Time-dependent boundary conditions per tagged facet region.

use std::collections::HashMap;

use super::materials::PropertyTable;
use crate::error::Error;
use crate::mesh::Mesh;
use crate::Result;

/// One region's boundary condition; each time function is piecewise linear
/// over the simulated interval and clamped outside it.
#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    RobinThermal { beta: PropertyTable, t_bc: PropertyTable },
    Pressure { p: PropertyTable },
    Displacement { u: [PropertyTable; 3] },
}

/// Facet tag to boundary condition map.
#[derive(Debug, Clone, Default)]
pub struct BoundarySchedule {
    entries: HashMap<i32, BoundaryCondition>,
}

impl BoundarySchedule {
    pub fn new() -> BoundarySchedule {
        BoundarySchedule { entries: HashMap::new() }
    }

    pub fn insert(&mut self, region: i32, condition: BoundaryCondition) {
        self.entries.insert(region, condition);
    }

    pub fn get(&self, region: i32) -> Result<&BoundaryCondition> {
        self.entries.get(&region).ok_or(Error::UnknownRegion(region))
    }

    pub fn condition(&self, region: i32) -> Option<&BoundaryCondition> {
        self.entries.get(&region)
    }

    pub fn regions(&self) -> Vec<i32> {
        let mut r: Vec<i32> = self.entries.keys().copied().collect();
        r.sort_unstable();
        r
    }

    /// Every scheduled region must be carried by at least one tagged facet.
    pub fn validate_against(&self, mesh: &Mesh) -> Result<()> {
        for region in self.regions() {
            if !mesh.tagged_facet_owners().iter().any(|(_, _, tag)| *tag == region) {
                return Err(Error::UnknownRegion(region));
            }
        }
        Ok(())
    }

    /// (beta, T_bc) at time t for a thermal Robin region.
    pub fn eval_robin(&self, region: i32, t: f64) -> Result<(f64, f64)> {
        match self.get(region)? {
            BoundaryCondition::RobinThermal { beta, t_bc } => Ok((beta.eval(t), t_bc.eval(t))),
            _ => Err(Error::InvalidConfig(format!(
                "boundary region {} is not a thermal Robin condition",
                region
            ))),
        }
    }

    pub fn eval_pressure(&self, region: i32, t: f64) -> Result<f64> {
        match self.get(region)? {
            BoundaryCondition::Pressure { p } => Ok(p.eval(t)),
            _ => Err(Error::InvalidConfig(format!(
                "boundary region {} is not a pressure condition",
                region
            ))),
        }
    }

    pub fn eval_displacement(&self, region: i32, t: f64) -> Result<[f64; 3]> {
        match self.get(region)? {
            BoundaryCondition::Displacement { u } => {
                Ok([u[0].eval(t), u[1].eval(t), u[2].eval(t)])
            }
            _ => Err(Error::InvalidConfig(format!(
                "boundary region {} is not a displacement condition",
                region
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box_mesh;

    fn ramp(v0: f64, v1: f64) -> PropertyTable {
        PropertyTable::new(&[(0.0, v0), (10.0, v1)]).unwrap()
    }

    #[test]
    fn robin_values_interpolate_in_time() {
        let mut s = BoundarySchedule::new();
        s.insert(
            3,
            BoundaryCondition::RobinThermal { beta: ramp(100.0, 200.0), t_bc: ramp(300.0, 500.0) },
        );
        let (beta, t_bc) = s.eval_robin(3, 5.0).unwrap();
        assert!((beta - 150.0).abs() < 1e-12);
        assert!((t_bc - 400.0).abs() < 1e-12);
        // Clamped outside the table.
        assert_eq!(s.eval_robin(3, 20.0).unwrap(), (200.0, 500.0));
    }

    #[test]
    fn kind_mismatch_and_unknown_region_error() {
        let mut s = BoundarySchedule::new();
        s.insert(1, BoundaryCondition::Pressure { p: ramp(0.0, 1e5) });
        assert!(s.eval_robin(1, 0.0).is_err());
        assert!(matches!(s.eval_pressure(9, 0.0), Err(Error::UnknownRegion(9))));
        assert!((s.eval_pressure(1, 5.0).unwrap() - 5e4).abs() < 1e-9);
    }

    #[test]
    fn displacement_components_evaluate() {
        let mut s = BoundarySchedule::new();
        s.insert(
            2,
            BoundaryCondition::Displacement {
                u: [ramp(0.0, 1.0), PropertyTable::constant(0.0), PropertyTable::constant(0.0)],
            },
        );
        assert_eq!(s.eval_displacement(2, 10.0).unwrap(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn validation_requires_existing_tags() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 1, 1, 1).unwrap();
        let mut s = BoundarySchedule::new();
        s.insert(1, BoundaryCondition::Pressure { p: PropertyTable::constant(0.0) });
        assert!(s.validate_against(&mesh).is_ok());
        s.insert(77, BoundaryCondition::Pressure { p: PropertyTable::constant(0.0) });
        assert!(matches!(s.validate_against(&mesh), Err(Error::UnknownRegion(77))));
    }
}

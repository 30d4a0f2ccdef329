//! Convex compact price regions.
//!
//! Every region supports membership, Euclidean projection, a linear
//! maximization oracle and a diameter (exact where cheap, otherwise an upper
//! bound flagged as such). Regions are immutable after construction.

mod band;
mod ball;
mod dykstra;
mod gom;
mod hull;
mod simplex;
mod trimmed;

pub use band::BandRegion;
pub use ball::BallRegion;
pub use dykstra::{dykstra, polish_projection, DykstraConfig, DykstraReport, Halfspace};
pub use gom::{pair_count, pair_index, pair_of, triples, GomRegion};
pub use hull::{min_norm_point, HullHandle, MinNormPoint, EXACT_DIAMETER_LIMIT, MAX_GENERATORS};
pub use simplex::{project_onto_scaled_simplex, SimplexRegion};
pub use trimmed::HalfspaceTrimmedSimplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default membership tolerance.
pub const MEMBER_TOL: f64 = 1e-9;

pub trait PriceRegion {
    fn dim(&self) -> usize;

    /// Largest violation of any defining constraint (0 for members).
    fn violation(&self, x: &[f64]) -> f64;

    fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(self.violation(x) <= tol)
    }

    /// Euclidean projection `argmin_{x ∈ region} ‖x − y‖²`.
    fn project(&self, y: &[f64]) -> Result<Vec<f64>>;

    /// A member maximizing `c·x`; a vertex for polytopes.
    fn linear_maximize(&self, c: &[f64]) -> Result<Vec<f64>>;

    fn diameter(&self) -> f64;

    /// Whether [`PriceRegion::diameter`] is exact or only an upper bound.
    fn diameter_is_exact(&self) -> bool {
        true
    }

    fn interior_point(&self) -> Vec<f64>;

    /// Axis-aligned bounding box, used by the grid oracle.
    fn bounding_box(&self) -> Vec<(f64, f64)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    Simplex(SimplexRegion),
    Ball(BallRegion),
    Gom(GomRegion),
    Band(BandRegion),
    TrimmedSimplex(HalfspaceTrimmedSimplex),
    Hull(HullHandle),
}

macro_rules! dispatch {
    ($self:ident, $r:ident => $e:expr) => {
        match $self {
            Region::Simplex($r) => $e,
            Region::Ball($r) => $e,
            Region::Gom($r) => $e,
            Region::Band($r) => $e,
            Region::TrimmedSimplex($r) => $e,
            Region::Hull($r) => $e,
        }
    };
}

impl PriceRegion for Region {
    fn dim(&self) -> usize {
        dispatch!(self, r => r.dim())
    }
    fn violation(&self, x: &[f64]) -> f64 {
        dispatch!(self, r => r.violation(x))
    }
    fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        dispatch!(self, r => r.contains(x, tol))
    }
    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, r => r.project(y))
    }
    fn linear_maximize(&self, c: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, r => r.linear_maximize(c))
    }
    fn diameter(&self) -> f64 {
        dispatch!(self, r => r.diameter())
    }
    fn diameter_is_exact(&self) -> bool {
        dispatch!(self, r => r.diameter_is_exact())
    }
    fn interior_point(&self) -> Vec<f64> {
        dispatch!(self, r => r.interior_point())
    }
    fn bounding_box(&self) -> Vec<(f64, f64)> {
        dispatch!(self, r => r.bounding_box())
    }
}

impl Region {
    pub fn simplex(n: usize) -> Self {
        Region::Simplex(SimplexRegion::new(n))
    }

    pub fn ball(dim: usize) -> Self {
        Region::Ball(BallRegion::unit_at_ones(dim))
    }

    pub fn gom(n: usize) -> Self {
        Region::Gom(GomRegion::new(n))
    }

    pub fn band(n: usize, c: f64) -> Self {
        Region::Band(BandRegion::new(n, c))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Region::Simplex(_) => "simplex",
            Region::Ball(_) => "ball",
            Region::Gom(_) => "gom",
            Region::Band(_) => "band",
            Region::TrimmedSimplex(_) => "trimmed_simplex",
            Region::Hull(_) => "hull",
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            Region::Simplex(s) if s.n == 0 => Err(Error::Config("simplex needs n ≥ 1".into())),
            Region::Ball(b) if b.center.is_empty() || !(b.radius > 0.0) => {
                Err(Error::Config("ball needs dimension ≥ 1 and radius > 0".into()))
            }
            Region::Gom(g) if g.n < 2 => Err(Error::Config("gom needs n ≥ 2".into())),
            Region::Band(b) if b.n == 0 || !(b.c >= 0.0) => {
                Err(Error::Config("band needs n ≥ 1 and c ≥ 0".into()))
            }
            Region::TrimmedSimplex(t) => t.validate(),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dist;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn regions() -> Vec<Region> {
        vec![
            Region::simplex(4),
            Region::ball(3),
            Region::gom(4),
            Region::band(3, 0.5),
            Region::TrimmedSimplex(
                HalfspaceTrimmedSimplex::new(3, vec![Halfspace::new(vec![1.0, 0.0, 0.0], 0.6)]).unwrap(),
            ),
            Region::Hull(
                HullHandle::new(vec![
                    vec![0.0, 0.0, 0.0],
                    vec![1.0, 0.2, 0.0],
                    vec![0.3, 1.0, 0.1],
                    vec![0.2, 0.1, 1.0],
                    vec![0.9, 0.9, 0.9],
                ])
                .unwrap(),
            ),
        ]
    }

    #[test]
    fn projection_is_member_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for region in regions() {
            for _ in 0..50 {
                let y: Vec<f64> = (0..region.dim()).map(|_| rng.gen_range(-2.0..3.0)).collect();
                let p = region.project(&y).unwrap();
                assert!(region.contains(&p, 1e-9).unwrap(), "{} {:?}", region.kind_name(), p);
                let pp = region.project(&p).unwrap();
                assert!(dist(&p, &pp) < 1e-9, "{}", region.kind_name());
            }
        }
    }

    #[test]
    fn projection_beats_random_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for region in regions() {
            for _ in 0..30 {
                let y: Vec<f64> = (0..region.dim()).map(|_| rng.gen_range(-2.0..3.0)).collect();
                let p = region.project(&y).unwrap();
                // random member: project another random point
                let w: Vec<f64> = (0..region.dim()).map(|_| rng.gen_range(-1.0..2.0)).collect();
                let z = region.project(&w).unwrap();
                assert!(dist(&p, &y) <= dist(&z, &y) + 1e-7, "{}", region.kind_name());
            }
        }
    }

    #[test]
    fn diameter_dominates_member_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for region in regions() {
            let d = region.diameter();
            for _ in 0..100 {
                let a: Vec<f64> = (0..region.dim()).map(|_| rng.gen_range(-3.0..4.0)).collect();
                let b: Vec<f64> = (0..region.dim()).map(|_| rng.gen_range(-3.0..4.0)).collect();
                let (pa, pb) = (region.project(&a).unwrap(), region.project(&b).unwrap());
                assert!(dist(&pa, &pb) <= d + 1e-9);
            }
        }
    }

    #[test]
    fn interior_point_is_member() {
        for region in regions() {
            assert!(region.contains(&region.interior_point(), 1e-9).unwrap());
        }
    }

    #[test]
    fn linear_maximize_beats_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for region in regions() {
            for _ in 0..20 {
                let c: Vec<f64> = (0..region.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v = region.linear_maximize(&c).unwrap();
                assert!(region.contains(&v, 1e-9).unwrap());
                let y: Vec<f64> = (0..region.dim()).map(|_| rng.gen_range(-2.0..3.0)).collect();
                let z = region.project(&y).unwrap();
                let dot = crate::linalg::dot;
                assert!(dot(&c, &v) >= dot(&c, &z) - 1e-9, "{}", region.kind_name());
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let r = Region::simplex(3);
        assert!(matches!(r.contains(&[0.5, 0.5], 1e-9), Err(Error::DimensionMismatch { .. })));
        assert!(r.project(&[1.0]).is_err());
    }

    #[test]
    fn serde_tagging() {
        let r: Region = serde_json::from_str(r#"{"type":"band","n":2,"c":0.5}"#).unwrap();
        assert_eq!(r, Region::band(2, 0.5));
    }
}

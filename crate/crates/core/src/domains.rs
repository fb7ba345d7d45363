//! Reference domains, probe grids and the maps into the application domain.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceDomain {
    /// Closed unit disk `|z| ≤ 1`.
    Disk,
    /// Real interval `[-1, 1]`.
    Interval,
}

impl ReferenceDomain {
    pub fn contains(&self, t: C64) -> bool {
        match self {
            ReferenceDomain::Disk => t.norm() <= 1.0,
            ReferenceDomain::Interval => t.im == 0.0 && t.re.abs() <= 1.0,
        }
    }
}

/// `φ` from the reference domain onto the application domain `X`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainMap {
    #[default]
    Identity,
    /// `φ(t) = center + scale · t`
    Affine { center: C64, scale: C64 },
}

impl DomainMap {
    pub fn affine(center: C64, scale: C64) -> Result<Self> {
        let m = DomainMap::Affine { center, scale };
        m.validate()?;
        Ok(m)
    }

    /// The affine map taking `[-1, 1]` onto `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("invalid interval [{lo}, {hi}]")));
        }
        Self::affine(C64::new(0.5 * (lo + hi), 0.0), C64::new(0.5 * (hi - lo), 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DomainMap::Identity => Ok(()),
            DomainMap::Affine { center, scale } => {
                let finite = [center.re, center.im, scale.re, scale.im]
                    .iter()
                    .all(|v| v.is_finite());
                if !finite || scale == C64::new(0.0, 0.0) {
                    Err(Error::Config(format!(
                        "affine map needs finite center and nonzero scale, got center {center}, scale {scale}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Diameter of `φ(reference domain)`; both shipped domains have diameter 2.
    pub fn image_diameter(&self) -> f64 {
        match *self {
            DomainMap::Identity => 2.0,
            DomainMap::Affine { scale, .. } => 2.0 * scale.norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub domain: ReferenceDomain,
    pub nodes: Vec<C64>,
}

impl ProbeGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Roots of unity on the disk boundary, Chebyshev points of the first kind
/// on the interval.
pub fn probe_grid(domain: ReferenceDomain, n_a: usize) -> Result<ProbeGrid> {
    if n_a == 0 {
        return Err(Error::InvalidArgument("probe grid needs n_a >= 1".into()));
    }
    let nodes = match domain {
        ReferenceDomain::Disk => (0..n_a)
            .map(|t| C64::from_polar(1.0, 2.0 * PI * t as f64 / n_a as f64))
            .collect(),
        ReferenceDomain::Interval => (1..=n_a)
            .map(|t| C64::new(((2 * t - 1) as f64 * PI / (2 * n_a) as f64).cos(), 0.0))
            .collect(),
    };
    Ok(ProbeGrid { domain, nodes })
}

pub fn map_forward(map: &DomainMap, t: C64) -> C64 {
    match *map {
        DomainMap::Identity => t,
        DomainMap::Affine { center, scale } => center + scale * t,
    }
}

pub fn map_inverse(map: &DomainMap, x: C64) -> C64 {
    match *map {
        DomainMap::Identity => x,
        DomainMap::Affine { center, scale } => (x - center) / scale,
    }
}

pub fn project_to_domain(domain: ReferenceDomain, t: C64) -> C64 {
    match domain {
        ReferenceDomain::Disk => {
            let r = t.norm();
            if r <= 1.0 {
                t
            } else {
                t / r
            }
        }
        ReferenceDomain::Interval => C64::new(t.re.clamp(-1.0, 1.0), 0.0),
    }
}

/// Pull `x ∈ X` back to the reference domain, project, and push forward again.
pub fn project_in_image(domain: ReferenceDomain, map: &DomainMap, x: C64) -> C64 {
    map_forward(map, project_to_domain(domain, map_inverse(map, x)))
}

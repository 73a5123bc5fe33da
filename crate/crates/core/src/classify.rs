//! Orbit classification over a window of the cylinder, rendered as PGM.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{classify_orbit, CylinderPoint, MapParams, OrbitTag};
use crate::error::{Error, Result};

/// Tags of an `nx × ny` grid over `[re_min, re_max] × (−π, π]`, row-major
/// from the top row (`Im` near `π`) down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationGrid {
    pub window: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<OrbitTag>,
}

impl ClassificationGrid {
    /// Center of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> CylinderPoint {
        cell_center(self.window, self.nx, self.ny, i, j)
    }

    pub fn get(&self, i: usize, j: usize) -> OrbitTag {
        self.cells[j * self.nx + i]
    }

    pub fn fraction(&self, tag: OrbitTag) -> f64 {
        self.cells.iter().filter(|c| **c == tag).count() as f64 / self.cells.len() as f64
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.cells.len() != self.nx * self.ny {
            return Err(Error::InvalidArgument(format!(
                "{} cells for a {}x{} grid",
                self.cells.len(),
                self.nx,
                self.ny
            )));
        }
        Ok(())
    }
}

fn cell_center(window: (f64, f64), nx: usize, ny: usize, i: usize, j: usize) -> CylinderPoint {
    let re = window.0 + (i as f64 + 0.5) * (window.1 - window.0) / nx as f64;
    let im = PI - (j as f64 + 0.5) * TAU / ny as f64;
    CylinderPoint::new(re, im)
}

/// Classifies the center of every cell.
pub fn classify_grid(
    params: &MapParams,
    window: (f64, f64),
    nx: usize,
    ny: usize,
    max_iter: usize,
    radius_eps: f64,
) -> Result<ClassificationGrid> {
    if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
        return Err(Error::InvalidArgument(format!("empty window {}:{}", window.0, window.1)));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!("resolution {nx}x{ny} is empty")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    if !(radius_eps > 0.0) {
        return Err(Error::InvalidArgument(format!("radius_eps must be positive, got {radius_eps}")));
    }
    let cells = (0..nx * ny)
        .into_par_iter()
        .map(|idx| classify_orbit(params, cell_center(window, nx, ny, idx % nx, idx / nx), max_iter, radius_eps).tag)
        .collect();
    Ok(ClassificationGrid { window, nx, ny, cells })
}

pub fn gray_level(tag: OrbitTag) -> u8 {
    match tag {
        OrbitTag::AttractedToLogC => 220,
        OrbitTag::BakerEscape => 160,
        OrbitTag::EscapePlusInfinity => 90,
        OrbitTag::Unresolved => 0,
    }
}

/// Binary PGM (`P5`, maxval 255) bytes of the grid.
pub fn pgm_bytes(grid: &ClassificationGrid) -> Result<Vec<u8>> {
    grid.validate()?;
    let mut out = format!("P5\n{} {}\n255\n", grid.nx, grid.ny).into_bytes();
    out.extend(grid.cells.iter().map(|t| gray_level(*t)));
    Ok(out)
}

pub fn render_grid(grid: &ClassificationGrid, path: &Path) -> Result<()> {
    let bytes = pgm_bytes(grid)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

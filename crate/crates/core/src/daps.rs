//! Delay-angle power spectrum grids.

use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::MpcRecord;

/// Power summed on a regular delay × azimuth grid, in linear units (mW
/// relative to the dB reference of the input).
#[derive(Debug, Clone, PartialEq)]
pub struct DapsGrid {
    pub delay_min_s: f64,
    pub delay_max_s: f64,
    pub delay_bins: usize,
    pub angle_bins: usize,
    /// Row-major, `delay_bins` rows of `angle_bins` cells.
    pub power_lin: Vec<f64>,
}

impl DapsGrid {
    pub fn cell(&self, delay_bin: usize, angle_bin: usize) -> f64 {
        self.power_lin[delay_bin * self.angle_bins + angle_bin]
    }

    pub fn nonzero_cells(&self) -> usize {
        self.power_lin.iter().filter(|&&p| p > 0.0).count()
    }

    fn delay_width(&self) -> f64 {
        (self.delay_max_s - self.delay_min_s) / self.delay_bins as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay_bin,angle_bin,delay_lo_s,delay_hi_s,angle_lo_deg,angle_hi_deg,power_lin\n");
        let dw = self.delay_width();
        let aw = 360.0 / self.angle_bins as f64;
        for i in 0..self.delay_bins {
            for j in 0..self.angle_bins {
                out.push_str(&format!(
                    "{i},{j},{},{},{},{},{}\n",
                    self.delay_min_s + dw * i as f64,
                    self.delay_min_s + dw * (i + 1) as f64,
                    aw * j as f64,
                    aw * (j + 1) as f64,
                    self.cell(i, j)
                ));
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Bins MPC power over `[min delay, max delay]` × `[0, 2π)`. The maximum
/// delay falls in the last delay bin.
pub fn daps_grid(mpcs: &[MpcRecord], delay_bins: usize, angle_bins: usize) -> Result<DapsGrid> {
    if delay_bins == 0 || angle_bins == 0 {
        return Err(Error::invalid("DAPS grid", "bin counts must be positive"));
    }
    if mpcs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let delay_min_s = mpcs.iter().map(|m| m.delay_s).fold(f64::INFINITY, f64::min);
    let mut delay_max_s = mpcs.iter().map(|m| m.delay_s).fold(f64::NEG_INFINITY, f64::max);
    if delay_max_s <= delay_min_s {
        // a single distinct delay still needs a nonzero span
        delay_max_s = delay_min_s * (1.0 + 1e-9) + f64::MIN_POSITIVE;
    }
    let mut grid = DapsGrid {
        delay_min_s,
        delay_max_s,
        delay_bins,
        angle_bins,
        power_lin: vec![0.0; delay_bins * angle_bins],
    };
    let dw = grid.delay_width();
    for m in mpcs {
        let i = (((m.delay_s - delay_min_s) / dw) as usize).min(delay_bins - 1);
        let j = ((m.aoa_rad / TAU * angle_bins as f64) as usize).min(angle_bins - 1);
        grid.power_lin[i * angle_bins + j] += 10f64.powf(m.power_db / 10.0);
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_mpcs_two_cells() {
        let mpcs = vec![
            MpcRecord::new(-90.0, 50e-9, 0.5).unwrap(),
            MpcRecord::new(-95.0, 80e-9, 3.0).unwrap(),
        ];
        let g = daps_grid(&mpcs, 10, 10).unwrap();
        assert_eq!(g.nonzero_cells(), 2);
        assert!(g.cell(0, 0) > 0.0);
        assert!(g.cell(9, 4) > 0.0);
        let csv = g.to_csv();
        assert_eq!(csv.lines().count(), 101);
    }

    #[test]
    fn coincident_mpcs_accumulate() {
        let m = MpcRecord::new(-90.0, 50e-9, 0.5).unwrap();
        let g = daps_grid(&[m, m], 4, 4).unwrap();
        assert_eq!(g.nonzero_cells(), 1);
        assert!((g.cell(0, 0) - 2e-9).abs() < 1e-20);
    }

    #[test]
    fn rejects_empty() {
        assert!(daps_grid(&[], 4, 4).is_err());
        let m = MpcRecord::new(-90.0, 50e-9, 0.5).unwrap();
        assert!(daps_grid(&[m], 0, 4).is_err());
    }
}

//! Width of the two-type investigation region `{v_L : support > 1}` as the
//! cost level varies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::saddle::SaddleConfig;

use super::twotype::{twotype_config, twotype_solve, TwoTypeParams};

/// Default scan step as a fraction of `v_H`.
pub const DEFAULT_RESOLUTION: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionWidth {
    pub gamma: f64,
    pub alpha: f64,
    /// Scan step in `v_L`.
    pub step: f64,
    /// Investigating cells times the step.
    pub width: f64,
    /// Part of the width with `v_L < π_H v_H`.
    pub below_width: f64,
    /// Part of the width with `v_L > π_H v_H`.
    pub above_width: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// Maximal runs of investigating cells.
    pub runs: usize,
    pub max_support: usize,
    /// Every investigating cell has `0 < q* < 1`.
    pub q_interior: bool,
    pub cells: usize,
    pub infeasible_cells: usize,
}

impl RegionWidth {
    pub fn contiguous(&self) -> bool {
        self.runs <= 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionStudy {
    pub pi_h: f64,
    pub v_h: f64,
    pub alpha: f64,
    pub widths: Vec<RegionWidth>,
    /// Log-log slope of the width over the three largest `γ`.
    pub slope: Option<f64>,
    /// Same for the part below the diagonal.
    pub below_slope: Option<f64>,
}

impl RegionStudy {
    pub fn contiguous(&self) -> bool {
        self.widths.iter().all(RegionWidth::contiguous)
    }
}

/// Least-squares slope of `ln y` on `ln x`; `None` with fewer than two points or a
/// nonpositive value.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Scans `v_L = k · resolution · v_H` for one `(γ, α)`.
pub fn scan_region(
    pi_h: f64,
    v_h: f64,
    gamma: f64,
    alpha: f64,
    resolution: f64,
    cfg: &SaddleConfig,
) -> Result<RegionWidth> {
    if !(resolution > 0.0 && resolution < 0.5) {
        return invalid(format!("resolution must lie in (0, 0.5), got {resolution}"));
    }
    let cells = (1.0 / resolution).round() as usize - 1;
    let step = v_h * resolution;
    let base = TwoTypeParams {
        alpha,
        ..TwoTypeParams::new(0.5 * v_h, v_h, pi_h, gamma)
    };
    base.validate()?;
    let solved = (1..=cells)
        .into_par_iter()
        .map(|k| {
            twotype_solve(
                &TwoTypeParams {
                    v_l: k as f64 * step,
                    ..base
                },
                cfg,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let inside: Vec<bool> = solved.iter().map(|c| c.support > 1).collect();
    let runs = inside.windows(2).filter(|w| w[1] && !w[0]).count() + usize::from(inside[0]);
    let diagonal = pi_h * v_h;
    let mut r = RegionWidth {
        gamma,
        alpha,
        step,
        width: 0.0,
        below_width: 0.0,
        above_width: 0.0,
        lo: None,
        hi: None,
        runs,
        max_support: solved.iter().map(|c| c.support).max().unwrap_or(1),
        q_interior: true,
        cells,
        infeasible_cells: solved.iter().filter(|c| !c.feasible).count(),
    };
    for c in solved.iter().filter(|c| c.support > 1) {
        let v = c.params.v_l;
        r.width += step;
        if v < diagonal {
            r.below_width += step;
        } else {
            r.above_width += step;
        }
        r.lo = Some(r.lo.map_or(v, |lo: f64| lo.min(v)));
        r.hi = Some(r.hi.map_or(v, |hi: f64| hi.max(v)));
        r.q_interior &= c.q_star > 0.0 && c.q_star < 1.0;
    }
    Ok(r)
}

fn top_three_slope(widths: &[RegionWidth], f: impl Fn(&RegionWidth) -> f64) -> Option<f64> {
    let tail = &widths[widths.len().saturating_sub(3)..];
    let g: Vec<f64> = tail.iter().map(|w| w.gamma).collect();
    let y: Vec<f64> = tail.iter().map(f).collect();
    log_log_slope(&g, &y)
}

/// Region width for each `γ` of an increasing list, with the log-log slope over
/// the three largest values.
pub fn region_width(pi_h: f64, v_h: f64, gamma_list: &[f64], alpha: f64, resolution: f64) -> Result<RegionStudy> {
    if gamma_list.is_empty() {
        return invalid("gamma_list: need at least one value");
    }
    if gamma_list.iter().any(|&g| !(g > 0.0 && g.is_finite())) || gamma_list.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("gamma_list: values must be positive and increasing");
    }
    let cfg = twotype_config();
    let widths = gamma_list
        .iter()
        .map(|&g| scan_region(pi_h, v_h, g, alpha, resolution, &cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionStudy {
        pi_h,
        v_h,
        alpha,
        slope: top_three_slope(&widths, |w| w.width),
        below_slope: top_three_slope(&widths, |w| w.below_width),
        widths,
    })
}

/// Region at one `γ` for each cost multiplier `α`.
pub fn cost_scaling(pi_h: f64, v_h: f64, gamma: f64, alphas: &[f64], resolution: f64) -> Result<Vec<RegionWidth>> {
    let cfg = twotype_config();
    alphas
        .iter()
        .map(|&a| scan_region(pi_h, v_h, gamma, a, resolution, &cfg))
        .collect()
}

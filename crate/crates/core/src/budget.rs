//! Minimum photon budgets for resolving a target frequency at a given SNR,
//! and the inverse: the finest resolution a budget affords.
//!
//! Budgets are photons per Airy-disk area π(0.61λ/NA)². The maximum over
//! frequencies below the target is taken along the +k_x axis profile.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{FddError, Result};
use crate::field::GridSpec;
use crate::optics::{axis_autocorrelation, make_circular_pupil, partition_fdd, OpticsSpec, Otf, PupilPartition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetParams {
    /// Coefficient of variation of the sample.
    pub roughness: f64,
    /// Required SNR.
    pub gamma: f64,
    pub alphas: Vec<f64>,
    /// Candidate k_a/k_c values.
    pub inner_ratios: Vec<f64>,
}

impl Default for BudgetParams {
    fn default() -> Self {
        Self {
            roughness: 0.4,
            gamma: 3.0,
            alphas: (0..=20).map(|i| i as f64 * 0.05).collect(),
            inner_ratios: (6..=19).map(|i| i as f64 * 0.05).collect(),
        }
    }
}

impl BudgetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.roughness > 0.0 && self.gamma > 0.0) {
            return Err(FddError::InvalidParameter("roughness and gamma must be positive".into()));
        }
        if self.alphas.is_empty() || self.inner_ratios.is_empty() {
            return Err(FddError::InvalidParameter("alpha and k_a grids must be nonempty".into()));
        }
        if self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(FddError::InvalidParameter("alpha grid must lie in [0, 1]".into()));
        }
        if self.inner_ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(FddError::InvalidParameter("k_a/k_c grid must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// 8·0.61²π²γ²/R², the budget at k → 0.
    pub fn constant(&self) -> f64 {
        8.0 * 0.61f64.powi(2) * PI * PI * self.gamma.powi(2) / self.roughness.powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Di,
    Fdd,
}

/// Running maximum of the per-bin cost 1/Σ β²/β(0).
fn prefix_max_cost(info: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut worst: f64 = 0.0;
    info.map(|i| {
        let cost = if i > 0.0 { 1.0 / i } else { f64::INFINITY };
        worst = worst.max(cost);
        worst
    })
    .collect()
}

/// Axis bins j with j·dk < k, as the index of the last one.
fn last_bin_below(k: f64, dk: f64) -> usize {
    let j = (k / dk).ceil() as i64 - 1;
    j.max(0) as usize
}

/// Budget for direct imaging from an OTF's axis profile.
pub fn n_min_di(k: f64, params: &BudgetParams, otf_di: &Otf, cutoff: f64) -> Result<f64> {
    params.validate()?;
    if k >= cutoff {
        log::warn!("k/k_c = {:.4}: cutoff unreachable at any budget", k / cutoff);
        return Ok(f64::INFINITY);
    }
    let profile = otf_di.axis_profile();
    let dc = otf_di.dc();
    let costs = prefix_max_cost(profile.iter().map(|b| b * b / dc));
    let j = last_bin_below(k, otf_di.grid.dkx()).min(costs.len() - 1);
    Ok(params.constant() * costs[j])
}

/// One (α, k_a) candidate with its running-max cost along the axis.
#[derive(Debug, Clone)]
struct Cell {
    alpha: f64,
    inner_ratio: f64,
    costs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPoint {
    pub k: f64,
    pub resolution_nm: f64,
    pub n_di: f64,
    pub n_fdd: f64,
    pub alpha: f64,
    pub inner_ratio: f64,
}

impl BudgetPoint {
    pub fn ratio(&self) -> f64 {
        self.n_di / self.n_fdd
    }
}

/// Precomputed axis costs for DI and every (α, k_a) cell.
#[derive(Debug, Clone)]
pub struct BudgetModel {
    pub params: BudgetParams,
    pub optics: OpticsSpec,
    pub grid: GridSpec,
    pub cutoff: f64,
    di_costs: Vec<f64>,
    cells: Vec<Cell>,
}

impl BudgetModel {
    pub fn new(optics: &OpticsSpec, grid: &GridSpec, params: &BudgetParams) -> Result<Self> {
        params.validate()?;
        let pupil = make_circular_pupil(optics, grid)?;
        let canvas = PupilPartition::minimum_canvas(&pupil)?;
        let full = axis_autocorrelation(&pupil);
        let di_costs = prefix_max_cost(full.iter().map(|b| b * b));
        let mut by_ratio = Vec::with_capacity(params.inner_ratios.len());
        for &ratio in &params.inner_ratios {
            let part = partition_fdd(&pupil, ratio, &canvas)?;
            let regions: Vec<(Vec<f64>, f64)> = part
                .regions
                .iter()
                .map(|r| {
                    let axis = axis_autocorrelation(&r.mask);
                    let dc = axis[0];
                    (axis, dc)
                })
                .collect();
            by_ratio.push(regions);
        }
        let mut cells = Vec::with_capacity(params.alphas.len() * params.inner_ratios.len());
        for &alpha in &params.alphas {
            for (ri, &inner_ratio) in params.inner_ratios.iter().enumerate() {
                let regions = &by_ratio[ri];
                let info = (0..full.len()).map(|j| {
                    let mut s = (1.0 - alpha) * full[j] * full[j];
                    for (axis, dc) in regions {
                        if *dc > 0.0 {
                            s += alpha * axis[j] * axis[j] / dc;
                        }
                    }
                    s
                });
                cells.push(Cell { alpha, inner_ratio, costs: prefix_max_cost(info) });
            }
        }
        Ok(Self { params: params.clone(), optics: *optics, grid: *grid, cutoff: optics.cutoff(), di_costs, cells })
    }

    fn dk(&self) -> f64 {
        self.grid.dkx()
    }

    fn check_k(&self, k: f64) -> Result<Option<usize>> {
        if !(k > 0.0) {
            return Err(FddError::InvalidParameter(format!("target frequency must be positive, got {k}")));
        }
        if k >= self.cutoff {
            log::warn!("k/k_c = {:.4}: cutoff unreachable at any budget", k / self.cutoff);
            return Ok(None);
        }
        Ok(Some(last_bin_below(k, self.dk()).min(self.di_costs.len() - 1)))
    }

    pub fn n_min_di(&self, k: f64) -> Result<f64> {
        Ok(match self.check_k(k)? {
            Some(j) => self.params.constant() * self.di_costs[j],
            None => f64::INFINITY,
        })
    }

    /// Optimized FDD budget with the achieving (α, k_a/k_c). Ties go to the
    /// smaller α, then the smaller k_a.
    pub fn n_min_fdd(&self, k: f64) -> Result<(f64, f64, f64)> {
        let Some(j) = self.check_k(k)? else {
            return Ok((f64::INFINITY, f64::NAN, f64::NAN));
        };
        let (cell, cost) = self.best_cell(j);
        Ok((self.params.constant() * cost, cell.alpha, cell.inner_ratio))
    }

    fn best_cell(&self, j: usize) -> (&Cell, f64) {
        let mut best = &self.cells[0];
        for c in &self.cells[1..] {
            if c.costs[j] < best.costs[j] {
                best = c;
            }
        }
        (best, best.costs[j])
    }

    pub fn point(&self, k: f64) -> Result<BudgetPoint> {
        let n_di = self.n_min_di(k)?;
        let (n_fdd, alpha, inner_ratio) = self.n_min_fdd(k)?;
        Ok(BudgetPoint { k, resolution_nm: 2.0 * PI / k, n_di, n_fdd, alpha, inner_ratio })
    }

    /// Budget curve over every axis bin below the cutoff.
    pub fn curve(&self) -> Result<Vec<BudgetPoint>> {
        let dk = self.dk();
        (1..)
            .map(|j| j as f64 * dk)
            .take_while(|&k| k < self.cutoff)
            .map(|k| self.point(k))
            .collect()
    }

    fn costs(&self, method: Method, j: usize) -> f64 {
        match method {
            Method::Di => self.di_costs[j],
            Method::Fdd => self.best_cell(j).1,
        }
    }

    /// Highest frequency affordable with `n` photons per Airy disk.
    pub fn frequency_for_budget(&self, n: f64, method: Method) -> Result<f64> {
        let floor = self.params.constant();
        if !(n >= floor) {
            return Err(FddError::BelowBudgetFloor { budget: n, floor });
        }
        // costs are nondecreasing in j; find the last affordable bin
        let affordable = |j: usize| floor * self.costs(method, j) <= n;
        let (mut lo, mut hi) = (0usize, self.di_costs.len());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if affordable(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(((lo + 1) as f64 * self.dk()).min(self.cutoff))
    }

    /// Finest resolvable period 2π/k for a budget.
    pub fn resolution_for_budget(&self, n: f64, method: Method) -> Result<f64> {
        Ok(2.0 * PI / self.frequency_for_budget(n, method)?)
    }

    /// DI/FDD resolution ratio over a logarithmic budget sweep from the
    /// floor to `decades` decades above it.
    pub fn resolution_sweep(&self, points: usize, decades: f64) -> Result<Vec<ResolutionPoint>> {
        let floor = self.params.constant();
        (0..points)
            .map(|i| {
                let n = floor * 10f64.powf(decades * i as f64 / (points.max(2) - 1) as f64);
                Ok(ResolutionPoint {
                    photons: n,
                    resolution_di_nm: self.resolution_for_budget(n, Method::Di)?,
                    resolution_fdd_nm: self.resolution_for_budget(n, Method::Fdd)?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPoint {
    pub photons: f64,
    pub resolution_di_nm: f64,
    pub resolution_fdd_nm: f64,
}

impl ResolutionPoint {
    pub fn ratio(&self) -> f64 {
        self.resolution_di_nm / self.resolution_fdd_nm
    }
}

pub fn budget_csv(points: &[BudgetPoint]) -> String {
    let mut s = String::from("resolution_nm,k_rad_per_nm,n_min_DI,n_min_FDD,ratio,alpha,ka_over_kc\n");
    for p in points {
        let _ = writeln!(
            s,
            "{:.6},{:e},{:e},{:e},{:e},{},{}",
            p.resolution_nm,
            p.k,
            p.n_di,
            p.n_fdd,
            p.ratio(),
            p.alpha,
            p.inner_ratio
        );
    }
    s
}

pub fn resolution_csv(points: &[ResolutionPoint]) -> String {
    let mut s = String::from("photons_per_airy_disk,resolution_DI_nm,resolution_FDD_nm,ratio\n");
    for p in points {
        let _ = writeln!(s, "{:e},{:.6},{:.6},{:.6}", p.photons, p.resolution_di_nm, p.resolution_fdd_nm, p.ratio());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::compute_otf;

    fn model(n: usize, params: BudgetParams) -> BudgetModel {
        let o = OpticsSpec::new(540.0, 1.4).unwrap();
        let g = o.default_grid(n).unwrap();
        BudgetModel::new(&o, &g, &params).unwrap()
    }

    fn coarse() -> BudgetParams {
        BudgetParams {
            alphas: vec![0.0, 0.3, 0.6, 0.9],
            inner_ratios: vec![0.5, 0.7],
            ..Default::default()
        }
    }

    #[test]
    fn constant_value() {
        let c = BudgetParams::default().constant();
        assert!((c - 1652.6).abs() < 0.5, "{c}");
    }

    #[test]
    fn small_k_gives_constant_and_curves_monotone() {
        let m = model(256, coarse());
        let c = m.params.constant();
        assert!((m.n_min_di(1e-9).unwrap() - c).abs() < 1e-9);
        let curve = m.curve().unwrap();
        for w in curve.windows(2) {
            assert!(w[1].n_di >= w[0].n_di);
            assert!(w[1].n_fdd >= w[0].n_fdd);
        }
        for p in &curve {
            assert!(p.n_fdd <= p.n_di);
        }
        assert_eq!(m.n_min_di(m.cutoff).unwrap(), f64::INFINITY);
        assert!(m.n_min_fdd(1.01 * m.cutoff).unwrap().0.is_infinite());
    }

    #[test]
    fn free_function_matches_model() {
        let o = OpticsSpec::new(540.0, 1.4).unwrap();
        let g = o.default_grid(256).unwrap();
        let m = BudgetModel::new(&o, &g, &coarse()).unwrap();
        let otf = compute_otf(&make_circular_pupil(&o, &g).unwrap()).unwrap();
        for r in [0.2, 0.5, 0.82, 0.95] {
            let k = r * m.cutoff;
            assert_eq!(n_min_di(k, &coarse(), &otf, m.cutoff).unwrap(), m.n_min_di(k).unwrap());
        }
    }

    #[test]
    fn alpha_zero_reduces_to_di() {
        let m = model(256, BudgetParams { alphas: vec![0.0], inner_ratios: vec![0.5, 0.7], ..Default::default() });
        for p in m.curve().unwrap() {
            assert_eq!(p.n_fdd, p.n_di);
            assert_eq!(p.alpha, 0.0);
            assert_eq!(p.inner_ratio, 0.5);
        }
    }

    #[test]
    fn round_trip_within_one_bin() {
        let m = model(256, coarse());
        let dk = m.grid.dkx();
        for r in [0.3, 0.6, 0.82, 0.9] {
            let k = r * m.cutoff;
            for method in [Method::Di, Method::Fdd] {
                let n = match method {
                    Method::Di => m.n_min_di(k).unwrap(),
                    Method::Fdd => m.n_min_fdd(k).unwrap().0,
                };
                let back = m.frequency_for_budget(n, method).unwrap();
                assert!(back >= k - 1e-12 && back <= k + dk + 1e-12, "{r} {method:?}");
            }
        }
    }

    #[test]
    fn floor_and_infinite_budget() {
        let m = model(128, coarse());
        let c = m.params.constant();
        assert!(matches!(m.resolution_for_budget(0.5 * c, Method::Di), Err(FddError::BelowBudgetFloor { .. })));
        let k = m.frequency_for_budget(1e300, Method::Fdd).unwrap();
        assert!(k <= m.cutoff && k > m.cutoff - m.grid.dkx(), "{k}");
        let limit = 0.5 * 540.0 / 1.4;
        assert!((2.0 * PI / m.cutoff - limit).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_params() {
        let o = OpticsSpec::new(540.0, 1.4).unwrap();
        let g = o.default_grid(64).unwrap();
        for p in [
            BudgetParams { alphas: vec![], ..Default::default() },
            BudgetParams { inner_ratios: vec![1.0], ..Default::default() },
            BudgetParams { roughness: 0.0, ..Default::default() },
            BudgetParams { alphas: vec![1.5], ..Default::default() },
        ] {
            assert!(BudgetModel::new(&o, &g, &p).is_err());
        }
    }

    #[test]
    fn deterministic_surface() {
        let a = model(128, coarse()).curve().unwrap();
        let b = model(128, coarse()).curve().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_export() {
        let m = model(64, coarse());
        let curve = m.curve().unwrap();
        let csv = budget_csv(&curve);
        assert_eq!(csv.lines().count(), curve.len() + 1);
        let sweep = m.resolution_sweep(5, 3.0).unwrap();
        assert_eq!(resolution_csv(&sweep).lines().count(), 6);
    }
}

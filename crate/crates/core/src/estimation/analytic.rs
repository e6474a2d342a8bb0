//! Diagonal Fisher information of the Fourier coefficients in the weak-source
//! limit, per detected photon.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{FddError, Result};
use crate::optics::{Otf, RegionOtfs};
use crate::sample::Quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherEntry {
    pub k: [f64; 2],
    pub quadrature: Quadrature,
    pub value: f64,
}

/// Diagonal of a Fisher matrix over {a_k} ∪ {b_k}; entries come in cos/sin
/// pairs in the order of the requested k list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherDiagonal {
    pub a0: f64,
    pub entries: Vec<FisherEntry>,
}

impl FisherDiagonal {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    fn same_layout(&self, other: &Self) -> Result<()> {
        let same = self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.k == b.k && a.quadrature == b.quadrature);
        if !same {
            return Err(FddError::GridMismatch("Fisher diagonals over different parameter lists".into()));
        }
        Ok(())
    }
}

fn check_a0(a0: f64) -> Result<()> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(FddError::InvalidParameter(format!("a0 must be positive, got {a0}")));
    }
    Ok(())
}

fn build(otf: &Otf, a0: f64, ks: &[[f64; 2]], value: impl Fn(f64) -> f64) -> Result<FisherDiagonal> {
    check_a0(a0)?;
    let mut entries = Vec::with_capacity(2 * ks.len());
    for &k in ks {
        let (bx, by) = otf.grid.lattice_bin(k)?;
        let beta = otf.at(bx, by);
        if beta == 0.0 && (bx, by) != (0, 0) {
            log::debug!("OTF vanishes at k = ({:.4}, {:.4}) rad/nm; information is zero", k[0], k[1]);
        }
        let v = value(beta);
        entries.push(FisherEntry { k, quadrature: Quadrature::Cos, value: v });
        entries.push(FisherEntry { k, quadrature: Quadrature::Sin, value: v });
    }
    Ok(FisherDiagonal { a0, entries })
}

/// QFI ≈ β^DI(k)/(2a0²).
pub fn qfi_analytic(otf_di: &Otf, a0: f64, ks: &[[f64; 2]]) -> Result<FisherDiagonal> {
    build(otf_di, a0, ks, |b| b / (2.0 * a0 * a0))
}

/// FI of direct imaging ≈ β^DI(k)²/(2a0²β^DI(0)).
pub fn fi_di_analytic(otf_di: &Otf, a0: f64, ks: &[[f64; 2]]) -> Result<FisherDiagonal> {
    fi_pupil_analytic(otf_di, a0, ks)
}

/// FI of one pupil region ≈ β_l(k)²/(2a0²β_l(0)).
pub fn fi_pupil_analytic(otf: &Otf, a0: f64, ks: &[[f64; 2]]) -> Result<FisherDiagonal> {
    let dc = otf.dc();
    if dc <= 0.0 {
        return Err(FddError::EmptyMask);
    }
    build(otf, a0, ks, |b| b * b / (2.0 * a0 * a0 * dc))
}

/// Sum of the per-region FIs.
pub fn fi_fdd_raw(per_pupil: &[FisherDiagonal]) -> Result<FisherDiagonal> {
    let first = per_pupil
        .first()
        .ok_or_else(|| FddError::InvalidParameter("no pupil regions".into()))?;
    let mut out = first.clone();
    for d in &per_pupil[1..] {
        out.same_layout(d)?;
        for (o, e) in out.entries.iter_mut().zip(&d.entries) {
            o.value += e.value;
        }
    }
    Ok(out)
}

/// α·FI_raw + (1-α)·FI^DI.
pub fn fi_hybrid(raw: &FisherDiagonal, di: &FisherDiagonal, alpha: f64) -> Result<FisherDiagonal> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FddError::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    raw.same_layout(di)?;
    let mut out = raw.clone();
    for (o, d) in out.entries.iter_mut().zip(&di.entries) {
        o.value = alpha * o.value + (1.0 - alpha) * d.value;
    }
    Ok(out)
}

/// Variance bound 1/(N·FI) per entry; infinite where the information vanishes.
pub fn crb(fi: &FisherDiagonal, photons: f64) -> Vec<f64> {
    fi.entries
        .iter()
        .map(|e| if e.value > 0.0 { 1.0 / (photons * e.value) } else { f64::INFINITY })
        .collect()
}

/// Per-k comparison of all analytic quantities for one partition and split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherRow {
    pub k: [f64; 2],
    pub quadrature: Quadrature,
    pub qfi: f64,
    pub fi_di: f64,
    pub fi_fdd_raw: f64,
    pub fi_hybrid: f64,
}

impl FisherRow {
    /// Cramér-Rao bounds per photon (QCRB, DI, raw FDD, hybrid FDD).
    pub fn crbs(&self) -> [f64; 4] {
        let inv = |v: f64| if v > 0.0 { 1.0 / v } else { f64::INFINITY };
        [inv(self.qfi), inv(self.fi_di), inv(self.fi_fdd_raw), inv(self.fi_hybrid)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherTable {
    pub a0: f64,
    pub alpha: f64,
    pub inner_ratio: f64,
    pub rows: Vec<FisherRow>,
}

/// Evaluate QFI, FI^DI, raw and hybrid FI at each k.
pub fn fisher_table(otfs: &RegionOtfs, alpha: f64, a0: f64, ks: &[[f64; 2]]) -> Result<FisherTable> {
    let qfi = qfi_analytic(&otfs.full, a0, ks)?;
    let di = fi_di_analytic(&otfs.full, a0, ks)?;
    let per_pupil = otfs
        .regions
        .iter()
        .map(|r| fi_pupil_analytic(r, a0, ks))
        .collect::<Result<Vec<_>>>()?;
    let raw = fi_fdd_raw(&per_pupil)?;
    let hybrid = fi_hybrid(&raw, &di, alpha)?;
    let rows = qfi
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| FisherRow {
            k: e.k,
            quadrature: e.quadrature,
            qfi: e.value,
            fi_di: di.entries[i].value,
            fi_fdd_raw: raw.entries[i].value,
            fi_hybrid: hybrid.entries[i].value,
        })
        .collect();
    Ok(FisherTable { a0, alpha, inner_ratio: otfs.inner_ratio, rows })
}

impl FisherTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "kx,ky,mode,QFI,FI_DI,FI_FDD_raw,FI_hybrid,QCRB,CRB_DI,CRB_FDD_raw,CRB_hybrid,CRB_ratio_DI_over_hybrid\n",
        );
        for r in &self.rows {
            let c = r.crbs();
            let ratio = if c[3].is_finite() { c[1] / c[3] } else { f64::NAN };
            let _ = writeln!(
                s,
                "{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.k[0], r.k[1], r.quadrature, r.qfi, r.fi_di, r.fi_fdd_raw, r.fi_hybrid, c[0], c[1], c[2], c[3], ratio
            );
        }
        s
    }
}

/// Bins j·dk along +k_x for j = 0..nx/2, i.e. the lattice points of the axis
/// cross-section.
pub fn axis_wavevectors(otf: &Otf) -> Vec<[f64; 2]> {
    (0..otf.grid.nx as i64 / 2).map(|j| [j as f64 * otf.grid.dkx(), 0.0]).collect()
}

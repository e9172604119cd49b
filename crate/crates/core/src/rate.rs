//! Decision variables and SINR / rate arithmetic.
//!
//! Two power representations appear: the per-link tensor `p(u,b,k)` (power
//! user `u` aims at BS `b` on band `k`) and the per-user-band aggregate
//! `P(u,k) = Σ_b p(u,b,k)`. Link SINRs on the tensor count every other
//! `(user, BS)` pair on the band as interference, including the same user's
//! power aimed at other BSs.

use serde::{Deserialize, Serialize};

use crate::scenario::ChannelRealization;
use crate::tensor::{Matrix, Tensor3};
use crate::virtual_cells::{VirtualCell, VirtualCellPartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Interference from every user in the network.
    Global,
    /// Interference from users of the same virtual cell only.
    Local,
}

impl EvalMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalMode::Global => "global",
            EvalMode::Local => "local",
        }
    }
}

/// Transmit powers `p(u,b,k)` in mW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMatrix {
    pub p: Tensor3<f64>,
}

impl PowerMatrix {
    pub fn zeros(dims: [usize; 3]) -> Self {
        PowerMatrix {
            p: Tensor3::filled(dims, 0.0),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.p.dims()
    }

    /// `P(u,k) = Σ_b p(u,b,k)`.
    pub fn per_user_band(&self) -> Matrix {
        let [nu, nb, nk] = self.p.dims();
        Matrix::from_fn(nu, nk, |u, k| (0..nb).map(|b| self.p.at(u, b, k)).sum())
    }

    pub fn user_total(&self, u: usize) -> f64 {
        let [_, nb, nk] = self.p.dims();
        (0..nb)
            .flat_map(|b| (0..nk).map(move |k| (b, k)))
            .map(|(b, k)| self.p.at(u, b, k))
            .sum()
    }

    /// Largest relative budget excess over users, `max_u (Σ p − P̄_u) / P̄_u`.
    pub fn budget_excess(&self, budgets: &[f64]) -> f64 {
        budgets
            .iter()
            .enumerate()
            .map(|(u, &b)| (self.user_total(u) - b) / b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Binary link indicators `γ(u,b,k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelAssignment {
    pub gamma: Tensor3<bool>,
}

impl ChannelAssignment {
    pub fn empty(dims: [usize; 3]) -> Self {
        ChannelAssignment {
            gamma: Tensor3::filled(dims, false),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.gamma.dims()
    }

    #[inline]
    pub fn is_set(&self, u: usize, b: usize, k: usize) -> bool {
        self.gamma.at(u, b, k)
    }

    /// Each user uses at most one BS per band.
    pub fn is_feasible(&self) -> bool {
        let [nu, nb, nk] = self.dims();
        (0..nu).all(|u| (0..nk).all(|k| (0..nb).filter(|&b| self.is_set(u, b, k)).count() <= 1))
    }

    pub fn count(&self) -> usize {
        self.gamma.as_slice().iter().filter(|&&g| g).count()
    }
}

/// Channel data of one virtual cell in local indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellView {
    /// Local user index -> global user index.
    pub users: Vec<usize>,
    /// Local BS index -> global BS index.
    pub bs: Vec<usize>,
    /// `|h(u,b,k)|²` restricted to the cell.
    pub gain: Tensor3<f64>,
    /// Noise `(b,k)` in mW, restricted to the cell's BSs.
    pub noise: Matrix,
    /// `W_k` in Hz.
    pub band_widths: Vec<f64>,
    /// Per local user budget, mW.
    pub budgets: Vec<f64>,
}

impl CellView {
    pub fn new(
        cell: &VirtualCell,
        chan: &ChannelRealization,
        band_widths: &[f64],
        budgets: &[f64],
    ) -> Self {
        let nk = chan.num_bands();
        let gain = Tensor3::from_fn([cell.users.len(), cell.bs.len(), nk], |u, b, k| {
            chan.gain.at(cell.users[u], cell.bs[b], k)
        });
        let noise = Matrix::from_fn(cell.bs.len(), nk, |b, k| chan.noise.at(cell.bs[b], k));
        CellView {
            users: cell.users.clone(),
            bs: cell.bs.clone(),
            gain,
            noise,
            band_widths: band_widths.to_vec(),
            budgets: cell.users.iter().map(|&u| budgets[u]).collect(),
        }
    }

    /// A view whose local and global indices coincide.
    pub fn from_parts(gain: Tensor3<f64>, noise: Matrix, band_widths: Vec<f64>, budgets: Vec<f64>) -> Self {
        let [nu, nb, _] = gain.dims();
        CellView {
            users: (0..nu).collect(),
            bs: (0..nb).collect(),
            gain,
            noise,
            band_widths,
            budgets,
        }
    }

    pub fn whole_network(chan: &ChannelRealization, band_widths: &[f64], budgets: &[f64]) -> Self {
        CellView::from_parts(chan.gain.clone(), chan.noise.clone(), band_widths.to_vec(), budgets.to_vec())
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_bs(&self) -> usize {
        self.bs.len()
    }

    pub fn num_bands(&self) -> usize {
        self.band_widths.len()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.num_users(), self.num_bs(), self.num_bands()]
    }
}

/// Fills `out[i] = Σ_{j≠i} values[j]` without subtracting, so the result is
/// exact up to summation rounding even when one term dominates.
pub(crate) fn leave_one_out(values: &[f64], out: &mut [f64]) {
    leave_one_out_rows(values, values.len(), 1, out, &mut [0.0]);
}

/// Row-wise version of [`leave_one_out`] on a row-major `rows × width` block:
/// `out[r][j] = Σ_{r'≠r} values[r'][j]`. `acc` needs `width` entries.
pub(crate) fn leave_one_out_rows(values: &[f64], rows: usize, width: usize, out: &mut [f64], acc: &mut [f64]) {
    debug_assert!(values.len() >= rows * width && out.len() >= rows * width && acc.len() >= width);
    let acc = &mut acc[..width];
    acc.fill(0.0);
    for r in 0..rows {
        let range = r * width..(r + 1) * width;
        for ((o, v), a) in out[range.clone()].iter_mut().zip(&values[range]).zip(acc.iter_mut()) {
            *o = *a;
            *a += *v;
        }
    }
    acc.fill(0.0);
    for r in (0..rows).rev() {
        let range = r * width..(r + 1) * width;
        for ((o, v), a) in out[range.clone()].iter_mut().zip(&values[range]).zip(acc.iter_mut()) {
            *o += *a;
            *a += *v;
        }
    }
}

/// Reusable buffers for [`link_interference_into`].
#[derive(Debug, Default)]
pub(crate) struct InterferenceScratch {
    other_bs: Vec<f64>,
    received: Vec<f64>,
    received_loo: Vec<f64>,
    per_user_band: Vec<f64>,
    acc: Vec<f64>,
}

pub(crate) fn link_interference_into(
    gain: &Tensor3<f64>,
    noise: &Matrix,
    p: &Tensor3<f64>,
    scratch: &mut InterferenceScratch,
    out: &mut Vec<f64>,
) {
    let [nu, nb, nk] = gain.dims();
    debug_assert_eq!(p.dims(), gain.dims());
    let n = nu * nb * nk;
    let block = nb * nk;
    let (g, pv) = (gain.as_slice(), p.as_slice());
    let s = scratch;
    s.other_bs.resize(n, 0.0);
    s.received.resize(n, 0.0);
    s.received_loo.resize(n, 0.0);
    s.per_user_band.resize(nu * nk, 0.0);
    s.acc.resize(block.max(nk), 0.0);
    out.resize(n, 0.0);

    for u in 0..nu {
        let r = u * block..(u + 1) * block;
        // Power of user u on band k aimed at BSs other than b.
        leave_one_out_rows(&pv[r.clone()], nb, nk, &mut s.other_bs[r.clone()], &mut s.acc);
        let puk = &mut s.per_user_band[u * nk..(u + 1) * nk];
        puk.fill(0.0);
        for pr in pv[r.clone()].chunks_exact(nk) {
            for (t, &x) in puk.iter_mut().zip(pr) {
                *t += x;
            }
        }
        for (rr, gr) in s.received[r.clone()].chunks_exact_mut(nk).zip(g[r].chunks_exact(nk)) {
            for ((x, &gv), &t) in rr.iter_mut().zip(gr).zip(puk.iter()) {
                *x = gv * t;
            }
        }
    }
    leave_one_out_rows(&s.received, nu, block, &mut s.received_loo, &mut s.acc);
    let nz = noise.as_slice();
    for ((((o, &loo), &gv), &ob), &nzv) in out
        .iter_mut()
        .zip(&s.received_loo)
        .zip(g)
        .zip(&s.other_bs)
        .zip(nz.iter().cycle())
    {
        *o = nzv + loo + gv * ob;
    }
}

/// Noise plus interference seen by every link:
/// `noise(b,k) + Σ_{(ũ,b̃)≠(u,b)} g(ũ,b,k)·p(ũ,b̃,k)`.
pub fn link_interference(gain: &Tensor3<f64>, noise: &Matrix, p: &Tensor3<f64>) -> Tensor3<f64> {
    let mut out = Vec::new();
    link_interference_into(gain, noise, p, &mut InterferenceScratch::default(), &mut out);
    Tensor3::from_vec(gain.dims(), out).expect("sized by link_interference_into")
}

/// Link SINRs of a power tensor.
pub fn sinr(view: &CellView, p: &PowerMatrix) -> Tensor3<f64> {
    sinr_raw(&view.gain, &view.noise, &p.p)
}

pub(crate) fn sinr_raw(gain: &Tensor3<f64>, noise: &Matrix, p: &Tensor3<f64>) -> Tensor3<f64> {
    let mut s = link_interference(gain, noise, p);
    let [nu, nb, nk] = gain.dims();
    for u in 0..nu {
        for b in 0..nb {
            for k in 0..nk {
                let i = s.at(u, b, k);
                s.set(u, b, k, gain.at(u, b, k) * p.at(u, b, k) / i);
            }
        }
    }
    s
}

/// `J(u,b,k) = Σ_{ũ≠u} g(ũ,b,k)·P(ũ,k)` over users of the cell.
pub fn intra_cell_interference(view: &CellView, p_by_user_band: &Matrix) -> Tensor3<f64> {
    let [nu, nb, nk] = view.dims();
    let mut out = Tensor3::filled([nu, nb, nk], 0.0);
    let mut received = vec![0.0; nu];
    let mut loo = vec![0.0; nu];
    for b in 0..nb {
        for k in 0..nk {
            for (u, r) in received.iter_mut().enumerate() {
                *r = view.gain.at(u, b, k) * p_by_user_band.at(u, k);
            }
            leave_one_out(&received, &mut loo);
            for u in 0..nu {
                out.set(u, b, k, loo[u]);
            }
        }
    }
    out
}

/// SINR of user `u` at BS `b` on band `k` when it sends its whole band power
/// `P(u,k)` to that BS: `g·P(u,k) / (noise + J(u,b,k))`.
pub fn user_band_sinr(view: &CellView, p_by_user_band: &Matrix) -> Tensor3<f64> {
    let j = intra_cell_interference(view, p_by_user_band);
    let [nu, nb, nk] = view.dims();
    Tensor3::from_fn([nu, nb, nk], |u, b, k| {
        view.gain.at(u, b, k) * p_by_user_band.at(u, k) / (view.noise.at(b, k) + j.at(u, b, k))
    })
}

#[inline]
pub fn shannon_rate(band_width: f64, sinr: f64) -> f64 {
    band_width * sinr.ln_1p() / std::f64::consts::LN_2
}

/// `Σ γ(u,b,k)·W_k·log2(1 + g·P(u,k)/(noise + J(u,b,k)))`, bits/s.
pub fn cell_sum_rate(view: &CellView, gamma: &ChannelAssignment, p_by_user_band: &Matrix) -> f64 {
    let s = user_band_sinr(view, p_by_user_band);
    let [nu, nb, nk] = view.dims();
    let mut total = 0.0;
    for u in 0..nu {
        for b in 0..nb {
            for k in 0..nk {
                if gamma.is_set(u, b, k) {
                    total += shannon_rate(view.band_widths[k], s.at(u, b, k));
                }
            }
        }
    }
    total
}

/// Sum of link rates `W_k·log2(1 + SINR(u,b,k))` of a power tensor, over
/// the links set in `mask`, or over every link when `mask` is `None`.
pub fn link_sum_rate(view: &CellView, p: &PowerMatrix, mask: Option<&ChannelAssignment>) -> f64 {
    masked_rate(&sinr(view, p), &view.band_widths, mask)
}

fn masked_rate(s: &Tensor3<f64>, band_widths: &[f64], mask: Option<&ChannelAssignment>) -> f64 {
    let [nu, nb, nk] = s.dims();
    let mut total = 0.0;
    for u in 0..nu {
        for b in 0..nb {
            for k in 0..nk {
                if mask.is_none_or(|m| m.is_set(u, b, k)) {
                    total += shannon_rate(band_widths[k], s.at(u, b, k));
                }
            }
        }
    }
    total
}

/// Outcome of a per-cell allocation: local power tensor and, for channel
/// allocation schemes, the served links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    pub power: PowerMatrix,
    pub gamma: Option<ChannelAssignment>,
}

/// Network sum rate of per-cell solutions (one per cell of `partition`, in
/// order). In global mode every transmission in the network interferes; in
/// local mode only transmissions within the same cell do.
pub fn system_sum_rate(
    partition: &VirtualCellPartition,
    chan: &ChannelRealization,
    band_widths: &[f64],
    solutions: &[CellSolution],
    mode: EvalMode,
) -> f64 {
    assert_eq!(partition.cells.len(), solutions.len());
    match mode {
        EvalMode::Local => partition
            .cells
            .iter()
            .zip(solutions)
            .map(|(cell, sol)| {
                let view = CellView::new(cell, chan, band_widths, &vec![1.0; chan.num_users()]);
                link_sum_rate(&view, &sol.power, sol.gamma.as_ref())
            })
            .sum(),
        EvalMode::Global => {
            let (nu, nb, nk) = (chan.num_users(), chan.num_bs(), chan.num_bands());
            let mut p = Tensor3::filled([nu, nb, nk], 0.0);
            let mut mask = ChannelAssignment::empty([nu, nb, nk]);
            for (cell, sol) in partition.cells.iter().zip(solutions) {
                for (lu, &u) in cell.users.iter().enumerate() {
                    for (lb, &b) in cell.bs.iter().enumerate() {
                        for k in 0..nk {
                            p.set(u, b, k, sol.power.p.at(lu, lb, k));
                            let served = sol.gamma.as_ref().is_none_or(|g| g.is_set(lu, lb, k));
                            mask.gamma.set(u, b, k, served);
                        }
                    }
                }
            }
            masked_rate(&sinr_raw(&chan.gain, &chan.noise, &p), band_widths, Some(&mask))
        }
    }
}

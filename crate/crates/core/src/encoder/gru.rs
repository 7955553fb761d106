use ndarray::{s, Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::params::flat;
use super::sigmoid;
use crate::{Error, Result};

/// GRU cell weights. Rows of `w`, `u` and `b` are stacked as update gate z,
/// reset gate r, candidate state, each `hidden` rows tall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruWeights {
    /// 3H × input
    pub w: Array2<f64>,
    /// 3H × H
    pub u: Array2<f64>,
    /// 3H
    pub b: Array1<f64>,
}

impl GruWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruWeights {
            w: Array2::zeros((3 * hidden, input)),
            u: Array2::zeros((3 * hidden, hidden)),
            b: Array1::zeros(3 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn input(&self) -> usize {
        self.w.ncols()
    }

    pub(crate) fn shape_matches(&self, other: &GruWeights) -> bool {
        self.w.dim() == other.w.dim() && self.u.dim() == other.u.dim() && self.b.dim() == other.b.dim()
    }

    pub(crate) fn push_blocks<'a>(&'a self, prefix: &'static str, out: &mut Vec<(&'static str, &'a [f64])>) {
        let names = block_names(prefix);
        out.push((names[0], flat(&self.w)));
        out.push((names[1], flat(&self.u)));
        out.push((names[2], flat(&self.b)));
    }

    pub(crate) fn push_blocks_mut<'a>(
        &'a mut self,
        prefix: &'static str,
        out: &mut Vec<(&'static str, &'a mut [f64])>,
    ) {
        let names = block_names(prefix);
        out.push((names[0], self.w.as_slice_mut().expect("contiguous")));
        out.push((names[1], self.u.as_slice_mut().expect("contiguous")));
        out.push((names[2], self.b.as_slice_mut().expect("contiguous")));
    }
}

fn block_names(prefix: &'static str) -> [&'static str; 3] {
    match prefix {
        "word_gru_fwd" => ["word_gru_fwd.w", "word_gru_fwd.u", "word_gru_fwd.b"],
        "word_gru_bwd" => ["word_gru_bwd.w", "word_gru_bwd.u", "word_gru_bwd.b"],
        "sent_gru_fwd" => ["sent_gru_fwd.w", "sent_gru_fwd.u", "sent_gru_fwd.b"],
        "sent_gru_bwd" => ["sent_gru_bwd.w", "sent_gru_bwd.u", "sent_gru_bwd.b"],
        _ => ["gru.w", "gru.u", "gru.b"],
    }
}

/// One GRU step:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
pub fn gru_cell_forward(x: &[f64], h_prev: &[f64], weights: &GruWeights) -> Result<Vec<f64>> {
    if x.len() != weights.input() || h_prev.len() != weights.hidden() {
        return Err(Error::Dimension(format!(
            "GRU cell expects input {} and hidden {}, got {} and {}",
            weights.input(),
            weights.hidden(),
            x.len(),
            h_prev.len()
        )));
    }
    let step = GruStep::forward(weights, ArrayView1::from(x), ArrayView1::from(h_prev));
    Ok(step.h.to_vec())
}

/// Activations of one step, kept for backpropagation.
#[derive(Clone, Debug)]
pub(crate) struct GruStep {
    pub z: Array1<f64>,
    pub r: Array1<f64>,
    pub cand: Array1<f64>,
    pub h: Array1<f64>,
}

impl GruStep {
    pub fn forward(w: &GruWeights, x: ArrayView1<f64>, h_prev: ArrayView1<f64>) -> GruStep {
        let hd = w.hidden();
        let mut pre = w.w.dot(&x) + &w.b;
        let uzr = w.u.slice(s![..2 * hd, ..]).dot(&h_prev);
        {
            let mut zr = pre.slice_mut(s![..2 * hd]);
            zr += &uzr;
            zr.mapv_inplace(sigmoid);
        }
        let z = pre.slice(s![..hd]).to_owned();
        let r = pre.slice(s![hd..2 * hd]).to_owned();
        let gated = &r * &h_prev;
        let mut cand = pre.slice(s![2 * hd..]).to_owned() + w.u.slice(s![2 * hd.., ..]).dot(&gated);
        cand.mapv_inplace(f64::tanh);
        let h = ndarray::Zip::from(&z)
            .and(&h_prev)
            .and(&cand)
            .map_collect(|&z, &hp, &c| (1.0 - z) * hp + z * c);
        GruStep { z, r, cand, h }
    }

    /// Accumulates weight gradients for this step into `grad` and returns
    /// (∂L/∂x, ∂L/∂h_prev) given ∂L/∂h.
    pub fn backward(
        &self,
        w: &GruWeights,
        grad: &mut GruWeights,
        x: ArrayView1<f64>,
        h_prev: ArrayView1<f64>,
        dh: &Array1<f64>,
    ) -> (Array1<f64>, Array1<f64>) {
        let hd = w.hidden();
        let mut dpre = Array1::<f64>::zeros(3 * hd);
        let mut dh_prev = Array1::<f64>::zeros(hd);
        for k in 0..hd {
            let z = self.z[k];
            let c = self.cand[k];
            // candidate pre-activation
            dpre[2 * hd + k] = dh[k] * z * (1.0 - c * c);
            // update gate pre-activation
            dpre[k] = dh[k] * (c - h_prev[k]) * z * (1.0 - z);
            dh_prev[k] = dh[k] * (1.0 - z);
        }
        let dcand_pre = dpre.slice(s![2 * hd..]);
        let d_gated = w.u.slice(s![2 * hd.., ..]).t().dot(&dcand_pre);
        for k in 0..hd {
            let r = self.r[k];
            dpre[hd + k] = d_gated[k] * h_prev[k] * r * (1.0 - r);
            dh_prev[k] += d_gated[k] * r;
        }
        let gated = &self.r * &h_prev;

        add_outer(&mut grad.w, dpre.view(), x);
        add_outer_rows(&mut grad.u, 0, dpre.slice(s![..2 * hd]), h_prev);
        add_outer_rows(&mut grad.u, 2 * hd, dpre.slice(s![2 * hd..]), gated.view());
        grad.b += &dpre;

        let dx = w.w.t().dot(&dpre);
        dh_prev += &w.u.slice(s![..2 * hd, ..]).t().dot(&dpre.slice(s![..2 * hd]));
        (dx, dh_prev)
    }
}

/// `m += a bᵀ`
pub(crate) fn add_outer(m: &mut Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) {
    add_outer_rows(m, 0, a, b);
}

/// `m[row0 + i, :] += a[i] · b`
pub(crate) fn add_outer_rows(m: &mut Array2<f64>, row0: usize, a: ArrayView1<f64>, b: ArrayView1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0.0 {
            m.row_mut(row0 + i).scaled_add(ai, &b);
        }
    }
}

/// States of a bidirectional GRU over a sequence, with per-step caches.
pub(crate) struct BiGruTrace {
    pub fwd: Vec<GruStep>,
    /// Indexed by position, i.e. `bwd[t]` is the state after reading x_t..x_{n-1}.
    pub bwd: Vec<GruStep>,
}

impl BiGruTrace {
    pub fn run(fwd_w: &GruWeights, bwd_w: &GruWeights, xs: &[ArrayView1<f64>]) -> Self {
        let hd = fwd_w.hidden();
        let zero = Array1::<f64>::zeros(hd);
        let mut fwd: Vec<GruStep> = Vec::with_capacity(xs.len());
        for x in xs {
            let prev = fwd.last().map_or(zero.view(), |s| s.h.view());
            let step = GruStep::forward(fwd_w, x.view(), prev);
            fwd.push(step);
        }
        let mut bwd_rev: Vec<GruStep> = Vec::with_capacity(xs.len());
        for x in xs.iter().rev() {
            let prev = bwd_rev.last().map_or(zero.view(), |s| s.h.view());
            let step = GruStep::forward(bwd_w, x.view(), prev);
            bwd_rev.push(step);
        }
        bwd_rev.reverse();
        BiGruTrace { fwd, bwd: bwd_rev }
    }

    /// Concatenated `[h_fwd; h_bwd]` at every position.
    pub fn outputs(&self) -> Vec<Array1<f64>> {
        self.fwd
            .iter()
            .zip(&self.bwd)
            .map(|(f, b)| ndarray::concatenate![ndarray::Axis(0), f.h, b.h])
            .collect()
    }

    /// Backpropagates per-position output gradients; returns ∂L/∂x_t.
    pub fn backward(
        &self,
        fwd_w: &GruWeights,
        bwd_w: &GruWeights,
        fwd_g: &mut GruWeights,
        bwd_g: &mut GruWeights,
        xs: &[ArrayView1<f64>],
        d_out: &[Array1<f64>],
    ) -> Vec<Array1<f64>> {
        let n = xs.len();
        let hd = fwd_w.hidden();
        let zero = Array1::<f64>::zeros(hd);
        let mut dxs: Vec<Array1<f64>> = vec![Array1::zeros(fwd_w.input()); n];

        let mut carry = Array1::<f64>::zeros(hd);
        for t in (0..n).rev() {
            let dh = &d_out[t].slice(s![..hd]) + &carry;
            let prev = if t == 0 { zero.view() } else { self.fwd[t - 1].h.view() };
            let (dx, dprev) = self.fwd[t].backward(fwd_w, fwd_g, xs[t].view(), prev, &dh);
            dxs[t] += &dx;
            carry = dprev;
        }

        let mut carry = Array1::<f64>::zeros(hd);
        for t in 0..n {
            let dh = &d_out[t].slice(s![hd..]) + &carry;
            let prev = if t + 1 == n {
                zero.view()
            } else {
                self.bwd[t + 1].h.view()
            };
            let (dx, dprev) = self.bwd[t].backward(bwd_w, bwd_g, xs[t].view(), prev, &dh);
            dxs[t] += &dx;
            carry = dprev;
        }
        dxs
    }
}

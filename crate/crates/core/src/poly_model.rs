//! Tensor-Legendre polynomial one-step model in total-degree space.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{InputLayout, Interval, TrainingSet};
use crate::error::{contract, Error, Result};
use crate::input_param::legendre_all;

/// Default cap on the size of a total-degree index set.
pub const DEFAULT_INDEX_CAP: usize = 1_000_000;

/// Relative threshold on `|R_kk| / |R_00|` below which columns are treated
/// as dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Slack allowed when flagging inputs outside the normalization box.
const BOX_SLACK: f64 = 1e-9;

/// `C(m + p, p)` without overflow for any realistic argument.
pub fn index_count(m: usize, p: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..=p as u128 {
        c = c.saturating_mul(m as u128 + i) / i;
    }
    c
}

/// All `α ∈ ℕ^m` with `|α|₁ ≤ p`, in lexicographic order.
pub fn total_degree_indices(m: usize, p: usize) -> Result<Vec<Vec<usize>>> {
    total_degree_indices_capped(m, p, DEFAULT_INDEX_CAP)
}

pub fn total_degree_indices_capped(m: usize, p: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    if m == 0 {
        return Err(contract("m", "dimension must be at least 1"));
    }
    let size = index_count(m, p);
    if size > cap as u128 {
        return Err(Error::Capacity { size, cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut cur = vec![0usize; m];
    push_indices(&mut cur, 0, p, &mut out);
    Ok(out)
}

fn push_indices(cur: &mut [usize], pos: usize, budget: usize, out: &mut Vec<Vec<usize>>) {
    if pos == cur.len() {
        out.push(cur.to_vec());
        return;
    }
    for a in 0..=budget {
        cur[pos] = a;
        push_indices(cur, pos + 1, budget - a, out);
    }
    cur[pos] = 0;
}

/// Diagnostics recorded by [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFitInfo {
    pub n_samples: usize,
    pub n_features: usize,
    /// Numerical rank of the design matrix.
    pub rank: usize,
    /// `‖A c − Y‖_F² / J` on the training increments.
    pub residual_mse: f64,
}

impl PolyFitInfo {
    pub fn underdetermined(&self) -> bool {
        self.n_samples < self.n_features
    }

    pub fn rank_deficient(&self) -> bool {
        self.rank < self.n_features
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyModel {
    pub layout: InputLayout,
    pub degree: usize,
    pub index_set: Vec<Vec<usize>>,
    /// Row-major `|index_set| × d`.
    pub coeffs: Vec<f64>,
    pub domain_box: Vec<Interval>,
    pub fit_info: Option<PolyFitInfo>,
}

impl PolyModel {
    /// Model with zero increment, i.e. the identity on states.
    pub fn zeros(layout: InputLayout, degree: usize, domain_box: Vec<Interval>) -> Result<Self> {
        let m = layout.width();
        if domain_box.len() != m {
            return Err(contract("domain_box", "length must equal the input width"));
        }
        let index_set = total_degree_indices(m, degree)?;
        let coeffs = vec![0.0; index_set.len() * layout.dim];
        Ok(Self {
            layout,
            degree,
            index_set,
            coeffs,
            domain_box,
            fit_info: None,
        })
    }

    /// Input width `m`.
    pub fn dim(&self) -> usize {
        self.layout.width()
    }

    pub fn n_features(&self) -> usize {
        self.index_set.len()
    }

    /// Affine image of `x` in `[−1, 1]^m`; degenerate coordinates map to 0.
    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, &v), iv) in out.iter_mut().zip(x).zip(&self.domain_box) {
            let h = 0.5 * (iv.hi - iv.lo);
            *o = if h > 0.0 { (v - 0.5 * (iv.lo + iv.hi)) / h } else { 0.0 };
        }
    }

    /// True when `x` lies in the normalization box.
    pub fn in_box(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.domain_box).all(|(&v, iv)| {
            let slack = BOX_SLACK * (1.0 + iv.width());
            v >= iv.lo - slack && v <= iv.hi + slack
        })
    }

    /// Writes `Φ_α(x)` for every index into `out`.
    pub fn features_into(&self, x: &[f64], ws: &mut FeatureWorkspace, out: &mut [f64]) {
        let m = self.dim();
        let q = self.degree + 1;
        ws.xhat.resize(m, 0.0);
        ws.table.resize(m * q, 0.0);
        self.normalize_into(x, &mut ws.xhat);
        for i in 0..m {
            legendre_all(ws.xhat[i], &mut ws.table[i * q..(i + 1) * q]);
        }
        for (o, alpha) in out.iter_mut().zip(&self.index_set) {
            let mut v = 1.0;
            for (i, &a) in alpha.iter().enumerate() {
                if a > 0 {
                    v *= ws.table[i * q + a];
                }
            }
            *o = v;
        }
    }

    /// Adds the fitted increment at `x_in` to `out` (length `d`).
    pub fn increment_into(&self, x_in: &[f64], ws: &mut FeatureWorkspace, out: &mut [f64]) {
        let d = self.layout.dim;
        let mut feats = core::mem::take(&mut ws.feats);
        feats.resize(self.n_features(), 0.0);
        self.features_into(x_in, ws, &mut feats);
        for (f, row) in feats.iter().zip(self.coeffs.chunks_exact(d)) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += f * c;
            }
        }
        ws.feats = feats;
    }
}

/// Scratch buffers for feature evaluation.
#[derive(Debug, Clone, Default)]
pub struct FeatureWorkspace {
    xhat: Vec<f64>,
    table: Vec<f64>,
    feats: Vec<f64>,
}

impl FeatureWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

pub fn features(model_input: &[f64], model: &PolyModel) -> Result<Vec<f64>> {
    if model_input.len() != model.dim() {
        return Err(contract("model_input", "length must equal the input width"));
    }
    let mut out = vec![0.0; model.n_features()];
    model.features_into(model_input, &mut FeatureWorkspace::new(), &mut out);
    Ok(out)
}

/// `Î·X_in + coeffsᵀ·Φ(X_in)`.
pub fn poly_forward(model: &PolyModel, x_in: &[f64]) -> Result<Vec<f64>> {
    if x_in.len() != model.dim() {
        return Err(contract("x_in", "length must equal the input width"));
    }
    let mut out = x_in[..model.layout.dim].to_vec();
    model.increment_into(x_in, &mut FeatureWorkspace::new(), &mut out);
    Ok(out)
}

/// Least-squares fit of the one-step increments `x_out − x_in` on the
/// dataset's normalization box.
pub fn fit(dataset: &TrainingSet, p: usize) -> Result<PolyModel> {
    dataset.validate()?;
    let mut model = PolyModel::zeros(dataset.layout, p, dataset.normalization_box())?;
    let rows = dataset.len();
    let cols = model.n_features();
    let d = model.layout.dim;

    let mut a = vec![0.0; rows * cols];
    let mut y = vec![0.0; rows * d];
    let mut ws = FeatureWorkspace::new();
    let mut row = vec![0.0; cols];
    for (j, s) in dataset.samples.iter().enumerate() {
        let input = dataset.model_input(j);
        model.features_into(&input, &mut ws, &mut row);
        for (c, v) in row.iter().enumerate() {
            a[c * rows + j] = *v;
        }
        for k in 0..d {
            y[k * rows + j] = s.x_out[k] - s.x_in[k];
        }
    }

    let sol = lstsq(&mut a, rows, cols, &mut y, d, RANK_TOLERANCE);
    for c in 0..cols {
        for k in 0..d {
            model.coeffs[c * d + k] = sol.x[k * cols + c];
        }
    }
    if model.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(contract("dataset", "least-squares solution is not finite"));
    }
    model.fit_info = Some(PolyFitInfo {
        n_samples: rows,
        n_features: cols,
        rank: sol.rank,
        residual_mse: sol.residual_ss / rows as f64,
    });
    Ok(model)
}

struct LstsqSolution {
    /// Column-major `cols × nrhs`.
    x: Vec<f64>,
    rank: usize,
    residual_ss: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Basic least-squares solution of `min ‖A X − Y‖_F` by Householder QR
/// with column-norm pivoting. `a` is column-major `rows × cols`, `y`
/// column-major `rows × nrhs`; both are overwritten.
fn lstsq(a: &mut [f64], rows: usize, cols: usize, y: &mut [f64], nrhs: usize, rtol: f64) -> LstsqSolution {
    let steps = rows.min(cols);
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut norms: Vec<f64> = (0..cols).map(|c| libm::sqrt(dot(col(a, rows, c), col(a, rows, c)))).collect();
    let mut ref_norms = norms.clone();
    let mut diag = vec![0.0; steps];
    let mut v = vec![0.0; rows];

    for k in 0..steps {
        let piv = (k..cols).fold(k, |best, c| if norms[c] > norms[best] { c } else { best });
        if piv != k {
            for r in 0..rows {
                a.swap(k * rows + r, piv * rows + r);
            }
            perm.swap(k, piv);
            norms.swap(k, piv);
            ref_norms.swap(k, piv);
        }

        let ck = &a[k * rows + k..(k + 1) * rows];
        let alpha = libm::sqrt(dot(ck, ck));
        if alpha == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let r_kk = if ck[0] > 0.0 { -alpha } else { alpha };
        let len = rows - k;
        v[..len].copy_from_slice(ck);
        v[0] -= r_kk;
        let vnorm2 = dot(&v[..len], &v[..len]);
        diag[k] = r_kk;
        a[k * rows + k] = r_kk;
        for r in k + 1..rows {
            a[k * rows + r] = 0.0;
        }
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        let reflect = |c: &mut [f64]| {
            let s = beta * dot(&v[..len], c);
            for (ci, vi) in c.iter_mut().zip(&v[..len]) {
                *ci -= s * vi;
            }
        };
        for c in k + 1..cols {
            reflect(&mut a[c * rows + k..(c + 1) * rows]);
            let head = a[c * rows + k];
            if norms[c] > 0.0 {
                let t = (head / norms[c]).abs();
                let t = (1.0 - t * t).max(0.0);
                let ratio = norms[c] / ref_norms[c];
                if t * ratio * ratio <= 1.49e-8 {
                    let tail = &a[c * rows + k + 1..(c + 1) * rows];
                    norms[c] = libm::sqrt(dot(tail, tail));
                    ref_norms[c] = norms[c];
                } else {
                    norms[c] *= libm::sqrt(t);
                }
            }
        }
        for c in 0..nrhs {
            reflect(&mut y[c * rows + k..(c + 1) * rows]);
        }
    }

    let lead = diag.first().map_or(0.0, |v: &f64| v.abs());
    let rank = diag.iter().take_while(|r| r.abs() > rtol * lead && lead > 0.0).count();

    let mut x = vec![0.0; cols * nrhs];
    let mut residual_ss = 0.0;
    for c in 0..nrhs {
        let yc = &y[c * rows..(c + 1) * rows];
        residual_ss += dot(&yc[rank..], &yc[rank..]);
        let mut z = yc[..rank].to_vec();
        for i in (0..rank).rev() {
            let mut s = z[i];
            for j in i + 1..rank {
                s -= a[j * rows + i] * z[j];
            }
            z[i] = s / a[i * rows + i];
        }
        for (i, zi) in z.into_iter().enumerate() {
            x[c * cols + perm[i]] = zi;
        }
    }
    LstsqSolution { x, rank, residual_ss }
}

fn col(a: &[f64], rows: usize, c: usize) -> &[f64] {
    &a[c * rows..(c + 1) * rows]
}

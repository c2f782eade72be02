//! Weighted partial sums `S_n = Σ_j b_{n,j} X_j` and their exact second moments.
//!
//! Three evaluation paths share one innovation field, so they agree up to
//! floating-point reassociation:
//!
//! * rectangle weights over a linear field use a summed-area table of the
//!   innovations, `S = Σ_k a_k · box_sum(R − k)`;
//! * any other scheme over a linear field draws `S = Σ_u c_u ε_u` with the
//!   precomputed convolution `c = b ∗ a`;
//! * everything else evaluates `X_j` site by site.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{IntervalModel, FieldModel, Kernel};
use crate::innovations::{InnovationField, InnovationSource, LatticePoint};
use crate::weights::{for_each_in_box, WeightScheme};

/// Largest dense array the convolution and prefix paths will allocate.
const MAX_DENSE: usize = 1 << 27;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumMethod {
    /// Pick the fastest exact path for the (model, scheme) pair.
    #[default]
    Auto,
    /// Always evaluate `X_j` at every support site.
    Direct,
}

/// Row-major array over the integer box `Π_q [lo_q, lo_q + ext_q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseBox {
    pub lo: Vec<i64>,
    pub ext: Vec<usize>,
    pub data: Vec<f64>,
}

impl DenseBox {
    pub fn zeros(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        let ext: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1).max(0) as usize).collect();
        let len = ext.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e)).unwrap_or(usize::MAX);
        if len > MAX_DENSE {
            return Err(Error::Unsupported(format!("dense array of {len} cells exceeds the {MAX_DENSE} limit")));
        }
        Ok(DenseBox { lo, ext, data: vec![0.0; len] })
    }

    pub fn hi(&self) -> Vec<i64> {
        self.lo.iter().zip(&self.ext).map(|(l, &e)| l + e as i64 - 1).collect()
    }

    /// Flat index, or `None` outside the box.
    pub fn index(&self, site: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for q in 0..self.lo.len() {
            let off = site[q] - self.lo[q];
            if off < 0 || off as usize >= self.ext[q] {
                return None;
            }
            idx = idx * self.ext[q] + off as usize;
        }
        Some(idx)
    }

    pub fn get(&self, site: &[i64]) -> f64 {
        self.index(site).map_or(0.0, |i| self.data[i])
    }

    /// Calls `f(site, value)` over every cell, last axis fastest.
    pub fn for_each<F: FnMut(&[i64], f64)>(&self, mut f: F) {
        let ranges: Vec<(i64, i64)> = self.lo.iter().zip(self.hi()).map(|(&l, h)| (l, h)).collect();
        let mut i = 0;
        for_each_in_box(&ranges, |s| {
            f(s, self.data[i]);
            i += 1;
        });
    }

    fn stride(&self, q: usize) -> usize {
        self.ext[q + 1..].iter().product()
    }
}

/// Inclusive cumulative sums of the innovations over a box.
#[derive(Clone, Debug)]
pub struct PrefixTable {
    cells: DenseBox,
}

impl PrefixTable {
    pub fn build<S: InnovationSource + ?Sized>(source: &S, lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        let mut cells = DenseBox::zeros(lo, hi)?;
        let ranges: Vec<(i64, i64)> = cells.lo.iter().zip(cells.hi()).map(|(&l, h)| (l, h)).collect();
        let mut i = 0;
        let data = &mut cells.data;
        for_each_in_box(&ranges, |s| {
            data[i] = source.innovation(s);
            i += 1;
        });
        for q in 0..cells.ext.len() {
            let stride = cells.stride(q);
            let ext = cells.ext[q];
            for i in 0..cells.data.len() {
                if (i / stride) % ext != 0 {
                    cells.data[i] += cells.data[i - stride];
                }
            }
        }
        Ok(PrefixTable { cells })
    }

    /// `Σ_{lo ≤ j ≤ hi} ε_j`; the box must lie inside the table.
    pub fn box_sum(&self, lo: &[i64], hi: &[i64]) -> f64 {
        let d = lo.len();
        if lo.iter().zip(hi).any(|(l, h)| h < l) {
            return 0.0;
        }
        let mut total = 0.0;
        let mut corner = vec![0i64; d];
        'corners: for mask in 0u32..(1 << d) {
            let mut sign = 1.0;
            for q in 0..d {
                if mask & (1 << q) != 0 {
                    corner[q] = lo[q] - 1;
                    sign = -sign;
                    if corner[q] < self.cells.lo[q] {
                        continue 'corners;
                    }
                } else {
                    corner[q] = hi[q];
                }
            }
            total += sign * self.cells.data[self.cells.index(&corner).expect("box inside prefix table")];
        }
        total
    }
}

/// `c_u = Σ_j b_j a_{j−u}`, so that `Σ_j b_j X_j = Σ_u c_u ε_u`, on the
/// bounding box of its support.
pub fn convolve(coefficients: &[(LatticePoint, f64)], kernel: &Kernel) -> Result<DenseBox> {
    let d = kernel.dim();
    if coefficients.is_empty() {
        return DenseBox::zeros(vec![0; d], vec![-1; d]);
    }
    let kb = kernel.bounds();
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for (j, _) in coefficients {
        for q in 0..d {
            lo[q] = lo[q].min(j.0[q] - kb[q].1);
            hi[q] = hi[q].max(j.0[q] - kb[q].0);
        }
    }
    let mut out = DenseBox::zeros(lo, hi)?;
    let strides: Vec<isize> = (0..d).map(|q| out.stride(q) as isize).collect();
    let offsets: Vec<(isize, f64)> = kernel
        .terms()
        .iter()
        .map(|(k, a)| (k.0.iter().zip(&strides).map(|(&c, &s)| c as isize * s).sum(), *a))
        .collect();
    for (j, b) in coefficients {
        // flat position of j itself, which may sit outside the box; j − k never does
        let base: isize = (0..d).map(|q| (j.0[q] - out.lo[q]) as isize * strides[q]).sum();
        for (off, a) in &offsets {
            out.data[(base - off) as usize] += b * a;
        }
    }
    Ok(out)
}

enum Plan {
    Direct { coefficients: Vec<(LatticePoint, f64)> },
    Convolved { sites: Vec<(LatticePoint, f64)> },
    Rectangles { kernel: Kernel, boxes: Vec<(Vec<i64>, Vec<i64>)>, table_lo: Vec<i64>, table_hi: Vec<i64> },
}

/// Precomputed evaluator for one model and one or more schemes.
pub struct SumPlan {
    model: FieldModel,
    plans: Vec<Plan>,
    rect_shared: bool,
}

impl SumPlan {
    pub fn new(model: &FieldModel, schemes: &[WeightScheme], m: Option<i64>, method: SumMethod) -> Result<Self> {
        let model = match m {
            Some(m) => model.m_truncate(m)?,
            None => model.clone(),
        };
        for s in schemes {
            if s.dim() != model.dim() {
                return Err(Error::DimensionMismatch { expected: model.dim(), got: s.dim() });
            }
        }
        let kernel = if method == SumMethod::Auto { model.as_kernel() } else { None };
        let Some(kernel) = kernel else {
            let plans = schemes.iter().map(|s| Plan::Direct { coefficients: s.coefficients() }).collect();
            return Ok(SumPlan { model, plans, rect_shared: false });
        };

        let all_rect = !schemes.is_empty() && schemes.iter().all(|s| matches!(s, WeightScheme::Rectangle(_)));
        if all_rect && !kernel.is_empty() {
            let kb = kernel.bounds();
            let d = model.dim();
            let mut boxes = Vec::new();
            let mut table_lo = vec![i64::MAX; d];
            let mut table_hi = vec![i64::MIN; d];
            for s in schemes {
                let WeightScheme::Rectangle(r) = s else { unreachable!() };
                let ext = r.extents();
                let lo = vec![1i64; d];
                for q in 0..d {
                    table_lo[q] = table_lo[q].min(1 - kb[q].1);
                    table_hi[q] = table_hi[q].max(ext[q] - kb[q].0);
                }
                boxes.push((lo, ext));
            }
            let plans = vec![Plan::Rectangles { kernel, boxes, table_lo, table_hi }];
            return Ok(SumPlan { model, plans, rect_shared: true });
        }

        let mut plans = Vec::with_capacity(schemes.len());
        for s in schemes {
            let c = convolve(&s.coefficients(), &kernel)?;
            let mut sites = Vec::new();
            c.for_each(|u, v| {
                if v != 0.0 {
                    sites.push((LatticePoint(u.to_vec()), v));
                }
            });
            plans.push(Plan::Convolved { sites });
        }
        Ok(SumPlan { model, plans, rect_shared: false })
    }

    pub fn model(&self) -> &FieldModel {
        &self.model
    }

    /// `"prefix"`, `"convolved"` or `"direct"`.
    pub fn path(&self) -> &'static str {
        match self.plans.first() {
            Some(Plan::Rectangles { .. }) => "prefix",
            Some(Plan::Convolved { .. }) => "convolved",
            _ => "direct",
        }
    }

    pub fn is_direct(&self) -> bool {
        self.plans.iter().all(|p| matches!(p, Plan::Direct { .. }))
    }

    /// `(S_n^{(1)}, …, S_n^{(r)})` on the innovation field reseeded with `seed`.
    pub fn evaluate(&self, seed: u64) -> Result<Vec<f64>> {
        let field = self.model.innovation().reseeded(seed);
        self.evaluate_on(&field)
    }

    pub fn evaluate_on(&self, field: &InnovationField) -> Result<Vec<f64>> {
        if self.rect_shared {
            let Plan::Rectangles { kernel, boxes, table_lo, table_hi } = &self.plans[0] else { unreachable!() };
            let table = PrefixTable::build(field, table_lo.clone(), table_hi.clone())?;
            let d = table_lo.len();
            let mut lo = vec![0i64; d];
            let mut hi = vec![0i64; d];
            return Ok(boxes
                .iter()
                .map(|(blo, bhi)| {
                    if bhi.iter().any(|&h| h < 1) {
                        return 0.0;
                    }
                    let mut s = 0.0;
                    for (k, a) in kernel.terms() {
                        for q in 0..d {
                            lo[q] = blo[q] - k.0[q];
                            hi[q] = bhi[q] - k.0[q];
                        }
                        s += a * table.box_sum(&lo, &hi);
                    }
                    s
                })
                .collect());
        }
        Ok(self
            .plans
            .iter()
            .map(|p| match p {
                Plan::Direct { coefficients } => {
                    coefficients.iter().map(|(j, b)| b * self.model.evaluate_with(field, &j.0)).sum()
                }
                Plan::Convolved { sites } => sites.iter().map(|(u, c)| c * field.value_unchecked(&u.0)).sum(),
                Plan::Rectangles { .. } => unreachable!(),
            })
            .collect())
    }
}

/// `S_n` for one scheme with the model's innovations reseeded by `seed`.
pub fn sample_sum(model: &FieldModel, scheme: &WeightScheme, seed: u64, m: Option<i64>) -> Result<f64> {
    Ok(SumPlan::new(model, std::slice::from_ref(scheme), m, SumMethod::Auto)?.evaluate(seed)?[0])
}

fn linear_kernel(model: &FieldModel) -> Result<Kernel> {
    model
        .as_kernel()
        .ok_or_else(|| Error::Unsupported(format!("closed-form variance needs a linear field, got {}", model.family())))
}

/// `σ_n² = m_2 Σ_u (Σ_j b_{n,j} a_{u−j})²`.
pub fn exact_variance(model: &FieldModel, scheme: &WeightScheme) -> Result<f64> {
    exact_covariance(model, scheme, scheme)
}

/// `E(S_n(b) S_n(b')) = m_2 Σ_u c_u c'_u`.
///
/// Nonlinear models fall back to `Σ_h γ(h) Σ_j b_j b'_{j+h}` over their
/// exact autocovariances.
pub fn exact_covariance(model: &FieldModel, a: &WeightScheme, b: &WeightScheme) -> Result<f64> {
    if model.as_kernel().is_none() {
        return covariance_from_autocovariances(model, a, b);
    }
    let kernel = linear_kernel(model)?;
    let m2 = model.innovation().spec.abs_moment(2)?;
    let ca = convolve(&a.coefficients(), &kernel)?;
    if a == b {
        return Ok(m2 * ca.data.iter().map(|v| v * v).sum::<f64>());
    }
    let cb = convolve(&b.coefficients(), &kernel)?;
    let mut s = 0.0;
    ca.for_each(|u, v| {
        if v != 0.0 {
            s += v * cb.get(u);
        }
    });
    Ok(m2 * s)
}

fn covariance_from_autocovariances(model: &FieldModel, a: &WeightScheme, b: &WeightScheme) -> Result<f64> {
    if a.dim() != model.dim() || b.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: a.dim().max(b.dim()) });
    }
    let gamma = crate::dependence::covariances(model)?;
    let lookup: HashMap<LatticePoint, f64> = b.coefficients().into_iter().collect();
    let ca = a.coefficients();
    let mut shifted = vec![0i64; model.dim()];
    let mut s = 0.0;
    for (h, g) in &gamma {
        for (j, v) in &ca {
            for q in 0..shifted.len() {
                shifted[q] = j.0[q] + h.0[q];
            }
            if let Some(w) = lookup.get(shifted.as_slice()) {
                s += g * v * w;
            }
        }
    }
    Ok(s)
}

/// Full covariance matrix of `(S_n(b_1), …, S_n(b_r))`.
pub fn exact_covariance_matrix(model: &FieldModel, schemes: &[WeightScheme]) -> Result<Vec<Vec<f64>>> {
    if model.as_kernel().is_none() {
        let r = schemes.len();
        let mut out = vec![vec![0.0; r]; r];
        for i in 0..r {
            for j in i..r {
                out[i][j] = covariance_from_autocovariances(model, &schemes[i], &schemes[j])?;
                out[j][i] = out[i][j];
            }
        }
        return Ok(out);
    }
    let kernel = linear_kernel(model)?;
    let m2 = model.innovation().spec.abs_moment(2)?;
    let conv: Vec<DenseBox> = schemes.iter().map(|s| convolve(&s.coefficients(), &kernel)).collect::<Result<_>>()?;
    let r = schemes.len();
    let mut out = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in i..r {
            let mut s = 0.0;
            conv[i].for_each(|u, v| {
                if v != 0.0 {
                    s += v * conv[j].get(u);
                }
            });
            out[i][j] = m2 * s;
            out[j][i] = m2 * s;
        }
    }
    Ok(out)
}

/// `Var(S_n − S_n^(m))`, the weights convolved with the discarded kernel tail.
pub fn exact_truncation_error(model: &FieldModel, scheme: &WeightScheme, m: i64) -> Result<f64> {
    let kernel = linear_kernel(model)?;
    let m2 = model.innovation().spec.abs_moment(2)?;
    let tail: Vec<(Vec<i64>, f64)> = kernel
        .terms()
        .iter()
        .filter(|(k, _)| k.sup_norm() > m)
        .map(|(k, a)| (k.0.clone(), *a))
        .collect();
    if tail.is_empty() {
        return Ok(0.0);
    }
    let tail_kernel = Kernel::new(kernel.dim(), tail)?;
    let c = convolve(&scheme.coefficients(), &tail_kernel)?;
    Ok(m2 * c.data.iter().map(|v| v * v).sum::<f64>())
}

/// `Var(S_n) = Σ_ℓ 2 min(n, n_ℓ) α_ℓ²` for `S_n = X_0 + … + X_{n−1}`.
pub fn interval_exact_variance(model: &IntervalModel, n: i64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain(format!("n = {n} must be positive")));
    }
    Ok(model
        .alpha
        .iter()
        .zip(&model.n_seq)
        .map(|(a, &nl)| 2.0 * n.min(nl) as f64 * a * a)
        .sum())
}

/// `Var(S_{n}(W^(ℓ)))` for a single layer.
pub fn interval_layer_variance(model: &IntervalModel, level: usize, n: i64) -> f64 {
    let a = model.alpha[level];
    2.0 * n.min(model.n_seq[level]) as f64 * a * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::InnovationSpec;
    use crate::weights::{IndexSetWeights, RectangleWeights};

    fn field(spec: InnovationSpec, dim: usize, seed: u64) -> InnovationField {
        InnovationField::new(spec, dim, seed).unwrap()
    }

    fn kernel_model(dim: usize, terms: Vec<(Vec<i64>, f64)>, spec: InnovationSpec) -> FieldModel {
        FieldModel::kernel(Kernel::new(dim, terms).unwrap(), field(spec, dim, 7)).unwrap()
    }

    #[test]
    fn two_site_rademacher_support() {
        let m = kernel_model(1, vec![(vec![0], 1.0)], InnovationSpec::Rademacher);
        let w = WeightScheme::Rectangle(RectangleWeights::full(2, 1));
        for seed in 0..200 {
            let s = sample_sum(&m, &w, seed, None).unwrap();
            assert!([-2.0, 0.0, 2.0].contains(&s), "{s}");
        }
    }

    #[test]
    fn difference_field_telescopes() {
        let m = FieldModel::difference(field(InnovationSpec::StandardGaussian, 1, 3)).unwrap();
        let n = 37;
        let w = WeightScheme::IndexSet(IndexSetWeights::contiguous(n));
        for seed in 0..20 {
            let s = sample_sum(&m, &w, seed, None).unwrap();
            let f = m.innovation().reseeded(seed);
            let expect = f.value_unchecked(&[n - 1]) - f.value_unchecked(&[-1]);
            assert!((s - expect).abs() < 1e-12);
        }
        assert!((exact_variance(&m, &w).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_zero() {
        let m = kernel_model(2, vec![(vec![0, 0], 1.0), (vec![1, 0], 1.0)], InnovationSpec::Rademacher);
        let w = WeightScheme::Rectangle(RectangleWeights::new(10, vec![0.0, 1.0]).unwrap());
        assert_eq!(sample_sum(&m, &w, 1, None).unwrap(), 0.0);
        let e = WeightScheme::IndexSet(IndexSetWeights::new(2, vec![]).unwrap());
        assert_eq!(sample_sum(&m, &e, 1, None).unwrap(), 0.0);
    }

    #[test]
    fn all_paths_agree() {
        let m = kernel_model(
            2,
            vec![(vec![0, 0], 1.0), (vec![1, 0], -0.5), (vec![0, 2], 0.25), (vec![-1, 1], 0.7)],
            InnovationSpec::StandardGaussian,
        );
        let rect = WeightScheme::Rectangle(RectangleWeights::new(12, vec![0.5, 1.0]).unwrap());
        let explicit = WeightScheme::Explicit(
            crate::weights::ExplicitWeights::new(2, rect.coefficients()).unwrap(),
        );
        let fast = SumPlan::new(&m, std::slice::from_ref(&rect), None, SumMethod::Auto).unwrap();
        let conv = SumPlan::new(&m, &[explicit], None, SumMethod::Auto).unwrap();
        let slow = SumPlan::new(&m, &[rect], None, SumMethod::Direct).unwrap();
        assert!(slow.is_direct());
        for seed in 0..10 {
            let a = fast.evaluate(seed).unwrap()[0];
            let b = conv.evaluate(seed).unwrap()[0];
            let c = slow.evaluate(seed).unwrap()[0];
            assert!((a - c).abs() <= 1e-10 * c.abs().max(1.0));
            assert!((b - c).abs() <= 1e-10 * c.abs().max(1.0));
        }
    }

    #[test]
    fn iid_rectangle_variance() {
        let m = kernel_model(2, vec![(vec![0, 0], 1.0)], InnovationSpec::StandardGaussian);
        let w = WeightScheme::Rectangle(RectangleWeights::full(9, 2));
        assert!((exact_variance(&m, &w).unwrap() - 81.0).abs() < 1e-9);
    }

    #[test]
    fn variance_bounded_by_hannan() {
        let m = kernel_model(1, vec![(vec![0], 1.0), (vec![1], -0.3), (vec![3], 0.6)], InnovationSpec::Rademacher);
        let delta2 = 1.9;
        for n in [1u64, 5, 40] {
            let w = WeightScheme::Rectangle(RectangleWeights::full(n, 1));
            assert!(exact_variance(&m, &w).unwrap() <= w.norm_sq() * delta2 * delta2 + 1e-12);
        }
    }

    #[test]
    fn truncation_error_vanishes_beyond_radius() {
        let m = kernel_model(1, vec![(vec![0], 1.0), (vec![2], 0.5), (vec![4], 0.25)], InnovationSpec::Rademacher);
        let w = WeightScheme::Rectangle(RectangleWeights::full(30, 1));
        let errs: Vec<f64> = (0..6).map(|k| exact_truncation_error(&m, &w, k).unwrap()).collect();
        assert!(errs.windows(2).all(|p| p[1] <= p[0] + 1e-12));
        assert_eq!(errs[4], 0.0);
    }

    #[test]
    fn interval_single_layer_variance() {
        let m = IntervalModel::new(vec![0.5], vec![4], vec![1.0], 1).unwrap();
        assert_eq!(interval_exact_variance(&m, 3).unwrap(), 2.0 * 3.0 * 0.25);
        assert_eq!(interval_exact_variance(&m, 10).unwrap(), 2.0 * 4.0 * 0.25);
    }

    #[test]
    fn prefix_table_matches_brute_force() {
        let f = field(InnovationSpec::StandardGaussian, 2, 5);
        let t = PrefixTable::build(&f, vec![-3, -2], vec![4, 5]).unwrap();
        let mut brute = 0.0;
        for i in -1..=2 {
            for j in 0..=3 {
                brute += f.value_unchecked(&[i, j]);
            }
        }
        assert!((t.box_sum(&[-1, 0], &[2, 3]) - brute).abs() < 1e-12);
    }

    #[test]
    fn autocovariance_path_matches_closed_forms() {
        let m = IntervalModel::new(vec![0.5, 0.25], vec![2, 5], vec![1.0, 1.0], 3).unwrap();
        let model = FieldModel::Interval(m.clone());
        for n in [1i64, 3, 7, 12] {
            let w = WeightScheme::IndexSet(crate::weights::IndexSetWeights::contiguous(n));
            let v = exact_variance(&model, &w).unwrap();
            assert!((v - interval_exact_variance(&m, n).unwrap()).abs() < 1e-12, "n={n}");
        }
        let v = FieldModel::volterra(
            Kernel::new(1, vec![(vec![0], 1.0)]).unwrap(),
            vec![(vec![0], vec![1], 0.5)],
            field(InnovationSpec::Rademacher, 1, 2),
        )
        .unwrap();
        // X_j = ε_j + ½ ε_j ε_{j−1}: the product terms are uncorrelated across j
        let w = WeightScheme::Rectangle(RectangleWeights::full(10, 1));
        assert!((exact_variance(&v, &w).unwrap() - 10.0 * 1.25).abs() < 1e-12);
    }
}

//! Bernoulli field models `X_j = f(T_j ε)`.
//!
//! Four families are provided: finite-support linear (kernel) fields,
//! second-order Volterra fields, the first-difference field and the
//! interval-construction field whose `σ_n`-normalized sums have different
//! limits along even and odd subsequences.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::innovations::{sup_norm, InnovationField, InnovationSource, InnovationSpec, LatticePoint};

type Coords = SmallVec<[i64; 4]>;

#[inline]
fn shifted(site: &[i64], offset: &[i64]) -> Coords {
    site.iter().zip(offset).map(|(s, o)| s - o).collect()
}

/// Finite-support coefficient array `a: Z^d → R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    dim: usize,
    terms: Vec<(LatticePoint, f64)>,
}

impl Kernel {
    /// Builds a kernel; offsets must be distinct and `Σ a_k² > 0`.
    pub fn new(dim: usize, terms: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("kernel dimension must be at least 1".into()));
        }
        let mut out: Vec<(LatticePoint, f64)> = Vec::with_capacity(terms.len());
        for (offset, coef) in terms {
            if offset.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: offset.len() });
            }
            if !coef.is_finite() {
                return Err(Error::Config(format!("non-finite kernel coefficient at {offset:?}")));
            }
            out.push((LatticePoint(offset), coef));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        if out.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("kernel offsets must be distinct".into()));
        }
        let k = Kernel { dim, terms: out };
        if k.sum_sq() <= 0.0 {
            return Err(Error::Config("kernel must have a nonzero coefficient".into()));
        }
        Ok(k)
    }

    pub fn identity(dim: usize) -> Self {
        Kernel { dim, terms: vec![(LatticePoint::origin(dim), 1.0)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(LatticePoint, f64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `max |k|_∞` over the support; 0 for an empty kernel.
    pub fn radius(&self) -> i64 {
        self.terms.iter().map(|(k, _)| k.sup_norm()).max().unwrap_or(0)
    }

    pub fn coefficient(&self, offset: &[i64]) -> f64 {
        self.terms
            .binary_search_by(|(k, _)| k.0.as_slice().cmp(offset))
            .map(|i| self.terms[i].1)
            .unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.terms.iter().map(|(_, a)| a).sum()
    }

    pub fn l1(&self) -> f64 {
        self.terms.iter().map(|(_, a)| a.abs()).sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.terms.iter().map(|(_, a)| a * a).sum()
    }

    /// Drops every term with `|k|_∞ > m`. May leave the kernel empty.
    pub fn truncated(&self, m: i64) -> Kernel {
        Kernel {
            dim: self.dim,
            terms: self.terms.iter().filter(|(k, _)| k.sup_norm() <= m).cloned().collect(),
        }
    }

    /// `Σ_{|k|_∞ > m} a_k²`.
    pub fn tail_sum_sq(&self, m: i64) -> f64 {
        self.terms.iter().filter(|(k, _)| k.sup_norm() > m).map(|(_, a)| a * a).sum()
    }

    /// Per-axis bounds `[min_q, max_q]` of the support.
    pub fn bounds(&self) -> Vec<(i64, i64)> {
        (0..self.dim)
            .map(|q| {
                let lo = self.terms.iter().map(|(k, _)| k.0[q]).min().unwrap_or(0);
                let hi = self.terms.iter().map(|(k, _)| k.0[q]).max().unwrap_or(0);
                (lo, hi)
            })
            .collect()
    }

    #[inline]
    pub fn apply<S: InnovationSource + ?Sized>(&self, source: &S, site: &[i64]) -> f64 {
        let mut acc = 0.0;
        for (k, a) in &self.terms {
            acc += a * source.innovation(&shifted(site, &k.0));
        }
        acc
    }
}

/// `X_j = Σ_k a_k ε_{j−k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelField {
    pub kernel: Kernel,
    pub innovation: InnovationField,
}

/// Linear part plus centered products `c ε_{j−k} ε_{j−l}` with `k ≠ l`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolterraField {
    pub linear: Kernel,
    pub pairs: Vec<(LatticePoint, LatticePoint, f64)>,
    pub innovation: InnovationField,
}

/// `X_i = ε_i − ε_{i−1}` on Z.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceField {
    pub innovation: InnovationField,
}

/// `X_n = Σ_{k ≤ K} α_k (ζ_n^(k) − ζ_{n−n_k}^(k))` with `ζ_n^(k) = label_k(ω_n) / √d_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalModel {
    pub alpha: Vec<f64>,
    pub n_seq: Vec<i64>,
    pub d_seq: Vec<f64>,
    pub omega: InnovationField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalPreset {
    /// `α_k = 2^{-k²}`, `n_k = 2^{3k²}`.
    Full,
    /// `α_k = 2^{-k}`, `n_k = 2^{2k+2}`.
    Small,
}

impl IntervalModel {
    pub fn new(alpha: Vec<f64>, n_seq: Vec<i64>, d_seq: Vec<f64>, seed: u64) -> Result<Self> {
        let k = alpha.len();
        if k == 0 || n_seq.len() != k || d_seq.len() != k {
            return Err(Error::Config(
                "alpha, n_seq and d_seq must be nonempty and of equal length".into(),
            ));
        }
        if alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Config("alpha_k must be positive".into()));
        }
        if n_seq.windows(2).any(|w| w[0] >= w[1]) || n_seq[0] < 1 {
            return Err(Error::Config("n_k must be increasing positive integers".into()));
        }
        if d_seq.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return Err(Error::Domain("d_k must lie in (0, 1]".into()));
        }
        let omega = InnovationField::new(InnovationSpec::UniformUnitInterval, 1, seed)?;
        Ok(IntervalModel { alpha, n_seq, d_seq, omega })
    }

    /// `d_k = 1` for even k and `1/n_k` for odd k, levels `1..=k_max`.
    pub fn preset(preset: IntervalPreset, k_max: usize, seed: u64) -> Result<Self> {
        let limit = match preset {
            IntervalPreset::Full => 3,
            IntervalPreset::Small => 12,
        };
        if k_max == 0 || k_max > limit {
            return Err(Error::Config(format!("k_max must be in 1..={limit} for {preset:?}")));
        }
        let mut alpha = Vec::new();
        let mut n_seq = Vec::new();
        let mut d_seq = Vec::new();
        for k in 1..=k_max as i32 {
            let (a, n) = match preset {
                IntervalPreset::Full => (2f64.powi(-k * k), 1i64 << (3 * k * k)),
                IntervalPreset::Small => (2f64.powi(-k), 1i64 << (2 * k + 2)),
            };
            alpha.push(a);
            n_seq.push(n);
            d_seq.push(if k % 2 == 0 { 1.0 } else { 1.0 / n as f64 });
        }
        Self::new(alpha, n_seq, d_seq, seed)
    }

    pub fn k_max(&self) -> usize {
        self.alpha.len()
    }

    /// `ζ^(k)(ω)` for all levels k at once.
    pub fn zetas(&self, omega: f64) -> SmallVec<[f64; 8]> {
        let labels = labels_unchecked(omega, &self.d_seq);
        labels.iter().zip(&self.d_seq).map(|(&l, d)| l as f64 / d.sqrt()).collect()
    }

    fn zeta_at<S: InnovationSource + ?Sized>(&self, source: &S, n: i64, level: usize) -> f64 {
        let w = source.innovation(&[n]);
        let labels = labels_unchecked(w, &self.d_seq[..=level]);
        labels[level] as f64 / self.d_seq[level].sqrt()
    }

    pub fn evaluate_with<S: InnovationSource + ?Sized>(&self, source: &S, n: i64) -> f64 {
        let here = self.zetas(source.innovation(&[n]));
        let mut x = 0.0;
        for (k, (&a, &lag)) in self.alpha.iter().zip(&self.n_seq).enumerate() {
            x += a * (here[k] - self.zeta_at(source, n - lag, k));
        }
        x
    }

    /// `S_n(W^(k)) = Σ_{i=0}^{n-1} α_k (ζ_i^(k) − ζ_{i−n_k}^(k))`, level index `k` zero-based.
    pub fn layer_sum<S: InnovationSource + ?Sized>(&self, source: &S, level: usize, n: i64) -> f64 {
        let lag = self.n_seq[level];
        let mut s = 0.0;
        for i in 0..n {
            s += self.zeta_at(source, i, level) - self.zeta_at(source, i - lag, level);
        }
        self.alpha[level] * s
    }

    /// `Var(X_n) = Σ_k 2 α_k²`.
    pub fn marginal_variance(&self) -> f64 {
        self.alpha.iter().map(|a| 2.0 * a * a).sum()
    }
}

/// Labels in `{+1, −1, 0}` of ω under the nested interval partition.
///
/// A relative position `r ∈ (0, 1]` inside the current cell is carried from
/// level to level: the first `d_k/2` of the cell is `+1`, the next `d_k/2`
/// is `−1`, the rest is `0`.
pub fn interval_labels(omega: f64, d_seq: &[f64], k: usize) -> Result<Vec<i8>> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::Domain(format!("omega = {omega} outside (0, 1]")));
    }
    if k > d_seq.len() {
        return Err(Error::Domain(format!("requested {k} levels but only {} d_k given", d_seq.len())));
    }
    if let Some(d) = d_seq[..k].iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(Error::Domain(format!("d_k = {d} outside (0, 1]")));
    }
    Ok(labels_unchecked(omega, &d_seq[..k]).into_vec())
}

fn labels_unchecked(omega: f64, d_seq: &[f64]) -> SmallVec<[i8; 8]> {
    let mut r = omega;
    let mut out = SmallVec::with_capacity(d_seq.len());
    for &d in d_seq {
        let half = d / 2.0;
        if r <= half {
            out.push(1);
            r /= half;
        } else if r <= d {
            out.push(-1);
            r = (r - half) / half;
        } else {
            // unreachable when d == 1
            out.push(0);
            r = (r - d) / (1.0 - d);
        }
        r = r.clamp(f64::MIN_POSITIVE, 1.0);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldModel {
    Kernel(KernelField),
    Volterra(VolterraField),
    Difference(DifferenceField),
    Interval(IntervalModel),
}

impl FieldModel {
    pub fn kernel(kernel: Kernel, innovation: InnovationField) -> Result<Self> {
        if kernel.dim() != innovation.dim {
            return Err(Error::DimensionMismatch { expected: innovation.dim, got: kernel.dim() });
        }
        if !innovation.spec.is_centered() {
            return Err(Error::Config("kernel fields need centered innovations".into()));
        }
        Ok(FieldModel::Kernel(KernelField { kernel, innovation }))
    }

    pub fn volterra(
        linear: Kernel,
        pairs: Vec<(Vec<i64>, Vec<i64>, f64)>,
        innovation: InnovationField,
    ) -> Result<Self> {
        let dim = innovation.dim;
        if linear.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: linear.dim() });
        }
        if !innovation.spec.is_centered() {
            return Err(Error::Config("Volterra fields need centered innovations".into()));
        }
        let mut out = Vec::with_capacity(pairs.len());
        for (k, l, c) in pairs {
            if k.len() != dim || l.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: k.len().max(l.len()) });
            }
            if k == l {
                return Err(Error::Config(format!(
                    "second-order pair with k = l = {k:?} is not centered; diagonal terms are rejected"
                )));
            }
            out.push((LatticePoint(k), LatticePoint(l), c));
        }
        Ok(FieldModel::Volterra(VolterraField { linear, pairs: out, innovation }))
    }

    pub fn difference(innovation: InnovationField) -> Result<Self> {
        if innovation.dim != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: innovation.dim });
        }
        if !innovation.spec.is_centered() {
            return Err(Error::Config("difference field needs centered innovations".into()));
        }
        Ok(FieldModel::Difference(DifferenceField { innovation }))
    }

    pub fn dim(&self) -> usize {
        self.innovation().dim
    }

    pub fn innovation(&self) -> &InnovationField {
        match self {
            FieldModel::Kernel(m) => &m.innovation,
            FieldModel::Volterra(m) => &m.innovation,
            FieldModel::Difference(m) => &m.innovation,
            FieldModel::Interval(m) => &m.omega,
        }
    }

    pub fn with_innovation(&self, innovation: InnovationField) -> Self {
        let mut out = self.clone();
        match &mut out {
            FieldModel::Kernel(m) => m.innovation = innovation,
            FieldModel::Volterra(m) => m.innovation = innovation,
            FieldModel::Difference(m) => m.innovation = innovation,
            FieldModel::Interval(m) => m.omega = innovation,
        }
        out
    }

    pub fn reseeded(&self, seed: u64) -> Self {
        self.with_innovation(self.innovation().reseeded(seed))
    }

    pub fn star_copy(&self) -> Self {
        self.with_innovation(self.innovation().star_copy())
    }

    pub fn evaluate(&self, site: &[i64]) -> Result<f64> {
        self.innovation().check_site(site)?;
        Ok(self.evaluate_with(self.innovation(), site))
    }

    /// `X_site` computed from an arbitrary innovation source.
    #[inline]
    pub fn evaluate_with<S: InnovationSource + ?Sized>(&self, source: &S, site: &[i64]) -> f64 {
        match self {
            FieldModel::Kernel(m) => m.kernel.apply(source, site),
            FieldModel::Volterra(m) => {
                let mut x = m.linear.apply(source, site);
                for (k, l, c) in &m.pairs {
                    x += c
                        * source.innovation(&shifted(site, &k.0))
                        * source.innovation(&shifted(site, &l.0));
                }
                x
            }
            FieldModel::Difference(_) => {
                source.innovation(&[site[0]]) - source.innovation(&[site[0] - 1])
            }
            FieldModel::Interval(m) => m.evaluate_with(source, site[0]),
        }
    }

    /// `X*_site`, the field rebuilt on the star-coupled innovations.
    pub fn star_evaluate(&self, site: &[i64]) -> Result<f64> {
        self.star_copy().evaluate(site)
    }

    /// `E(X_j | ε_i : |i − j|_∞ ≤ m)`, available in closed form for the
    /// kernel, Volterra and difference families.
    pub fn m_truncate(&self, m: i64) -> Result<FieldModel> {
        if m < 0 {
            return Err(Error::Domain(format!("truncation level {m} is negative")));
        }
        match self {
            FieldModel::Kernel(f) => Ok(FieldModel::Kernel(KernelField {
                kernel: f.kernel.truncated(m),
                innovation: f.innovation.clone(),
            })),
            FieldModel::Volterra(f) => Ok(FieldModel::Volterra(VolterraField {
                linear: f.linear.truncated(m),
                pairs: f
                    .pairs
                    .iter()
                    .filter(|(k, l, _)| k.sup_norm() <= m && l.sup_norm() <= m)
                    .cloned()
                    .collect(),
                innovation: f.innovation.clone(),
            })),
            FieldModel::Difference(f) => {
                if m >= 1 {
                    Ok(self.clone())
                } else {
                    Ok(FieldModel::Kernel(KernelField {
                        kernel: Kernel::identity(1),
                        innovation: f.innovation.clone(),
                    }))
                }
            }
            FieldModel::Interval(_) => Err(Error::Unsupported(
                "m-truncation has no closed form for the interval-construction model".into(),
            )),
        }
    }

    /// The coefficient array for the linear families.
    pub fn as_kernel(&self) -> Option<Kernel> {
        match self {
            FieldModel::Kernel(m) => Some(m.kernel.clone()),
            FieldModel::Difference(_) => Some(Kernel {
                dim: 1,
                terms: vec![(LatticePoint(vec![0]), 1.0), (LatticePoint(vec![1]), -1.0)],
            }),
            _ => None,
        }
    }

    /// Offsets `k` such that `X_j` reads `ε_{j−k}`.
    pub fn dependence_offsets(&self) -> Vec<LatticePoint> {
        let mut out: Vec<LatticePoint> = match self {
            FieldModel::Kernel(m) => m.kernel.terms.iter().map(|(k, _)| k.clone()).collect(),
            FieldModel::Volterra(m) => {
                let mut v: Vec<LatticePoint> = m.linear.terms.iter().map(|(k, _)| k.clone()).collect();
                for (k, l, _) in &m.pairs {
                    v.push(k.clone());
                    v.push(l.clone());
                }
                v
            }
            FieldModel::Difference(_) => vec![LatticePoint(vec![0]), LatticePoint(vec![1])],
            FieldModel::Interval(m) => {
                let mut v = vec![LatticePoint(vec![0])];
                v.extend(m.n_seq.iter().map(|n| LatticePoint(vec![*n])));
                v
            }
        };
        out.sort();
        out.dedup();
        out
    }

    /// `max |k|_∞` over [`Self::dependence_offsets`].
    pub fn dependence_radius(&self) -> i64 {
        self.dependence_offsets().iter().map(|k| sup_norm(&k.0)).max().unwrap_or(0)
    }

    /// Largest lag `|j|_∞` at which `Cov(X_0, X_j)` can be nonzero: the
    /// sup-norm diameter of [`Self::dependence_offsets`].
    pub fn covariance_radius(&self) -> i64 {
        let offs = self.dependence_offsets();
        offs.iter()
            .flat_map(|a| offs.iter().map(move |b| a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)))
            .max()
            .unwrap_or(0)
    }

    pub fn family(&self) -> &'static str {
        match self {
            FieldModel::Kernel(_) => "kernel",
            FieldModel::Volterra(_) => "volterra",
            FieldModel::Difference(_) => "difference",
            FieldModel::Interval(_) => "interval",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rad(dim: usize, seed: u64) -> InnovationField {
        InnovationField::new(InnovationSpec::Rademacher, dim, seed).unwrap()
    }

    #[test]
    fn identity_kernel_returns_innovation() {
        let f = rad(1, 5);
        let m = FieldModel::kernel(Kernel::identity(1), f.clone()).unwrap();
        for j in -10..10 {
            let x = m.evaluate(&[j]).unwrap();
            assert_eq!(x, f.value(&[j]).unwrap());
            assert!(x == 1.0 || x == -1.0);
        }
    }

    #[test]
    fn difference_with_tied_override_vanishes() {
        let f = rad(1, 9);
        let prev = f.value(&[2]).unwrap();
        let f = f.with_override(LatticePoint::new(vec![3]), prev).unwrap();
        let m = FieldModel::difference(f).unwrap();
        assert_eq!(m.evaluate(&[3]).unwrap(), 0.0);
    }

    #[test]
    fn two_term_kernel_2d() {
        let f = InnovationField::new(InnovationSpec::StandardGaussian, 2, 1).unwrap();
        let k = Kernel::new(2, vec![(vec![0, 0], 1.0), (vec![1, 0], 1.0)]).unwrap();
        let m = FieldModel::kernel(k, f.clone()).unwrap();
        let x = m.evaluate(&[4, -2]).unwrap();
        let expect = f.value(&[4, -2]).unwrap() + f.value(&[3, -2]).unwrap();
        assert_eq!(x, expect);
    }

    #[test]
    fn truncation_examples() {
        let f = rad(1, 0);
        let k = Kernel::new(1, vec![(vec![0], 1.0), (vec![2], 1.0)]).unwrap();
        let m = FieldModel::kernel(k.clone(), f.clone()).unwrap();
        assert_eq!(m.m_truncate(2).unwrap(), m);
        match m.m_truncate(1).unwrap() {
            FieldModel::Kernel(t) => {
                assert_eq!(t.kernel.terms().len(), 1);
                assert_eq!(t.kernel.coefficient(&[0]), 1.0);
                assert_eq!(t.innovation, f);
            }
            _ => panic!("expected kernel"),
        }
        let e1 = FieldModel::Interval(IntervalModel::preset(IntervalPreset::Small, 2, 0).unwrap());
        assert!(matches!(e1.m_truncate(3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn volterra_rejects_diagonal() {
        let r = FieldModel::volterra(Kernel::identity(1), vec![(vec![1], vec![1], 1.0)], rad(1, 0));
        assert!(r.is_err());
    }

    #[test]
    fn truncated_volterra_uses_only_window() {
        let m = FieldModel::volterra(
            Kernel::new(1, vec![(vec![0], 1.0), (vec![3], 0.5)]).unwrap(),
            vec![(vec![0], vec![1], 1.0), (vec![0], vec![4], 2.0)],
            rad(1, 2),
        )
        .unwrap();
        let t = m.m_truncate(1).unwrap();
        assert_eq!(t.dependence_radius(), 1);
        assert_eq!(m.dependence_radius(), 4);
        assert_eq!(m.covariance_radius(), 4);
    }

    #[test]
    fn covariance_radius_spans_two_sided_offsets() {
        let m = FieldModel::kernel(Kernel::new(1, vec![(vec![-1], 0.4), (vec![0], 1.0), (vec![2], 0.7)]).unwrap(), rad(1, 3)).unwrap();
        assert_eq!(m.dependence_radius(), 2);
        assert_eq!(m.covariance_radius(), 3);
    }

    #[test]
    fn labels_first_split() {
        assert_eq!(interval_labels(0.25, &[1.0], 1).unwrap(), vec![1]);
        assert_eq!(interval_labels(0.75, &[1.0], 1).unwrap(), vec![-1]);
        assert_eq!(interval_labels(1.0, &[1.0, 1.0], 2).unwrap(), vec![-1, -1]);
        assert!(interval_labels(0.0, &[1.0], 1).is_err());
        assert!(interval_labels(1.5, &[1.0], 1).is_err());
        assert!(interval_labels(0.5, &[0.0], 1).is_err());
        // third branch
        assert_eq!(interval_labels(0.9, &[0.5, 1.0], 2).unwrap(), vec![0, -1]);
        assert_eq!(interval_labels(0.6, &[0.5, 1.0], 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn labels_match_interval_partition() {
        // level-2 cells of the explicit partition for d = (1/2, 1/4)
        let d = [0.5, 0.25];
        let cells: [((f64, f64), [i8; 2]); 8] = [
            ((0.0, 0.03125), [1, 1]),
            ((0.03125, 0.0625), [1, -1]),
            ((0.0625, 0.25), [1, 0]),
            ((0.25, 0.28125), [-1, 1]),
            ((0.3125, 0.5), [-1, 0]),
            ((0.5, 0.5625), [0, 1]),
            ((0.5625, 0.625), [0, -1]),
            ((0.625, 1.0), [0, 0]),
        ];
        for ((lo, hi), expect) in cells {
            let mid = 0.5 * (lo + hi);
            assert_eq!(interval_labels(mid, &d, 2).unwrap(), expect.to_vec(), "omega {mid}");
        }
    }

    #[test]
    fn interval_single_layer_support() {
        let m = IntervalModel::new(vec![0.5], vec![3], vec![1.0], 17).unwrap();
        let model = FieldModel::Interval(m);
        for n in 0..200 {
            let x = model.evaluate(&[n]).unwrap();
            assert!([-1.0, 0.0, 1.0].contains(&x), "{x}");
        }
    }

    #[test]
    fn kernel_star_difference_is_local() {
        let f = InnovationField::new(InnovationSpec::StandardGaussian, 2, 4).unwrap();
        let k = Kernel::new(2, vec![(vec![0, 0], 1.0), (vec![1, 0], -0.5), (vec![1, 1], 0.25)]).unwrap();
        let m = FieldModel::kernel(k.clone(), f.clone()).unwrap();
        let s = m.star_copy();
        let diff0 = f.value(&[0, 0]).unwrap() - s.innovation().value(&[0, 0]).unwrap();
        for i in -2..=3 {
            for j in -2..=3 {
                let d = m.evaluate(&[i, j]).unwrap() - s.evaluate(&[i, j]).unwrap();
                let expect = k.coefficient(&[i, j]) * diff0;
                assert!((d - expect).abs() < 1e-12);
            }
        }
        assert_eq!(m.star_evaluate(&[5, 5]).unwrap(), m.evaluate(&[5, 5]).unwrap());
    }

    #[test]
    fn presets() {
        let p = IntervalModel::preset(IntervalPreset::Full, 2, 0).unwrap();
        assert_eq!(p.n_seq, vec![8, 4096]);
        assert_eq!(p.alpha, vec![0.5, 1.0 / 16.0]);
        assert_eq!(p.d_seq, vec![1.0 / 8.0, 1.0]);
        let s = IntervalModel::preset(IntervalPreset::Small, 3, 0).unwrap();
        assert_eq!(s.n_seq, vec![16, 64, 256]);
        assert_eq!(s.d_seq, vec![1.0 / 16.0, 1.0, 1.0 / 256.0]);
        assert!(IntervalModel::preset(IntervalPreset::Full, 4, 0).is_err());
    }
}

//! Coefficient families `{b_{n,j}}` and the diagnostics attached to them.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::LatticePoint;
use crate::stats::linear_fit;

/// `⌊n t⌋` with a small guard against products such as `10 × 0.7 = 6.999…`.
pub fn scaled_floor(n: u64, t: f64) -> i64 {
    (n as f64 * t + 1e-9).floor().max(0.0) as i64
}

/// `b_{n,j}(t) = 1` iff `1 ≤ j_q ≤ ⌊n t_q⌋` for every axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleWeights {
    pub n: u64,
    pub t: Vec<f64>,
}

impl RectangleWeights {
    pub fn new(n: u64, t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::Config("rectangle needs at least one axis".into()));
        }
        if t.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Domain(format!("t = {t:?} outside [0,1]^d")));
        }
        Ok(RectangleWeights { n, t })
    }

    pub fn full(n: u64, dim: usize) -> Self {
        RectangleWeights { n, t: vec![1.0; dim] }
    }

    pub fn extents(&self) -> Vec<i64> {
        self.t.iter().map(|&t| scaled_floor(self.n, t)).collect()
    }
}

/// Indicator of an explicit finite set `Γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexSetWeights {
    pub dim: usize,
    pub gamma: Vec<LatticePoint>,
}

impl IndexSetWeights {
    pub fn new(dim: usize, points: Vec<LatticePoint>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
        }
        let set: BTreeSet<LatticePoint> = points.into_iter().collect();
        Ok(IndexSetWeights { dim, gamma: set.into_iter().collect() })
    }

    pub fn from_1d(points: &[i64]) -> Self {
        let set: BTreeSet<i64> = points.iter().copied().collect();
        IndexSetWeights { dim: 1, gamma: set.into_iter().map(|p| LatticePoint(vec![p])).collect() }
    }

    /// `{0, 1, …, n−1}`.
    pub fn contiguous(n: i64) -> Self {
        Self::from_1d(&(0..n).collect::<Vec<_>>())
    }
}

/// Absolutely continuous product measure with density `Π_q |x_q|^{γ_q}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerMeasure {
    pub gamma: Vec<f64>,
}

impl PowerMeasure {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() || gamma.iter().any(|g| !(*g > -1.0)) {
            return Err(Error::Domain(format!("power exponents {gamma:?} must exceed -1")));
        }
        Ok(PowerMeasure { gamma })
    }

    pub fn lebesgue(dim: usize) -> Self {
        PowerMeasure { gamma: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Self-similarity index `β = Σ_q (γ_q + 1)`.
    pub fn beta(&self) -> f64 {
        self.gamma.iter().map(|g| g + 1.0).sum()
    }

    /// `∫_a^b |x|^γ dx` through the sign-aware antiderivative.
    pub fn axis_mass(gamma: f64, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let g = |x: f64| x.signum() * x.abs().powf(gamma + 1.0) / (gamma + 1.0);
        g(b) - g(a)
    }

    pub fn box_mass(&self, b: &Cuboid) -> f64 {
        self.gamma
            .iter()
            .zip(b.lo.iter().zip(&b.hi))
            .map(|(&g, (&lo, &hi))| Self::axis_mass(g, lo, hi))
            .product()
    }

    pub fn region_mass(&self, region: &Region) -> f64 {
        region.boxes.iter().map(|b| self.box_mass(b)).sum()
    }

    /// `μ(A ∩ B)` for two regions.
    pub fn intersection_mass(&self, a: &Region, b: &Region) -> f64 {
        let mut total = 0.0;
        for x in &a.boxes {
            for y in &b.boxes {
                if let Some(z) = x.intersect(y) {
                    total += self.box_mass(&z);
                }
            }
        }
        total
    }
}

/// Axis-aligned box `Π_q [lo_q, hi_q]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cuboid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Config("box corners must have equal, nonzero dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Domain(format!("degenerate box {lo:?} .. {hi:?}")));
        }
        Ok(Cuboid { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn intersect(&self, other: &Cuboid) -> Option<Cuboid> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).all(|(a, b)| a < b) {
            Some(Cuboid { lo, hi })
        } else {
            None
        }
    }

    fn scaled(&self, n: f64) -> Cuboid {
        Cuboid {
            lo: self.lo.iter().map(|x| x * n).collect(),
            hi: self.hi.iter().map(|x| x * n).collect(),
        }
    }
}

/// Finite union of interior-disjoint boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub boxes: Vec<Cuboid>,
}

impl Region {
    pub fn new(boxes: Vec<Cuboid>) -> Result<Self> {
        let dim = boxes.first().map(Cuboid::dim).ok_or_else(|| Error::Config("empty region".into()))?;
        if let Some(b) = boxes.iter().find(|b| b.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: b.dim() });
        }
        for (i, a) in boxes.iter().enumerate() {
            for b in &boxes[i + 1..] {
                if a.intersect(b).is_some() {
                    return Err(Error::Config("region boxes must be interior-disjoint".into()));
                }
            }
        }
        Ok(Region { boxes })
    }

    pub fn single(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Region::new(vec![Cuboid::new(lo, hi)?])
    }

    pub fn dim(&self) -> usize {
        self.boxes[0].dim()
    }
}

/// `b_{n,j}(A) = μ(nA ∩ R_j)^{1/2}`, `R_j` the unit cube with lower corner `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetIndexedWeights {
    pub measure: PowerMeasure,
    pub region: Region,
    pub n: u64,
}

impl SetIndexedWeights {
    pub fn new(measure: PowerMeasure, region: Region, n: u64) -> Result<Self> {
        if measure.dim() != region.dim() {
            return Err(Error::DimensionMismatch { expected: measure.dim(), got: region.dim() });
        }
        Ok(SetIndexedWeights { measure, region, n })
    }

    /// `μ(nA ∩ R_j)`.
    pub fn cube_mass(&self, j: &[i64]) -> f64 {
        let n = self.n as f64;
        let cube = Cuboid {
            lo: j.iter().map(|&c| c as f64).collect(),
            hi: j.iter().map(|&c| c as f64 + 1.0).collect(),
        };
        self.region
            .boxes
            .iter()
            .filter_map(|b| b.scaled(n).intersect(&cube))
            .map(|z| self.measure.box_mass(&z))
            .sum()
    }

    /// `n^β μ(A)`.
    pub fn scaled_mass(&self) -> f64 {
        (self.n as f64).powf(self.measure.beta()) * self.measure.region_mass(&self.region)
    }

    fn index_ranges(&self) -> Vec<(i64, i64)> {
        let n = self.n as f64;
        (0..self.measure.dim())
            .map(|q| {
                let lo = self.region.boxes.iter().map(|b| (b.lo[q] * n).floor() as i64).min().unwrap();
                let hi = self.region.boxes.iter().map(|b| (b.hi[q] * n).ceil() as i64 - 1).max().unwrap();
                (lo, hi)
            })
            .collect()
    }
}

/// One-dimensional finite-support kernel `a^(q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisKernel {
    pub terms: Vec<(i64, f64)>,
}

impl AxisKernel {
    pub fn new(mut terms: Vec<(i64, f64)>) -> Result<Self> {
        terms.sort_by_key(|t| t.0);
        if terms.is_empty() || terms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("axis kernel needs distinct offsets".into()));
        }
        if terms.iter().all(|t| t.1 == 0.0) {
            return Err(Error::Config("axis kernel is identically zero".into()));
        }
        Ok(AxisKernel { terms })
    }

    pub fn identity() -> Self {
        AxisKernel { terms: vec![(1, 1.0)] }
    }

    /// `a_i = i^{H − 3/2}` for `1 ≤ i ≤ len`.
    pub fn fractional(hurst: f64, len: i64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) || len < 1 {
            return Err(Error::Domain(format!("fractional kernel needs H in (0,1), L >= 1 (H={hurst}, L={len})")));
        }
        AxisKernel::new((1..=len).map(|i| (i, (i as f64).powf(hurst - 1.5))).collect())
    }

    /// `(j, b_{m,j})` for `b_{m,j} = Σ_{i=1}^m a_{i−j}`, over the nonzero range.
    pub fn partial_sums(&self, m: i64) -> Vec<(i64, f64)> {
        if m <= 0 {
            return Vec::new();
        }
        let lo = self.terms.first().unwrap().0;
        let hi = self.terms.last().unwrap().0;
        let width = (hi - lo + 1) as usize;
        let mut dense = vec![0.0; width];
        for (o, a) in &self.terms {
            dense[(o - lo) as usize] = *a;
        }
        let mut prefix = vec![0.0; width + 1];
        for i in 0..width {
            prefix[i + 1] = prefix[i] + dense[i];
        }
        // b_{m,j} = Σ_{o = max(1−j, lo)}^{min(m−j, hi)} a_o
        (1 - hi..=m - lo)
            .map(|j| {
                let a = (1 - j).max(lo);
                let b = (m - j).min(hi);
                let v = if b < a { 0.0 } else { prefix[(b - lo + 1) as usize] - prefix[(a - lo) as usize] };
                (j, v)
            })
            .collect()
    }

    /// `b_m² = Σ_j b_{m,j}²`.
    pub fn norm_sq(&self, m: i64) -> f64 {
        self.partial_sums(m).iter().map(|(_, v)| v * v).sum()
    }
}

/// `b_{n,j}(t) = Π_q b^(q)_{⌊n t_q⌋, j_q}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductLinearWeights {
    pub kernels: Vec<AxisKernel>,
    pub n: u64,
    pub t: Vec<f64>,
}

impl ProductLinearWeights {
    pub fn new(kernels: Vec<AxisKernel>, n: u64, t: Vec<f64>) -> Result<Self> {
        if kernels.len() != t.len() || kernels.is_empty() {
            return Err(Error::Config("need one axis kernel per coordinate of t".into()));
        }
        if t.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Domain(format!("t = {t:?} outside [0,1]^d")));
        }
        Ok(ProductLinearWeights { kernels, n, t })
    }

    fn axis_profiles(&self) -> Vec<Vec<(i64, f64)>> {
        self.kernels
            .iter()
            .zip(&self.t)
            .map(|(k, &t)| k.partial_sums(scaled_floor(self.n, t)))
            .collect()
    }
}

/// Arbitrary finite coefficient list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitWeights {
    pub dim: usize,
    pub coefficients: Vec<(LatticePoint, f64)>,
}

impl ExplicitWeights {
    pub fn new(dim: usize, coefficients: Vec<(LatticePoint, f64)>) -> Result<Self> {
        let mut merged: HashMap<LatticePoint, f64> = HashMap::new();
        for (p, c) in coefficients {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
            }
            *merged.entry(p).or_insert(0.0) += c;
        }
        let mut coefficients: Vec<_> = merged.into_iter().collect();
        coefficients.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(ExplicitWeights { dim, coefficients })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeightScheme {
    Rectangle(RectangleWeights),
    IndexSet(IndexSetWeights),
    SetIndexed(SetIndexedWeights),
    ProductLinear(ProductLinearWeights),
    Explicit(ExplicitWeights),
}

impl WeightScheme {
    pub fn dim(&self) -> usize {
        match self {
            WeightScheme::Rectangle(w) => w.t.len(),
            WeightScheme::IndexSet(w) => w.dim,
            WeightScheme::SetIndexed(w) => w.measure.dim(),
            WeightScheme::ProductLinear(w) => w.t.len(),
            WeightScheme::Explicit(w) => w.dim,
        }
    }

    /// Streams the nonzero `(j, b_{n,j})` pairs in lexicographic order.
    pub fn for_each<F: FnMut(&[i64], f64)>(&self, mut f: F) {
        match self {
            WeightScheme::Rectangle(w) => {
                let ext = w.extents();
                if ext.iter().any(|&e| e <= 0) {
                    return;
                }
                for_each_in_box(&ext.iter().map(|&e| (1, e)).collect::<Vec<_>>(), |j| f(j, 1.0));
            }
            WeightScheme::IndexSet(w) => {
                for p in &w.gamma {
                    f(&p.0, 1.0);
                }
            }
            WeightScheme::SetIndexed(w) => {
                for_each_in_box(&w.index_ranges(), |j| {
                    let m = w.cube_mass(j);
                    if m > 0.0 {
                        f(j, m.sqrt());
                    }
                });
            }
            WeightScheme::ProductLinear(w) => {
                let profiles = w.axis_profiles();
                if profiles.iter().any(|p| p.is_empty()) {
                    return;
                }
                let ranges: Vec<(i64, i64)> =
                    profiles.iter().map(|p| (0, p.len() as i64 - 1)).collect();
                let mut site = vec![0i64; profiles.len()];
                for_each_in_box(&ranges, |idx| {
                    let mut v = 1.0;
                    for (q, &i) in idx.iter().enumerate() {
                        let (j, b) = profiles[q][i as usize];
                        site[q] = j;
                        v *= b;
                    }
                    if v != 0.0 {
                        f(&site, v);
                    }
                });
            }
            WeightScheme::Explicit(w) => {
                for (p, c) in &w.coefficients {
                    if *c != 0.0 {
                        f(&p.0, *c);
                    }
                }
            }
        }
    }

    pub fn coefficients(&self) -> Vec<(LatticePoint, f64)> {
        let mut out = Vec::new();
        self.for_each(|j, b| out.push((LatticePoint(j.to_vec()), b)));
        out
    }

    fn coefficient_map(&self) -> HashMap<LatticePoint, f64> {
        self.coefficients().into_iter().collect()
    }

    /// `b_{n,j}`, zero outside the support.
    pub fn coefficient(&self, j: &[i64]) -> f64 {
        match self {
            WeightScheme::Rectangle(w) => {
                let inside = j.len() == w.t.len()
                    && w.extents().iter().zip(j).all(|(&e, &c)| c >= 1 && c <= e);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            WeightScheme::IndexSet(w) => {
                if w.gamma.binary_search_by(|p| p.0.as_slice().cmp(j)).is_ok() {
                    1.0
                } else {
                    0.0
                }
            }
            WeightScheme::SetIndexed(w) => w.cube_mass(j).sqrt(),
            WeightScheme::ProductLinear(w) => w
                .kernels
                .iter()
                .zip(&w.t)
                .zip(j)
                .map(|((k, &t), &c)| {
                    k.partial_sums(scaled_floor(w.n, t))
                        .iter()
                        .find(|(jj, _)| *jj == c)
                        .map(|(_, v)| *v)
                        .unwrap_or(0.0)
                })
                .product(),
            WeightScheme::Explicit(w) => w
                .coefficients
                .binary_search_by(|(p, _)| p.0.as_slice().cmp(j))
                .map(|i| w.coefficients[i].1)
                .unwrap_or(0.0),
        }
    }

    /// `b_n² = Σ_j b_{n,j}²`.
    pub fn norm_sq(&self) -> f64 {
        match self {
            WeightScheme::Rectangle(w) => w.extents().iter().map(|&e| e.max(0) as f64).product(),
            WeightScheme::IndexSet(w) => w.gamma.len() as f64,
            WeightScheme::ProductLinear(w) => w
                .kernels
                .iter()
                .zip(&w.t)
                .map(|(k, &t)| k.norm_sq(scaled_floor(w.n, t)))
                .product(),
            _ => {
                let mut s = 0.0;
                self.for_each(|_, b| s += b * b);
                s
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `sup_j |b_{n,j}| / b_n`.
    pub fn check_negligibility(&self) -> Result<f64> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateScheme);
        }
        let mut sup: f64 = 0.0;
        self.for_each(|_, b| sup = sup.max(b.abs()));
        Ok(sup / norm)
    }

    /// `Σ_k b_{n,k} b_{n,k+h}`.
    pub fn overlap(&self, h: &[i64]) -> f64 {
        let map = self.coefficient_map();
        let mut s = 0.0;
        for (k, b) in &map {
            let shifted: Vec<i64> = k.0.iter().zip(h).map(|(a, c)| a + c).collect();
            if let Some(v) = map.get(shifted.as_slice()) {
                s += b * v;
            }
        }
        s
    }

    /// `‖T_h b − b‖²_{ℓ²}` with `(T_h b)_j = b_{j+h}`.
    pub fn shift_norm_sq(&self, h: &[i64]) -> f64 {
        let map = self.coefficient_map();
        let mut s = 0.0;
        for (k, b) in &map {
            let back: Vec<i64> = k.0.iter().zip(h).map(|(a, c)| a - c).collect();
            let fwd: Vec<i64> = k.0.iter().zip(h).map(|(a, c)| a + c).collect();
            // j = k − h contributes (b_k − b_{k−h})²; sites with b_j = 0 but b_{j+h} ≠ 0 are covered here
            let prev = map.get(back.as_slice()).copied().unwrap_or(0.0);
            s += (b - prev).powi(2);
            // j = k with b_{k+h} = 0 and b_k ≠ 0
            if !map.contains_key(fwd.as_slice()) {
                s += b * b;
            }
        }
        s
    }

    fn unit(&self, q: usize) -> Result<Vec<i64>> {
        if q >= self.dim() {
            return Err(Error::Domain(format!("axis {q} out of range for d = {}", self.dim())));
        }
        let mut e = vec![0i64; self.dim()];
        e[q] = 1;
        Ok(e)
    }

    /// `‖T_{e_q} b − b‖_{ℓ²} / b_n`.
    pub fn check_shift_condition(&self, q: usize) -> Result<f64> {
        let e = self.unit(q)?;
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateScheme);
        }
        Ok(self.shift_norm_sq(&e).sqrt() / norm)
    }

    /// `(1/b_n²) Σ_j |b²_{n,j+e_q} − b²_{n,j}|`.
    pub fn shift_square_variation(&self, q: usize) -> Result<f64> {
        let e = self.unit(q)?;
        let norm_sq = self.norm_sq();
        if norm_sq == 0.0 {
            return Err(Error::DegenerateScheme);
        }
        let map = self.coefficient_map();
        let mut sites: BTreeSet<Vec<i64>> = BTreeSet::new();
        for k in map.keys() {
            sites.insert(k.0.clone());
            sites.insert(k.0.iter().zip(&e).map(|(a, c)| a - c).collect());
        }
        let get = |j: &[i64]| map.get(j).copied().unwrap_or(0.0);
        let mut s = 0.0;
        for j in &sites {
            let fwd: Vec<i64> = j.iter().zip(&e).map(|(a, c)| a + c).collect();
            s += (get(&fwd).powi(2) - get(j).powi(2)).abs();
        }
        Ok(s / norm_sq)
    }

    /// Same family at a different scale; `None` for schemes without one.
    pub fn rescaled(&self, n: u64) -> Option<WeightScheme> {
        match self {
            WeightScheme::Rectangle(w) => Some(WeightScheme::Rectangle(RectangleWeights { n, ..w.clone() })),
            WeightScheme::SetIndexed(w) => Some(WeightScheme::SetIndexed(SetIndexedWeights { n, ..w.clone() })),
            WeightScheme::ProductLinear(w) => {
                Some(WeightScheme::ProductLinear(ProductLinearWeights { n, ..w.clone() }))
            }
            _ => None,
        }
    }

    pub fn scale(&self) -> Option<u64> {
        match self {
            WeightScheme::Rectangle(w) => Some(w.n),
            WeightScheme::SetIndexed(w) => Some(w.n),
            WeightScheme::ProductLinear(w) => Some(w.n),
            _ => None,
        }
    }
}

/// Calls `f` for every integer point of `Π_q [lo_q, hi_q]`, last axis fastest.
pub fn for_each_in_box<F: FnMut(&[i64])>(ranges: &[(i64, i64)], mut f: F) {
    if ranges.iter().any(|(lo, hi)| hi < lo) {
        return;
    }
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        f(&cur);
        let mut q = ranges.len();
        loop {
            if q == 0 {
                return;
            }
            q -= 1;
            if cur[q] < ranges[q].1 {
                cur[q] += 1;
                break;
            }
            cur[q] = ranges[q].0;
        }
    }
}

/// `|∂Γ| / |Γ|` with the ℓ∞ boundary `{i ∈ Γ : ∃ j ∉ Γ, |i − j|_∞ = 1}`.
pub fn boundary_ratio(gamma: &[LatticePoint]) -> Result<f64> {
    Ok(boundary_size(gamma)? as f64 / gamma.iter().collect::<BTreeSet<_>>().len() as f64)
}

pub fn boundary_size(gamma: &[LatticePoint]) -> Result<usize> {
    if gamma.is_empty() {
        return Err(Error::Domain("boundary ratio of an empty set".into()));
    }
    let dim = gamma[0].dim();
    let set: std::collections::HashSet<&[i64]> = gamma.iter().map(|p| p.0.as_slice()).collect();
    let ranges = vec![(-1i64, 1i64); dim];
    let mut count = 0;
    let mut nb = vec![0i64; dim];
    for p in set.iter() {
        let mut boundary = false;
        for_each_in_box(&ranges, |h| {
            if boundary || h.iter().all(|&c| c == 0) {
                return;
            }
            for q in 0..dim {
                nb[q] = p[q] + h[q];
            }
            if !set.contains(nb.as_slice()) {
                boundary = true;
            }
        });
        if boundary {
            count += 1;
        }
    }
    Ok(count)
}

/// Both sides of the shift/boundary comparison for indicator weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySandwich {
    /// `‖T_{e_q} Γ − Γ‖²` per axis.
    pub axis_shifts: Vec<f64>,
    /// `2 |∂Γ|`.
    pub twice_boundary: f64,
    /// every axis shift is at most `2|∂Γ|`
    pub lower_holds: bool,
    /// `2|∂Γ| ≤ Σ_q ‖T_{e_q} Γ − Γ‖²`
    pub upper_holds: bool,
}

pub fn boundary_sandwich(gamma: &IndexSetWeights) -> Result<BoundarySandwich> {
    let scheme = WeightScheme::IndexSet(gamma.clone());
    let axis_shifts: Vec<f64> = (0..gamma.dim)
        .map(|q| {
            let mut e = vec![0; gamma.dim];
            e[q] = 1;
            scheme.shift_norm_sq(&e)
        })
        .collect();
    let twice_boundary = 2.0 * boundary_size(&gamma.gamma)? as f64;
    Ok(BoundarySandwich {
        lower_holds: axis_shifts.iter().all(|&s| s <= twice_boundary),
        upper_holds: twice_boundary <= axis_shifts.iter().sum::<f64>(),
        axis_shifts,
        twice_boundary,
    })
}

/// The recursively built sets `Γ_1 ⊂ Γ_2 ⊂ …` on which `σ_n/b_n` oscillates.
///
/// `Γ_1 = {0, 1}` and `Γ_{n+1} = Γ_n ∪ B_n` where, with `a = max Γ_n`,
/// `B_n = {a+2, …, a+2^n+1}` for even n and `{a+2, a+4, …, a+2·2^n}` for odd n.
pub fn oscillating_blocks(n_max: u32) -> Vec<Vec<i64>> {
    let mut blocks = vec![vec![0i64, 1]];
    let mut a = 1i64;
    for n in 1..n_max {
        let len = 1i64 << n;
        let block: Vec<i64> = if n % 2 == 0 {
            (a + 2..=a + len + 1).collect()
        } else {
            (1..=len).map(|i| a + 2 * i).collect()
        };
        a = *block.last().unwrap();
        blocks.push(block);
    }
    blocks
}

/// `Γ_n` as a sorted vector.
pub fn oscillating_set(n: u32) -> Vec<i64> {
    assert!(n >= 1, "Γ_n is defined for n >= 1");
    oscillating_blocks(n).into_iter().flatten().collect()
}

/// Scaling profile `b²_{⌊ns⌋}(q) / b²_n(q)` and the fitted exponent `2H_q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstProfile {
    pub s: Vec<f64>,
    pub ratio: Vec<f64>,
    pub two_h: f64,
}

impl HurstProfile {
    pub fn hurst(&self) -> f64 {
        self.two_h / 2.0
    }
}

pub fn default_s_grid() -> Vec<f64> {
    (1..8).map(|i| i as f64 / 8.0).collect()
}

/// Least-squares slope of `log ratio` against `log s` over the grid.
pub fn hurst_scaling_profile(kernels: &[AxisKernel], q: usize, n: u64, s_grid: &[f64]) -> Result<HurstProfile> {
    let kernel = kernels
        .get(q)
        .ok_or_else(|| Error::Domain(format!("axis {q} out of range for {} kernels", kernels.len())))?;
    let base = kernel.norm_sq(n as i64);
    if base == 0.0 {
        return Err(Error::DegenerateScheme);
    }
    let ratio: Vec<f64> = s_grid.iter().map(|&s| kernel.norm_sq(scaled_floor(n, s)) / base).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = s_grid
        .iter()
        .zip(&ratio)
        .filter(|(s, r)| **s > 0.0 && **r > 0.0)
        .map(|(s, r)| (s.ln(), r.ln()))
        .unzip();
    let two_h = if lx.len() >= 2 { linear_fit(&lx, &ly).0 } else { f64::NAN };
    Ok(HurstProfile { s: s_grid.to_vec(), ratio, two_h })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[i64]) -> Vec<i64> {
        v.to_vec()
    }

    #[test]
    fn rectangle_coefficients_and_norm() {
        let w = WeightScheme::Rectangle(RectangleWeights::full(4, 2));
        assert_eq!(w.coefficient(&p(&[2, 3])), 1.0);
        assert_eq!(w.coefficient(&p(&[0, 3])), 0.0);
        assert_eq!(w.coefficient(&p(&[2, 5])), 0.0);
        assert_eq!(w.norm(), 4.0);
        assert!((w.check_negligibility().unwrap() - 0.25).abs() < 1e-15);
        let half = WeightScheme::Rectangle(RectangleWeights::new(10, vec![0.7, 0.3]).unwrap());
        assert_eq!(half.norm_sq(), 21.0);
    }

    #[test]
    fn set_indexed_lebesgue_cubes() {
        let w = WeightScheme::SetIndexed(
            SetIndexedWeights::new(
                PowerMeasure::lebesgue(2),
                Region::single(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
                3,
            )
            .unwrap(),
        );
        assert_eq!(w.coefficient(&p(&[1, 1])), 1.0);
        assert_eq!(w.coefficient(&p(&[3, 0])), 0.0);
        assert!((w.norm_sq() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn set_indexed_self_similarity() {
        let mu = PowerMeasure::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(mu.beta(), 3.0);
        let region = Region::single(vec![0.0, 0.25], vec![0.8, 1.0]).unwrap();
        for n in [1u64, 2, 5, 16, 64] {
            let w = SetIndexedWeights::new(mu.clone(), region.clone(), n).unwrap();
            let expect = (n as f64).powi(3) * mu.region_mass(&region);
            let got = WeightScheme::SetIndexed(w).norm_sq();
            assert!((got - expect).abs() <= 1e-10 * expect, "n={n}: {got} vs {expect}");
        }
    }

    #[test]
    fn signed_power_mass() {
        // ∫_{-1}^{2} |x| dx = 1/2 + 2
        assert!((PowerMeasure::axis_mass(1.0, -1.0, 2.0) - 2.5).abs() < 1e-15);
        // ∫_{-1}^{1} |x|^{-1/2} dx = 4
        assert!((PowerMeasure::axis_mass(-0.5, -1.0, 1.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn overlapping_boxes_rejected() {
        let a = Cuboid::new(vec![0.0], vec![0.6]).unwrap();
        let b = Cuboid::new(vec![0.5], vec![1.0]).unwrap();
        assert!(Region::new(vec![a.clone(), b]).is_err());
        let c = Cuboid::new(vec![0.6], vec![1.0]).unwrap();
        assert!(Region::new(vec![a, c]).is_ok());
    }

    #[test]
    fn index_set_norm_and_negligibility() {
        let w = WeightScheme::IndexSet(IndexSetWeights::contiguous(25));
        assert_eq!(w.norm_sq(), 25.0);
        assert!((w.check_negligibility().unwrap() - 0.2).abs() < 1e-15);
        let empty = WeightScheme::IndexSet(IndexSetWeights::from_1d(&[]));
        assert!(matches!(empty.check_negligibility(), Err(Error::DegenerateScheme)));
    }

    #[test]
    fn rectangle_shift_condition_1d() {
        for n in [4u64, 16, 100] {
            let w = WeightScheme::Rectangle(RectangleWeights::full(n, 1));
            let v = w.check_shift_condition(0).unwrap();
            assert!((v - 2f64.sqrt() / (n as f64).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_examples() {
        let line = IndexSetWeights::contiguous(10);
        assert!((boundary_ratio(&line.gamma).unwrap() - 0.2).abs() < 1e-15);
        let n = 7i64;
        let mut sq = Vec::new();
        for i in 0..n {
            for j in 0..n {
                sq.push(LatticePoint(vec![i, j]));
            }
        }
        let expect = (4 * n - 4) as f64 / (n * n) as f64;
        assert!((boundary_ratio(&sq).unwrap() - expect).abs() < 1e-15);
        assert!(boundary_ratio(&[]).is_err());
    }

    #[test]
    fn oscillating_sizes_and_structure() {
        for n in 1..=16u32 {
            assert_eq!(oscillating_set(n).len(), 1usize << n);
        }
        let blocks = oscillating_blocks(4);
        assert_eq!(blocks[0], vec![0, 1]);
        assert_eq!(blocks[1], vec![3, 5]); // n = 1 odd: a=1 → {3, 5}
        assert_eq!(blocks[2], vec![7, 8, 9, 10]); // n = 2 even: a=5 → {7..10}
        assert_eq!(blocks[3], vec![12, 14, 16, 18, 20, 22, 24, 26]);
    }

    #[test]
    fn oscillating_boundary_ratio_stays_large() {
        for n in 2..=14u32 {
            let g: Vec<LatticePoint> = oscillating_set(n).into_iter().map(|i| LatticePoint(vec![i])).collect();
            let r = boundary_ratio(&g).unwrap();
            assert!(r > 0.3, "n={n}: ratio {r}");
        }
    }

    #[test]
    fn partial_sums_of_identity_kernel() {
        let k = AxisKernel::identity();
        let b = k.partial_sums(5);
        let nz: Vec<_> = b.iter().filter(|(_, v)| *v != 0.0).collect();
        assert_eq!(nz.len(), 5);
        assert!(nz.iter().all(|(j, v)| *v == 1.0 && (0..5).contains(j)));
        // a_1 = 1 means b_{m,j} = 1 for 0 ≤ j ≤ m−1
        assert_eq!(k.norm_sq(5), 5.0);
    }

    #[test]
    fn hurst_identity_kernel_is_brownian() {
        let prof = hurst_scaling_profile(&[AxisKernel::identity()], 0, 1024, &default_s_grid()).unwrap();
        for (s, r) in prof.s.iter().zip(&prof.ratio) {
            assert!((r - s).abs() < 1e-12);
        }
        assert!((prof.two_h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negligibility_decreases_for_product_weights() {
        let k = AxisKernel::fractional(0.8, 64).unwrap();
        let vals: Vec<f64> = [8u64, 16, 32, 64]
            .iter()
            .map(|&n| {
                WeightScheme::ProductLinear(ProductLinearWeights::new(vec![k.clone()], n, vec![1.0]).unwrap())
                    .check_negligibility()
                    .unwrap()
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    }
}

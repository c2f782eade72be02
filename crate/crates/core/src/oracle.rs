//! Exact verification on finite probability spaces.
//!
//! A [`FiniteSpace`] places i.i.d. innovations with a finite law (Rademacher
//! by default) on a small window of sites and enumerates every outcome.
//! Random variables are plain vectors indexed by outcome, and conditional
//! expectations are computed by averaging out the non-measurable sites one
//! at a time, which is exact for product measures.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{IntervalModel, FieldModel, Kernel};
use crate::innovations::{InnovationField, InnovationSource, InnovationSpec, LatticePoint};
use crate::weights::for_each_in_box;

/// Hard cap on the number of enumerated outcomes.
pub const MAX_OUTCOMES: usize = 1 << 21;
/// Hard cap on the number of window sites.
pub const MAX_SITES: usize = 20;
/// Tolerance of every identity in the suite.
pub const TOLERANCE: f64 = 1e-12;

/// A function of the enumerated outcomes.
pub type Variable = Vec<f64>;

/// Sub-σ-fields generated by the innovations on a set of sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// `F_i = σ(ε_u : u ≤ i)`, componentwise order.
    Quadrant(Vec<i64>),
    /// `F^(q)_l = σ(ε_u : u_q ≤ l)`.
    HalfSpace { axis: usize, level: i64 },
    /// `G_j^(m) = σ(ε_u : |u − j|_∞ ≤ m)`.
    Block { center: Vec<i64>, m: i64 },
}

impl Selector {
    fn contains(&self, u: &[i64]) -> bool {
        match self {
            Selector::Quadrant(i) => u.iter().zip(i).all(|(a, b)| a <= b),
            Selector::HalfSpace { axis, level } => u[*axis] <= *level,
            Selector::Block { center, m } => u.iter().zip(center).all(|(a, b)| (a - b).abs() <= *m),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FiniteSpace {
    dim: usize,
    sites: Vec<LatticePoint>,
    index: HashMap<Vec<i64>, usize>,
    atoms: Vec<(f64, f64)>,
    probs: Vec<f64>,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl FiniteSpace {
    /// Sites carry i.i.d. copies of the finite law `atoms = [(value, prob)]`.
    pub fn new(sites: Vec<Vec<i64>>, atoms: Vec<(f64, f64)>) -> Result<Self> {
        let dim = sites.first().map(Vec::len).ok_or_else(|| Error::Config("empty window".into()))?;
        if let Some(s) = sites.iter().find(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: s.len() });
        }
        if sites.len() > MAX_SITES {
            return Err(Error::Config(format!("window of {} sites exceeds {MAX_SITES}", sites.len())));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.is_empty() || (total - 1.0).abs() > 1e-14 || atoms.iter().any(|a| a.1 < 0.0) {
            return Err(Error::Config("atom probabilities must be nonnegative and sum to 1".into()));
        }
        let outcomes = (atoms.len() as f64).powi(sites.len() as i32);
        if outcomes > MAX_OUTCOMES as f64 {
            return Err(Error::Config(format!("{outcomes} outcomes exceed the {MAX_OUTCOMES} limit")));
        }
        let mut sorted = sites;
        sorted.sort();
        sorted.dedup();
        let index = sorted.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let lo = (0..dim).map(|q| sorted.iter().map(|s| s[q]).min().unwrap()).collect();
        let hi = (0..dim).map(|q| sorted.iter().map(|s| s[q]).max().unwrap()).collect();
        let r = atoms.len();
        let n = sorted.len();
        let probs = (0..r.pow(n as u32))
            .map(|o| {
                let mut p = 1.0;
                let mut rest = o;
                for _ in 0..n {
                    p *= atoms[rest % r].1;
                    rest /= r;
                }
                p
            })
            .collect();
        Ok(FiniteSpace { dim, sites: sorted.into_iter().map(LatticePoint).collect(), index, atoms, probs, lo, hi })
    }

    /// Rademacher innovations on the integer box `[lo, hi]`.
    pub fn rademacher_box(lo: &[i64], hi: &[i64]) -> Result<Self> {
        let ranges: Vec<(i64, i64)> = lo.iter().copied().zip(hi.iter().copied()).collect();
        let mut sites = Vec::new();
        for_each_in_box(&ranges, |s| sites.push(s.to_vec()));
        FiniteSpace::new(sites, vec![(-1.0, 0.5), (1.0, 0.5)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sites(&self) -> &[LatticePoint] {
        &self.sites
    }

    pub fn outcomes(&self) -> usize {
        self.probs.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Bounding box of the window.
    pub fn bounds(&self) -> (Vec<i64>, Vec<i64>) {
        (self.lo.clone(), self.hi.clone())
    }

    fn digit(&self, outcome: usize, site: usize) -> usize {
        (outcome / self.atoms.len().pow(site as u32)) % self.atoms.len()
    }

    /// `ε_site` as a variable.
    pub fn innovation(&self, site: &[i64]) -> Result<Variable> {
        let s = *self.index.get(site).ok_or_else(|| Error::SiteOutsideWindow(format!("{site:?}")))?;
        Ok((0..self.outcomes()).map(|o| self.atoms[self.digit(o, s)].0).collect())
    }

    pub fn constant(&self, c: f64) -> Variable {
        vec![c; self.outcomes()]
    }

    pub fn expectation(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.probs).map(|(a, p)| a * p).sum()
    }

    /// `(E|Y|^p)^{1/p}`.
    pub fn norm(&self, y: &[f64], p: u32) -> f64 {
        y.iter().zip(&self.probs).map(|(a, pr)| pr * a.abs().powi(p as i32)).sum::<f64>().powf(1.0 / p as f64)
    }

    /// `X_site` for every outcome; fails if the model reads a site outside the window.
    pub fn evaluate(&self, model: &FieldModel, site: &[i64]) -> Result<Variable> {
        if site.len() != self.dim || model.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: site.len() });
        }
        let mut out = Vec::with_capacity(self.outcomes());
        for o in 0..self.outcomes() {
            let src = WindowSource { space: self, outcome: o, missing: RefCell::new(None) };
            out.push(model.evaluate_with(&src, site));
            if let Some(miss) = src.missing.into_inner() {
                return Err(Error::SiteOutsideWindow(format!("{miss:?} (needed by X at {site:?})")));
            }
        }
        Ok(out)
    }

    /// Sites `j` in the bounding box whose `X_j` reads only window innovations.
    pub fn computable_sites(&self, model: &FieldModel) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let ranges: Vec<(i64, i64)> = self.lo.iter().copied().zip(self.hi.iter().copied()).collect();
        for_each_in_box(&ranges, |j| {
            let src = WindowSource { space: self, outcome: 0, missing: RefCell::new(None) };
            model.evaluate_with(&src, j);
            if src.missing.into_inner().is_none() {
                out.push(j.to_vec());
            }
        });
        out
    }

    fn check_selector(&self, sel: &Selector) -> Result<()> {
        let inside = |q: usize, v: i64| v >= self.lo[q] - 1 && v <= self.hi[q] + 1;
        let ok = match sel {
            Selector::Quadrant(i) => i.len() == self.dim && i.iter().enumerate().all(|(q, &v)| inside(q, v)),
            Selector::HalfSpace { axis, level } => *axis < self.dim && inside(*axis, *level),
            Selector::Block { center, m } => {
                *m >= 0 && center.len() == self.dim && center.iter().enumerate().all(|(q, &v)| inside(q, v))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::SiteOutsideWindow(format!("selector {sel:?} outside window {:?}..{:?}", self.lo, self.hi)))
        }
    }

    /// `E(Y | σ)` for the σ-field named by the selector.
    pub fn conditional_expectation(&self, y: &[f64], sel: &Selector) -> Result<Variable> {
        self.check_selector(sel)?;
        let keep: Vec<bool> = self.sites.iter().map(|s| sel.contains(&s.0)).collect();
        Ok(self.average_out(y, &keep))
    }

    fn average_out(&self, y: &[f64], keep: &[bool]) -> Variable {
        let r = self.atoms.len();
        let mut cur = y.to_vec();
        for (s, &k) in keep.iter().enumerate() {
            if k {
                continue;
            }
            let stride = r.pow(s as u32);
            let block = stride * r;
            let mut next = vec![0.0; cur.len()];
            for base in (0..cur.len()).step_by(block) {
                for off in 0..stride {
                    let o = base + off;
                    let avg: f64 = (0..r).map(|a| self.atoms[a].1 * cur[o + a * stride]).sum();
                    for a in 0..r {
                        next[o + a * stride] = avg;
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// `P_j Y = Σ_{δ ∈ {0,1}^d} (−1)^{|δ|} E(Y | F_{j−δ})`.
    pub fn projection(&self, y: &[f64], j: &[i64]) -> Result<Variable> {
        let d = self.dim;
        let mut out = vec![0.0; y.len()];
        for mask in 0u32..(1 << d) {
            let cut: Vec<i64> = (0..d).map(|q| j[q] - ((mask >> q) & 1) as i64).collect();
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let e = self.conditional_expectation(y, &Selector::Quadrant(cut))?;
            for (o, v) in out.iter_mut().zip(e) {
                *o += sign * v;
            }
        }
        Ok(out)
    }

    fn box_sites(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let ranges: Vec<(i64, i64)> = self.lo.iter().copied().zip(self.hi.iter().copied()).collect();
        for_each_in_box(&ranges, |j| out.push(j.to_vec()));
        out
    }

    /// `Σ_j ‖P_j X_center‖_p`, which equals `Δ_p` by stationarity when the
    /// window holds every innovation `X_center` reads.
    pub fn delta_p(&self, model: &FieldModel, center: &[i64], p: u32) -> Result<f64> {
        let x = self.evaluate(model, center)?;
        let mut total = 0.0;
        for j in self.box_sites() {
            total += self.norm(&self.projection(&x, &j)?, p);
        }
        Ok(total)
    }
}

/// Innovation source reading one enumerated outcome.
struct WindowSource<'a> {
    space: &'a FiniteSpace,
    outcome: usize,
    missing: RefCell<Option<Vec<i64>>>,
}

impl InnovationSource for WindowSource<'_> {
    fn innovation(&self, site: &[i64]) -> f64 {
        match self.space.index.get(site) {
            Some(&s) => self.space.atoms[self.space.digit(self.outcome, s)].0,
            None => {
                self.missing.borrow_mut().get_or_insert_with(|| site.to_vec());
                0.0
            }
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `max |E[E(Y|F_i)|F_k] − E(Y|F_{i∧k})|`.
pub fn check_commuting(space: &FiniteSpace, y: &[f64], i: &[i64], k: &[i64]) -> Result<f64> {
    let inner = space.conditional_expectation(y, &Selector::Quadrant(i.to_vec()))?;
    let lhs = space.conditional_expectation(&inner, &Selector::Quadrant(k.to_vec()))?;
    let meet: Vec<i64> = i.iter().zip(k).map(|(a, b)| *a.min(b)).collect();
    let rhs = space.conditional_expectation(y, &Selector::Quadrant(meet))?;
    Ok(max_abs_diff(&lhs, &rhs))
}

/// `max |Y − Σ_j P_j Y|` over the window's bounding box.
pub fn check_decomposition(space: &FiniteSpace, y: &[f64]) -> Result<f64> {
    let mean = space.expectation(y);
    if mean.abs() > TOLERANCE {
        return Err(Error::NonCentered(mean));
    }
    let mut sum = vec![0.0; y.len()];
    for j in space.box_sites() {
        for (s, v) in sum.iter_mut().zip(space.projection(y, &j)?) {
            *s += v;
        }
    }
    Ok(max_abs_diff(y, &sum))
}

/// `max_{j ≠ k} |E[(P_j Y)(P_k Z)]|`.
pub fn check_orthogonality(space: &FiniteSpace, y: &[f64], z: &[f64]) -> Result<f64> {
    let sites = space.box_sites();
    let py: Vec<Variable> = sites.iter().map(|j| space.projection(y, j)).collect::<Result<_>>()?;
    let pz: Vec<Variable> = sites.iter().map(|j| space.projection(z, j)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for a in 0..sites.len() {
        for b in 0..sites.len() {
            if a != b {
                let prod: Vec<f64> = py[a].iter().zip(&pz[b]).map(|(u, v)| u * v).collect();
                worst = worst.max(space.expectation(&prod).abs());
            }
        }
    }
    Ok(worst)
}

/// `max_s |P_s X_j^(m) − E(P_s X_j | G_j^(m))|` over the bounding box.
pub fn check_truncated_projection(space: &FiniteSpace, model: &FieldModel, j: &[i64], m: i64) -> Result<f64> {
    let x = space.evaluate(model, j)?;
    let xm = space.evaluate(&model.m_truncate(m)?, j)?;
    let block = Selector::Block { center: j.to_vec(), m };
    let mut worst = max_abs_diff(&xm, &space.conditional_expectation(&x, &block)?);
    for s in space.box_sites() {
        let lhs = space.projection(&xm, &s)?;
        let rhs = space.conditional_expectation(&space.projection(&x, &s)?, &block)?;
        worst = worst.max(max_abs_diff(&lhs, &rhs));
    }
    Ok(worst)
}

/// Both sides of `‖Σ_i a_i X_i‖_p ≤ (p−1)^{d/2} (Σ a_i²)^{1/2} Δ_p`.
pub fn check_moment_inequality(
    space: &FiniteSpace,
    model: &FieldModel,
    weights: &[(Vec<i64>, f64)],
    center: &[i64],
    p: u32,
) -> Result<(f64, f64)> {
    if !matches!(p, 2 | 4 | 6) {
        return Err(Error::UnsupportedMomentOrder { p, supported: vec![2, 4, 6] });
    }
    let mut s = vec![0.0; space.outcomes()];
    for (i, a) in weights {
        for (acc, v) in s.iter_mut().zip(space.evaluate(model, i)?) {
            *acc += a * v;
        }
    }
    let lhs = space.norm(&s, p);
    let c = ((p - 1) as f64).powf(space.dim as f64 / 2.0);
    let a2: f64 = weights.iter().map(|(_, a)| a * a).sum();
    Ok((lhs, c * a2.sqrt() * space.delta_p(model, center, p)?))
}

/// `(Σ_j |Cov(X_c, X_j)|, Δ_2²)` over every computable `j`.
pub fn check_covariance_bound(space: &FiniteSpace, model: &FieldModel, center: &[i64]) -> Result<(f64, f64)> {
    let x0 = space.evaluate(model, center)?;
    let m0 = space.expectation(&x0);
    let mut lhs = 0.0;
    for j in space.computable_sites(model) {
        let xj = space.evaluate(model, &j)?;
        let mj = space.expectation(&xj);
        let prod: Vec<f64> = x0.iter().zip(&xj).map(|(a, b)| (a - m0) * (b - mj)).collect();
        lhs += space.expectation(&prod).abs();
    }
    let d2 = space.delta_p(model, center, 2)?;
    Ok((lhs, d2 * d2))
}

/// Label cells of the nested interval partition: `(representative ω, probability)`.
pub fn interval_cells(d_seq: &[f64]) -> Vec<(f64, f64)> {
    let mut cells = vec![(0.0f64, 1.0f64)];
    for &d in d_seq {
        let mut next = Vec::with_capacity(cells.len() * 3);
        for (lo, len) in cells {
            next.push((lo, len * d / 2.0));
            next.push((lo + len * d / 2.0, len * d / 2.0));
            if d < 1.0 {
                next.push((lo + len * d, len * (1.0 - d)));
            }
        }
        cells = next;
    }
    cells.into_iter().map(|(lo, len)| (lo + len / 2.0, len)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    /// Discrepancy, or the left-hand side of an inequality.
    pub value: f64,
    /// Tolerance, or the right-hand side of an inequality.
    pub bound: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn identity(name: impl Into<String>, value: f64) -> Self {
        OracleCheck { name: name.into(), value, bound: TOLERANCE, passed: value <= TOLERANCE }
    }

    fn inequality(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        OracleCheck { name: name.into(), value: lhs, bound: rhs, passed: lhs <= rhs + TOLERANCE }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Worst check per name prefix (the text before the first `[`).
    pub fn summary(&self) -> Vec<OracleCheck> {
        let mut out: Vec<OracleCheck> = Vec::new();
        for c in &self.checks {
            let key = c.name.split('[').next().unwrap_or(&c.name).trim().to_string();
            match out.iter_mut().find(|o| o.name == key) {
                Some(o) => {
                    o.passed &= c.passed;
                    if c.value - c.bound > o.value - o.bound {
                        o.value = c.value;
                        o.bound = c.bound;
                    }
                }
                None => out.push(OracleCheck { name: key, ..c.clone() }),
            }
        }
        out
    }
}

fn rademacher(dim: usize) -> InnovationField {
    InnovationField::new(InnovationSpec::Rademacher, dim, 0).expect("valid spec")
}

fn kernel(dim: usize, terms: Vec<(Vec<i64>, f64)>) -> FieldModel {
    FieldModel::kernel(Kernel::new(dim, terms).expect("valid kernel"), rademacher(dim)).expect("valid model")
}

fn product(space: &FiniteSpace, sites: &[Vec<i64>]) -> Result<Variable> {
    let mut y = space.constant(1.0);
    for s in sites {
        for (a, b) in y.iter_mut().zip(space.innovation(s)?) {
            *a *= b;
        }
    }
    Ok(y)
}

struct Window {
    label: &'static str,
    space: FiniteSpace,
    models: Vec<(&'static str, FieldModel, Vec<i64>)>,
    products: Vec<Vec<Vec<i64>>>,
}

fn windows() -> Result<Vec<Window>> {
    let d1 = FiniteSpace::rademacher_box(&[0], &[5])?;
    let d2 = FiniteSpace::rademacher_box(&[0, 0], &[2, 2])?;
    let volterra1 = FieldModel::volterra(
        Kernel::new(1, vec![(vec![0], 1.0), (vec![1], -0.5)])?,
        vec![(vec![0], vec![1], 0.8), (vec![0], vec![2], -0.3)],
        rademacher(1),
    )?;
    let volterra2 = FieldModel::volterra(
        Kernel::new(2, vec![(vec![0, 0], 1.0)])?,
        vec![(vec![0, 1], vec![1, 0], 0.6), (vec![0, 0], vec![1, 1], 0.4)],
        rademacher(2),
    )?;
    Ok(vec![
        Window {
            label: "d=1, 6 sites",
            space: d1,
            models: vec![
                ("iid", kernel(1, vec![(vec![0], 1.0)]), vec![3]),
                ("kernel{0,1}", kernel(1, vec![(vec![0], 1.0), (vec![1], 1.0)]), vec![3]),
                ("kernel{0,1,2}", kernel(1, vec![(vec![0], 1.0), (vec![1], -0.6), (vec![2], 0.3)]), vec![3]),
                ("difference", FieldModel::difference(rademacher(1))?, vec![3]),
                ("volterra", volterra1, vec![3]),
            ],
            products: vec![vec![vec![0], vec![1]], vec![vec![2], vec![3], vec![5]]],
        },
        Window {
            label: "d=2, 3x3 sites",
            space: d2,
            models: vec![
                ("iid", kernel(2, vec![(vec![0, 0], 1.0)]), vec![1, 1]),
                (
                    "kernel{0,1}^2",
                    kernel(2, vec![(vec![0, 0], 1.0), (vec![1, 0], 0.5), (vec![0, 1], -0.5), (vec![1, 1], 0.25)]),
                    vec![1, 1],
                ),
                ("volterra", volterra2, vec![1, 1]),
            ],
            products: vec![
                vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
                vec![vec![1, 0], vec![0, 1]],
            ],
        },
    ])
}

/// Exhaustive identity suite on the standard windows.
///
/// `weight_vectors` random weight vectors per window and model enter the
/// moment inequality for `p ∈ {2, 4}`.
pub fn run_suite(seed: u64, weight_vectors: usize) -> Result<OracleReport> {
    let mut checks = Vec::new();
    let mut rng = StdRng::seed_from_u64(seed);
    for w in windows()? {
        let sp = &w.space;
        let (lo, hi) = sp.bounds();
        let mut vars: Vec<(String, Variable)> = Vec::new();
        for (name, model, center) in &w.models {
            vars.push((format!("X_{center:?} {name}"), sp.evaluate(model, center)?));
        }
        for p in &w.products {
            vars.push((format!("prod{p:?}"), product(sp, p)?));
        }

        // commuting property over every pair of quadrant indices
        let ranges: Vec<(i64, i64)> = lo.iter().zip(&hi).map(|(l, h)| (l - 1, *h)).collect();
        let mut idx = Vec::new();
        for_each_in_box(&ranges, |i| idx.push(i.to_vec()));
        for (name, y) in &vars {
            let mut worst: f64 = 0.0;
            for i in &idx {
                for k in &idx {
                    worst = worst.max(check_commuting(sp, y, i, k)?);
                }
            }
            checks.push(OracleCheck::identity(format!("commuting [{} | {name}]", w.label), worst));
            checks.push(OracleCheck::identity(
                format!("decomposition [{} | {name}]", w.label),
                check_decomposition(sp, y)?,
            ));
        }
        for a in 0..vars.len() {
            for b in a..vars.len() {
                checks.push(OracleCheck::identity(
                    format!("orthogonality [{} | {} , {}]", w.label, vars[a].0, vars[b].0),
                    check_orthogonality(sp, &vars[a].1, &vars[b].1)?,
                ));
            }
        }

        for (name, model, center) in &w.models {
            for m in 0..=1 {
                checks.push(OracleCheck::identity(
                    format!("truncated projection [{} | {name}, m={m}]", w.label),
                    check_truncated_projection(sp, model, center, m)?,
                ));
            }
            let (cov, bound) = check_covariance_bound(sp, model, center)?;
            checks.push(OracleCheck::inequality(format!("covariance bound [{} | {name}]", w.label), cov, bound));

            let sites = sp.computable_sites(model);
            for p in [2u32, 4] {
                let mut worst: (f64, f64) = (0.0, 1.0);
                let mut ok = true;
                for _ in 0..weight_vectors {
                    let weights: Vec<(Vec<i64>, f64)> =
                        sites.iter().map(|s| (s.clone(), rng.random_range(-1.0..1.0))).collect();
                    let (lhs, rhs) = check_moment_inequality(sp, model, &weights, center, p)?;
                    ok &= lhs <= rhs + TOLERANCE;
                    if lhs * worst.1 >= worst.0 * rhs {
                        worst = (lhs, rhs);
                    }
                }
                checks.push(OracleCheck {
                    name: format!("moment inequality [{} | {name}, p={p}]", w.label),
                    value: worst.0,
                    bound: worst.1,
                    passed: ok,
                });
            }
        }
    }
    checks.extend(interval_checks()?);
    Ok(OracleReport { checks })
}

/// Projection structure of the interval-construction model on label cells.
///
/// With two levels, `n = (2, 3)`, `α = (1/2, 1/4)` and `d = (1/2, 1)`, the
/// window `{−3, …, 3}` carries every innovation that `X_0, …, X_3` read.
pub fn interval_checks() -> Result<Vec<OracleCheck>> {
    let model = IntervalModel::new(vec![0.5, 0.25], vec![2, 3], vec![0.5, 1.0], 0)?;
    let cells = interval_cells(&model.d_seq);
    let space = FiniteSpace::new((-3..=3).map(|i| vec![i]).collect(), cells)?;
    let zeta = |level: usize| -> Result<Variable> {
        let w = space.innovation(&[0])?;
        Ok(w.iter().map(|&om| model.zetas(om)[level]).collect())
    };
    let (z1, z2) = (zeta(0)?, zeta(1)?);
    let fm = FieldModel::Interval(model.clone());
    let mut checks = Vec::new();
    let expected: Vec<(i64, Variable)> = vec![
        (0, z1.iter().zip(&z2).map(|(a, b)| 0.5 * a + 0.25 * b).collect()),
        (1, space.constant(0.0)),
        (2, z1.iter().map(|a| -0.5 * a).collect()),
        (3, z2.iter().map(|b| -0.25 * b).collect()),
    ];
    let mut delta2 = 0.0;
    for (n, target) in &expected {
        let x = space.evaluate(&fm, &[*n])?;
        let p0 = space.projection(&x, &[0])?;
        delta2 += space.norm(&p0, 2);
        checks.push(OracleCheck::identity(format!("interval model P_0 X_{n}"), max_abs_diff(&p0, target)));
    }
    let closed = (0.25f64 + 0.0625).sqrt() + 0.75;
    checks.push(OracleCheck::identity("interval model Δ_2", (delta2 - closed).abs()));
    let (lhs, rhs) = check_covariance_bound(&space, &fm, &[3])?;
    checks.push(OracleCheck::inequality("interval model covariance bound", lhs, rhs));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::interval_labels;

    fn d1() -> FiniteSpace {
        FiniteSpace::rademacher_box(&[-2], &[3]).unwrap()
    }

    #[test]
    fn probabilities_sum_to_one() {
        let sp = FiniteSpace::rademacher_box(&[0, 0], &[2, 2]).unwrap();
        assert!((sp.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let cells = interval_cells(&[0.25, 1.0, 0.5]);
        assert!((cells.iter().map(|c| c.1).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn elementary_conditional_expectations() {
        let sp = d1();
        let e0 = sp.innovation(&[0]).unwrap();
        let e1 = sp.innovation(&[1]).unwrap();
        let em1 = sp.innovation(&[-1]).unwrap();
        let q0 = Selector::Quadrant(vec![0]);
        assert_eq!(sp.conditional_expectation(&e0, &q0).unwrap(), e0);
        assert!(sp.conditional_expectation(&e1, &q0).unwrap().iter().all(|v| *v == 0.0));
        let prod: Vec<f64> = e0.iter().zip(&em1).map(|(a, b)| a * b).collect();
        let c = sp.conditional_expectation(&prod, &Selector::Quadrant(vec![-1])).unwrap();
        assert!(c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn selector_outside_window_is_rejected() {
        let sp = d1();
        let y = sp.innovation(&[0]).unwrap();
        assert!(matches!(
            sp.conditional_expectation(&y, &Selector::Quadrant(vec![40])),
            Err(Error::SiteOutsideWindow(_))
        ));
        assert!(sp.innovation(&[9]).is_err());
    }

    #[test]
    fn commuting_trivial_cases() {
        let sp = d1();
        let y = product(&sp, &[vec![0], vec![2]]).unwrap();
        assert!(check_commuting(&sp, &y, &[1], &[1]).unwrap() < 1e-15);
        assert!(check_commuting(&sp, &y, &[-1], &[2]).unwrap() < 1e-15);
        let sp2 = FiniteSpace::rademacher_box(&[0, 0], &[1, 1]).unwrap();
        let all = product(&sp2, &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap();
        for i in [[0, 1], [1, 0], [0, 0], [1, 1]] {
            for k in [[1, 0], [0, 1], [1, 1]] {
                assert!(check_commuting(&sp2, &all, &i, &k).unwrap() < 1e-14);
            }
        }
    }

    #[test]
    fn decomposition_examples() {
        let sp = d1();
        let e0 = sp.innovation(&[0]).unwrap();
        assert!(check_decomposition(&sp, &e0).unwrap() < 1e-15);
        let p0 = sp.projection(&e0, &[0]).unwrap();
        assert_eq!(p0, e0);
        assert!(sp.projection(&e0, &[1]).unwrap().iter().all(|v| *v == 0.0));
        let prod = product(&sp, &[vec![0], vec![1]]).unwrap();
        assert!(check_decomposition(&sp, &prod).unwrap() < 1e-14);
        assert!(matches!(check_decomposition(&sp, &sp.constant(1.0)), Err(Error::NonCentered(_))));
    }

    #[test]
    fn kernel_projection_locality() {
        let sp = FiniteSpace::rademacher_box(&[0], &[5]).unwrap();
        let m = kernel(1, vec![(vec![0], 1.0), (vec![1], -0.7), (vec![2], 0.2)]);
        // ‖P_j X_3‖_p = |a_{3−j}|
        let x = sp.evaluate(&m, &[3]).unwrap();
        for (j, a) in [(3, 1.0), (2, 0.7), (1, 0.2), (0, 0.0), (4, 0.0)] {
            for p in [2, 4] {
                assert!((sp.norm(&sp.projection(&x, &[j]).unwrap(), p) - a).abs() < 1e-14);
            }
        }
        assert!((sp.delta_p(&m, &[3], 2).unwrap() - 1.9).abs() < 1e-14);
    }

    #[test]
    fn iid_moment_inequality_is_equality_at_p2() {
        let sp = FiniteSpace::rademacher_box(&[0], &[5]).unwrap();
        let m = kernel(1, vec![(vec![0], 1.0)]);
        let w: Vec<(Vec<i64>, f64)> = (0..6).map(|i| (vec![i], 0.3 * i as f64 - 0.5)).collect();
        let (lhs, rhs) = check_moment_inequality(&sp, &m, &w, &[2], 2).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn pair_product_projection() {
        // P_0(ε_0 ε_{−1}) = ε_0 ε_{−1}
        let sp = FiniteSpace::rademacher_box(&[-2], &[2]).unwrap();
        let y = product(&sp, &[vec![0], vec![-1]]).unwrap();
        let p0 = sp.projection(&y, &[0]).unwrap();
        assert_eq!(p0, y);
        assert!((sp.norm(&p0, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cells_reproduce_labels() {
        let d = [0.5, 1.0, 0.25];
        let cells = interval_cells(&d);
        assert_eq!(cells.len(), 3 * 2 * 3);
        let mut seen = std::collections::BTreeSet::new();
        for (w, _) in &cells {
            seen.insert(interval_labels(*w, &d, 3).unwrap());
        }
        assert_eq!(seen.len(), cells.len());
    }

    #[test]
    fn full_suite_passes() {
        let report = run_suite(3, 10).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
    }
}

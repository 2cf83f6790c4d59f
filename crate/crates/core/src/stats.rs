//! Exact Cramér–von Mises and Kolmogorov–Smirnov functionals of the PIT
//! empirical processes, and their lag aggregates.
//!
//! CvM statistics are computed from closed-form pairwise sums, so no
//! numerical integration is involved. KS statistics enumerate the corners
//! of the grid spanned by the data coordinates: inside each grid cell the
//! count term is constant while the product `r1 r2 ...` is monotone, so the
//! supremum of `|V|` is reached either at a lower corner (closed count) or
//! as the left limit at the next upper corner.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of grid cells the `p`-wise KS enumeration will allocate.
pub const MAX_PWISE_CELLS: u128 = 20_000_000;
/// Largest `p` supported by the `p`-wise statistics.
pub const MAX_PWISE_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Norm {
    CvM,
    KS,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::CvM => f.write_str("CvM"),
            Norm::KS => f.write_str("KS"),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cvm" => Ok(Norm::CvM),
            "ks" => Ok(Norm::KS),
            other => Err(Error::InvalidArgument(format!("unknown norm '{other}'"))),
        }
    }
}

/// Which functional of which process a statistic is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "scope", content = "order", rename_all = "snake_case")]
pub enum StatisticSpec {
    /// `D_1n`: the marginal process over the full sample.
    Marginal(Norm),
    /// `D_2n,j`: the lag-`j` bivariate process.
    Lag(Norm, usize),
    /// `D_pn`: the `p`-wise process.
    Pwise(Norm, usize),
    /// Sum of lag CvM statistics over lags `1..=k`.
    Adj(usize),
    /// Max of lag KS statistics over lags `1..=k`.
    Mdj(usize),
    /// Marginal CvM plus `Adj(k)`.
    Adj0(usize),
    /// Max of marginal KS and `Mdj(k)`.
    Mdj0(usize),
}

impl StatisticSpec {
    pub fn norm(&self) -> Norm {
        match *self {
            StatisticSpec::Marginal(n) | StatisticSpec::Lag(n, _) | StatisticSpec::Pwise(n, _) => n,
            StatisticSpec::Adj(_) | StatisticSpec::Adj0(_) => Norm::CvM,
            StatisticSpec::Mdj(_) | StatisticSpec::Mdj0(_) => Norm::KS,
        }
    }

    /// The largest lag the statistic looks back, i.e. `n` must exceed it.
    pub fn max_lag(&self) -> usize {
        match *self {
            StatisticSpec::Marginal(_) => 0,
            StatisticSpec::Lag(_, k)
            | StatisticSpec::Adj(k)
            | StatisticSpec::Mdj(k)
            | StatisticSpec::Adj0(k)
            | StatisticSpec::Mdj0(k) => k,
            StatisticSpec::Pwise(_, p) => p.saturating_sub(1),
        }
    }

    /// Conventional label, e.g. `D1n^CvM`, `ADJ_5n`, `MDJ0_1n`.
    pub fn label(&self) -> String {
        match *self {
            StatisticSpec::Marginal(n) => format!("D1n^{n}"),
            StatisticSpec::Lag(n, j) => format!("D2n,{j}^{n}"),
            StatisticSpec::Pwise(n, p) => format!("D{p}n^{n}"),
            StatisticSpec::Adj(k) => format!("ADJ_{k}n"),
            StatisticSpec::Mdj(k) => format!("MDJ_{k}n"),
            StatisticSpec::Adj0(k) => format!("ADJ0_{k}n"),
            StatisticSpec::Mdj0(k) => format!("MDJ0_{k}n"),
        }
    }

    /// The six statistics reported by default: `D1n^CvM`, `ADJ_1n`,
    /// `ADJ_5n`, `D1n^KS`, `MDJ_1n`, `MDJ_5n`.
    pub fn default_set() -> Vec<StatisticSpec> {
        vec![
            StatisticSpec::Marginal(Norm::CvM),
            StatisticSpec::Adj(1),
            StatisticSpec::Adj(5),
            StatisticSpec::Marginal(Norm::KS),
            StatisticSpec::Mdj(1),
            StatisticSpec::Mdj(5),
        ]
    }
}

/// Textual form used on the command line and in plan files.
impl fmt::Display for StatisticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StatisticSpec::Marginal(Norm::CvM) => f.write_str("cvm1"),
            StatisticSpec::Marginal(Norm::KS) => f.write_str("ks1"),
            StatisticSpec::Lag(Norm::CvM, j) => write!(f, "cvm-lag:{j}"),
            StatisticSpec::Lag(Norm::KS, j) => write!(f, "ks-lag:{j}"),
            StatisticSpec::Pwise(Norm::CvM, p) => write!(f, "cvm-p:{p}"),
            StatisticSpec::Pwise(Norm::KS, p) => write!(f, "ks-p:{p}"),
            StatisticSpec::Adj(k) => write!(f, "adj:{k}"),
            StatisticSpec::Mdj(k) => write!(f, "mdj:{k}"),
            StatisticSpec::Adj0(k) => write!(f, "adj0:{k}"),
            StatisticSpec::Mdj0(k) => write!(f, "mdj0:{k}"),
        }
    }
}

impl FromStr for StatisticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidArgument(format!("unknown statistic '{s}'"));
        match s.as_str() {
            "cvm1" => return Ok(StatisticSpec::Marginal(Norm::CvM)),
            "ks1" => return Ok(StatisticSpec::Marginal(Norm::KS)),
            _ => {}
        }
        let (name, order) = s.split_once(':').ok_or_else(bad)?;
        let order: usize = order.parse().map_err(|_| bad())?;
        if order == 0 {
            return Err(Error::InvalidArgument(format!(
                "statistic '{s}' needs a positive order"
            )));
        }
        let spec = match name {
            "cvm-lag" => StatisticSpec::Lag(Norm::CvM, order),
            "ks-lag" => StatisticSpec::Lag(Norm::KS, order),
            "cvm-p" => StatisticSpec::Pwise(Norm::CvM, order),
            "ks-p" => StatisticSpec::Pwise(Norm::KS, order),
            "adj" => StatisticSpec::Adj(order),
            "mdj" => StatisticSpec::Mdj(order),
            "adj0" => StatisticSpec::Adj0(order),
            "mdj0" => StatisticSpec::Mdj0(order),
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticValue {
    pub spec: StatisticSpec,
    pub value: f64,
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

fn check_lag(n: usize, j: usize) -> Result<()> {
    if j == 0 {
        return Err(Error::InvalidArgument("lag must be at least 1".into()));
    }
    if j >= n {
        return Err(Error::InsufficientSample { lag: j, n });
    }
    Ok(())
}

fn check_marginal(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::DegenerateSample(format!(
            "marginal statistics need n >= 2, got {n}"
        )));
    }
    Ok(())
}

fn sorted_unique(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Grid `0 < v_1 < ... < v_K < 1` framed by 0 and 1.
fn framed_grid(values: &[f64]) -> Vec<f64> {
    let mut grid = Vec::with_capacity(values.len() + 2);
    grid.push(0.0);
    for v in sorted_unique(values) {
        if v > 0.0 && v < 1.0 {
            grid.push(v);
        }
    }
    grid.push(1.0);
    grid
}

/// Index of `x` in a framed grid; `x` must be a grid value.
fn grid_index(grid: &[f64], x: f64) -> usize {
    if x <= 0.0 {
        return 0;
    }
    if x >= 1.0 {
        return grid.len() - 1;
    }
    grid.binary_search_by(|g| g.total_cmp(&x))
        .expect("value must lie on its own grid")
}

/// Marginal CvM: `∫_0^1 V_1n(r)^2 dr` over the full sample.
pub fn cvm_marginal(u: &[f64]) -> Result<f64> {
    check_marginal(u.len())?;
    let n = u.len() as f64;
    let mut v = u.to_vec();
    v.sort_by(f64::total_cmp);
    // Σ_{t,s} (1 − max(u_t, u_s)) = Σ_i (2i − 1)(1 − v_(i)) over the order statistics.
    let mut pair = CompensatedSum::default();
    let mut single = CompensatedSum::default();
    for (i, &x) in v.iter().enumerate() {
        pair.add((2 * i + 1) as f64 * (1.0 - x));
        single.add(1.0 - x * x);
    }
    Ok((pair.total() / n - single.total() + n / 3.0).max(0.0))
}

/// Marginal KS: `sup_r |V_1n(r)|` over the full sample.
pub fn ks_marginal(u: &[f64]) -> Result<f64> {
    check_marginal(u.len())?;
    let n = u.len();
    let grid = framed_grid(u);
    let mut counts = vec![0u32; grid.len()];
    for &x in u {
        counts[grid_index(&grid, x)] += 1;
    }
    let nf = n as f64;
    let mut best: f64 = 0.0;
    let mut c = 0u32;
    for i in 0..grid.len() {
        c += counts[i];
        let cf = c as f64;
        best = best.max((cf - nf * grid[i]).abs());
        if i + 1 < grid.len() {
            best = best.max((nf * grid[i + 1] - cf).abs());
        }
    }
    Ok(best / nf.sqrt())
}

/// Lag-`j` CvM: `∫_{[0,1]^2} V_2n,j(r)^2 dr`, computed exactly.
pub fn cvm_lag(u: &[f64], j: usize) -> Result<f64> {
    check_lag(u.len(), j)?;
    let m = u.len() - j;
    let cur = &u[j..];
    let lagged = &u[..m];
    // (1/m) Σ_{t,s} (1−max a)(1−max b) − 2 Σ_t (1−a_t²)(1−b_t²)/4 + m/9
    let mut pair = CompensatedSum::default();
    let mut single = CompensatedSum::default();
    for t in 0..m {
        let (a, b) = (cur[t], lagged[t]);
        pair.add((1.0 - a) * (1.0 - b));
        single.add((1.0 - a * a) * (1.0 - b * b));
        let mut row = 0.0;
        for s in t + 1..m {
            row += (1.0 - a.max(cur[s])) * (1.0 - b.max(lagged[s]));
        }
        pair.add(2.0 * row);
    }
    let mf = m as f64;
    Ok((pair.total() / mf - single.total() / 2.0 + mf / 9.0).max(0.0))
}

/// Lag-`j` KS: `sup_{[0,1]^2} |V_2n,j(r)|`, computed exactly.
pub fn ks_lag(u: &[f64], j: usize) -> Result<f64> {
    check_lag(u.len(), j)?;
    let m = u.len() - j;
    let cur = &u[j..];
    let lagged = &u[..m];
    let gx = framed_grid(cur);
    let gy = framed_grid(lagged);
    // Points bucketed by their x grid index, storing the y grid index.
    let mut by_x: Vec<Vec<usize>> = vec![Vec::new(); gx.len()];
    for t in 0..m {
        by_x[grid_index(&gx, cur[t])].push(grid_index(&gy, lagged[t]));
    }
    let mf = m as f64;
    let mut col = vec![0u32; gy.len()];
    let mut best: f64 = 0.0;
    for i in 0..gx.len() {
        for &k in &by_x[i] {
            col[k] += 1;
        }
        // Running prefix over y gives C(gx[i], gy[k]) for every k.
        let mut c = 0u32;
        for k in 0..gy.len() {
            c += col[k];
            let cf = c as f64;
            best = best.max((cf - mf * gx[i] * gy[k]).abs());
            if i + 1 < gx.len() && k + 1 < gy.len() {
                // With unique grid values, C at the left limit of the next
                // corner equals the closed count at this corner.
                best = best.max((mf * gx[i + 1] * gy[k + 1] - cf).abs());
            }
        }
    }
    Ok(best / mf.sqrt())
}

/// `p`-wise CvM: `∫_{[0,1]^p} V_pn(r)^2 dr`, computed exactly.
pub fn cvm_pwise(u: &[f64], p: usize) -> Result<f64> {
    let pts = pwise_points(u, p)?;
    let m = pts.len();
    let mut pair = CompensatedSum::default();
    let mut single = CompensatedSum::default();
    let half_p = 0.5f64.powi(p as i32);
    for t in 0..m {
        let x = &pts[t];
        pair.add(x.iter().map(|&v| 1.0 - v).product());
        single.add(half_p * x.iter().map(|&v| 1.0 - v * v).product::<f64>());
        let mut row = 0.0;
        for y in &pts[t + 1..] {
            row += x.iter().zip(y).map(|(&a, &b)| 1.0 - a.max(b)).product::<f64>();
        }
        pair.add(2.0 * row);
    }
    let mf = m as f64;
    let third_p = (1.0f64 / 3.0).powi(p as i32);
    Ok((pair.total() / mf - 2.0 * single.total() + mf * third_p).max(0.0))
}

/// `p`-wise KS: `sup_{[0,1]^p} |V_pn(r)|` by corner enumeration on the
/// `p`-dimensional rank grid. Refuses grids above [`MAX_PWISE_CELLS`].
pub fn ks_pwise(u: &[f64], p: usize) -> Result<f64> {
    let pts = pwise_points(u, p)?;
    let m = pts.len();
    let grids: Vec<Vec<f64>> = (0..p)
        .map(|d| framed_grid(&pts.iter().map(|x| x[d]).collect::<Vec<_>>()))
        .collect();
    let cells: u128 = grids.iter().map(|g| g.len() as u128).product();
    if cells > MAX_PWISE_CELLS {
        return Err(Error::GridTooLarge {
            cells,
            limit: MAX_PWISE_CELLS,
        });
    }
    let dims: Vec<usize> = grids.iter().map(Vec::len).collect();
    let mut strides = vec![1usize; p];
    for d in (0..p - 1).rev() {
        strides[d] = strides[d + 1] * dims[d + 1];
    }
    let total = cells as usize;
    let mut count = vec![0u32; total];
    for x in &pts {
        let idx: usize = (0..p).map(|d| grid_index(&grids[d], x[d]) * strides[d]).sum();
        count[idx] += 1;
    }
    // Cumulative sums along each axis turn cell counts into closed counts.
    for d in 0..p {
        let stride = strides[d];
        for idx in 0..total {
            if (idx / stride) % dims[d] > 0 {
                count[idx] += count[idx - stride];
            }
        }
    }
    let mf = m as f64;
    let mut best: f64 = 0.0;
    let mut g = vec![0usize; p];
    for idx in 0..total {
        let mut rem = idx;
        for d in 0..p {
            g[d] = rem / strides[d];
            rem %= strides[d];
        }
        let cf = count[idx] as f64;
        let lower: f64 = (0..p).map(|d| grids[d][g[d]]).product();
        best = best.max((cf - mf * lower).abs());
        if (0..p).all(|d| g[d] + 1 < dims[d]) {
            let upper: f64 = (0..p).map(|d| grids[d][g[d] + 1]).product();
            best = best.max((mf * upper - cf).abs());
        }
    }
    Ok(best / mf.sqrt())
}

/// Rows `(u_t, u_{t−1}, ..., u_{t−p+1})` for `t = p..n`.
fn pwise_points(u: &[f64], p: usize) -> Result<Vec<Vec<f64>>> {
    if !(2..=MAX_PWISE_DIM).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "p-wise statistics support 2 <= p <= {MAX_PWISE_DIM}, got {p}"
        )));
    }
    if p > u.len() {
        return Err(Error::InsufficientSample { lag: p - 1, n: u.len() });
    }
    Ok((p - 1..u.len())
        .map(|t| (0..p).map(|i| u[t - i]).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregate {
    Adj,
    Mdj,
    Adj0,
    Mdj0,
}

pub fn aggregate(u: &[f64], k: usize, kind: Aggregate) -> Result<f64> {
    let spec = match kind {
        Aggregate::Adj => StatisticSpec::Adj(k),
        Aggregate::Mdj => StatisticSpec::Mdj(k),
        Aggregate::Adj0 => StatisticSpec::Adj0(k),
        Aggregate::Mdj0 => StatisticSpec::Mdj0(k),
    };
    compute(u, spec)
}

/// Evaluates a single statistic.
pub fn compute(u: &[f64], spec: StatisticSpec) -> Result<f64> {
    StatisticCache::new(u).get(spec)
}

/// Evaluates several statistics on one sequence, sharing per-lag work.
pub fn compute_all(u: &[f64], specs: &[StatisticSpec]) -> Result<Vec<f64>> {
    let mut cache = StatisticCache::new(u);
    specs.iter().map(|&s| cache.get(s)).collect()
}

/// Memoizes marginal and per-lag statistics on a fixed sequence.
pub struct StatisticCache<'a> {
    u: &'a [f64],
    memo: HashMap<(Norm, usize), f64>,
}

impl<'a> StatisticCache<'a> {
    pub fn new(u: &'a [f64]) -> Self {
        Self {
            u,
            memo: HashMap::new(),
        }
    }

    /// Lag 0 is the marginal statistic.
    fn lag(&mut self, norm: Norm, j: usize) -> Result<f64> {
        if let Some(&v) = self.memo.get(&(norm, j)) {
            return Ok(v);
        }
        let v = match (norm, j) {
            (Norm::CvM, 0) => cvm_marginal(self.u)?,
            (Norm::KS, 0) => ks_marginal(self.u)?,
            (Norm::CvM, j) => cvm_lag(self.u, j)?,
            (Norm::KS, j) => ks_lag(self.u, j)?,
        };
        self.memo.insert((norm, j), v);
        Ok(v)
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidArgument("aggregation order k must be >= 1".into()));
        }
        check_lag(self.u.len(), k)
    }

    pub fn get(&mut self, spec: StatisticSpec) -> Result<f64> {
        match spec {
            StatisticSpec::Marginal(norm) => self.lag(norm, 0),
            StatisticSpec::Lag(norm, j) => {
                check_lag(self.u.len(), j)?;
                self.lag(norm, j)
            }
            StatisticSpec::Pwise(Norm::CvM, p) => cvm_pwise(self.u, p),
            StatisticSpec::Pwise(Norm::KS, p) => ks_pwise(self.u, p),
            StatisticSpec::Adj(k) => {
                self.check_k(k)?;
                (1..=k).map(|j| self.lag(Norm::CvM, j)).sum()
            }
            StatisticSpec::Mdj(k) => {
                self.check_k(k)?;
                let mut best: f64 = 0.0;
                for j in 1..=k {
                    best = best.max(self.lag(Norm::KS, j)?);
                }
                Ok(best)
            }
            StatisticSpec::Adj0(k) => {
                let adj = self.get(StatisticSpec::Adj(k))?;
                Ok(self.lag(Norm::CvM, 0)? + adj)
            }
            StatisticSpec::Mdj0(k) => {
                let mdj = self.get(StatisticSpec::Mdj(k))?;
                Ok(self.lag(Norm::KS, 0)?.max(mdj))
            }
        }
    }
}

//! Average precision, mAP, and distribution diagnostics for feature matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, LabelVector, ScoreMatrix};
use crate::par;

/// Non-interpolated AP: items sorted by descending score (ties by ascending
/// index), then the mean over relevant items of `hits@rank / rank`.
pub fn average_precision(scores: &[f64], relevant: &[bool]) -> Result<f64> {
    if scores.len() != relevant.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores but {} relevance flags",
            scores.len(),
            relevant.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0, value: scores[i] });
    }
    let total_relevant = relevant.iter().filter(|&&r| r).count();
    if total_relevant == 0 {
        return Err(Error::InvalidParameter("average precision needs at least one relevant item".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable: equal scores (including -0.0 and 0.0) keep ascending index order.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &i) in order.iter().enumerate() {
        if relevant[i] {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Ok(sum / total_relevant as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub per_class_ap: Vec<f64>,
    pub map: f64,
}

/// AP of every class, where class `k` treats samples labelled `k` as relevant.
pub fn per_class_average_precision(p: &ScoreMatrix, y: &LabelVector) -> Result<Vec<f64>> {
    let k = p.cols();
    y.validate(p.rows(), k)?;
    let counts = y.class_counts();
    if let Some(class) = (0..k).find(|&c| counts.get(c).copied().unwrap_or(0) == 0) {
        return Err(Error::NoRelevant { class });
    }
    let labels = y.as_slice();
    par::map_range(k, |c| {
        let relevant: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        average_precision(&p.column(c), &relevant)
    })
    .into_iter()
    .collect()
}

/// Unweighted mean of [`per_class_average_precision`].
pub fn mean_average_precision(p: &ScoreMatrix, y: &LabelVector) -> Result<f64> {
    Ok(map_report(p, y)?.map)
}

pub fn map_report(p: &ScoreMatrix, y: &LabelVector) -> Result<MapReport> {
    let per_class_ap = per_class_average_precision(p, y)?;
    let map = per_class_ap.iter().sum::<f64>() / per_class_ap.len() as f64;
    Ok(MapReport { per_class_ap, map })
}

/// Population standard deviation of each column.
pub fn column_std_profile(m: &FeatureMatrix) -> Vec<f64> {
    let cols = m.to_column_major();
    let n = m.rows();
    par::map_range(m.cols(), |j| population_std(&cols[j * n..(j + 1) * n]))
}

pub fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

/// Pearson kurtosis `m4 / m2²` (3 for a gaussian). `None` for constant input.
pub fn kurtosis(values: &[f64]) -> Option<f64> {
    let n = values.len() as f64;
    if values.is_empty() {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m4) = values.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let d = (v - mean) * (v - mean);
        (m2 + d, m4 + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    (m2 > 0.0).then(|| m4 / (m2 * m2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `B + 1` ascending edges; bin `b` is `[edges[b], edges[b+1])`, the last bin closed.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Sum of `counts`.
    pub total: u64,
    /// Values outside an explicitly requested range; not part of `total`.
    pub out_of_range: u64,
}

impl Histogram {
    fn empty(lo: f64, hi: f64, bins: usize) -> Histogram {
        let width = hi - lo;
        let mut bin_edges: Vec<f64> = (0..bins).map(|b| lo + width * b as f64 / bins as f64).collect();
        bin_edges.push(hi);
        Histogram { bin_edges, counts: vec![0; bins], total: 0, out_of_range: 0 }
    }

    fn add(&mut self, v: f64) {
        let bins = self.counts.len();
        let (lo, hi) = (self.bin_edges[0], self.bin_edges[bins]);
        if !(lo..=hi).contains(&v) {
            self.out_of_range += 1;
            return;
        }
        let b = self.bin_edges[..bins].partition_point(|&e| e <= v).saturating_sub(1);
        self.counts[b] += 1;
        self.total += 1;
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.out_of_range += other.out_of_range;
    }

    /// Rows of `bin_lo,bin_hi,count` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (b, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e},{c}\n", self.bin_edges[b], self.bin_edges[b + 1]));
        }
        out
    }
}

/// Histogram of every entry of `m`.
///
/// Without a range the data min/max is used; if all values are equal the
/// result is a single bin `[v, v]` holding everything.
pub fn value_histogram(m: &FeatureMatrix, bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let values = m.as_slice();
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!("histogram range needs lo < hi, got [{lo}, {hi}]")));
            }
            (lo, hi)
        }
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                let n = values.len() as u64;
                return Ok(Histogram { bin_edges: vec![lo, hi], counts: vec![n], total: n, out_of_range: 0 });
            }
            (lo, hi)
        }
    };
    let mut h = Histogram::empty(lo, hi, bins);
    values.iter().for_each(|&v| h.add(v));
    Ok(h)
}

/// Cosine-similarity distributions of one class against itself and against the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineStats {
    pub class: usize,
    /// All unordered pairs of distinct positive rows, on `[-1, 1]`.
    pub pos_pos: Histogram,
    /// All (positive, negative) pairs, on `[-1, 1]`.
    pub pos_neg: Histogram,
    pub mean_pos_pos: f64,
    pub mean_pos_neg: f64,
    pub min_pos_pos: f64,
    pub min_pos_neg: f64,
    /// Rows skipped because their norm is zero.
    pub zero_norm_excluded: usize,
}

struct PairAcc {
    hist: Histogram,
    sum: f64,
    min: f64,
}

impl PairAcc {
    fn new(bins: usize) -> Self {
        PairAcc { hist: Histogram::empty(-1.0, 1.0, bins), sum: 0.0, min: f64::INFINITY }
    }

    fn add(&mut self, cos: f64) {
        self.hist.add(cos);
        self.sum += cos;
        self.min = self.min.min(cos);
    }
}

pub fn cosine_similarity_stats(m: &FeatureMatrix, y: &LabelVector, class: usize, bins: usize) -> Result<CosineStats> {
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    y.validate(m.rows(), usize::MAX)?;
    let norms: Vec<f64> = m.row_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let labels = y.as_slice();
    let n_pos = labels.iter().filter(|&&l| l == class).count();
    let n_neg = labels.len() - n_pos;
    if n_pos < 2 || n_neg < 1 {
        return Err(Error::InsufficientSamples(format!(
            "class {class} needs >= 2 positives and >= 1 negative, has {n_pos} and {n_neg}"
        )));
    }
    let zero_norm_excluded = norms.iter().filter(|&&n| n == 0.0).count();
    let keep = |i: usize| norms[i] > 0.0;
    let pos: Vec<usize> = (0..m.rows()).filter(|&i| labels[i] == class && keep(i)).collect();
    let neg: Vec<usize> = (0..m.rows()).filter(|&i| labels[i] != class && keep(i)).collect();
    if pos.len() < 2 || neg.is_empty() {
        return Err(Error::InsufficientSamples(format!(
            "class {class} has too few non-zero rows after excluding {zero_norm_excluded}"
        )));
    }
    let cos = |a: usize, b: usize| {
        let d: f64 = m.row(a).iter().zip(m.row(b)).map(|(x, y)| x * y).sum();
        (d / (norms[a] * norms[b])).clamp(-1.0, 1.0)
    };

    // One accumulator pair per positive row; merged in row order so the
    // floating-point sums do not depend on scheduling.
    let partial: Vec<(PairAcc, PairAcc)> = par::map_range(pos.len(), |a| {
        let mut pp = PairAcc::new(bins);
        let mut pn = PairAcc::new(bins);
        for &b in &pos[a + 1..] {
            pp.add(cos(pos[a], b));
        }
        for &b in &neg {
            pn.add(cos(pos[a], b));
        }
        (pp, pn)
    });
    let mut pp = PairAcc::new(bins);
    let mut pn = PairAcc::new(bins);
    for (a, b) in &partial {
        pp.hist.merge(&a.hist);
        pp.sum += a.sum;
        pp.min = pp.min.min(a.min);
        pn.hist.merge(&b.hist);
        pn.sum += b.sum;
        pn.min = pn.min.min(b.min);
    }
    Ok(CosineStats {
        class,
        mean_pos_pos: pp.sum / pp.hist.total as f64,
        mean_pos_neg: pn.sum / pn.hist.total as f64,
        min_pos_pos: pp.min,
        min_pos_neg: pn.min,
        pos_pos: pp.hist,
        pos_neg: pn.hist,
        zero_norm_excluded,
    })
}

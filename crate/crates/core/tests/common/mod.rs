//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the code path it checks.
#![allow(dead_code)]

use chunkcodec::model::BoundarySet;

/// Frame-wise Bernoulli NLL of boundary indicators under hazards `h`.
pub fn bernoulli_nll(h: &[f64], boundaries: &BoundarySet) -> f64 {
    let mut is_end = vec![false; h.len()];
    for &e in boundaries.ends() {
        is_end[e] = true;
    }
    h.iter()
        .zip(&is_end)
        .map(|(&p, &y)| if y { -p.ln() } else { -(1.0 - p).ln() })
        .sum()
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_diff(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            let h = step * orig.abs().max(1.0);
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Exhaustive cosine argmax over f32 rows, lowest index on ties.
pub fn argmax_cosine(rows: &[Vec<f32>], query: &[f64]) -> (usize, f64) {
    let qn = norm(query);
    let mut best = (0, f64::NEG_INFINITY);
    for (i, row) in rows.iter().enumerate() {
        let dot: f64 = row.iter().zip(query).map(|(&a, &b)| a as f64 * b).sum();
        let rn = row.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
        let sim = dot / (qn * rn);
        if sim > best.1 {
            best = (i, sim);
        }
    }
    best
}

/// NB pmf by the ratio recurrence `p(y+1) = p(y) (y+r)/(y+1) * mu/(r+mu)`.
pub struct NbRecurrence {
    r: f64,
    ratio: f64,
    y: u64,
    p: f64,
}

impl NbRecurrence {
    pub fn new(mu: f64, alpha: f64) -> Self {
        let r = 1.0 / alpha;
        Self {
            r,
            ratio: mu / (r + mu),
            y: 0,
            p: (r / (r + mu)).powf(r),
        }
    }
}

impl Iterator for NbRecurrence {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let p = self.p;
        self.p *= (self.y as f64 + self.r) / (self.y as f64 + 1.0) * self.ratio;
        self.y += 1;
        Some(p)
    }
}

//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rankforge::Metric;

/// Worst-case ordering written from scratch: score descending, then label
/// ascending, then index ascending.
pub fn worst_case_order(scores: &[f64], labels: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(labels[a].partial_cmp(&labels[b]).unwrap())
            .then(a.cmp(&b))
    });
    order
}

fn gain(r: f64) -> f64 {
    (2f64.powf(r) - 1.0) / 16.0
}

fn dcg(labels_in_order: &[f64], k: usize) -> f64 {
    labels_in_order
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| gain(r) / ((i + 2) as f64).log2())
        .sum()
}

/// Metric value of an explicit top-down ordering.
pub fn metric_of_order(metric: &Metric, order: &[usize], labels: &[f64]) -> f64 {
    let ranked: Vec<f64> = order.iter().map(|&d| labels[d]).collect();
    let n = ranked.len();
    match *metric {
        Metric::Dcg { k } => dcg(&ranked, k.unwrap_or(n)),
        Metric::Ndcg { k } => {
            let k = k.unwrap_or(n);
            let mut ideal = ranked.clone();
            ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let best = dcg(&ideal, k);
            if best == 0.0 {
                1.0
            } else {
                dcg(&ranked, k) / best
            }
        }
        Metric::ReciprocalRank => ranked
            .iter()
            .position(|&r| r == 1.0)
            .map_or(0.0, |p| 1.0 / (p + 1) as f64),
        Metric::AveragePrecision => {
            let total: f64 = ranked.iter().sum();
            if total == 0.0 {
                return 0.0;
            }
            let mut hits = 0.0;
            let mut sum = 0.0;
            for (p, &r) in ranked.iter().enumerate() {
                if r == 1.0 {
                    hits += 1.0;
                    sum += hits / (p + 1) as f64;
                }
            }
            sum / total
        }
        Metric::ExpectedReciprocalRank => {
            let mut keep_going = 1.0;
            let mut value = 0.0;
            for (p, &r) in ranked.iter().enumerate() {
                value += keep_going * r / (p + 1) as f64;
                keep_going *= 1.0 - r;
            }
            value
        }
        Metric::ExpDcg { decay } => ranked
            .iter()
            .enumerate()
            .map(|(p, &r)| decay.powi(p as i32) * r)
            .sum(),
    }
}

/// Metric value for scores under worst-case tie resolution.
pub fn metric_of_scores(metric: &Metric, scores: &[f64], labels: &[f64]) -> f64 {
    metric_of_order(metric, &worst_case_order(scores, labels), labels)
}

/// Full-recompute swap delta: exchange the rank positions of `i` and `j`.
pub fn swap_oracle(metric: &Metric, scores: &[f64], labels: &[f64], i: usize, j: usize) -> f64 {
    let mut order = worst_case_order(scores, labels);
    let before = metric_of_order(metric, &order, labels);
    let pi = order.iter().position(|&d| d == i).unwrap();
    let pj = order.iter().position(|&d| d == j).unwrap();
    order.swap(pi, pj);
    (metric_of_order(metric, &order, labels) - before).abs()
}

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Whether `order` lists documents by non-increasing score.
pub fn tie_consistent(order: &[usize], scores: &[f64]) -> bool {
    order.windows(2).all(|w| scores[w[0]] >= scores[w[1]])
}

/// `P(T > t)` for Student's t with integer `df`, from the finite trigonometric
/// series for `A(t | df) = P(|T| <= t)` (Abramowitz & Stegun 26.7.3 and 26.7.4).
pub fn student_t_sf_series(t: f64, df: u32) -> f64 {
    assert!(df >= 1);
    let theta = (t.abs() / (df as f64).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let a = if df % 2 == 1 {
        let mut sum = 0.0;
        if df > 1 {
            let mut term = c;
            sum = term;
            let mut k = 1;
            while 2 * k + 1 < df {
                term *= c * c * (2 * k) as f64 / (2 * k + 1) as f64;
                sum += term;
                k += 1;
            }
        }
        2.0 / std::f64::consts::PI * (theta + s * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1;
        while 2 * k < df {
            term *= c * c * (2 * k - 1) as f64 / (2 * k) as f64;
            sum += term;
            k += 1;
        }
        s * sum
    };
    if t >= 0.0 {
        (1.0 - a) / 2.0
    } else {
        (1.0 + a) / 2.0
    }
}

/// Labels valid for `metric`, drawn from a graded 0..=4 vector.
pub fn labels_for(metric: &Metric, graded: &[f64]) -> Vec<f64> {
    match metric {
        Metric::ReciprocalRank | Metric::AveragePrecision => {
            graded.iter().map(|&r| if r > 0.0 { 1.0 } else { 0.0 }).collect()
        }
        Metric::ExpectedReciprocalRank => graded.iter().map(|&r| r / 4.0).collect(),
        _ => graded.to_vec(),
    }
}

/// All metrics with the cutoffs exercised by the tests.
pub fn all_metrics(n: usize) -> Vec<Metric> {
    vec![
        Metric::ndcg(1),
        Metric::ndcg(3),
        Metric::ndcg(5),
        Metric::ndcg(10),
        Metric::ndcg(n.max(1)),
        Metric::Ndcg { k: None },
        Metric::Dcg { k: Some(3) },
        Metric::Dcg { k: None },
        Metric::ReciprocalRank,
        Metric::AveragePrecision,
        Metric::ExpectedReciprocalRank,
        Metric::ExpDcg { decay: 0.85 },
        Metric::ExpDcg { decay: 0.5 },
    ]
}

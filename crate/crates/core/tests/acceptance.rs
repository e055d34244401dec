//! Acceptance criteria, one line of output each.
//!
//! Runs without the libtest harness so every criterion reports even when a
//! sibling fails. The process exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rss_mlp::cli::{run_benchmark, BenchSettings};
use rss_mlp::evaluation::{
    f_critical, friedman_tau_f, nemenyi_cd, paired_comparisons, Metric, RankTable,
};
use rss_mlp::losses::loss_value;
use rss_mlp::synthetic::{blobs, twonorm};
use rss_mlp::variance_lab::{
    bound_value, closed_form_gap, exact_estimator_moments, gap_report, FiniteMarginDistribution,
};
use rss_mlp::{Dataset, LossKind, RngStream};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

fn within_budget(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

// ---------------------------------------------------------------------------
// Enumeration oracle for estimator moments.

/// `E φ(z₍r₎)` and `E φ(z₍r₎)²` for every rank `r`, by enumerating all
/// `K`-tuples of support points.
fn enumerate_rank_moments(d: &FiniteMarginDistribution, k: usize, phi: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    let (z, p) = (d.support(), d.probs());
    let s = z.len();
    let mut first = vec![0.0; k];
    let mut second = vec![0.0; k];
    let mut idx = vec![0usize; k];
    let mut draw = vec![0.0; k];
    loop {
        let weight: f64 = idx.iter().map(|&i| p[i]).product();
        for (slot, &i) in draw.iter_mut().zip(&idx) {
            *slot = z[i];
        }
        draw.sort_by(f64::total_cmp);
        for r in 0..k {
            let v = phi(draw[r]);
            first[r] += weight * v;
            second[r] += weight * v * v;
        }
        // Odometer increment over s^k tuples.
        let mut pos = 0;
        loop {
            if pos == k {
                return (first, second);
            }
            idx[pos] += 1;
            if idx[pos] < s {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn random_distribution(rng: &mut RngStream) -> FiniteMarginDistribution {
    let size = rng.random_range(1..=6);
    let support: Vec<f64> = (0..size).map(|_| rng.random_range(-3.0..3.0)).collect();
    let weights: Vec<f64> = (0..size).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let head: f64 = probs[..size - 1].iter().sum();
    probs[size - 1] = 1.0 - head;
    FiniteMarginDistribution::new(support, probs).unwrap()
}

fn distributions() -> Vec<FiniteMarginDistribution> {
    let mut rng = RngStream::new(20_240_601, 0xACCE);
    (0..100).map(|_| random_distribution(&mut rng)).collect()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut cases = 0;
    for d in distributions() {
        for k in 2..=5 {
            for loss in LossKind::ALL {
                let ex = exact_estimator_moments(loss, &d, k, 1).unwrap();
                let (first, _) = enumerate_rank_moments(&d, k, |z| loss_value(loss, z));
                let oracle_rss = first.iter().sum::<f64>() / k as f64;
                worst = worst.max((ex.mean_rss - ex.mean_srs).abs());
                worst_oracle = worst_oracle.max((oracle_rss - ex.mean_srs).abs());
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        worst <= 1e-12 && worst_oracle <= 1e-12 && within_budget(elapsed, 5.0),
        format!(
            "{cases} cases, max |E_RSS - E_SRS| = {worst:.2e} (enumeration {worst_oracle:.2e}), tol 1e-12, {:.2}s < 5s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_second = f64::NEG_INFINITY;
    let mut worst_oracle: f64 = 0.0;
    let mut cases = 0;
    for d in distributions() {
        for k in 2..=5 {
            for loss in LossKind::ALL {
                let phi = |z: f64| loss_value(loss, z);
                let (first, second) = enumerate_rank_moments(&d, k, phi);
                let (e1, e2) = (d.expect(phi), d.expect(|z| phi(z) * phi(z)));
                // (1/K)Σ(Eφ(z₍r₎))² ≥ (Eφ(z))² is the inequality behind the
                // variance comparison.
                let avg_sq = first.iter().map(|v| v * v).sum::<f64>() / k as f64;
                worst_second = worst_second.max(e1 * e1 - avg_sq);
                for m in [1, 10] {
                    let ex = exact_estimator_moments(loss, &d, k, m).unwrap();
                    let (kf, mf) = (k as f64, m as f64);
                    let within: f64 = first.iter().zip(&second).map(|(a, b)| b - a * a).sum();
                    let oracle_rss = within / (kf * kf * mf);
                    let oracle_srs = (e2 - e1 * e1) / (kf * mf);
                    let scale = oracle_srs.abs().max(1.0);
                    worst_oracle = worst_oracle
                        .max((ex.var_rss - oracle_rss).abs() / scale)
                        .max((ex.var_srs - oracle_srs).abs() / scale);
                    worst_excess = worst_excess.max(ex.var_rss - ex.var_srs);
                    cases += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        worst_excess <= 1e-12 && worst_second <= 1e-12 && worst_oracle <= 1e-12 && within_budget(elapsed, 5.0),
        format!(
            "{cases} cases, max (V_RSS - V_SRS) = {worst_excess:.3e}, max second-moment deficit = {worst_second:.2e}, \
             enumeration mismatch {worst_oracle:.1e}, tol 1e-12, {:.2}s < 5s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// Closed-form gaps on a ±1 margin, derived by hand for K = 2.

/// Squared odd-part slope of the loss on {−1, +1}, from the loss formulas.
fn hand_coefficient(loss: LossKind) -> f64 {
    let e = std::f64::consts::E;
    match loss {
        LossKind::Exp => ((1.0 / e - e) / 2.0).powi(2),
        LossKind::Log => (((1.0 + 1.0 / e).ln() - (1.0 + e).ln()) / 2.0).powi(2),
    }
}

/// For K = 2 and P(z = +1) = p, the order-statistic means are 2p² − 1 and
/// 1 − 2(1 − p)².
fn hand_gap(loss: LossKind, p: f64, m: usize) -> f64 {
    let mean = 2.0 * p - 1.0;
    let low = 2.0 * p * p - 1.0;
    let high = 1.0 - 2.0 * (1.0 - p).powi(2);
    hand_coefficient(loss) / (2.0 * m as f64) * (mean * mean - (low * low + high * high) / 2.0)
}

fn quantitative_gap(loss: LossKind, target: f64, seed: u64) -> Verdict {
    let start = Instant::now();
    let d = FiniteMarginDistribution::bernoulli(0.5).unwrap();
    let oracle = hand_gap(loss, 0.5, 10);
    let cf = closed_form_gap(loss, 2, 10, &d).unwrap().gap;
    let r = gap_report(loss, &d, 2, 10, 100_000, seed).unwrap();
    let elapsed = start.elapsed();
    let z_gap = (r.mc_gap - target) / r.mc_gap_se;
    let mean_se = (r.srs.mean_se.powi(2) + r.rss.mean_se.powi(2)).sqrt();
    let z_mean = (r.rss.mean - r.srs.mean) / mean_se;
    let pass = (oracle - target).abs() <= 5e-8
        && (cf - oracle).abs() <= 1e-12
        && z_gap.abs() <= 4.0
        && z_mean.abs() <= 4.0
        && within_budget(elapsed, 30.0);
    Verdict::new(
        pass,
        format!(
            "{loss}: closed form {cf:.7} (hand {oracle:.7}, target {target}), MC gap {:.7} ± {:.7} (z = {z_gap:+.2}), \
             mean diff z = {z_mean:+.2}, |z| <= 4, {:.2}s < 30s",
            r.mc_gap,
            r.mc_gap_se,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Verdict {
    quantitative_gap(LossKind::Exp, -0.0172637, 3)
}

fn criterion_4() -> Verdict {
    quantitative_gap(LossKind::Log, -0.003125, 4)
}

fn criterion_5() -> Verdict {
    let d = FiniteMarginDistribution::bernoulli(0.5).unwrap();
    let ms = [5usize, 10, 20];
    let mut pass = true;
    let mut notes = Vec::new();
    for loss in LossKind::ALL {
        let cf: Vec<f64> = ms.iter().map(|&m| closed_form_gap(loss, 2, m, &d).unwrap().gap).collect();
        let mc: Vec<_> = ms
            .iter()
            .map(|&m| gap_report(loss, &d, 2, m, 100_000, 50 + m as u64 + 100 * (loss == LossKind::Log) as u64).unwrap())
            .collect();
        let mut worst_z: f64 = 0.0;
        for i in 0..2 {
            let ratio = cf[i] / cf[i + 1];
            pass &= (ratio - 2.0).abs() <= 1e-12;
            pass &= (cf[i] - hand_gap(loss, 0.5, ms[i])).abs() <= 1e-12;
            let (a, b) = (&mc[i], &mc[i + 1]);
            let se = (a.mc_gap_se.powi(2) + 4.0 * b.mc_gap_se.powi(2)).sqrt();
            let z = (a.mc_gap - 2.0 * b.mc_gap) / se;
            worst_z = worst_z.max(z.abs());
            notes.push(format!("{loss} m {}->{}: cf ratio {ratio:.12}, MC halving z = {z:+.2}", ms[i], ms[i + 1]));
        }
        for r in &mc {
            worst_z = worst_z.max(r.z_score.abs());
        }
        pass &= worst_z <= 4.0;
    }
    Verdict::new(pass, notes.join("; "))
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut plain: f64 = 0.0;
    let mut bn: f64 = 0.0;
    for loss in LossKind::ALL {
        for seed in 0..5 {
            plain = plain.max(common::max_gradient_error(false, loss, seed, 1e-5));
            bn = bn.max(common::max_gradient_error(true, loss, seed, 1e-5));
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        plain < 1e-4 && bn < 1e-3 && within_budget(elapsed, 10.0),
        format!(
            "max relative error {plain:.2e} (< 1e-4) without batch norm, {bn:.2e} (< 1e-3) with, {:.2}s < 10s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Verdict {
    let r = bound_value(1.0, 100, 0.05, 0.01, 0.0).unwrap();
    let theta = 2.0 * (2.0 * (1.0f64 / 0.05).ln() / 100.0).sqrt() + 2.0 * 0.01f64.sqrt();
    let oracle = (1.0 - (1.0 - theta).powi(2)).sqrt();
    let mut pass = (r.bound - 0.95059).abs() <= 1e-4 && (r.bound - oracle).abs() <= 1e-12;

    let ns = [1u64, 2, 5, 10, 20, 50, 100, 200, 500, 1_000, 10_000, 100_000, 1_000_000];
    let vs = [0.0, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5];
    let mut points = 0;
    let mut violations = 0;
    for sup in [0.5, 1.0, 2.0] {
        for delta in [0.01, 0.05, 0.1, 0.5] {
            let grid: Vec<Vec<f64>> = ns
                .iter()
                .map(|&n| vs.iter().map(|&v| bound_value(sup, n, delta, v, 0.0).unwrap().bound).collect())
                .collect();
            for i in 0..ns.len() {
                for j in 0..vs.len() {
                    points += 1;
                    if i + 1 < ns.len() && grid[i + 1][j] > grid[i][j] {
                        violations += 1;
                    }
                    if j + 1 < vs.len() && grid[i][j + 1] < grid[i][j] {
                        violations += 1;
                    }
                }
            }
        }
    }
    pass &= violations == 0;
    Verdict::new(
        pass,
        format!(
            "bound {:.6} (direct formula {oracle:.6}, target 0.95059 ± 1e-4), {violations} monotonicity violations over {points} grid points",
            r.bound
        ),
    )
}

// ---------------------------------------------------------------------------

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let sets: Vec<(String, Dataset)> = vec![
        ("twonorm".into(), twonorm(2000, 20, 101).unwrap()),
        ("blobs3".into(), blobs(1500, 10, 3, 0.5, 102).unwrap()),
    ];
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let (rss, srs) = ("RSS-MLP", "SRS-MLP");
    let mut pass = true;
    let mut notes = Vec::new();
    for loss in LossKind::ALL {
        let mut settings = BenchSettings::new(8);
        settings.n_models = 11;
        settings.repeats = 10;
        settings.loss = loss;
        settings.mlp.epochs = 6;
        let outcome = run_benchmark(&settings, &sets, workers).unwrap();
        let cmp = paired_comparisons(&outcome.records, Metric::Accuracy, rss, srs, 0.05).unwrap();
        let mut wins = 0;
        for c in &cmp {
            pass &= c.mean_a >= c.mean_b - 0.005;
            if c.mean_a >= c.mean_b {
                wins += 1;
            }
            notes.push(format!(
                "{loss}/{}: RSS {:.4} vs SRS {:.4} (t = {:+.2})",
                c.dataset, c.mean_a, c.mean_b, c.test.t
            ));
        }
        pass &= wins >= 1;
        notes.push(format!("{loss}: RSS wins or ties {wins}/2"));
    }
    let elapsed = start.elapsed();
    pass &= within_budget(elapsed, 600.0);
    notes.push(format!("{:.0}s < 600s", elapsed.as_secs_f64()));
    Verdict::new(pass, notes.join("; "))
}

fn criterion_9() -> Verdict {
    let table = RankTable::from_ranks(vec![vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
    let fr = friedman_tau_f(&table).unwrap();
    // Hand computation from the rank sums (4, 5, 9).
    let (n, k) = (3.0f64, 3.0f64);
    let sum_sq = 4.0f64 / 3.0 * 4.0 / 3.0 + 5.0f64 / 3.0 * 5.0 / 3.0 + 3.0 * 3.0;
    let chi2 = 12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0).powi(2) / 4.0);
    let tau = (n - 1.0) * chi2 / (n * (k - 1.0) - chi2);
    let tau_f = fr.tau_f.unwrap_or(f64::NAN);
    let friedman_ok = (fr.chi2 - chi2).abs() <= 1e-6
        && (chi2 - 4.6667).abs() < 5e-5
        && (tau_f - tau).abs() <= 1e-6
        && (tau_f - 7.0).abs() <= 1e-6;

    let f = f_critical(3, 36, 0.05).unwrap();
    let f_ok = (f - 2.892).abs() <= 0.01;
    let f33 = f_critical(3, 33, 0.05).unwrap();

    let q = 2.569;
    let cd_oracle = q * (4.0f64 * 5.0 / (6.0 * 13.0)).sqrt();
    let cd = nemenyi_cd(4, 13, 0.05).unwrap();
    let cd_ok = (cd - 1.3009).abs() <= 1e-3 && (cd - cd_oracle).abs() <= 1e-9;

    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    Verdict::new(
        friedman_ok && f_ok && cd_ok,
        format!(
            "Friedman chi2 = {:.6} tau_F = {tau_f:.6} [{}]; F(3,36; 0.05) = {f:.4} vs 2.892 ± 0.01 [{}] \
             (F(3,33; 0.05) = {f33:.4}: the table value matches df2 = 33); CD(4,13) = {cd:.4} [{}]",
            fr.chi2,
            mark(friedman_ok),
            mark(f_ok),
            mark(cd_ok)
        ),
    )
}

// ---------------------------------------------------------------------------

fn write_csv(ds: &Dataset, path: &Path) {
    let mut w = csv::Writer::from_path(path).unwrap();
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    header.push("class".into());
    w.write_record(&header).unwrap();
    for i in 0..ds.len() {
        let mut row: Vec<String> = ds.features().row(i).iter().map(|v| v.to_string()).collect();
        row.push(ds.labels()[i].to_string());
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
}

fn cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_rss-mlp"))
        .args(args)
        .env_clear()
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("mix.csv");
    write_csv(&blobs(240, 4, 3, 1.0, 10).unwrap(), &data);
    let first = dir.path().join("w1");
    cli(&[
        "benchmark", "--data", data.to_str().unwrap(), "--T", "5", "--repeats", "4", "--seed", "10",
        "--hidden", "16,8", "--epochs", "3", "--workers", "1", "--out", first.to_str().unwrap(),
    ]);
    let manifest = first.join("run_manifest.json");
    let reference = std::fs::read(first.join("ledger.csv")).unwrap();
    let mut identical = Vec::new();
    for workers in [2, 4] {
        let out = dir.path().join(format!("w{workers}"));
        cli(&[
            "rerun", "--manifest", manifest.to_str().unwrap(), "--workers", &workers.to_string(), "--out",
            out.to_str().unwrap(),
        ]);
        identical.push(std::fs::read(out.join("ledger.csv")).unwrap() == reference);
    }
    Verdict::new(
        identical.iter().all(|&b| b),
        format!(
            "ledger of {} bytes; reruns with 2 and 4 workers identical: {:?}",
            reference.len(),
            identical
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Verdict); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    // Positional arguments select criteria by number; flags from the test
    // runner are ignored.
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let verdict = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Verdict::new(false, "panicked"));
        if !verdict.pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2}: {} {}",
            if verdict.pass { "PASS" } else { "FAIL" },
            verdict.detail
        );
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Failures are reported but only change the exit status when
//! `MACRODIV_ACCEPTANCE_STRICT=1` is set. An optional argument selects
//! criteria by number, e.g. `cargo test -p macrodiv-core --test acceptance -- 3 8`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use macrodiv_core::linalg::{expected_gram_det_oracle, expected_weighted_gram_det_oracle};
use macrodiv_core::mc::{empirical_cdf, mmse_sinr, par_map, sample_channel, zf_snr};
use macrodiv_core::profile::Scenario;
use macrodiv_core::{
    approx_mixture, builtin_profile, generate_drop, high_snr, mmse_denominator_coeffs, mmse_numerator,
    normalize_columns, perm_rect, ser_from_mixture, user_view, zf_denominator_coeffs, zf_k0, zf_mixture,
    BuiltinProfile, ExponentialMixture, ModulationSpec, PowerProfile, RealMatrix, Receiver, UserView,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Gamma};

use common::{log_grid, random_profile, random_shape, rel_err};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Check = fn() -> Outcome;

fn db_to_noise(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

// 1
fn d4_metric() -> Outcome {
    let v = user_view(&builtin_profile(BuiltinProfile::D4), 0).unwrap();
    let k = zf_k0(&v).unwrap();
    outcome((1.25..=1.35).contains(&k), format!("user 1 zf_k0 = {k:.4} (need [1.25, 1.35])"))
}

// 2
fn motivation() -> Outcome {
    let m = ModulationSpec::qpsk();
    let noise = db_to_noise(15.0);
    let macro_p = normalize_columns(&builtin_profile(BuiltinProfile::Macro)).unwrap();
    let sers: Vec<f64> = (0..3)
        .map(|u| ser_from_mixture(&zf_mixture(&user_view(&macro_p, u).unwrap(), noise).unwrap(), &m).unwrap())
        .collect();
    let k0s: Vec<f64> = (0..3).map(|u| zf_k0(&user_view(&macro_p, u).unwrap()).unwrap()).collect();
    let mut gap = f64::INFINITY;
    for i in 0..3 {
        for k in i + 1..3 {
            gap = gap.min((sers[i] - sers[k]).abs() / sers[i].min(sers[k]));
        }
    }
    let order = |x: &[f64]| {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        idx
    };
    let same_order = order(&sers) == order(&k0s);

    let pp = normalize_columns(&builtin_profile(BuiltinProfile::PointToPoint)).unwrap();
    let flat: Vec<f64> = (0..3)
        .map(|u| ser_from_mixture(&zf_mixture(&user_view(&pp, u).unwrap(), noise).unwrap(), &m).unwrap())
        .collect();
    let spread = flat.iter().map(|s| rel_err(*s, flat[0])).fold(0.0, f64::max);

    outcome(
        gap >= 0.1 && same_order && spread <= 1e-10,
        format!(
            "macro SERs {:.3e}/{:.3e}/{:.3e}, min gap {:.1}%, order matches zf_k0: {same_order}; symmetric spread {spread:.1e}",
            sers[0],
            sers[1],
            sers[2],
            100.0 * gap
        ),
    )
}

// 3
fn cdf_agreement() -> Outcome {
    let scenario = Scenario::edge_excited(1, 3);
    let mut worst = (0.0f64, String::new());
    let mut mean_ok = true;
    let mut means = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 1..=10u64 {
        let drop = generate_drop(&scenario, seed).unwrap();
        let v = user_view(&drop.profile, 0).unwrap();
        // ZF SNR scales exactly with 1/sigma^2: aim its mean at 10 dB
        let noise = zf_mixture(&v, 1.0).unwrap().mean() / 10.0;
        for rx in [Receiver::Mmse, Receiver::Zf] {
            let mix = approx_mixture(&v, rx, noise).unwrap();
            let emp = empirical_cdf(&drop.profile, rx, 0, noise, 100_000, 1000 + seed).unwrap();
            let ks = emp.ks(|z| mix.cdf(z));
            let mean_db = 10.0 * emp.mean().log10();
            means = (means.0.min(mean_db), means.1.max(mean_db));
            mean_ok &= (0.0..=20.0).contains(&mean_db);
            if ks > worst.0 {
                worst = (ks, format!("drop {seed} {rx}"));
            }
        }
    }
    outcome(
        worst.0 <= 0.02 && mean_ok,
        format!(
            "max K-S {:.4} ({}) over 10 drops x 2 receivers (need <= 0.02); mean SINR {:.1}..{:.1} dB",
            worst.0, worst.1, means.0, means.1
        ),
    )
}

// 4
fn exactness() -> Outcome {
    let mut worst_flat: f64 = 0.0;
    for (n_r, n) in [(2usize, 1usize), (4, 2), (6, 3), (5, 1), (8, 2)] {
        let p = PowerProfile::new(RealMatrix::new(n_r, n, vec![0.7; n_r * n]).unwrap()).unwrap();
        let noise = 0.4;
        let mix = zf_mixture(&user_view(&p, 0).unwrap(), noise).unwrap();
        let l = (n_r - n + 1) as f64;
        // SNR ~ (0.7 / noise) * Gamma(L, 1)
        let law = Gamma::new(l, noise / 0.7).unwrap();
        for z in log_grid(1e-4, 50.0 * l, 2000) {
            worst_flat = worst_flat.max((mix.cdf(z) - law.cdf(z)).abs());
        }
    }
    let mut worst_hypo: f64 = 0.0;
    let p1 = [0.3, 1.0, 2.5, 0.8];
    let p = PowerProfile::from_rows(&[[p1[0]], [p1[1]], [p1[2]], [p1[3]]]).unwrap();
    for noise in [0.05, 1.0, 3.0] {
        let mix = zf_mixture(&user_view(&p, 0).unwrap(), noise).unwrap();
        let rates: Vec<f64> = p1.iter().map(|q| noise / q).collect();
        for z in log_grid(1e-4, 200.0, 2000) {
            let mut tail = 0.0;
            for (i, li) in rates.iter().enumerate() {
                let w: f64 = rates.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, lk)| lk / (lk - li)).product();
                tail += w * (-li * z).exp();
            }
            worst_hypo = worst_hypo.max((mix.cdf(z) - (1.0 - tail)).abs());
        }
    }
    outcome(
        worst_flat <= 1e-9 && worst_hypo <= 1e-9,
        format!("flat profiles vs Gamma(L) sup {worst_flat:.1e}; single user vs hypoexponential sup {worst_hypo:.1e} (need <= 1e-9)"),
    )
}

/// `|D| Perm(D^-1 Q2)` and `|D| E{|sigma^2 I + H2^H D^-1 H2|}` at real `x = -jt`.
fn direct_denominators(v: &UserView, noise: f64, x: f64) -> (f64, f64) {
    let d: Vec<f64> = v.p1.iter().map(|p| 1.0 + x * p / noise).collect();
    let det: f64 = d.iter().product();
    let inv: Vec<f64> = d.iter().map(|e| 1.0 / e).collect();
    let whitened = v.q2.scale_rows(&inv);
    let zf = det * perm_rect(&whitened).unwrap();
    let shifted = UserView { user: v.user, p1: v.p1.clone(), q2: whitened };
    let mmse = det * mmse_numerator(&shifted, noise).unwrap();
    (zf, mmse)
}

// 5
fn appendix_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_zf, mut worst_mmse) = (0.0f64, 0.0f64);
    for case in 0..20 {
        let (n_r, n) = random_shape(&mut rng, 6, 4);
        let p = random_profile(n_r, n, 500 + case);
        let user = rng.random_range(0..n);
        let v = user_view(&p, user).unwrap();
        let noise = 10f64.powf(rng.random_range(-1.5..0.5));
        let zf = zf_denominator_coeffs(&v, noise).unwrap();
        let mmse = mmse_denominator_coeffs(&v, noise).unwrap();
        for _ in 0..100 {
            let x = rng.random_range(0.0..3.0) * noise;
            let (want_zf, want_mmse) = direct_denominators(&v, noise, x);
            worst_zf = worst_zf.max(rel_err(zf.eval(x), want_zf));
            worst_mmse = worst_mmse.max(rel_err(mmse.eval(x), want_mmse));
        }
    }
    outcome(
        worst_zf <= 1e-10 && worst_mmse <= 1e-10,
        format!("max relative error zf {worst_zf:.1e}, mmse {worst_mmse:.1e} (need <= 1e-10)"),
    )
}

// 6
fn expectation_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let (rows, cols) = random_shape(&mut rng, 5, 3);
        let a = random_profile(rows, cols, 600 + case).matrix().clone();
        let z = if case % 2 == 0 {
            let (mean, se) = expected_gram_det_oracle(&a, 100_000, 60 + case).unwrap();
            (mean - perm_rect(&a).unwrap()).abs() / se
        } else {
            let sigma: Vec<f64> = (0..rows).map(|_| rng.random_range(0.1..3.0)).collect();
            let (mean, se) = expected_weighted_gram_det_oracle(&a, &sigma, 100_000, 60 + case).unwrap();
            (mean - perm_rect(&a.scale_rows(&sigma)).unwrap()).abs() / se
        };
        worst = worst.max(z);
    }
    outcome(worst <= 3.0, format!("largest deviation {worst:.2} standard errors over 20 cases (need <= 3)"))
}

fn fitted_slope(view: &UserView, rx: Receiver, m: &ModulationSpec) -> Option<f64> {
    let mut pts = Vec::new();
    let mut db = -10.0;
    while db <= 160.0 {
        let noise = db_to_noise(db);
        let ser = ser_from_mixture(&approx_mixture(view, rx, noise).ok()?, m).ok()?;
        if ser < 1e-6 {
            break;
        }
        if ser <= 1e-4 {
            pts.push((db / 10.0, ser.log10()));
        }
        db += 0.25;
    }
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

// 7
fn diversity_order() -> Outcome {
    let m = ModulationSpec::qpsk();
    let mut worst: f64 = 0.0;
    let mut report = Vec::new();
    for (i, (n_r, n)) in [(3usize, 3usize), (4, 2), (6, 4)].into_iter().enumerate() {
        let p = random_profile(n_r, n, 700 + i as u64);
        let v = user_view(&p, 0).unwrap();
        let l = (n_r - n + 1) as f64;
        for rx in [Receiver::Zf, Receiver::Mmse] {
            match fitted_slope(&v, rx, &m) {
                Some(s) => {
                    worst = worst.max((-s - l).abs() / l);
                    report.push(format!("({n_r},{n}) {rx} {s:.3}"));
                }
                None => {
                    worst = f64::INFINITY;
                    report.push(format!("({n_r},{n}) {rx} no fit"));
                }
            }
        }
    }
    outcome(worst <= 0.05, format!("slopes {}; worst relative deviation {:.2}% (need <= 5%)", report.join(", "), 100.0 * worst))
}

// 8
fn high_snr_accuracy() -> Outcome {
    let scenario = Scenario::edge_excited(2, 4);
    let m = ModulationSpec::qpsk();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut checked = 0;
    let mut failures = Vec::new();
    for seed in 1..=10u64 {
        let drop = generate_drop(&scenario, seed).unwrap();
        for user in 0..4 {
            let v = user_view(&drop.profile, user).unwrap();
            for rx in [Receiver::Zf, Receiver::Mmse] {
                let asym = high_snr(&v, rx, &m).unwrap();
                let mut db = -20.0;
                while db <= 120.0 {
                    let noise = db_to_noise(db);
                    let ser = ser_from_mixture(&approx_mixture(&v, rx, noise).unwrap(), &m).unwrap();
                    if ser < 1e-9 {
                        break;
                    }
                    if ser <= 1e-4 {
                        let ratio = asym.ser(1.0 / noise) / ser;
                        lo = lo.min(ratio);
                        hi = hi.max(ratio);
                        checked += 1;
                        if !(0.8..=1.25).contains(&ratio) && failures.len() < 4 {
                            failures.push(format!("drop {seed} user {} {rx} at {db} dB: {ratio:.3}", user + 1));
                        }
                    }
                    db += 1.0;
                }
            }
        }
    }
    let pass = checked > 0 && lo >= 0.8 && hi <= 1.25;
    let mut detail = format!("ratio range [{lo:.3}, {hi:.3}] over {checked} points (need [0.8, 1.25])");
    if !failures.is_empty() {
        detail.push_str(&format!("; e.g. {}", failures.join("; ")));
    }
    outcome(pass, detail)
}

// 9
fn dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0usize;
    let mut draws = 0usize;
    for case in 0..10u64 {
        let (n_r, n) = random_shape(&mut rng, 6, 4);
        let p = random_profile(n_r, n, 900 + case);
        let user = rng.random_range(0..n);
        let noise = 10f64.powf(rng.random_range(-2.0..0.0));
        let bad: Vec<bool> = par_map(100_000, |i| {
            let h = sample_channel(&p, 90 + case, i);
            match (mmse_sinr(&h, noise, user), zf_snr(&h, noise, user)) {
                (Ok(a), Ok(b)) => a < b * (1.0 - 1e-9),
                (Ok(_), Err(_)) => false,
                _ => true,
            }
        });
        violations += bad.iter().filter(|&&b| b).count();
        draws += bad.len();
    }
    outcome(violations == 0, format!("{violations} violations in {draws} shared draws"))
}

// 10
fn bpsk_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for db in [0.0, 10.0, 20.0, 30.0] {
        let gamma = 10f64.powf(db / 10.0);
        let ser = ser_from_mixture(&ExponentialMixture::exponential(1.0 / gamma), &ModulationSpec::bpsk()).unwrap();
        worst = worst.max((ser - 0.5 * (1.0 - (gamma / (1.0 + gamma)).sqrt())).abs());
    }
    outcome(worst <= 1e-8, format!("max abs error {worst:.1e} (need <= 1e-8)"))
}

// 11
fn zero_noise_collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let (n_r, n) = random_shape(&mut rng, 7, 4);
        let p = random_profile(n_r, n, 1100 + case);
        let v = user_view(&p, rng.random_range(0..n)).unwrap();
        let mmse = mmse_denominator_coeffs(&v, 0.0).unwrap().unit_coeffs();
        let zf = zf_denominator_coeffs(&v, 1.0).unwrap().unit_coeffs;
        for (i, c) in mmse.iter().enumerate() {
            let want = zf.get(i).copied().unwrap_or(0.0);
            let err = if want == 0.0 { c.abs() } else { rel_err(*c, want) };
            worst = worst.max(err);
        }
    }
    outcome(worst <= 1e-12, format!("max relative mismatch {worst:.1e} (need <= 1e-12)"))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Duration, Check); 11] = [
        (1, "drop metric", Duration::from_secs(1), d4_metric),
        (2, "motivating example", Duration::from_secs(5), motivation),
        (3, "CDF agreement", Duration::from_secs(120), cdf_agreement),
        (4, "exactness cases", Duration::from_secs(1), exactness),
        (5, "coefficient identities", Duration::from_secs(10), appendix_identities),
        (6, "expectation identities", Duration::from_secs(60), expectation_identities),
        (7, "diversity order", Duration::from_secs(30), diversity_order),
        (8, "high-SNR accuracy", Duration::from_secs(60), high_snr_accuracy),
        (9, "receiver dominance", Duration::from_secs(60), dominance),
        (10, "BPSK closed form", Duration::from_secs(1), bpsk_closed_form),
        (11, "zero-noise collapse", Duration::from_secs(5), zero_noise_collapse),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = result.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {id:>2} {name}: {} ({:.2} s, limit {} s{})",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" }
        );
    }
    let strict = std::env::var("MACRODIV_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 {
        println!("all selected acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        if strict { ExitCode::FAILURE } else { ExitCode::SUCCESS }
    }
}


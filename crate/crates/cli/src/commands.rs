use macrodiv_core::mc::MIN_SAMPLES;
use macrodiv_core::profile::builtin_profile_by_name;
use macrodiv_core::{
    approx_mixture, empirical_cdf, generate_drop, high_snr, normalize_columns, semi_analytic_ser, ser_from_mixture,
    user_view, zf_k0, PowerProfile, Receiver, Scenario, UserView,
};

use crate::table::{Cell, Table};
use crate::{CliError, Opts};

type Result<T> = std::result::Result<T, CliError>;

const MAX_SWEEP_POINTS: usize = 100_000;
const GRID_POINTS: usize = 400;
const DEFAULT_SIM_SAMPLES: usize = 100_000;

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses `x` or `start:step:stop` (inclusive) in dB.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| config(format!("bad number '{s}' in sweep '{spec}'")))?;
        if v.is_finite() { Ok(v) } else { Err(config(format!("sweep bound '{s}' is not finite"))) }
    };
    match parts.as_slice() {
        [x] => Ok(vec![num(x)?]),
        [a, s, b] => {
            let (a, s, b) = (num(a)?, num(s)?, num(b)?);
            if !(s > 0.0) || b < a {
                return Err(config(format!("sweep '{spec}' needs step > 0 and start <= stop")));
            }
            let n = ((b - a) / s + 1e-9).floor() as usize + 1;
            if n > MAX_SWEEP_POINTS {
                return Err(config(format!("sweep '{spec}' has more than {MAX_SWEEP_POINTS} points")));
            }
            Ok((0..n).map(|i| a + i as f64 * s).collect())
        }
        _ => Err(config(format!("sweep '{spec}' must be x or start:step:stop"))),
    }
}

fn load_profile(o: &Opts) -> Result<PowerProfile> {
    let p = if let Some(path) = &o.profile {
        PowerProfile::load(path)?
    } else if let Some(name) = &o.builtin {
        builtin_profile_by_name(name)?
    } else if let Some(path) = &o.drop_spec {
        generate_drop(&Scenario::load(path)?, o.seed)?.profile
    } else {
        return Err(config("one of --profile, --builtin or --drop-spec is required"));
    };
    if o.normalize { Ok(normalize_columns(&p)?) } else { Ok(p) }
}

fn user_index(o: &Opts, p: &PowerProfile) -> Result<usize> {
    if o.user == 0 || o.user > p.n() {
        return Err(config(format!("--user must lie in 1..={}, got {}", p.n(), o.user)));
    }
    Ok(o.user - 1)
}

fn require_zf_shape(p: &PowerProfile) -> Result<()> {
    if p.n_r() < p.n() {
        return Err(config(format!("analysis needs n_r >= n, profile is {}x{}", p.n_r(), p.n())));
    }
    Ok(())
}

/// Transmit SNRs in dB from `--snr-db`, or the single point implied by `--noise-db`.
fn snr_points(o: &Opts) -> Result<Vec<f64>> {
    match (&o.snr_db, o.noise_db) {
        (Some(spec), _) => parse_sweep(spec),
        (None, Some(n)) if n.is_finite() => Ok(vec![-n]),
        (None, Some(_)) => Err(config("--noise-db must be finite")),
        (None, None) => Err(config("one of --noise-db or --snr-db is required")),
    }
}

fn noise_of(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

fn samples(o: &Opts, default: usize) -> Result<usize> {
    let n = o.samples.unwrap_or(default);
    if n != 0 && n < MIN_SAMPLES {
        return Err(config(format!("--samples must be 0 or at least {MIN_SAMPLES}, got {n}")));
    }
    Ok(n)
}

fn emit(o: &Opts, table: &Table) -> Result<()> {
    let text = table.render(o.format);
    match &o.out {
        Some(path) => std::fs::write(path, text).map_err(|e| config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn analyze(o: &Opts) -> Result<()> {
    let p = load_profile(o)?;
    let user = user_index(o, &p)?;
    let points = snr_points(o)?;
    let [snr_db] = points.as_slice() else {
        return Err(config("analyze takes a single noise level"));
    };
    let noise = noise_of(*snr_db);
    let view = user_view(&p, user)?;
    let mix = approx_mixture(&view, o.receiver, noise)?;
    let n = samples(o, 0)?;
    let emp = if n > 0 { Some(empirical_cdf(&p, o.receiver, user, noise, n, o.seed)?) } else { None };
    let (lo, hi) = match &emp {
        Some(e) => (e.quantile(0.001), e.quantile(0.999)),
        None => (mix.quantile(0.001), mix.quantile(0.999)),
    };
    let mut columns = vec!["z", "pdf_approx", "cdf_approx"];
    if emp.is_some() {
        columns.push("cdf_empirical");
    }
    let mut table = Table::new(columns);
    for z in log_grid(lo, hi, GRID_POINTS) {
        let mut row = vec![z.into(), mix.pdf(z).into(), mix.cdf(z).into()];
        if let Some(e) = &emp {
            row.push(e.cdf(z).into());
        }
        table.push(row);
    }
    if let Some(e) = &emp {
        table.summarize("ks_distance", e.ks(|z| mix.cdf(z)));
        if e.discarded > 0 {
            table.summarize("discarded", Cell::Int(e.discarded as i64));
        }
    }
    emit(o, &table)
}

pub fn ser(o: &Opts) -> Result<()> {
    let p = load_profile(o)?;
    let user = user_index(o, &p)?;
    require_zf_shape(&p)?;
    let view = user_view(&p, user)?;
    let n = samples(o, 0)?;
    let asym = high_snr(&view, o.receiver, &o.modulation)?;
    let mut columns = vec!["snr_db", "ser_mixture", "ser_highsnr"];
    if n > 0 {
        columns.extend(["ser_mc", "mc_stderr"]);
    }
    let mut table = Table::new(columns);
    for snr_db in snr_points(o)? {
        let noise = noise_of(snr_db);
        let mix = approx_mixture(&view, o.receiver, noise)?;
        let mut row = vec![snr_db.into(), ser_from_mixture(&mix, &o.modulation)?.into(), asym.ser(1.0 / noise).into()];
        if n > 0 {
            let (mean, se) = semi_analytic_ser(&p, o.receiver, user, noise, &o.modulation, n, o.seed)?;
            row.extend([mean.into(), se.into()]);
        }
        table.push(row);
    }
    emit(o, &table)
}

pub fn metric(o: &Opts) -> Result<()> {
    let p = load_profile(o)?;
    require_zf_shape(&p)?;
    let mut table = Table::new(["user", "zf_k0", "diversity", "zf_array_gain", "mmse_array_gain"]);
    for user in 0..p.n() {
        let view = user_view(&p, user)?;
        let zf = high_snr(&view, Receiver::Zf, &o.modulation)?;
        let mmse = if p.n() >= 2 { Some(high_snr(&view, Receiver::Mmse, &o.modulation)?.array_gain) } else { None };
        table.push(vec![
            Cell::Int(user as i64 + 1),
            zf_k0(&view)?.into(),
            Cell::Int(view.diversity() as i64),
            zf.array_gain.into(),
            mmse.into(),
        ]);
    }
    emit(o, &table)
}

pub fn simulate(o: &Opts) -> Result<()> {
    let p = load_profile(o)?;
    let user = user_index(o, &p)?;
    let n = samples(o, DEFAULT_SIM_SAMPLES)?;
    if n == 0 {
        return Err(config("simulate needs --samples > 0"));
    }
    let mut table = Table::new(["snr_db", "mean_sinr", "ser_mc", "mc_stderr", "discarded"]);
    for snr_db in snr_points(o)? {
        let noise = noise_of(snr_db);
        let emp = empirical_cdf(&p, o.receiver, user, noise, n, o.seed)?;
        let (ser, se) = semi_analytic_ser(&p, o.receiver, user, noise, &o.modulation, n, o.seed)?;
        table.push(vec![snr_db.into(), emp.mean().into(), ser.into(), se.into(), Cell::Int(emp.discarded as i64)]);
    }
    emit(o, &table)
}

pub fn drop(o: &Opts) -> Result<()> {
    let Some(path) = &o.drop_spec else {
        return Err(config("drop needs --drop-spec"));
    };
    let scenario = Scenario::load(path)?;
    if scenario.users > scenario.n_r() {
        return Err(config(format!(
            "scenario has {} users but only {} receive antennas; analysis needs n_r >= n",
            scenario.users,
            scenario.n_r()
        )));
    }
    let d = generate_drop(&scenario, o.seed)?;
    for (k, (t, pos)) in d.transmit_power.iter().zip(&d.user_positions).enumerate() {
        eprintln!("user {}: T = {:.2} dB at ({:.4}, {:.4})", k + 1, 10.0 * t.log10(), pos[0], pos[1]);
    }
    let text = d.profile.to_json()?;
    match &o.out {
        Some(out) => std::fs::write(out, text).map_err(|e| config(format!("cannot write {}: {e}", out.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// True when every pair of users with clearly different `zf_k0` has SERs in
/// the same order (larger `zf_k0`, larger SER).
fn ordering_matches(k0: &[f64], ser: &[f64]) -> bool {
    for i in 0..k0.len() {
        for k in 0..k0.len() {
            if k0[i] > k0[k] * (1.0 + 1e-9) && ser[i] < ser[k] * (1.0 - 1e-9) {
                return false;
            }
        }
    }
    true
}

pub fn compare(o: &Opts) -> Result<()> {
    let p = load_profile(o)?;
    require_zf_shape(&p)?;
    let views: Vec<UserView> = (0..p.n()).map(|u| user_view(&p, u)).collect::<macrodiv_core::Result<_>>()?;
    let k0: Vec<f64> = views.iter().map(zf_k0).collect::<macrodiv_core::Result<_>>()?;
    let mut columns = vec!["snr_db".to_string()];
    for u in 1..=p.n() {
        columns.push(format!("u{u}_zf"));
        columns.push(format!("u{u}_mmse"));
    }
    let mut table = Table::new(columns);
    let mut consistent = true;
    for snr_db in snr_points(o)? {
        let noise = noise_of(snr_db);
        let mut row = vec![snr_db.into()];
        let mut zf_ser = Vec::with_capacity(views.len());
        for v in &views {
            let zf = ser_from_mixture(&approx_mixture(v, Receiver::Zf, noise)?, &o.modulation)?;
            let mmse = ser_from_mixture(&approx_mixture(v, Receiver::Mmse, noise)?, &o.modulation)?;
            zf_ser.push(zf);
            row.extend([zf.into(), mmse.into()]);
        }
        consistent &= ordering_matches(&k0, &zf_ser);
        table.push(row);
    }
    for (u, k) in k0.iter().enumerate() {
        table.summarize(format!("zf_k0_u{}", u + 1), *k);
    }
    table.summarize("ordering_matches_zf_k0", Cell::Int(consistent as i64));
    emit(o, &table)
}

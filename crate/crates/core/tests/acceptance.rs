//! Acceptance suite: one test per criterion, each printing a `[PASS]` or
//! `[FAIL]` line. Lines go straight to stdout so they appear in the test log
//! without `--nocapture`.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use scsieve::arith::{make_params, PrimeTable};
use scsieve::equidist::{ems_prime_check, ems_prime_check_exact, ems_sum_check};
use scsieve::largesieve::{check_system, random_systems};
use scsieve::qexpansion::{
    delta_eta_product, delta_from_eisenstein, eigenform, hecke_verify, SUPPORTED_WEIGHTS,
};
use scsieve::shifted::{
    partition_sums, sieve_side_bound, theorem2_report, EigenTable, MultiplicativeFn, TauM,
};
use scsieve::specfun::{
    bessel_k_it, gamma_ratio_check, residue_probe, varphi_s, w_main_term, w_prefactor,
    w_support_window, w_weight, BumpFunction, GAMMA_RATIO_CONSTANT, W_ENVELOPE_CONSTANT,
    W_ENVELOPE_EPSILON,
};

fn verdict(id: &str, pass: bool, detail: String) {
    let line = format!("[{}] {id}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{id} failed: {detail}");
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(f)
}

#[test]
fn c01_exact_hecke_suite() {
    let start = Instant::now();
    let reports = single_threaded(|| {
        SUPPORTED_WEIGHTS
            .iter()
            .map(|&k| hecke_verify(&eigenform(k, 20_000).unwrap()))
            .collect::<Vec<_>>()
    });
    let elapsed = start.elapsed();
    let violations: usize = reports.iter().map(|r| r.violations.len()).sum();
    let pairs: u64 = reports.iter().map(|r| r.pairs_checked).sum();
    verdict(
        "C1",
        violations == 0 && elapsed < Duration::from_secs(60),
        format!(
            "Hecke relations at cutoff 20000 for weights {SUPPORTED_WEIGHTS:?}: {violations} violations over {pairs} coprime pairs, {:.1}s single-threaded (limit 60s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c02_deligne_bound() {
    let mut worst = 0.0f64;
    let mut violations = 0;
    let mut margins = Vec::new();
    let primes = PrimeTable::new(100_000);
    for &k in &SUPPORTED_WEIGHTS {
        let f = eigenform(k, 100_000).unwrap();
        let max = primes
            .primes()
            .iter()
            .map(|&p| f.lambda(p as usize).unwrap().abs())
            .fold(0.0, f64::max);
        violations += primes
            .primes()
            .iter()
            .filter(|&&p| f.lambda(p as usize).unwrap().abs() > 2.0)
            .count();
        worst = worst.max(max);
        margins.push(format!("k={k}: {:.3e}", 2.0 - max));
    }
    verdict(
        "C2",
        violations == 0,
        format!(
            "|lambda(p)| <= 2 for {} primes <= 1e5 and six weights, {violations} violations, max {worst:.12}; margins {}",
            primes.primes().len(),
            margins.join(", ")
        ),
    );
}

#[test]
fn c03_two_delta_constructions() {
    let a = delta_eta_product(10_000).unwrap();
    let b = delta_from_eisenstein(10_000).unwrap();
    let mismatches = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .filter(|(x, y)| x != y)
        .count();
    verdict(
        "C3",
        mismatches == 0 && a.coeffs.len() == b.coeffs.len() && a.cutoff() == 10_000,
        format!(
            "eta product vs (E4^3 - E6^2)/1728 to n = 10000: {mismatches} mismatching coefficients"
        ),
    );
}

#[test]
fn c04_large_sieve_inequality() {
    let start = Instant::now();
    let instances = random_systems(200, 42).unwrap();
    let checks: Vec<_> = instances
        .iter()
        .map(|i| check_system(&i.system, i.q).unwrap())
        .collect();
    let elapsed = start.elapsed();
    let violations = checks.iter().filter(|c| !c.holds).count();
    let tightest = checks
        .iter()
        .map(|c| c.brute as f64 / c.bound)
        .fold(0.0, f64::max);
    let max_n = checks.iter().map(|c| c.n_len).max().unwrap();
    verdict(
        "C4",
        violations == 0 && instances.len() == 200 && elapsed < Duration::from_secs(120),
        format!(
            "200 systems (seed 42, N <= {max_n}): {violations} with count > (N+Q^2)/H, largest count/bound {tightest:.4}, {:.1}s (limit 120s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c05_sifted_set_model_equivalence() {
    let instances = random_systems(50, 2024).unwrap();
    let mut mismatches = 0;
    let mut total = 0u64;
    for inst in &instances {
        let c = check_system(&inst.system, inst.q).unwrap();
        total += c.brute;
        if c.direct != Some(c.brute) || !c.consistent {
            mismatches += 1;
        }
    }
    verdict(
        "C5",
        mismatches == 0,
        format!("50 configurations (seed 2024): class-system count vs direct roughness scan, {mismatches} mismatches, {total} sifted integers in total"),
    );
}

fn partition_grid() -> Vec<(f64, i64, f64)> {
    let mut grid = Vec::new();
    for x in [1e3, 1e4, 1e5] {
        for ell in [1i64, 2, 6] {
            for eps in [0.1, 0.5] {
                grid.push((x, ell, eps));
            }
        }
    }
    grid
}

fn partition_functions() -> Vec<(&'static str, Box<dyn MultiplicativeFn>)> {
    let delta = eigenform(12, 100_010).unwrap();
    vec![
        ("tau2", Box::new(TauM(2))),
        ("|lambda_Delta|", Box::new(EigenTable::new(&delta))),
    ]
}

#[test]
fn c06_partition_identity() {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (_, f) in partition_functions() {
        for (x, ell, eps) in partition_grid() {
            let params = make_params(x, eps).unwrap();
            let p = partition_sums(f.as_ref(), f.as_ref(), &params, ell).unwrap();
            let rel = (p.s_small + p.s_big - p.overlap - p.s_total).abs() / p.s_total;
            worst = worst.max(rel);
            cases += 1;
        }
    }
    verdict(
        "C6",
        worst <= 1e-9 && cases == 36,
        format!("s_small + s_big - overlap = s_total over {cases} cases, worst relative residual {worst:.2e} (limit 1e-9)"),
    );
}

#[test]
fn c07_sieve_side_domination() {
    let mut violations = Vec::new();
    let mut tightest = 0.0f64;
    let mut cases = 0;
    for (name, f) in partition_functions() {
        for (x, ell, eps) in partition_grid() {
            let params = make_params(x, eps).unwrap();
            let p = partition_sums(f.as_ref(), f.as_ref(), &params, ell).unwrap();
            let b = sieve_side_bound(f.as_ref(), f.as_ref(), &params, ell).unwrap();
            tightest = tightest.max(p.s_small / b.total);
            cases += 1;
            if p.s_small > b.total {
                violations.push(format!("{name} x={x} ell={ell} eps={eps}"));
            }
        }
    }
    verdict(
        "C7",
        violations.is_empty(),
        format!(
            "s_small <= sieve-side bound over {cases} cases: {} violations {violations:?}, largest s_small/bound {tightest:.4}",
            violations.len()
        ),
    );
}

#[test]
fn c08_ems_inequality() {
    let mut grid_fail = 0;
    for j in 0..=20_000 {
        let lambda = j as f64 * 1e-4;
        if !ems_prime_check(lambda).unwrap().holds {
            grid_fail += 1;
        }
        if !ems_prime_check_exact(j, 10_000).unwrap().2 {
            grid_fail += 1;
        }
    }
    let eq1 = ems_prime_check(1.0).unwrap();
    let eq2 = ems_prime_check(2.0).unwrap();
    let equality = (eq1.lhs - eq1.rhs).abs() <= 1e-12 && (eq2.lhs - eq2.rhs).abs() <= 1e-12;
    let mut sums = Vec::new();
    let mut sum_ok = true;
    for &k in &SUPPORTED_WEIGHTS {
        let f = eigenform(k, 100_000).unwrap();
        let s = ems_sum_check(&f, 100_000).unwrap();
        sum_ok &= s.holds && s.exact_failures.is_empty();
        sums.push(format!("k={k}: {:.4} <= {:.4}", s.lhs, s.rhs));
    }
    verdict(
        "C8",
        grid_fail == 0 && equality && sum_ok,
        format!(
            "prime inequality on [0,2] step 1e-4 (float and exact): {grid_fail} failures; equality at 1 and 2: {equality}; sums at 1e5: {}",
            sums.join(", ")
        ),
    );
}

/// `K₀(x)` from its power-log series.
fn k0_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut harmonic, mut i0, mut tail) = (1.0f64, 0.0f64, 1.0f64, 0.0f64);
    for k in 1..200 {
        term *= q / (k * k) as f64;
        harmonic += 1.0 / k as f64;
        i0 += term;
        tail += term * harmonic;
    }
    -((x / 2.0).ln() + 0.577_215_664_901_532_9) * i0 + tail
}

#[test]
fn c09_special_functions() {
    let k0 = bessel_k_it(0.0, 1.0).unwrap();
    let k0_err = (k0 - k0_series(1.0)).abs();
    let phi_err = [0.5, 1.0, 5.0]
        .iter()
        .map(|&t| (varphi_s(Complex64::new(0.5, t)).unwrap().norm() - 1.0).abs())
        .fold(0.0, f64::max);
    let residue = residue_probe(6).unwrap();
    let res_err = (residue - 3.0 / PI).abs();
    verdict(
        "C9",
        k0_err <= 1e-8 && phi_err <= 1e-10 && res_err <= 1e-6,
        format!(
            "K_0(1) error {k0_err:.2e} (limit 1e-8); max ||phi(1/2+it)| - 1| {phi_err:.2e} (limit 1e-10); (s-1)phi(s) at 1+1e-6 = {residue:.9}, error {res_err:.2e} (limit 1e-6)"
        ),
    );
}

#[test]
fn c10_gamma_ratio() {
    let eps = 0.1;
    let points = [
        Complex64::new(0.5, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 1.0),
        Complex64::new(2.0, 0.0),
        Complex64::new(1.0 + eps, 10.0),
    ];
    let mut worst = 0.0f64;
    let mut exact = true;
    for k in [100u32, 1_000, 10_000] {
        for &s in &points {
            worst = worst.max(gamma_ratio_check(k, s).unwrap().normalized);
        }
        for s in [0.0, 1.0] {
            exact &= gamma_ratio_check(k, Complex64::new(s, 0.0)).unwrap().error == 0.0;
        }
    }
    verdict(
        "C10",
        worst <= GAMMA_RATIO_CONSTANT && exact,
        format!("normalized error max {worst:.4} over k in {{1e2,1e3,1e4}}, s in {{1/2,1,1+i,2,1.1+10i}} (limit {GAMMA_RATIO_CONSTANT}); exact zero at s = 0, 1: {exact}"),
    );
}

#[test]
fn c11_w_weight_main_term() {
    let g = BumpFunction::canonical();
    let mut worst = (0.0f64, 0u32, 0.0f64, 0i64, 0u64);
    let mut points = 0;
    for k in [50u32, 100, 500] {
        for y in [1.0, 10.0] {
            for ell in [0i64, 1, 2] {
                let (lo, hi) = w_support_window(ell, y, k, &g);
                for n in lo.saturating_sub(2).max(1)..=hi + 2 {
                    let w = w_weight(n, ell, y, k, &g).unwrap();
                    let m = w_main_term(n, ell, y, k, &g, W_ENVELOPE_EPSILON).unwrap();
                    let ratio = (w - m.main).abs() / m.envelope;
                    points += 1;
                    if ratio > worst.0 {
                        worst = (ratio, k, y, ell, n);
                    }
                }
            }
        }
    }
    let unit = [50u32, 100, 500]
        .iter()
        .all(|&k| (1..200).all(|n| w_prefactor(n, 0, k) == 1.0));
    let pinned = w_weight(8, 1, 10.0, 100, &g).unwrap();
    let pinned_ok = (pinned / 3.212_302_580_321_994e-36 - 1.0).abs() < 1e-8;
    verdict(
        "C11",
        worst.0 <= W_ENVELOPE_CONSTANT && unit && pinned_ok,
        format!(
            "|W - main| / envelope (eps = {W_ENVELOPE_EPSILON}) max {:.4} at k={}, Y={}, ell={}, n={} over {points} points (limit {W_ENVELOPE_CONSTANT}); prefactor at ell=0 exactly 1: {unit}; W(8,1,10,100) = {pinned:.15e}",
            worst.0, worst.1, worst.2, worst.3, worst.4
        ),
    );
}

#[test]
fn c12_theorem2_trend() {
    let start = Instant::now();
    let delta = EigenTable::new(&eigenform(12, 1_000_001).unwrap());
    let mut ratios = Vec::new();
    let mut big_shares = Vec::new();
    for x in [1e4, 1e5, 1e6] {
        let r = theorem2_report(&delta, &delta, x, 0.1, 1).unwrap();
        ratios.push(r.ratio);
        let r5 = theorem2_report(&delta, &delta, x, 0.5, 1).unwrap();
        big_shares.push(r5.s_big / r5.s_total);
    }
    let elapsed = start.elapsed();
    let bounded = ratios[2] <= 2.0 * ratios[0];
    let shrinking = big_shares[2] < big_shares[0];
    verdict(
        "C12",
        bounded && shrinking && elapsed < Duration::from_secs(600),
        format!(
            "ratio S/[x (log x)^0.1 M(x) tau(1)] at x = 1e4, 1e5, 1e6: {:.6}, {:.6}, {:.6} (1e6 within 2x of 1e4: {bounded}); s_big/s_total at eps 0.5: {:.4}, {:.4}, {:.4} (shrinking: {shrinking}); {:.1}s (limit 600s)",
            ratios[0],
            ratios[1],
            ratios[2],
            big_shares[0],
            big_shares[1],
            big_shares[2],
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c13_cli_determinism() {
    let commands: Vec<Vec<&str>> = vec![
        vec!["eigenform", "--weight", "20", "--cutoff", "1000"],
        vec![
            "shifted",
            "--weight",
            "12",
            "--x",
            "20000",
            "--ell",
            "2",
            "--epsilon",
            "0.5",
            "--sieve-side",
        ],
        vec!["sievecheck", "--count", "200", "--seed", "42"],
        vec![
            "sievecheck",
            "--count",
            "200",
            "--seed",
            "42",
            "--format",
            "json",
        ],
        vec!["mk", "--weight", "26", "--cutoff", "20000"],
        vec!["specfun", "bessel", "--t", "0,1,5", "--w", "0.1,1,10"],
        vec!["specfun", "theta", "--s", "0.5+0.5i,0.5+1i,0.5+5i,0.8+2i"],
        vec![
            "specfun", "wweight", "--k", "50,100", "--Y", "1,10", "--ell", "0,1,2",
        ],
        vec![
            "specfun",
            "gammaratio",
            "--k",
            "100,1000,10000",
            "--s",
            "0.5,1,1+i,2,1.1+10i",
        ],
        vec!["specfun", "aell", "--ell", "1,2,-3", "--y", "0.1,1"],
    ];
    let run = |args: &[&str], threads: &str| {
        std::process::Command::new(env!("CARGO_BIN_EXE_scsieve"))
            .args(args)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .expect("binary runs")
    };
    let mut differing = Vec::new();
    for args in &commands {
        let first = run(args, "1");
        let second = run(args, "8");
        let third = run(args, "8");
        if first.status.code() != Some(0)
            || first.stdout != second.stdout
            || first.stdout != third.stdout
        {
            differing.push(args.join(" "));
        }
    }
    verdict(
        "C13",
        differing.is_empty(),
        format!(
            "{} commands run three times (1 and 8 threads): {} with differing output or nonzero exit {differing:?}",
            commands.len(),
            differing.len()
        ),
    );
}

//! Acceptance gate: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starszego::asymptotics::{
    bulk_density, corner_densities, e_classical, e_of_log, euler_maclaurin_sum, gauge_split, semiclassical_prediction,
    weak_ratio_oracle, weak_ratio_prediction, Orders,
};
use starszego::catalogue::{self, Pauli};
use starszego::finite_sections::{bocg_evaluate, build_block_tn, build_tn, hankel_decay_probe, logdet};
use starszego::moyal::{
    laurent_section, plain_to_grid, semiclassical_inverse, semiclassical_log, star_inverse, star_log, star_product,
    WindowSpec,
};
use starszego::symbol::{project, reflect, sample_symbol, smooth_to_grid, SymbolGrid};
use starszego::wiener_hopf::{numeric_factorize, tridiagonal_factorize, tridiagonal_symbol, FactorPair, Side};
use starszego::{HalfInt, ProjectionKind, C};
use std::time::Instant;

type Outcome = (bool, String);

fn h(v: f64) -> HalfInt {
    HalfInt::from_f64(v).unwrap()
}

fn c(v: f64) -> C<f64> {
    C::new(v, 0.0)
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn star_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (ka, kb) = (rng.gen_range(0..=8usize), rng.gen_range(0..=8usize));
        let mut random = |band: usize| {
            SymbolGrid::from_fn(h(0.0), h(64.0), band, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        };
        let (a, b) = (random(ka), random(kb));
        let ab = star_product(&a, &b).unwrap();
        let m = 16;
        for first in [h(24.0), h(24.5)] {
            let off = HalfInt(2 * kb as i64);
            let la = laurent_section(&a, first - off, m + 2 * kb).unwrap();
            let lb = laurent_section(&b, first - off, m + 2 * kb).unwrap();
            let prod = la.matmul(&lb).submatrix(kb, kb, m, m);
            worst = worst.max(prod.sub(&laurent_section(&ab, first, m).unwrap()).max_abs());
        }
    }
    (worst <= 1e-10, format!("max |L(a*b) - L(a)L(b)| = {worst:.2e} over 20 pairs (tol 1e-10)"))
}

fn reconstruction(f: &FactorPair<f64>, a: &SymbolGrid<f64>, lo: HalfInt, hi: HalfInt) -> f64 {
    let prod = match f.side {
        Side::Left => star_product(&f.plus, &f.minus).unwrap(),
        Side::Right => star_product(&f.minus, &f.plus).unwrap(),
    };
    prod.max_diff_on(a, lo, hi)
}

fn tridiagonal_wiener_hopf() -> Outcome {
    let mut rec: f64 = 0.0;
    let mut agree: f64 = 0.0;
    for omega in [0.5, 1.0] {
        let spec = catalogue::example2(omega);
        let a = tridiagonal_symbol(&spec, h(-60.0), h(60.0), 1e-12).unwrap();
        let win = WindowSpec::for_decay(0.6, 1e-15);
        for side in [Side::Left, Side::Right] {
            let closed = tridiagonal_factorize(&spec, side, h(-60.0), h(60.0), 1e-12).unwrap();
            rec = rec.max(reconstruction(&closed, &a, h(-40.0), h(40.0)));
            let num = numeric_factorize(&a, side, &win).unwrap();
            agree = agree
                .max(num.plus.max_diff_on(&closed.plus, h(-10.0), h(10.0)))
                .max(num.minus.max_diff_on(&closed.minus, h(-10.0), h(10.0)));
        }
    }
    (
        rec <= 1e-10 && agree <= 1e-8,
        format!("reconstruction {rec:.2e} (tol 1e-10), numeric vs closed {agree:.2e} (tol 1e-8)"),
    )
}

fn bocg() -> Outcome {
    let ns = [5usize, 10, 20, 30];
    let trunc = 40;
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    let mut rates_ok = true;
    let toeplitz = sample_symbol(|_, p: f64| c(p.cos().exp()), h(-140.0), h(170.0), 20, 128).unwrap();
    let win = WindowSpec::new(16, 1e-15);
    let cases: Vec<(&str, SymbolGrid<f64>, FactorPair<f64>, FactorPair<f64>)> = vec![
        (
            "toeplitz",
            toeplitz.clone(),
            numeric_factorize(&toeplitz, Side::Left, &win).unwrap(),
            numeric_factorize(&toeplitz, Side::Right, &win).unwrap(),
        ),
        {
            let spec = catalogue::example2(0.5);
            let a = tridiagonal_symbol(&spec, h(-120.0), h(150.0), 1e-12).unwrap();
            let l = tridiagonal_factorize(&spec, Side::Left, h(-120.0), h(150.0), 1e-12).unwrap();
            let r = tridiagonal_factorize(&spec, Side::Right, h(-120.0), h(150.0), 1e-12).unwrap();
            ("example2", a, l, r)
        },
    ];
    for (name, a, l, r) in &cases {
        for &n in &ns {
            worst = worst.max(bocg_evaluate(a, n, l, r, trunc).unwrap().residual);
        }
        let probe = hankel_decay_probe(l, r, &[2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 25, 30], trunc).unwrap();
        let ok = match (probe.rate, probe.predicted_rate) {
            (Some(m), Some(p)) => within(m / p, 1.0 / 1.5, 1.5),
            _ => false,
        };
        rates_ok &= ok;
        notes.push(format!("{name} rate {:?} vs b-decay product {:?}", probe.rate, probe.predicted_rate));
    }
    (worst <= 1e-8 && rates_ok, format!("max residual {worst:.2e} (tol 1e-8); {}", notes.join("; ")))
}

fn weak_szego() -> Outcome {
    let spec = catalogue::tridiagonal_constant();
    let a = tridiagonal_symbol(&spec, h(-5.0), h(70.0), 1e-12).unwrap();
    let left = tridiagonal_factorize(&spec, Side::Left, h(-5.0), h(70.0), 1e-12).unwrap();
    let ratio = weak_ratio_oracle(&a, 60).unwrap();
    let pred = weak_ratio_prediction(&left, 60).unwrap();
    let defect = (ratio / 2.0 - 1.0).norm();
    let (mut d0, mut d1) = (1.0f64, 2.25f64);
    let mut rec: f64 = 0.0;
    for n in 2..=60 {
        let d2 = 2.25 * d1 - 0.5 * d0;
        (d0, d1) = (d1, d2);
        let ld = logdet(&build_tn(&a, n).unwrap());
        rec = rec.max((ld.log_abs - d1.ln()).abs());
    }
    (
        defect <= 1e-6 && rec <= 1e-10 && (pred - c(2.0)).norm() <= 1e-12,
        format!("|ratio/2 - 1| = {defect:.2e} at n=60 (tol 1e-6); recursion defect {rec:.2e}; prediction {:.12}", pred.re),
    )
}

fn classical_szego() -> Outcome {
    let a = sample_symbol(|_, p: f64| c(p.cos().exp()), h(0.0), h(201.0), 24, 128).unwrap();
    let ld = logdet(&build_tn(&a, 200).unwrap());
    let dev = (ld.log() - c(0.25)).norm();
    let e = e_classical(&a).unwrap();
    (
        dev <= 1e-6 && (e - c(0.25)).norm() <= 1e-12,
        format!("|log det T_200 - 0.25| = {dev:.2e} (tol 1e-6); E(a) = {:.14}", e.re),
    )
}

fn example3_pipeline() -> Outcome {
    let residual = |nu: f64| {
        let n = (4.0 / nu).round() as usize;
        let s = catalogue::example3(nu);
        let a = smooth_to_grid(&s, h(0.0), h(n as f64 + 1.0), 24, 128).unwrap();
        let oracle = logdet(&build_tn(&a, n).unwrap()).log();
        (oracle - semiclassical_prediction(&s, n, Orders::ALL, 256, 1e-11).unwrap().total).norm()
    };
    let r: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&nu| residual(nu)).collect();
    let ratios = [r[0] / r[1], r[1] / r[2]];
    let mut closed: f64 = 0.0;
    for nu in [0.2, 0.1] {
        let s = catalogue::example3(nu);
        for x in [0.5, 3.0, 7.5, 20.5] {
            let y = x * nu;
            let d = bulk_density(&s, x, 64, true, true);
            closed = closed.max((d - c(catalogue::example3_bulk_average(nu, y))).norm());
            let (c0, c1) = corner_densities(&s, x, 64);
            for sign in [1.0, -1.0] {
                let v = c0 + c1 * sign;
                closed = closed.max((v - c(catalogue::example3_corner_average(nu, y, sign))).norm());
            }
        }
    }
    (
        ratios.iter().all(|&q| within(q, 6.0, 20.0)) && closed <= 1e-8,
        format!(
            "residuals {:.3e}/{:.3e}/{:.3e} at nu=0.2/0.1/0.05, halving ratios {:.2}, {:.2} (want [6, 20]); closed-form defect {closed:.2e}",
            r[0], r[1], r[2], ratios[0], ratios[1]
        ),
    )
}

fn example4_closed_form() -> Outcome {
    let ns = [100usize, 400, 1600];
    let r: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let s = catalogue::example4(1.0, n);
            let a = smooth_to_grid(&s, h(0.0), h(n as f64 + 1.0), 20, 128).unwrap();
            (logdet(&build_tn(&a, n).unwrap()).log_abs - catalogue::example4_closed_form(1.0, n)).abs()
        })
        .collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let alpha = -slope;
    (
        within(alpha, 0.35, 0.7) && r[2] <= 0.05 && r[0] > r[1] && r[1] > r[2],
        format!("residuals {:.3e}/{:.3e}/{:.3e}, fitted alpha {alpha:.3} (want [0.35, 0.7])", r[0], r[1], r[2]),
    )
}

fn block_pauli() -> Outcome {
    let r: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let pl = Pauli::new(eps, 0.5, 0.3);
            let a = pl.block_symbol(h(0.0), h(61.0), 14, 64).unwrap();
            (logdet(&build_block_tn(&a, 60).unwrap()).log() - c(pl.prediction())).norm()
        })
        .collect();
    let q = [r[0] / r[1], r[1] / r[2]];
    (
        q.iter().all(|&v| within(v, 10.0, 24.0)),
        format!("residuals {:.3e}/{:.3e}/{:.3e}, halving ratios {:.2}, {:.2} (want [10, 24])", r[0], r[1], r[2], q[0], q[1]),
    )
}

fn semiclassical_kernels() -> Outcome {
    // Physical window y in [0, 1.5]; grids in lattice units.
    let errors = |nu: f64| {
        let s = catalogue::example3(nu);
        let win = WindowSpec::new(20, 1e-15);
        let span = 1.5 / nu;
        let (lo, hi) = (h(-40.0), h((span + 40.0).round()));
        let a = smooth_to_grid(&s, lo, hi, 24, 128).unwrap();
        let (ilo, ihi) = (h(0.0), h(span.round()));
        let exact_log = star_log(&a, &win).unwrap();
        let approx_log = plain_to_grid(&semiclassical_log(&s).unwrap(), lo, hi, 24, 128).unwrap();
        let zeta = c(10.0);
        let shifted = a.map_coeffs(|_, k, v| if k == 0 { zeta - v } else { -v });
        let exact_inv = star_inverse(&shifted, &win).unwrap();
        let approx_inv = plain_to_grid(&semiclassical_inverse(&s, zeta, 1, &[(0.0, 0.0)], 1e-8).unwrap(), lo, hi, 24, 128).unwrap();
        (exact_log.max_diff_on(&approx_log, ilo, ihi), exact_inv.max_diff_on(&approx_inv, ilo, ihi))
    };
    let e1 = errors(0.1);
    let e2 = errors(0.05);
    let q = [e1.0 / e2.0, e1.1 / e2.1];
    (
        q.iter().all(|&v| within(v, 10.0, 24.0)),
        format!(
            "log errors {:.2e} -> {:.2e} (ratio {:.2}), resolvent errors {:.2e} -> {:.2e} (ratio {:.2}); want [10, 24]",
            e1.0, e2.0, q[0], e1.1, e2.1, q[1]
        ),
    )
}

fn euler_maclaurin() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for k in [1usize, 2] {
        for _ in 0..5 {
            let coef: Vec<f64> = (0..=2 * k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let poly = coef.clone();
            let g = move |m: usize, y: f64| {
                let mut v = 0.0;
                for (i, ci) in poly.iter().enumerate().skip(m) {
                    let falling: f64 = (0..m).map(|j| (i - j) as f64).product();
                    v += ci * falling * y.powi((i - m) as i32);
                }
                c(v)
            };
            let (n, nu) = (rng.gen_range(3..40usize), rng.gen_range(0.05..0.5));
            let got = euler_maclaurin_sum(&g, n, nu, k, 1e-15).unwrap().re;
            let want: f64 = (1..=n).map(|j| g(0, j as f64 * nu).re).sum();
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    (worst <= 1e-12, format!("max relative defect {worst:.2e} for degree 2k, k = 1, 2 (tol 1e-12)"))
}

fn gauge() -> Outcome {
    let s = catalogue::example3(0.2);
    let monos: [&[(usize, usize)]; 5] =
        [&[(1, 0), (0, 1), (1, 1)], &[(1, 1), (1, 1)], &[(0, 1), (0, 1), (2, 0)], &[(1, 0), (1, 0), (0, 2)], &[(2, 0), (0, 2)]];
    let mut worst: f64 = 0.0;
    for m in monos {
        worst = worst.max(gauge_split(m, &s, 0.5, 20.5, 64, 1e-13).unwrap().defect);
    }
    let d_g = gauge_split(&[(0, 0)], &s, 0.5, 20.5, 64, 1e-13).unwrap().delta.norm();
    let d_h = gauge_split(&[(2, 0), (0, 2)], &s, 0.5, 20.5, 64, 1e-13).unwrap().delta.norm();
    (
        worst <= 1e-9 && d_g <= 1e-9 && d_h <= 1e-9,
        format!("max |F - G - Delta| = {worst:.2e} (tol 1e-9); Delta[g] = {d_g:.1e}, Delta[g11 g22] = {d_h:.1e}"),
    )
}

fn structural() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let coef: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let a = sample_symbol(
        |x, p: f64| {
            c(3.0 + coef[0] * (0.2 * x).sin())
                + C::from_polar(1.0 + coef[1] * x.cos(), p)
                + C::from_polar(0.5 + coef[2] * (0.1 * x).cos(), -p)
                + C::from_polar(coef[3], 2.0 * p)
                + C::from_polar(coef[4], -2.0 * p)
        },
        h(-5.0),
        h(30.0),
        2,
        16,
    )
    .unwrap();
    let mut refl: f64 = 0.0;
    for n in [5usize, 12, 20] {
        let d = logdet(&build_tn(&a, n).unwrap()).log();
        let dr = logdet(&build_tn(&reflect(&a, n as i64), n).unwrap()).log();
        refl = refl.max(((dr - d).exp() - c(1.0)).norm());
    }
    let sum = project(&a, ProjectionKind::Plus).add(&project(&a, ProjectionKind::Minus)).unwrap();
    let proj = sum.max_diff(&a);
    let cf = coef.clone();
    let g = move |p: f64| c(cf[0] * p.cos()) + C::from_polar(cf[1], 2.0 * p) + C::from_polar(cf[5], -p);
    let smooth = starszego::symbol::SmoothSymbol::new("homogeneous", 1.0, move |m1, m2, _, p: f64| {
        if m1 > 0 {
            return c(0.0);
        }
        let i = C::new(0.0, 1.0);
        let d = |k: f64| (i * k).powi(m2 as i32);
        c(coef[0] * 0.5) * (C::from_polar(1.0, p) * d(1.0) + C::from_polar(1.0, -p) * d(-1.0))
            + C::from_polar(coef[1], 2.0 * p) * d(2.0)
            + C::from_polar(coef[5], -p) * d(-1.0)
    });
    let (c0, _) = corner_densities(&smooth, 3.0, 128);
    let corner = (c0 - e_of_log(g, 128) * 0.5).norm();
    (
        refl <= 1e-10 && proj == 0.0 && corner <= 1e-8,
        format!("reflection {refl:.2e} (tol 1e-10); Plus+Minus defect {proj:.1e}; corner vs E/2 {corner:.2e} (tol 1e-8)"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("star-algebra representation", star_algebra),
        ("tridiagonal Wiener-Hopf", tridiagonal_wiener_hopf),
        ("BOCG identity", bocg),
        ("weak Szego", weak_szego),
        ("classical strong Szego", classical_szego),
        ("semiclassical pipeline, example 3", example3_pipeline),
        ("locally-1/2 closed form, example 4", example4_closed_form),
        ("block Pauli example", block_pauli),
        ("semiclassical kernels", semiclassical_kernels),
        ("Euler-Maclaurin exactness", euler_maclaurin),
        ("gauge split", gauge),
        ("structural invariants", structural),
    ];
    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    let out = std::panic::catch_unwind(f).unwrap_or_else(|e| {
                        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                        (false, format!("panicked: {}", msg.unwrap_or_default()))
                    });
                    (out, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), ((ok, detail), secs))) in criteria.iter().zip(&results).enumerate() {
        println!("criterion {:>2} [{}] {name}: {detail} ({secs:.1}s)", i + 1, if *ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

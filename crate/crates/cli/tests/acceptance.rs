//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::f64::consts::{E, PI};
use std::path::Path;
use std::process::Command;

use transversal::bones::{self, TraceOptions};
use transversal::family::{check_separation, flat_beta, flat_chebyshev_beta};
use transversal::kneading::{lap_numbers, monotonicity_scan};
use transversal::lifting::{
    critical_value_sum, iterate_lifts, lift_motion, lift_tower, make_motion, phi_and_derivative, schwarz_sampling,
    theta_regularity, Grid,
};
use transversal::linalg::{max_abs, CMat};
use transversal::orbit::{critical_orbit, enumerate_superstable, solve_superstable, MarkedOrbit, OrbitOptions};
use transversal::transfer::{
    assemble_a, assemble_aj, assemble_d, certify, exceptional_values, is_exceptional, reparametrize_check, spectrum,
    Reparam,
};
use transversal::{re, Exec, FamilySpec, Scalar};

const QUAD: FamilySpec = FamilySpec::MonicAdditive { d: 2 };

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn orbit(spec: &FamilySpec, c: f64) -> Result<MarkedOrbit, String> {
    critical_orbit(spec, &[re(c)], OrbitOptions::default()).map_err(|e| e.to_string())
}

// Plain bisection on c^3 + 2c^2 + c + 1, the period-3 center polynomial of z^2 + c.
fn cubic_root_oracle() -> f64 {
    let p = |c: f64| ((c + 2.0) * c + 1.0) * c + 1.0;
    let (mut lo, mut hi) = (-2.0f64, -1.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c1_superstable() -> Outcome {
    let s3 = solve_superstable(&QUAD, 3, -1.8, -1.7).map_err(|e| e.to_string())?;
    let s2 = solve_superstable(&QUAD, 2, -1.5, -0.5).map_err(|e| e.to_string())?;
    let e3 = (s3.c - cubic_root_oracle()).abs();
    let e2 = (s2.c + 1.0).abs();
    check(e3 <= 1e-10 && e2 <= 1e-12, format!("q=3 error {e3:.1e}, q=2 error {e2:.1e}"))
}

fn c2_transfer_identities() -> Outcome {
    let e = enumerate_superstable(&QUAD, -2.0, 0.25, 12).map_err(|e| e.to_string())?;
    let mut worst = [0.0f64; 4];
    let mut half_dist: f64 = 0.0;
    let mut min_q = f64::INFINITY;
    for p in &e.params {
        let cert = certify(&QUAD, &[re(p.c)]).map_err(|e| format!("c={}: {e}", p.c))?;
        worst[0] = worst[0].max(cert.spectral_radius);
        worst[1] = worst[1].max(cert.checks.closed_form_detpoly.unwrap_or(f64::INFINITY));
        worst[2] = worst[2].max(cert.checks.drho_identity);
        worst[3] = worst[3].max(cert.checks.prop43_rootsets);
        min_q = min_q.min(if cert.positive { cert.q.re } else { f64::NEG_INFINITY });
        if p.q >= 2 {
            let o = orbit(&QUAD, p.c)?;
            let eig = spectrum(&assemble_a(&o).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            half_dist = half_dist.max(eig.iter().map(|z| (z - re(0.5)).norm()).fold(f64::INFINITY, f64::min));
        }
    }
    let n = e.params.len();
    check(
        n >= 200 && worst[0] < 1.0 - 1e-6 && worst[1] <= 1e-10 && half_dist <= 1e-8 && min_q > 0.0 && worst[2] <= 1e-8,
        format!(
            "{n} parameters; max radius {:.4}, detpoly {:.1e}, 1/2 distance (q >= 2) {half_dist:.1e}, min Q {min_q:.3e}, Drho {:.1e}, root sets {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn aj_residual(c: f64) -> Result<f64, String> {
    let o = orbit(&QUAD, c)?;
    let aj = assemble_aj(&o).map_err(|e| e.to_string())?;
    let n = aj.dim();
    let ex = exceptional_values(&o);
    let mut worst: f64 = 0.0;
    for k in 0..40 {
        let rho = Scalar::from_polar(0.1 + 0.035 * k as f64, 0.61 * k as f64);
        if is_exceptional(&ex, rho, 1e-6) {
            continue;
        }
        let lhs = (CMat::identity(n, n) - aj.entries.clone() * rho).determinant();
        let rhs = assemble_d(&o, rho).determinant();
        worst = worst.max((lhs - rhs).norm() / (1.0 + rhs.norm()));
    }
    Ok(worst)
}

fn c3_aj_equals_d() -> Outcome {
    let (p, q) = (aj_residual(-1.0)?, aj_residual(-2.0)?);
    check(p <= 1e-8 && q <= 1e-8, format!("residual c=-1 {p:.1e}, c=-2 {q:.1e}"))
}

fn c4_reparametrization() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut det1: f64 = 0.0;
    for c1 in [-1.0, -1.3107026413368328, -1.7548776662466927, -2.0] {
        let id = reparametrize_check(c1, Reparam::Identity).map_err(|e| e.to_string())?;
        let qc = reparametrize_check(c1, Reparam::QuadraticCritical { v1: c1 }).map_err(|e| e.to_string())?;
        worst = worst.max(id.residual).max(qc.residual);
        det1 = det1.max(qc.det_d1.norm());
    }
    check(worst <= 1e-8 && det1 <= 1e-8, format!("max residual {worst:.1e}, |det D_nu(1)| {det1:.1e}"))
}

fn c5_lifting() -> Outcome {
    let o = orbit(&QUAD, -1.0)?;
    let x = o.gp.iter().position(|z| z.re < -0.5).ok_or("no -1 in g(P)")?;
    let v: Vec<Scalar> = (0..o.gp.len()).map(|k| re(if k == x { 1.0 } else { 0.0 })).collect();
    let m = make_motion(&o.gp, &v, Grid::disk(0.3, 16, 12)).map_err(|e| e.to_string())?;
    let lifted = lift_motion(&QUAD, &o, &m, 4).map_err(|e| e.to_string())?;
    let mut closed: f64 = 0.0;
    for r in 0..16 {
        for s in 0..12 {
            let lam = m.grid.lambda(r, s);
            closed = closed.max((lifted.samples[r][s][x] + (re(1.0) - lam).sqrt()).norm());
        }
    }
    let seed = make_motion(&o.gp, &v, Grid::default()).map_err(|e| e.to_string())?;
    let d = iterate_lifts(&QUAD, &o, &seed, 40).map_err(|e| e.to_string())?;
    let rate = d.rate.unwrap_or(f64::NAN);
    let p = phi_and_derivative(&QUAD, &o, &o.gp).map_err(|e| e.to_string())?;
    let a = assemble_a(&o).map_err(|e| e.to_string())?.entries;
    let dphi = max_abs(&(p.derivative - a));
    check(
        closed <= 1e-8 && (rate - 0.5).abs() <= 0.1 && dphi <= 1e-5,
        format!("closed-form lift error {closed:.1e}, rate {rate:.4}, |DPhi - A| {dphi:.1e}"),
    )
}

fn c6_negative_control() -> Outcome {
    let spec = FamilySpec::FlatAdditive { ell: 1.0, b: 2.0 * E };
    let beta = flat_chebyshev_beta(1.0, 2.0 * E).map_err(|e| e.to_string())?;
    let o = orbit(&spec, -beta)?;
    let v: Vec<Scalar> = o.gp.iter().map(|z| re(z.re.signum())).collect();
    let m = make_motion(&o.gp, &v, Grid::real_ray(0.05, 4)).map_err(|e| e.to_string())?;
    let d = iterate_lifts(&spec, &o, &m, 100).map_err(|e| e.to_string())?;
    let d0 = d.deviations[0];
    let k = d.deviations.iter().position(|&x| x > 10.0 * d0);
    let cert = certify(&spec, &[re(-beta)]).map_err(|e| e.to_string())?;
    let qn = cert.q.norm();
    check(
        k.is_some() && qn < 1e-6,
        format!(
            "d_0 {d0:.2e}, d_k > 10 d_0 first at k = {k:?}, max d_k {:.3}, lifts computed {}, |Q| {qn:.1e}",
            d.deviations.iter().copied().fold(0.0, f64::max),
            d.deviations.len() - 1
        ),
    )
}

fn c7_flat_positive() -> Outcome {
    let spec = FamilySpec::FlatAdditive { ell: 1.0, b: 6.0 };
    let sep = check_separation(&spec).map_err(|e| e.to_string())?;
    let beta = flat_beta(1.0, 6.0).map_err(|e| e.to_string())?;
    let e = enumerate_superstable(&spec, -beta, 0.0, 8).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    let mut radius: f64 = 0.0;
    for p in &e.params {
        match certify(&spec, &[re(p.c)]) {
            Ok(c) => {
                radius = radius.max(c.spectral_radius);
                if !(c.positive && c.spectral_radius < 1.0) {
                    bad.push(p.c);
                }
            }
            Err(_) => bad.push(p.c),
        }
    }
    check(
        sep.robust && !e.params.is_empty() && bad.is_empty(),
        format!("robust {}, {} parameters in [-{beta:.6}, 0], max radius {radius:.4}, failures {bad:?}", sep.robust, e.params.len()),
    )
}

fn c8_kneading() -> Outcome {
    let v = monotonicity_scan(&QUAD, -2.0, 0.25, 2000, 64).map_err(|e| e.to_string())?;
    let t = lap_numbers(&QUAD, -2.0, 16).map_err(|e| e.to_string())?;
    let h = t.entropy_estimate;
    let cs: Vec<f64> = (0..=100).map(|i| -2.0 + 2.25 * i as f64 / 100.0).collect();
    let tables = Exec::default().map(&cs, |&c| lap_numbers(&QUAD, c, 12));
    let sub = t.is_submultiplicative() && tables.iter().all(|r| r.as_ref().is_ok_and(|t| t.is_submultiplicative()));
    check(
        v.is_empty() && (h - 2f64.ln()).abs() <= 0.05 && sub,
        format!("{} violations, entropy at c=-2 {h:.6}, {} lap tables submultiplicative: {sub}", v.len(), tables.len() + 1),
    )
}

fn c9_geometry() -> Outcome {
    let mut viol = 0;
    for theta in [PI / 10.0, PI / 4.0, PI / 2.0] {
        let r = schwarz_sampling(theta, 10_000, 0).map_err(|e| e.to_string())?;
        viol += r.violations + r.refined_violations;
    }
    let p = FamilySpec::PowerAdditive { ell_minus: 8.0, ell_plus: 8.0 };
    let s = solve_superstable(&p, 3, -1.2, -1.0).map_err(|e| e.to_string())?;
    let o = orbit(&p, s.c)?;
    let negatives = o.gp.iter().filter(|z| z.re < -1e-9).count();
    let v: Vec<Scalar> = o.gp.iter().map(|z| re(if z.re < -0.5 { 1.0 } else { 0.0 })).collect();
    let m = make_motion(&o.gp, &v, Grid::disk(0.02, 16, 6)).map_err(|e| e.to_string())?;
    let t = lift_tower(&p, &o, &m, 20, 4, Exec::default()).map_err(|e| e.to_string())?;
    let mut regular = t.motions.len() == 21 && t.breakdown.is_none();
    let mut worst = Vec::new();
    for mo in &t.motions {
        let r = theta_regularity(mo, 8.0, PI / 4.0).map_err(|e| e.to_string())?;
        regular &= r.regular();
        worst.push(r.worst_angle);
    }
    let non_inc = (3..worst.len().saturating_sub(1)).all(|k| worst[k + 1] <= worst[k]);
    let sum = critical_value_sum(&o, 0);
    check(
        viol == 0 && negatives == 1 && regular && non_inc && sum.re > 0.0,
        format!(
            "Schwarz violations {viol}; c = {:.10}, regular for 20 lifts {regular}, worst angle {:.2e} -> {:.2e} non-increasing {non_inc}, sum {:.6}",
            s.c,
            worst[0],
            worst.last().copied().unwrap_or(f64::NAN),
            sum.re
        ),
    )
}

fn c10_bones() -> Outcome {
    let opts = TraceOptions { bounds: Some([0.1, 2.0, -100.0, 100.0]), both_directions: true, n_steps: 5000, ..Default::default() };
    let c1 = bones::trace_bone(1, (1.0, 3.0), opts).map_err(|e| e.to_string())?;
    let dev = c1.points.iter().map(|&(a, b)| (b - a - 2.0 * a * a * a).abs()).fold(0.0, f64::max);
    let span = c1.points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let mut curves = bones::trace_components(3, [0.2, 1.2, -1.0, 1.0], 200, TraceOptions::default(), Exec::default());
    let mut ok = dev <= 1e-6 && span.0 <= 0.1 + 0.01 && span.1 >= 2.0 - 0.01 && !curves.is_empty();
    let mut details = Vec::new();
    for c in curves.iter_mut() {
        let mut values = Vec::new();
        for e in c.events.clone() {
            let r = bones::directional_transversality(c, &e).map_err(|e| e.to_string())?;
            values.push(r.value);
        }
        let flips = bones::orientation_flips(c).len();
        let rep = bones::entropy_along(c, 10, Exec::default());
        ok &= c.events.len() <= 1 && values.iter().all(|&v| v > 0.0) && flips == 0 && rep.monotone && rep.opposite_at_crossings;
        details.push(format!(
            "{} points, {} crossing(s), values {values:.3?}, flips {flips}, entropy monotone {} opposite {}",
            c.points.len(),
            c.events.len(),
            rep.monotone,
            rep.opposite_at_crossings
        ));
    }
    check(ok, format!("q=1 deviation {dev:.1e} over a in [{:.3}, {:.3}]; {}", span.0, span.1, details.join("; ")))
}

fn run_cli(dir: &Path, tag: &str, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = dir.join(tag);
    let status = Command::new(env!("CARGO_BIN_EXE_transversal"))
        .args(args)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr)));
    }
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn c11_reproducibility() -> Outcome {
    let quad = r#"{"family":"monic_additive","d":2}"#;
    let flat = r#"{"family":"flat_additive","ell":1,"b":5.536563656918091}"#;
    let cubic = r#"{"family":"cubic"}"#;
    let matrix: Vec<Vec<&str>> = vec![
        vec!["solve", "--family", quad, "--q", "3", "--bracket", "-1.8", "-1.7"],
        vec!["solve", "--family", quad, "--q", "7", "--range", "-2", "0.25", "--format", "csv"],
        vec!["orbit", "--family", quad, "--c", "-2"],
        vec!["certify", "--family", quad, "--c", "-1"],
        vec!["certify", "--family", quad, "--q", "8", "--range", "-2", "0.25", "--format", "csv"],
        vec!["spectrum", "--family", quad, "--c", "-1.7548776662466927"],
        vec!["scan", "--family", quad, "--range", "-2", "0.25", "--grid", "300", "--format", "csv"],
        vec!["scan", "--family", flat, "--range", "-4", "0", "--grid", "200", "--format", "svg"],
        vec!["lift", "--family", quad, "--c", "-1", "--kmax", "30", "--theta", "0.7853981633974483", "--n", "2000", "--seed", "3"],
        vec!["bones", "--family", cubic, "--format", "csv"],
        vec!["bones", "--family", cubic, "--format", "svg"],
        vec!["entropy", "--family", quad, "--c", "-2", "--n", "14"],
        vec!["entropy", "--family", cubic, "--point", "1", "0", "--n", "10", "--jobs", "2"],
    ];
    let dir = std::env::temp_dir().join(format!("transversal-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut same = 0;
    let mut differing = Vec::new();
    for (i, args) in matrix.iter().enumerate() {
        let a = run_cli(&dir, &format!("{i}a"), args)?;
        let b = run_cli(&dir, &format!("{i}b"), args)?;
        if a == b && !a.is_empty() && a.ends_with(b"\n") {
            same += 1;
        } else {
            differing.push(args[0]);
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    check(differing.is_empty(), format!("{same}/{} invocations byte-identical, differing {differing:?}", matrix.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("superstable solving", c1_superstable),
        ("transfer-operator identities, quadratic q <= 12", c2_transfer_identities),
        ("label operator determinant equals D(rho)", c3_aj_equals_d),
        ("reparametrized determinant identity", c4_reparametrization),
        ("lifting dynamics at c = -1", c5_lifting),
        ("flat Chebyshev negative control", c6_negative_control),
        ("flat family positive case", c7_flat_positive),
        ("kneading monotonicity and entropy", c8_kneading),
        ("sector geometry and power-family lifts", c9_geometry),
        ("cubic bones", c10_bones),
        ("CLI reproducibility", c11_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = std::time::Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.2}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

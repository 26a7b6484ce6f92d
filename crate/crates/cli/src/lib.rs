//! Command-line front end. [`run`] parses argv, dispatches one subcommand and
//! returns the process exit code: 0 on success, 2 on usage errors, 1 on
//! computational failures. Every failure writes one JSON object to stderr.

pub mod args;
pub mod svg;

use std::io::Write;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};
use transversal::bones::{self, BoneCurve, TraceOptions};
use transversal::family::cubic_chart_inverse;
use transversal::kneading::{lap_numbers_with, scan_table};
use transversal::lifting::{self, make_motion, Grid};
use transversal::orbit::{critical_orbit, enumerate_superstable_with, solve_superstable, OrbitOptions};
use transversal::transfer::{assemble_a, certify, det_poly, spectrum};
use transversal::{re, Exec, FamilySpec, Scalar};

use args::{Cli, Format, Subcommand, Velocity};

/// Bifurcation diagrams keep the last `KEEP` of `TRANSIENT + KEEP` iterates.
pub const TRANSIENT: usize = 900;
pub const KEEP: usize = 100;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Compute(transversal::Error),
    Io(String),
}

impl From<transversal::Error> for Failure {
    fn from(e: transversal::Error) -> Self {
        Failure::Compute(e)
    }
}

type Out = Result<String, Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn error_json(f: &Failure) -> Value {
    match f {
        Failure::Usage(m) => json!({ "error": "usage", "message": m }),
        Failure::Io(m) => json!({ "error": "io", "message": m }),
        Failure::Compute(e) => {
            let kind = format!("{e:?}");
            let kind = kind.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("error").to_string();
            json!({ "error": kind, "message": e.to_string() })
        }
    }
}

/// Run the command line `argv` (including the program name), writing results to
/// `stdout` or the `--out` file.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let v = json!({ "error": "usage", "message": e.kind().to_string(), "usage": e.to_string() });
            let _ = writeln!(stderr, "{v}");
            return 2;
        }
    };
    let result = match cli.jobs {
        Some(0) => usage("--jobs must be positive"),
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Io(e.to_string())),
        },
        None => dispatch(&cli),
    };
    let result = result.and_then(|text| match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string())),
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "{}", error_json(&f));
            match f {
                Failure::Usage(_) => 2,
                _ => 1,
            }
        }
    }
}

fn exec(cli: &Cli) -> Exec {
    match cli.jobs {
        Some(1) => Exec::Sequential,
        _ => Exec::default(),
    }
}

fn dispatch(cli: &Cli) -> Out {
    let spec = FamilySpec::from_json(&cli.family).map_err(|e| Failure::Usage(format!("--family: {e}")))?;
    if cli.format == Format::Svg && !matches!(cli.command, Subcommand::Scan | Subcommand::Bones) {
        return usage("svg output is available for scan and bones");
    }
    match cli.command {
        Subcommand::Solve => solve(cli, &spec),
        Subcommand::Orbit => orbit(cli, &spec),
        Subcommand::Certify => certify_cmd(cli, &spec),
        Subcommand::Spectrum => spectrum_cmd(cli, &spec),
        Subcommand::Scan => scan(cli, &spec),
        Subcommand::Lift => lift(cli, &spec),
        Subcommand::Bones => bones_cmd(cli, &spec),
        Subcommand::Entropy => entropy(cli, &spec),
    }
}

fn to_json<T: Serialize>(v: &T) -> Out {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// CSV float with 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    // no negative zero
    format!("{:.16e}", x + 0.0)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn pair(v: &Option<Vec<f64>>, name: &str) -> Result<Option<(f64, f64)>, Failure> {
    Ok(v.as_ref().map(|p| (p[0], p[1]))).and_then(|p| match p {
        Some((lo, hi)) if !(lo.is_finite() && hi.is_finite()) => usage(format!("--{name} must be finite")),
        p => Ok(p),
    })
}

/// Deformation coordinates: `--c` for one-parameter families, `--point a b` for the cubic.
fn params(cli: &Cli, spec: &FamilySpec) -> Result<Vec<Scalar>, Failure> {
    match spec {
        FamilySpec::Cubic => match pair(&cli.point, "point")? {
            Some((a, b)) => {
                let (w1, w2) = cubic_chart_inverse(a, b);
                Ok(vec![re(w1), re(w2)])
            }
            None => usage("the cubic family needs --point A B"),
        },
        _ => match cli.c {
            Some(c) => Ok(vec![re(c)]),
            None => usage("--c is required"),
        },
    }
}

fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T, Failure> {
    v.map_or_else(|| usage(format!("--{name} is required")), Ok)
}

fn solve(cli: &Cli, spec: &FamilySpec) -> Out {
    let q = need(cli.q, "q")?;
    if let Some((lo, hi)) = pair(&cli.bracket, "bracket")? {
        let s = solve_superstable(spec, q, lo, hi)?;
        return match cli.format {
            Format::Csv => Ok(csv("q,c,residual", [vec![s.q.to_string(), fmt_f(s.c), fmt_f(s.residual)]])),
            _ => to_json(&s),
        };
    }
    let Some((lo, hi)) = pair(&cli.range, "range")? else {
        return usage("solve needs --bracket LO HI or --range LO HI");
    };
    let e = enumerate_superstable_with(spec, lo, hi, q, exec(cli))?;
    match cli.format {
        Format::Csv => Ok(csv(
            "q,c,residual",
            e.params.iter().map(|s| vec![s.q.to_string(), fmt_f(s.c), fmt_f(s.residual)]),
        )),
        _ => to_json(&e),
    }
}

fn orbit(cli: &Cli, spec: &FamilySpec) -> Out {
    let w = params(cli, spec)?;
    let o = critical_orbit(spec, &w, OrbitOptions::default())?;
    match cli.format {
        Format::Csv => {
            let mut rows = Vec::new();
            for (j, pts) in o.points.iter().enumerate() {
                for (i, z) in pts.iter().enumerate() {
                    let d = o.deriv[j][i];
                    rows.push(vec![j.to_string(), i.to_string(), fmt_f(z.re), fmt_f(z.im), fmt_f(d.re), fmt_f(d.im)]);
                }
            }
            Ok(csv("j,i,re,im,dg_re,dg_im", rows))
        }
        _ => to_json(&o),
    }
}

fn certify_cmd(cli: &Cli, spec: &FamilySpec) -> Out {
    if cli.c.is_some() || cli.point.is_some() {
        let cert = certify(spec, &params(cli, spec)?)?;
        return match cli.format {
            Format::Csv => Ok(csv(
                "c,Q_re,Q_im,spectral_radius,positive",
                [vec![fmt_f(cert.w[0].re), fmt_f(cert.q.re), fmt_f(cert.q.im), fmt_f(cert.spectral_radius), cert.positive.to_string()]],
            )),
            _ => to_json(&cert),
        };
    }
    let (Some((lo, hi)), Some(q)) = (pair(&cli.range, "range")?, cli.q) else {
        return usage("certify needs --c (or --point) or --range LO HI with --q");
    };
    let e = enumerate_superstable_with(spec, lo, hi, q, exec(cli))?;
    let cs: Vec<f64> = e.params.iter().map(|p| p.c).collect();
    let certs = transversal::transfer::certify_batch(spec, &cs, exec(cli));
    match cli.format {
        Format::Csv => Ok(csv(
            "c,q,Q_re,Q_im,spectral_radius,positive",
            e.params.iter().zip(&certs).map(|(p, r)| match r {
                Ok(c) => vec![
                    fmt_f(p.c),
                    p.q.to_string(),
                    fmt_f(c.q.re),
                    fmt_f(c.q.im),
                    fmt_f(c.spectral_radius),
                    c.positive.to_string(),
                ],
                Err(_) => vec![fmt_f(p.c), p.q.to_string(), String::new(), String::new(), String::new(), String::new()],
            }),
        )),
        _ => {
            let arr: Vec<Value> = certs
                .iter()
                .map(|r| match r {
                    Ok(c) => serde_json::to_value(c).unwrap_or(Value::Null),
                    Err(e) => error_json(&Failure::Compute(e.clone())),
                })
                .collect();
            to_json(&arr)
        }
    }
}

fn spectrum_cmd(cli: &Cli, spec: &FamilySpec) -> Out {
    let w = params(cli, spec)?;
    let o = critical_orbit(spec, &w, OrbitOptions::default())?;
    let a = assemble_a(&o)?;
    let eig = spectrum(&a)?;
    let poly = det_poly(&a)?;
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    match cli.format {
        Format::Csv => Ok(csv("re,im,modulus", eig.iter().map(|z| vec![fmt_f(z.re), fmt_f(z.im), fmt_f(z.norm())]))),
        _ => to_json(&json!({
            "dim": a.dim(),
            "eigenvalues": eig.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "spectral_radius": radius,
            "det_poly": poly.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        })),
    }
}

/// Last `keep` of `transient + keep` iterates of the turning point for each of `columns` parameters.
pub fn bifurcation_points(spec: &FamilySpec, lo: f64, hi: f64, columns: usize, transient: usize, keep: usize, exec: Exec) -> Vec<(f64, f64)> {
    let Ok(x0) = spec.turning_point() else { return Vec::new() };
    if !(hi > lo) || columns == 0 {
        return Vec::new();
    }
    let cols = exec.map_range(columns, |i| {
        let c = if columns == 1 { lo } else { lo + (hi - lo) * i as f64 / (columns - 1) as f64 };
        let bound = spec.escape_bound(c);
        let mut x = x0;
        let mut out = Vec::with_capacity(keep);
        for k in 0..transient + keep {
            match spec.eval(&[re(c)], re(x)) {
                Ok(y) if y.re.is_finite() && y.re.abs() <= bound => x = y.re,
                _ => break,
            }
            if k >= transient {
                out.push((c, x));
            }
        }
        out
    });
    cols.into_iter().flatten().collect()
}

pub fn bifurcation_svg(spec: &FamilySpec, lo: f64, hi: f64, columns: usize, keep: usize, exec: Exec) -> String {
    let pts = bifurcation_points(spec, lo, hi, columns, TRANSIENT, keep.min(1000), exec);
    let (ylo, yhi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let mut plot = svg::Plot::new((lo, hi), (ylo, yhi));
    plot.points(&pts, "black");
    plot.finish("c", "x")
}

fn scan(cli: &Cli, spec: &FamilySpec) -> Out {
    let Some((lo, hi)) = pair(&cli.range, "range")? else {
        return usage("scan needs --range LO HI");
    };
    let grid = cli.grid.unwrap_or(400);
    if cli.format == Format::Svg {
        return Ok(bifurcation_svg(spec, lo, hi, grid, KEEP, exec(cli)));
    }
    let n = cli.n.unwrap_or(64);
    let (rows, violations) = scan_table(spec, lo, hi, grid, n, 12, exec(cli))?;
    match cli.format {
        Format::Csv => Ok(csv(
            "c,kneading,lambda_n,entropy",
            rows.iter().map(|r| {
                vec![
                    fmt_f(r.c),
                    r.kneading.as_ref().map(|k| format!("\"{}\"", k.to_symbol_string())).unwrap_or_default(),
                    r.lambda_n.map(|l| l.to_string()).unwrap_or_default(),
                    fmt_opt(r.entropy),
                ]
            }),
        )),
        _ => to_json(&json!({ "rows": rows, "violations": violations })),
    }
}

fn lift(cli: &Cli, spec: &FamilySpec) -> Out {
    let w = params(cli, spec)?;
    let o = critical_orbit(spec, &w, OrbitOptions::default())?;
    let k_max = cli.kmax.unwrap_or(50);
    if k_max > 200 {
        return usage("--kmax must be at most 200");
    }
    let radius = cli.radius.unwrap_or(0.05);
    let v: Vec<Scalar> = match cli.velocity {
        Velocity::Critical => {
            let cv: Vec<Option<usize>> = (0..o.nu()).map(|j| o.label_index[j].get(1).copied().flatten()).collect();
            (0..o.gp.len()).map(|x| re(if cv.contains(&Some(x)) { 1.0 } else { 0.0 })).collect()
        }
        Velocity::Sign => o.gp.iter().map(|x| re(if x.re < 0.0 { -1.0 } else { 1.0 })).collect(),
    };
    let grid = match cli.velocity {
        Velocity::Sign => Grid::real_ray(radius, cli.grid.unwrap_or(4)),
        Velocity::Critical => Grid::disk(radius, 16, cli.grid.unwrap_or(6)),
    };
    let seed = make_motion(&o.gp, &v, grid)?;
    let tower = lifting::lift_tower(spec, &o, &seed, k_max, 4, exec(cli))?;
    let diag = lifting::diagnostics(&tower);
    let sectors = match cli.theta {
        Some(theta) => {
            let ell = cli.ell.unwrap_or(2.0);
            let r: Result<Vec<_>, _> = tower.motions.iter().map(|m| lifting::theta_regularity(m, ell, theta)).collect();
            let schwarz = lifting::schwarz_sampling(theta, cli.n.unwrap_or(10_000), cli.seed)?;
            Some((r?, schwarz))
        }
        None => None,
    };
    match cli.format {
        Format::Csv => Ok(csv(
            "k,sup_norm,deviation,worst_angle",
            diag.sup_norms.iter().zip(&diag.deviations).enumerate().map(|(k, (m, d))| {
                let angle = sectors.as_ref().map(|(s, _)| s[k].worst_angle);
                vec![k.to_string(), fmt_f(*m), fmt_f(*d), fmt_opt(angle)]
            }),
        )),
        _ => {
            let mut v = serde_json::to_value(&diag).map_err(|e| Failure::Io(e.to_string()))?;
            if let Some((s, schwarz)) = sectors {
                v["sectors"] = serde_json::to_value(&s).map_err(|e| Failure::Io(e.to_string()))?;
                v["schwarz"] = serde_json::to_value(schwarz).map_err(|e| Failure::Io(e.to_string()))?;
            }
            to_json(&v)
        }
    }
}

#[derive(Serialize)]
struct BoneSummary {
    curve: BoneCurve,
    crossings: Vec<Value>,
    orientation_flips: Vec<usize>,
    ordering_changes: Vec<usize>,
    entropy: bones::EntropyReport,
}

fn bones_cmd(cli: &Cli, spec: &FamilySpec) -> Out {
    if *spec != FamilySpec::Cubic {
        return usage("bones needs the cubic family");
    }
    let q = cli.q.unwrap_or(3);
    if q == 0 {
        return usage("--q must be positive");
    }
    let opts = TraceOptions { step: cli.step.unwrap_or(0.01), ..Default::default() };
    let mut curves = match (&cli.point, &cli.bbox) {
        (Some(p), _) => {
            let o = TraceOptions { both_directions: true, bounds: cli.bbox.as_ref().map(|b| [b[0], b[1], b[2], b[3]]), ..opts };
            vec![bones::trace_bone(q, (p[0], p[1]), o)?]
        }
        (None, b) => {
            let bx = b.as_ref().map_or([0.2, 1.2, -1.0, 1.0], |b| [b[0], b[1], b[2], b[3]]);
            bones::trace_components(q, bx, cli.grid.unwrap_or(200), opts, exec(cli))
        }
    };
    let n = cli.n.unwrap_or(10);
    let ex = exec(cli);
    let summaries: Vec<BoneSummary> = curves
        .iter_mut()
        .map(|c| {
            let entropy = bones::entropy_along(c, n, ex);
            let crossings = c
                .events
                .clone()
                .iter()
                .map(|e| match bones::directional_transversality(c, e) {
                    Ok(r) => serde_json::to_value(r).unwrap_or(Value::Null),
                    Err(err) => error_json(&Failure::Compute(err)),
                })
                .collect();
            BoneSummary {
                orientation_flips: bones::orientation_flips(c),
                ordering_changes: bones::ordering_changes(c),
                curve: c.clone(),
                crossings,
                entropy,
            }
        })
        .collect();
    match cli.format {
        Format::Csv => {
            let mut rows = Vec::new();
            for (k, s) in summaries.iter().enumerate() {
                let c = &s.curve;
                for (i, (&(a, b), t)) in c.points.iter().zip(&c.tangents).enumerate() {
                    let flag = c.events.iter().any(|e| e.index == i);
                    rows.push(vec![
                        k.to_string(),
                        fmt_f(a),
                        fmt_f(b),
                        fmt_f(t.e_ab[0]),
                        fmt_f(t.e_ab[1]),
                        fmt_opt(c.lap_entropy[i]),
                        u8::from(flag).to_string(),
                    ]);
                }
            }
            Ok(csv("curve,a,b,E_a,E_b,entropy,event_flag", rows))
        }
        Format::Svg => {
            let all: Vec<(f64, f64)> = summaries.iter().flat_map(|s| s.curve.points.iter().copied()).collect();
            let (alo, ahi, blo, bhi) = all.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
                |(a0, a1, b0, b1), p| (a0.min(p.0), a1.max(p.0), b0.min(p.1), b1.max(p.1)),
            );
            let mut plot = svg::Plot::new((alo, ahi), (blo, bhi));
            for s in &summaries {
                plot.polyline(&s.curve.points, "steelblue");
                for e in &s.curve.events {
                    plot.marker(e.a, e.b, "crimson");
                }
            }
            Ok(plot.finish("a", "b"))
        }
        Format::Json => to_json(&summaries),
    }
}

fn entropy(cli: &Cli, spec: &FamilySpec) -> Out {
    let n = cli.n.unwrap_or(16);
    if *spec == FamilySpec::Cubic {
        let Some((a, b)) = pair(&cli.point, "point")? else {
            return usage("the cubic family needs --point A B");
        };
        let h = bones::bimodal_entropy(a, b, n, exec(cli))?;
        return match cli.format {
            Format::Csv => Ok(csv("a,b,n,entropy", [vec![fmt_f(a), fmt_f(b), n.to_string(), fmt_f(h)]])),
            _ => to_json(&json!({ "a": a, "b": b, "n": n, "entropy": h })),
        };
    }
    let c = need(cli.c, "c")?;
    let t = lap_numbers_with(spec, c, n, exec(cli))?;
    match cli.format {
        Format::Csv => Ok(csv(
            "n,laps",
            t.laps.iter().enumerate().map(|(k, l)| vec![(k + 1).to_string(), l.to_string()]),
        )),
        _ => to_json(&json!({
            "c": c,
            "laps": t.laps,
            "entropy": t.entropy_estimate,
            "fit_error": t.fit_error,
            "submultiplicative": t.is_submultiplicative(),
        })),
    }
}

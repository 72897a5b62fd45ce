use std::f64::consts::{E, FRAC_PI_2};
use std::fs;
use std::path::{Path, PathBuf};

use hotpn::analysis::{self, Series};
use hotpn::gradients::{self, GRADCHECK_OPS};
use hotpn::hosvd::{epn_tensor, tpe_distance};
use hotpn::io;
use hotpn::sketch::{make_plan, SketchPlan};
use hotpn::tensor::{frobenius_norm, pool as pool_features};
use hotpn::{Error, PnSpec, Result};
use serde::Serialize;

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Pass,
    Fail,
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) => 3,
        Error::Degenerate(_) => 4,
        Error::InvalidInput(_) | Error::Shape(_) | Error::Parse { .. } | Error::Io(_) => 2,
    }
}

pub fn parse_spec(s: &str) -> std::result::Result<PnSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    print_line(&text)
}

fn print_line(text: &str) -> Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn pool(features: &Path, order: usize, center: bool, unweighted: bool, out: &Path) -> Result<Outcome> {
    let mut table = io::read_features(features)?;
    if unweighted {
        table.weights = None;
    }
    let mut fs = table.to_feature_set()?;
    if center {
        fs = fs.centered();
    }
    let t = pool_features(&fs, order)?;
    io::write_hotp(out, &t)?;
    log::info!("pooled {} vectors of dim {} into order {order}", fs.len(), fs.dim());
    Ok(Outcome::Pass)
}

pub fn epn(tensor: &Path, spec: &PnSpec, normalize: bool, out: &Path) -> Result<Outcome> {
    let t = io::read_hotp(tensor)?;
    let g = epn_tensor(&t, spec, normalize)?;
    io::write_hotp(out, &g)?;
    Ok(Outcome::Pass)
}

/// `x` with 12 significant digits.
fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..=15).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, x)
    } else {
        format!("{x:.11e}")
    }
}

pub fn distance(a: &Path, b: &Path, tpe_spec: Option<&PnSpec>, normalize: bool) -> Result<Outcome> {
    let ta = io::read_hotp(a)?;
    let tb = io::read_hotp(b)?;
    if ta.dims() != tb.dims() {
        return Err(Error::Shape(format!("{:?} vs {:?}", ta.dims(), tb.dims())));
    }
    let d = match tpe_spec {
        Some(spec) => tpe_distance(&epn_tensor(&ta, spec, normalize)?, &epn_tensor(&tb, spec, normalize)?)?,
        None => frobenius_norm(&ta.sub(&tb)?),
    };
    print_line(&sig12(d))?;
    Ok(Outcome::Pass)
}

#[derive(Clone, Copy, Debug)]
pub enum VerifyTarget {
    MaxExp,
    Gamma,
    OdeMaxExp,
    OdeGamma,
    Gaps,
    Combined,
}

const ODE_MAXEXP_TOL: f64 = 1e-8;
const ODE_GAMMA_TOL: f64 = 1e-12;

#[derive(Serialize)]
struct GapRow {
    eta: f64,
    eps1: f64,
    eps2: f64,
    ordered: bool,
}

#[derive(Serialize)]
struct GapsReport {
    pass: bool,
    rows: Vec<GapRow>,
}

#[derive(Serialize)]
struct ResidualReport {
    grid: String,
    pass: bool,
    tolerance: f64,
    max_residual: f64,
    /// `(λ, t)` of the largest residual.
    worst: (f64, f64),
}

fn grid_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    analysis::linspace(lo, hi, n + 1)
}

fn write_samples(dir: &Path, name: &str, samples: &[analysis::GapSample]) -> Result<()> {
    let mut w = csv_writer(&dir.join(name))?;
    write_record(&mut w, &["param", "lambda", "gap"])?;
    for s in samples {
        write_record(&mut w, &[s.param.to_string(), s.lambda.to_string(), s.gap.to_string()])?;
    }
    finish(w)
}

fn csv_writer(path: &Path) -> Result<fs::File> {
    Ok(fs::File::create(path)?)
}

fn write_record<S: AsRef<str>>(w: &mut fs::File, fields: &[S]) -> Result<()> {
    use std::io::Write;
    let line: Vec<&str> = fields.iter().map(AsRef::as_ref).collect();
    writeln!(w, "{}", line.join(","))?;
    Ok(())
}

fn finish(mut w: fs::File) -> Result<()> {
    use std::io::Write;
    w.flush()?;
    Ok(())
}

fn residual_sweep(
    grid: String,
    lambdas: &[f64],
    times: &[f64],
    tol: f64,
    f: impl Fn(f64, f64) -> Result<f64>,
    csv: Option<PathBuf>,
) -> Result<ResidualReport> {
    let mut rows = Vec::new();
    let mut report = ResidualReport {
        grid,
        pass: true,
        tolerance: tol,
        max_residual: 0.0,
        worst: (f64::NAN, f64::NAN),
    };
    for &t in times {
        for &l in lambdas {
            let r = f(l, t)?;
            if r > report.max_residual || report.worst.0.is_nan() {
                report.max_residual = r;
                report.worst = (l, t);
            }
            rows.push((l, t, r));
        }
    }
    report.pass = report.max_residual < tol;
    if let Some(path) = csv {
        let mut w = csv_writer(&path)?;
        write_record(&mut w, &["lambda", "t", "residual"])?;
        for (l, t, r) in rows {
            write_record(&mut w, &[l.to_string(), t.to_string(), r.to_string()])?;
        }
        finish(w)?;
    }
    Ok(report)
}

fn bound_outcome(report: &analysis::BoundReport) -> Outcome {
    if report.pass {
        Outcome::Pass
    } else {
        eprintln!(
            "bound violated: min gap {:e} at param {}, lambda {}",
            report.min_gap, report.worst.0, report.worst.1
        );
        Outcome::Fail
    }
}

pub fn verify(
    target: VerifyTarget,
    etas: &[f64],
    ts: &[f64],
    step: f64,
    t_scale: f64,
    out_dir: Option<&Path>,
) -> Result<Outcome> {
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
    }
    let default_etas: Vec<f64> = (1..=64).map(f64::from).collect();
    let eta_sweep = if etas.is_empty() { &default_etas[..] } else { etas };
    match target {
        VerifyTarget::MaxExp => {
            let report = analysis::verify_maxexp_bound_scaled(eta_sweep, step, t_scale)?;
            if let Some(dir) = out_dir {
                let mut all = Vec::new();
                for &eta in eta_sweep {
                    all.extend(analysis::maxexp_gap_samples(eta, step, t_scale)?.1);
                }
                write_samples(dir, "maxexp_hdp.csv", &all)?;
            }
            print_json(&report)?;
            Ok(bound_outcome(&report))
        }
        VerifyTarget::Gamma => {
            let default_ts = [0.05, 0.1, 0.2, 1.0 / E];
            let ts = if ts.is_empty() { &default_ts[..] } else { ts };
            let report = analysis::verify_gamma_bound_scaled(ts, step, t_scale)?;
            if let Some(dir) = out_dir {
                let mut all = Vec::new();
                for &t in ts {
                    all.extend(analysis::gamma_gap_samples(t, step, t_scale)?);
                }
                write_samples(dir, "gamma_hdp.csv", &all)?;
            }
            print_json(&report)?;
            Ok(bound_outcome(&report))
        }
        VerifyTarget::Combined => {
            let report = analysis::verify_combined_bound(eta_sweep, step)?;
            print_json(&report)?;
            Ok(bound_outcome(&report))
        }
        VerifyTarget::Gaps => {
            let default_gap_etas: Vec<f64> = [1.0, 1.5]
                .into_iter()
                .chain((1..=10).map(|k| f64::from(1u32 << k)))
                .collect();
            let etas = if etas.is_empty() { &default_gap_etas[..] } else { etas };
            let rows = etas
                .iter()
                .map(|&eta| {
                    let (eps1, eps2) = analysis::bound_gaps(eta)?;
                    Ok(GapRow {
                        eta,
                        eps1,
                        eps2,
                        ordered: eps1 <= eps2,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let report = GapsReport {
                pass: rows.iter().all(|r| r.ordered),
                rows,
            };
            print_json(&report)?;
            Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
        }
        VerifyTarget::OdeMaxExp => {
            let report = residual_sweep(
                "lambda in [0.05, 0.95] step 0.01, t in [0.05, 0.35] step 0.01".into(),
                &grid_points(0.05, 0.95, 0.01),
                &grid_points(0.05, 0.35, 0.01),
                ODE_MAXEXP_TOL,
                analysis::ode_residual_maxexp,
                out_dir.map(|d| d.join("ode_maxexp.csv")),
            )?;
            print_json(&report)?;
            Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
        }
        VerifyTarget::OdeGamma => {
            let report = residual_sweep(
                "lambda_L in [0.5, 4] step 0.05, t in (0, 1] step 0.01".into(),
                &grid_points(0.5, 4.0, 0.05),
                &grid_points(0.01, 1.0, 0.01),
                ODE_GAMMA_TOL,
                analysis::ode_residual_gamma,
                out_dir.map(|d| d.join("ode_gamma.csv")),
            )?;
            print_json(&report)?;
            Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
        }
    }
}

pub fn gradcheck(op: &str, d: usize, seed: u64, spec: Option<&PnSpec>) -> Result<Outcome> {
    if !GRADCHECK_OPS.iter().any(|(name, _)| *name == op) {
        let names: Vec<&str> = GRADCHECK_OPS.iter().map(|(n, _)| *n).collect();
        return Err(Error::InvalidInput(format!("unknown op {op:?}; known: {}", names.join(", "))));
    }
    let report = gradients::gradcheck(op, d, seed, spec).map_err(|e| {
        if matches!(e, Error::Degenerate(_)) {
            eprintln!("degenerate spectrum for seed {seed}; try another seed");
        }
        e
    })?;
    print_json(&report)?;
    Ok(if report.pass { Outcome::Pass } else { Outcome::Fail })
}

pub struct FigureOptions {
    pub seed: u64,
    pub eta: Option<f64>,
    pub samples: usize,
    pub bins: usize,
    pub points: usize,
    pub svg: bool,
}

fn emit(dir: &Path, stem: &str, x_name: &str, series: &[Series], svg: bool) -> Result<()> {
    ensure_dir(dir)?;
    for s in series {
        io::write_xy_csv(&dir.join(format!("{stem}_{}.csv", s.name)), x_name, &s.name, &s.points)?;
    }
    if svg {
        fs::write(dir.join(format!("{stem}.svg")), analysis::svg_line_plot(stem, series))?;
    }
    Ok(())
}

pub fn fig1(dir: &Path, opts: &FigureOptions) -> Result<Outcome> {
    let eta = opts.eta.unwrap_or(64.0);
    let spectrum = analysis::beta_spectrum(opts.samples, 2.0, 5.0, opts.seed)?;
    let specs = [
        ("input", PnSpec::gamma(1.0)?),
        ("maxexp", PnSpec::maxexp(eta)?),
        ("hdp", PnSpec::hdp(analysis::t_of_eta(eta)?)?),
    ];
    let mut series = Vec::new();
    for (name, spec) in &specs {
        let h = analysis::pushforward_spectrum(&spectrum, spec, opts.bins)?;
        series.push(Series {
            name: (*name).to_string(),
            points: h.centers().into_iter().zip(h.mass()).collect(),
        });
    }
    emit(dir, "fig1", "bin_center", &series, opts.svg)?;
    Ok(Outcome::Pass)
}

pub fn fig2(dir: &Path, opts: &FigureOptions) -> Result<Outcome> {
    let eta = opts.eta.unwrap_or(10.0);
    let specs = [
        PnSpec::gamma(0.5)?,
        PnSpec::maxexp(eta)?,
        PnSpec::asinhe(1.0)?,
        PnSpec::sigme(eta)?,
        PnSpec::hdp(analysis::t_of_eta(eta)?)?,
    ];
    let series = analysis::operator_profiles(&specs, opts.points)?;
    emit(dir, "fig2", "lambda", &series, opts.svg)?;
    Ok(Outcome::Pass)
}

pub fn fig4b(dir: &Path, opts: &FigureOptions) -> Result<Outcome> {
    let eta = opts.eta.unwrap_or(20.0);
    let mut thetas = analysis::linspace(0.0, FRAC_PI_2, opts.points);
    thetas.push(std::f64::consts::FRAC_PI_4);
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    let series = [Series {
        name: "response".to_string(),
        points: analysis::detector_curve(&thetas, eta, 2.0)?,
    }];
    emit(dir, "fig4b", "theta", &series, opts.svg)?;
    Ok(Outcome::Pass)
}

pub fn sketch(
    features: &Path,
    dprime: Option<usize>,
    seed: u64,
    plan_path: Option<&Path>,
    out: &Path,
) -> Result<Outcome> {
    let table = io::read_features(features)?;
    let d = table.vectors[0].len();
    let plan = match plan_path {
        Some(p) => {
            let plan = SketchPlan::from_json(&fs::read_to_string(p)?)?;
            if plan.input_dim() != d {
                return Err(Error::Shape(format!("plan expects dim {}, features have {d}", plan.input_dim())));
            }
            plan
        }
        None => {
            let dp = dprime.ok_or_else(|| Error::InvalidInput("either --dprime or --plan is required".into()))?;
            make_plan(d, dp, seed)?
        }
    };
    let vectors = table
        .vectors
        .iter()
        .map(|v| plan.apply(v))
        .collect::<Result<Vec<_>>>()?;
    let sketched = io::FeatureTable {
        header: None,
        vectors,
        weights: table.weights.clone(),
    };
    io::write_features(out, &sketched)?;
    let mut plan_out = out.as_os_str().to_owned();
    plan_out.push(".plan.json");
    fs::write(PathBuf::from(plan_out), plan.to_json()? + "\n")?;
    Ok(Outcome::Pass)
}

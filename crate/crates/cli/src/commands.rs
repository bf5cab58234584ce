use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};
use spectrastat_core::changepoint::{default_min_seg, ratio_binseg, SegmentationConfig};
use spectrastat_core::cov_tests::{
    glrt_sphericity_test_with, one_sample_logclt_test, regression_cov_test,
    two_sample_largest_root_test, two_sample_logclt_test, two_sample_power, wald_largest_root_test,
    GlrtScaling, TestReport,
};
use spectrastat_core::harness::{
    plot_data_emit, run_fpr_table, run_signal_figure, run_table1, write_outputs, Curve, Dims,
    ExperimentConfig, ExperimentKind, Manifest, PlotKind, FPR_GENERATOR, TABLE1_PERCENTILES,
    TABLE1_TW,
};
use spectrastat_core::laws::{FMatrixLsd, LimitLaw, MpLaw, SemicircleLaw};
use spectrastat_core::signals::{estimate_signal_count, signal_spectrum, SignalDetectionConfig};
use spectrastat_core::spectral::{eigenvalues_sym, esd_ks_distance, sample_spectrum, DataMatrix, Spectrum};
use spectrastat_core::spiked::{classify_spikes, simulate_spiked, spike_fluctuation_sd, SpikedModel};
use spectrastat_core::tracy_widom::TracyWidomTable;
use spectrastat_core::{Error, Result};

use crate::args::*;

/// A command's result: JSON for stdout or `--json-out`, CSV for `--csv-out`.
pub struct Output {
    pub json: Value,
    pub csv: Option<String>,
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Parse(e.to_string()))
}

fn read(path: &Path) -> Result<DataMatrix> {
    DataMatrix::read_csv(path)
}

fn tw() -> Result<&'static TracyWidomTable> {
    TracyWidomTable::global()
}

fn sigma0_spectrum(path: Option<&Path>, p: usize) -> Result<Spectrum> {
    match path {
        None => Spectrum::new(vec![1.0; p]),
        Some(path) => {
            let m = read(path)?;
            if m.n() != p || m.p() != p {
                return Err(Error::Input(format!("sigma0 must be {p}x{p}, is {}x{}", m.n(), m.p())));
            }
            eigenvalues_sym(m.values())
        }
    }
}

fn report(r: TestReport) -> Result<Output> {
    let mut csv = String::from("name,value\n");
    let _ = writeln!(csv, "statistic,{}", r.statistic);
    let _ = writeln!(csv, "normalized,{}", r.normalized);
    let _ = writeln!(csv, "p_value,{}", r.p_value);
    let _ = writeln!(csv, "reject,{}", r.reject);
    for (k, v) in &r.constants {
        let _ = writeln!(csv, "{k},{v}");
    }
    Ok(Output { json: to_value(&r)?, csv: Some(csv) })
}

fn broadcast(values: &[f64], p: usize, what: &str) -> Result<Spectrum> {
    match values.len() {
        1 => Spectrum::new(vec![values[0]; p]),
        l if l == p => Spectrum::new(values.to_vec()),
        l => Err(Error::Config(format!("{what} has {l} values, expected 1 or {p}"))),
    }
}

fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (i, v) in s.eigenvalues().iter().enumerate() {
        let _ = writeln!(out, "{},{v:.12e}", i + 1);
    }
    out
}

pub fn esd(a: &EsdArgs) -> Result<Output> {
    let data = read(&a.csv)?;
    let s = sample_spectrum(&data, a.center)?;
    let df = if a.center { data.n() - 1 } else { data.n() };
    let gamma = data.p() as f64 / df as f64;
    let law = MpLaw::new(gamma, s.mean())?;
    let ks = esd_ks_distance(&s.esd(), &law);
    Ok(Output {
        json: json!({
            "n": data.n(),
            "p": data.p(),
            "gamma": gamma,
            "largest": s.largest(),
            "smallest": s.smallest(),
            "mean": s.mean(),
            "mp_support": law.support(),
            "ks_to_mp": ks,
            "eigenvalues": s.eigenvalues(),
        }),
        csv: Some(spectrum_csv(&s)),
    })
}

fn curve<L: LimitLaw>(law: &L, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64, f64)> {
    (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            (x, law.pdf(x), law.cdf(x))
        })
        .collect()
}

pub fn law(a: &LawArgs) -> Result<Output> {
    if a.points < 2 {
        return Err(Error::Config("--points must be at least 2".into()));
    }
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Config(format!("--{name} is required for this law")));
    let pick = |support: (f64, f64)| (a.lo.unwrap_or(support.0), a.hi.unwrap_or(support.1));
    let (params, rows) = match a.kind {
        LawKind::Mp => {
            let law = MpLaw::new(need(a.gamma, "gamma")?, a.sigma2)?;
            let (lo, hi) = pick(law.support());
            (json!({"gamma": law.gamma, "sigma2": a.sigma2}), curve(&law, lo, hi, a.points))
        }
        LawKind::Semicircle => {
            let (lo, hi) = pick(SemicircleLaw.support());
            (json!({}), curve(&SemicircleLaw, lo, hi, a.points))
        }
        LawKind::F => {
            let law = FMatrixLsd::new(need(a.gamma, "gamma")?, need(a.gamma2, "gamma2")?)?;
            let (lo, hi) = pick(law.support());
            (json!({"gamma1": law.gamma1, "gamma2": law.gamma2}), curve(&law, lo, hi, a.points))
        }
        LawKind::Tw => {
            let t = tw()?;
            let (lo, hi) = (a.lo.unwrap_or(-6.0), a.hi.unwrap_or(4.0));
            let rows = (0..a.points)
                .map(|i| {
                    let x = lo + (hi - lo) * i as f64 / (a.points - 1) as f64;
                    (x, t.density(x), t.cdf(x))
                })
                .collect();
            (json!({}), rows)
        }
    };
    let mut csv = String::from("x,density,cdf\n");
    for (x, d, c) in &rows {
        let _ = writeln!(csv, "{x:.9e},{d:.9e},{c:.9e}");
    }
    Ok(Output {
        json: json!({"kind": format!("{:?}", a.kind).to_lowercase(), "params": params, "points": rows}),
        csv: Some(csv),
    })
}

pub fn twtable(action: &TwAction) -> Result<Output> {
    match action {
        TwAction::Build { path } => {
            let t0 = Instant::now();
            let t = TracyWidomTable::load_or_build(path, true)?;
            Ok(Output {
                json: json!({
                    "path": path,
                    "build_seconds": t0.elapsed().as_secs_f64(),
                    "cdf_at_table_percentiles": TABLE1_PERCENTILES.iter().map(|&s| t.cdf(s)).collect::<Vec<_>>(),
                }),
                csv: None,
            })
        }
        TwAction::Verify { path, tol } => {
            let stored = TracyWidomTable::load(path)?;
            let fresh = TracyWidomTable::build()?;
            let diff = stored.max_difference(&fresh);
            let table_dev = TABLE1_PERCENTILES
                .iter()
                .zip(TABLE1_TW)
                .map(|(&s, q)| (stored.cdf(s) - q).abs())
                .fold(0.0, f64::max);
            if !(diff <= *tol) {
                return Err(Error::Numerical {
                    message: format!("stored table differs from a fresh build by {diff:e} (tolerance {tol:e})"),
                    iterations: 0,
                });
            }
            Ok(Output {
                json: json!({"path": path, "max_difference": diff, "max_deviation_from_published": table_dev, "ok": true}),
                csv: None,
            })
        }
    }
}

pub fn test(t: &TestCommand) -> Result<Output> {
    match t {
        TestCommand::OneSample { csv, sigma0_csv, alpha } => {
            let data = read(csv)?;
            let s0 = sigma0_spectrum(sigma0_csv.as_deref(), data.p())?;
            report(one_sample_logclt_test(&data, &s0, *alpha)?)
        }
        TestCommand::Regression { y_csv, x_csv, sigma0_csv, k, alpha } => {
            let y = read(y_csv)?;
            let x = read(x_csv)?;
            let s0 = sigma0_spectrum(sigma0_csv.as_deref(), y.p())?;
            report(regression_cov_test(&y, &x, &s0, *alpha, *k)?)
        }
        TestCommand::TwoSample { x_csv, y_csv, alpha } => {
            report(two_sample_logclt_test(&read(x_csv)?, &read(y_csv)?, *alpha)?)
        }
        TestCommand::Power { p, m, n, eig1, eig2, alpha } => {
            let e1 = broadcast(eig1, *p, "--eig1")?;
            let e2 = broadcast(eig2, *p, "--eig2")?;
            let curve = two_sample_power(*p, *m, *n, &e1, &e2, *alpha)?;
            let mut csv = String::from("alternative,power\n");
            for pt in &curve.points {
                let _ = writeln!(csv, "\"{}\",{}", pt.alternative, pt.power);
            }
            Ok(Output { json: to_value(&curve)?, csv: Some(csv) })
        }
        TestCommand::Sphericity { csv, alpha, scaling } => {
            let scaling = match scaling {
                ScalingArg::Threshold => GlrtScaling::Threshold,
                ScalingArg::Literal => GlrtScaling::Literal,
            };
            report(glrt_sphericity_test_with(&read(csv)?, *alpha, tw()?, scaling)?)
        }
        TestCommand::FLargestRoot { x_csv, y_csv, alpha } => {
            report(two_sample_largest_root_test(&read(x_csv)?, &read(y_csv)?, *alpha, tw()?)?)
        }
        TestCommand::Wald { y_csv, x_csv, l_csv, b0_csv, alpha } => {
            let l = read(l_csv)?.into_inner();
            let b0 = read(b0_csv)?.into_inner();
            report(wald_largest_root_test(&read(y_csv)?, &read(x_csv)?, &l, &b0, *alpha, tw()?)?)
        }
    }
}

pub fn spiked(a: &SpikedArgs, seed: u64) -> Result<Output> {
    let model = SpikedModel::new(a.ell.clone(), a.gamma, a.sigma2)?;
    let classes = classify_spikes(&model);
    let mut csv = String::from("index,ell,detectable,limit,fluctuation_sd\n");
    let mut rows = Vec::new();
    for c in &classes {
        let sd = spike_fluctuation_sd(c.ell, a.gamma).ok().map(|s| s * a.sigma2);
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            c.index,
            c.ell,
            c.detectable,
            c.limit,
            sd.map_or(String::new(), |v| v.to_string())
        );
        let mut v = to_value(c)?;
        v["fluctuation_sd"] = json!(sd);
        rows.push(v);
    }
    let simulation = match &a.simulate {
        Some(v) => {
            let (p, n, reps) = (v[0], v[1], v[2]);
            Some(to_value(&simulate_spiked(&model, n, p, reps, seed)?)?)
        }
        None => None,
    };
    Ok(Output {
        json: json!({
            "gamma": a.gamma,
            "sigma2": a.sigma2,
            "threshold": model.threshold(),
            "spikes": rows,
            "simulation": simulation,
        }),
        csv: Some(csv),
    })
}

pub fn signals(a: &SignalsArgs) -> Result<Output> {
    let data = read(&a.csv)?;
    let spec = signal_spectrum(&data, a.center)?;
    let mut cfg = SignalDetectionConfig::new(a.alpha)?;
    if let Some(k) = a.max_k {
        cfg = cfg.with_max_k(k)?;
    }
    let trace = estimate_signal_count(&spec, data.n(), &cfg, tw()?)?;
    let mut json = json!({
        "n": data.n(),
        "p": data.p(),
        "k_hat": trace.k_hat,
        "saturated": trace.saturated,
        "alpha": trace.alpha,
        "s_alpha": trace.s_alpha,
    });
    if a.trace {
        json["steps"] = to_value(&trace.steps)?;
    }
    Ok(Output { json, csv: Some(trace.to_csv()) })
}

pub fn changepoint(a: &ChangepointArgs) -> Result<Output> {
    let data = read(&a.csv)?;
    let mut cfg = SegmentationConfig::new(a.alpha, a.min_seg.unwrap_or_else(|| default_min_seg(data.p())))?;
    cfg.center = a.center;
    cfg.reading = a.reading;
    cfg.keep_traces = a.trace;
    let res = ratio_binseg(&data, &cfg)?;
    let csv = if a.trace {
        let mut out = String::from("start,end,tau,statistic\n");
        for s in &res.scans {
            for (tau, v) in &s.trace {
                let _ = writeln!(out, "{},{},{tau},{v:.9e}", s.start, s.end);
            }
        }
        out
    } else {
        let mut out = String::from("changepoint\n");
        for c in &res.changepoints {
            let _ = writeln!(out, "{c}");
        }
        out
    };
    let mut json = to_value(&res)?;
    json["reading"] = json!(a.reading.name());
    Ok(Output { json, csv: Some(csv) })
}

fn parse_dims(dims: &[String]) -> Result<Vec<Dims>> {
    dims.iter()
        .map(|d| {
            let (n, p) = d
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("dimension '{d}' is not of the form n:p")))?;
            let parse = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad dimension '{d}'")))
            };
            Ok(Dims { n: parse(n)?, p: parse(p)? })
        })
        .collect()
}

fn config(kind: ExperimentKind, c: &CommonExperiment, default_reps: usize, seed: u64) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(kind, c.reps.unwrap_or(default_reps), seed);
    cfg.dims = parse_dims(&c.dims)?;
    if let Some(a) = c.alpha {
        cfg.alpha = a;
    }
    cfg.output = c.out.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn finish<T: serde::Serialize>(
    cfg: &ExperimentConfig,
    result: &T,
    csv: String,
    started: Instant,
    generator: Option<&str>,
) -> Result<Output> {
    let mut manifest = Manifest::new(cfg.experiment.name(), cfg.seed, cfg.reps, cfg, started);
    manifest.generator = generator.map(str::to_string);
    let mut written = Vec::new();
    if let Some(dir) = &cfg.output {
        written = write_outputs(dir, cfg.experiment.name(), &csv, result, &manifest)?;
    }
    Ok(Output {
        json: json!({"result": to_value(result)?, "manifest": to_value(&manifest)?, "written": written}),
        csv: Some(csv),
    })
}

fn curves_csv(curves: &[Curve]) -> String {
    let mut out = String::from("label,x,y\n");
    for c in curves {
        for (x, y) in &c.points {
            let _ = writeln!(out, "{},{x:.9e},{y:.9e}", c.label);
        }
    }
    out
}

pub fn experiment(e: &ExperimentCommand, seed: u64) -> Result<Output> {
    let started = Instant::now();
    match e {
        ExperimentCommand::Table1(c) => {
            let cfg = config(ExperimentKind::Table1, c, 10_000, seed)?;
            let res = run_table1(&cfg, tw()?)?;
            finish(&cfg, &res, res.to_csv(), started, None)
        }
        ExperimentCommand::SignalsFigure { common, noise } => {
            let mut cfg = config(ExperimentKind::SignalsFigure, common, 200, seed)?;
            cfg.noise = *noise;
            let res = run_signal_figure(&cfg, tw()?)?;
            finish(&cfg, &res, res.to_csv(), started, None)
        }
        ExperimentCommand::Fpr(c) => {
            let cfg = config(ExperimentKind::Fpr, c, 100, seed)?;
            let res = run_fpr_table(&cfg)?;
            finish(&cfg, &res, res.to_csv(), started, Some(FPR_GENERATOR))
        }
        ExperimentCommand::PlotData { kind, points, n, p, ell, reps, out } => {
            let plot = match kind {
                PlotArg::Mp => PlotKind::MpDensities { points: *points },
                PlotArg::Tw => PlotKind::TwDensity { lo: -6.0, hi: 4.0, points: *points },
                PlotArg::Spikes => PlotKind::SpikeScatter { n: *n, p: *p, spikes: ell.clone(), reps: *reps, seed },
            };
            let curves = plot_data_emit(&plot, tw()?)?;
            let csv = curves_csv(&curves);
            let mut written = Vec::new();
            if let Some(dir) = out {
                let stem = format!("plot-{}", format!("{kind:?}").to_lowercase());
                let manifest = Manifest::new(&stem, seed, *reps, &plot, started);
                written = write_outputs(dir, &stem, &csv, &curves, &manifest)?;
            }
            Ok(Output { json: json!({"kind": to_value(&plot)?, "curves": to_value(&curves)?, "written": written}), csv: Some(csv) })
        }
    }
}

//! Subcommand pipelines and artifact writing.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::conditional::{ClampSpec, Grid1D, InterpScheme};
use crate::diagnostics::{
    autocorrelation, grid_convergence_study, loglog_slope, AcfSeries, GridStudyOptions, LogLogPlot, Panel, Series,
};
use crate::error::Error;
use crate::kernel::{
    discretize_gibbs_kernel, discretize_griddy_kernel, discretize_metropolized_kernel, doeblin_envelope,
    regularity_check, truncation_bound_report, tv_curve, KernelMatrix, PerturbationAnalysis, StateGrid,
};
use crate::sampler::{gibbs_chain, griddy_chain, metropolized_griddy_chain, ChainConfig, ChainOutput};
use crate::target::TargetDensity;

use super::config::{ExperimentConfig, SamplerKind};
use super::CliError;

/// Environment variable that overrides `chain.seed`.
pub const SEED_ENV: &str = "GRIDDY_SEED";

/// Steps of the TV curve written by `kernel-verify`.
const TV_STEPS: usize = 50;

/// What a finished run wrote.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub command: String,
    pub headline: String,
    pub artifacts: Vec<PathBuf>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let paths: Vec<String> = self.artifacts.iter().map(|p| p.display().to_string()).collect();
        write!(f, "{}: {} -> {}", self.command, self.headline, paths.join(", "))
    }
}

/// `{:.16e}`: 17 significant digits round-trip an `f64`.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

fn io(e: std::io::Error) -> CliError {
    CliError::Runtime(Error::Io(e))
}

struct Artifacts {
    dir: PathBuf,
    command: String,
    config: serde_json::Value,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn new(cfg: &ExperimentConfig, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.output.dir).map_err(io)?;
        Ok(Self {
            dir: cfg.output.dir.clone(),
            command: command.to_string(),
            config: serde_json::to_value(cfg).expect("config serializes"),
            written: Vec::new(),
        })
    }

    fn provenance(&self, seed: u64) -> serde_json::Value {
        json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "config": self.config,
        })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(io)?;
        self.written.push(path.clone());
        Ok(path)
    }

    fn sidecar(&self, name: &str, seed: u64) -> Result<(), CliError> {
        let mut meta = self.provenance(seed);
        meta["artifact"] = json!(name);
        let text = serde_json::to_string_pretty(&meta).expect("json") + "\n";
        fs::write(self.dir.join(format!("{name}.meta.json")), text).map_err(io)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>], seed: u64) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let runtime = |e: csv::Error| io(std::io::Error::other(e));
        w.write_record(header).map_err(runtime)?;
        for r in rows {
            w.write_record(r).map_err(runtime)?;
        }
        let bytes = w.into_inner().map_err(|e| io(std::io::Error::other(e.to_string())))?;
        self.put(name, &bytes)?;
        self.sidecar(name, seed)
    }

    fn svg(&mut self, name: &str, plot: &LogLogPlot, seed: u64) -> Result<(), CliError> {
        self.put(name, plot.to_svg().as_bytes())?;
        self.sidecar(name, seed)
    }

    /// JSON artifact with the provenance block merged in under `run`.
    fn json<T: Serialize>(&mut self, name: &str, body: &T, seed: u64) -> Result<(), CliError> {
        let mut value = serde_json::to_value(body).expect("json");
        value["run"] = self.provenance(seed);
        let text = serde_json::to_string_pretty(&value).expect("json") + "\n";
        self.put(name, text.as_bytes())?;
        Ok(())
    }

    fn finish(self, headline: String) -> RunSummary {
        RunSummary {
            command: self.command,
            headline,
            artifacts: self.written,
        }
    }
}

struct Prepared {
    target: Box<dyn TargetDensity>,
    scheme: InterpScheme,
    clamp: ClampSpec,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    Ok(Prepared {
        target: cfg.build_target()?,
        scheme: cfg.scheme()?,
        clamp: cfg.clamp()?,
    })
}

fn run_chain(p: &Prepared, grids: &[Grid1D], kind: SamplerKind, chain: &ChainConfig) -> Result<ChainOutput, CliError> {
    let t = p.target.as_ref();
    let out = match kind {
        SamplerKind::Gibbs => gibbs_chain(t, chain),
        SamplerKind::Griddy => griddy_chain(t, grids, p.scheme, p.clamp, chain),
        SamplerKind::Metropolized => metropolized_griddy_chain(t, grids, p.scheme, p.clamp, chain),
    };
    out.map_err(|e| CliError::Runtime(e.into()))
}

/// `sample`: one chain, post burn-in rows.
pub fn run_sample(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let p = prepare(cfg)?;
    let chain = cfg.chain_config(p.target.as_ref())?;
    let grids = cfg.grids(p.target.as_ref(), cfg.sampler.n)?;
    let mut art = Artifacts::new(cfg, "sample")?;

    let start = Instant::now();
    let out = run_chain(&p, &grids, cfg.sampler.kind, &chain)?;
    let seconds = start.elapsed().as_secs_f64();

    let header: Vec<String> = (1..=out.dim()).map(|i| format!("x{i}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = out.rows().map(|r| r.iter().map(|&v| real(v)).collect()).collect();
    art.csv("samples.csv", &header, &rows, chain.seed)?;

    let means: Vec<f64> = (0..out.dim())
        .map(|i| out.column(i).iter().sum::<f64>() / out.n_samples() as f64)
        .collect();
    let summary = json!({
        "sampler": cfg.sampler.kind.as_str(),
        "target": p.target.label(),
        "n_samples": out.n_samples(),
        "dim": out.dim(),
        "acceptance_rate": out.acceptance_rate,
        "target_eval_count": out.target_eval_count,
        "seed": out.seed,
        "timing": { "seconds": seconds },
        "mean": means,
    });
    art.json("summary.json", &summary, chain.seed)?;
    Ok(art.finish(format!(
        "{} rows, acceptance {:.4}, {} target evaluations",
        out.n_samples(),
        out.acceptance_rate,
        out.target_eval_count
    )))
}

#[derive(Serialize)]
struct KernelEntry {
    n: usize,
    reports: Vec<crate::kernel::PerturbationReport>,
    regularity: crate::kernel::RegularityReport,
    tv_curve: Vec<f64>,
    tv_envelope: Vec<f64>,
    tv_within_envelope: bool,
    invariant_residual_p: f64,
    invariant_residual_q: f64,
    truncation: Vec<crate::kernel::TruncationBoundReport>,
}

#[derive(Serialize)]
struct Sensitivity {
    p: crate::norm::Norm,
    slope: Option<f64>,
    constant_ratio: Option<f64>,
}

/// `kernel-verify`: exact Gibbs kernel `P` against the griddy (or
/// metropolized) kernel `Q` for each `n` in `study.ns`.
pub fn run_kernel_verify(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let p = prepare(cfg)?;
    let target = p.target.as_ref();
    let counts = cfg.state_counts(target)?;
    let runtime = |e: crate::error::KernelError| CliError::Runtime(e.into());
    let states = StateGrid::new(target.domain().clone(), counts).map_err(runtime)?;
    let mut art = Artifacts::new(cfg, "kernel-verify")?;
    let seed = cfg.chain.seed;

    let start = Instant::now();
    let kp = discretize_gibbs_kernel(target, &states).map_err(runtime)?;
    let mut entries = Vec::new();
    for &n in &cfg.study.ns {
        let grids = cfg.grids(target, n)?;
        let kq: KernelMatrix = match cfg.sampler.kind {
            SamplerKind::Metropolized => discretize_metropolized_kernel(target, &states, &grids, p.scheme, p.clamp),
            _ => discretize_griddy_kernel(target, &states, &grids, p.scheme, p.clamp),
        }
        .map_err(runtime)?;
        let analysis = PerturbationAnalysis::new(&kp, &kq).map_err(runtime)?;
        let reports: Vec<_> = cfg.study.p.iter().map(|&q| analysis.report(q)).collect();
        let regularity = regularity_check(&kq, &analysis.eta_hat);
        let curve = tv_curve(&kq, &analysis.eta_hat, TV_STEPS);
        let envelope = doeblin_envelope(analysis.doeblin_q, kq.cell_volume(), TV_STEPS);
        let within = curve.iter().zip(&envelope).all(|(c, e)| *c <= e + 1e-9);
        let truncation = match &cfg.truncation {
            Some(spec) => reports
                .iter()
                .filter(|r| spec.tail_constants(r.p).is_some())
                .map(|r| truncation_bound_report(spec, r.p, r.pi_lp_norm, r))
                .collect::<Result<Vec<_>, _>>()
                .map_err(runtime)?,
            None => Vec::new(),
        };
        entries.push(KernelEntry {
            n,
            reports,
            regularity,
            tv_curve: curve,
            tv_envelope: envelope,
            tv_within_envelope: within,
            invariant_residual_p: analysis.pi_hat.residual,
            invariant_residual_q: analysis.eta_hat.residual,
            truncation,
        });
    }
    let seconds = start.elapsed().as_secs_f64();

    let sensitivity: Vec<Sensitivity> = cfg
        .study
        .p
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let pairs: Vec<(f64, f64)> = entries
                .iter()
                .map(|e| (e.reports[i].kernel_dist, e.reports[i].measure_dist))
                .filter(|(k, m)| *k > 0.0 && *m > 0.0)
                .collect();
            let constants: Vec<f64> = pairs.iter().map(|(k, m)| m / k).collect();
            let (lo, hi) = constants
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &c| (lo.min(c), hi.max(c)));
            Sensitivity {
                p: q,
                slope: (pairs.len() >= 2).then(|| {
                    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
                    loglog_slope(&xs, &ys)
                }),
                constant_ratio: (!constants.is_empty()).then(|| hi / lo),
            }
        })
        .collect();

    let mut rows = Vec::new();
    for e in &entries {
        for r in &e.reports {
            rows.push(vec![
                e.n.to_string(),
                r.p.to_string(),
                real(r.kernel_dist),
                real(r.measure_dist),
                real(r.implied_constant),
                real(r.gap_alpha),
                real(r.overlap_lambda),
                real(r.doeblin_eps),
                r.fixed_space_dim_q.to_string(),
                r.remark_bound_holds.to_string(),
                e.regularity.all_hold().to_string(),
                e.tv_within_envelope.to_string(),
            ]);
        }
    }
    art.csv(
        "sweep.csv",
        &[
            "n",
            "p",
            "kernel_dist",
            "measure_dist",
            "implied_constant",
            "gap_alpha",
            "overlap_lambda",
            "doeblin_eps",
            "fixed_space_dim_q",
            "remark_bound_holds",
            "regularity_holds",
            "tv_within_envelope",
        ],
        &rows,
        seed,
    )?;
    let all_ok = entries.iter().all(|e| {
        e.tv_within_envelope
            && e.regularity.all_hold()
            && e.reports
                .iter()
                .all(|r| r.doeblin_eps > 0.0 && r.fixed_space_dim_q == 1)
    });
    let body = json!({
        "target": target.label(),
        "states": states.counts(),
        "n_states": states.n_states(),
        "sampler": cfg.sampler.kind.as_str(),
        "timing": { "seconds": seconds },
        "entries": entries,
        "sensitivity": sensitivity,
        "all_checks_hold": all_ok,
    });
    art.json("report.json", &body, seed)?;
    Ok(art.finish(format!(
        "{} states, {} knot counts, checks {}",
        states.n_states(),
        entries.len(),
        if all_ok { "hold" } else { "FAIL" }
    )))
}

/// Canned grid study on the beta mixture: chain length 1e5, linear
/// interpolation, n = 6, 11, 21, 41, 81.
pub fn reproduce_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.chain.n_steps = 100_000;
    c.study.ns = vec![6, 11, 21, 41, 81];
    c.output.dir = PathBuf::from("griddy-out/reproduce-6-1");
    c
}

/// `grid-study` and `reproduce-6-1`.
pub fn run_grid_study(cfg: &ExperimentConfig, command: &str) -> Result<RunSummary, CliError> {
    let p = prepare(cfg)?;
    let target = p.target.as_ref();
    let mut art = Artifacts::new(cfg, command)?;
    let seed = cfg.chain.seed;
    let mut opts = GridStudyOptions::new(cfg.study.ns.clone(), cfg.chain.n_steps, seed);
    opts.scheme = p.scheme;
    opts.clamp = p.clamp;
    opts.replicates = cfg.study.replicates;
    opts.axis = cfg.study.coordinate;

    let start = Instant::now();
    let study = grid_convergence_study(target, &opts).map_err(|e| CliError::Runtime(e.into()))?;
    let seconds = start.elapsed().as_secs_f64();

    let floor = study.floor.as_ref();
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                r.n.to_string(),
                real(r.marginal_linf),
                real(r.marginal_l2),
                opt_real(r.joint_linf),
                opt_real(r.joint_l2),
                opt_real(floor.map(|f| f.marginal_linf)),
                (i < study.pre_floor_len).to_string(),
                opt_real(study.slope),
            ]
        })
        .collect();
    art.csv(
        "table.csv",
        &[
            "n",
            "marginal_linf",
            "marginal_l2",
            "joint_linf",
            "joint_l2",
            "gibbs_floor_linf",
            "pre_floor",
            "slope",
        ],
        &rows,
        seed,
    )?;

    let ns: Vec<f64> = study.rows.iter().map(|r| r.n as f64).collect();
    let line = |label: &str, f: &dyn Fn(&crate::diagnostics::StudyRow) -> Option<f64>| {
        Series::new(
            label,
            ns.iter()
                .zip(&study.rows)
                .filter_map(|(&n, r)| f(r).map(|v| (n, v)))
                .collect(),
        )
    };
    let floor_line =
        |v: Option<f64>| v.map(|v| Series::new("exact Gibbs", vec![(ns[0], v), (ns[ns.len() - 1], v)]).dashed());
    let mut marginal = vec![
        line("sup", &|r| Some(r.marginal_linf)),
        line("L2", &|r| Some(r.marginal_l2)),
    ];
    marginal.extend(floor_line(floor.map(|f| f.marginal_linf)));
    let mut joint = vec![line("sup", &|r| r.joint_linf), line("L2", &|r| r.joint_l2)];
    joint.extend(floor_line(floor.and_then(|f| f.joint_linf)));
    let plot = LogLogPlot::new(vec![
        Panel {
            title: "marginal ECDF error".into(),
            x_label: "knots per axis n".into(),
            y_label: "error".into(),
            series: marginal,
        },
        Panel {
            title: "joint ECDF error".into(),
            x_label: "knots per axis n".into(),
            y_label: "error".into(),
            series: joint,
        },
    ]);
    art.svg("plot.svg", &plot, seed)?;

    let body = json!({
        "target": target.label(),
        "n_steps": cfg.chain.n_steps,
        "study": study,
        "timing": { "seconds": seconds },
    });
    art.json("study.json", &body, seed)?;
    let slope = study.slope.map_or("n/a".to_string(), |s| format!("{s:.3}"));
    Ok(art.finish(format!(
        "{} knot counts, pre-floor slope {slope} over {} points",
        study.rows.len(),
        study.pre_floor_len
    )))
}

#[derive(Serialize)]
struct AcfRecord {
    sampler: &'static str,
    seeds: Vec<u64>,
    iat: Vec<f64>,
    mean_iat: f64,
    effective_sample_size: Vec<f64>,
    acceptance_rate: Vec<f64>,
}

/// `acf`: autocorrelation of one coordinate for each sampler in
/// `study.samplers`, over `study.chains` seeds.
pub fn run_acf(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let p = prepare(cfg)?;
    let target = p.target.as_ref();
    if cfg.study.coordinate >= target.dim() {
        return Err(CliError::Validation(format!(
            "study.coordinate: {} out of range for dimension {}",
            cfg.study.coordinate,
            target.dim()
        )));
    }
    let base = cfg.chain_config(target)?;
    let grids = cfg.grids(target, cfg.sampler.n)?;
    let kinds = if cfg.study.samplers.is_empty() {
        vec![cfg.sampler.kind]
    } else {
        cfg.study.samplers.clone()
    };
    let mut art = Artifacts::new(cfg, "acf")?;

    let mut records = Vec::new();
    let mut first: Vec<AcfSeries> = Vec::new();
    for &kind in &kinds {
        let mut rec = AcfRecord {
            sampler: kind.as_str(),
            seeds: Vec::new(),
            iat: Vec::new(),
            mean_iat: 0.0,
            effective_sample_size: Vec::new(),
            acceptance_rate: Vec::new(),
        };
        for c in 0..cfg.study.chains {
            let mut chain = base.clone();
            chain.seed = base.seed.wrapping_add(c as u64);
            let out = run_chain(&p, &grids, kind, &chain)?;
            let acf = autocorrelation(&out, cfg.study.coordinate, cfg.study.max_lag)
                .map_err(|e| CliError::Runtime(e.into()))?;
            rec.seeds.push(chain.seed);
            rec.iat.push(acf.iat);
            rec.effective_sample_size.push(acf.effective_sample_size());
            rec.acceptance_rate.push(out.acceptance_rate);
            if c == 0 {
                first.push(acf);
            }
        }
        rec.mean_iat = rec.iat.iter().sum::<f64>() / rec.iat.len() as f64;
        records.push(rec);
    }

    let mut header = vec!["lag".to_string()];
    header.extend(kinds.iter().map(|k| k.as_str().to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..=cfg.study.max_lag)
        .map(|l| {
            std::iter::once(l.to_string())
                .chain(first.iter().map(|a| real(a.coefficients[l])))
                .collect()
        })
        .collect();
    art.csv("acf.csv", &header, &rows, base.seed)?;

    let series = kinds
        .iter()
        .zip(&first)
        .map(|(k, a)| {
            Series::new(
                k.as_str(),
                a.coefficients.iter().enumerate().map(|(l, &r)| (l as f64, r)).collect(),
            )
        })
        .collect();
    let mut plot = LogLogPlot::new(vec![Panel {
        title: format!("ACF of x{}", cfg.study.coordinate + 1),
        x_label: "lag".into(),
        y_label: "autocorrelation".into(),
        series,
    }]);
    plot.log_x = false;
    plot.log_y = false;
    art.svg("acf.svg", &plot, base.seed)?;

    let body = json!({ "target": target.label(), "coordinate": cfg.study.coordinate, "samplers": records });
    art.json("acf.json", &body, base.seed)?;
    let headline = records
        .iter()
        .map(|r| format!("IAT {} {:.2}", r.sampler, r.mean_iat))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(art.finish(headline))
}

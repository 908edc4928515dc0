use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{debug, info, warn};
use serde::Serialize;
use serde_json::json;

use delaymat::fixtures;
use delaymat::fundamental::{discrete_segment, segments_for_horizon};
use delaymat::io::{load_forcing, load_history, load_system};
use delaymat::oracle::{integrate_continuous, step_discrete, IntegratorConfig};
use delaymat::piecewise::MatrixPolynomial;
use delaymat::random::SystemGenerator;
use delaymat::solve::{solve_continuous, solve_discrete, ForcingSpec, HistorySpec, SolveOptions};
use delaymat::{
    build_fundamental_continuous, build_q_table, DelaySystem, DiscreteFundamental, Matrix,
    PiecewiseMatrixPolynomial, TimeKind, TrajectoryTable,
};

use crate::{Command, Format, KindArg};

pub enum Status {
    Success,
    ToleranceFailure,
}

pub fn run(cmd: &Command) -> Result<Status> {
    debug!("{cmd:?}");
    match cmd {
        Command::Fundamental {
            system,
            kind,
            from,
            to,
            step,
            dump_q,
            dump_z,
            format,
            out,
        } => {
            let sys = with_kind(load_system(system)?, *kind)?;
            let mut written = Vec::new();
            let table = match sys.kind() {
                TimeKind::Continuous => {
                    let sigma = sys.sigma()?;
                    let from = from.unwrap_or(-sigma);
                    let step = step.unwrap_or(sigma / 16.0);
                    check_range(from, *to)?;
                    let horizon = to.max(sigma);
                    let z = build_fundamental_continuous(&sys, horizon)?;
                    if let Some(path) = dump_q {
                        let q = build_q_table(sys.a0(), sys.a1(), segments_for_horizon(sigma, horizon))?;
                        write_file(path, &serde_json::to_string_pretty(&q)?)?;
                        written.push(path.clone());
                    }
                    if let Some(path) = dump_z {
                        write_file(path, &serde_json::to_string_pretty(&z)?)?;
                        written.push(path.clone());
                    }
                    TrajectoryTable::sample(TimeKind::Continuous, &z, from, *to, step)?
                }
                TimeKind::Discrete => {
                    let m = sys.lag()?;
                    let from = integer_arg("--from", from.unwrap_or(-(m as f64) - 1.0))?;
                    let to = integer_arg("--to", *to)?;
                    let step = integer_arg("--step", step.unwrap_or(1.0))?;
                    if step < 1 {
                        bail!("--step must be a positive integer for a discrete system");
                    }
                    check_range(from as f64, to as f64)?;
                    let fund = DiscreteFundamental::new(sys.clone())?;
                    let times: Vec<i64> = (from..=to).step_by(step as usize).collect();
                    let values = times.iter().map(|&u| fund.value(u)).collect::<Result<Vec<_>, _>>()?;
                    let table = TrajectoryTable::new(
                        TimeKind::Discrete,
                        times.iter().map(|&u| u as f64).collect(),
                        values,
                    )?;
                    if let Some(path) = dump_q {
                        let q = fund.qtable(discrete_segment(m, to.max(1)))?;
                        write_file(path, &serde_json::to_string_pretty(&q)?)?;
                        written.push(path.clone());
                    }
                    if let Some(path) = dump_z {
                        write_file(path, &table.to_json_string())?;
                        written.push(path.clone());
                    }
                    table
                }
            };
            info!("fundamental: {} rows", table.len());
            emit(&table, *format, out.as_deref())?;
            written.extend(out.clone());
            write_manifest(cmd, out.as_deref(), &written, json!({ "rows": table.len() }))?;
            Ok(Status::Success)
        }
        Command::Solve {
            system,
            history,
            forcing,
            to,
            step,
            format,
            out,
            allow_noncommuting_data,
            tol,
        } => {
            let sys = load_system(system)?;
            let psi = load_history(history)?;
            let g = match forcing {
                Some(path) => load_forcing(path)?,
                None => ForcingSpec::zero(sys.kind(), sys.dim())?,
            };
            if psi.kind() != sys.kind() || g.kind() != sys.kind() {
                bail!(
                    "system is {} but history is {} and forcing is {}",
                    sys.kind().as_str(),
                    psi.kind().as_str(),
                    g.kind().as_str()
                );
            }
            let opts = SolveOptions {
                tol: *tol,
                allow_noncommuting: *allow_noncommuting_data,
            };
            let (mut table, report, flagged) = match sys.kind() {
                TimeKind::Continuous => {
                    let sigma = sys.sigma()?;
                    let solved = solve_continuous(&sys, &psi, &g, *to, &opts)?;
                    let table = TrajectoryTable::sample(
                        TimeKind::Continuous,
                        &solved.value,
                        -sigma,
                        *to,
                        step.unwrap_or(sigma / 16.0),
                    )?;
                    (table, solved.report, solved.unsupported_hypothesis)
                }
                TimeKind::Discrete => {
                    if step.is_some_and(|s| s != 1.0) {
                        warn!("--step is ignored for discrete systems");
                    }
                    let n = integer_arg("--to", *to)?;
                    if n < 0 {
                        bail!("--to must be non-negative for a discrete system");
                    }
                    let fund = DiscreteFundamental::new(sys.clone())?;
                    let solved = solve_discrete(&fund, &psi, &g, n as usize, &opts)?;
                    (solved.value, solved.report, solved.unsupported_hypothesis)
                }
            };
            if flagged {
                warn!(
                    "data does not commute with A1 (history residual {:e}, forcing residual {:e}); output is flagged",
                    report.history.residual, report.forcing.residual
                );
            }
            info!("hypothesis residuals: history {:e}, forcing {:e}", report.history.residual, report.forcing.residual);
            table.set_unsupported_hypothesis(flagged);
            emit(&table, *format, out.as_deref())?;
            write_manifest(
                cmd,
                out.as_deref(),
                &out.iter().cloned().collect::<Vec<_>>(),
                json!({ "rows": table.len(), "hypotheses": report, "unsupported_hypothesis": flagged }),
            )?;
            Ok(Status::Success)
        }
        Command::Verify {
            system,
            history,
            forcing,
            random,
            seed,
            count,
            windows,
            substeps,
            tol,
            out,
        } => {
            let cases = if *random {
                random_cases(*seed, *count)?
            } else {
                let path = system.as_ref().expect("clap requires --system");
                let sys = load_system(path)?;
                let psi = match history {
                    Some(p) => load_history(p)?,
                    None => HistorySpec::constant(&sys, Matrix::identity(sys.dim()))?,
                };
                let g = match forcing {
                    Some(p) => load_forcing(p)?,
                    None => ForcingSpec::zero(sys.kind(), sys.dim())?,
                };
                vec![Case {
                    label: path.display().to_string(),
                    sys,
                    psi,
                    g,
                }]
            };
            let cfg = IntegratorConfig::new(*substeps)?;
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            for case in &cases {
                for w in verify_case(case, *windows, &cfg)? {
                    worst = worst.max(w.max_diff);
                    println!(
                        "{} {} window [{}, {}): max diff {:.3e}",
                        if w.max_diff <= *tol { "ok  " } else { "FAIL" },
                        case.label,
                        w.lo,
                        w.hi,
                        w.max_diff
                    );
                    rows.push(w);
                }
            }
            let passed = worst <= *tol;
            println!(
                "{}: max diff {worst:.3e} over {} cases (tol {tol:e})",
                if passed { "PASS" } else { "FAIL" },
                cases.len()
            );
            if let Some(path) = out {
                write_file(path, &serde_json::to_string_pretty(&rows)?)?;
            }
            write_manifest(
                cmd,
                out.as_deref(),
                &out.iter().cloned().collect::<Vec<_>>(),
                json!({ "max_diff": worst, "passed": passed }),
            )?;
            Ok(if passed { Status::Success } else { Status::ToleranceFailure })
        }
        Command::Example { number, format, out } => {
            let (table, report) = match number {
                1 => {
                    let (_, x) = fixtures::example1_solution()?;
                    let table = TrajectoryTable::sample(TimeKind::Continuous, &x, -1.0, 3.0, 0.25)?;
                    (table, fixtures::example1_report()?)
                }
                _ => {
                    let sys = fixtures::example2_system();
                    let fund = DiscreteFundamental::new(sys)?;
                    let solved = solve_discrete(
                        &fund,
                        &fixtures::example2_history(),
                        &fixtures::example2_forcing(),
                        6,
                        &SolveOptions::default(),
                    )?;
                    (solved.value, fixtures::example2_report()?)
                }
            };
            emit(&table, *format, out.as_deref())?;
            print!("{}", report.render());
            write_manifest(
                cmd,
                out.as_deref(),
                &out.iter().cloned().collect::<Vec<_>>(),
                json!({ "passed": report.passed(), "checks": report.checks }),
            )?;
            Ok(if report.passed() { Status::Success } else { Status::ToleranceFailure })
        }
    }
}

fn with_kind(sys: DelaySystem, kind: Option<KindArg>) -> Result<DelaySystem> {
    let (a0, a1) = (sys.a0().clone(), sys.a1().clone());
    Ok(match (kind, sys.kind()) {
        (Some(KindArg::Cont), TimeKind::Discrete) => DelaySystem::continuous(a0, a1, sys.delay_value())?,
        (Some(KindArg::Disc), TimeKind::Continuous) => {
            let m = integer_arg("delay", sys.delay_value())?;
            if m < 1 {
                bail!("a discrete reading needs a positive integer delay, got {}", sys.delay_value());
            }
            DelaySystem::discrete(a0, a1, m as usize)?
        }
        _ => sys,
    })
}

fn integer_arg(name: &str, v: f64) -> Result<i64> {
    if v.fract() != 0.0 || !v.is_finite() || v.abs() > 1e12 {
        bail!("{name} must be an integer for a discrete system, got {v}");
    }
    Ok(v as i64)
}

fn check_range(from: f64, to: f64) -> Result<()> {
    if !(from <= to) {
        bail!("--from ({from}) must not exceed --to ({to})");
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(table: &TrajectoryTable, format: Format, out: Option<&Path>) -> Result<()> {
    let text = match format {
        Format::Csv => table.to_csv_string(),
        Format::Json => table.to_json_string() + "\n",
    };
    match out {
        Some(path) => write_file(path, &text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Writes `run-manifest.json` next to `out`; nothing without `--out`.
fn write_manifest(cmd: &Command, out: Option<&Path>, outputs: &[PathBuf], extra: serde_json::Value) -> Result<()> {
    let Some(out) = out else {
        return Ok(());
    };
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let manifest = json!({
        "tool": "delaymat",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cmd,
        "outputs": outputs,
        "result": extra,
    });
    let path = dir.join("run-manifest.json");
    write_file(&path, &serde_json::to_string_pretty(&manifest)?)?;
    info!("wrote {}", path.display());
    Ok(())
}

struct Case {
    label: String,
    sys: DelaySystem,
    psi: HistorySpec,
    g: ForcingSpec,
}

fn scalar_poly(d: usize, coeffs: &[f64]) -> Result<MatrixPolynomial> {
    Ok(MatrixPolynomial::new(coeffs.iter().map(|&c| Matrix::scalar(d, c)).collect())?)
}

/// Continuous systems with entries in `[−1, 1)` and `σ = 1`; discrete ones
/// with entries in `[−1/(2d), 1/(2d))` and `m ∈ {1, 2, 3}`. Data are scalar
/// multiples of `I`.
fn random_cases(seed: u64, count: usize) -> Result<Vec<Case>> {
    let mut gen = SystemGenerator::new(seed);
    let mut cases = Vec::new();
    for k in 0..count {
        let d = gen.pick(&[2usize, 3, 4]);
        let sys = DelaySystem::continuous(gen.uniform_matrix(d, -1.0, 1.0), gen.uniform_matrix(d, -1.0, 1.0), 1.0)?;
        let c: Vec<f64> = (0..5).map(|_| gen.uniform(-1.0, 1.0)).collect();
        let psi = PiecewiseMatrixPolynomial::single(-1.0, 0.0, scalar_poly(d, &c[..3])?)?;
        let g = PiecewiseMatrixPolynomial::new(
            vec![0.0, 1.0],
            vec![scalar_poly(d, &c[3..])?],
            Matrix::zeros(d),
            true,
        )?;
        cases.push(Case {
            label: format!("continuous#{k}(d={d})"),
            sys,
            psi: HistorySpec::Continuous(psi),
            g: ForcingSpec::Continuous(g),
        });
    }
    for k in 0..count {
        let d = gen.pick(&[2usize, 3, 4]);
        let m = gen.pick(&[1usize, 2, 3]);
        let s = 0.5 / d as f64;
        let sys = DelaySystem::discrete(gen.uniform_matrix(d, -s, s), gen.uniform_matrix(d, -s, s), m)?;
        let psi = (0..=m).map(|_| Matrix::scalar(d, gen.uniform(-1.0, 1.0))).collect();
        let g = (0..64).map(|_| Matrix::scalar(d, gen.uniform(-1.0, 1.0))).collect();
        cases.push(Case {
            label: format!("discrete#{k}(d={d},m={m})"),
            sys,
            psi: HistorySpec::Discrete(psi),
            g: ForcingSpec::Discrete {
                values: g,
                hold_last: true,
            },
        });
    }
    Ok(cases)
}

#[derive(Debug, Serialize)]
struct WindowDiff {
    case: String,
    lo: f64,
    hi: f64,
    max_diff: f64,
}

fn verify_case(case: &Case, windows: usize, cfg: &IntegratorConfig) -> Result<Vec<WindowDiff>> {
    let windows = windows.max(1);
    let sys = &case.sys;
    let mut rows = Vec::new();
    match sys.kind() {
        TimeKind::Continuous => {
            let sigma = sys.sigma()?;
            let horizon = windows as f64 * sigma;
            let closed = solve_continuous(sys, &case.psi, &case.g, horizon, &SolveOptions::default())?.value;
            let (HistorySpec::Continuous(psi), ForcingSpec::Continuous(g)) = (&case.psi, &case.g) else {
                bail!("continuous system with discrete data");
            };
            let oracle = integrate_continuous(sys, |t| psi.eval(t), |t| g.eval(t), horizon, cfg)?;
            for k in 0..=windows {
                let lo = (k as f64 - 1.0) * sigma;
                let mut worst = 0.0f64;
                for (t, v) in oracle.samples().filter(|(t, _)| *t >= lo && *t <= lo + sigma) {
                    worst = worst.max(closed.eval(t).max_abs_diff(v));
                }
                rows.push(WindowDiff {
                    case: case.label.clone(),
                    lo,
                    hi: lo + sigma,
                    max_diff: worst,
                });
            }
        }
        TimeKind::Discrete => {
            let m = sys.lag()?;
            let n = windows * (m + 1);
            let fund = DiscreteFundamental::new(sys.clone())?;
            let closed = solve_discrete(&fund, &case.psi, &case.g, n, &SolveOptions::default())?.value;
            let HistorySpec::Discrete(psi) = &case.psi else {
                bail!("discrete system with continuous data");
            };
            let g = &case.g;
            let values: Vec<Matrix> = (0..n).map(|u| g.discrete_value(u).cloned()).collect::<Result<_, _>>()?;
            let oracle = step_discrete(sys, psi, |u| values[u].clone(), n)?;
            let block = m + 1;
            for (b, chunk) in closed.values().chunks(block).enumerate() {
                let start = b * block;
                let worst = chunk
                    .iter()
                    .zip(&oracle.values()[start..])
                    .map(|(a, b)| a.max_abs_diff(b))
                    .fold(0.0, f64::max);
                let lo = closed.times()[start];
                rows.push(WindowDiff {
                    case: case.label.clone(),
                    lo,
                    hi: lo + chunk.len() as f64,
                    max_diff: worst,
                });
            }
        }
    }
    Ok(rows)
}

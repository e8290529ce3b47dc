use crate::config::{parse_range, FileConfig, RunConfig, RunFlags};
use crate::{BasisCheckArgs, CliError, Lemma1Args, MeshInfoArgs, RunArgs};
use hdivct::basis::{Family, ShapeSet};
use hdivct::checks::basis_checks;
use hdivct::divfree::{lemma1_check, CorrectionReport, Mode};
use hdivct::induction::{run_level, Cadence, ExperimentRow, InductionProblem};
use hdivct::mesh::{build_dofmap, build_uniform};
use hdivct::sig8;
use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Writes to stdout and, when given, to a file.
struct Tee {
    file: Option<BufWriter<File>>,
}

impl Tee {
    fn new(path: Option<&Path>) -> Result<Self, CliError> {
        let file = path.map(File::create).transpose()?.map(BufWriter::new);
        Ok(Self { file })
    }

    fn line(&mut self, s: &str) -> io::Result<()> {
        println!("{s}");
        if let Some(f) = &mut self.file {
            writeln!(f, "{s}")?;
            f.flush()?;
        }
        Ok(())
    }
}

pub fn basis_check(a: &BasisCheckArgs) -> Result<(), CliError> {
    let ps = parse_range(&a.p)?;
    if ps.contains(&0) {
        return Err(CliError::Usage("--p must be at least 1".into()));
    }
    let mut out = Tee::new(a.out.as_deref())?;
    let mut failed = 0;
    for p in ps {
        let set = ShapeSet::new(p)?;
        let counts: Vec<String> =
            Family::ALL.iter().zip(set.family_counts()).map(|(f, c)| format!("{}={c}", f.name())).collect();
        out.line(&format!("p={p} {} total={}", counts.join(" "), set.len()))?;
        for c in basis_checks(p, a.seed)? {
            failed += usize::from(!c.passed());
            out.line(&format!("  {c}"))?;
        }
    }
    if failed > 0 {
        return Err(CliError::Failure(format!("{failed} basis checks failed")));
    }
    Ok(())
}

pub fn lemma1(a: &Lemma1Args) -> Result<(), CliError> {
    let ps = parse_range(&a.p)?;
    if ps.iter().any(|&p| p < 2) {
        return Err(CliError::Usage("interior modes exist only for --p 2 or higher".into()));
    }
    let mut failed = 0;
    for p in ps {
        let r = lemma1_check(p)?;
        let ok = r.holds();
        failed += usize::from(!ok);
        println!(
            "p={p} n_i={} dimP={} rank={} mean_div_max={:.2e} {}",
            r.interior_shapes,
            r.dim_p,
            r.rank,
            r.mean_div_max,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        return Err(CliError::Failure(format!("rank check failed for {failed} degrees")));
    }
    Ok(())
}

pub fn mesh_info(a: &MeshInfoArgs) -> Result<(), CliError> {
    let levels = parse_range(&a.levels)?;
    if levels.contains(&0) || a.p == 0 {
        return Err(CliError::Usage("levels and --p start at 1".into()));
    }
    let set = ShapeSet::new(a.p)?;
    for level in levels {
        let mesh = build_uniform(level)?;
        let dofs = build_dofmap(&mesh, &set)?;
        println!(
            "{} h={} dimV_{}={} face_dofs={} interior_dofs={}",
            mesh.stats(),
            mesh.h,
            a.p,
            dofs.n_dofs,
            dofs.n_face_dofs,
            dofs.n_dofs - dofs.n_face_dofs
        );
    }
    Ok(())
}

fn pretty_header() -> String {
    format!(
        "{:>5}  {:>14}  {:>6}  {:>14}  {:>6}  {:>8}  {:<12}  {:>10}",
        "level", "L2 error", "order", "div norm", "order", "dim V", "mode", "time (s)"
    )
}

fn pretty_row(r: &ExperimentRow) -> String {
    let o = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
    format!(
        "{:>5}  {:>14}  {:>6}  {:>14}  {:>6}  {:>8}  {:<12}  {:>10.2}",
        r.level,
        sig8(r.l2_error),
        o(r.order),
        sig8(r.div_norm),
        o(r.div_order),
        r.dim_v,
        r.mode.as_str(),
        r.walltime_s
    )
}

/// CSV to the output file, CSV or an aligned table to stdout.
struct RowSink {
    file: Option<BufWriter<File>>,
    pretty: bool,
}

impl RowSink {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let file = cfg.out.as_deref().map(File::create).transpose()?.map(BufWriter::new);
        let mut sink = Self { file, pretty: cfg.pretty };
        if let Some(f) = &mut sink.file {
            writeln!(f, "{}", ExperimentRow::CSV_HEADER)?;
            f.flush()?;
        }
        println!("{}", if sink.pretty { pretty_header() } else { ExperimentRow::CSV_HEADER.to_string() });
        Ok(sink)
    }

    fn row(&mut self, r: &ExperimentRow) -> io::Result<()> {
        if let Some(f) = &mut self.file {
            writeln!(f, "{}", r.to_csv_row())?;
            f.flush()?;
        }
        println!("{}", if self.pretty { pretty_row(r) } else { r.to_csv_row() });
        Ok(())
    }

    fn abort(&mut self) -> io::Result<()> {
        if let Some(f) = &mut self.file {
            writeln!(f, "# ABORTED")?;
            f.flush()?;
        }
        println!("# ABORTED");
        Ok(())
    }
}

fn problem(cfg: &RunConfig, level: usize, mode: Mode) -> InductionProblem {
    let mut pr = InductionProblem::new(level, cfg.p, mode).with_steps(cfg.dt, cfg.steps);
    pr.integration = cfg.integration;
    pr.cadence = cfg.cadence;
    pr.full_tol = cfg.full_tol;
    pr
}

/// All rows of one level: a single evolution corrected at the end, or one
/// evolution per mode when the correction runs every step.
fn level_rows(cfg: &RunConfig, level: usize) -> hdivct::Result<Vec<(ExperimentRow, CorrectionReport)>> {
    if cfg.cadence == Cadence::EveryStep {
        let mut rows = Vec::new();
        for &m in &cfg.modes {
            rows.extend(run_level(&problem(cfg, level, m), &[m])?);
        }
        Ok(rows)
    } else {
        run_level(&problem(cfg, level, cfg.modes[0]), &cfg.modes)
    }
}

pub fn run(a: &RunArgs) -> Result<(), CliError> {
    let file = match &a.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = RunFlags {
        p: a.p,
        levels: a.levels.clone(),
        dt: a.dt,
        steps: a.steps,
        mode: a.mode.clone(),
        integration: a.integration.clone(),
        cadence: a.cadence.clone(),
        full_tol: a.full_tol,
        seed: a.seed,
        out: a.out.clone(),
        pretty: a.pretty,
    };
    let cfg = RunConfig::resolve(&flags, &file)?;
    for &level in &cfg.levels {
        for &m in &cfg.modes {
            problem(&cfg, level, m).validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    let mut sink = RowSink::new(&cfg)?;
    let mut previous: HashMap<Mode, ExperimentRow> = HashMap::new();
    for &level in &cfg.levels {
        let rows = match level_rows(&cfg, level) {
            Ok(rows) => rows,
            Err(e) => {
                sink.abort()?;
                return Err(CliError::Failure(format!("level {level}: {e}")));
            }
        };
        for (mut row, _) in rows {
            if let Some(prev) = previous.get(&row.mode) {
                let mut pair = [prev.clone(), row];
                hdivct::induction::fill_orders(&mut pair);
                row = pair[1].clone();
            }
            sink.row(&row)?;
            previous.insert(row.mode, row);
        }
    }
    Ok(())
}

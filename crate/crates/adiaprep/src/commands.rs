//! Subcommand implementations. Each returns the text printed on stdout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adiaprep_core::analysis::{
    fit_error_density, fit_exponential_decay, fit_power_law, ErrorDensityFit, Window,
};
use adiaprep_core::ed::{gap_sweep, uniform_grid, GapProfile};
use adiaprep_core::hamiltonian::{energy, parent_hamiltonian};
use adiaprep_core::linalg::{psd_rank, DEFAULT_KERNEL_TOL};
use adiaprep_core::mps::correlation_length;
use adiaprep_core::schedule::Schedule;
use adiaprep_core::states::{pairs_for_qubits, path_bulk_tensor, path_state, StateFamily};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cli::{FitModel, Format};
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_file, sha256_hex, ExperimentManifest, TOOLKIT, VERSION};
use crate::runner::{run_sweep, Engine, SweepOptions};
use crate::serial::{gap_csv, read_csv, schedule_csv, write_atomic, write_json, RunRecord};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Digest of the parameters of a command run without a manifest.
fn params_digest(v: &Value) -> String {
    sha256_hex(v.to_string().as_bytes())
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))
}

/// Parses `LO:HI`.
pub fn parse_window(s: &str) -> CliResult<Window> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| usage(format!("window must be LO:HI, got {s:?}")))?;
    let lo: f64 = lo.trim().parse().map_err(|_| usage(format!("bad window bound {lo:?}")))?;
    let hi: f64 = hi.trim().parse().map_err(|_| usage(format!("bad window bound {hi:?}")))?;
    Window::new(lo, hi).map_err(|e| usage(e.to_string()))
}

/// Parses `K` or `LO:HI:K` into grid points.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || usage(format!("grid must be K or LO:HI:K with K >= 2 and 0 <= LO < HI <= 1, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [k] => {
            let k: usize = k.trim().parse().map_err(|_| bad())?;
            uniform_grid(k).map_err(|_| bad())
        }
        [lo, hi, k] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let k: usize = k.trim().parse().map_err(|_| bad())?;
            if k < 2 || !(0.0..1.0).contains(&lo) || !(hi > lo && hi <= 1.0) {
                return Err(bad());
            }
            Ok((0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect())
        }
        _ => Err(bad()),
    }
}

fn parse_family(s: &str) -> CliResult<StateFamily> {
    s.parse().map_err(|e| {
        validation(format!("{e}; known families: {}", adiaprep_core::states::family_help()))
    })
}

fn sweep(manifest: &Path, out: Option<&Path>, jobs: Option<usize>, engine: Engine) -> CliResult<String> {
    let m = ExperimentManifest::load(manifest)?.validate()?;
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| m.raw.output_dir.clone());
    let jobs = jobs.unwrap_or(m.raw.jobs);
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let summary = run_sweep(&m, &SweepOptions { engine, out_dir, jobs })?;
    to_json(&summary)
}

pub fn cmd_prepare(manifest: &Path, out: Option<&Path>, jobs: Option<usize>) -> CliResult<String> {
    sweep(manifest, out, jobs, Engine::Tebd)
}

pub fn cmd_ed_evolve(manifest: &Path, out: Option<&Path>, jobs: Option<usize>) -> CliResult<String> {
    sweep(manifest, out, jobs, Engine::Ed)
}

#[derive(Serialize)]
struct GapSummary {
    n_qubits: usize,
    delta_min: f64,
    argmin_s: f64,
    any_degenerate: bool,
    file: String,
}

pub fn cmd_gap(
    family: &str,
    sizes: &[usize],
    grid: &str,
    out: Option<&Path>,
    jobs: Option<usize>,
    format: Format,
) -> CliResult<String> {
    let grid = parse_grid(grid)?;
    let fam = parse_family(family)?;
    fam.validate_for_path()?;
    for &n in sizes {
        pairs_for_qubits(n)?;
    }
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let tag = params_digest(&json!({"command": "gap", "family": fam.to_string(), "grid": grid}));
    let profiles: Vec<CliResult<GapProfile>> = pool(jobs.unwrap_or(1))?
        .install(|| sizes.par_iter().map(|&n| Ok(gap_sweep(&fam, &grid, n)?)).collect());
    let mut rows = Vec::new();
    for (n, p) in sizes.iter().zip(profiles) {
        let p = p?;
        let file = format!("gap_{}_N{n}.csv", fam.to_string().replace([':', '='], "_"));
        write_atomic(&out_dir.join(&file), &gap_csv(&tag, &p)?)?;
        log::info!("gap N={n}: delta_min={:.6} at s={}", p.delta_min, p.argmin_s);
        rows.push(GapSummary {
            n_qubits: *n,
            delta_min: p.delta_min,
            argmin_s: p.argmin_s,
            any_degenerate: p.any_degenerate,
            file,
        });
    }
    match format {
        Format::Json => to_json(&json!({
            "toolkit": TOOLKIT, "version": VERSION, "params_digest": tag,
            "family": fam.to_string(), "grid_points": grid.len(), "profiles": rows,
        })),
        Format::Csv => {
            let mut s = String::from("n_qubits,delta_min,argmin_s,any_degenerate,file\n");
            for r in rows {
                s += &format!("{},{:.15e},{},{},{}\n", r.n_qubits, r.delta_min, r.argmin_s, r.any_degenerate, r.file);
            }
            Ok(s)
        }
    }
}

/// A run record together with the digests that tie it to its files.
#[derive(Clone, Debug, Serialize)]
pub struct FitInput {
    pub path: String,
    pub sha256: String,
    pub trajectory_csv: String,
    pub trajectory_sha256: String,
    pub manifest_hash: String,
    #[serde(skip)]
    pub record: RunRecord,
}

/// Loads every run record matching `pattern`, checking that each trajectory
/// table carries the record's manifest hash and ends at its final fidelity.
pub fn load_records(pattern: &str) -> CliResult<Vec<FitInput>> {
    let paths = glob::glob(pattern).map_err(|e| usage(format!("bad glob {pattern:?}: {e}")))?;
    let mut out = Vec::new();
    for p in paths {
        let p = p.map_err(|e| CliError::Runtime(format!("glob {pattern:?}: {e}")))?;
        let text = std::fs::read_to_string(&p)?;
        let probe: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if probe.get("format").and_then(Value::as_str) != Some(crate::serial::RUN_FORMAT) {
            continue;
        }
        let record = RunRecord::load(&p)?;
        let csv_path = p.parent().unwrap_or(Path::new(".")).join(&record.trajectory_csv);
        let banner = std::fs::read_to_string(&csv_path)
            .map_err(|e| validation(format!("{}: trajectory {}: {e}", p.display(), csv_path.display())))?
            .lines()
            .next()
            .unwrap_or_default()
            .to_string();
        if !banner.ends_with(&format!("manifest={}", record.manifest_hash)) {
            return Err(validation(format!("{} does not carry the manifest hash of {}", csv_path.display(), p.display())));
        }
        let (header, rows) = read_csv(&csv_path)?;
        let col = header.iter().position(|h| h == "fidelity").ok_or_else(|| {
            validation(format!("{} has no fidelity column", csv_path.display()))
        })?;
        let last: f64 = rows
            .last()
            .and_then(|r| r.get(col))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| validation(format!("{} has no samples", csv_path.display())))?;
        if (last - record.summary.final_fidelity).abs() > 1e-12 {
            return Err(validation(format!("{} disagrees with {}", csv_path.display(), p.display())));
        }
        out.push(FitInput {
            path: p.display().to_string(),
            sha256: sha256_file(&p)?,
            trajectory_csv: csv_path.display().to_string(),
            trajectory_sha256: sha256_file(&csv_path)?,
            manifest_hash: record.manifest_hash.clone(),
            record,
        });
    }
    if out.is_empty() {
        return Err(validation(format!("no run records found matching {pattern:?}")));
    }
    Ok(out)
}

fn error_density_fits(inputs: &[FitInput]) -> CliResult<Vec<ErrorDensityFit>> {
    let mut by_time: BTreeMap<u64, (f64, Vec<(f64, f64)>)> = BTreeMap::new();
    for i in inputs {
        let r = &i.record;
        by_time
            .entry(r.total_time.to_bits())
            .or_insert_with(|| (r.total_time, Vec::new()))
            .1
            .push((r.n_qubits as f64, r.summary.final_fidelity));
    }
    let mut fits = Vec::new();
    let mut times: Vec<_> = by_time.into_values().collect();
    times.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (t, pts) in times {
        fits.push(fit_error_density(&pts, t)?);
    }
    Ok(fits)
}

fn density_json(f: &ErrorDensityFit) -> Value {
    json!({
        "total_time": f.total_time, "kappa": f.kappa, "c": f.c, "residual": f.residual,
        "relative_residual": f.relative_residual, "n_points": f.n_points, "dropped": f.dropped,
    })
}

fn check_single_family(inputs: &[FitInput]) -> CliResult<()> {
    let fam = &inputs[0].record.family;
    if let Some(other) = inputs.iter().find(|i| &i.record.family != fam) {
        return Err(validation(format!("records mix families {fam} and {}", other.record.family)));
    }
    Ok(())
}

pub fn cmd_fit(
    pattern: &str,
    model: FitModel,
    window: Option<Window>,
    out: Option<&Path>,
    format: Format,
) -> CliResult<String> {
    let inputs = load_records(pattern)?;
    check_single_family(&inputs)?;
    let window_used = window.unwrap_or_else(Window::all);
    let (name, result, table) = match model {
        FitModel::ErrorDensity => {
            let fits = error_density_fits(&inputs)?;
            let mut table = String::from("total_time,kappa,c,relative_residual\n");
            for f in &fits {
                table += &format!("{},{:.15e},{:.15e},{:.6e}\n", f.total_time, f.kappa, f.c, f.relative_residual);
            }
            ("error-density", json!({"fits": fits.iter().map(density_json).collect::<Vec<_>>()}), table)
        }
        FitModel::ExpDecay => {
            let fits = error_density_fits(&inputs)?;
            let pts: Vec<(f64, f64)> = fits.iter().map(|f| (f.total_time, f.kappa)).collect();
            let d = fit_exponential_decay(&pts, window_used)?;
            let table = format!("kappa0,gamma,r_squared\n{:.15e},{:.15e},{:.12}\n", d.kappa0, d.gamma, d.r_squared);
            (
                "exp-decay",
                json!({
                    "kappa0": d.kappa0, "gamma": d.gamma, "r_squared": d.r_squared,
                    "n_points": d.n_points, "dropped": d.dropped,
                    "error_density": fits.iter().map(density_json).collect::<Vec<_>>(),
                }),
                table,
            )
        }
        FitModel::PowerLaw => {
            let mut by_size: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
            for i in &inputs {
                let r = &i.record;
                by_size.entry(r.n_qubits).or_default().push((r.total_time, r.summary.infidelity));
            }
            let mut fits = Vec::new();
            let mut table = String::from("n_qubits,alpha,prefactor,r_squared,non_monotone\n");
            for (n, pts) in by_size {
                let p = fit_power_law(&pts, window_used)?;
                table += &format!("{n},{:.12},{:.6e},{:.12},{}\n", p.alpha, p.prefactor, p.r_squared, p.non_monotone);
                fits.push(json!({
                    "n_qubits": n, "alpha": p.alpha, "prefactor": p.prefactor, "r_squared": p.r_squared,
                    "residual": p.residual, "non_monotone": p.non_monotone, "n_points": p.n_points,
                }));
            }
            ("power-law", json!({"fits": fits}), table)
        }
    };
    let mut hashes: Vec<&str> = inputs.iter().map(|i| i.manifest_hash.as_str()).collect();
    hashes.sort_unstable();
    hashes.dedup();
    let report = json!({
        "toolkit": TOOLKIT,
        "version": VERSION,
        "model": name,
        "family": inputs[0].record.family,
        "input_glob": pattern,
        "window": {"lo": window_used.lo, "hi": window_used.hi},
        "manifest_hashes": hashes,
        "inputs": inputs,
        "result": result,
    });
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join(format!("fit_{name}.json")), &report)?;
    }
    match format {
        Format::Json => to_json(&report),
        Format::Csv => Ok(table),
    }
}

pub fn cmd_schedule(
    kind: &str,
    k: Option<u32>,
    samples: usize,
    out: Option<&Path>,
    format: Format,
) -> CliResult<String> {
    if samples < 2 {
        return Err(usage(format!("need at least 2 samples, got {samples}")));
    }
    let spec = match (kind, k) {
        ("beta", Some(k)) => format!("beta:k={k}"),
        ("beta", None) => return Err(usage("beta schedules need --k")),
        (other, None) => other.to_string(),
        (_, Some(_)) => return Err(usage("--k applies to beta schedules only")),
    };
    let sched: Schedule = spec.parse().map_err(|e| usage(format!("{e}")))?;
    let pts = (0..samples)
        .map(|i| {
            let l = i as f64 / (samples - 1) as f64;
            Ok((l, sched.evaluate(l)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let tag = params_digest(&json!({"command": "schedule", "schedule": sched.to_string(), "samples": samples}));
    let body = match format {
        Format::Csv => String::from_utf8(schedule_csv(&tag, &pts)?).expect("csv output is utf-8"),
        Format::Json => to_json(&json!({
            "toolkit": TOOLKIT, "version": VERSION, "params_digest": tag,
            "schedule": sched.to_string(),
            "samples": pts.iter().map(|(l, s)| json!({"lambda": l, "s": s})).collect::<Vec<_>>(),
        }))?,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let ext = if format == Format::Csv { "csv" } else { "json" };
        let name = format!("schedule_{}.{ext}", sched.to_string().replace([':', '='], "_"));
        write_atomic(&dir.join(name), body.as_bytes())?;
    }
    Ok(body)
}

#[derive(Clone, Debug, Serialize)]
pub struct StateReport {
    pub family: String,
    pub n_qubits: usize,
    pub s: f64,
    pub bond_dims: Vec<usize>,
    pub max_bond: usize,
    /// In units of blocked two-qubit sites.
    pub correlation_length_per_site: f64,
    /// In units of qubits.
    pub correlation_length_per_qubit: f64,
    /// Energy under the state's own parent Hamiltonian.
    pub energy: f64,
}

pub fn state_report(family: &StateFamily, n_qubits: usize, s: f64) -> CliResult<StateReport> {
    let n_pairs = pairs_for_qubits(n_qubits)?;
    let state = path_state(family, s, n_pairs)?;
    let h = parent_hamiltonian(&state, DEFAULT_KERNEL_TOL)?;
    let xi = correlation_length(&path_bulk_tensor(family, s)?)?;
    Ok(StateReport {
        family: family.to_string(),
        n_qubits,
        s,
        bond_dims: state.bond_dims(),
        max_bond: state.max_bond(),
        correlation_length_per_site: xi,
        correlation_length_per_qubit: xi * family.qubits_per_site() as f64,
        energy: energy(&state, &h)?,
    })
}

pub fn cmd_state(family: &str, n_qubits: usize, s: f64, format: Format) -> CliResult<String> {
    if !(0.0..=1.0).contains(&s) {
        return Err(usage(format!("--s must lie in [0, 1], got {s}")));
    }
    let fam = parse_family(family)?;
    if fam == StateFamily::Aklt2dHex {
        let q = fam.target_operator()?;
        let v = json!({
            "family": fam.to_string(), "phys_dim": q.phys_dim(), "bond_dim": q.bond_dim(),
            "valence": q.valence(), "rank": psd_rank(q.matrix(), DEFAULT_KERNEL_TOL)?,
            "note": "construction only; no chain evolution for this family",
        });
        return to_json(&v);
    }
    let r = state_report(&fam, n_qubits, s)?;
    match format {
        Format::Json => to_json(&r),
        Format::Csv => Ok(format!(
            "family,n_qubits,s,max_bond,xi_site,xi_qubit,energy\n{},{},{},{},{:.12},{:.12},{:.6e}\n",
            r.family, r.n_qubits, r.s, r.max_bond, r.correlation_length_per_site,
            r.correlation_length_per_qubit, r.energy
        )),
    }
}

//! Re-validates emitted CSV files against the module invariants: population
//! normalization, the ergotropy decomposition identity and its bounds,
//! metric ranges, stage-label recomputation, and (optionally) the schema
//! echo in a run manifest.

use std::path::Path;

use anyhow::{anyhow, bail, Context};

use qbat::metrics::classify_stage;
use qbat::state::PopulationVector;

use crate::jobs::InvariantFailure;
use crate::manifest::RunManifest;

const ID_TOL: f64 = 1e-10;
const RANGE_TOL: f64 = 1e-9;

pub struct VerifySummary {
    pub rows: u64,
    pub schema: &'static str,
}

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn load_table(path: &Path) -> anyhow::Result<Table> {
    let body =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = body.lines();
    let header = lines.next().ok_or_else(|| anyhow!("{}: empty file", path.display()))?;
    let columns: Vec<String> = header.split(',').map(String::from).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<String> = line.split(',').map(String::from).collect();
        if fields.len() != columns.len() {
            bail!("{}: row {} has {} fields, header has {}", path.display(), i + 2, fields.len(), columns.len());
        }
        rows.push(fields);
    }
    Ok(Table { columns, rows })
}

fn col(table: &Table, name: &str) -> Option<usize> {
    table.columns.iter().position(|c| c == name)
}

fn parse_f64(field: &str, what: &str, row: usize) -> anyhow::Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| anyhow!(InvariantFailure(format!("row {row}: bad {what} `{field}`"))))
}

fn population_columns(table: &Table) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1.. {
        match col(table, &format!("p{i}")) {
            Some(idx) => out.push(idx),
            None => break,
        }
    }
    out
}

pub fn verify(path: &Path, manifest: Option<&Path>) -> anyhow::Result<VerifySummary> {
    let table = load_table(path)?;
    let schema = if table.columns.first().map(String::as_str) == Some("coherence") {
        verify_bounds(&table)?;
        "bounds"
    } else if table.columns.first().map(String::as_str) == Some("time") {
        verify_report_rows(&table, false)?;
        "dynamics"
    } else if table.columns.first().map(String::as_str) == Some("sample") {
        verify_report_rows(&table, true)?;
        "scatter"
    } else if table.columns.first().map(String::as_str) == Some("p1") {
        verify_surface(&table)?;
        "surface"
    } else {
        bail!("{}: unrecognized schema (first column `{}`)", path.display(), table.columns[0]);
    };

    if let Some(mpath) = manifest {
        let m = RunManifest::load(mpath)?;
        let record = m
            .files
            .iter()
            .find(|f| Path::new(&f.path).file_name() == path.file_name())
            .ok_or_else(|| anyhow!("manifest does not mention {}", path.display()))?;
        if record.rows != table.rows.len() as u64 {
            bail!(InvariantFailure(format!(
                "manifest row count {} != file row count {}",
                record.rows,
                table.rows.len()
            )));
        }
        if record.columns != table.columns {
            bail!(InvariantFailure("manifest column schema differs from file header".into()));
        }
    }

    Ok(VerifySummary { rows: table.rows.len() as u64, schema })
}

fn check(ok: bool, row: usize, what: &str) -> anyhow::Result<()> {
    if ok {
        Ok(())
    } else {
        Err(anyhow!(InvariantFailure(format!("row {row}: {what}"))))
    }
}

fn verify_report_rows(table: &Table, scatter: bool) -> anyhow::Result<()> {
    let pcols = population_columns(table);
    let d = pcols.len();
    if d < 2 {
        bail!("report table without population columns");
    }
    let get = |name: &str| -> anyhow::Result<usize> {
        col(table, name).ok_or_else(|| anyhow!("missing column {name}"))
    };
    let stored = get("stored_energy")?;
    let erg = get("ergotropy")?;
    let inc = get("incoherent_ergotropy")?;
    let coh = get("coherent_ergotropy")?;
    let locked = get("locked_energy")?;
    let eff = get("efficiency")?;
    let coherence = get("coherence")?;
    let pr = get("participation_ratio")?;
    let purity = get("purity")?;
    let stage = get("stage")?;
    let _ = scatter;

    for (irow, row) in table.rows.iter().enumerate() {
        let rn = irow + 2;
        let mut p = Vec::with_capacity(d);
        for &c in &pcols {
            p.push(parse_f64(&row[c], "population", rn)?);
        }
        let sum: f64 = p.iter().sum();
        check((sum - 1.0).abs() <= RANGE_TOL, rn, "populations do not sum to 1")?;
        check(p.iter().all(|v| *v >= -1e-12), rn, "negative population")?;

        let e = parse_f64(&row[stored], "stored energy", rn)?;
        let w = parse_f64(&row[erg], "ergotropy", rn)?;
        let wi = parse_f64(&row[inc], "incoherent ergotropy", rn)?;
        let wc = parse_f64(&row[coh], "coherent ergotropy", rn)?;
        let lk = parse_f64(&row[locked], "locked energy", rn)?;
        let cv = parse_f64(&row[coherence], "coherence", rn)?;
        let prv = parse_f64(&row[pr], "participation ratio", rn)?;
        let pv = parse_f64(&row[purity], "purity", rn)?;

        check((w - wi - wc).abs() <= ID_TOL, rn, "ergotropy decomposition identity broken")?;
        check(wi >= -ID_TOL, rn, "negative incoherent ergotropy")?;
        check(wc >= -ID_TOL, rn, "negative coherent ergotropy")?;
        check(w <= e + ID_TOL, rn, "ergotropy exceeds stored energy")?;
        check(w >= wi - ID_TOL, rn, "ergotropy below incoherent ergotropy")?;
        check(lk >= -ID_TOL, rn, "negative locked energy")?;
        check((e - lk - w).abs() <= ID_TOL, rn, "stored != locked + ergotropy")?;
        check(cv >= -ID_TOL, rn, "negative coherence")?;
        check(
            (1.0 - RANGE_TOL..=d as f64 + RANGE_TOL).contains(&prv),
            rn,
            "participation ratio out of range",
        )?;
        check(
            (1.0 / d as f64 - RANGE_TOL..=1.0 + RANGE_TOL).contains(&pv),
            rn,
            "purity out of range",
        )?;

        let eff_field = row[eff].as_str();
        if e.abs() <= 1e-12 {
            check(eff_field.is_empty(), rn, "efficiency must be empty at zero stored energy")?;
        } else {
            check(!eff_field.is_empty(), rn, "efficiency missing")?;
            let ev = parse_f64(eff_field, "efficiency", rn)?;
            check((ev * e - w).abs() <= 1e-8, rn, "efficiency inconsistent with E and ergotropy")?;
        }

        let pops = PopulationVector::new(p)
            .map_err(|e| anyhow!(InvariantFailure(format!("row {rn}: {e}"))))?;
        let want = classify_stage(&pops).to_string();
        check(row[stage] == want, rn, "stage label does not match recomputation")?;
        if want == "I" {
            check(wi <= 1e-10, rn, "stage I row with nonzero incoherent ergotropy")?;
        }
    }
    Ok(())
}

fn verify_surface(table: &Table) -> anyhow::Result<()> {
    let pcols = population_columns(table);
    let d = pcols.len();
    let get = |name: &str| -> anyhow::Result<usize> {
        col(table, name).ok_or_else(|| anyhow!("missing column {name}"))
    };
    let inc = get("incoherent_ergotropy")?;
    let stored = get("stored_energy")?;
    let lo = get("ergotropy_lower")?;
    let hi = get("ergotropy_upper")?;
    let stage = get("stage")?;
    let energies: Vec<f64> =
        (0..d).map(|n| -1.0 + 2.0 * n as f64 / (d - 1) as f64).collect();

    for (irow, row) in table.rows.iter().enumerate() {
        let rn = irow + 2;
        let mut p = Vec::with_capacity(d);
        for &c in &pcols {
            p.push(parse_f64(&row[c], "population", rn)?);
        }
        let sum: f64 = p.iter().sum();
        check((sum - 1.0).abs() <= RANGE_TOL, rn, "populations do not sum to 1")?;
        let pops = PopulationVector::new(p.clone())
            .map_err(|e| anyhow!(InvariantFailure(format!("row {rn}: {e}"))))?;

        let e = parse_f64(&row[stored], "stored energy", rn)?;
        let wi = parse_f64(&row[inc], "incoherent ergotropy", rn)?;
        let lo_v = parse_f64(&row[lo], "lower bound", rn)?;
        let hi_v = parse_f64(&row[hi], "upper bound", rn)?;

        let want_e: f64 =
            p.iter().zip(&energies).map(|(a, b)| a * b).sum::<f64>() - energies[0];
        let want_wi = qbat::metrics::incoherent_ergotropy_of_populations(&pops, &energies);
        check((e - want_e).abs() <= 1e-10, rn, "stored energy does not match populations")?;
        check((wi - want_wi).abs() <= 1e-10, rn, "incoherent ergotropy mismatch")?;
        check((lo_v - wi).abs() <= 1e-12, rn, "lower bound must equal incoherent ergotropy")?;
        check((hi_v - e).abs() <= 1e-12, rn, "upper bound must equal stored energy")?;
        let want_stage = classify_stage(&pops).to_string();
        check(row[stage] == want_stage, rn, "stage label does not match recomputation")?;
    }
    Ok(())
}

fn verify_bounds(table: &Table) -> anyhow::Result<()> {
    let get = |name: &str| -> anyhow::Result<usize> {
        col(table, name).ok_or_else(|| anyhow!("missing column {name}"))
    };
    let c = get("coherence")?;
    let lo = get("lower")?;
    let hi = get("upper")?;
    let mut last_c = f64::NEG_INFINITY;
    for (irow, row) in table.rows.iter().enumerate() {
        let rn = irow + 2;
        let cv = parse_f64(&row[c], "coherence", rn)?;
        let lov = parse_f64(&row[lo], "lower", rn)?;
        let hiv = parse_f64(&row[hi], "upper", rn)?;
        check(cv > last_c - 1e-15, rn, "coherence grid not increasing")?;
        last_c = cv;
        check(lov <= hiv + 1e-10, rn, "lower envelope exceeds upper")?;
        if irow == 0 {
            check(cv == 0.0, rn, "grid must start at zero coherence")?;
            check(lov == 0.0 && hiv == 0.0, rn, "band must start at (0, 0)")?;
        }
    }
    Ok(())
}

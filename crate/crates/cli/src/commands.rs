use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use domain_gap::analysis::{ap_discrepancy, correlate, KlDirection, ProfilePair};
use domain_gap::gating::{banks_for, run_schedule, threshold_sweep};
use domain_gap::io::{
    read_ap_records, read_gap_series, read_snapshot_dir, sweep_table_csv, write_report, write_snapshot_dir,
};
use domain_gap::synth::gen_domain;
use domain_gap::{compute_gap, DomainSnapshot};

use crate::error::CliError;
use crate::settings::{
    load_config, resolve_epsilon, resolve_kl_direction, resolve_policy, scenario_from_config, PolicyFlags,
};

fn load_all(dirs: &[PathBuf]) -> Result<Vec<DomainSnapshot>, CliError> {
    dirs.iter().map(|d| Ok(read_snapshot_dir(d)?)).collect()
}

pub fn gap(
    source: &Path,
    target: &Path,
    flags: &PolicyFlags,
    config: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let config = load_config(config)?;
    let resolved = resolve_policy(flags, None, &config)?;
    let (src, tgt) = (read_snapshot_dir(source)?, read_snapshot_dir(target)?);
    let banks = banks_for(&src, &resolved.policy, &resolved.rng)?;
    let report = compute_gap(&src, &tgt, resolved.policy.metric, banks.as_ref())?;
    write_report(&report, out)?;
    println!(
        "{} {} -> {}: {}",
        report.metric, report.source_id, report.target_id, report.aggregate
    );
    Ok(())
}

pub fn simulate(
    source: &Path,
    targets: &[PathBuf],
    threshold: Option<f64>,
    flags: &PolicyFlags,
    config: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let config = load_config(config)?;
    let resolved = resolve_policy(flags, threshold, &config)?;
    let src = read_snapshot_dir(source)?;
    let tgts = load_all(targets)?;
    let log = run_schedule(&src, &tgts, &resolved.policy, &resolved.rng)?;
    for (n, d) in log.decisions.iter().enumerate() {
        println!(
            "step={} domain={} gap={} action={} cost={}",
            n + 1,
            d.domain_id,
            d.gap_report.aggregate,
            d.action,
            d.step_cost
        );
    }
    write_report(&log, out)?;
    println!(
        "total_cost={} adapt_count={} skip_count={}",
        log.total_cost, log.adapt_count, log.skip_count
    );
    Ok(())
}

pub fn parse_thresholds(s: &str) -> Result<Vec<f64>, CliError> {
    let values = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::invalid(format!("thresholds: cannot parse '{t}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::invalid("thresholds list is empty"));
    }
    Ok(values)
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    source: &Path,
    targets: &[PathBuf],
    thresholds: &str,
    flags: &PolicyFlags,
    config: Option<&Path>,
    out: &Path,
    table: Option<&Path>,
) -> Result<(), CliError> {
    let config = load_config(config)?;
    let thresholds = parse_thresholds(thresholds)?;
    let resolved = resolve_policy(flags, None, &config)?;
    let src = read_snapshot_dir(source)?;
    let tgts = load_all(targets)?;
    let rows = threshold_sweep(&src, &tgts, &thresholds, &resolved.policy, &resolved.rng)?;
    write_report(&rows, out)?;
    let table_path = table.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("csv"));
    std::fs::write(&table_path, sweep_table_csv(&rows))
        .map_err(|e| CliError::Io(format!("{}: {e}", table_path.display())))?;
    for r in &rows {
        println!(
            "threshold={} adapt_count={} total_cost={} mean_gap={}",
            r.threshold, r.adapt_count, r.total_cost, r.mean_gap
        );
    }
    Ok(())
}

pub fn synth(config: &Path, out: &Path) -> Result<(), CliError> {
    let config = load_config(Some(config))?;
    let (scenario, phases) = scenario_from_config(&config)?;
    for &t in &phases {
        let snapshot = gen_domain(&scenario, t)?;
        let dir = out.join(format!("t{t:04}"));
        write_snapshot_dir(&snapshot, &dir)?;
        println!("{} {}", dir.display(), snapshot.domain_id());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn correlate_cmd(
    gaps: &Path,
    aps: &Path,
    source_id: Option<String>,
    kl_direction: Option<KlDirection>,
    epsilon: Option<f64>,
    config: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let config = load_config(config)?;
    let epsilon = resolve_epsilon(epsilon, &config)?;
    let direction = resolve_kl_direction(kl_direction, &config)?;
    let source_id = match source_id {
        Some(s) => s,
        None => config.get("source_id").unwrap_or("source").to_owned(),
    };
    let gap_rows = read_gap_series(gaps)?;
    let ap_rows = read_ap_records(aps)?;

    let source = ap_rows
        .iter()
        .find(|r| r.domain_id() == source_id)
        .ok_or_else(|| CliError::invalid(format!("AP file has no row for source '{source_id}'")))?;
    let ap_ids: BTreeSet<&str> = ap_rows
        .iter()
        .map(|r| r.domain_id())
        .filter(|id| *id != source_id)
        .collect();
    let gap_ids: BTreeSet<&str> = gap_rows.iter().map(|(id, _)| id.as_str()).collect();
    if gap_ids.len() != gap_rows.len() || ap_ids.len() + 1 != ap_rows.len() {
        return Err(CliError::invalid("duplicate domain ids"));
    }
    if gap_ids != ap_ids {
        let only_gap: Vec<_> = gap_ids.difference(&ap_ids).collect();
        let only_ap: Vec<_> = ap_ids.difference(&gap_ids).collect();
        return Err(CliError::invalid(format!(
            "domain ids differ: only in gaps {only_gap:?}, only in APs {only_ap:?}"
        )));
    }

    let mut ids = Vec::new();
    let mut gap_values = Vec::new();
    let mut discrepancies = Vec::new();
    for (id, gap) in &gap_rows {
        let target = ap_rows.iter().find(|r| r.domain_id() == id).unwrap();
        ids.push(id.clone());
        gap_values.push(*gap);
        discrepancies.push(ap_discrepancy(source, target));
    }
    let pair = ProfilePair::new(ids, gap_values, discrepancies)?;
    let report = correlate(&pair, epsilon, direction)?;
    write_report(&report, out)?;
    match report.spearman {
        Some(r) => println!("kl={} spearman={r}", report.kl),
        None => println!("kl={} spearman=n/a", report.kl),
    }
    Ok(())
}

use std::collections::BTreeMap;
use std::io::{Read, Write};

use mixbayes_core::priors::{rate_adaptive, rate_exact, rate_higher_order};

use crate::error::{CliError, Result};
use crate::experiment::{mean_errors, Method, ResultRow};

/// One sample size of the rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct RatesRow {
    pub n: usize,
    /// `rate_exact` for each `k*` of the grid.
    pub exact: Vec<f64>,
    /// `rate_adaptive` for each `k*`; `None` where `k* < k0`.
    pub adaptive: Vec<Option<f64>>,
    pub higher_order: f64,
    /// Mean empirical W1 error per method, when results were supplied.
    pub empirical: BTreeMap<Method, f64>,
}

/// Tabulates the rate curves at a fixed `kbar` (so every column is monotone in
/// `n`), optionally next to the mean errors of an experiment CSV.
pub fn rates_table(
    k_star_grid: &[usize],
    k0: usize,
    gamma: f64,
    kbar: usize,
    n_grid: &[usize],
    results: Option<&[ResultRow]>,
) -> Result<Vec<RatesRow>> {
    if k_star_grid.is_empty() || n_grid.is_empty() {
        return Err(CliError::Config("empty k* or n grid".into()));
    }
    if k_star_grid.iter().any(|&k| k == 0 || k > kbar) {
        return Err(CliError::Config(format!("every k* must lie in 1..={kbar}")));
    }
    let means = results.map(mean_errors).unwrap_or_default();
    n_grid
        .iter()
        .map(|&n| {
            let x = n as f64;
            let exact = k_star_grid.iter().map(|&k| rate_exact(k, kbar, x)).collect::<std::result::Result<Vec<_>, _>>()?;
            let adaptive = k_star_grid
                .iter()
                .map(|&k| if k < k0 { Ok(None) } else { rate_adaptive(k, k0, gamma, kbar, x).map(Some) })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let empirical = means.iter().filter(|((_, m), _)| *m == n).map(|((method, _), &e)| (*method, e)).collect();
            Ok(RatesRow {
                n,
                exact,
                adaptive,
                higher_order: rate_higher_order(x)?,
                empirical,
            })
        })
        .collect()
}

/// Writes the table with columns `n`, `exact_k{k}`, `adaptive_k{k}`,
/// `higher_order` and one `empirical_{method}` per method seen.
pub fn write_rates<W: Write>(rows: &[RatesRow], k_star_grid: &[usize], out: W) -> Result<()> {
    let methods: Vec<Method> = {
        let mut m: Vec<Method> = rows.iter().flat_map(|r| r.empirical.keys().copied()).collect();
        m.sort();
        m.dedup();
        m
    };
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["n".to_string()];
    header.extend(k_star_grid.iter().map(|k| format!("exact_k{k}")));
    header.extend(k_star_grid.iter().map(|k| format!("adaptive_k{k}")));
    header.push("higher_order".into());
    header.extend(methods.iter().map(|m| format!("empirical_{m}")));
    writer.write_record(&header)?;
    for r in rows {
        let mut record = vec![r.n.to_string()];
        record.extend(r.exact.iter().map(|v| v.to_string()));
        record.extend(r.adaptive.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        record.push(r.higher_order.to_string());
        record.extend(methods.iter().map(|m| r.empirical.get(m).map(|x| x.to_string()).unwrap_or_default()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(input);
    Ok(reader.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?)
}

//! Parameter sweeps, crossing detection and method comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfunc::{self, ZeroScanOptions};
use crate::grwa;
use crate::model::{ModelParams, Parity};
use crate::oracle::{self, OracleOptions};
use crate::roots;

/// Separation below which two same-parity levels are flagged.
pub const SAME_PARITY_TOL: f64 = 1e-8;

pub const FLAG_OK: &str = "ok";
pub const FLAG_NEAR_DEGENERATE: &str = "near_degenerate";
pub const FLAG_MISSING: &str = "missing";
/// Prefix of flags caused by a series or cutoff that failed to converge.
pub const FLAG_NONCONVERGENCE: &str = "nonconvergence";

/// Row flag for a failed computation. Commas are replaced so the flag can
/// sit in a CSV field unquoted.
pub fn error_flag(err: &Error) -> String {
    let kind = match err {
        Error::NonConvergence { .. } | Error::CutoffExceeded { .. } => FLAG_NONCONVERGENCE,
        _ => "error",
    };
    format!("{kind}: {err}").replace(',', ";")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    GFunction,
    Oracle,
    Adiabatic,
    Grwa,
    Truncated(usize),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::GFunction => f.write_str("gfunc"),
            Method::Oracle => f.write_str("oracle"),
            Method::Adiabatic => f.write_str("adiabatic"),
            Method::Grwa => f.write_str("grwa"),
            Method::Truncated(n) => write!(f, "truncated{n}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gfunc" | "gfunction" => Ok(Method::GFunction),
            "oracle" => Ok(Method::Oracle),
            "adiabatic" => Ok(Method::Adiabatic),
            "grwa" => Ok(Method::Grwa),
            other => other
                .strip_prefix("truncated")
                .map(|n| n.trim_start_matches(':'))
                .and_then(|n| n.parse().ok())
                .map(Method::Truncated)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    G1,
    Alpha,
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g1" => Ok(SweepVariable::G1),
            "alpha" => Ok(SweepVariable::Alpha),
            other => Err(Error::InvalidParameter(format!("unknown sweep variable '{other}'"))),
        }
    }
}

/// How g2 follows the swept coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    /// g2 = r·g1
    Ratio(f64),
    FixedG2(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        roots::grid(self.start, self.stop, self.step)
    }
}

impl FromStr for Grid {
    type Err = Error;

    /// `start:stop:step`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidParameter(format!("range must be start:stop:step, got '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
        Ok(Grid {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverOptions {
    pub scan: ZeroScanOptions,
    pub oracle: OracleOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub delta: f64,
    pub coupling: CouplingMode,
    pub sweep: SweepVariable,
    pub grid: Grid,
    /// Levels per parity sector.
    pub n_levels: usize,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub options: SolverOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let Grid { start, stop, step } = self.grid;
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
        }
        if !(stop > start && start.is_finite() && stop.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid needs start < stop, got {start}:{stop}")));
        }
        if self.n_levels == 0 {
            return Err(Error::InvalidParameter("n_levels must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods requested".into()));
        }
        match self.coupling {
            CouplingMode::Ratio(r) if !(r >= 0.0 && r.is_finite()) => {
                return Err(Error::InvalidParameter(format!("ratio must be nonnegative, got {r}")));
            }
            CouplingMode::FixedG2(g2) if !(g2 >= 0.0 && g2.is_finite()) => {
                return Err(Error::InvalidParameter(format!("g2 must be nonnegative, got {g2}")));
            }
            _ => {}
        }
        let points = self.grid.points();
        for &v in &points {
            let p = self.params_at(v)?;
            if self.methods.contains(&Method::GFunction) && !(p.g1 > 0.0 && p.g2 > 0.0) {
                return Err(Error::ZeroCoupling { g1: p.g1, g2: p.g2 });
            }
        }
        Ok(())
    }

    /// Model parameters at one value of the sweep variable.
    pub fn params_at(&self, value: f64) -> Result<ModelParams> {
        match (self.sweep, self.coupling) {
            (SweepVariable::G1, CouplingMode::Ratio(r)) => ModelParams::with_ratio(self.delta, value, r),
            (SweepVariable::G1, CouplingMode::FixedG2(g2)) => ModelParams::new(self.delta, value, g2),
            (SweepVariable::Alpha, CouplingMode::Ratio(r)) => ModelParams::from_alpha(self.delta, value, r),
            (SweepVariable::Alpha, CouplingMode::FixedG2(g2)) => ModelParams::new(self.delta, 2.0 * value - g2, g2),
        }
    }

    fn sorted_methods(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub sweep_value: f64,
    pub method: Method,
    pub parity: Parity,
    pub level: usize,
    /// NaN when the method produced no value.
    #[serde(with = "nan_as_null")]
    pub energy: f64,
    pub flag: String,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub spec: SweepSpec,
    /// Ordered by sweep value, method, parity, level.
    pub rows: Vec<Row>,
}

impl SpectrumTable {
    /// Energies of one (method, parity) pair, one vector per grid point.
    pub fn curves(&self, method: Method, parity: Parity) -> Vec<(f64, Vec<f64>)> {
        let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
        for row in self.rows.iter().filter(|r| r.method == method && r.parity == parity) {
            match out.last_mut() {
                Some((v, levels)) if *v == row.sweep_value => levels.push(row.energy),
                _ => out.push((row.sweep_value, vec![row.energy])),
            }
        }
        out
    }

    pub fn methods(&self) -> Vec<Method> {
        self.spec.sorted_methods()
    }
}

/// Lowest levels of the even and odd sectors for one method, each with
/// its row flag. A failed sector has no energies and an error flag.
pub fn method_levels(params: &ModelParams, method: Method, n_levels: usize, opts: &SolverOptions) -> [(Vec<f64>, String); 2] {
    let m_max = 2 * n_levels + 4;
    let per_sector = |f: &dyn Fn(Parity) -> Result<Vec<f64>>| {
        Parity::BOTH.map(|p| match f(p) {
            Ok(e) => (e, FLAG_OK.to_string()),
            Err(err) => (Vec::new(), error_flag(&err)),
        })
    };
    match method {
        Method::Oracle => match oracle::spectrum(params, n_levels, &opts.oracle) {
            Ok(res) => Parity::BOTH.map(|p| (res.sector(p), FLAG_OK.to_string())),
            Err(err) => Parity::BOTH.map(|_| (Vec::new(), error_flag(&err))),
        },
        Method::GFunction => per_sector(&|p| {
            let scan = gfunc::lowest_regular_levels(params, p, n_levels, &opts.scan)?;
            let lambda_plus = params.derive().lambda_plus;
            let x_top = scan.energies.last().map_or(gfunc::spectral_lower_bound(params), |e| e + lambda_plus);
            let mut energies = scan.energies;
            // levels pinned to a pole are shared by both sectors
            let reach = x_top.max(gfunc::spectral_lower_bound(params) + n_levels as f64 + 1.0);
            for (_, e) in gfunc::exceptional_levels(params, reach, gfunc::EXCEPTIONAL_TOL)? {
                energies.push(e);
            }
            energies.sort_by(f64::total_cmp);
            energies.truncate(n_levels);
            Ok(energies)
        }),
        Method::Adiabatic => {
            let levels = grwa::adiabatic_levels(params, m_max);
            Parity::BOTH.map(|p| (grwa::sector_energies(&levels, p), FLAG_OK.to_string()))
        }
        Method::Grwa => {
            let spec = grwa::grwa_levels(params, m_max);
            Parity::BOTH.map(|p| {
                let bad: Vec<String> = spec
                    .complex_blocks
                    .iter()
                    .filter(|(m, _)| grwa::grwa_block_parity(*m) == p)
                    .map(|(m, _)| m.to_string())
                    .collect();
                let flag = if bad.is_empty() {
                    FLAG_OK.to_string()
                } else {
                    format!("complex_block {}", bad.join(" "))
                };
                (spec.sector(p), flag)
            })
        }
        Method::Truncated(n_tr) => per_sector(&|p| {
            let levels = grwa::truncated_solve(params, p, n_tr)?;
            Ok(levels.into_iter().map(|l| l.energy).collect())
        }),
    }
}

fn point_rows(spec: &SweepSpec, value: f64, method: Method) -> Vec<Row> {
    let n = spec.n_levels;
    let sectors = match spec.params_at(value) {
        Ok(p) => method_levels(&p, method, n, &spec.options),
        Err(err) => Parity::BOTH.map(|_| (Vec::new(), error_flag(&err))),
    };
    let mut rows = Vec::with_capacity(2 * n);
    for (parity, (mut energies, flag)) in Parity::BOTH.into_iter().zip(sectors) {
        energies.sort_by(f64::total_cmp);
        for level in 0..n {
            let energy = energies.get(level).copied().unwrap_or(f64::NAN);
            let mut row_flag = if energy.is_nan() && flag == FLAG_OK {
                FLAG_MISSING.to_string()
            } else {
                flag.clone()
            };
            let close = |k: Option<usize>| {
                k.and_then(|k| energies.get(k))
                    .is_some_and(|e| (e - energy).abs() < SAME_PARITY_TOL)
            };
            if row_flag == FLAG_OK && (close(level.checked_sub(1)) || close(Some(level + 1))) {
                row_flag = FLAG_NEAR_DEGENERATE.to_string();
            }
            rows.push(Row {
                sweep_value: value,
                method,
                parity,
                level,
                energy,
                flag: row_flag,
            });
        }
    }
    rows
}

/// Runs every requested method at every grid point. Failures at single
/// points become row flags; only an invalid spec is an error.
pub fn run_sweep(spec: &SweepSpec) -> Result<SpectrumTable> {
    spec.validate()?;
    let methods = spec.sorted_methods();
    let jobs: Vec<(f64, Method)> = spec
        .grid
        .points()
        .into_iter()
        .flat_map(|v| methods.iter().map(move |&m| (v, m)))
        .collect();
    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(v, m)| point_rows(spec, v, m))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(SpectrumTable {
        spec: spec.clone(),
        rows,
    })
}

/// Grid points where a level curve jumps by more than ten times the larger
/// of its neighbouring secants, as (method, parity, level, sweep value).
pub fn continuity_violations(table: &SpectrumTable) -> Vec<(Method, Parity, usize, f64)> {
    let mut out = Vec::new();
    for method in table.methods() {
        for parity in Parity::BOTH {
            let curves = table.curves(method, parity);
            for level in 0..table.spec.n_levels {
                let e: Vec<f64> = curves.iter().map(|(_, l)| l[level]).collect();
                let d: Vec<f64> = e.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
                for k in 1..d.len().saturating_sub(1) {
                    if !(d[k - 1].is_finite() && d[k].is_finite() && d[k + 1].is_finite()) {
                        continue;
                    }
                    let local = d[k - 1].max(d[k + 1]).max(1e-3 * table.spec.grid.step);
                    if d[k] > 10.0 * local {
                        out.push((method, parity, level, curves[k].0));
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    /// Nearest integer to x = E + λ₊.
    pub n: usize,
    /// Sweep variable at the crossing.
    pub coupling: f64,
    pub g1: f64,
    pub g2: f64,
    pub energy: f64,
    /// Level indices of the even and odd curves that cross.
    pub levels: (usize, usize),
    /// |x − n|; above the match tolerance the crossing is unmatched.
    pub x_offset: f64,
    /// |E_even − E_odd| at the refined coupling.
    pub gap: f64,
    /// T_n at the refined coupling, NaN when unmatched.
    pub condition_residual: f64,
    pub matched: bool,
    pub verified_degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingOptions {
    /// Relative bisection tolerance on the sweep variable.
    pub bisect_tol: f64,
    /// Largest |x − n| accepted as a match.
    pub match_tol: f64,
    pub degeneracy_tol: f64,
    pub residual_tol: f64,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        Self {
            bisect_tol: 1e-14,
            match_tol: 1e-3,
            degeneracy_tol: 1e-8,
            residual_tol: 1e-8,
        }
    }
}

/// Opposite-parity crossings seen in the curves of `method`, refined with
/// the oracle at a fixed cutoff and checked against the exceptional
/// condition. Unmatched crossings are kept with `matched = false`.
pub fn detect_crossings(table: &SpectrumTable, method: Method, opts: &CrossingOptions) -> Result<Vec<CrossingRecord>> {
    let even = table.curves(method, Parity::Even);
    let odd = table.curves(method, Parity::Odd);
    if even.is_empty() || odd.is_empty() || even.len() != odd.len() {
        return Err(Error::InvalidParameter(format!(
            "table has no complete {method} rows for both parities"
        )));
    }
    let n_levels = table.spec.n_levels;
    let mut brackets = Vec::new();
    for k in 0..even.len() - 1 {
        let (v0, v1) = (even[k].0, even[k + 1].0);
        for i in 0..n_levels {
            for j in 0..n_levels {
                let d0 = even[k].1[i] - odd[k].1[j];
                let d1 = even[k + 1].1[i] - odd[k + 1].1[j];
                if d0.is_finite() && d1.is_finite() && (d0 < 0.0) != (d1 < 0.0) {
                    brackets.push((v0, v1, i, j));
                }
            }
        }
    }

    let mut records: Vec<CrossingRecord> = brackets
        .par_iter()
        .map(|&(lo, hi, i, j)| refine_crossing(&table.spec, lo, hi, i, j, opts))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.coupling.total_cmp(&b.coupling).then(a.n.cmp(&b.n)));
    records.dedup_by(|a, b| a.n == b.n && (a.coupling - b.coupling).abs() < 1e-9);
    Ok(records)
}

fn refine_crossing(spec: &SweepSpec, lo: f64, hi: f64, i: usize, j: usize, opts: &CrossingOptions) -> Result<CrossingRecord> {
    let need = i.max(j) + 1;
    let converged = oracle::spectrum(&spec.params_at(hi)?, need, &spec.options.oracle)?;
    let cutoff = converged.fock_cutoff;
    let levels_at = |v: f64| -> Result<(f64, f64)> {
        let p = spec.params_at(v)?;
        let e = oracle::sector_eigenvalues(&p, cutoff, Parity::Even)?;
        let o = oracle::sector_eigenvalues(&p, cutoff, Parity::Odd)?;
        Ok((e[i], o[j]))
    };
    let diff = |v: f64| levels_at(v).map(|(e, o)| e - o);

    let (d_lo, d_hi) = (diff(lo)?, diff(hi)?);
    let coupling = if (d_lo < 0.0) != (d_hi < 0.0) {
        roots::bisect(diff, lo, hi, opts.bisect_tol * hi.abs().max(1e-300), 0.0)?.0
    } else {
        // the oracle does not see this bracket; report it at the midpoint
        0.5 * (lo + hi)
    };
    let (e_even, e_odd) = levels_at(coupling)?;
    let p = spec.params_at(coupling)?;
    let lambda_plus = p.derive().lambda_plus;
    let energy = 0.5 * (e_even + e_odd);
    let x = energy + lambda_plus;
    let n_real = x.round();
    let x_offset = (x - n_real).abs();
    let gap = (e_even - e_odd).abs();
    let matched = n_real >= 0.0 && x_offset <= opts.match_tol;
    let n = n_real.max(0.0) as usize;
    let condition_residual = if matched && p.g1 > 0.0 && p.g2 > 0.0 {
        gfunc::exceptional_condition(&p, n)?
    } else {
        f64::NAN
    };
    let verified_degenerate = matched
        && gap < opts.degeneracy_tol
        && (energy - (n as f64 - lambda_plus)).abs() < opts.degeneracy_tol
        && condition_residual.abs() < opts.residual_tol;
    Ok(CrossingRecord {
        n,
        coupling,
        g1: p.g1,
        g2: p.g2,
        energy,
        levels: (i, j),
        x_offset,
        gap,
        condition_residual,
        matched,
        verified_degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub method: Method,
    pub parity: Parity,
    pub level: usize,
    pub max_abs: f64,
    pub rms: f64,
    /// Grid points where both values were finite.
    pub samples: usize,
}

/// Deviation of every method from `reference`, per (method, parity, level).
pub fn compare_methods(table: &SpectrumTable, reference: Method) -> Result<Vec<ErrorSummary>> {
    let mut refs: BTreeMap<(u64, Parity, usize), f64> = BTreeMap::new();
    for row in table.rows.iter().filter(|r| r.method == reference) {
        refs.insert((row.sweep_value.to_bits(), row.parity, row.level), row.energy);
    }
    if refs.is_empty() {
        return Err(Error::InvalidParameter(format!("reference method {reference} not in table")));
    }
    let mut acc: BTreeMap<(Method, Parity, usize), (f64, f64, usize)> = BTreeMap::new();
    for row in &table.rows {
        let entry = acc.entry((row.method, row.parity, row.level)).or_insert((0.0, 0.0, 0));
        if let Some(&r) = refs.get(&(row.sweep_value.to_bits(), row.parity, row.level)) {
            let d = (row.energy - r).abs();
            if d.is_finite() {
                entry.0 = entry.0.max(d);
                entry.1 += d * d;
                entry.2 += 1;
            }
        }
    }
    Ok(acc
        .into_iter()
        .map(|((method, parity, level), (max_abs, sq, samples))| ErrorSummary {
            method,
            parity,
            level,
            max_abs,
            rms: if samples > 0 { (sq / samples as f64).sqrt() } else { f64::NAN },
            samples,
        })
        .collect())
}

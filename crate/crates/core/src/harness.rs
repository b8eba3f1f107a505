//! Monte-Carlo experiment engine: sweeps two-block SBM parameter grids,
//! runs the selected tests on freshly sampled populations, and tabulates
//! rejection rates. Fully deterministic for a given seed regardless of the
//! worker-thread count.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphPopulation;
use crate::linalg::LinalgConfig;
use crate::models::{sample_ier, sbm_population_adjacency, scale_density, SbmSpec, Seed};
use crate::multi::{
    test_asymp_chi2, test_asymp_normal, test_boot, BootStatistic, BootstrapConfig,
    MultiSampleInput,
};
use crate::single::{test_asymp_tw, test_boot_single, SingleBootStatistic, TwOptions};

/// Every test the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    AsympNormal,
    AsympTw,
    AsympChi2,
    BootSpectral,
    BootFrobenius,
    BootAse,
    BootEpa,
}

impl TestKind {
    pub const ALL: [TestKind; 7] = [
        TestKind::AsympNormal,
        TestKind::AsympTw,
        TestKind::AsympChi2,
        TestKind::BootSpectral,
        TestKind::BootFrobenius,
        TestKind::BootAse,
        TestKind::BootEpa,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TestKind::AsympNormal => "asymp-normal",
            TestKind::AsympTw => "asymp-tw",
            TestKind::AsympChi2 => "asymp-chi2",
            TestKind::BootSpectral => "boot-spectral",
            TestKind::BootFrobenius => "boot-frobenius",
            TestKind::BootAse => "boot-ase",
            TestKind::BootEpa => "boot-epa",
        }
    }

    /// True for tests defined on a single pair of graphs; they consume the
    /// first graph of each population at any m.
    pub fn single_sample(&self) -> bool {
        matches!(self, TestKind::AsympTw | TestKind::BootAse | TestKind::BootEpa)
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown test {s:?}")))
    }
}

/// Two-block SBM sweep description. The null uses within-probability `p`,
/// the alternative shifts it to `p + eps`; both use between-probability `q`
/// and are density-scaled by `rho`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub eps_values: Vec<f64>,
    pub rho_values: Vec<f64>,
    pub r_values: Vec<usize>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_b")]
    pub bootstrap_b: usize,
    pub tests: Vec<TestKind>,
    pub seed: Seed,
}

fn default_p() -> f64 {
    0.1
}

fn default_q() -> f64 {
    0.05
}

fn default_trials() -> usize {
    1000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_b() -> usize {
    200
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.tests.is_empty() {
            return Err(Error::InvalidParameter("no tests selected".into()));
        }
        if self.n_values.is_empty()
            || self.m_values.is_empty()
            || self.eps_values.is_empty()
            || self.rho_values.is_empty()
            || self.r_values.is_empty()
        {
            return Err(Error::InvalidParameter("every grid axis needs at least one value".into()));
        }
        crate::multi::check_alpha(self.alpha)?;
        if self.bootstrap_b == 0 {
            return Err(Error::InvalidParameter("bootstrap count must be >= 1".into()));
        }
        for &n in &self.n_values {
            if n < 4 {
                return Err(Error::InvalidParameter(format!("n = {n} too small")));
            }
        }
        for &m in &self.m_values {
            if m == 0 {
                return Err(Error::InvalidParameter("m must be >= 1".into()));
            }
        }
        for &r in &self.r_values {
            if r == 0 {
                return Err(Error::InvalidParameter("r must be >= 1".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.p) || !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidParameter("p and q must lie in [0,1]".into()));
        }
        for &eps in &self.eps_values {
            if eps < 0.0 || self.p + eps > 1.0 {
                return Err(Error::InvalidParameter(format!("eps = {eps} leaves p + eps outside [0,1]")));
            }
        }
        for &rho in &self.rho_values {
            if !(rho > 0.0) {
                return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
            }
        }
        Ok(())
    }

    fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &n in &self.n_values {
            for &m in &self.m_values {
                for &eps in &self.eps_values {
                    for &rho in &self.rho_values {
                        for &r in &self.r_values {
                            cells.push(Cell { n, m, eps, rho, r });
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    n: usize,
    m: usize,
    eps: f64,
    rho: f64,
    r: usize,
}

/// One (test, grid cell, hypothesis) tabulation. `rate` is absent for
/// skipped cells; wall time is kept out of the serialized forms so outputs
/// stay byte-identical across worker-thread counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerRow {
    pub test: String,
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub rho: f64,
    pub r: usize,
    /// "H0" or "H1".
    pub hypothesis: String,
    pub trials: usize,
    pub rejections: usize,
    pub rate: Option<f64>,
    pub skipped_reason: Option<String>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("power table serializes")
    }

    /// CSV schema: test,n,m,eps,rho,r,hypothesis,trials,rejections,rate,skipped_reason.
    /// Numeric fields use shortest round-trip formatting, so parsed rates are
    /// bit-exact.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "test", "n", "m", "eps", "rho", "r", "hypothesis", "trials", "rejections", "rate",
            "skipped_reason",
        ])
        .expect("csv header");
        for row in &self.rows {
            w.write_record([
                row.test.clone(),
                row.n.to_string(),
                row.m.to_string(),
                row.eps.to_string(),
                row.rho.to_string(),
                row.r.to_string(),
                row.hypothesis.clone(),
                row.trials.to_string(),
                row.rejections.to_string(),
                row.rate.map(|r| r.to_string()).unwrap_or_default(),
                row.skipped_reason.clone().unwrap_or_default(),
            ])
            .expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf-8")
    }

    pub fn emit_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// Lookup helper for a single rate.
    pub fn rate(&self, test: TestKind, n: usize, m: usize, hypothesis: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.test == test.name() && r.n == n && r.m == m && r.hypothesis == hypothesis)
            .and_then(|r| r.rate)
    }
}

/// Reason a test cannot run on a cell, decided before any trial is sampled.
fn skip_reason(test: TestKind, cell: &Cell) -> Option<String> {
    if !test.single_sample() && cell.m < 2 {
        return Some("multi-sample test requires m >= 2".into());
    }
    if test == TestKind::AsympTw && cell.n < 20 {
        return Some("asymp-tw requires n >= 20".into());
    }
    None
}

/// Run the full sweep. Each (cell, hypothesis, trial) gets its own derived
/// RNG stream, and trials reduce by indexed summation, so the table is
/// identical for any worker count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<PowerTable> {
    spec.validate()?;
    let cells = spec.cells();
    let mut rows = Vec::new();
    for (cell_idx, cell) in cells.iter().enumerate() {
        for (hyp_idx, hypothesis) in ["H0", "H1"].iter().enumerate() {
            let eps_eff = if hyp_idx == 0 { 0.0 } else { cell.eps };
            let runnable: Vec<TestKind> = spec
                .tests
                .iter()
                .copied()
                .filter(|t| skip_reason(*t, cell).is_none())
                .collect();
            let start = Instant::now();
            let counts: Vec<usize> = if runnable.is_empty() {
                Vec::new()
            } else {
                (0..spec.trials as u64)
                    .into_par_iter()
                    .map(|trial| {
                        run_trial(
                            spec,
                            cell,
                            eps_eff,
                            &runnable,
                            spec.seed.derive(&[cell_idx as u64, hyp_idx as u64, trial]),
                        )
                    })
                    .reduce(
                        || vec![0usize; runnable.len()],
                        |mut a, b| {
                            for (x, y) in a.iter_mut().zip(&b) {
                                *x += y;
                            }
                            a
                        },
                    )
            };
            let wall = start.elapsed().as_secs_f64();
            for &test in &spec.tests {
                let skipped = skip_reason(test, cell);
                let rejections = match &skipped {
                    Some(_) => 0,
                    None => {
                        let k = runnable.iter().position(|t| *t == test).unwrap();
                        counts[k]
                    }
                };
                rows.push(PowerRow {
                    test: test.name().to_string(),
                    n: cell.n,
                    m: cell.m,
                    eps: cell.eps,
                    rho: cell.rho,
                    r: cell.r,
                    hypothesis: hypothesis.to_string(),
                    trials: spec.trials,
                    rejections,
                    rate: if skipped.is_none() {
                        Some(rejections as f64 / spec.trials as f64)
                    } else {
                        None
                    },
                    skipped_reason: skipped,
                    wall_time_secs: wall,
                });
            }
        }
    }
    Ok(PowerTable { rows })
}

/// One Monte-Carlo trial: sample both populations, run each runnable test,
/// return 0/1 rejection indicators in `runnable` order.
fn run_trial(
    spec: &ExperimentSpec,
    cell: &Cell,
    eps_eff: f64,
    runnable: &[TestKind],
    seed: Seed,
) -> Vec<usize> {
    let null_spec = SbmSpec::two_block(cell.n, spec.p, spec.q).expect("validated grid");
    let alt_spec = SbmSpec::two_block(cell.n, spec.p + eps_eff, spec.q).expect("validated grid");
    let (pa_g, _) = scale_density(&sbm_population_adjacency(&null_spec), cell.rho)
        .expect("validated rho");
    let (pa_h, _) = scale_density(&sbm_population_adjacency(&alt_spec), cell.rho)
        .expect("validated rho");
    let g = GraphPopulation::new(
        (0..cell.m as u64).map(|k| sample_ier(&pa_g, seed.derive(&[0, k]))).collect(),
    )
    .expect("nonempty population");
    let h = GraphPopulation::new(
        (0..cell.m as u64).map(|k| sample_ier(&pa_h, seed.derive(&[1, k]))).collect(),
    )
    .expect("nonempty population");

    // adjacency matrices are sparse at these densities, so the bootstraps
    // should hit the Lanczos path well below the default dense crossover
    let linalg = LinalgConfig { dense_crossover: 64, ..LinalgConfig::default() };
    runnable
        .iter()
        .enumerate()
        .map(|(t_idx, &test)| {
            let boot = BootstrapConfig {
                b: spec.bootstrap_b,
                seed: seed.derive(&[2, t_idx as u64]),
            };
            let outcome = match test {
                TestKind::AsympNormal => {
                    test_asymp_normal(&MultiSampleInput::new(&g, &h).unwrap(), spec.alpha)
                }
                TestKind::AsympChi2 => {
                    test_asymp_chi2(&MultiSampleInput::new(&g, &h).unwrap(), spec.alpha)
                }
                TestKind::BootSpectral => test_boot(
                    &MultiSampleInput::new(&g, &h).unwrap(),
                    BootStatistic::Spectral,
                    spec.alpha,
                    &boot,
                ),
                TestKind::BootFrobenius => test_boot(
                    &MultiSampleInput::new(&g, &h).unwrap(),
                    BootStatistic::Frobenius,
                    spec.alpha,
                    &boot,
                ),
                TestKind::AsympTw => {
                    let opts = TwOptions::new(cell.r, seed.derive(&[3]));
                    test_asymp_tw(&g.graphs()[0], &h.graphs()[0], spec.alpha, None, &opts)
                }
                TestKind::BootAse => test_boot_single(
                    &g.graphs()[0],
                    &h.graphs()[0],
                    SingleBootStatistic::Ase,
                    cell.r,
                    spec.alpha,
                    &boot,
                    &linalg,
                ),
                TestKind::BootEpa => test_boot_single(
                    &g.graphs()[0],
                    &h.graphs()[0],
                    SingleBootStatistic::Epa,
                    cell.r,
                    spec.alpha,
                    &boot,
                    &linalg,
                ),
            };
            outcome.map(|o| o.reject as usize).expect("runnable test succeeds on valid cell")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(tests: Vec<TestKind>, trials: usize) -> ExperimentSpec {
        ExperimentSpec {
            n_values: vec![30],
            m_values: vec![2],
            eps_values: vec![0.2],
            rho_values: vec![1.0],
            r_values: vec![2],
            p: 0.3,
            q: 0.1,
            trials,
            alpha: 0.05,
            bootstrap_b: 20,
            tests,
            seed: Seed(9),
        }
    }

    #[test]
    fn single_trial_rates_are_zero_or_one() {
        let table = run_experiment(&tiny_spec(vec![TestKind::AsympNormal], 1)).unwrap();
        for row in &table.rows {
            let rate = row.rate.unwrap();
            assert!(rate == 0.0 || rate == 1.0);
        }
    }

    #[test]
    fn m1_skips_multi_sample_tests() {
        let mut spec = tiny_spec(vec![TestKind::AsympNormal, TestKind::AsympTw], 2);
        spec.m_values = vec![1];
        let table = run_experiment(&spec).unwrap();
        let normal = table.rows.iter().find(|r| r.test == "asymp-normal").unwrap();
        assert!(normal.skipped_reason.is_some());
        assert!(normal.rate.is_none());
        let tw = table.rows.iter().find(|r| r.test == "asymp-tw").unwrap();
        assert!(tw.skipped_reason.is_none());
        assert!(tw.rate.is_some());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let spec = tiny_spec(vec![TestKind::AsympNormal, TestKind::BootFrobenius], 8);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_experiment(&spec).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_experiment(&spec).unwrap());
        assert_eq!(one.to_csv(), four.to_csv());
        assert_eq!(one.to_json(), four.to_json());
    }

    #[test]
    fn csv_round_trip_preserves_rates() {
        let spec = tiny_spec(vec![TestKind::AsympNormal], 7);
        let table = run_experiment(&spec).unwrap();
        let csv_text = table.to_csv();
        let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
        let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(
            headers,
            [
                "test", "n", "m", "eps", "rho", "r", "hypothesis", "trials", "rejections",
                "rate", "skipped_reason"
            ]
        );
        let rate_col = headers.iter().position(|h| h == "rate").unwrap();
        for (rec, row) in reader.records().zip(&table.rows) {
            let rec = rec.unwrap();
            let parsed: f64 = rec[rate_col].parse().unwrap();
            assert_eq!(parsed, row.rate.unwrap());
        }
    }

    #[test]
    fn empty_selection_and_bad_grids_rejected() {
        let mut spec = tiny_spec(vec![], 1);
        assert!(run_experiment(&spec).is_err());
        spec.tests = vec![TestKind::AsympNormal];
        spec.trials = 0;
        assert!(spec.validate().is_err());
        spec.trials = 1;
        spec.eps_values = vec![0.9]; // p + eps > 1
        assert!(spec.validate().is_err());
    }

    #[test]
    fn null_and_alternative_rows_both_present() {
        let table = run_experiment(&tiny_spec(vec![TestKind::AsympChi2], 3)).unwrap();
        let hyps: Vec<&str> = table.rows.iter().map(|r| r.hypothesis.as_str()).collect();
        assert_eq!(hyps, ["H0", "H1"]);
    }

    #[test]
    fn test_kind_round_trip() {
        for t in TestKind::ALL {
            assert_eq!(TestKind::from_str(t.name()).unwrap(), t);
        }
        assert!(TestKind::from_str("nope").is_err());
    }
}

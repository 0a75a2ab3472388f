//! Dispatch from a config to the core estimators, and the mergeable state
//! each experiment leaves behind.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use fpp_core::deviations::{
    deviation_profile, estimate_mu, estimate_mu_fan, hre_partial_sum, increment_trend, lp_error,
    point_to_shape_replicas, radial_sum, tail_probabilities, y_record_scan, DeviationProfile, LpReport, MuEntry,
    MuEstimate, MuExactness, PartialSums, ShapeSummary, TailSampling, TailSide, TailSummary,
};
use fpp_core::regen::{estimate_regen_constants, scan_regenerations, tube_constant_sweep, RegenerationTrace};
use fpp_core::shells::{shell_travel_time, Shell, ShellBuilder};
use fpp_core::stats::{linear_fit, mean_ci, proportion_difference, wilson, MeanCi, Moments};
use fpp_core::weights::{quantile_tbar, split_seed};
use fpp_core::{Field, Fixed, LatticePoint, Length, Weight, WeightField, Window};

use crate::checks::{check_shell, separated_pair};
use crate::config::{Experiment, ExperimentConfig, MuReference};
use crate::LabError;

const SHELL_STREAM: u64 = 0x7368_656c;
const REGEN_STREAM: u64 = 0x7265_6765;
const YREC_STREAM: u64 = 0x7972_6563;

/// Seed of replica k of a harness-driven experiment.
pub fn replica_seed(master: u64, k: u64, stream: u64) -> u64 {
    split_seed(master, k, stream)
}

/// Checked / held counter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub checked: u64,
    pub held: u64,
}

impl Count {
    fn record(&mut self, ok: bool) {
        self.checked += 1;
        self.held += ok as u64;
    }

    fn merge(&mut self, o: &Count) {
        self.checked += o.checked;
        self.held += o.held;
    }

    pub fn all_hold(&self) -> bool {
        self.checked == self.held
    }
}

fn add_histograms(a: &mut Vec<u64>, b: &[u64]) {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShellState {
    pub delta: f64,
    pub tbar: f64,
    pub attempted: u64,
    pub complete: u64,
    /// Centers without a boundary-reaching white witness in the window.
    pub failed: u64,
    pub connected: Count,
    pub separates: Count,
    pub infinite_white: Count,
    /// Property 4, over pairs of complete shells with disjoint Δ.
    pub pair_separation: Count,
    pub comparison_lower: Count,
    pub comparison_upper: Count,
    pub comparison_exact: u64,
    /// Histogram of diam(S_z) over complete shells.
    pub s_diameter: Vec<u64>,
    /// Histogram of diam(Δ_z) over complete shells.
    pub delta_diameter: Vec<u64>,
}

impl ShellState {
    fn merge(&mut self, o: &ShellState) -> Result<(), LabError> {
        if self.delta != o.delta || self.tbar != o.tbar {
            return Err(mismatch("shell thresholds differ"));
        }
        self.attempted += o.attempted;
        self.complete += o.complete;
        self.failed += o.failed;
        self.connected.merge(&o.connected);
        self.separates.merge(&o.separates);
        self.infinite_white.merge(&o.infinite_white);
        self.pair_separation.merge(&o.pair_separation);
        self.comparison_lower.merge(&o.comparison_lower);
        self.comparison_upper.merge(&o.comparison_upper);
        self.comparison_exact += o.comparison_exact;
        add_histograms(&mut self.s_diameter, &o.s_diameter);
        add_histograms(&mut self.delta_diameter, &o.delta_diameter);
        Ok(())
    }

    /// (k, #{diam(S_z) > k}) for k in `range`.
    pub fn survival(&self, range: [i64; 2]) -> Vec<(i64, u64)> {
        (range[0]..=range[1])
            .map(|k| {
                let above: u64 = self.s_diameter.iter().skip((k + 1).max(0) as usize).sum();
                (k, above)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    /// Decided in exact arithmetic.
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub master_seed: u64,
    pub replica: u64,
    pub trace: RegenerationTrace<f64>,
    pub sandwich: Option<SandwichRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegenState {
    pub tbar: f64,
    pub traces: Vec<TraceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeRow {
    pub master_seed: u64,
    pub replica: u64,
    /// T_C(0, nz)/n per radius.
    pub restricted: Vec<f64>,
    /// T(0, nz)/n.
    pub reference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeState {
    pub radii: Vec<f64>,
    pub n: u64,
    pub reference_exact: u64,
    pub rows: Vec<TubeRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YRow {
    pub master_seed: u64,
    pub replica: u64,
    pub sup: Option<i64>,
    pub records: usize,
    pub checked: usize,
    pub held: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YState {
    pub beta: f64,
    pub eps: f64,
    pub radius: i64,
    pub rows: Vec<YRow>,
}

/// The poolable outcome of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum State {
    Mu(MuEntry),
    Tails(TailSummary),
    Shells(ShellState),
    Regen(RegenState),
    DeviationSets(DeviationProfile),
    HreSum(PartialSums),
    RadialSum(PartialSums),
    Lp(LpReport),
    PointToShape(ShapeSummary),
    TubeSweep(TubeState),
    YRecords(YState),
}

/// One line of a JSON-lines record file, with its sort key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RecordLine {
    pub key: (u64, u64, u64),
    pub json: String,
}

#[derive(Serialize)]
struct ShellRecord<'a> {
    master_seed: u64,
    replica: u64,
    index: u64,
    #[serde(flatten)]
    shell: &'a Shell,
}

pub struct Outcome {
    pub state: State,
    /// Shell records; regeneration traces are rendered from the state.
    pub records: Vec<RecordLine>,
}

fn mismatch(msg: &str) -> LabError {
    LabError::ConfigMismatch(msg.into())
}

fn core_err<E: Into<LabError>>(e: E) -> LabError {
    e.into()
}

pub fn mu_reference(cfg: &ExperimentConfig, m: &MuReference) -> Result<MuEstimate, LabError> {
    estimate_mu_fan(&cfg.distribution, cfg.dimension, m.fan_norm, m.n, m.replicas, m.seed, m.statistic).map_err(core_err)
}

fn effective_eps(eps: f64, relative: bool, mu: &MuEstimate) -> f64 {
    if relative {
        eps * mu.mu_upper
    } else {
        eps
    }
}

/// Run the experiment of `cfg` on the current rayon pool.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, LabError> {
    cfg.validate()?;
    let spec = &cfg.distribution;
    let (seed, reps, dim) = (cfg.master_seed, cfg.replicas, cfg.dimension);
    let plain = |state: State| Ok(Outcome { state, records: Vec::new() });
    match &cfg.experiment {
        Experiment::Mu { z, n_grid, statistic } => {
            let z = cfg.point(z)?;
            plain(State::Mu(estimate_mu(spec, &z, n_grid, reps, seed, *statistic).map_err(core_err)?))
        }
        Experiment::Tails {
            side,
            z,
            eps,
            eps_relative,
            x_grid,
            sampling,
            mu,
        } => {
            let mu = mu_reference(cfg, mu)?;
            let eps = effective_eps(*eps, *eps_relative, &mu);
            let z = cfg.point(z)?;
            let t = tail_probabilities(spec, *side, &z, eps, x_grid, reps, seed, &mu, sampling.clone()).map_err(core_err)?;
            plain(State::Tails(t))
        }
        Experiment::Shells {
            delta,
            spacing,
            centers_radius,
            pairs,
            ..
        } => run_shells(cfg, *delta, *spacing, centers_radius.unwrap_or(cfg.window_radius * 4 / 5), *pairs),
        Experiment::Regen {
            z, r, tbar_quantile, m_max,
        } => {
            let z = cfg.point(z)?;
            let tbar = quantile_tbar(spec, 1.0 - tbar_quantile).map_err(core_err)?;
            plain(State::Regen(run_regen(cfg, &z, Length::from_f64(*r), tbar, *m_max)?))
        }
        Experiment::DeviationSets {
            eps,
            eps_relative,
            radii,
            mu,
        } => {
            let mu = mu_reference(cfg, mu)?;
            let eps = effective_eps(*eps, *eps_relative, &mu);
            let p = deviation_profile(spec, dim, eps, &mu, cfg.window_radius, radii, reps, seed).map_err(core_err)?;
            plain(State::DeviationSets(p))
        }
        Experiment::HreSum {
            alpha,
            eps,
            eps_relative,
            radii,
            mu,
        } => {
            let mu = mu_reference(cfg, mu)?;
            let eps = effective_eps(*eps, *eps_relative, &mu);
            plain(State::HreSum(hre_partial_sum(spec, dim, *alpha, eps, radii, reps, seed, &mu).map_err(core_err)?))
        }
        Experiment::RadialSum {
            z,
            alpha,
            eps,
            eps_relative,
            checkpoints,
            mu,
        } => {
            let mu = mu_reference(cfg, mu)?;
            let eps = effective_eps(*eps, *eps_relative, &mu);
            let z = cfg.point(z)?;
            plain(State::RadialSum(
                radial_sum(spec, &z, *alpha, eps, checkpoints, reps, seed, &mu).map_err(core_err)?,
            ))
        }
        Experiment::Lp { p, z_grid, mu } => {
            let mu = mu_reference(cfg, mu)?;
            let zs = z_grid.iter().map(|z| cfg.point(z)).collect::<Result<Vec<_>, _>>()?;
            plain(State::Lp(lp_error(spec, *p, &zs, reps, seed, &mu).map_err(core_err)?))
        }
        Experiment::PointToShape { n_grid, mu } => {
            let mu = mu_reference(cfg, mu)?;
            plain(State::PointToShape(
                point_to_shape_replicas(spec, dim, n_grid, &mu, reps, seed).map_err(core_err)?,
            ))
        }
        Experiment::TubeSweep { z, radii, n } => {
            let z = cfg.point(z)?;
            let lengths: Vec<Length> = radii.iter().map(|&r| Length::from_f64(r)).collect();
            let sweep = tube_constant_sweep::<f64>(spec, &z, &lengths, *n, reps, seed).map_err(core_err)?;
            let rows = sweep
                .per_replica
                .iter()
                .zip(&sweep.per_replica_reference)
                .enumerate()
                .map(|(k, (restricted, &reference))| TubeRow {
                    master_seed: seed,
                    replica: k as u64,
                    restricted: restricted.clone(),
                    reference,
                })
                .collect();
            plain(State::TubeSweep(TubeState {
                radii: lengths.iter().map(Length::to_f64).collect(),
                n: *n,
                reference_exact: (sweep.reference_exact * reps as f64).round() as u64,
                rows,
            }))
        }
        Experiment::YRecords {
            beta,
            eps,
            eps_relative,
            mu,
        } => {
            let mu = mu_reference(cfg, mu)?;
            let eps = effective_eps(*eps, *eps_relative, &mu);
            plain(State::YRecords(run_y_records(cfg, *beta, eps, &mu)?))
        }
    }
}

fn run_shells(cfg: &ExperimentConfig, delta: f64, spacing: i32, centers_radius: i32, pairs: usize) -> Result<Outcome, LabError> {
    let spec = cfg.distribution;
    let origin = LatticePoint::origin(2);
    let window = Window::centered(&origin, cfg.window_radius);
    let m = centers_radius / spacing;
    let centers: Vec<LatticePoint> = (-m..=m)
        .flat_map(|i| (-m..=m).map(move |j| LatticePoint::new(&[i * spacing, j * spacing])))
        .collect();
    let tbar = quantile_tbar(&spec, delta).map_err(core_err)?;
    let per: Vec<Result<(ShellState, Vec<RecordLine>), LabError>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|k| {
            let field = WeightField::<Fixed>::new(replica_seed(cfg.master_seed, k, SHELL_STREAM), spec, 2);
            let builder = ShellBuilder::new(&field, tbar, window);
            let mut st = ShellState {
                delta,
                tbar,
                ..Default::default()
            };
            let mut records = Vec::new();
            let mut checked = Vec::new();
            for (i, c) in centers.iter().enumerate() {
                st.attempted += 1;
                let shell = match builder.build(c) {
                    Ok(s) => s,
                    Err(fpp_core::ShellError::NoWhiteWitness) => {
                        st.failed += 1;
                        continue;
                    }
                    Err(e) => return Err(core_err(e)),
                };
                let record = ShellRecord {
                    master_seed: cfg.master_seed,
                    replica: k,
                    index: i as u64,
                    shell: &shell,
                };
                records.push(RecordLine {
                    key: (cfg.master_seed, k, i as u64),
                    json: serde_json::to_string(&record).map_err(|e| LabError::Run(e.to_string()))?,
                });
                if !shell.is_complete() {
                    continue;
                }
                st.complete += 1;
                add_histograms(&mut st.s_diameter, &one_hot(shell.s_diameter));
                add_histograms(&mut st.delta_diameter, &one_hot(shell.diameter));
                let c = check_shell(&builder, shell);
                st.connected.record(c.checks.connected);
                st.separates.record(c.checks.separates);
                st.infinite_white.record(c.checks.infinite_white);
                checked.push(c);
            }
            for (i, a) in checked.iter().enumerate() {
                for b in &checked[i + 1..] {
                    if let Some(ok) = separated_pair(a, b) {
                        st.pair_separation.record(ok);
                    }
                }
            }
            let usable = checked.windows(2).filter(|w| !w[0].shell.contains(&w[1].shell.center) && !w[1].shell.contains(&w[0].shell.center));
            for w in usable.take(pairs) {
                let cmp = shell_travel_time(&field, &w[0].shell, &w[1].shell, &window).map_err(core_err)?;
                st.comparison_lower.record(cmp.lower_holds);
                st.comparison_upper.record(cmp.upper_holds);
                st.comparison_exact += cmp.exact as u64;
            }
            Ok((st, records))
        })
        .collect();
    let mut state = ShellState {
        delta,
        tbar,
        ..Default::default()
    };
    let mut records = Vec::new();
    for r in per {
        let (st, rec) = r?;
        state.merge(&st)?;
        records.extend(rec);
    }
    Ok(Outcome {
        state: State::Shells(state),
        records,
    })
}

fn one_hot(k: i64) -> Vec<u64> {
    let mut v = vec![0; k as usize + 1];
    v[k as usize] = 1;
    v
}

fn to_f64_trace(t: &RegenerationTrace<Fixed>) -> RegenerationTrace<f64> {
    RegenerationTrace {
        direction: t.direction,
        radius: t.radius,
        tbar: t.tbar,
        m_max: t.m_max,
        rho: t.rho.clone(),
        segment_times: t.segment_times.iter().map(|s| s.to_f64()).collect(),
        span_time: t.span_time.to_f64(),
        e0_size: t.e0_size,
        a_count: t.a_count,
    }
}

fn run_regen(cfg: &ExperimentConfig, z: &LatticePoint, r: Length, tbar: f64, m_max: u64) -> Result<RegenState, LabError> {
    let traces: Vec<Result<TraceRow, LabError>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|k| {
            let field = WeightField::<Fixed>::new(replica_seed(cfg.master_seed, k, REGEN_STREAM), cfg.distribution, cfg.dimension);
            let t = scan_regenerations::<Fixed, _>(&field, z, r, tbar, m_max).map_err(core_err)?;
            let sandwich = t.sandwich().map(|s| SandwichRow {
                lower: s.lower.to_f64(),
                value: s.value.to_f64(),
                upper: s.upper.to_f64(),
                holds: s.holds,
            });
            Ok(TraceRow {
                master_seed: cfg.master_seed,
                replica: k,
                trace: to_f64_trace(&t),
                sandwich,
            })
        })
        .collect();
    Ok(RegenState {
        tbar,
        traces: traces.into_iter().collect::<Result<_, _>>()?,
    })
}

fn run_y_records(cfg: &ExperimentConfig, beta: f64, eps: f64, mu: &MuEstimate) -> Result<YState, LabError> {
    let window = Window::centered(&LatticePoint::origin(cfg.dimension), cfg.window_radius);
    let rows: Vec<Result<(YRow, i64), LabError>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|k| {
            let field = Field::new(replica_seed(cfg.master_seed, k, YREC_STREAM), cfg.distribution, cfg.dimension);
            let scan = y_record_scan(&field, beta, &window, Some((mu, eps))).map_err(core_err)?;
            let cert = scan.certificate.expect("a certificate was requested");
            Ok((
                YRow {
                    master_seed: cfg.master_seed,
                    replica: k,
                    sup: scan.sup,
                    records: scan.records.len(),
                    checked: cert.checked,
                    held: cert.held,
                },
                scan.radius,
            ))
        })
        .collect();
    let rows: Vec<(YRow, i64)> = rows.into_iter().collect::<Result<_, _>>()?;
    Ok(YState {
        beta,
        eps,
        radius: rows.first().map_or(0, |r| r.1),
        rows: rows.into_iter().map(|r| r.0).collect(),
    })
}

fn sort_rows<T, K: Ord>(rows: &mut [T], key: impl Fn(&T) -> K) {
    rows.sort_by_key(|r| key(r));
}

impl State {
    pub fn name(&self) -> &'static str {
        match self {
            State::Mu(_) => "mu",
            State::Tails(_) => "tails",
            State::Shells(_) => "shells",
            State::Regen(_) => "regen",
            State::DeviationSets(_) => "deviation-sets",
            State::HreSum(_) => "hre-sum",
            State::RadialSum(_) => "radial-sum",
            State::Lp(_) => "lp",
            State::PointToShape(_) => "point-to-shape",
            State::TubeSweep(_) => "tube-sweep",
            State::YRecords(_) => "y-records",
        }
    }

    /// Pool `other` into `self`. Exact accumulators and sorted row lists make
    /// the result independent of the merge order.
    pub fn merge(&mut self, other: &State) -> Result<(), LabError> {
        let core = |e: fpp_core::DeviationError| mismatch(&e.to_string());
        match (self, other) {
            (State::Mu(a), State::Mu(b)) => a.merge(b).map_err(core),
            (State::Tails(a), State::Tails(b)) => a.merge(b).map_err(core),
            (State::Shells(a), State::Shells(b)) => a.merge(b),
            (State::Regen(a), State::Regen(b)) => {
                if a.tbar != b.tbar {
                    return Err(mismatch("regeneration thresholds differ"));
                }
                a.traces.extend(b.traces.iter().cloned());
                sort_rows(&mut a.traces, |r| (r.master_seed, r.replica));
                Ok(())
            }
            (State::DeviationSets(a), State::DeviationSets(b)) => a.merge(b).map_err(core),
            (State::HreSum(a), State::HreSum(b)) | (State::RadialSum(a), State::RadialSum(b)) => a.merge(b).map_err(core),
            (State::Lp(a), State::Lp(b)) => a.merge(b).map_err(core),
            (State::PointToShape(a), State::PointToShape(b)) => a.merge(b).map_err(core),
            (State::TubeSweep(a), State::TubeSweep(b)) => {
                if a.radii != b.radii || a.n != b.n {
                    return Err(mismatch("tube sweeps over different radii"));
                }
                a.reference_exact += b.reference_exact;
                a.rows.extend(b.rows.iter().cloned());
                sort_rows(&mut a.rows, |r| (r.master_seed, r.replica));
                Ok(())
            }
            (State::YRecords(a), State::YRecords(b)) => {
                if a.beta != b.beta || a.eps != b.eps || a.radius != b.radius {
                    return Err(mismatch("record scans with different parameters"));
                }
                a.rows.extend(b.rows.iter().cloned());
                sort_rows(&mut a.rows, |r| (r.master_seed, r.replica));
                Ok(())
            }
            (a, b) => Err(mismatch(&format!("cannot merge {} with {}", a.name(), b.name()))),
        }
    }

    /// Fraction of results that are not certified window-exact.
    pub fn censored_fraction(&self) -> f64 {
        let frac = |bad: u64, total: u64| if total == 0 { 0.0 } else { bad as f64 / total as f64 };
        match self {
            State::Mu(e) => e.scales.last().map_or(0.0, |s| frac(s.moments.n - s.exact, s.moments.n)),
            State::Tails(t) => frac(t.trials - t.exact, t.trials),
            State::Shells(s) => frac(s.attempted - s.complete, s.attempted),
            State::Regen(_) => 0.0,
            State::DeviationSets(p) => frac(*p.censored.last().unwrap_or(&0), p.trials),
            State::HreSum(s) | State::RadialSum(s) => frac(s.terms - s.exact_terms, s.terms),
            State::Lp(l) => {
                let total = l.trials * l.rows.len() as u64;
                frac(total - l.rows.iter().map(|r| r.exact).sum::<u64>(), total)
            }
            State::PointToShape(s) => frac(s.trials - s.exact.last().unwrap_or(&s.trials), s.trials),
            State::TubeSweep(t) => frac(t.rows.len() as u64 - t.reference_exact, t.rows.len() as u64),
            State::YRecords(_) => 0.0,
        }
    }

    /// Replicas pooled in this state.
    pub fn replicas(&self) -> u64 {
        match self {
            State::Mu(e) => e.scales.last().map_or(0, |s| s.moments.n),
            State::Tails(t) => t.trials,
            State::Shells(s) => s.attempted,
            State::Regen(r) => r.traces.len() as u64,
            State::DeviationSets(p) => p.trials,
            State::HreSum(s) | State::RadialSum(s) => s.trials,
            State::Lp(l) => l.trials,
            State::PointToShape(s) => s.trials,
            State::TubeSweep(t) => t.rows.len() as u64,
            State::YRecords(y) => y.rows.len() as u64,
        }
    }

    /// Regeneration traces as JSON lines.
    pub fn trace_lines(&self) -> Option<Vec<String>> {
        match self {
            State::Regen(r) => Some(r.traces.iter().map(|t| serde_json::to_string(t).expect("traces serialize")).collect()),
            _ => None,
        }
    }
}

fn ci_json(c: &MeanCi) -> Value {
    json!({ "mean": c.mean, "lo": c.lo, "hi": c.hi, "n": c.n })
}

fn fit_json(f: Option<fpp_core::stats::LinearFit>) -> Value {
    match f {
        Some(f) => json!({ "slope": f.slope, "slope_se": f.slope_se, "intercept": f.intercept, "r2": f.r2, "points": f.points }),
        None => Value::Null,
    }
}

fn nonincreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

/// Derived statistics of a state, recomputed after every merge.
pub fn results(state: &State, cfg: &ExperimentConfig) -> Value {
    let th = &cfg.thresholds;
    let level = th.level;
    match state {
        State::Mu(e) => {
            let norm = e.z.l1() as f64;
            json!({
                "z": e.z,
                "mu_hat": e.per_unit(),
                "mu_z": e.value,
                "ci_lo": e.ci.lo / norm,
                "ci_hi": e.ci.hi / norm,
                "statistic": e.statistic,
                "exactness": e.exactness,
                "scales": e.scales.iter().map(|s| json!({
                    "n": s.n, "ci": ci_json(&s.ci(e.statistic)), "exact": s.exact,
                })).collect::<Vec<_>>(),
            })
        }
        State::Tails(t) => {
            let est = t.estimates();
            let slope = t.slope();
            let mut out = json!({
                "side": t.side,
                "z": t.z,
                "eps": t.eps,
                "mu_z": t.mu_z,
                "mu_half_width": t.mu_half_width,
                "trials": t.trials,
                "exact": t.exact,
                "slope": fit_json(slope),
                "y_slope": fit_json(t.y_slope()),
                "estimates": t.rows.iter().zip(&est).map(|(r, e)| json!({
                    "x": r.x, "hits": r.hits, "estimate": e.estimate, "lo": e.lo, "hi": e.hi,
                })).collect::<Vec<_>>(),
            });
            if let (Some(target), Some(f)) = (th.slope_target, slope) {
                out["slope_within_tolerance"] = json!((f.slope - target).abs() <= th.slope_tolerance);
            }
            if matches!(t.sampling, TailSampling::Direct) && t.rows.len() >= 2 {
                let (first, last) = (&t.rows[0], t.rows.last().unwrap());
                let (lo, hi) = proportion_difference(&wilson(first.hits, t.trials, level), &wilson(last.hits, t.trials, level), level);
                out["first_minus_last"] = json!({ "lo": lo, "hi": hi });
                out["decrease_significant"] = json!(lo > 0.0);
            }
            if t.side == TailSide::Below {
                if let Some(f) = slope {
                    out["decreasing"] = json!(f.slope < 0.0 && nonincreasing(&est.iter().map(|e| e.estimate).collect::<Vec<_>>()));
                }
            }
            out
        }
        State::Shells(s) => {
            let Experiment::Shells { fit_k, .. } = &cfg.experiment else { unreachable!("shell state from a shell config") };
            let surv = s.survival(*fit_k);
            let pts: Vec<(f64, f64)> = surv
                .iter()
                .filter(|(_, c)| *c > 0)
                .map(|(k, c)| (*k as f64, (*c as f64 / s.complete as f64).ln()))
                .collect();
            let fit = linear_fit(&pts);
            let completion = wilson(s.complete, s.attempted, level);
            json!({
                "delta": s.delta,
                "tbar": s.tbar,
                "attempted": s.attempted,
                "complete": s.complete,
                "completion": { "estimate": completion.estimate, "lo": completion.lo, "hi": completion.hi },
                "property_connected": s.connected,
                "property_separates": s.separates,
                "property_infinite_white": s.infinite_white,
                "property_pair_separation": s.pair_separation,
                "properties_hold": s.connected.all_hold() && s.separates.all_hold() && s.infinite_white.all_hold() && s.pair_separation.all_hold(),
                "comparison_lower": s.comparison_lower,
                "comparison_upper": s.comparison_upper,
                "comparison_exact": s.comparison_exact,
                "comparison_holds": s.comparison_lower.all_hold() && s.comparison_upper.all_hold(),
                "diameter_fit": fit_json(fit),
                "diameter_tail_ok": fit.is_some_and(|f| f.slope < 0.0 && f.r2 >= th.min_r2),
            })
        }
        State::Regen(r) => {
            let traces: Vec<RegenerationTrace<f64>> = r.traces.iter().map(|t| t.trace.clone()).collect();
            let held = r.traces.iter().filter(|t| t.sandwich.is_some_and(|s| s.holds)).count();
            let mut out = json!({
                "tbar": r.tbar,
                "traces": r.traces.len(),
                "sandwich_held": held,
                "sandwich_holds": held == r.traces.len(),
            });
            if let Some(first) = traces.first() {
                let p = cfg.distribution.cdf(r.tbar).powi(first.e0_size as i32);
                let incs: Moments = traces.iter().flat_map(|t| t.increments()).map(|x| x as f64).collect();
                let se = incs.variance().sqrt() / (incs.n as f64).sqrt();
                out["e0_size"] = json!(first.e0_size);
                out["mu_rho_expected"] = json!(1.0 / p);
                out["increments"] = json!(incs.n);
                out["mu_rho_mean"] = json!(incs.mean());
                out["mu_rho_se"] = json!(se);
                out["mu_rho_z"] = json!((incs.mean() - 1.0 / p) / se);
            }
            if let Ok(e) = estimate_regen_constants(&traces) {
                out["estimate"] = serde_json::to_value(&e).unwrap_or(Value::Null);
            }
            out
        }
        State::DeviationSets(p) => {
            let means: Vec<f64> = p.z_count.iter().map(|m| m.mean()).collect();
            json!({
                "eps": p.eps,
                "radii": p.radii,
                "z_count": p.z_count.iter().map(|m| ci_json(&m.mean_ci(level))).collect::<Vec<_>>(),
                "t_measure": p.t_measure.iter().map(|m| m.mean()).collect::<Vec<_>>(),
                "censored": p.censored,
                "z_count_trend": increment_trend(&means, th.trend_ratio),
            })
        }
        State::HreSum(s) | State::RadialSum(s) => {
            let means = s.means();
            json!({
                "alpha": s.alpha,
                "eps": s.eps,
                "checkpoints": s.checkpoints,
                "partial_sums": s.sums.iter().map(|m| ci_json(&m.mean_ci(level))).collect::<Vec<_>>(),
                "increments": s.increments(),
                "trend": increment_trend(&means, th.trend_ratio),
                "comparison": s.comparison,
                "comparison_trend": increment_trend(&s.comparison, th.trend_ratio),
                "exact_fraction": if s.terms == 0 { 1.0 } else { s.exact_terms as f64 / s.terms as f64 },
            })
        }
        State::Lp(l) => json!({
            "p": l.p,
            "y_moment_finite": l.y_moment_finite,
            "rows": l.rows.iter().map(|r| json!({ "z": r.z, "moment": ci_json(&r.moment.mean_ci(level)), "exact": r.exact })).collect::<Vec<_>>(),
        }),
        State::PointToShape(s) => {
            let dev: Vec<f64> = s.abs_dev.iter().map(|m| m.mean()).collect();
            json!({
                "n_grid": s.n_grid,
                "ratio": s.ratio.iter().map(|m| ci_json(&m.mean_ci(level))).collect::<Vec<_>>(),
                "abs_dev": s.abs_dev.iter().map(|m| ci_json(&m.mean_ci(level))).collect::<Vec<_>>(),
                "abs_dev_decreasing": dev.windows(2).all(|w| w[1] < w[0]),
                "exact": s.exact,
            })
        }
        State::TubeSweep(t) => {
            let k = t.radii.len();
            let col = |i: usize| mean_ci(&t.rows.iter().map(|r| r.restricted[i]).collect::<Vec<_>>(), level);
            let gap = |i: usize| mean_ci(&t.rows.iter().map(|r| r.restricted[i] - r.reference).collect::<Vec<_>>(), level);
            let gaps: Vec<MeanCi> = (0..k).map(gap).collect();
            let realization_monotone = t
                .rows
                .iter()
                .all(|r| nonincreasing(&r.restricted) && r.restricted.last().is_some_and(|&l| l >= r.reference));
            // successive gaps may not grow by more than two interval half-widths
            let gaps_shrink = gaps.windows(2).all(|w| w[1].mean <= w[0].mean + 2.0 * (w[0].half_width() + w[1].half_width()));
            json!({
                "radii": t.radii,
                "n": t.n,
                "mu_c": (0..k).map(|i| ci_json(&col(i))).collect::<Vec<_>>(),
                "mu_hat": ci_json(&mean_ci(&t.rows.iter().map(|r| r.reference).collect::<Vec<_>>(), level)),
                "gaps": gaps.iter().map(ci_json).collect::<Vec<_>>(),
                "realization_monotone": realization_monotone,
                "gaps_shrink": gaps_shrink,
                "gap_means_nonincreasing": nonincreasing(&gaps.iter().map(|g| g.mean).collect::<Vec<_>>()),
            })
        }
        State::YRecords(y) => {
            let sups: Vec<f64> = y.rows.iter().filter_map(|r| r.sup.map(|s| s as f64)).collect();
            let checked: usize = y.rows.iter().map(|r| r.checked).sum();
            let held: usize = y.rows.iter().map(|r| r.held).sum();
            json!({
                "beta": y.beta,
                "eps": y.eps,
                "radius": y.radius,
                "nonempty": wilson(sups.len() as u64, y.rows.len() as u64, level),
                "sup_mean": if sups.is_empty() { Value::Null } else { json!(sups.iter().sum::<f64>() / sups.len() as f64) },
                "certificate_checked": checked,
                "certificate_held": held,
            })
        }
    }
}

/// Column names of results.csv for each experiment.
pub fn columns(experiment: &str) -> &'static [&'static str] {
    match experiment {
        "mu" => &["n", "samples", "estimate", "ci_lo", "ci_hi", "exact"],
        "tails" => &["x", "threshold", "hits", "trials", "estimate", "ci_lo", "ci_hi", "y_tail"],
        "shells" => &["k", "count_above", "survival", "log_survival"],
        "regen" => &["master_seed", "replica", "regenerations", "increment_mean", "span_time", "sandwich_lower", "sandwich_upper", "sandwich_holds"],
        "deviation-sets" => &["radius", "z_count_mean", "z_count_lo", "z_count_hi", "t_measure_mean", "sup_t_mean", "sup_z_mean", "censored"],
        "hre-sum" | "radial-sum" => &["checkpoint", "partial_sum", "ci_lo", "ci_hi", "comparison"],
        "lp" => &["z", "norm", "moment", "ci_lo", "ci_hi", "exact"],
        "point-to-shape" => &["n", "ratio", "abs_dev", "ci_lo", "ci_hi", "exact"],
        "tube-sweep" => &["radius", "mu_c", "ci_lo", "ci_hi", "gap", "gap_lo", "gap_hi"],
        "y-records" => &["master_seed", "replica", "sup", "records", "checked", "held"],
        _ => &[],
    }
}

fn f(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn coords(p: &LatticePoint) -> String {
    p.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

/// Rows of results.csv, matching [`columns`].
pub fn table(state: &State, cfg: &ExperimentConfig) -> Vec<Vec<String>> {
    let level = cfg.thresholds.level;
    match state {
        State::Mu(e) => {
            if e.exactness == MuExactness::Exact {
                let Experiment::Mu { n_grid, .. } = &cfg.experiment else { return Vec::new() };
                let v = e.per_unit();
                return n_grid.iter().map(|n| vec![n.to_string(), "0".into(), f(v), f(v), f(v), "1".into()]).collect();
            }
            e.scales
                .iter()
                .map(|s| {
                    let c = s.ci(e.statistic);
                    let exact = s.exact as f64 / s.moments.n as f64;
                    vec![s.n.to_string(), s.moments.n.to_string(), f(c.mean), f(c.lo), f(c.hi), f(exact)]
                })
                .collect()
        }
        State::Tails(t) => t
            .rows
            .iter()
            .zip(t.estimates())
            .map(|(r, e)| {
                vec![
                    f(r.x),
                    f(t.eps * r.x),
                    r.hits.to_string(),
                    t.trials.to_string(),
                    f(e.estimate),
                    f(e.lo),
                    f(e.hi),
                    f(r.y_tail[0]),
                ]
            })
            .collect(),
        State::Shells(s) => {
            let Experiment::Shells { fit_k, .. } = &cfg.experiment else { return Vec::new() };
            let last = (s.s_diameter.len() as i64).max(fit_k[1]);
            s.survival([0, last])
                .into_iter()
                .map(|(k, c)| {
                    let p = if s.complete == 0 { f64::NAN } else { c as f64 / s.complete as f64 };
                    vec![k.to_string(), c.to_string(), f(p), f(p.ln())]
                })
                .collect()
        }
        State::Regen(r) => r
            .traces
            .iter()
            .map(|t| {
                let incs: Vec<f64> = t.trace.increments().map(|x| x as f64).collect();
                let mean = if incs.is_empty() { f64::NAN } else { incs.iter().sum::<f64>() / incs.len() as f64 };
                let (lo, hi, holds) = t.sandwich.map_or((f64::NAN, f64::NAN, false), |s| (s.lower, s.upper, s.holds));
                vec![
                    t.master_seed.to_string(),
                    t.replica.to_string(),
                    incs.len().to_string(),
                    f(mean),
                    f(t.trace.span_time),
                    f(lo),
                    f(hi),
                    holds.to_string(),
                ]
            })
            .collect(),
        State::DeviationSets(p) => (0..p.radii.len())
            .map(|i| {
                let c = p.z_count[i].mean_ci(level);
                vec![
                    p.radii[i].to_string(),
                    f(c.mean),
                    f(c.lo),
                    f(c.hi),
                    f(p.t_measure[i].mean()),
                    f(p.sup_t[i].mean()),
                    f(p.sup_z[i].mean()),
                    p.censored[i].to_string(),
                ]
            })
            .collect(),
        State::HreSum(s) | State::RadialSum(s) => (0..s.checkpoints.len())
            .map(|i| {
                let c = s.sums[i].mean_ci(level);
                vec![s.checkpoints[i].to_string(), f(c.mean), f(c.lo), f(c.hi), f(s.comparison[i])]
            })
            .collect(),
        State::Lp(l) => l
            .rows
            .iter()
            .map(|r| {
                let c = r.moment.mean_ci(level);
                vec![coords(&r.z), r.z.l1().to_string(), f(c.mean), f(c.lo), f(c.hi), r.exact.to_string()]
            })
            .collect(),
        State::PointToShape(s) => (0..s.n_grid.len())
            .map(|i| {
                let c = s.abs_dev[i].mean_ci(level);
                vec![s.n_grid[i].to_string(), f(s.ratio[i].mean()), f(c.mean), f(c.lo), f(c.hi), s.exact[i].to_string()]
            })
            .collect(),
        State::TubeSweep(t) => (0..t.radii.len())
            .map(|i| {
                let c = mean_ci(&t.rows.iter().map(|r| r.restricted[i]).collect::<Vec<_>>(), level);
                let g = mean_ci(&t.rows.iter().map(|r| r.restricted[i] - r.reference).collect::<Vec<_>>(), level);
                vec![f(t.radii[i]), f(c.mean), f(c.lo), f(c.hi), f(g.mean), f(g.lo), f(g.hi)]
            })
            .collect(),
        State::YRecords(y) => y
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.master_seed.to_string(),
                    r.replica.to_string(),
                    r.sup.map_or(String::new(), |s| s.to_string()),
                    r.records.to_string(),
                    r.checked.to_string(),
                    r.held.to_string(),
                ]
            })
            .collect(),
    }
}

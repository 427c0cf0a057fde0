//! Deployment context: battery, cache and inference load over time, the
//! constraints and weights derived from them, and the replay loop that
//! re-runs the search when the context changes.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arch::NetworkSpec;
use crate::costmodel::{DeviceProfile, PerfReport, MIB};
use crate::error::{Error, Result};
use crate::operators::OperatorCatalog;
use crate::oracle::AccuracyProfile;
use crate::search::{runtime3c, Candidate, Constraint, MutationConfig, PlanEntry, SearchBudget, SearchInputs};

/// Floor on the energy weight.
pub const LAMBDA2_FLOOR: f64 = 0.3;
pub const DEFAULT_A_THRESHOLD: f64 = 0.05;

/// Constraints and objective weights in force at one moment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextState {
    #[serde(rename = "t")]
    pub time: f64,
    pub battery_remaining: f64,
    /// Bytes.
    pub cache_available: f64,
    pub inference_count: u64,
    #[serde(rename = "A_threshold")]
    pub a_threshold: f64,
    /// Seconds.
    #[serde(rename = "T_bgt")]
    pub t_budget: f64,
    /// Bytes.
    #[serde(rename = "S_bgt")]
    pub s_budget: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ContextState {
    /// A static context for one-shot searches.
    pub fn fixed(a_threshold: f64, t_budget: f64, s_budget: f64, lambda1: f64, lambda2: f64) -> Self {
        ContextState {
            time: 0.0,
            battery_remaining: 1.0,
            cache_available: s_budget,
            inference_count: 0,
            a_threshold,
            t_budget,
            s_budget,
            lambda1,
            lambda2,
        }
    }

    pub fn validate_budgets(&self) -> Result<()> {
        if !(self.t_budget > 0.0 && self.s_budget > 0.0) {
            return Err(Error::InvalidValue(format!(
                "budgets must be positive (T_bgt {}, S_bgt {})",
                self.t_budget, self.s_budget
            )));
        }
        if !(self.a_threshold >= 0.0 && self.a_threshold.is_finite()) {
            return Err(Error::InvalidValue(format!("A_threshold {} must be non-negative", self.a_threshold)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::InvalidValue("objective weights must be non-negative".into()));
        }
        Ok(())
    }

    /// Full invariant check, including the weight simplex and the cache bound.
    pub fn validate(&self) -> Result<()> {
        self.validate_budgets()?;
        if (self.lambda1 + self.lambda2 - 1.0).abs() > 1e-9 || self.lambda2 < LAMBDA2_FLOOR - 1e-12 {
            return Err(Error::InvalidValue(format!(
                "weights ({}, {}) must sum to 1 with lambda2 >= {LAMBDA2_FLOOR}",
                self.lambda1, self.lambda2
            )));
        }
        if self.s_budget > self.cache_available {
            return Err(Error::InvalidValue("S_bgt exceeds available cache".into()));
        }
        Ok(())
    }
}

/// How remaining battery maps to the energy weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `lambda2 = max(0.3, 1 - E_remaining)`: energy matters more as the battery drains.
    #[default]
    OneMinusBattery,
    /// `lambda2 = max(0.3, E_remaining)`.
    Battery,
}

pub fn weights_from_battery(e_remaining: f64, rule: WeightRule) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&e_remaining) {
        return Err(Error::InvalidValue(format!("battery fraction {e_remaining} outside [0, 1]")));
    }
    let raw = match rule {
        WeightRule::OneMinusBattery => 1.0 - e_remaining,
        WeightRule::Battery => e_remaining,
    };
    let lambda2 = raw.max(LAMBDA2_FLOOR);
    Ok((1.0 - lambda2, lambda2))
}

/// Application-specified constraints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    #[serde(rename = "A_threshold", default = "default_a_threshold")]
    pub a_threshold: f64,
    /// Seconds.
    #[serde(rename = "T_bgt")]
    pub t_budget: f64,
    #[serde(default)]
    pub weight_rule: WeightRule,
}

fn default_a_threshold() -> f64 {
    DEFAULT_A_THRESHOLD
}

impl AppConfig {
    pub fn new(a_threshold: f64, t_budget: f64) -> Self {
        AppConfig {
            a_threshold,
            t_budget,
            weight_rule: WeightRule::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t_seconds: f64,
    /// Empty in the file when the battery is not observed; the replay then
    /// derives it from the drain model.
    pub battery_fraction: Option<f64>,
    pub cache_bytes: f64,
    pub inference_count: u64,
    /// Marks a charging event, allowing the battery to rise.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recharge: bool,
}

impl TraceEntry {
    pub fn new(t_seconds: f64, battery_fraction: Option<f64>, cache_bytes: f64, inference_count: u64) -> Self {
        TraceEntry {
            t_seconds,
            battery_fraction,
            cache_bytes,
            inference_count,
            recharge: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContextTrace {
    pub entries: Vec<TraceEntry>,
}

impl ContextTrace {
    pub fn new(entries: Vec<TraceEntry>) -> Result<Self> {
        let trace = ContextTrace { entries };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        let mut last_battery: Option<f64> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.cache_bytes >= 0.0 && e.cache_bytes.is_finite() && e.t_seconds.is_finite()) {
                return Err(Error::InvalidValue(format!("trace row {i}: bad time or cache value")));
            }
            if i > 0 && e.t_seconds <= self.entries[i - 1].t_seconds {
                return Err(Error::InvalidValue(format!("trace row {i}: times must strictly increase")));
            }
            if let Some(b) = e.battery_fraction {
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::InvalidValue(format!("trace row {i}: battery {b} outside [0, 1]")));
                }
                if let Some(prev) = last_battery {
                    if b > prev && !e.recharge {
                        return Err(Error::InvalidValue(format!(
                            "trace row {i}: battery rises from {prev} to {b} without a recharge mark"
                        )));
                    }
                }
                last_battery = Some(b);
            }
        }
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let entries = rdr.deserialize().collect::<std::result::Result<Vec<TraceEntry>, _>>()?;
        ContextTrace::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ContextTrace::from_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let with_recharge = self.entries.iter().any(|e| e.recharge);
        if with_recharge {
            w.write_record(["t_seconds", "battery_fraction", "cache_bytes", "inference_count", "recharge"])?;
        } else {
            w.write_record(["t_seconds", "battery_fraction", "cache_bytes", "inference_count"])?;
        }
        for e in &self.entries {
            let battery = e.battery_fraction.map(|b| b.to_string()).unwrap_or_default();
            let mut row = vec![
                e.t_seconds.to_string(),
                battery,
                e.cache_bytes.to_string(),
                e.inference_count.to_string(),
            ];
            if with_recharge {
                row.push(e.recharge.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the context for one trace entry. `S_bgt` is the available cache.
pub fn budgets_from_trace_entry(entry: &TraceEntry, app: &AppConfig) -> Result<ContextState> {
    let battery = entry
        .battery_fraction
        .ok_or_else(|| Error::InvalidValue(format!("no battery value at t={}", entry.t_seconds)))?;
    if !(entry.cache_bytes > 0.0) {
        return Err(Error::InvalidValue(format!(
            "no storage budget at t={}: available cache is {}",
            entry.t_seconds, entry.cache_bytes
        )));
    }
    let (lambda1, lambda2) = weights_from_battery(battery, app.weight_rule)?;
    let state = ContextState {
        time: entry.t_seconds,
        battery_remaining: battery,
        cache_available: entry.cache_bytes,
        inference_count: entry.inference_count,
        a_threshold: app.a_threshold,
        t_budget: app.t_budget,
        s_budget: entry.cache_bytes,
        lambda1,
        lambda2,
    };
    state.validate_budgets()?;
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMode {
    Periodic,
    OnChange,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggerPolicy {
    pub mode: TriggerMode,
    /// Seconds between periodic triggers.
    pub period: f64,
    /// Relative change in `S_bgt`, `T_bgt` or `lambda2` that counts as noticeable.
    pub change_epsilon: f64,
}

impl TriggerPolicy {
    pub fn periodic(period: f64) -> Self {
        TriggerPolicy {
            mode: TriggerMode::Periodic,
            period,
            change_epsilon: 0.0,
        }
    }

    pub fn on_change(change_epsilon: f64) -> Self {
        TriggerPolicy {
            mode: TriggerMode::OnChange,
            period: 0.0,
            change_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let periodic = matches!(self.mode, TriggerMode::Periodic | TriggerMode::Both);
        let on_change = matches!(self.mode, TriggerMode::OnChange | TriggerMode::Both);
        if periodic && !(self.period > 0.0) {
            return Err(Error::InvalidValue("trigger period must be positive".into()));
        }
        if on_change && !(self.change_epsilon > 0.0) {
            return Err(Error::InvalidValue("change epsilon must be positive".into()));
        }
        Ok(())
    }
}

impl FromStr for TriggerPolicy {
    type Err = Error;

    /// `periodic:<seconds>`, `on_change:<eps>` or `both:<seconds>:<eps>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidValue(format!("bad trigger {s:?}; expected periodic:<s>, on_change:<eps> or both:<s>:<eps>"));
        let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        let policy = match parts.as_slice() {
            ["periodic", p] => TriggerPolicy::periodic(num(p)?),
            ["on_change", e] => TriggerPolicy::on_change(num(e)?),
            ["both", p, e] => TriggerPolicy {
                mode: TriggerMode::Both,
                period: num(p)?,
                change_epsilon: num(e)?,
            },
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl fmt::Display for TriggerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            TriggerMode::Periodic => write!(f, "periodic:{}", self.period),
            TriggerMode::OnChange => write!(f, "on_change:{}", self.change_epsilon),
            TriggerMode::Both => write!(f, "both:{}:{}", self.period, self.change_epsilon),
        }
    }
}

fn relative_change(before: f64, after: f64) -> f64 {
    if before == 0.0 {
        if after == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((after - before) / before).abs()
    }
}

pub fn should_trigger(prev: &ContextState, next: &ContextState, policy: &TriggerPolicy, last_trigger_time: f64) -> bool {
    let periodic = matches!(policy.mode, TriggerMode::Periodic | TriggerMode::Both)
        && next.time - last_trigger_time >= policy.period;
    let changed = matches!(policy.mode, TriggerMode::OnChange | TriggerMode::Both)
        && [
            (prev.s_budget, next.s_budget),
            (prev.t_budget, next.t_budget),
            (prev.lambda2, next.lambda2),
        ]
        .iter()
        .any(|&(a, b)| relative_change(a, b) > policy.change_epsilon);
    periodic || changed
}

/// One re-compression decision during a replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationEvent {
    pub t: f64,
    pub context: ContextState,
    pub encoding: String,
    pub plan: Vec<PlanEntry>,
    pub report: PerfReport,
    pub search_wall_time: f64,
    pub evaluations: usize,
    pub feasible: bool,
    pub violated: Vec<Constraint>,
}

impl AdaptationEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

pub fn write_event_log<W: Write>(events: &[AdaptationEvent], mut w: W) -> Result<()> {
    for e in events {
        writeln!(w, "{}", e.to_json_line())?;
    }
    Ok(())
}

pub fn read_event_log<R: Read>(r: R) -> Result<Vec<AdaptationEvent>> {
    let mut text = String::new();
    let mut r = r;
    r.read_to_string(&mut text)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationConfig {
    pub app: AppConfig,
    pub policy: TriggerPolicy,
    pub budget: SearchBudget,
    pub mutation: MutationConfig,
    /// Joules; used by the drain model when the trace omits battery values.
    pub battery_capacity: f64,
    /// Battery at the start when the first entry has none.
    pub initial_battery: f64,
}

impl SimulationConfig {
    pub fn new(app: AppConfig, policy: TriggerPolicy) -> Self {
        SimulationConfig {
            app,
            policy,
            budget: SearchBudget::default(),
            mutation: MutationConfig::default(),
            battery_capacity: 36_000.0,
            initial_battery: 1.0,
        }
    }
}

/// Static inputs of a replay.
#[derive(Clone, Copy)]
pub struct Deployment<'a> {
    pub backbone: &'a NetworkSpec,
    pub catalog: &'a OperatorCatalog,
    pub profile: &'a AccuracyProfile,
    pub device: &'a DeviceProfile,
}

/// Steps through the trace, re-running the search at each trigger. The first
/// entry always triggers since nothing is deployed yet. Between triggers the
/// last plan stays deployed and, when the trace omits the battery, drains it
/// by `inference_count * En / battery_capacity`.
pub fn simulate(deployment: &Deployment, trace: &ContextTrace, config: &SimulationConfig) -> Result<Vec<AdaptationEvent>> {
    trace.validate()?;
    config.policy.validate()?;
    if !(config.battery_capacity > 0.0) {
        return Err(Error::InvalidValue("battery capacity must be positive".into()));
    }
    let mut events = Vec::new();
    let mut deployed: Option<Candidate> = None;
    let mut last: Option<(ContextState, f64)> = None; // context and time of the last trigger
    let mut battery = config.initial_battery;
    let mut prev_count = 0u64;

    for entry in &trace.entries {
        battery = match entry.battery_fraction {
            Some(b) => b,
            None => {
                let en = deployed.as_ref().map_or(0.0, |c| c.report.energy_cost);
                (battery - prev_count as f64 * en / config.battery_capacity).max(0.0)
            }
        };
        prev_count = entry.inference_count;
        let resolved = TraceEntry {
            battery_fraction: Some(battery),
            ..entry.clone()
        };
        let state = budgets_from_trace_entry(&resolved, &config.app)?;

        // Changes are measured against the context the deployed plan was chosen for.
        let trigger = match &last {
            None => true,
            Some((prev, last_time)) => should_trigger(prev, &state, &config.policy, *last_time),
        };
        if trigger {
            let inputs = SearchInputs::new(
                deployment.backbone,
                deployment.catalog,
                deployment.profile,
                deployment.device,
                &state,
            );
            let out = runtime3c(&inputs, &config.budget, &config.mutation)?;
            let record = out.to_record("runtime3c", deployment.catalog);
            events.push(AdaptationEvent {
                t: state.time,
                context: state.clone(),
                encoding: record.encoding,
                plan: record.plan,
                report: record.report,
                search_wall_time: record.wall_time_seconds,
                evaluations: record.evaluations,
                feasible: record.feasible,
                violated: record.violated,
            });
            deployed = Some(out.best);
            last = Some((state.clone(), state.time));
        }
    }
    Ok(events)
}

/// Settings for synthesizing a trace with cache contention noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSynthConfig {
    pub entries: usize,
    /// Seconds between entries.
    pub interval: f64,
    /// Bytes.
    pub cache_capacity: f64,
    /// Bytes; standard deviation of the contention noise.
    pub cache_sigma: f64,
    pub start_battery: f64,
    pub drain_per_entry: f64,
    pub max_inferences: u64,
    pub seed: u64,
}

impl Default for TraceSynthConfig {
    fn default() -> Self {
        TraceSynthConfig {
            entries: 4,
            interval: 3600.0,
            cache_capacity: 2.0 * MIB,
            cache_sigma: 0.25 * MIB,
            start_battery: 0.9,
            drain_per_entry: 0.05,
            max_inferences: 3,
            seed: 0,
        }
    }
}

/// `cache = capacity - |N(0, sigma)|`, clamped to `[0, capacity]`; battery
/// falls linearly.
pub fn synthesize_trace(config: &TraceSynthConfig) -> Result<ContextTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.cache_sigma)
        .map_err(|e| Error::InvalidValue(format!("cache sigma: {e}")))?;
    let entries = (0..config.entries)
        .map(|i| {
            let cache = (config.cache_capacity - noise.sample(&mut rng).abs()).clamp(0.0, config.cache_capacity);
            let battery = (config.start_battery - config.drain_per_entry * i as f64).clamp(0.0, 1.0);
            let count = rand::Rng::random_range(&mut rng, 0..=config.max_inferences);
            TraceEntry::new(i as f64 * config.interval, Some(battery), cache.round(), count)
        })
        .collect();
    ContextTrace::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn weight_examples() {
        let (l1, l2) = weights_from_battery(0.61, WeightRule::default()).unwrap();
        assert!(close(l1, 0.61) && close(l2, 0.39));
        assert_eq!(weights_from_battery(1.0, WeightRule::default()).unwrap(), (0.7, 0.3));
        assert_eq!(weights_from_battery(0.0, WeightRule::default()).unwrap(), (0.0, 1.0));
        assert!(weights_from_battery(1.2, WeightRule::default()).is_err());
        let (_, alt) = weights_from_battery(0.86, WeightRule::Battery).unwrap();
        assert!(close(alt, 0.86));
        assert_eq!(weights_from_battery(0.1, WeightRule::Battery).unwrap().1, 0.3);
    }

    #[test]
    fn budget_examples() {
        let app = AppConfig::new(0.006, 0.030);
        let s = budgets_from_trace_entry(&TraceEntry::new(3600.0, Some(0.78), 1.6 * MIB, 1), &app).unwrap();
        assert_eq!(s.s_budget, 1.6 * MIB);
        assert!(close(s.lambda2, 0.3));
        assert_eq!(s.t_budget, 0.030);
        s.validate().unwrap();
        let s = budgets_from_trace_entry(&TraceEntry::new(0.0, Some(0.86), 2.0 * MIB, 2), &app).unwrap();
        assert_eq!(s.s_budget, 2.0 * MIB);
        assert!(close(s.lambda2, 0.3));
        assert!(budgets_from_trace_entry(&TraceEntry::new(0.0, Some(0.86), 0.0, 2), &app).is_err());
    }

    fn state(t: f64, s: f64, l2: f64) -> ContextState {
        ContextState {
            time: t,
            ..ContextState::fixed(0.05, 0.03, s, 1.0 - l2, l2)
        }
    }

    #[test]
    fn trigger_examples() {
        let periodic = TriggerPolicy::periodic(7200.0);
        assert!(should_trigger(&state(0.0, 1.0, 0.3), &state(7200.0, 1.0, 0.3), &periodic, 0.0));
        assert!(!should_trigger(&state(0.0, 1.0, 0.3), &state(3600.0, 1.0, 0.3), &periodic, 0.0));

        let change = TriggerPolicy::on_change(0.1);
        let a = state(0.0, 2.0 * MIB, 0.3);
        assert!(!should_trigger(&a, &state(10.0, 2.0 * MIB, 0.3), &change, 0.0));
        assert!(should_trigger(&a, &state(10.0, 1.5 * MIB, 0.3), &change, 0.0));
        assert!(!should_trigger(&a, &state(10.0, 1.9 * MIB, 0.3), &change, 0.0));
        assert!(should_trigger(&a, &state(10.0, 2.0 * MIB, 0.39), &change, 0.0));
    }

    #[test]
    fn trigger_parsing() {
        assert_eq!("periodic:3600".parse::<TriggerPolicy>().unwrap(), TriggerPolicy::periodic(3600.0));
        assert_eq!("on_change:0.1".parse::<TriggerPolicy>().unwrap(), TriggerPolicy::on_change(0.1));
        let both: TriggerPolicy = "both:60:0.2".parse().unwrap();
        assert_eq!(both.mode, TriggerMode::Both);
        assert_eq!(both.to_string(), "both:60:0.2");
        assert!("periodic:0".parse::<TriggerPolicy>().is_err());
        assert!("hourly".parse::<TriggerPolicy>().is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let text = "t_seconds,battery_fraction,cache_bytes,inference_count\n0,0.86,2097152,2\n3600,,1677721.6,1\n";
        let trace = ContextTrace::from_reader(text.as_bytes()).unwrap();
        assert_eq!(trace.entries.len(), 2);
        assert_eq!(trace.entries[1].battery_fraction, None);
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        let back = ContextTrace::from_reader(out.as_slice()).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn trace_validation() {
        let e = |t, b| TraceEntry::new(t, Some(b), 1.0, 0);
        assert!(ContextTrace::new(vec![e(0.0, 0.9), e(0.0, 0.8)]).is_err());
        assert!(ContextTrace::new(vec![e(0.0, 0.8), e(1.0, 0.9)]).is_err());
        let mut charged = e(1.0, 0.9);
        charged.recharge = true;
        assert!(ContextTrace::new(vec![e(0.0, 0.8), charged]).is_ok());
        assert!(ContextTrace::from_reader("t_seconds,battery_fraction\n0,0.5\n".as_bytes()).is_err());
    }

    #[test]
    fn synthesized_cache_stays_below_capacity() {
        let cfg = TraceSynthConfig {
            entries: 200,
            seed: 3,
            ..TraceSynthConfig::default()
        };
        let a = synthesize_trace(&cfg).unwrap();
        assert_eq!(a, synthesize_trace(&cfg).unwrap());
        assert!(a.entries.iter().all(|e| e.cache_bytes <= cfg.cache_capacity && e.cache_bytes >= 0.0));
        let mean_drop =
            a.entries.iter().map(|e| cfg.cache_capacity - e.cache_bytes).sum::<f64>() / a.entries.len() as f64;
        // E|N(0, s)| = s * sqrt(2 / pi)
        let expect = cfg.cache_sigma * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean_drop - expect).abs() < 0.2 * expect, "{mean_drop} vs {expect}");
    }
}

//! Behavioural probes: canned stimulus scripts whose traces are checked for
//! workspace signatures (rivalry, attentional blink, breakthrough of
//! high-priority signals, habituation).
//!
//! Every `analyze_*` function is a pure function of a finished trace. The
//! thresholds are engineered analogues chosen for this runtime, not
//! psychophysical quantities, and reports say so.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{EnvironmentSpec, RunConfig};
use crate::environment::{ScheduledStimulus, StimulusScript};
use crate::error::{Error, Result};
use crate::runtime::run;
use crate::scoring::bag_of_words_cosine;
use crate::trace::{workspace_by_tick, Event, TraceEvent};
use crate::types::{AttentionConfig, Polarity, RefreshMode, RepId, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeId {
    Rivalry,
    Blink,
    Breakthrough,
    Habituation,
}

impl ProbeId {
    pub const ALL: [ProbeId; 4] = [
        ProbeId::Rivalry,
        ProbeId::Blink,
        ProbeId::Breakthrough,
        ProbeId::Habituation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeId::Rivalry => "rivalry",
            ProbeId::Blink => "blink",
            ProbeId::Breakthrough => "breakthrough",
            ProbeId::Habituation => "habituation",
        }
    }
}

impl fmt::Display for ProbeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProbeId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ProbeId::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            format!(
                "unknown probe {s:?}; valid probes: {}",
                ProbeId::ALL.map(ProbeId::name).join(", ")
            )
        })
    }
}

const ARTIFACT_NOTE: &str = "thresholds are defined for this runtime, not taken from human data";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: ProbeId,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    /// Sequence numbers of the trace events the verdict rests on.
    pub evidence: Vec<u64>,
    pub notes: Vec<String>,
}

impl ProbeReport {
    fn new(probe: ProbeId) -> Self {
        ProbeReport {
            probe,
            passed: false,
            metrics: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            evidence: Vec::new(),
            notes: vec![ARTIFACT_NOTE.to_string()],
        }
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_owned(), value);
    }

    fn threshold(&mut self, name: &str, value: f64) {
        self.thresholds.insert(name.to_owned(), value);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "probe {}: {}", self.probe, if self.passed { "PASS" } else { "FAIL" })?;
        for (k, v) in &self.metrics {
            writeln!(f, "  {k} = {v}")?;
        }
        for (k, v) in &self.thresholds {
            writeln!(f, "  threshold {k} = {v}")?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        Ok(())
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
struct PerceptInfo {
    tick: Tick,
    channel: String,
    content: String,
    key: Option<String>,
    polarity: Polarity,
    seq: u64,
}

fn percepts(trace: &[TraceEvent]) -> BTreeMap<RepId, PerceptInfo> {
    trace
        .iter()
        .filter_map(|ev| match &ev.event {
            Event::PerceptCreated { item, channel, .. } => Some((
                item.id,
                PerceptInfo {
                    tick: ev.tick,
                    channel: channel.clone(),
                    content: item.content.clone(),
                    key: item.proposition_key.clone(),
                    polarity: item.polarity,
                    seq: ev.seq,
                },
            )),
            _ => None,
        })
        .collect()
}

/// Workspace contents right after the coherence pass, per tick.
pub fn post_coherence_by_tick(trace: &[TraceEvent]) -> BTreeMap<Tick, (u64, BTreeSet<RepId>)> {
    let mut out: BTreeMap<Tick, (u64, BTreeSet<RepId>)> = BTreeMap::new();
    for ev in trace {
        match &ev.event {
            Event::Refreshed { items } => {
                out.insert(ev.tick, (ev.seq, items.iter().copied().collect()));
            }
            Event::CoherenceEvicted { id, .. } => {
                if let Some((_, set)) = out.get_mut(&ev.tick) {
                    set.remove(id);
                }
            }
            _ => {}
        }
    }
    out
}

fn admitted_at(trace: &[TraceEvent], id: RepId) -> Option<(Tick, u64)> {
    trace.iter().find_map(|ev| match ev.event {
        Event::Admitted { id: a, .. } if a == id => Some((ev.tick, ev.seq)),
        _ => None,
    })
}

fn trace_ticks(trace: &[TraceEvent]) -> Tick {
    trace.iter().map(|e| e.tick).max().unwrap_or(0)
}

// ---------------------------------------------------------------- rivalry

/// Co-presence and alternation of two contradictory percept streams.
///
/// The contradictory pair is found from the trace: two channels whose
/// percepts share a proposition key with opposite polarity.
pub fn analyze_rivalry(trace: &[TraceEvent], min_ticks: u64) -> Result<ProbeReport> {
    let ps = percepts(trace);
    let mut channels: BTreeMap<(String, Polarity), BTreeSet<String>> = BTreeMap::new();
    for p in ps.values() {
        if let Some(k) = &p.key {
            channels
                .entry((k.clone(), p.polarity))
                .or_default()
                .insert(p.channel.clone());
        }
    }
    let key = channels
        .keys()
        .filter(|(_, pol)| *pol == Polarity::Pos)
        .map(|(k, _)| k.clone())
        .find(|k| channels.contains_key(&(k.clone(), Polarity::Neg)))
        .ok_or_else(|| {
            Error::ProbeConfig("rivalry needs two channels carrying the same proposition with opposite polarity".into())
        })?;
    let rivals: BTreeMap<RepId, &PerceptInfo> = ps
        .iter()
        .filter(|(_, p)| p.key.as_ref() == Some(&key))
        .map(|(i, p)| (*i, p))
        .collect();
    let both_ticks: BTreeSet<Tick> = {
        let mut by_tick: BTreeMap<Tick, BTreeSet<Polarity>> = BTreeMap::new();
        for p in rivals.values() {
            by_tick.entry(p.tick).or_default().insert(p.polarity);
        }
        by_tick
            .into_iter()
            .filter(|(_, s)| s.len() == 2)
            .map(|(t, _)| t)
            .collect()
    };
    if (both_ticks.len() as u64) < min_ticks {
        return Err(Error::ProbeConfig(format!(
            "rivalry needs both channels present for at least {min_ticks} ticks, found {}",
            both_ticks.len()
        )));
    }

    let mut report = ProbeReport::new(ProbeId::Rivalry);
    let mut co_presence = 0u64;
    let mut flips = 0u64;
    let mut occupied = 0u64;
    let mut last: Option<Polarity> = None;
    for (seq, items) in post_coherence_by_tick(trace).into_values() {
        let present: BTreeSet<Polarity> = items
            .iter()
            .filter_map(|id| rivals.get(id))
            .map(|p| p.polarity)
            .collect();
        match present.len() {
            2 => {
                co_presence += 1;
                report.evidence.push(seq);
            }
            1 => {
                occupied += 1;
                let now = *present.iter().next().expect("one element");
                if last.is_some_and(|l| l != now) {
                    flips += 1;
                    report.evidence.push(seq);
                }
                last = Some(now);
            }
            _ => {}
        }
    }
    report.metric("ticks", both_ticks.len() as f64);
    report.metric("co_presence", co_presence as f64);
    report.metric("flips", flips as f64);
    report.metric("occupied_ticks", occupied as f64);
    report.threshold("max_co_presence", 0.0);
    report.threshold("min_flips", 1.0);
    report.passed = co_presence == 0 && flips >= 1;
    report.notes.push(format!("contested proposition: {key:?}"));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RivalrySpec {
    pub run: RunConfig,
    #[serde(default = "fifty")]
    pub min_ticks: u64,
}

fn fifty() -> u64 {
    50
}

pub fn rivalry_probe(spec: &RivalrySpec) -> Result<ProbeReport> {
    analyze_rivalry(&run(spec.run.clone())?, spec.min_ticks)
}

// ---------------------------------------------------------------- blink

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stimulus {
    pub text: String,
    pub priority: f64,
    #[serde(default = "default_channel")]
    pub channel: String,
}

fn default_channel() -> String {
    "main".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlinkSpec {
    pub run: RunConfig,
    /// First target; absent for the control condition.
    pub t1: Option<Stimulus>,
    pub t2: Stimulus,
    /// Tick at which T1 is shown.
    #[serde(default = "one")]
    pub onset: Tick,
    pub lags: Vec<u64>,
}

fn one() -> Tick {
    1
}

/// Largest lag at which a single earlier target still outranks a later one
/// in a bounded workspace, or `None` when it always does.
///
/// With equal relevance terms folded into `d = w_i·(s1−s2) + w_rel·(r1−r2)`,
/// T1 outranks T2 at lag `L` iff `w_rec·(1 − 2^(−L/h)) < d`, i.e. for
/// `L < h·log2(w_rec / (w_rec − d))`. Equality goes to the newer item.
pub fn blink_window(cfg: &AttentionConfig, s1: f64, s2: f64, r1: f64, r2: f64) -> Option<u64> {
    let d = cfg.w_importance * (s1 - s2) + cfg.w_relevance * (r1 - r2);
    if d <= 0.0 {
        return Some(0);
    }
    if d >= cfg.w_recency {
        return None;
    }
    let bound = cfg.recency_half_life * (cfg.w_recency / (cfg.w_recency - d)).log2();
    Some((bound.ceil() as u64).saturating_sub(1))
}

impl BlinkSpec {
    fn validate(&self) -> Result<()> {
        if self.run.attention.refresh_mode != RefreshMode::BoundedCapacity {
            return Err(Error::ProbeConfig("blink needs a bounded-capacity workspace".into()));
        }
        if self.lags.is_empty() || self.lags.contains(&0) {
            return Err(Error::ProbeConfig("blink needs one or more positive lags".into()));
        }
        Ok(())
    }

    pub fn window(&self) -> Option<u64> {
        let Some(t1) = &self.t1 else { return Some(0) };
        let sit = &self.run.agent.situation;
        blink_window(
            &self.run.attention,
            t1.priority,
            self.t2.priority,
            bag_of_words_cosine(&t1.text, sit),
            bag_of_words_cosine(&self.t2.text, sit),
        )
    }

    /// The configuration for one lag: T1 at the onset, T2 `lag` ticks later.
    pub fn config_for(&self, lag: u64) -> RunConfig {
        let mut schedule = Vec::new();
        let mut channels = BTreeSet::new();
        if let Some(t1) = &self.t1 {
            schedule.push(stimulus(self.onset, t1));
            channels.insert(t1.channel.clone());
        }
        schedule.push(stimulus(self.onset + lag, &self.t2));
        channels.insert(self.t2.channel.clone());
        let mut cfg = self.run.clone();
        cfg.ticks = self.onset + lag;
        cfg.environment = EnvironmentSpec::Inline(StimulusScript {
            channels,
            schedule,
            ..Default::default()
        });
        cfg
    }
}

fn stimulus(tick: Tick, s: &Stimulus) -> ScheduledStimulus {
    ScheduledStimulus {
        tick,
        channel: s.channel.clone(),
        text: s.text.clone(),
        priority: s.priority,
        key: None,
        polarity: Polarity::Pos,
    }
}

/// Whether T2 (the last-presented target on `t2_channel`) entered the workspace.
pub fn analyze_blink(trace: &[TraceEvent], t2_channel: &str, window: Option<u64>) -> Result<ProbeReport> {
    let ps = percepts(trace);
    let (t2_id, t2) = ps
        .iter()
        .filter(|(_, p)| p.channel == t2_channel)
        .max_by_key(|(id, _)| **id)
        .ok_or_else(|| Error::ProbeConfig(format!("no target on channel {t2_channel:?} in the trace")))?;
    let t1_tick = ps
        .values()
        .filter(|p| p.channel != t2_channel && p.tick < t2.tick)
        .map(|p| p.tick)
        .max();
    let mut report = ProbeReport::new(ProbeId::Blink);
    let admitted = admitted_at(trace, *t2_id).filter(|(t, _)| *t == t2.tick);
    if let Some((_, seq)) = admitted {
        report.evidence.push(seq);
    }
    report.evidence.push(t2.seq);
    let admitted = admitted.is_some();
    report.metric("t2_admitted", indicator(admitted));
    let expected = match (t1_tick, window) {
        (None, _) => true,
        (Some(t1), Some(w)) => {
            let lag = t2.tick - t1;
            report.metric("lag", lag as f64);
            lag > w
        }
        (Some(t1), None) => {
            report.metric("lag", (t2.tick - t1) as f64);
            false
        }
    };
    match window {
        Some(w) => report.threshold("window", w as f64),
        None => report.notes.push("T1 outranks T2 at every lag".into()),
    }
    report.metric("t2_expected", indicator(expected));
    report.passed = admitted == expected;
    Ok(report)
}

pub fn blink_probe(spec: &BlinkSpec, lag: u64) -> Result<ProbeReport> {
    spec.validate()?;
    let trace = run(spec.config_for(lag))?;
    analyze_blink(&trace, &spec.t2.channel, spec.window())
}

/// Runs every configured lag; passes iff each lag behaves as the window predicts.
pub fn blink_sweep(spec: &BlinkSpec) -> Result<ProbeReport> {
    spec.validate()?;
    let mut report = ProbeReport::new(ProbeId::Blink);
    let window = spec.window();
    match window {
        Some(w) => report.threshold("window", w as f64),
        None => report.notes.push("T1 outranks T2 at every lag".into()),
    }
    report.passed = true;
    for &lag in &spec.lags {
        let r = blink_probe(spec, lag)?;
        report.metric(&format!("t2_admitted_lag_{lag:03}"), r.metrics["t2_admitted"]);
        report.passed &= r.passed;
        report.evidence.extend(r.evidence.first());
    }
    Ok(report)
}

// ---------------------------------------------------------------- breakthrough

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakthroughSpec {
    pub run: RunConfig,
    /// One attended-channel sentence per variation; shown every tick.
    pub attended: Vec<String>,
    #[serde(default = "attended_channel")]
    pub attended_channel: String,
    pub attended_priority: f64,
    pub intrusion: Option<Stimulus>,
    pub intrusion_tick: Tick,
}

fn attended_channel() -> String {
    "attended".to_string()
}

impl BreakthroughSpec {
    pub fn config_for(&self, variation: usize) -> RunConfig {
        let sentence = &self.attended[variation % self.attended.len()];
        let mut schedule: Vec<ScheduledStimulus> = (1..=self.run.ticks)
            .map(|t| ScheduledStimulus {
                tick: t,
                channel: self.attended_channel.clone(),
                // Numbered so each line is new and does not habituate.
                text: format!("{sentence} ({t})"),
                priority: self.attended_priority,
                key: None,
                polarity: Polarity::Pos,
            })
            .collect();
        if let Some(i) = &self.intrusion {
            schedule.push(stimulus(self.intrusion_tick, i));
        }
        let mut cfg = self.run.clone();
        cfg.environment = EnvironmentSpec::Inline(StimulusScript {
            channels: schedule.iter().map(|s| s.channel.clone()).collect(),
            schedule,
            ..Default::default()
        });
        cfg
    }
}

/// Whether the intrusion on `channel` entered the workspace within one tick.
/// Without an intrusion the probe passes vacuously and reports no metric.
pub fn analyze_breakthrough(trace: &[TraceEvent], channel: &str) -> ProbeReport {
    let mut report = ProbeReport::new(ProbeId::Breakthrough);
    let Some((id, p)) = percepts(trace).into_iter().find(|(_, p)| p.channel == channel) else {
        report.passed = true;
        report.notes.push("no intrusion presented".into());
        return report;
    };
    report.evidence.push(p.seq);
    let admitted = admitted_at(trace, id).filter(|(t, _)| *t <= p.tick + 1);
    if let Some((t, seq)) = admitted {
        report.evidence.push(seq);
        report.metric("admission_delay", (t - p.tick) as f64);
    }
    report.metric("admitted", indicator(admitted.is_some()));
    report.threshold("max_delay", 1.0);
    report.passed = admitted.is_some();
    report
}

pub fn breakthrough_probe(spec: &BreakthroughSpec) -> Result<ProbeReport> {
    if spec.attended.is_empty() {
        return Err(Error::ProbeConfig("breakthrough needs attended-channel content".into()));
    }
    let mut report = ProbeReport::new(ProbeId::Breakthrough);
    let Some(intrusion) = &spec.intrusion else {
        report.passed = true;
        report.notes.push("no intrusion presented".into());
        return Ok(report);
    };
    let mut admitted = 0usize;
    for v in 0..spec.attended.len() {
        let r = analyze_breakthrough(&run(spec.config_for(v))?, &intrusion.channel);
        if r.passed {
            admitted += 1;
        }
        report.evidence.extend(r.evidence.last());
    }
    let n = spec.attended.len();
    report.metric("variations", n as f64);
    report.metric("admission_rate", admitted as f64 / n as f64);
    report.threshold("min_admission_rate", 1.0);
    report.passed = admitted == n;
    Ok(report)
}

// ---------------------------------------------------------------- habituation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HabituationSpec {
    pub run: RunConfig,
    pub repeated: Stimulus,
    /// Fresh moderate-salience items, one per tick.
    pub competitor: Option<Stimulus>,
}

/// First tick at which the repeated stimulus ranks below a competitor:
/// the smallest `n` with `base·factor^(n−1) < competitor`.
pub fn habituation_bound(base: f64, factor: f64, competitor: f64) -> Option<Tick> {
    let mut s = base;
    for n in 1..=64 {
        if s < competitor {
            return Some(n);
        }
        s *= factor;
    }
    None
}

impl HabituationSpec {
    pub fn config(&self) -> RunConfig {
        let mut schedule = Vec::new();
        for t in 1..=self.run.ticks {
            schedule.push(stimulus(t, &self.repeated));
            if let Some(c) = &self.competitor {
                schedule.push(ScheduledStimulus {
                    text: format!("{} {t}", c.text),
                    ..stimulus(t, c)
                });
            }
        }
        let mut cfg = self.run.clone();
        cfg.environment = EnvironmentSpec::Inline(StimulusScript {
            channels: schedule.iter().map(|s| s.channel.clone()).collect(),
            schedule,
            ..Default::default()
        });
        cfg
    }

    pub fn bound(&self) -> Option<Tick> {
        let c = self.competitor.as_ref()?;
        habituation_bound(
            self.repeated.priority,
            self.run.attention.habituation_factor,
            c.priority,
        )
    }
}

/// When the percept repeated on `channel` leaves the workspace.
pub fn analyze_habituation(trace: &[TraceEvent], channel: &str, bound: Option<Tick>) -> Result<ProbeReport> {
    let ps = percepts(trace);
    if !ps.values().any(|p| p.channel != channel) {
        return Err(Error::ProbeConfig(
            "habituation needs competing stimuli; without them the repeated percept keeps its slot".into(),
        ));
    }
    let repeated: BTreeSet<RepId> = ps
        .iter()
        .filter(|(_, p)| p.channel == channel)
        .map(|(i, _)| *i)
        .collect();
    let content: BTreeSet<&str> = ps
        .values()
        .filter(|p| p.channel == channel)
        .map(|p| p.content.as_str())
        .collect();
    if content.len() != 1 {
        return Err(Error::ProbeConfig(format!(
            "channel {channel:?} does not repeat one observation"
        )));
    }
    let mut report = ProbeReport::new(ProbeId::Habituation);
    let membership = workspace_by_tick(trace);
    let held = |t: Tick| {
        membership
            .iter()
            .find(|(tick, _)| *tick == t)
            .is_some_and(|(_, ids)| ids.iter().any(|i| repeated.contains(i)))
    };
    let present_first = held(1);
    let exit = (2..=trace_ticks(trace)).find(|t| !held(*t));
    report.metric("present_at_tick_1", indicator(present_first));
    if let Some(t) = exit {
        report.metric("exit_tick", t as f64);
        if let Some(ev) = trace
            .iter()
            .find(|e| e.tick == t && matches!(&e.event, Event::Discarded { id, .. } if repeated.contains(id)))
        {
            report.evidence.push(ev.seq);
        }
    }
    match bound {
        Some(b) => report.threshold("exit_bound", b as f64),
        None => report
            .notes
            .push("repeated stimulus never drops below the competitor".into()),
    }
    report.passed = present_first && matches!((exit, bound), (Some(e), Some(b)) if e <= b);
    Ok(report)
}

pub fn habituation_probe(spec: &HabituationSpec) -> Result<ProbeReport> {
    if spec.competitor.is_none() {
        return Err(Error::ProbeConfig(
            "habituation needs competing stimuli; without them the repeated percept keeps its slot".into(),
        ));
    }
    let trace = run(spec.config())?;
    analyze_habituation(&trace, &spec.repeated.channel, spec.bound())
}

// ---------------------------------------------------------------- files

/// A probe definition as shipped in a JSON file, tagged by `probe`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "snake_case")]
pub enum ProbeSpec {
    Rivalry(RivalrySpec),
    Blink(BlinkSpec),
    Breakthrough(BreakthroughSpec),
    Habituation(HabituationSpec),
}

impl ProbeSpec {
    pub fn id(&self) -> ProbeId {
        match self {
            ProbeSpec::Rivalry(_) => ProbeId::Rivalry,
            ProbeSpec::Blink(_) => ProbeId::Blink,
            ProbeSpec::Breakthrough(_) => ProbeId::Breakthrough,
            ProbeSpec::Habituation(_) => ProbeId::Habituation,
        }
    }

    /// Loads a probe file. Paths inside the embedded run configuration
    /// resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: ProbeSpec =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let run = spec.run_mut();
        run.base_dir = base;
        run.validate()?;
        Ok(spec)
    }

    pub fn run_config(&self) -> &RunConfig {
        match self {
            ProbeSpec::Rivalry(s) => &s.run,
            ProbeSpec::Blink(s) => &s.run,
            ProbeSpec::Breakthrough(s) => &s.run,
            ProbeSpec::Habituation(s) => &s.run,
        }
    }

    fn run_mut(&mut self) -> &mut RunConfig {
        match self {
            ProbeSpec::Rivalry(s) => &mut s.run,
            ProbeSpec::Blink(s) => &mut s.run,
            ProbeSpec::Breakthrough(s) => &mut s.run,
            ProbeSpec::Habituation(s) => &mut s.run,
        }
    }

    /// The probe definition shipped with the library.
    pub fn shipped(id: ProbeId) -> Self {
        let text = match id {
            ProbeId::Rivalry => include_str!("../fixtures/probes/rivalry.json"),
            ProbeId::Blink => include_str!("../fixtures/probes/blink.json"),
            ProbeId::Breakthrough => include_str!("../fixtures/probes/breakthrough.json"),
            ProbeId::Habituation => include_str!("../fixtures/probes/habituation.json"),
        };
        serde_json::from_str(text).expect("shipped probe definitions are valid")
    }

    /// Runs the probe's canned script(s) and analyses the result.
    pub fn execute(&self) -> Result<ProbeReport> {
        match self {
            ProbeSpec::Rivalry(s) => rivalry_probe(s),
            ProbeSpec::Blink(s) => blink_sweep(s),
            ProbeSpec::Breakthrough(s) => breakthrough_probe(s),
            ProbeSpec::Habituation(s) => habituation_probe(s),
        }
    }

    /// Analyses an existing trace of one run of this probe instead of re-running.
    pub fn analyze(&self, trace: &[TraceEvent]) -> Result<ProbeReport> {
        match self {
            ProbeSpec::Rivalry(s) => analyze_rivalry(trace, s.min_ticks),
            ProbeSpec::Blink(s) => {
                s.validate()?;
                analyze_blink(trace, &s.t2.channel, s.window())
            }
            ProbeSpec::Breakthrough(s) => Ok(match &s.intrusion {
                Some(i) => analyze_breakthrough(trace, &i.channel),
                None => analyze_breakthrough(&[], ""),
            }),
            ProbeSpec::Habituation(s) => analyze_habituation(trace, &s.repeated.channel, s.bound()),
        }
    }
}

use gwa_core::config::RunConfig;
use gwa_core::probes::{
    blink_probe, breakthrough_probe, habituation_probe, rivalry_probe, BlinkSpec, BreakthroughSpec, HabituationSpec,
    ProbeId, ProbeSpec, RivalrySpec, Stimulus,
};
use gwa_core::runtime::run;
use gwa_core::Error;
use serde_json::json;

fn rivalry_spec(left: f64, right: f64, ticks: u64, channels: &[&str], factor: f64) -> RivalrySpec {
    let mut schedule = Vec::new();
    for t in 1..=ticks {
        // Priorities trade places every ten ticks.
        let (l, r) = if (t - 1) / 10 % 2 == 0 {
            (left, right)
        } else {
            (right, left)
        };
        schedule.push(json!({"tick": t, "channel": "left", "text": "the figure is a vase",
            "priority": l, "key": "figure", "polarity": "pos"}));
        if channels.contains(&"right") {
            schedule.push(json!({"tick": t, "channel": "right", "text": "the figure is two faces",
                "priority": r, "key": "figure", "polarity": "neg"}));
        }
    }
    let run = json!({
        "ticks": ticks,
        "attention": {"habituation_factor": factor},
        "processor": {"mode": "scripted", "responses": {}},
        "environment": {"channels": channels, "schedule": schedule},
    });
    RivalrySpec {
        run: serde_json::from_value(run).unwrap(),
        min_ticks: 50,
    }
}

#[test]
fn alternating_rivals_flip_with_each_swap() {
    let r = rivalry_probe(&rivalry_spec(0.9, 0.1, 100, &["left", "right"], 0.95)).unwrap();
    assert_eq!(r.metrics["co_presence"], 0.0);
    assert!(r.metrics["flips"] >= 9.0, "{r}");
    assert!(r.passed);
}

#[test]
fn rivalry_holds_under_strong_habituation() {
    let r = rivalry_probe(&rivalry_spec(0.9, 0.1, 100, &["left", "right"], 0.5)).unwrap();
    assert_eq!(r.metrics["co_presence"], 0.0);
    assert!(r.metrics["flips"] >= 1.0, "{r}");
}

#[test]
fn equal_priority_rivals_never_share_the_workspace() {
    // Exact ties resolve the same way every tick, so nothing alternates.
    let r = rivalry_probe(&rivalry_spec(0.5, 0.5, 100, &["left", "right"], 0.5)).unwrap();
    assert_eq!(r.metrics["co_presence"], 0.0);
    assert_eq!(r.metrics["flips"], 0.0);
    assert!(!r.passed);
}

#[test]
fn single_channel_rivalry_is_a_configuration_error() {
    let err = rivalry_probe(&rivalry_spec(0.9, 0.1, 100, &["left"], 0.95)).unwrap_err();
    assert!(matches!(err, Error::ProbeConfig(_)), "{err}");
}

#[test]
fn short_rivalry_is_a_configuration_error() {
    let err = rivalry_probe(&rivalry_spec(0.9, 0.1, 20, &["left", "right"], 0.95)).unwrap_err();
    assert!(matches!(err, Error::ProbeConfig(_)), "{err}");
}

fn shipped_blink() -> BlinkSpec {
    match ProbeSpec::shipped(ProbeId::Blink) {
        ProbeSpec::Blink(s) => s,
        _ => unreachable!(),
    }
}

#[test]
fn blink_at_lag_one_keeps_t2_out() {
    let r = blink_probe(&shipped_blink(), 1).unwrap();
    assert_eq!(r.metrics["t2_admitted"], 0.0);
    assert!(r.passed);
}

#[test]
fn without_t1_t2_is_admitted_at_every_lag() {
    let spec = BlinkSpec {
        t1: None,
        ..shipped_blink()
    };
    for lag in [1, 2, 5, 10] {
        let r = blink_probe(&spec, lag).unwrap();
        assert_eq!(r.metrics["t2_admitted"], 1.0, "lag {lag}");
        assert!(r.passed);
    }
}

#[test]
fn blink_sweep_reports_every_lag() {
    let spec = shipped_blink();
    let r = ProbeSpec::Blink(spec.clone()).execute().unwrap();
    assert!(r.passed, "{r}");
    assert_eq!(r.thresholds["window"], 5.0);
    assert_eq!(r.metrics.len(), spec.lags.len());
}

fn shipped_breakthrough() -> BreakthroughSpec {
    match ProbeSpec::shipped(ProbeId::Breakthrough) {
        ProbeSpec::Breakthrough(s) => s,
        _ => unreachable!(),
    }
}

#[test]
fn faint_intrusion_loses_to_the_attended_channel() {
    let mut spec = shipped_breakthrough();
    spec.intrusion.as_mut().unwrap().priority = 0.01;
    spec.attended.truncate(3);
    let r = breakthrough_probe(&spec).unwrap();
    assert_eq!(r.metrics["admission_rate"], 0.0);
    assert!(!r.passed);
}

#[test]
fn no_intrusion_passes_vacuously() {
    let spec = BreakthroughSpec {
        intrusion: None,
        ..shipped_breakthrough()
    };
    let r = breakthrough_probe(&spec).unwrap();
    assert!(r.passed);
    assert!(r.metrics.is_empty());
}

fn shipped_habituation() -> HabituationSpec {
    match ProbeSpec::shipped(ProbeId::Habituation) {
        ProbeSpec::Habituation(s) => s,
        _ => unreachable!(),
    }
}

#[test]
fn habituation_without_competitors_is_not_applicable() {
    let spec = HabituationSpec {
        competitor: None,
        ..shipped_habituation()
    };
    assert!(matches!(habituation_probe(&spec).unwrap_err(), Error::ProbeConfig(_)));
}

#[test]
fn habituation_factor_one_is_rejected() {
    let text = r#"{"attention": {"habituation_factor": 1.0}, "processor": {"mode": "scripted", "responses": {}}}"#;
    assert!(matches!(
        RunConfig::parse(text, std::path::Path::new(".")),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn slower_habituation_exits_later() {
    let mut spec = shipped_habituation();
    spec.run.attention.habituation_factor = 0.8;
    // 0.9 · 0.8^(n−1) < 0.3 first at n = 6.
    assert_eq!(spec.bound(), Some(6));
    let r = habituation_probe(&spec).unwrap();
    assert_eq!(r.metrics["exit_tick"], 6.0, "{r}");
    assert!(r.passed);
}

#[test]
fn analysing_a_saved_trace_matches_running() {
    let spec = ProbeSpec::shipped(ProbeId::Rivalry);
    let trace = run(spec.run_config().clone()).unwrap();
    assert_eq!(spec.analyze(&trace).unwrap(), spec.execute().unwrap());

    let h = shipped_habituation();
    let trace = run(h.config()).unwrap();
    let from_trace = ProbeSpec::Habituation(h.clone()).analyze(&trace).unwrap();
    assert_eq!(from_trace, habituation_probe(&h).unwrap());
}

#[test]
fn probe_reports_serialize() {
    let r = ProbeSpec::shipped(ProbeId::Habituation).execute().unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(v["probe"], "habituation");
    assert_eq!(v["passed"], true);
    assert!(!v["evidence"].as_array().unwrap().is_empty());
    assert!(v["notes"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n.as_str().unwrap().contains("not taken from human data")));
}

#[test]
fn stimulus_channel_defaults_to_main() {
    let s: Stimulus = serde_json::from_str(r#"{"text": "x", "priority": 0.5}"#).unwrap();
    assert_eq!(s.channel, "main");
}

//! Cycle-level timing checked against an independent cost model.
//!
//! The model charges each command the cycles between its first execute cycle
//! and its last, on an idle 2-cycle bus. The next command starts one cycle
//! after the previous one finishes, and the first starts two cycles after the
//! triggering event (sample, then fetch).

use proptest::prelude::*;

use pels::asm::assemble_str;
use pels::bus::BusKind;
use pels::scenario::Scenario;
use pels::trace::{GrantStatus, TraceLevel, TraceRecord};

const TRANSFER: u64 = 2;

#[derive(Debug, Clone)]
enum Op {
    Write(u32),
    Set(u32),
    Clear(u32),
    Toggle(u32),
    Capture(u32),
    Wait(u32),
    Action(u32),
}

impl Op {
    fn source(&self) -> String {
        match self {
            Op::Write(v) => format!("write 0, {v:#x}"),
            Op::Set(v) => format!("set 0, {v:#x}"),
            Op::Clear(v) => format!("clear 0, {v:#x}"),
            Op::Toggle(v) => format!("toggle 0, {v:#x}"),
            Op::Capture(v) => format!("capture 0, {v:#x}"),
            Op::Wait(n) => format!("wait {n}"),
            Op::Action(b) => format!("action grp0.toggle, {b:#x}"),
        }
    }

    /// Cycles from first to last execute cycle.
    fn span(&self) -> u64 {
        match self {
            Op::Action(_) => 0,
            Op::Write(_) | Op::Capture(_) => TRANSFER,
            // read, one modify cycle, then write
            Op::Set(_) | Op::Clear(_) | Op::Toggle(_) => TRANSFER + 1 + TRANSFER,
            Op::Wait(n) => u64::from(*n),
        }
    }
}

fn model_latency(ops: &[Op]) -> u64 {
    if ops.is_empty() {
        return 1;
    }
    let mut start = 2;
    let mut finish = 0;
    for op in ops {
        finish = start + op.span();
        start = finish + 1;
    }
    finish
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        any::<u32>().prop_map(Op::Write),
        any::<u32>().prop_map(Op::Set),
        any::<u32>().prop_map(Op::Clear),
        any::<u32>().prop_map(Op::Toggle),
        any::<u32>().prop_map(Op::Capture),
        (0u32..6).prop_map(Op::Wait),
        (0u32..16).prop_map(Op::Action),
    ]
}

fn scenario(program: &str, stimuli: &str) -> Scenario {
    let json = format!(
        r#"{{ "name": "timing",
             "peripherals": [{{ "name": "gpio", "type": "gpio", "base": "0x1A10_1000" }}],
             "links": [{{ "scm_lines": 16, "mask": [0], "base": "0x1A10_1000", "program": {} }}],
             "stimuli": {stimuli} }}"#,
        serde_json::to_string(program).unwrap()
    );
    Scenario::from_json(&json, "timing").unwrap()
}

const ONE_EVENT: &str = r#"[{ "cycle": 0, "line": 0, "level": true }]"#;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn straight_line_latency_matches_model(ops in prop::collection::vec(op(), 0..10)) {
        let src: Vec<String> = ops.iter().map(Op::source).collect();
        let report = scenario(&src.join("\n"), ONE_EVENT).run(TraceLevel::Off).unwrap();
        prop_assert!(!report.has_errors());
        prop_assert_eq!(&report.links[0].latencies, &vec![model_latency(&ops)]);

        let reads = ops.iter().filter(|o| !matches!(o, Op::Write(_) | Op::Wait(_) | Op::Action(_))).count() as u64;
        let writes = ops.iter().filter(|o| matches!(o, Op::Write(_) | Op::Set(_) | Op::Clear(_) | Op::Toggle(_))).count() as u64;
        prop_assert_eq!(report.links[0].bus_reads, reads);
        prop_assert_eq!(report.links[0].bus_writes, writes);
    }

    #[test]
    fn loop_body_runs_count_plus_one_times(body in prop::collection::vec(op(), 1..4), count in 0u32..5) {
        let mut src: Vec<String> = body.iter().map(Op::source).collect();
        src[0] = format!("top: {}", src[0]);
        src.push(format!("loop {count}, top"));
        let report = scenario(&src.join("\n"), ONE_EVENT).run(TraceLevel::Off).unwrap();

        let passes = u64::from(count) + 1;
        // each pass runs the body then spends one cycle on the loop command
        let per_pass = body.iter().map(|o| o.span() + 1).sum::<u64>() + 1;
        prop_assert_eq!(&report.links[0].latencies, &vec![1 + passes * per_pass]);
        prop_assert_eq!(report.links[0].commands_executed, passes * (body.len() as u64 + 1));
    }
}

#[test]
fn branch_taken_skips_the_write() {
    // GPIO OUT resets to zero, so `capture` loads 0 and `eq 0` holds
    let report = scenario(
        "capture 0, 0xFF\njif eq, 0, end\nwrite 0, 1\nend: action grp0.set, 1",
        ONE_EVENT,
    )
    .run(TraceLevel::Off)
    .unwrap();
    assert_eq!(report.links[0].bus_writes, 0);
    assert_eq!(report.links[0].latencies, [2 + TRANSFER + 1 + 1]);

    let report = scenario(
        "capture 0, 0xFF\njif ne, 0, end\nwrite 0, 1\nend: action grp0.set, 1",
        ONE_EVENT,
    )
    .run(TraceLevel::Off)
    .unwrap();
    assert_eq!(report.links[0].bus_writes, 1);
    assert_eq!(report.links[0].latencies, [2 + TRANSFER + 1 + TRANSFER + 1 + 1]);
}

#[test]
fn queued_events_run_back_to_back() {
    // three pulses one cycle apart: the second and third wait in the FIFO
    let stimuli = r#"[{ "cycle": 0, "line": 0, "pulse": true },
                      { "cycle": 1, "line": 0, "pulse": true },
                      { "cycle": 2, "line": 0, "pulse": true }]"#;
    let report = scenario("set 0, 1", stimuli).run(TraceLevel::Full).unwrap();
    let link = &report.links[0];
    assert_eq!(link.triggers_accepted, 3);
    assert_eq!(link.triggers_dropped, 0);
    // each run takes 7 cycles from its own start; later ones also wait for the previous
    let done: Vec<u64> = report
        .trace
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Complete { cycle, .. } => Some(*cycle),
            _ => None,
        })
        .collect();
    assert_eq!(done[0], 7);
    assert!(done.windows(2).all(|w| w[1] - w[0] >= 6), "{done:?}");
    assert_eq!(link.latencies[0], 7);
    assert_eq!(link.latencies.len(), 3);
}

#[test]
fn read_is_granted_in_the_execute_cycle() {
    let report = scenario("set 0, 1", ONE_EVENT).run(TraceLevel::Full).unwrap();
    let grants: Vec<(u64, BusKind)> = report
        .trace
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Bus {
                cycle,
                kind,
                status: GrantStatus::Granted,
                ..
            } => Some((*cycle, *kind)),
            _ => None,
        })
        .collect();
    assert_eq!(grants, [(2, BusKind::Read), (5, BusKind::Write)]);
}

#[test]
fn model_agrees_with_the_fixed_points() {
    assert_eq!(model_latency(&[Op::Action(1)]), 2);
    assert_eq!(model_latency(&[Op::Set(1)]), 7);
    assert_eq!(model_latency(&[Op::Write(1)]), 4);
    assert_eq!(model_latency(&[]), 1);
    assert!(assemble_str("").unwrap().is_empty());
}

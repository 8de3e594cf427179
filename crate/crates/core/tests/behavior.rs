use toolrl_core::behavior::synth::{fixture_suite, scenario, Scenario};
use toolrl_core::behavior::{classify_episode, report, summarize, Rules, Tag};
use toolrl_core::physics::ToolKind;

#[test]
fn fixture_suite_agrees_with_hand_labels() {
    let suite = fixture_suite();
    assert_eq!(suite.len(), 60);
    let rules = Rules::default();
    let mut agree = 0;
    for (log, expected) in &suite {
        log.validate().unwrap();
        let got = classify_episode(log, &rules);
        if &got.tags == expected {
            agree += 1;
        } else {
            eprintln!("episode {} ({:?}): expected {expected:?}, got {:?}", log.header.episode, log.header.tool_kind, got.tags);
        }
    }
    let rate = agree as f64 / suite.len() as f64;
    assert!(rate >= 0.95, "agreement {rate}");
}

#[test]
fn release_then_contact_is_a_throw() {
    for kind in ToolKind::ALL {
        let log = scenario(Scenario::Throwing, kind, true, 7);
        let label = classify_episode(&log, &Rules::default());
        assert_eq!(label.tags, vec![Tag::Throwing], "{kind:?}");
        let e = label.evidence[0];
        assert!(e.value > Rules::default().throw_energy);
        assert!(!log.steps[e.start as usize - 1].holding);
        assert!(!log.steps[e.end as usize - 1].contacts.is_empty());
    }
}

#[test]
fn pushing_away_then_succeeding_is_a_correction() {
    let log = scenario(Scenario::Correcting, ToolKind::I, false, 8);
    let label = classify_episode(&log, &Rules::default());
    assert_eq!(label.tags, vec![Tag::Correcting]);
    assert!(label.evidence[0].value > 0.05);
    // A stricter threshold turns the same episode into Other.
    let strict = Rules {
        correct_distance: 0.2,
        ..Rules::default()
    };
    assert_eq!(classify_episode(&log, &strict).tags, vec![Tag::Other]);
}

#[test]
fn maneuver_takes_precedence_over_act_like_i() {
    let log = scenario(Scenario::ManeuverThenHandle, ToolKind::LLeft, true, 9);
    let label = classify_episode(&log, &Rules::default());
    assert!(label.has(Tag::Maneuver) && !label.has(Tag::ActLikeI));
    for (log, _) in fixture_suite() {
        let l = classify_episode(&log, &Rules::default());
        assert!(!(l.has(Tag::Maneuver) && l.has(Tag::ActLikeI)));
        if !log.header.success {
            assert!(l.tags.is_empty());
        }
        assert!(l.tags.iter().all(|t| t.applies_to(log.header.tool_kind)));
    }
}

#[test]
fn hitting_threshold_is_respected() {
    let log = scenario(Scenario::Hitting, ToolKind::T, true, 10);
    let rules = Rules::default();
    assert_eq!(classify_episode(&log, &rules).tags, vec![Tag::Hitting]);
    let slow = Rules {
        hit_speed: 5.0,
        ..rules
    };
    assert_eq!(classify_episode(&log, &slow).tags, vec![Tag::Other]);
}

#[test]
fn success_rate_counts_exactly() {
    let mut logs = Vec::new();
    for i in 0..100 {
        let s = if i < 62 { Scenario::Other } else { Scenario::Failure };
        logs.push(scenario(s, ToolKind::T, i % 3 == 0, 100 + i));
    }
    let (_, stats) = summarize(&logs, &Rules::default());
    let t = &stats.tools[0];
    assert_eq!((t.tool_kind, t.episodes, t.successes), (ToolKind::T, 100, 62));
    assert_eq!(t.success_rate, 62.0);
    let mean = logs.iter().map(|l| l.header.length as f64).sum::<f64>() / 100.0;
    assert!((t.mean_length - mean).abs() < 1e-12);
    let other = stats.behaviors.iter().find(|b| b.tool_kind == ToolKind::T && b.tag == Tag::Other).unwrap();
    assert_eq!(other.count, 62);
    assert_eq!(other.frequency, 100.0);
}

#[test]
fn all_failures_give_zero_frequencies() {
    let logs: Vec<_> = (0..8).map(|i| scenario(Scenario::Failure, ToolKind::ALL[i % 4], i % 2 == 0, i as u64)).collect();
    let (labels, stats) = summarize(&logs, &Rules::default());
    assert!(labels.iter().all(|l| l.tags.is_empty()));
    assert!(stats.tools.iter().all(|t| t.success_rate == 0.0));
    assert!(stats.behaviors.iter().all(|b| b.count == 0 && b.frequency == 0.0));
    let text = report(&stats);
    assert!(text.contains("Hook-Drag"));
    assert!(text.contains("0.00"));
}

#[test]
fn splits_partition_and_report_totals_recompute() {
    let logs: Vec<_> = fixture_suite().into_iter().map(|(l, _)| l).collect();
    let (_, stats) = summarize(&logs, &Rules::default());
    for b in &stats.behaviors {
        assert_eq!(b.upper + b.lower, b.count);
        assert!((b.upper_frequency + b.lower_frequency - b.frequency).abs() < 1e-9);
        assert!((0.0..=100.0).contains(&b.frequency));
    }
    // Parse each behavior table back and check its totals row.
    let text = report(&stats);
    let mut sums = [0u32; 3];
    let mut in_table = false;
    let mut tables = 0;
    for line in text.lines() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.first() == Some(&"behavior") {
            in_table = true;
            sums = [0; 3];
        } else if in_table && cols.first() == Some(&"total") {
            let printed: Vec<u32> = cols[1..4].iter().map(|c| c.parse().unwrap()).collect();
            assert_eq!(printed, sums.to_vec());
            in_table = false;
            tables += 1;
        } else if in_table {
            for k in 0..3 {
                sums[k] += cols[k + 1].parse::<u32>().unwrap();
            }
        }
    }
    assert_eq!(tables, 4);
}

#[test]
fn classification_is_deterministic_and_read_only() {
    let logs: Vec<_> = fixture_suite().into_iter().map(|(l, _)| l).collect();
    let before = logs.clone();
    let a = summarize(&logs, &Rules::default());
    let b = summarize(&logs, &Rules::default());
    assert_eq!(a, b);
    assert_eq!(logs, before);
}


use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bhikar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bhikar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn trace_is_reproducible() {
    let a = bhikar(&["trace", "--players", "2", "--decks", "1", "--seed", "5"]);
    let b = bhikar(&["trace", "--players", "2", "--decks", "1", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn jsonl_trace_accounts_for_every_turn() {
    for seed in ["1", "2", "3"] {
        let out = bhikar(&[
            "trace",
            "--players",
            "4",
            "--decks",
            "2",
            "--seed",
            seed,
            "--format",
            "jsonl",
        ]);
        assert_eq!(out.status.code(), Some(0));
        let events: Vec<Value> = String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let plays = events
            .iter()
            .filter(|e| e["event"] == "card_played")
            .count() as u64;
        let last = events.last().unwrap();
        assert_eq!(last["event"], "game_ended");
        assert_eq!(last["total_turns"].as_u64(), Some(plays));
        assert!(plays >= 104);
        assert_eq!(
            events.iter().filter(|e| e["event"] == "game_ended").count(),
            1
        );

        let mut saw_hand = false;
        for (i, e) in events.iter().enumerate() {
            if e["event"] == "hand_won" {
                saw_hand = true;
                let before = &events[i - 1];
                assert_eq!(before["event"], "card_played");
                assert_eq!(before["player"], e["player"]);
                assert_eq!(before["turn"], e["turn"]);
                assert!(e["pile_size"].as_u64().unwrap() >= 2);
            }
        }
        assert!(saw_hand);
    }
}

#[test]
fn text_trace_last_line_matches_play_count() {
    let out = bhikar(&["trace", "--players", "3", "--decks", "1", "--seed", "8"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let plays = text.lines().filter(|l| l.contains(" plays ")).count();
    let last = text.lines().last().unwrap();
    assert!(last.ends_with(&format!("after {plays} turns")), "{last}");
}

#[test]
fn trace_matches_first_simulated_game() {
    // `trace --seed s` replays game 0 of `simulate --seed s`.
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("one");
    let sim = bhikar(&[
        "simulate",
        "--players",
        "3",
        "--decks",
        "2",
        "--games",
        "1",
        "--seed",
        "21",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(sim.status.code(), Some(0));
    let summary = read_json(&out.join("summary.json"));

    let trace = bhikar(&[
        "trace",
        "--players",
        "3",
        "--decks",
        "2",
        "--seed",
        "21",
        "--format",
        "jsonl",
    ]);
    let last: Value = serde_json::from_str(
        String::from_utf8(trace.stdout)
            .unwrap()
            .lines()
            .last()
            .unwrap(),
    )
    .unwrap();
    assert_eq!(summary["min_turns"], last["total_turns"]);
    let winner = last["winner"].as_u64().unwrap() as usize;
    assert_eq!(summary["game_wins"][winner], 1);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["trace", "--players", "1", "--decks", "1"],
        vec!["trace", "--players", "2"],
        vec!["simulate", "--players", "2", "--decks", "0", "--games", "5"],
        vec!["simulate", "--players", "2", "--decks", "1", "--games", "0"],
        vec![
            "simulate",
            "--players",
            "2",
            "--decks",
            "1",
            "--workers",
            "0",
        ],
        vec![
            "simulate",
            "--players",
            "2",
            "--decks",
            "1",
            "--hand-bin-width",
            "0",
        ],
        vec!["sweep", "--players", "", "--games", "5"],
        vec!["trace", "--players", "2", "--decks", "1", "--format", "xml"],
    ] {
        let out = bhikar(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unwritable_output_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = bhikar(&[
        "simulate",
        "--players",
        "2",
        "--decks",
        "1",
        "--games",
        "10",
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn aborts_exit_3_and_still_write_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("capped");
    let out = bhikar(&[
        "simulate",
        "--players",
        "2",
        "--decks",
        "1",
        "--games",
        "20",
        "--turn-cap",
        "60",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let summary = read_json(&dir.join("summary.json"));
    assert!(summary["aborted"].as_u64().unwrap() > 0);
    assert_eq!(summary["turn_cap"], 60);

    let trace = bhikar(&[
        "trace",
        "--players",
        "2",
        "--decks",
        "1",
        "--turn-cap",
        "10",
    ]);
    assert_eq!(trace.status.code(), Some(3));
}

#[test]
fn simulate_writes_a_consistent_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    let out = bhikar(&[
        "simulate",
        "--players",
        "3",
        "--decks",
        "2",
        "--games",
        "5000",
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let s = read_json(&dir.join("summary.json"));
    assert_eq!(s["metadata"]["master_seed"], 3);
    assert_eq!(s["metadata"]["seed_source"], "fixed");
    assert!(s["metadata"]["generator"]
        .as_str()
        .unwrap()
        .contains("xoshiro256++"));
    assert_eq!(s["games"], 5000);
    assert_eq!(s["aborted"], 0);
    let game_wins: u64 = s["game_wins"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(game_wins, 5000);
    let mean = s["mean_turns"].as_f64().unwrap();
    let sum = s["total_turns_sum"].as_u64().unwrap();
    assert_eq!(mean, sum as f64 / 5000.0);
    for key in ["hand_win_probability", "game_win_probability"] {
        let total: f64 = s[key]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "{key}");
    }

    for (file, width, total) in [
        ("turns_hist.csv", 100u64, 5000u64),
        ("hand_sizes_hist.csv", 5, s["total_hands"].as_u64().unwrap()),
    ] {
        let (header, rows) = csv_rows(&dir.join(file));
        assert_eq!(header, ["bin_start", "bin_end", "count", "probability"]);
        let mut prev = None;
        let mut counted = 0;
        let mut mass = 0.0;
        for row in &rows {
            let start: u64 = row[0].parse().unwrap();
            let end: u64 = row[1].parse().unwrap();
            let count: u64 = row[2].parse().unwrap();
            let p: f64 = row[3].parse().unwrap();
            assert_eq!(end - start, width);
            assert_eq!(start % width, 0);
            assert!(prev.is_none_or(|q| q < start));
            prev = Some(start);
            assert_eq!(p, count as f64 / total as f64);
            counted += count;
            mass += p;
        }
        assert_eq!(counted, total, "{file}");
        assert!((mass - 1.0).abs() < 1e-9, "{file}");
    }
}

#[test]
fn simulate_two_players_one_deck_reaches_52() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("n2k1");
    let out = bhikar(&[
        "simulate",
        "--players",
        "2",
        "--decks",
        "1",
        "--games",
        "1000000",
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_json(&dir.join("summary.json"))["min_turns"], 52);
}

#[test]
fn custom_bin_widths_are_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("bins");
    let out = bhikar(&[
        "simulate",
        "--players",
        "2",
        "--decks",
        "1",
        "--games",
        "500",
        "--turn-bin-width",
        "10",
        "--hand-bin-width",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (_, rows) = csv_rows(&dir.join("hand_sizes_hist.csv"));
    assert_eq!(rows[0][0], "2");
    assert_eq!(rows[0][1], "3");
    let (_, rows) = csv_rows(&dir.join("turns_hist.csv"));
    assert_eq!(rows[0][0], "50");
}

#[test]
fn simulate_is_worker_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for w in ["1", "8"] {
        let dir = tmp.path().join(format!("w{w}"));
        let out = bhikar(&[
            "simulate",
            "--players",
            "4",
            "--decks",
            "3",
            "--games",
            "2000",
            "--seed",
            "12",
            "--workers",
            w,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        files.push(
            ["summary.json", "turns_hist.csv", "hand_sizes_hist.csv"]
                .map(|f| fs::read(dir.join(f)).unwrap()),
        );
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn entropy_seed_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("entropy");
    let out = bhikar(&[
        "simulate",
        "--players",
        "2",
        "--decks",
        "1",
        "--games",
        "50",
        "--entropy-seed",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let first = read_json(&dir.join("summary.json"));
    assert_eq!(first["metadata"]["seed_source"], "entropy");
    let seed = first["metadata"]["master_seed"]
        .as_u64()
        .unwrap()
        .to_string();

    let replay = tmp.path().join("replay");
    bhikar(&[
        "simulate",
        "--players",
        "2",
        "--decks",
        "1",
        "--games",
        "50",
        "--seed",
        &seed,
        "--out",
        replay.to_str().unwrap(),
    ]);
    let second = read_json(&replay.join("summary.json"));
    assert_eq!(first["game_wins"], second["game_wins"]);
    assert_eq!(first["total_turns_sum"], second["total_turns_sum"]);
}

#[test]
fn default_sweep_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("grid");
    let out = bhikar(&[
        "sweep",
        "--games",
        "1000",
        "--seed",
        "4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let subdirs = fs::read_dir(&dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .count();
    assert_eq!(subdirs, 20);
    for n in 2..=5 {
        for k in 1..=5 {
            assert!(dir.join(format!("N{n}_K{k}/summary.json")).exists());
        }
    }

    let (header, rows) = csv_rows(&dir.join("grid_summary.csv"));
    assert_eq!(
        header,
        [
            "players",
            "decks",
            "games",
            "min_turns",
            "max_turns",
            "mean_turns",
            "aborts",
            "win_prob_p0",
            "win_prob_p1",
            "win_prob_p2",
            "win_prob_p3",
            "win_prob_p4",
        ]
    );
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[0][..2], ["2", "1"]);
    assert_eq!(rows[1][..2], ["2", "2"]);
    assert_eq!(rows[5][..2], ["3", "1"]);
    for row in &rows {
        assert_eq!(row[2], "1000");
        assert_eq!(row[6], "0");
        let n: usize = row[0].parse().unwrap();
        let probs: f64 = row[7..7 + n]
            .iter()
            .map(|v| v.parse::<f64>().unwrap())
            .sum();
        assert!((probs - 1.0).abs() < 1e-9);
        assert!(row[7 + n..].iter().all(String::is_empty));
    }
    let n3_means: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] == "3")
        .map(|r| r[5].parse().unwrap())
        .collect();
    assert!(n3_means.windows(2).all(|w| w[0] <= w[1]), "{n3_means:?}");

    let meta = read_json(&dir.join("sweep.json"));
    assert_eq!(meta["cells"].as_array().unwrap().len(), 20);
    assert_eq!(meta["cells"][7]["directory"], "N3_K3");
    assert_eq!(meta["metadata"]["master_seed"], 4);

    let cell = read_json(&dir.join("N3_K3/summary.json"));
    assert_eq!(cell["cell_index"], 7);

    // Same seed again: byte-identical tree.
    let again = tmp.path().join("grid2");
    bhikar(&[
        "sweep",
        "--games",
        "1000",
        "--seed",
        "4",
        "--out",
        again.to_str().unwrap(),
    ]);
    for name in [
        "grid_summary.csv",
        "sweep.json",
        "N4_K5/turns_hist.csv",
        "N2_K1/summary.json",
    ] {
        assert_eq!(
            fs::read(dir.join(name)).unwrap(),
            fs::read(again.join(name)).unwrap()
        );
    }
}

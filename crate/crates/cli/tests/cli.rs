use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convexsem")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn reduce_transitive_sentence() {
    let o = run(&["reduce", "n, n^r s n^l, n", "--target", "s"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("cups (0,1) (3,4)"), "{out}");
}

#[test]
fn reduce_adjective_noun() {
    let o = run(&["reduce", "n n^l, n", "--target", "n"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("cups (1,2)"));
}

#[test]
fn reduce_failure_exits_two() {
    let o = run(&["reduce", "n", "--target", "s"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn reduce_unknown_atom_exits_one() {
    assert_eq!(run(&["reduce", "q", "--target", "s"]).status.code(), Some(1));
}

#[test]
fn reduce_json_is_stable() {
    let a = run(&["reduce", "n, n^r s n^l, n", "--format", "json"]);
    let b = run(&["reduce", "n, n^r s n^l, n", "--format", "json"]);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["cups"], serde_json::json!([[0, 1], [3, 4]]));
}

#[test]
fn eval_bananas_taste_sweet() {
    let o = run(&["eval", "bananas taste sweet"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("members: {(1,0), (1,1)}"), "{out}");
    assert!(out.contains("labels: positive"), "{out}");
}

#[test]
fn eval_json_output() {
    let o = run(&["eval", "beer tastes sweet", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["finite_enumeration"], serde_json::json!([["(0,1)"]]));
    assert_eq!(v["result"]["labels"], serde_json::json!(["negative_and_surprising"]));
    assert_eq!(v["target"], "s");
    let again = run(&["eval", "beer tastes sweet", "--format", "json"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn eval_unknown_word_exits_one() {
    let o = run(&["eval", "purple bananas taste sweet"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("purple"));
}

#[test]
fn eval_without_reduction_exits_two() {
    assert_eq!(run(&["eval", "bananas taste"]).status.code(), Some(2));
}

const YELLOW_BANANA: &str = "0.8,0.75,0.05 | t_sweet | 0.3 | 0.1";

#[test]
fn member_yes_and_no() {
    let o = run(&["member", "--relation", "yellow banana", YELLOW_BANANA]);
    assert_eq!(stdout(&o).trim(), "yes");
    let o = run(&["member", "--relation", "yellow banana", "0.8,0.75,0.5 | t_sweet | 0.3 | 0.1"]);
    let out = stdout(&o);
    assert!(out.starts_with("no"), "{out}");
    assert!(out.contains("colour.B <= 0.1"), "{out}");
}

#[test]
fn member_of_a_property() {
    let o = run(&["member", "--relation", "yellow_banana", YELLOW_BANANA]);
    assert_eq!(stdout(&o).trim(), "yes");
}

#[test]
fn member_of_an_empty_relation() {
    let o = run(&["member", "--relation", "banana & beer", YELLOW_BANANA]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "no: the relation is empty");
}

#[test]
fn member_rejects_malformed_points() {
    assert_eq!(run(&["member", "--relation", "banana", "0.8,0.75 | t_sweet"]).status.code(), Some(1));
}

#[test]
fn sample_is_seeded() {
    let args = ["sample", "Cathy moves to the living room", "--n", "4", "--seed", "3"];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, run(&args).stdout);
    assert_eq!(stdout(&a).lines().count(), 4);
    let other = run(&["sample", "Cathy moves to the living room", "--n", "4", "--seed", "4"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn sample_zero_is_empty() {
    let o = run(&["sample", "Cathy moves to the living room", "--n", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn sample_json_has_trajectories() {
    let o = run(&["sample", "Cathy moves to the living room", "--n", "2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn sample_exit_codes() {
    // no path factor
    assert_eq!(run(&["sample", "bananas taste sweet", "--world", "food"]).status.code(), Some(1));
    // rooms never move
    assert_eq!(run(&["sample", "the kitchen moves to the living room"]).status.code(), Some(2));
}

#[test]
fn check_food_world_passes() {
    let o = run(&["check", "--world", "food", "--suite", "golden"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 5, "{out}");
    assert!(out.lines().all(|l| l.starts_with("pass")));
}

#[test]
fn check_snakes_and_convexity() {
    let o = run(&["check", "--suite", "snakes"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("food_tree"));
    let o = run(&["check", "--suite", "convexity", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let taste = v.as_array().unwrap().iter().find(|l| l["name"] == "taste").unwrap();
    assert!(taste["detail"].as_str().unwrap().starts_with("assumed"));
}

#[test]
fn check_robot_golden() {
    let o = run(&["check", "--world", "robot", "--suite", "golden"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn worlds_are_found_on_the_search_path() {
    let dir = std::env::temp_dir().join(format!("convexsem-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let doc = run(&["world", "food", "--document"]);
    assert_eq!(doc.status.code(), Some(0));
    std::fs::write(dir.join("pantry.world"), &doc.stdout).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_convexsem"))
        .args(["eval", "bananas taste sweet", "--world", "pantry"])
        .env("CONVEXSEM_WORLD_PATH", &dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("{(1,0), (1,1)}"));
    let missing = run(&["eval", "bananas taste sweet", "--world", "pantry-that-is-not-there"]);
    assert_eq!(missing.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn broken_world_files_are_reported() {
    let dir = std::env::temp_dir().join(format!("convexsem-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.world");
    std::fs::write(&path, "[types]\nn = c\n\n[domains]\nc = box x:[0,1]\n\n[words]\nthing : n = nothing\n").unwrap();
    let o = run(&["world", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nothing"));
    std::fs::remove_dir_all(&dir).ok();
}

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn pconvex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pconvex")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    pconvex(args).status.code().unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = pconvex(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn result<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == name)
        .unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pconvex-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn audit_reports_known_verdicts() {
    let exp = json(&["audit", "--phi", "exp:a=2.71828182845904523536"]);
    let sq = result(&exp, "superquadratic");
    assert_eq!(sq["verdict"], "fails");
    assert_eq!(sq["witness"]["point"].as_array().unwrap().len(), 2);
    assert!(sq["margin"].as_f64().unwrap() < 0.0);
    assert_eq!(exp["results"].as_array().unwrap().len(), 13);

    let cube = json(&["audit", "--phi", "power:p=3"]);
    assert_eq!(result(&cube, "superquadratic")["verdict"], "holds-on-grid");

    let rational = json(&["audit", "--phi", "expr:t^3/(t+1)"]);
    assert_eq!(result(&rational, "ratio_superadditive")["verdict"], "holds-on-grid");
}

#[test]
fn certify_lists_routes() {
    let routes = |args: &[&str]| {
        let mut full = vec!["certify"];
        full.extend_from_slice(args);
        let rep = json(&full);
        let c = &rep["results"][0];
        let names = |k: &str| -> Vec<String> {
            c[k].as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_str().unwrap().to_string())
                .collect()
        };
        (names("paranorm_routes"), names("uc_routes"))
    };
    let (p, u) = routes(&["--phi", "exp:a=e", "--weights", "1,1"]);
    assert_eq!(p, ["Lemma3-Mulholland"]);
    assert!(u.contains(&"Thm11-strict-convexity".to_string()) && u.contains(&"Thm5-exact".to_string()));
    assert!(!u.contains(&"Thm1-superquadratic".to_string()));

    let (p, u) = routes(&["--phi", "power:p=2", "--weights", "1,1"]);
    assert!(p.contains(&"Lemma3-Mulholland".to_string()));
    assert!(u.contains(&"Thm1-superquadratic".to_string()) && u.contains(&"Thm11-strict-convexity".to_string()));

    let (p, u) = routes(&["--phi", "power:p=3", "--weights", "0.5,0.3"]);
    assert!(p.contains(&"Lemma1-F-concave".to_string()));
    assert!(u.contains(&"Thm1-superquadratic".to_string()));
}

#[test]
fn modulus_table_values() {
    let rep = json(&[
        "modulus",
        "--phi",
        "power:p=2",
        "--method",
        "eA",
        "--r",
        "1",
        "--eps",
        "1",
    ]);
    let d = rep["results"][0]["delta"].as_f64().unwrap();
    assert!((d - (1.0 - 3f64.sqrt() / 2.0)).abs() < 1e-15);

    let rep = json(&[
        "modulus",
        "--phi",
        "exp:a=e",
        "--method",
        "thm5",
        "--r",
        "1",
        "--eps",
        "0.1:1.9:19",
    ]);
    let col: Vec<f64> = rep["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["delta"].as_f64().unwrap())
        .collect();
    assert_eq!(col.len(), 19);
    assert!(col.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn psi_transform_table() {
    let rep = json(&[
        "modulus",
        "--phi",
        "power:p=2",
        "--method",
        "psi",
        "--psi",
        "expr:t^0.5",
        "--r",
        "1",
        "--eps",
        "0.5",
    ]);
    let d = rep["results"][0]["delta"].as_f64().unwrap();
    assert!(d > 0.0 && d < 1.0);
    assert_eq!(rep["results"][0]["method"], "psi-transform");
    assert_eq!(
        code(&[
            "modulus",
            "--phi",
            "power:p=2",
            "--method",
            "psi",
            "--psi",
            "power:p=2",
            "--r",
            "1",
            "--eps",
            "0.5"
        ]),
        3
    );
    assert_eq!(
        code(&[
            "modulus",
            "--phi",
            "power:p=2",
            "--method",
            "psi",
            "--r",
            "1",
            "--eps",
            "0.5"
        ]),
        2
    );
}

#[test]
fn csv_columns() {
    let out = pconvex(&[
        "modulus",
        "--phi",
        "power:p=1.5",
        "--method",
        "eF",
        "--r",
        "1,2",
        "--eps",
        "0.5",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "r,eps,method,delta,residual");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[2], "eF");
    assert!(!row[4].is_empty());

    let out = pconvex(&[
        "verify",
        "--phi",
        "power:p=3",
        "--method",
        "eA",
        "--r",
        "1",
        "--eps",
        "0.5",
        "--samples",
        "500",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "r,eps,delta_theory,delta_empirical,violation_flag,x1,x2,y1,y2"
    );
}

#[test]
fn exit_codes() {
    // input errors
    assert_eq!(code(&["audit", "--phi", "power:p=0.5"]), 2);
    assert_eq!(code(&["audit", "--phi", "expr:1-t"]), 2);
    assert_eq!(code(&["audit", "--phi", "power:p=2", "--grid", "5:1:10:log"]), 2);
    assert_eq!(code(&["certify", "--phi", "power:p=2", "--weights", "1,-1"]), 2);
    assert_eq!(
        code(&[
            "modulus",
            "--phi",
            "power:p=2",
            "--method",
            "eA",
            "--r",
            "1",
            "--eps",
            "3"
        ]),
        2
    );
    assert_eq!(
        code(&[
            "modulus",
            "--phi",
            "power:p=2",
            "--method",
            "nope",
            "--r",
            "1",
            "--eps",
            "1"
        ]),
        2
    );
    assert_eq!(code(&["ball", "--phi", "power:p=2", "--n", "3"]), 2);
    assert_eq!(code(&["ball", "--phi", "power:p=2", "--weights", "1,1,1"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    // route unavailable
    assert_eq!(
        code(&[
            "modulus",
            "--phi",
            "power:p=1",
            "--method",
            "eF",
            "--r",
            "1",
            "--eps",
            "1"
        ]),
        3
    );
    assert_eq!(
        code(&["modulus", "--phi", "exp:a=e", "--method", "eA", "--r", "1", "--eps", "1"]),
        3
    );
    assert_eq!(
        code(&[
            "modulus",
            "--phi",
            "power:p=2",
            "--method",
            "thm5",
            "--r",
            "1",
            "--eps",
            "1"
        ]),
        3
    );
    assert_eq!(
        code(&[
            "verify",
            "--phi",
            "power:p=1",
            "--r",
            "1",
            "--eps",
            "1",
            "--samples",
            "100"
        ]),
        3
    );
    // uncertified use is allowed on request and flagged
    let out = pconvex(&[
        "modulus",
        "--phi",
        "power:p=1.5",
        "--method",
        "eA",
        "--r",
        "1",
        "--eps",
        "1",
        "--allow-uncertified",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rep["warnings"][0].as_str().unwrap().contains("Thm1-superquadratic"));
    // success and violation
    let base = [
        "verify",
        "--phi",
        "power:p=2",
        "--method",
        "eA",
        "--r",
        "1",
        "--eps",
        "1",
        "--samples",
        "2000",
    ];
    assert_eq!(code(&base), 0);
    let mut corrupt = base.to_vec();
    corrupt.extend(["--corrupt-delta", "1.5"]);
    assert_eq!(code(&corrupt), 1);
}

#[test]
fn verify_reports_are_byte_identical() {
    let (a, b) = (scratch("a.json"), scratch("b.json"));
    let args = |p: &PathBuf| {
        vec![
            "verify".to_string(),
            "--phi".into(),
            "exp:a=e".into(),
            "--method".into(),
            "thm5".into(),
            "--r".into(),
            "0.5:2:3".into(),
            "--eps-frac".into(),
            "0.2,0.8".into(),
            "--samples".into(),
            "3000".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            p.display().to_string(),
        ]
    };
    for p in [&a, &b] {
        let st = Command::new(env!("CARGO_BIN_EXE_pconvex"))
            .args(args(p))
            .status()
            .unwrap();
        assert!(st.success());
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
    let rep: Value = serde_json::from_slice(&x).unwrap();
    assert_eq!(rep["summary"]["violations"], 0);
    assert_eq!(rep["config_echo"]["seed"], "7");
}

#[test]
fn floats_carry_seventeen_digits() {
    let out = pconvex(&[
        "modulus",
        "--phi",
        "power:p=2",
        "--method",
        "eA",
        "--r",
        "1",
        "--eps",
        "1",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"delta\": 1.3397459621556135e-1"));
    let rep: Value = serde_json::from_str(&text).unwrap();
    let d = rep["results"][0]["delta"].as_f64().unwrap();
    assert!((d - (1.0 - 3f64.sqrt() / 2.0)).abs() <= 1e-16);
    for x in [d, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
        let back: f64 = pconvex_cli::output::fmt17(x).parse().unwrap();
        assert_eq!(back.to_bits(), x.to_bits());
    }
}

#[test]
fn ball_boundaries() {
    let rep = json(&["ball", "--phi", "power:p=2", "--r", "1", "--n", "16"]);
    for p in rep["results"].as_array().unwrap() {
        let x: Vec<f64> = p["x"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert!((x[0].hypot(x[1]) - 1.0).abs() < 1e-12);
    }
    assert_eq!(rep["summary"]["symmetric"], true);

    let rep = json(&["ball", "--phi", "exp:a=e", "--r", "2", "--n", "64"]);
    assert_eq!(rep["summary"]["convex_spot_check"], true);
    assert_eq!(rep["summary"]["diagonal_symmetry_checked"], true);
    let pts: Vec<[f64; 2]> = rep["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| [p["x"][0].as_f64().unwrap(), p["x"][1].as_f64().unwrap()])
        .collect();
    // not a circle: the diagonal point sits off the radius-2 circle
    let d = pts[8];
    assert!((d[0].hypot(d[1]) - 2.0).abs() > 1e-3);

    let rep = json(&["ball", "--phi", "power:p=3", "--weights", "1,2", "--n", "12"]);
    assert_eq!(rep["summary"]["diagonal_symmetry_checked"], false);
}

use std::path::Path;
use std::process::{Command, Output};

fn fluxmod(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxmod")).arg("--out").arg(out).args(args).output().unwrap()
}

fn ok(out: &Path, args: &[&str]) {
    let o = fluxmod(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_GRID: [&str; 6] = ["--phi-ac-start-phi0", "0", "--phi-ac-stop-phi0", "0.6", "--phi-ac-points", "4"];

#[test]
fn csv_headers() {
    let d = tempfile::tempdir().unwrap();
    let o = d.path();
    let cfg = write_config(o, r#"{"trace": {"n_samples": 4096, "psd_seeds": 2}, "harness": {"n_traj": 20, "geff_hz": [5e6]}}"#);
    let cases: [(&[&str], &str, &str); 7] = [
        (&["spectrum", "--points", "11"], "spectrum.csv", "phi_dc_phi0,f01_hz,eta_hz"),
        (&["fourier", "--harmonics", "3"], "fourier.csv", "phi_ac_phi0,k,omega_k_hz,d_dc_hz_per_phi0,d_ac_hz_per_phi0"),
        (&["dephasing"], "dephasing.csv", "phi_ac_phi0,tphi_pink_s,tphi_white_s,tphi_white_lp_s,beta,mode,clamped"),
        (
            &["gate-freqs"],
            "gate_freqs.csv",
            "phi_ac_phi0,f_cz02_hz,f_cz20_hz,f_iswap_hz,f_cz02_second_hz,f_cz20_second_hz,f_iswap_second_hz,geff_cz02_hz,geff_cz20_hz,geff_iswap_hz",
        ),
        (&["noise-gen"], "noise_trace.csv", "t_s,pink_phi0,white_phi0"),
        (&["noise-psd"], "noise_psd.csv", "f_hz,s_pink_phi0sq_per_hz,s_white_phi0sq_per_hz,s_pink_model,s_white_model"),
        (&["appendix-c"], "appendix_c.csv", "tcz_over_tphi,f_me,f_avg_coherent,f_asymptotic,gate"),
    ];
    for (args, file, want) in cases {
        let mut a = vec!["--config", cfg.as_str()];
        a.extend_from_slice(&SMALL_GRID);
        a.extend_from_slice(args);
        ok(o, &a);
        assert_eq!(header(&o.join(file)), want, "{file}");
        assert!(o.join("run.json").exists());
    }
    let fourier = std::fs::read_to_string(o.join("fourier.csv")).unwrap();
    assert_eq!(fourier.lines().count(), 1 + 4 * 4);
}

#[test]
fn monte_carlo_output_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    let args = [
        "dephasing", "--mode", "mc", "--filter", "--phi-ac-start-phi0", "0.3", "--phi-ac-stop-phi0", "0.3", "--phi-ac-points", "1",
        "--pink-windows", "16", "--white-windows", "16", "--seed", "5",
    ];
    ok(&a, &[&args[..], &["--threads", "1"]].concat());
    ok(&b, &[&args[..], &["--threads", "3"]].concat());
    let read = |p: &Path| std::fs::read(p.join("dephasing.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    ok(&a, &["noise-gen", "--seed", "5"]);
    ok(&b, &["noise-gen", "--seed", "5"]);
    assert_eq!(std::fs::read(a.join("noise_trace.csv")).unwrap(), std::fs::read(b.join("noise_trace.csv")).unwrap());
    ok(&b, &["noise-gen", "--seed", "6"]);
    assert_ne!(std::fs::read(a.join("noise_trace.csv")).unwrap(), std::fs::read(b.join("noise_trace.csv")).unwrap());
}

#[test]
fn sweet_spot_of_default_device() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["sweet-spot"]);
    let v = json(&d.path().join("sweet_spot.json"));
    let star = v["phi_ac_star"].as_f64().unwrap();
    assert!((star - 0.61).abs() < 0.02, "{star}");
    assert_eq!(v["joint"], false);
}

#[test]
fn calibrated_params_reproduce_the_band() {
    let d = tempfile::tempdir().unwrap();
    let o = d.path();
    ok(o, &["calibrate", "--f-max-hz", "5.5e9", "--f-min-hz", "4.0e9", "--eta0-hz", "0.22e9"]);
    let params = json(&o.join("params.json"))["params"].clone();
    let cfg = write_config(o, &serde_json::json!({ "device": { "params": params } }).to_string());
    ok(o, &["--config", &cfg, "calibrate"]);
    let band = &json(&o.join("params.json"))["band"];
    for (key, want) in [("f_max_hz", 5.5e9), ("f_min_hz", 4.0e9), ("eta0_hz", 0.22e9)] {
        let got = band[key].as_f64().unwrap();
        assert!((got / want - 1.0).abs() < 1e-6, "{key}: {got}");
    }
}

#[test]
fn pink_dephasing_at_zero_amplitude_is_clamped() {
    let d = tempfile::tempdir().unwrap();
    let mut a = vec!["dephasing", "--mode", "analytic", "--noise", "pink"];
    a.extend_from_slice(&SMALL_GRID);
    ok(d.path(), &a);
    let text = std::fs::read_to_string(d.path().join("dephasing.csv")).unwrap();
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first, ["0.0", "10.0", "NaN", "NaN", "NaN", "analytic", "true"]);
    let second: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(second[6], "false");
    assert!(second[1].parse::<f64>().unwrap() < 1e-3);
}

#[test]
fn run_json_records_overrides() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--seed", "42", "--f-m-hz", "250e6", "sweet-spot"]);
    let v = json(&d.path().join("run.json"));
    assert_eq!(v["config"]["seed"], 42);
    assert_eq!(v["config"]["modulation"]["f_m_hz"], 250e6);
    assert_eq!(v["command"]["name"], "sweet-spot");
}

fn exit_code(out: &Path, args: &[&str]) -> (i32, serde_json::Value) {
    let o = fluxmod(out, args);
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["exit_code"], o.status.code().unwrap());
    (o.status.code().unwrap(), err)
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let o = d.path();
    assert_eq!(exit_code(o, &["spectrum", "--f-min-hz", "6e9"]).0, 2);
    assert_eq!(exit_code(o, &["--threads", "0", "spectrum"]).0, 2);
    assert_eq!(exit_code(o, &["--config", "/nonexistent/config.json", "spectrum"]).0, 2);
    let bad = write_config(o, r#"{"noize": {}}"#);
    assert_eq!(exit_code(o, &["--config", &bad, "spectrum"]).0, 2);
    let (code, err) = exit_code(o, &["sweet-spot", "--bracket-lo", "0.1", "--bracket-hi", "0.3"]);
    assert_eq!((code, err["error"].as_str().unwrap()), (3, "bracket"));
    let (code, err) = exit_code(o, &["fourier", "--harmonics", "40"]);
    assert_eq!((code, err["error"].as_str().unwrap()), (3, "domain"));
}

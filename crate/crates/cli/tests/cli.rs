use std::path::Path;
use std::process::{Command, Output};

use kinfront::io::read_table;

fn kinfront(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinfront")).arg("--out").arg(out).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(o: &Output, key: &str) -> f64 {
    let line = stdout(o).lines().find(|l| l.starts_with(&format!("{key}="))).map(str::to_string);
    line.unwrap_or_else(|| panic!("no {key} in {}", stdout(o)))[key.len() + 1..].parse().unwrap()
}

fn manifest(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("manifest.csv")).unwrap()
}

#[test]
fn speed_of_bgk() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfront(dir.path(), &["speed", "--model", "bgk", "--vmax", "1", "--r", "1"]);
    assert!(o.status.success());
    let c = value(&o, "c_star");
    assert!(c > 0.7 && c < 0.8, "{c}");
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let body: Vec<&str> = summary.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "key,value");
    assert!(body.iter().any(|l| l.starts_with("c_star,")));
    let m = manifest(dir.path());
    assert!(m.starts_with("# timestamp="));
    assert!(m.contains("file,summary.csv,"));
    assert!(m.contains("status,status,ok"));
}

#[test]
fn negative_growth_rate_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfront(dir.path(), &["speed", "--r", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("growth rate must be ≥ 0"));
}

#[test]
fn epsilon_list_must_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfront(dir.path(), &["converge", "--eps", "0.25,0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kinfront(dir.path(), &["kinetic", "--cfl", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn quadratic_front() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfront(dir.path(), &["hj", "--model", "quadratic", "--D", "1", "--r", "1", "--dx", "0.01", "--T", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((value(&o, "fitted_speed") - 2.0).abs() < 0.04);
    let (meta, header, rows) = read_table(&dir.path().join("front.csv")).unwrap();
    assert_eq!(header, vec!["t", "front_x"]);
    assert!(rows.len() > 100);
    for key in ["model", "r", "dx", "fitted_speed", "predicted_c_star"] {
        assert!(meta.iter().any(|(k, _)| k == key), "missing {key}");
    }
    let (_, header, _) = read_table(&dir.path().join("snapshots.csv")).unwrap();
    assert_eq!(header, vec!["t", "x", "phi"]);
}

#[test]
fn hamiltonian_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfront(dir.path(), &["hamiltonian", "--model", "bgk-spectral", "--nv", "41", "--quadrature", "gauss", "--p-max", "2"]);
    assert!(o.status.success());
    assert!(value(&o, "h_at_zero").abs() < 1e-10);
    assert!(value(&o, "measured_lipschitz") <= 1.0 + 1e-6);
    let model = kinfront::io::read_hamiltonian(&dir.path().join("hamiltonian.csv")).unwrap();
    let exact = 1.0 / (1.0f64 / 2.0).tanh() - 2.0;
    assert!((model.eval(1.0).unwrap() - exact).abs() < 1e-6);
}

#[test]
fn kernel_file_model() {
    let dir = tempfile::tempdir().unwrap();
    let n = 8;
    let rows: Vec<String> = (0..n).map(|_| vec!["0.5"; n].join(",")).collect();
    let kfile = dir.path().join("kernel.csv");
    std::fs::write(&kfile, rows.join("\n")).unwrap();
    let out = dir.path().join("out");
    let o = kinfront(&out, &["speed", "--model", "kernel", "--kernel-file", kfile.to_str().unwrap(), "--r", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // a constant kernel is BGK on the same grid
    let bgk = kinfront(&dir.path().join("bgk"), &["speed", "--model", "bgk-spectral", "--nv", "8", "--r", "1"]);
    assert!((value(&o, "c_star") - value(&bgk, "c_star")).abs() < 1e-9);
    assert!(manifest(&out).contains("param,kernel_file,kernel.csv"));
    assert!(!manifest(&out).contains(dir.path().to_str().unwrap()));
}

#[test]
fn solver_errors_exit_one_with_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfront(dir.path(), &["speed", "--model", "kernel"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: hamiltonian:"));
    assert!(manifest(dir.path()).contains("status,status,error: hamiltonian:"));

    let o = kinfront(dir.path(), &["nonlocal", "--log2-n", "10", "--half-width", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unbounded_models"));
}

#[test]
fn convergence_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfront(dir.path(), &["converge", "--nv", "12", "--quadrature", "gauss", "--dx", "0.025", "--eps", "0.5,0.25"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, header, rows) = read_table(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(header, vec!["eps", "gap", "min_rho_nullset", "max_f_positive"]);
    assert_eq!(rows.len(), 2);
    assert!(rows[1][1].unwrap() < rows[0][1].unwrap());
    let (_, header, _) = read_table(&dir.path().join("phase_eps_1.csv")).unwrap();
    assert_eq!(header, vec!["t", "x", "v", "f", "phi_eps"]);
}

#[test]
fn kolmogorov_and_nonlocal_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinfront(dir.path(), &["kolmogorov", "--check", "all"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let (_, header, rows) = read_table(&dir.path().join("trend.csv")).unwrap();
    assert_eq!(header, vec!["half_width", "eigenvalue"]);
    assert!(rows.windows(2).all(|w| w[1][1] > w[0][1]));

    let o = kinfront(&dir.path().join("n"), &["nonlocal", "--kernel", "laplace", "--p", "0"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let (_, header, rows) = read_table(&dir.path().join("n/q_profile.csv")).unwrap();
    assert_eq!(header, vec!["v", "Q"]);
    assert!(rows.len() > 1000);
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kinfront"))
        .env("KINETIC_FRONT_THREADS", "zero")
        .arg("--out")
        .arg(dir.path())
        .args(["speed"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

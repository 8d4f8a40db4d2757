use std::path::Path;
use std::process::Command;

const TINY: &str = "# small run\nn = 6\nkn = 8\nmodel_degree = 8\nnoise_degree = 9\nrho = 0.5\n\
                    beta = 1\nalpha_tilde = 10\nalpha_ratio = 1\nepsilon1 = 0.01\ngamma = 1\n\
                    shannon_m = 0, 6\ntsvd_m = 4, 8\nn_seeds = 1\neval_points_degree = 2\n";

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sphkern")).args(args).output().unwrap()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn every_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY);
    let cases = [
        ("gram", "n,m,value"),
        ("optimize", "n,phi,phi_tilde,psi_tilde"),
        ("shannon", "n,phi,phi_tilde,psi_tilde"),
        ("tsvd", "n,phi,sigma"),
        ("approximate", "x,y,z,reference,approx"),
        ("table", "case,rho,data_rho"),
        ("tsvd-table", "case,rho,data_rho"),
        ("spectra", "n,phi_sigma,phi_tilde,psi_tilde"),
    ];
    for (cmd, header) in cases {
        let out = dir.path().join(format!("{cmd}.csv"));
        let o = run(&[cmd, &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with(header), "{cmd}: {}", text.lines().next().unwrap_or(""));
        assert!(text.lines().count() > 1);
    }
}

#[test]
fn stdout_when_no_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY);
    let o = run(&["tsvd", &cfg]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("n,phi,sigma"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_cfg(dir.path(), "bad.cfg", "n = 6\nwhatever = 1\n");
    assert_eq!(run(&["gram", &bad_key]).status.code(), Some(2));
    assert_eq!(run(&["gram", "/nonexistent/config"]).status.code(), Some(2));
    let no_room = write_cfg(dir.path(), "room.cfg", &format!("{TINY}data_rho = 0.3\n"));
    assert_eq!(run(&["approximate", &no_room]).status.code(), Some(3));
    assert_eq!(run(&["table"]).status.code(), Some(2));
}

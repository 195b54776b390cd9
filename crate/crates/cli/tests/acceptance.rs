//! Acceptance criterion 10: identical `sweep` invocations produce
//! byte-identical CSV/JSON artifacts, independent of the worker count.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

const BIN: &str = env!("CARGO_BIN_EXE_carleman-lab");

const SWEEP_CFG: &str = "\
[domain]
grid = polar{nr=48,nang=96,rin=0.25,rout=1}
[potential]
spec = constant{value=0}
[weight]
spec = radial_exp{c=1}
[experiment]
kind = carleman_ratio
h_ladder = 0.2,0.1,0.05,0.025
kappa = 0.5
delta = 1
d = 10
slack = 0.2
energy = 1
support = annulus{r1=0.3,r2=0.92}
family = gaussian{count=20,width=0.06}
";

fn sweep(cfg: &Path, out: &Path, workers: usize, seed: u64) {
    let status = Command::new(BIN)
        .args([
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            &workers.to_string(),
            "--seed",
            &seed.to_string(),
        ])
        .status()
        .expect("binary runs");
    assert!(status.success());
}

fn artifact_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    ["report.json", "report.csv", "plot_beta.csv", "plot_loglog.csv"]
        .iter()
        .map(|name| (name.to_string(), std::fs::read(dir.join(name)).unwrap()))
        .collect()
}

#[test]
fn criterion_10_sweep_determinism() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, SWEEP_CFG).unwrap();

    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let out3 = dir.path().join("c");
    sweep(&cfg, &out1, 3, 42);
    sweep(&cfg, &out2, 3, 42);
    sweep(&cfg, &out3, 1, 42); // worker count must not matter

    let a = artifact_bytes(&out1);
    let b = artifact_bytes(&out2);
    let c = artifact_bytes(&out3);
    let mut pass = true;
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        if x != y {
            pass = false;
            eprintln!("  repeat-run mismatch in {name}");
        }
    }
    for ((name, x), (_, y)) in a.iter().zip(&c) {
        if x != y {
            pass = false;
            eprintln!("  worker-count mismatch in {name}");
        }
    }
    eprintln!(
        "[acceptance] criterion 10 (sweep determinism): {} | byte-identical artifacts across repeats and worker counts [{:.2?}]",
        if pass { "PASS" } else { "FAIL" },
        t0.elapsed()
    );
    assert!(pass);
}

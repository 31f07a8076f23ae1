//! The command pipeline from a JSON configuration, as the binary runs it.

use slmj::config::RunConfig;
use slmj::pipeline::cmd_project;

fn main() -> slmj::Result<()> {
    let cfg = RunConfig::from_json(
        r#"{
          "schema": "slmj.run/1",
          "model": {"kind": "inverse_bessel", "x0": 1.0},
          "levels": {"on": "driver", "upper": [1.0, 2.0]},
          "grid": {"horizon": 1.0, "dt": 0.0078125},
          "n_paths": 20000,
          "eval_times": [0.5, 1.0],
          "checks": ["tower", "defect"],
          "seed": 2
        }"#,
    )?;
    let out = std::env::temp_dir().join("slmj-run-config");
    let rep = cmd_project(&cfg, &out)?;
    for c in &rep.checks {
        let note = if rep.requested.contains(&c.name) { "" } else { " (not requested)" };
        println!("{:<13} {}{note}", c.name, if c.pass { "pass" } else { "fail" });
    }
    println!("files in {}: {}", out.display(), rep.files.join(", "));
    println!("exit code would be {}", if rep.success() { 0 } else { 1 });
    Ok(())
}

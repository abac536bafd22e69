//! Load a run configuration with overrides, execute it and print the reports.

use fullfrac::cli::{execute, RunConfig};

fn main() -> fullfrac::Result<()> {
    let text = r#"{"experiment": "measure-identity", "params": {"n": 1, "s": 0.5}}"#;
    let cfg = RunConfig::load(text, &["params.s=0.25".into(), "options.radii=[1.0, 3.0]".into()])?;
    println!("experiment {} at s = {}", cfg.experiment.name(), cfg.params.s);
    for rep in execute(&cfg)?.reports {
        println!("{}", serde_json::to_string(&rep).expect("report serializes"));
    }
    Ok(())
}

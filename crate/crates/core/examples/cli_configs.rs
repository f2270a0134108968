//! Drives the command-line front end in-process with generated configs and
//! prints each `summary.json`.
//!
//! cargo run --release --example cli_configs

use qif_lab::cli;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("qif-lab-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let configs = [
        (
            "divergence",
            r#"{"command":"divergence","divergence":{"p":[0.5,0.5],"q":[0.9,0.1]}}"#,
        ),
        (
            "oracle-check",
            r#"{"command":"oracle-check","seed":2,"oracle":{"dimension":8,"trials":200}}"#,
        ),
        (
            "flow",
            r#"{"command":"flow","seed":1,"flow":{"iterations":300,"snapshot_every":100,
                "grid":{"bounds":[-1.5,1.5,-1.5,1.5],"resolution":24},
                "init":{"shape":"star","n":150},"target":{"shape":"heart","n":150}}}"#,
        ),
        (
            "train",
            r#"{"command":"train","seed":3,"train":{"epochs":20,"consistency":["none","qif"],
                "dataset":{"kind":"two_moons","n_train":300,"n_test":300}}}"#,
        ),
    ];
    for (name, json) in configs {
        let cfg_path = dir.join(format!("{name}.json"));
        let out = dir.join(name);
        std::fs::write(&cfg_path, json)?;
        let code = cli::run([
            "qif-lab",
            name,
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--force",
        ]);
        println!("== {name}: exit {code}");
        println!("{}", std::fs::read_to_string(out.join("summary.json"))?);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

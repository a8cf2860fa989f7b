//! The Alice/Bob social graph: explain `knows(Alice, Bob)` with each
//! surrogate and print the three views of the HSIC-Lasso explanation.
//!
//!     cargo run --example alice_bob

use anyhow::Result;
use kgx::explain::Explainer;
use kgx::fixtures::{social, social_config};
use kgx::surrogate::SurrogateMethod;

fn main() -> Result<()> {
    let f = social();
    let explanation =
        Explainer::new(&f.graph, &f.store, &f.schema, social_config())?.explain(&f.predicted)?;
    print!("{}", explanation.to_text(&f.graph, &f.schema));

    println!("\ntop clause per surrogate:");
    for method in SurrogateMethod::ALL {
        let mut config = social_config();
        config.surrogate.method = method;
        let e = Explainer::new(&f.graph, &f.store, &f.schema, config)?.explain(&f.predicted)?;
        match e.rules.first() {
            Some(rule) => println!(
                "  {:<6} {}",
                method.as_str(),
                rule.render(&f.graph, &f.schema)
            ),
            None => println!("  {:<6} (no positively scored clause)", method.as_str()),
        }
    }
    Ok(())
}

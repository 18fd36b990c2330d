//! Solve a small discrete instance exactly and check the certificate.
//!
//! `cargo run --example oracle_certificate [instance.json]`

use mdcp::oracle::{solve_instance, solve_primal_lp, verify_certificate, DiscreteInstance};

fn main() -> mdcp::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/instance.json").into());
    let inst = DiscreteInstance::from_json(&std::fs::read_to_string(path)?)?;
    let cert = solve_instance(&inst)?;
    println!("lambda*      {:?}", cert.lambda_star);
    println!("dual value   {:.6}", cert.dual_value);
    println!("set size     {:.6}", cert.primal_value);
    println!("inclusion    {:?}", cert.inclusion);
    println!("coverage     {:?}", cert.per_source_coverage);
    let (lp, _) = solve_primal_lp(&inst)?;
    println!("primal LP    {lp:.6}");
    let checks = verify_certificate(&cert, &inst);
    for c in &checks.checks {
        println!("{:<5} {} ({:.1e})", if c.passed { "ok" } else { "FAIL" }, c.name, c.residual);
    }
    Ok(())
}

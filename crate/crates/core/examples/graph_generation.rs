//! Draws each supported graph family and reports basic structure.

use graphspec::graphgen::{generate_graph, hop_distances, GraphFamily, GraphSpec};

fn main() -> graphspec::error::Result<()> {
    let specs = [
        ("erdos-renyi", GraphSpec::new(50, GraphFamily::ErdosRenyi { p: 0.1 })),
        ("sbm", GraphSpec::sbm(5, 10, 0.9, 0.05).laplacian()),
        ("small-world", GraphSpec::new(50, GraphFamily::SmallWorld { degree: 4, q: 0.1 })),
        ("directed cycle", GraphSpec::new(12, GraphFamily::DirectedCycle)),
        ("path", GraphSpec::new(12, GraphFamily::Path)),
    ];
    for (name, spec) in specs {
        let shift = generate_graph(&spec, 7)?;
        let edges = shift.edges().len();
        let dist = hop_distances(&shift);
        println!(
            "{name:>15}: n={} edges={edges} hermitian={} connected={}",
            shift.n(),
            shift.is_hermitian(),
            dist.is_connected()
        );
    }
    Ok(())
}

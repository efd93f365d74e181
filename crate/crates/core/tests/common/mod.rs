#![allow(dead_code)]

use std::path::PathBuf;

use meshsim::engine::{priority_violations, RunOptions};
use meshsim::experiment::{self, Comparison, RunArtifacts};
use meshsim::protocols::ProtocolId;
use meshsim::scenario::{parse_scenario, Resolved, Scenario};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

pub fn scenario(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_path(name)).expect("scenario file");
    parse_scenario(&text).expect("scenario parses")
}

pub fn resolve(sc: &Scenario) -> Resolved {
    sc.validate().expect("scenario validates")
}

pub fn all_scenarios() -> Vec<(String, Scenario)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .expect("scenario dir")
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "toml").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), scenario(&n))).collect()
}

/// Every packet is accounted for exactly once, per flow.
pub fn assert_conserved(art: &RunArtifacts) {
    let out = &art.output;
    for (i, f) in out.ledger.flows.iter().enumerate() {
        assert_eq!(
            f.injected,
            f.delivered + f.overflow + f.retry + f.looped + out.in_flight[i],
            "{} flow {i}: {f:?}, in flight {}",
            art.summary.protocol,
            out.in_flight[i]
        );
    }
}

/// Checks that hold for every run: conservation and, when the MAC log was
/// kept, strict control priority.
pub fn check(art: &RunArtifacts) {
    assert_conserved(art);
    let v = priority_violations(&art.output.mac_log);
    assert!(v.is_empty(), "{}: data sent with control queued: {:?}", art.summary.protocol, &v[..v.len().min(3)]);
}

pub fn run(resolved: &Resolved, protocol: &ProtocolId, opts: RunOptions) -> RunArtifacts {
    let art = experiment::run(resolved, protocol, opts);
    check(&art);
    art
}

pub fn compare(resolved: &Resolved, protocols: &[ProtocolId], opts: RunOptions) -> Comparison {
    let cmp = experiment::run_compare(resolved, protocols, opts);
    for r in &cmp.runs {
        check(r);
    }
    cmp
}

pub const FOUR: [ProtocolId; 4] = [ProtocolId::Srcr, ProtocolId::Bp, ProtocolId::Ebp, ProtocolId::Cdp];

/// Mean delay of one flow, in milliseconds.
pub fn flow_delay(art: &RunArtifacts, flow: usize) -> f64 {
    art.summary.flow(flow).and_then(|f| f.mean_delay_ms).expect("flow delivered packets")
}

/// Total loss of one flow, in percent.
pub fn flow_loss(art: &RunArtifacts, flow: usize) -> f64 {
    art.summary.flow(flow).and_then(|f| f.loss).expect("flow injected packets").total_loss_pct()
}

/// Minimal Floyd-Warshall over integer link costs.
pub fn all_pairs(w: &[Vec<Option<u64>>]) -> Vec<Vec<Option<u64>>> {
    let n = w.len();
    let mut d: Vec<Vec<Option<u64>>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Some(0) } else { w[i][j].filter(|_| w[j][i].is_some()) }).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Neighbours of `n` lying on some shortest path to `d`.
pub fn oracle_next_hops(w: &[Vec<Option<u64>>], dist: &[Vec<Option<u64>>], n: usize, d: usize) -> Vec<usize> {
    if n == d {
        return Vec::new();
    }
    let Some(best) = dist[n][d] else { return Vec::new() };
    (0..w.len())
        .filter(|&k| k != n)
        .filter(|&k| match (w[n][k], w[k][n], dist[k][d]) {
            (Some(c), Some(_), Some(rest)) => c + rest == best,
            _ => false,
        })
        .collect()
}

/// A random connected graph on `n` nodes with symmetric integer costs.
pub fn random_mesh(n: usize, seed: u64, max_cost: u64) -> Vec<Vec<Option<u64>>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![vec![None; n]; n];
    let link = |w: &mut Vec<Vec<Option<u64>>>, a: usize, b: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let c = rng.random_range(1..=max_cost);
        w[a][b] = Some(c);
        w[b][a] = Some(c);
    };
    // random spanning tree keeps it connected
    for i in 1..n {
        let j = rng.random_range(0..i);
        link(&mut w, i, j, &mut rng);
    }
    for a in 0..n {
        for b in a + 1..n {
            if w[a][b].is_none() && rng.random_bool(0.25) {
                link(&mut w, a, b, &mut rng);
            }
        }
    }
    w
}

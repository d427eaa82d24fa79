//! One PASS/FAIL line per acceptance criterion. Pass criterion ids as
//! arguments to run a subset.

use semitoric::selftest::{run, CRITERIA};

fn main() {
    let wanted: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let ids: Vec<u8> = CRITERIA
        .iter()
        .copied()
        .filter(|id| wanted.is_empty() || wanted.contains(id))
        .collect();
    let mut failed = 0;
    for id in ids {
        let r = run(id);
        println!("{}", r.line());
        if !r.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

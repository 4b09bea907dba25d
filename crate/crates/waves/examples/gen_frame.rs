//! One-off generator for the frozen rotation family.
//!
//! Runs the randomized separation search and writes `data/frame.json`.
//! The committed file is the output of `cargo run --release -p waves
//! --example gen_frame`; loading re-verifies the bound, so regeneration
//! is only needed to chase a better constant.

fn main() {
    let frame = waves::search_frame(7, 40, 0.05).expect("search reaches the floor");
    println!("achieved separation c = {:.6}", frame.separation_c);
    let json = serde_json::to_string_pretty(&frame).unwrap();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/frame.json");
    std::fs::write(path, json).unwrap();
    println!("wrote {path}");
}

//! Generate a few synthetic floor-plan blocks and summarize their contents.
//!
//! Every block is a 20 m × 20 m drawing with double-line walls, door and
//! window symbols, a parking grid, and furniture glyphs, fully labeled down
//! to the entity. The same seed always produces the same bytes.

use std::collections::BTreeMap;

use pancad::synth::{generate_floorplan, SynthConfig};
use pancad::Label;

fn main() {
    for seed in [1u64, 2, 3] {
        let cfg = SynthConfig { seed, ..SynthConfig::default() };
        let d = generate_floorplan(&cfg).expect("default config is feasible");

        let mut per_class: BTreeMap<&str, usize> = BTreeMap::new();
        let mut instances = 0u32;
        for rec in &d.records {
            if let Label::Class(c) = rec.label {
                *per_class.entry(d.catalog.name(c)).or_default() += 1;
            }
            instances = instances.max(rec.instance);
        }

        println!("{}: {} entities, {} symbol instances", d.id, d.records.len(), instances);
        for (name, count) in &per_class {
            println!("  {name:<10} {count}");
        }
    }

    // Determinism check: regenerating seed 1 gives identical serialized bytes.
    let cfg = SynthConfig { seed: 1, ..SynthConfig::default() };
    let a = pancad::io::drawing_to_string(&generate_floorplan(&cfg).unwrap());
    let b = pancad::io::drawing_to_string(&generate_floorplan(&cfg).unwrap());
    assert_eq!(a, b);
    println!("seed 1 regenerated byte-identically ({} bytes)", a.len());
}

use std::collections::HashSet;

use pairllc::metrics::profile_trace;
use pairllc::trace::{generate_few_to_many, generate_many_to_few, read_trace, write_trace};
use pairllc::{simulate, HierarchyConfig, PolicySpec, SimConfig, TraceGenConfig};
use proptest::prelude::*;

fn m2f(n_instr: u64, n_data: u64, sharing: u64, cores: u32, seed: u64) -> TraceGenConfig {
    TraceGenConfig {
        n_instr_lines: n_instr,
        n_data_lines: n_data,
        data_sharing_degree: sharing,
        cores,
        rng_seed: seed,
        steps_per_core: 40_000,
        ..TraceGenConfig::many_to_few_default()
    }
}

#[test]
fn many_to_few_inverts_hotness() {
    let trace = generate_many_to_few(&m2f(4096, 256, 8, 4, 7)).unwrap();
    let p = profile_trace(&trace);
    let per_data = p.accesses_per_data_line.unwrap();
    let per_instr = p.accesses_per_instruction_line.unwrap();
    assert!(per_data > per_instr, "{per_data} vs {per_instr}");
    assert!(p.instruction_ratio.unwrap() >= 0.05);
}

#[test]
fn default_many_to_few_keeps_the_pattern() {
    let cfg = TraceGenConfig { steps_per_core: 40_000, ..TraceGenConfig::many_to_few_default() };
    let p = profile_trace(&generate_many_to_few(&cfg).unwrap());
    assert!(p.accesses_per_data_line.unwrap() > p.accesses_per_instruction_line.unwrap());
    assert!(p.instruction_ratio.unwrap() >= 0.05);
}

#[test]
fn few_to_many_sends_fewer_instructions_to_the_llc() {
    let hier = HierarchyConfig::default();
    let f2m_cfg = TraceGenConfig {
        n_instr_lines: 64,
        n_data_lines: 8192,
        cores: 4,
        rng_seed: 7,
        steps_per_core: 40_000,
        ..TraceGenConfig::few_to_many_default()
    };
    let f2m = generate_few_to_many(&f2m_cfg).unwrap();
    let m2f = generate_many_to_few(&m2f(4096, 256, 8, 4, 7)).unwrap();
    let run = |t| simulate(t, &SimConfig::bare(hier.clone(), PolicySpec::Lru)).unwrap().report;
    let few = run(&f2m).llc_profile.instruction_ratio.unwrap();
    let many = run(&m2f).llc_profile.instruction_ratio.unwrap();
    assert!(few * 10.0 < many, "few-to-many {few}, many-to-few {many}");
}

#[test]
fn seeds_permute_addresses_but_keep_shape() {
    let a = generate_many_to_few(&m2f(4096, 256, 8, 4, 1)).unwrap();
    let b = generate_many_to_few(&m2f(4096, 256, 8, 4, 2)).unwrap();
    assert_eq!(a.len(), b.len());
    let lines = |t: &[pairllc::MemoryAccess]| t.iter().map(|x| x.line()).collect::<HashSet<_>>();
    assert_ne!(lines(&a), lines(&b));
    let (pa, pb) = (profile_trace(&a), profile_trace(&b));
    assert_eq!(
        (pa.instruction_accesses, pa.data_accesses, pa.data_lines),
        (pb.instruction_accesses, pb.data_accesses, pb.data_lines)
    );
    let spread = (pa.instruction_lines as f64 - pb.instruction_lines as f64).abs() / pa.instruction_lines as f64;
    assert!(spread < 0.02, "{} vs {}", pa.instruction_lines, pb.instruction_lines);

    let f = |seed| {
        let cfg = TraceGenConfig { rng_seed: seed, steps_per_core: 20_000, ..TraceGenConfig::few_to_many_default() };
        profile_trace(&generate_few_to_many(&cfg).unwrap())
    };
    assert_eq!(f(1), f(2));
}

#[test]
fn generation_is_deterministic() {
    let cfg = m2f(2048, 256, 8, 3, 42);
    assert_eq!(generate_many_to_few(&cfg).unwrap(), generate_many_to_few(&cfg).unwrap());
}

#[test]
fn files_round_trip_in_both_encodings() {
    let dir = tempfile::tempdir().unwrap();
    let trace = generate_many_to_few(&TraceGenConfig { steps_per_core: 500, ..m2f(1024, 64, 8, 4, 9) }).unwrap();
    for name in ["t.pllc", "t.txt"] {
        let path = dir.path().join(name);
        write_trace(&path, &trace).unwrap();
        assert_eq!(read_trace(&path).unwrap(), trace, "{name}");
    }
    let bin = std::fs::metadata(dir.path().join("t.pllc")).unwrap().len();
    assert_eq!(bin, 16 + 24 * trace.len() as u64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fetches_share_page_offset_with_pc(seed in any::<u64>(), cores in 1u32..8, sharing in 1u64..16) {
        let cfg = TraceGenConfig { steps_per_core: 300, ..m2f(512, 64, sharing, cores, seed) };
        for a in generate_many_to_few(&cfg).unwrap() {
            prop_assert!(a.paddr < 1 << 44);
            if a.is_instruction() {
                prop_assert_eq!(a.pc & 0xfff, a.paddr & 0xfff);
            }
        }
    }
}

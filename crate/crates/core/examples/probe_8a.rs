// probe: aware vs unaware with multi-restart and homotopy variants
use simiep_core::channel::{ChannelModel, ChannelSet};
use simiep_core::config::{OptimizerConfig, ScenarioConfig};
use simiep_core::manifold::{DescentParams, ObliquePoint, SpherePoint};
use simiep_core::rom::{equivalent_channels, margin_of, optimize_layer, RomParams};
use simiep_core::seeding::derive_rng;
use simiep_core::signal::{Frame, NldMode, PhaseStack, QPSK_PHI};
use simiep_core::RVec;

fn rom_homotopy(
    channels: &ChannelSet, sel: &[usize], power: Option<&RVec>, frame: &Frame,
    mode: NldMode, params: &RomParams, mut phases: PhaseStack, stages: &[f64],
) -> (PhaseStack, f64) {
    let layers = channels.layers();
    let mut cur = margin_of(channels, &phases, sel, power, frame, mode, params.phi).unwrap();
    for _t in 0..params.max_outer {
        let before = cur;
        for layer in (0..layers).rev() {
            let ctx = equivalent_channels(channels, &phases, sel, power, frame, mode, layer, params.phi).unwrap();
            let mut theta = ObliquePoint::from_phases(phases.layer(layer));
            for &factor in stages {
                let (t2, _) = optimize_layer(&ctx, &theta, params.lse_eps * factor, &params.descent).unwrap();
                theta = t2;
            }
            let mut cand = phases.clone();
            cand.set_layer(layer, theta.phases()).unwrap();
            let m = margin_of(channels, &cand, sel, power, frame, mode, layer_phi()).unwrap();
            if m >= cur { phases = cand; cur = m; }
        }
        if (cur - before).abs() <= params.eps_conv * cur.abs().max(1e-9) { break; }
    }
    (phases, cur)
}
fn layer_phi() -> f64 { QPSK_PHI }

fn main() {
    let cfg = ScenarioConfig {
        nx: 4, ny: 4, layers: 3, antennas: 3, users: 3, slots: 32,
        master_seed: 2026,
        optimizer: OptimizerConfig {
            max_outer: 16,
            descent: DescentParams { max_inner: 150, ..Default::default() },
            ..Default::default()
        },
        ..Default::default()
    };
    let model = ChannelModel::new(&cfg).unwrap();
    let params = RomParams::from_optimizer(&cfg.optimizer);
    let sel: Vec<usize> = (0..cfg.users).collect();
    let uniform = SpherePoint::uniform(cfg.users);
    let stage_sets: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0, 0.5, 0.25], vec![2.0, 1.0, 0.5]];
    for (stages, restarts) in stage_sets.iter().flat_map(|st| [1usize, 3].map(|r| (st.clone(), r))) {
        let mut wins = 0;
        let mut med = vec![];
        let t0 = std::time::Instant::now();
        for seed in 0..20u64 {
            let mut rc = derive_rng(cfg.master_seed, &[("frame", seed), ("channel", 0)]);
            let channels = model.sample(&mut rc).unwrap();
            let mut rb = derive_rng(cfg.master_seed, &[("frame", seed), ("bits", 0)]);
            let frame = Frame::random(cfg.users, cfg.slots, &cfg.saleh, &mut rb);
            let best = |mode: NldMode| -> (PhaseStack, f64) {
                let mut out: Option<(PhaseStack, f64)> = None;
                for r in 0..restarts as u64 {
                    let mut ri = derive_rng(cfg.master_seed, &[("frame", seed), ("init", r)]);
                    let init = PhaseStack::random(cfg.layers, channels.atoms(), &mut ri);
                    let (ph, m) = rom_homotopy(&channels, &sel, Some(uniform.vec()), &frame, mode, &params, init, &stages);
                    if out.as_ref().map_or(true, |(_, b)| m > *b) { out = Some((ph, m)); }
                }
                out.unwrap()
            };
            let (_, aw) = best(NldMode::Aware);
            let (ph_un, _) = best(NldMode::Unaware);
            let un = margin_of(&channels, &ph_un, &sel, Some(uniform.vec()), &frame, NldMode::Aware, QPSK_PHI).unwrap();
            if aw > un { wins += 1; }
            med.push(aw);
        }
        med.sort_by(f64::total_cmp);
        println!("stages {stages:?} restarts {restarts}: wins {wins}/20, median aware {:.4e}, {:.1}s", med[10], t0.elapsed().as_secs_f64());
    }
}
